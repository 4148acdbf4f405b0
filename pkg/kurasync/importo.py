"""Reading case files and run configurations

A case is either one JSON document

    {"schema_version": 1, "n": 3,
     "edges": [{"i": 0, "j": 1, "w": 1.0}, ...],
     "omega": [2.0, -1.0, -1.0],
     "convention": "scaled_injection", "name": "triangle"}

or line-delimited JSON whose first line carries everything but the edges and
whose remaining lines are one edge object each.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError
from .graph import build_graph, check_centered
from .utils import center as center_frequencies


__all__ = ['Case',
           'SCHEMA_VERSION',
           'load_case',
           'parse_case',
           'case_from_dict',
           'load_config']


SCHEMA_VERSION = 1
CONVENTIONS = ('scaled_injection', 'uniform_gain')


@dataclass(frozen=True, eq=False)
class Case:
    """Validated graph and frequencies plus case metadata"""
    g: object
    omega: np.ndarray
    name: str = ''
    source: str = ''
    convention: str = 'scaled_injection'
    metadata: dict = field(default_factory=dict)


def _field(d, key, kind, line=None):
    if key not in d:
        raise ParseError("Missing required field", line=line, field=key)
    value = d[key]
    if kind is int and not (isinstance(value, int) and not isinstance(value, bool)):
        raise ParseError(f"Expected an integer, got {value!r}", line=line, field=key)
    if kind is float and not (isinstance(value, (int, float)) and not isinstance(value, bool)):
        raise ParseError(f"Expected a number, got {value!r}", line=line, field=key)
    if kind is list and not isinstance(value, list):
        raise ParseError(f"Expected a list, got {type(value).__name__}", line=line, field=key)
    return value


def _edge(d, line=None):
    if not isinstance(d, dict):
        raise ParseError(f"Edge must be an object, got {d!r}", line=line, field='edges')
    return (_field(d, 'i', int, line), _field(d, 'j', int, line),
            _field(d, 'w', float, line))


def case_from_dict(d, edge_lines=None, center=False):
    """Validate a decoded case document

    Parameters
    ----------
    d : dict
        Decoded header (with "edges" unless `edge_lines` is given)
    edge_lines : list of (int, dict) (optional)
        Line number and decoded object of each edge line (JSONL form)
    center : bool (optional)
        Subtract the mean of omega instead of rejecting uncentered input

    Returns
    -------
    case : `Case`
    """
    if not isinstance(d, dict):
        raise ParseError("Case must be a JSON object", line=1)
    header_line = 1 if edge_lines is not None else None
    version = _field(d, 'schema_version', int, header_line)
    if version != SCHEMA_VERSION:
        raise ParseError(f"Unsupported schema version {version}",
                         line=header_line, field='schema_version')
    n = _field(d, 'n', int, header_line)

    if edge_lines is None:
        edges = [_edge(e) for e in _field(d, 'edges', list)]
    else:
        edges = [_edge(e, line) for line, e in edge_lines]

    omega = _field(d, 'omega', list, header_line)
    if len(omega) != n:
        raise ParseError(f"Expected {n} frequencies, got {len(omega)}",
                         line=header_line, field='omega')
    for value in omega:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"Frequency {value!r} is not a number",
                             line=header_line, field='omega')

    convention = d.get('convention', 'scaled_injection')
    if convention not in CONVENTIONS:
        raise ParseError(f"Unknown convention {convention!r}",
                         line=header_line, field='convention')

    g = build_graph(n, edges)
    omega = np.array(omega, dtype=float)
    omega = center_frequencies(omega) if center else check_centered(omega, n)
    known = {'schema_version', 'n', 'edges', 'omega', 'convention', 'name', 'source'}
    return Case(g=g, omega=omega,
                name=str(d.get('name', '')),
                source=str(d.get('source', '')),
                convention=convention,
                metadata={k: v for k, v in d.items() if k not in known})


def load_case(path, center=False):
    """Read a case file in either JSON or line-delimited JSON form

    Raises
    ------
    ParseError
        Malformed JSON or missing/ill-typed fields, with line and field
    ValidationError
        Invalid graph (see `build_graph`)
    UncenteredFrequencies
        If omega is not centered and `center` is False
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"Cannot read case file {path}: {exc.strerror}") from exc

    try:
        return case_from_dict(json.loads(text), center=center)
    except json.JSONDecodeError as exc:
        # A second top-level value means line-delimited JSON
        if exc.msg != 'Extra data':
            raise ParseError(f"Invalid JSON: {exc.msg}", line=exc.lineno) from exc

    records = []
    for line, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            records.append((line, json.loads(raw)))
        except json.JSONDecodeError as exc:
            raise ParseError(f"Invalid JSON: {exc.msg}", line=line) from exc
    (_, header), edge_lines = records[0], records[1:]
    return case_from_dict(header, edge_lines=edge_lines, center=center)


def parse_case(path, center=False):
    """Graph and centered frequencies of a case file"""
    case = load_case(path, center=center)
    return case.g, case.omega


def load_config(path):
    """Run configuration from a JSON template"""
    path = Path(path)
    try:
        config = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"Cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"Invalid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(config, dict):
        raise ParseError("Config must be a JSON object", line=1)
    return config
