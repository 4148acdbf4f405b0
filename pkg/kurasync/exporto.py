"""Writing cases, tables and result bundles

Every file is written to a temporary sibling first and moved into place
with `os.replace`, so readers never see partial output.
"""
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .importo import SCHEMA_VERSION


__all__ = ['atomic_write',
           'case_to_dict',
           'write_case',
           'format_table',
           'write_table',
           'to_jsonable',
           'dumps',
           'write_json']


# 17 significant digits round-trip every double
FLOAT_FORMAT = '%.17g'


@contextmanager
def atomic_write(path):
    """Open a temporary file next to `path`; rename over it on success"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', newline='') as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def case_to_dict(g, omega, name='', source='', convention='scaled_injection', **metadata):
    """Case document in canonical edge order"""
    d = {'schema_version': SCHEMA_VERSION,
         'n': g.n,
         'edges': [{'i': i, 'j': j, 'w': w} for i, j, w in g.edges],
         'omega': [float(x) for x in omega],
         'convention': convention}
    if name:
        d['name'] = name
    if source:
        d['source'] = source
    d.update(metadata)
    return d


def write_case(path, g, omega, **kwargs):
    """Write a case file as a single JSON document"""
    d = case_to_dict(g, omega, **kwargs)
    with atomic_write(path) as f:
        json.dump(d, f, indent=2)
        f.write('\n')


def format_table(df, config=None):
    """CSV text with the run configuration echoed as '#' comment lines

    Parameters
    ----------
    df : `pd.DataFrame`
    config : dict (optional)
        Written one `# key: value` line per item, values JSON encoded

    Returns
    -------
    text : str
    """
    lines = [f"# {key}: {json.dumps(to_jsonable(value))}"
             for key, value in (config or {}).items()]
    body = df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return ''.join(line + '\n' for line in lines) + body


def write_table(df, path, config=None):
    """Write `format_table` output atomically"""
    text = format_table(df, config)
    with atomic_write(path) as f:
        f.write(text)


def to_jsonable(obj):
    """Recursively convert numpy scalars and arrays to plain Python"""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        # JSON has no infinities; keep them readable
        if np.isinf(obj):
            return 'inf' if obj > 0 else '-inf'
        if np.isnan(obj):
            return None
        return obj
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), indent=2)


def write_json(obj, path):
    """Write a result bundle as indented JSON"""
    text = dumps(obj)
    with atomic_write(path) as f:
        f.write(text + '\n')
