import io
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from kurasync import __version__
from kurasync.cli import main
from kurasync.importo import load_case


CASES = Path(__file__).parents[1] / 'templates' / 'cases'
TEMPLATES = Path(__file__).parents[1] / 'templates'


@pytest.fixture
def runner():
    return CliRunner()


def _case(tmp_path, omega, name='case.json'):
    """Triangle case with the given frequencies"""
    d = {'schema_version': 1, 'n': 3, 'name': 'tri',
         'edges': [{'i': 0, 'j': 1, 'w': 1.0}, {'i': 0, 'j': 2, 'w': 1.0},
                   {'i': 1, 'j': 2, 'w': 1.0}],
         'omega': omega}
    path = tmp_path / name
    path.write_text(json.dumps(d))
    return str(path)


def _table(path):
    return pd.read_csv(path, comment='#')


def _header(path):
    return [line for line in Path(path).read_text().splitlines() if line.startswith('#')]


def test_version(runner):
    result = runner.invoke(main, ['--version'])
    assert result.exit_code == 0
    assert __version__ in result.output


# solve
# -----
def test_solve_path2(runner, tmp_path):
    out = tmp_path / 'solution.json'
    result = runner.invoke(main, ['solve', '--case', str(CASES / 'path2.json'),
                                  '--out', str(out)])
    assert result.exit_code == 0, result.output
    bundle = json.loads(out.read_text())
    assert bundle['certified'] is True
    assert bundle['edge_angles'] == pytest.approx([np.pi/6], abs=1e-12)
    assert bundle['x'] == pytest.approx([np.pi/12, -np.pi/12], abs=1e-12)
    assert bundle['config']['method'] == 'series'


@pytest.mark.parametrize('method', ['series', 'newton', 'fixed-point'])
def test_solve_methods_agree(runner, tmp_path, method):
    out = tmp_path / f'{method}.json'
    result = runner.invoke(main, ['solve', '--case', str(CASES / 'triangle.json'),
                                  '--method', method, '--out', str(out)])
    assert result.exit_code == 0, result.output
    bundle = json.loads(out.read_text())
    # eta = (0.2, 0.2, 0) is exact on the triangle
    assert bundle['phi'] == pytest.approx([0.2, 0.2, 0.0], abs=1e-10)
    assert bundle['equivalence']['max_mismatch'] < 1e-9


def test_solve_stdout(runner):
    result = runner.invoke(main, ['solve', '--case', str(CASES / 'path2.json')])
    assert result.exit_code == 0
    assert '"certified": true' in result.output


def test_solve_uncertified(runner, tmp_path):
    out = tmp_path / 'solution.json'
    result = runner.invoke(main, ['solve', '--case', _case(tmp_path, [1.4, -0.7, -0.7]),
                                  '--out', str(out)])
    assert result.exit_code == 2
    bundle = json.loads(out.read_text())
    assert bundle['certified'] is False
    assert bundle['gamma_star'] is None


def test_solve_without_solution(runner, tmp_path):
    case = str(CASES / 'path2.json')
    result = runner.invoke(main, ['solve', '--case', _case(tmp_path, [4.0, -2.0, -2.0])])
    assert result.exit_code == 3
    assert '"reason": "method_failed"' in result.output
    result = runner.invoke(main, ['solve', '--case', case, '--method', 'newton',
                                  '--max-iter', '1', '--tol', '1e-300'])
    assert result.exit_code == 3
    assert 'max_iterations_exceeded' in result.output


def test_solve_rejects_uncentered(runner, tmp_path):
    case = _case(tmp_path, [1.0, 0.0, 0.0])
    result = runner.invoke(main, ['solve', '--case', case])
    assert result.exit_code == 4
    assert '"reason": "uncentered_frequencies"' in result.output
    result = runner.invoke(main, ['solve', '--case', case, '--center', '--method', 'newton'])
    assert result.exit_code == 0


def test_solve_rejects_even_order(runner):
    result = runner.invoke(main, ['solve', '--case', str(CASES / 'path2.json'),
                                  '--order', '4'])
    assert result.exit_code == 4
    assert 'domain_error' in result.output


def test_solve_parse_error(runner, tmp_path):
    path = tmp_path / 'bad.jsonl'
    path.write_text('{"schema_version": 1, "n": 2, "omega": [1, -1]}\n{"i": 0, "w": 1}\n')
    result = runner.invoke(main, ['solve', '--case', str(path)])
    assert result.exit_code == 4
    assert 'parse_error' in result.output
    assert 'line 2' in result.output


# test / scan
# -----------
def test_test_command(runner, tmp_path):
    out = tmp_path / 'tests.csv'
    result = runner.invoke(main, ['test', '--case', str(CASES / 'triangle.json'),
                                  '--out', str(out)])
    assert result.exit_code == 0, result.output
    df = _table(out)
    assert list(df['test']) == ['T0', 'T1', 'T2', 'AT1', 'AT3', 'AT5', 'AT7']
    assert df['passed'].all()
    assert '# command: "test"' in _header(out)
    assert '# case: "triangle"' in _header(out)


def test_test_command_to_stdout(runner):
    result = runner.invoke(main, ['test', '--case', str(CASES / 'triangle.json'),
                                  '--tests', 'T1,AT3', '--gamma', '0.1'])
    assert result.exit_code == 0
    df = pd.read_csv(io.StringIO(result.stdout), comment='#')
    assert list(df['test']) == ['T1', 'AT3']
    assert list(df['passed']) == [True, False]


def test_seed_is_echoed_by_deterministic_commands(runner, tmp_path):
    out = tmp_path / 'tests.csv'
    args = ['test', '--case', str(CASES / 'triangle.json'), '--out', str(out)]
    assert runner.invoke(main, args + ['--seed', '5']).exit_code == 0
    assert '# seed: 5' in _header(out)
    first = _table(out)
    assert runner.invoke(main, args + ['--seed', '6']).exit_code == 0
    pd.testing.assert_frame_equal(first, _table(out))

    bundle = tmp_path / 'solution.json'
    result = runner.invoke(main, ['solve', '--case', str(CASES / 'path2.json'),
                                  '--seed', '5', '--out', str(bundle)])
    assert result.exit_code == 0, result.output
    assert json.loads(bundle.read_text())['config']['seed'] == 5

    scan = tmp_path / 'scan.csv'
    result = runner.invoke(main, ['scan', '--case', str(CASES / 'path2.json'),
                                  '--tests', 'T1', '--out', str(scan)],
                           env={'KURAMOTO_SEED': '9'})
    assert result.exit_code == 0, result.output
    assert '# seed: 9' in _header(scan)


def test_unknown_test_name(runner):
    result = runner.invoke(main, ['test', '--case', str(CASES / 'triangle.json'),
                                  '--tests', 'T9'])
    assert result.exit_code == 4


def test_scan_command(runner, tmp_path):
    out = tmp_path / 'scan.csv'
    result = runner.invoke(main, ['scan', '--case', str(CASES / 'path2.json'),
                                  '--tests', 'T0,AT1', '--out', str(out)])
    assert result.exit_code == 0, result.output
    df = _table(out)
    # ||eta_nom|| = 0.5, so the solution is lost at K = 2
    assert df['K_C'].iloc[0] == pytest.approx(2.0, rel=3e-3)
    assert np.allclose(df['critical_ratio'], 1.0, atol=5e-3)
    assert '# convention: "scaled_injection"' in _header(out)


def test_scan_uniform_gain(runner, tmp_path):
    out = tmp_path / 'scan.csv'
    result = runner.invoke(main, ['scan', '--case', str(CASES / 'path2.json'),
                                  '--tests', 'T1', '--convention', 'uniform_gain',
                                  '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert _table(out)['K_C'].iloc[0] == pytest.approx(0.5, rel=3e-3)


# gen / series-gen
# ----------------
def test_gen_round_trip(runner, tmp_path):
    out = tmp_path / 'er.json'
    args = ['gen', '--model', 'er', '--n', '12', '--p', '0.4', '--dist', 'uniform',
            '--weights', 'uniform']
    result = runner.invoke(main, args + ['--seed', '3', '--out', str(out)])
    assert result.exit_code == 0, result.output
    case = load_case(out)
    assert case.g.n == 12
    assert case.convention == 'uniform_gain'
    assert case.metadata['seed'] == 3

    again = runner.invoke(main, args, env={'KURAMOTO_SEED': '3'})
    assert again.exit_code == 0
    assert json.loads(again.stdout) == json.loads(out.read_text())


def test_gen_rejects_bad_parameters(runner):
    result = runner.invoke(main, ['gen', '--model', 'er', '--p', '1.5'])
    assert result.exit_code == 4
    assert 'validation_error' in result.output
    result = runner.invoke(main, ['gen', '--model', 'ws', '--n', '3'])
    assert result.exit_code == 4
    assert '"reason": "validation_error"' in result.output


def test_series_gen(runner):
    result = runner.invoke(main, ['series-gen', '--order', '7'])
    assert result.exit_code == 0
    assert 'A3 = -Pcyc( 1/6 * A1^3 )' in result.output
    assert '5/112 * A1^7' in result.output
    csv = runner.invoke(main, ['series-gen', '--order', '5', '--format', 'csv'])
    df = pd.read_csv(io.StringIO(csv.stdout))
    assert sorted(df['coefficient']) == ['1/2', '1/6', '3/40']


def test_series_gen_rejects_order(runner):
    result = runner.invoke(main, ['series-gen', '--order', '43'])
    assert result.exit_code == 4


# sweep / bench
# -------------
SWEEP_ARGS = ['sweep', '--n', '8', '--p', '0.5', '--trials', '2', '--orders', '1,3',
              '--dK', '0.01', '--resolution', '0.01', '--seed', '5']


def test_sweep_is_reproducible(runner, tmp_path):
    a, b = tmp_path / 'a.csv', tmp_path / 'b.csv'
    assert runner.invoke(main, SWEEP_ARGS + ['--out', str(a), '--summary']).exit_code == 0
    assert runner.invoke(main, SWEEP_ARGS + ['--out', str(b)]).exit_code == 0
    assert a.read_bytes() == b.read_bytes()
    df = _table(a)
    assert len(df) == 2
    assert 'K_AT3' in df.columns
    summary = _table(tmp_path / 'a_summary.csv')
    assert set(summary['test']) == {'T0', 'T1', 'T2', 'AT1', 'AT3'}


def test_sweep_config_and_overrides(runner, tmp_path):
    out = tmp_path / 'sweep.csv'
    args = ['sweep', '--config', str(TEMPLATES / 'sweep_desk.json'), '--n', '8',
            '--p', '0.5', '--trials', '1', '--orders', '1', '--dK', '0.01',
            '--resolution', '0.01', '--out', str(out)]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    header = _header(out)
    assert '# n: 8' in header
    assert '# seed: 42' in header
    assert '# dist: ["bipolar"]' in header
    assert len(_table(out)) == 1


def test_bench_on_case(runner, tmp_path):
    out = tmp_path / 'bench.csv'
    result = runner.invoke(main, ['bench', '--case', str(CASES / 'triangle.json'),
                                  '--methods', 'series5,newton', '--repeats', '1',
                                  '--out', str(out)])
    assert result.exit_code == 0, result.output
    df = _table(out)
    assert list(df['method']) == ['series5', 'newton']
    assert (df['status'] == 'ok').all()
    assert (df['instance'] == 'triangle').all()


def test_bench_generated(runner, tmp_path):
    out = tmp_path / 'bench.csv'
    result = runner.invoke(main, ['bench', '--n', '15', '--p', '0.5', '--instances', '2',
                                  '--methods', 'fixed-point', '--repeats', '1',
                                  '--out', str(out)])
    assert result.exit_code == 0, result.output
    df = _table(out)
    assert len(df) == 2
    assert (df['status'] == 'ok').all()
