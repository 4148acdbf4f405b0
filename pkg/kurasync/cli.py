"""Command line interface

Exit codes
----------
0  solved and certified (or command succeeded)
1  usage error
2  solved but not certified by test T0
3  solver, scan or experiment failure
4  invalid input
5  numerical error

Errors are reported on stderr as a JSON object with `reason` and `message`.
"""
import json
import logging
from pathlib import Path

import click
import numpy as np
import pandas as pd
from click.core import ParameterSource

from . import __version__
from .errors import DomainError, KurasyncError, MethodFailed, NotAFlowSine
from .experiments import (BENCH_METHODS, accuracy_sweep, records_to_frame,
                          scale_to_load, summarize_sweep, sweep_tests, timing_bench)
from .exporto import (atomic_write, case_to_dict, dumps, format_table, write_case,
                      write_json, write_table)
from .graph import eta as compute_eta
from .importo import load_case, load_config
from .random_models import (MODELS, FrequencySpec, ModelSpec, gen_frequencies,
                            gen_graph, split_seeds)
from .series import DEFAULT_ORDER, evaluate_terms, format_symbolic, symbolic_terms, test_T0
from .solvers import (FIXED_POINT_MAX_ITER, NEWTON_MAX_ITER, TOL, check_equivalence,
                      recover_angles, residual_unconstrained, solve_fixed_point,
                      solve_newton)
from .synctests import (CONVENTIONS, DEFAULT_TESTS, DK, GAMMA_STOP, RESOLUTION, U_MAX,
                        critical_ratios, run_tests)
from .utils import inf_norm


logger = logging.getLogger(__name__)

SEED_ENVVAR = 'KURAMOTO_SEED'
EXPLICIT = (ParameterSource.COMMANDLINE, ParameterSource.ENVIRONMENT)


class KurasyncGroup(click.Group):
    """Maps package errors to exit codes and a JSON reason on stderr"""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except KurasyncError as exc:
            click.echo(json.dumps({'reason': exc.reason, 'message': str(exc)}), err=True)
            ctx.exit(exc.exit_code)


def _split(kind):
    """Callback parsing comma-separated option values"""
    def callback(ctx, param, value):
        if value is None or not isinstance(value, str):
            return value
        try:
            return [kind(v.strip()) for v in value.split(',') if v.strip()]
        except ValueError:
            raise click.BadParameter(f"expected comma-separated {kind.__name__} values")
    return callback


def _emit_table(df, out, config):
    if out:
        write_table(df, out, config)
        click.echo(f"Wrote {click.style(str(len(df)), bold=True)} rows to "
                   f"{click.style(str(out), bold=True)}", err=True)
    else:
        click.echo(format_table(df, config), nl=False)


def _emit_json(bundle, out):
    if out:
        write_json(bundle, out)
        click.echo(f"Wrote {click.style(str(out), bold=True)}", err=True)
    else:
        click.echo(dumps(bundle))


def _config(ctx, **extra):
    config = {'command': ctx.info_name, 'version': __version__}
    config.update({k: v for k, v in ctx.params.items() if k != 'out'})
    config.update(extra)
    return config


case_option = click.option('--case', 'case_path', required=True,
                           type=click.Path(exists=True, dir_okay=False),
                           help="Case file (JSON or line-delimited JSON)")
center_option = click.option('--center', is_flag=True,
                             help="Subtract the mean of omega instead of rejecting it")
out_option = click.option('--out', type=click.Path(dir_okay=False),
                          help="Output file (stdout if omitted)")
seed_option = click.option('--seed', type=int, default=0, envvar=SEED_ENVVAR,
                           show_default=True, help=f"Master seed (env {SEED_ENVVAR})")


@click.group(cls=KurasyncGroup)
@click.option('-v', '--verbose', count=True, help="-v for INFO, -vv for DEBUG")
@click.version_option(__version__)
def main(verbose):
    """Frequency synchronization of heterogeneous Kuramoto networks."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')


@main.command()
@case_option
@click.option('--method', type=click.Choice(['series', 'newton', 'fixed-point']),
              default='series', show_default=True)
@click.option('--order', type=int, default=DEFAULT_ORDER, show_default=True,
              help="Truncation order of the series method")
@click.option('--tol', type=float, default=TOL, show_default=True)
@click.option('--max-iter', type=int, default=None,
              help=f"Iteration cap (newton {NEWTON_MAX_ITER}, "
                   f"fixed-point {FIXED_POINT_MAX_ITER})")
@center_option
@seed_option
@out_option
@click.pass_context
def solve(ctx, case_path, method, order, tol, max_iter, center, seed, out):
    """Solve for the synchronized angles of a case."""
    case = load_case(case_path, center=center)
    g, omega = case.g, case.omega
    report = test_T0(g, omega)
    eta_vec = compute_eta(g, omega)

    iterations = None
    se = evaluate_terms(g.pp, eta_vec, order) if method == 'series' else None
    try:
        if method == 'series':
            phi = se.partial_sums[-1]
            residual = inf_norm(residual_unconstrained(g.pp, eta_vec, phi))
            x = recover_angles(g, phi, check=False)
        elif method == 'fixed-point':
            outcome = solve_fixed_point(g.pp, eta_vec, tol=tol,
                                        max_iter=max_iter or FIXED_POINT_MAX_ITER)
            phi, residual, iterations = outcome.solution, outcome.residual_inf, outcome.iterations
            x = recover_angles(g, phi)
        else:
            outcome = solve_newton(g, omega, tol=tol, max_iter=max_iter or NEWTON_MAX_ITER)
            x, residual, iterations = outcome.solution, outcome.residual_inf, outcome.iterations
            phi = np.sin(g.B.T @ x)
    except (DomainError, NotAFlowSine) as exc:
        raise MethodFailed(f"{method} produced no admissible solution: {exc}") from exc

    edge_angles = g.B.T @ x
    bundle = {'config': _config(ctx),
              'case': case.name,
              'certified': report.passes_T0,
              'T0': report.to_dict(),
              'gamma_star': report.gamma_star,
              'iterations': iterations,
              'residual': residual,
              'phi': phi,
              'x': x,
              'edge_angles': edge_angles,
              'max_edge_angle': inf_norm(edge_angles),
              'equivalence': check_equivalence(g, omega, x).to_dict()}
    _emit_json(bundle, out)
    if not report.passes_T0:
        logger.warning("Solution is not certified: ||eta|| = %.6g >= h(||P_cyc||) = %.6g.",
                       report.eta_norm, report.h_of_pcyc)
        ctx.exit(2)


@main.command()
@case_option
@click.option('--tests', default=','.join(DEFAULT_TESTS), show_default=True,
              callback=_split(str), help="Comma-separated tests, e.g. T0,T1,AT3")
@click.option('--gamma', type=float, default=np.pi/2, show_default=True,
              help="Target angle of the approximate tests")
@center_option
@seed_option
@out_option
@click.pass_context
def test(ctx, case_path, tests, gamma, center, seed, out):
    """Run synchronization tests on a case."""
    case = load_case(case_path, center=center)
    reports = run_tests(case.g, case.omega, tests=tests, gamma=gamma)
    df = pd.DataFrame([r.to_dict() for r in reports])
    _emit_table(df, out, _config(ctx, case=case.name))


@main.command()
@case_option
@click.option('--dK', 'dK', type=float, default=DK, show_default=True,
              help="Continuation step in normalized load")
@click.option('--gamma', type=float, default=np.pi/2, show_default=True,
              help="Target angle of the approximate tests")
@click.option('--gamma-stop', type=float, default=GAMMA_STOP, show_default=True,
              help="Edge angle at which the solution counts as lost")
@click.option('--resolution', type=float, default=RESOLUTION, show_default=True)
@click.option('--tests', default=','.join(DEFAULT_TESTS), show_default=True,
              callback=_split(str))
@click.option('--convention', type=click.Choice(CONVENTIONS), default=None,
              help="Coupling convention (default: from the case file)")
@click.option('--u-max', type=float, default=U_MAX, show_default=True,
              help="Largest normalized load probed")
@center_option
@seed_option
@out_option
@click.pass_context
def scan(ctx, case_path, dK, gamma, gamma_stop, resolution, tests, convention, u_max,
         center, seed, out):
    """Critical coupling K_C and test thresholds K_T of a case."""
    case = load_case(case_path, center=center)
    convention = convention or case.convention
    result = critical_ratios(case.g, case.omega, tests=tests, gamma=gamma, dK=dK,
                             resolution=resolution, convention=convention,
                             gamma_stop=gamma_stop, u_max=u_max)
    config = _config(ctx, case=case.name, convention=convention,
                     eta_nom_norm=result.eta_nom_norm)
    _emit_table(result.to_frame(), out, config)


# Sweep defaults (desk scale); `--config` and explicit options override
SWEEP_DEFAULTS = {'model': ['er'], 'n': 20, 'p': [0.2, 0.5, 0.8], 'dist': ['bipolar'],
                  'trials': 30, 'orders': [1, 3, 5, 7], 'gamma': np.pi/2,
                  'convention': 'uniform_gain', 'weights': 'unit', 'ws_neighbors': 4,
                  'dK': DK, 'resolution': RESOLUTION, 'seed': 0, 'threads': 1}


@main.command()
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
              help="JSON preset, e.g. templates/sweep_full.json")
@click.option('--model', default='er', callback=_split(str),
              help=f"Comma-separated models from {MODELS}")
@click.option('--n', type=int, default=20)
@click.option('--p', default='0.2,0.5,0.8', callback=_split(float))
@click.option('--dist', default='bipolar', callback=_split(str),
              help="Comma-separated frequency distributions (uniform, bipolar)")
@click.option('--trials', type=int, default=30)
@click.option('--orders', default='1,3,5,7', callback=_split(int))
@click.option('--gamma', type=float, default=np.pi/2)
@click.option('--convention', type=click.Choice(CONVENTIONS), default='uniform_gain')
@click.option('--weights', type=click.Choice(['unit', 'uniform']), default='unit')
@click.option('--ws-neighbors', type=click.Choice(['2', '4']), default='4')
@click.option('--dK', 'dK', type=float, default=DK)
@click.option('--resolution', type=float, default=RESOLUTION)
@seed_option
@click.option('--threads', type=int, default=1, help="Worker processes")
@click.option('--summary', is_flag=True, help="Also emit per-realization means and stds")
@out_option
@click.pass_context
def sweep(ctx, config_path, summary, out, **options):
    """Approximate-test accuracy over random graph realizations."""
    settings = dict(SWEEP_DEFAULTS)
    if config_path:
        settings.update(load_config(config_path))
    for key, value in options.items():
        if ctx.get_parameter_source(key) in EXPLICIT or key not in settings:
            settings[key] = value
    settings['ws_neighbors'] = int(settings['ws_neighbors'])

    records = accuracy_sweep(models=settings['model'], p_grid=settings['p'],
                             dists=settings['dist'], trials=settings['trials'],
                             n=settings['n'], gamma=settings['gamma'],
                             orders=settings['orders'], seed=settings['seed'],
                             convention=settings['convention'], dK=settings['dK'],
                             resolution=settings['resolution'],
                             weight_dist=settings['weights'],
                             ws_neighbors=settings['ws_neighbors'],
                             threads=settings['threads'])
    tests = sweep_tests(settings['orders'])
    df_records = records_to_frame(records, tests)
    config = {'command': 'sweep', 'version': __version__}
    config.update({k: v for k, v in settings.items() if k != 'threads'})
    _emit_table(df_records, out, config)

    if summary:
        df_summary = summarize_sweep(df_records, tests)
        summary_out = None
        if out:
            summary_out = Path(out).with_name(Path(out).stem + '_summary.csv')
        _emit_table(df_summary, summary_out, config)


@main.command()
@click.option('--case', 'case_paths', multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Benchmark these cases instead of generated ones")
@click.option('--n', type=int, default=120, show_default=True)
@click.option('--p', type=float, default=0.8, show_default=True)
@click.option('--instances', type=int, default=3, show_default=True)
@click.option('--load', type=float, default=0.5, show_default=True,
              help="Generated ||eta|| as a fraction of h(||P_cyc||)")
@click.option('--methods', default=','.join(BENCH_METHODS), show_default=True,
              callback=_split(str))
@click.option('--repeats', type=int, default=5, show_default=True)
@click.option('--include-precompute', is_flag=True,
              help="Time L^+, B^T L^+ and P_cyc inside every method")
@seed_option
@out_option
@click.pass_context
def bench(ctx, case_paths, n, p, instances, load, methods, repeats, include_precompute,
          seed, out):
    """Time series, fixed-point and Newton solvers on T0-passing instances."""
    if case_paths:
        cases = [load_case(path) for path in case_paths]
        bench_instances = [(c.name or Path(path).stem, c.g, c.omega)
                           for c, path in zip(cases, case_paths)]
    else:
        bench_instances = []
        for i, instance_seed in enumerate(split_seeds(seed, instances)):
            graph_seed, frequency_seed = split_seeds(instance_seed, 2)
            g = gen_graph(ModelSpec(model='er', n=n, p=p, seed=graph_seed,
                                    weight_dist='uniform'))
            omega = gen_frequencies(FrequencySpec(dist='uniform', n=n, seed=frequency_seed))
            bench_instances.append((f"er-{n}-{p}-{i}", g, scale_to_load(g, omega, load)))
    df = timing_bench(bench_instances, methods=methods, repeats=repeats,
                      include_precompute=include_precompute)
    _emit_table(df, out, _config(ctx))


@main.command()
@click.option('--model', type=click.Choice(MODELS), default='er', show_default=True)
@click.option('--n', type=int, default=20, show_default=True)
@click.option('--p', type=float, default=0.5, show_default=True)
@click.option('--dist', type=click.Choice(['uniform', 'bipolar']), default='bipolar',
              show_default=True)
@click.option('--a', type=float, default=1.0, show_default=True,
              help="Half-width of the uniform frequency distribution")
@click.option('--weights', type=click.Choice(['unit', 'uniform']), default='unit',
              show_default=True)
@click.option('--w-max', type=float, default=10.0, show_default=True)
@click.option('--ws-neighbors', type=click.Choice(['2', '4']), default='4', show_default=True)
@click.option('--convention', type=click.Choice(CONVENTIONS), default='uniform_gain',
              show_default=True)
@seed_option
@out_option
@click.pass_context
def gen(ctx, model, n, p, dist, a, weights, w_max, ws_neighbors, convention, seed, out):
    """Generate a random case file."""
    graph_seed, frequency_seed = split_seeds(seed, 2)
    g = gen_graph(ModelSpec(model=model, n=n, p=p, seed=graph_seed, weight_dist=weights,
                            w_max=w_max, ws_neighbors=int(ws_neighbors)))
    omega = gen_frequencies(FrequencySpec(dist=dist, n=n, seed=frequency_seed, a=a))
    name = f"{model}-n{n}-p{p}-{dist}-seed{seed}"
    kwargs = dict(name=name, source='kurasync gen', convention=convention, seed=seed)
    if out:
        write_case(out, g, omega, **kwargs)
        click.echo(f"Wrote {click.style(str(out), bold=True)}", err=True)
    else:
        click.echo(json.dumps(case_to_dict(g, omega, **kwargs), indent=2))


@main.command('series-gen')
@click.option('--order', type=int, default=DEFAULT_ORDER, show_default=True)
@click.option('--format', 'fmt', type=click.Choice(['text', 'latex', 'csv']),
              default='text', show_default=True)
@out_option
def series_gen(order, fmt, out):
    """Print the symbolic recursion for the series terms up to an order."""
    text = format_symbolic(symbolic_terms(order), fmt=fmt)
    if out:
        with atomic_write(out) as f:
            f.write(text)
        click.echo(f"Wrote {click.style(str(out), bold=True)}", err=True)
    else:
        click.echo(text, nl=False)
