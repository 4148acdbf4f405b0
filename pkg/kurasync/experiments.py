"""Experiments: series error curves, accuracy sweeps and solver timing"""
import logging
import time
from dataclasses import dataclass, field
from functools import partial
from itertools import product
from multiprocessing import Pool

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from .errors import KurasyncError, MethodFailed, ReferenceSolveFailed, SolverError
from .graph import build_graph, eta as compute_eta
from .random_models import FrequencySpec, ModelSpec, gen_frequencies, gen_graph, split_seeds
from .series import convergence_report, evaluate_terms, h, truncated_solution
from .solvers import (residual_node, residual_unconstrained, solve_fixed_point,
                      solve_newton)
from .synctests import DK, RESOLUTION, critical_ratios, parse_test_id
from .utils import inf_norm


__all__ = ['ErrorCurve',
           'SweepRecord',
           'scale_to_load',
           'sweep_tests',
           'error_curve',
           'sweep_jobs',
           'run_trial',
           'accuracy_sweep',
           'records_to_frame',
           'summarize_sweep',
           'timing_bench',
           'BENCH_METHODS']


logger = logging.getLogger(__name__)

SUFFICIENT_TESTS = ('T0', 'T1', 'T2')
BENCH_METHODS = ('series5', 'series7', 'fixed-point', 'newton')
# Every timed method must reach this residual or the cell is marked failed
BENCH_RESIDUAL = 1e-6


def scale_to_load(g, omega, fraction):
    """Rescale omega so that ||eta||_inf = fraction * h(||P_cyc||_inf)

    `fraction` < 1 gives a T0-passing instance with margin 1/fraction.
    """
    eta_norm = inf_norm(compute_eta(g, omega))
    if eta_norm == 0:
        return np.asarray(omega, dtype=float)
    return np.asarray(omega, dtype=float) * (fraction * h(g.pp.cyc_norm) / eta_norm)


# Error curves
# ------------
@dataclass(frozen=True, eq=False)
class ErrorCurve:
    """Series error S_k = ||sin(B^T x_ref) - (A_1 + ... + A_k)||_inf per order k"""
    instance_id: str
    orders: tuple
    S: np.ndarray
    series_residuals: np.ndarray
    reference: str
    reference_residual: float

    def to_frame(self):
        return pd.DataFrame({'instance': self.instance_id,
                             'order': self.orders,
                             'S_k': self.S,
                             'series_residual': self.series_residuals,
                             'reference': self.reference,
                             'reference_residual': self.reference_residual})


def error_curve(g, p_sd, max_order=13, instance_id=''):
    """Series truncation error against a Newton reference

    Order k here is the polynomial order of the partial sum, so the curve
    point at k = 2j + 1 sums the terms A_1, ..., A_{2j+1}.

    Parameters
    ----------
    g : `WeightedGraph`
    p_sd : (n,) array
        Centered injections
    max_order : int (optional)
        Highest odd order
    instance_id : str (optional)
        Label carried into the output

    Returns
    -------
    curve : `ErrorCurve`

    Raises
    ------
    ReferenceSolveFailed
        If Newton does not reach 1e-10
    """
    try:
        reference = solve_newton(g, p_sd)
    except SolverError as exc:
        raise ReferenceSolveFailed(f"Reference solve failed: {exc}",
                                   outcome=exc.outcome) from exc
    phi_ref = np.sin(g.B.T @ reference.solution)

    eta_vec = compute_eta(g, p_sd)
    se = evaluate_terms(g.pp, eta_vec, max_order)
    orders = tuple(range(1, max_order + 1, 2))
    S = np.array([inf_norm(phi_ref - s) for s in se.partial_sums])
    residuals = []
    for k in orders:
        try:
            residuals.append(inf_norm(residual_unconstrained(g.pp, eta_vec,
                                                             truncated_solution(se, k))))
        except KurasyncError:
            # Partial sum outside the arcsin domain
            residuals.append(np.inf)
    return ErrorCurve(instance_id=instance_id, orders=orders, S=S,
                      series_residuals=np.array(residuals),
                      reference='newton', reference_residual=reference.residual_inf)


# Accuracy sweeps
# ---------------
@dataclass(frozen=True)
class SweepRecord:
    """One (model, p, dist, trial) realization with its thresholds"""
    model: str
    p: float
    dist: str
    trial: int
    seed: int
    n: int
    m: int = 0
    K_C: float = np.nan
    K_T: dict = field(default_factory=dict)
    KT_over_KC: dict = field(default_factory=dict)
    KC_over_KT: dict = field(default_factory=dict)
    critical_ratio: dict = field(default_factory=dict)
    status: str = 'ok'
    reason: str = ''

    def to_row(self, tests):
        row = {'model': self.model, 'p': self.p, 'dist': self.dist,
               'trial': self.trial, 'seed': self.seed, 'n': self.n, 'm': self.m,
               'K_C': self.K_C}
        for test in tests:
            row[_column(test)] = self.K_T.get(test, np.nan)
        for test in tests:
            row[f"KC_over_KT_{test}"] = self.KC_over_KT.get(test, np.nan)
            row[f"KT_over_KC_{test}"] = self.KT_over_KC.get(test, np.nan)
            row[f"critical_ratio_{test}"] = self.critical_ratio.get(test, np.nan)
        row['status'] = self.status
        row['reason'] = self.reason
        return row


def _column(test):
    kind, k = parse_test_id(test)
    return f"K_T{k}" if kind == 'T' else f"K_AT{k}"


def sweep_tests(orders, sufficient=SUFFICIENT_TESTS):
    return tuple(sufficient) + tuple(f"AT{k}" for k in orders)


def sweep_jobs(models, p_grid, dists, trials, seed):
    """(model, p, dist, trial, seed) tuples in a fixed order with unique seeds"""
    realizations = list(product(models, p_grid, dists))
    seeds = split_seeds(seed, len(realizations) * trials)
    jobs = []
    for r, (model, p, dist) in enumerate(realizations):
        for trial in range(trials):
            jobs.append((model, float(p), dist, trial, seeds[r*trials + trial]))
    return jobs


def run_trial(job, n, tests, gamma=np.pi/2, convention='uniform_gain', dK=DK,
              resolution=RESOLUTION, weight_dist='unit', ws_neighbors=4):
    """Generate one instance and scan it; failures become inline records"""
    model, p, dist, trial, seed = job
    graph_seed, frequency_seed = split_seeds(seed, 2)
    m = 0
    try:
        g = gen_graph(ModelSpec(model=model, n=n, p=p, seed=graph_seed,
                                weight_dist=weight_dist, ws_neighbors=ws_neighbors))
        m = g.m
        omega = gen_frequencies(FrequencySpec(dist=dist, n=n, seed=frequency_seed))
        result = critical_ratios(g, omega, tests=tests, gamma=gamma, dK=dK,
                                 resolution=resolution, convention=convention)
    except KurasyncError as exc:
        logger.warning("Skipping %s p=%g %s trial %d (seed %d): %s",
                       model, p, dist, trial, seed, exc)
        return SweepRecord(model=model, p=p, dist=dist, trial=trial, seed=seed,
                           n=n, m=m, status='failed', reason=exc.reason)

    return SweepRecord(model=model, p=p, dist=dist, trial=trial, seed=seed,
                       n=n, m=m, K_C=result.K_C,
                       K_T=dict(result.K_T),
                       KT_over_KC={t: result.ratio_KT_KC(t) for t in tests},
                       KC_over_KT={t: result.ratio_KC_KT(t) for t in tests},
                       critical_ratio={t: result.critical_ratio(t) for t in tests})


def accuracy_sweep(models, p_grid, dists, trials, n, gamma=np.pi/2,
                   orders=(1, 3, 5, 7), sufficient=SUFFICIENT_TESTS, seed=0,
                   convention='uniform_gain', dK=DK, resolution=RESOLUTION,
                   weight_dist='unit', ws_neighbors=4, threads=1, progress=True):
    """Critical coupling ratios over random graph realizations

    Parameters
    ----------
    models : list of str
        Random graph models ('er', 'rgg', 'ws')
    p_grid : list of float
        Model parameters
    dists : list of str
        Frequency distributions ('uniform', 'bipolar')
    trials : int
        Random instances per (model, p, dist)
    n : int
        Nodes per graph
    gamma : float (optional)
        Target angle of the approximate tests
    orders : list of int (optional)
        Orders of the approximate tests
    sufficient : list of str (optional)
        Sufficient tests to include
    seed : int (optional)
        Master seed
    convention : str (optional)
        Coupling convention for the reported K values
    threads : int (optional)
        Worker processes; records keep the job order regardless
    progress : bool (optional)
        Show a progress bar

    Returns
    -------
    records : list of `SweepRecord`
    """
    tests = sweep_tests(orders, sufficient)
    jobs = sweep_jobs(models, p_grid, dists, trials, seed)
    trial_partial = partial(run_trial, n=n, tests=tests, gamma=gamma,
                            convention=convention, dK=dK, resolution=resolution,
                            weight_dist=weight_dist, ws_neighbors=ws_neighbors)

    if threads > 1 and len(jobs) > 1:
        with Pool(threads) as pool:
            records = list(tqdm(pool.imap(trial_partial, jobs), total=len(jobs),
                                desc='Sweep', disable=not progress))
    else:
        records = [trial_partial(job) for job in tqdm(jobs, desc='Sweep',
                                                      disable=not progress)]
    failed = sum(r.status != 'ok' for r in records)
    if failed:
        logger.warning("%d of %d sweep records failed.", failed, len(records))
    return records


def records_to_frame(records, tests):
    """Sweep records as a DataFrame with a fixed column order"""
    columns = list(SweepRecord(model='', p=0.0, dist='', trial=0, seed=0, n=0)
                   .to_row(tests))
    return pd.DataFrame([r.to_row(tests) for r in records], columns=columns)


def summarize_sweep(df_records, tests):
    """Mean and std of the ratios per (model, p, dist, test) over ok records

    Returns
    -------
    df_summary : `pd.DataFrame`
        Columns model, p, dist, test, count, mean/std of KC_over_KT and
        KT_over_KC, and mean |1 - K_C/K_T|
    """
    ok = df_records[df_records['status'] == 'ok']
    rows = []
    for (model, p, dist), group in ok.groupby(['model', 'p', 'dist'], sort=False):
        for test in tests:
            kc_kt = group[f"KC_over_KT_{test}"].astype(float)
            kt_kc = group[f"KT_over_KC_{test}"].astype(float)
            rows.append({'model': model, 'p': p, 'dist': dist, 'test': test,
                         'count': int(kc_kt.count()),
                         'mean_KC_over_KT': kc_kt.mean(),
                         'std_KC_over_KT': kc_kt.std(),
                         'mean_KT_over_KC': kt_kc.mean(),
                         'std_KT_over_KC': kt_kc.std(),
                         'mean_abs_error': (1 - kc_kt).abs().mean()})
    return pd.DataFrame(rows, columns=['model', 'p', 'dist', 'test', 'count',
                                       'mean_KC_over_KT', 'std_KC_over_KT',
                                       'mean_KT_over_KC', 'std_KT_over_KC',
                                       'mean_abs_error'])


# Timing
# ------
def _precompute(g):
    """Shared operators: L^+, B^T L^+ and the projections"""
    g = build_graph(g.n, g.edges)
    BtLp = g.B.T @ g.L_pinv
    # Projections are memoized on the fresh graph
    g.pp
    return g, BtLp


def _run_method(method, g, BtLp, omega):
    """Run one method; returns (output, residual function)"""
    if method in ('series5', 'series7'):
        order = int(method[-1])
        se = evaluate_terms(g.pp, BtLp @ omega, order)
        return truncated_solution(se, order), 'edge'
    if method == 'fixed-point':
        return solve_fixed_point(g.pp, BtLp @ omega).solution, 'edge'
    if method == 'newton':
        return solve_newton(g, omega).solution, 'node'
    raise MethodFailed(f"Unknown method '{method}'.")


def timing_bench(instances, methods=BENCH_METHODS, repeats=5,
                 include_precompute=False, progress=True):
    """Median wall-clock time of each method on each instance

    Precomputation of L^+, B^T L^+ and P_cyc is shared by all methods and
    timed separately unless `include_precompute` is set, in which case every
    repetition starts from a fresh graph.

    Parameters
    ----------
    instances : list of (str, `WeightedGraph`, array)
        Named T0-passing instances
    methods : list of str (optional)
        Any of 'series5', 'series7', 'fixed-point', 'newton'
    repeats : int (optional)
        Measurements per cell
    include_precompute : bool (optional)
        Time end to end

    Returns
    -------
    df_timing : `pd.DataFrame`
        One row per (instance, method) with median time, precompute time,
        output residual and status
    """
    rows = []
    for name, g, omega in tqdm(instances, desc='Bench', disable=not progress):
        omega = np.asarray(omega, dtype=float)
        t0 = time.perf_counter()
        g_pre, BtLp = _precompute(g)
        precompute_time = time.perf_counter() - t0
        eta_vec = BtLp @ omega
        if not convergence_report(g_pre.pp, eta_vec).passes_T0:
            logger.warning("Instance %s does not pass T0; methods may fail.", name)

        for method in methods:
            row = {'instance': name, 'method': method, 'repeats': repeats,
                   'precompute_time': precompute_time,
                   'include_precompute': include_precompute}
            residual = np.nan
            try:
                times = []
                for _ in range(repeats):
                    start = time.perf_counter()
                    if include_precompute:
                        g_run, BtLp_run = _precompute(g)
                    else:
                        g_run, BtLp_run = g_pre, BtLp
                    output, kind = _run_method(method, g_run, BtLp_run, omega)
                    times.append(time.perf_counter() - start)
                if kind == 'edge':
                    residual = inf_norm(residual_unconstrained(g_pre.pp, eta_vec, output))
                else:
                    residual = inf_norm(residual_node(g_pre, omega, output))
                if not residual < BENCH_RESIDUAL:
                    raise MethodFailed(f"{method} residual {residual:.3g} is not below "
                                       f"{BENCH_RESIDUAL}.")
                row.update(median_time=float(np.median(times)), residual=residual,
                           status='ok', reason='')
            except KurasyncError as exc:
                logger.warning("%s failed on %s: %s", method, name, exc)
                row.update(median_time=np.nan, residual=residual,
                           status='failed', reason=exc.reason)
            rows.append(row)

    return pd.DataFrame(rows, columns=['instance', 'method', 'repeats', 'median_time',
                                       'precompute_time', 'include_precompute',
                                       'residual', 'status', 'reason'])
