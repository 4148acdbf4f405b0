"""Synchronization tests and critical coupling scans

Tests
-----
T0   ||eta||_inf <  h(||P_cyc||_inf)           (series convergence)
T1   ||B^T p||_2 <  lambda_2(L)
T2   ||eta||_inf <= g(||P_cut||_inf)
ATk  ||A_1 + A_3 + ... + A_k||_inf <= sin(gamma)

Scans
-----
Two coupling conventions map a coupling K to an injection scale s with
omega = s * p_nom on a fixed weighted graph:

* 'scaled_injection'  omega = K p_nom,     s = K
* 'uniform_gain'      theta' = p - K B sin(B^T theta),  s = 1 / K

Scans run in the normalized load u = s ||B^T L^+ p_nom||_inf, for which
AT1 at gamma = pi/2 fails exactly at u = 1. Larger u always means a harder
instance, so the critical ratio u_T / u_C is K_T / K_C for scaled
injections and K_C / K_T for uniform gain.
"""
import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from .errors import (DomainError, NoSolutionAtK0, NonMonotoneDetected,
                     SolverError, TestNeverFails, ValidationError)
from .graph import algebraic_connectivity, check_centered, eta as compute_eta
from .series import MAX_ORDER, convergence_report, evaluate_terms, truncated_solution
from .solvers import solve_newton
from .utils import inf_norm


__all__ = ['SyncTestReport',
           'ScanResult',
           'g_fn',
           'test_T0_report',
           'test_T1',
           'test_T2',
           'test_ATk',
           'test_AT3_closed_form',
           'parse_test_id',
           'run_tests',
           'load_from_coupling',
           'coupling_from_load',
           'scan_K_C',
           'threshold_load',
           'threshold_K_T',
           'critical_ratios']


logger = logging.getLogger(__name__)

CONVENTIONS = ('scaled_injection', 'uniform_gain')
DEFAULT_TESTS = ('T0', 'T1', 'T2', 'AT1', 'AT3', 'AT5', 'AT7')

# Scan defaults
DK = 5e-3
RESOLUTION = 1e-3
GAMMA_STOP = np.pi / 2
# Largest normalized load probed before giving up
U_MAX = 10.0
# Failure tolerance on lhs - rhs inside threshold searches
COMPARE_TOL = 1e-6


@dataclass(frozen=True)
class SyncTestReport:
    """Verdict of one synchronization test

    Parameters
    ----------
    test_id : str
        'T0', 'T1', 'T2' or 'AT<k>'
    lhs, rhs : float
        Compared quantities
    passed : bool
        lhs < rhs (T0, T1) or lhs <= rhs (T2, ATk)
    gamma : float (optional)
        Target angle of an approximate test
    gamma_star : float (optional)
        Certified region angle (T0, T2)
    pcut_norm, pcyc_norm : float (optional)
        Projection norms entering the test
    """
    test_id: str
    lhs: float
    rhs: float
    passed: bool
    gamma: float = None
    gamma_star: float = None
    pcut_norm: float = None
    pcyc_norm: float = None

    @property
    def margin(self):
        return self.rhs - self.lhs

    def to_dict(self):
        return {'test': self.test_id,
                'lhs': self.lhs,
                'rhs': self.rhs,
                'passed': self.passed,
                'margin': self.margin,
                'gamma': self.gamma,
                'gamma_star': self.gamma_star,
                'pcut_norm': self.pcut_norm,
                'pcyc_norm': self.pcyc_norm}


def g_fn(x):
    """g(x) = (y + sin y)/2 - x (y - sin y)/2 with y = arccos((x-1)/(x+1))"""
    x = float(x)
    if x < 0:
        raise DomainError(f"g is defined for x >= 0 only, got {x!r}.")
    y = math.acos((x - 1) / (x + 1))
    return (y + math.sin(y))/2 - x*(y - math.sin(y))/2


# Individual tests
# ----------------
def test_T0_report(g, omega):
    """Test T0 as a `SyncTestReport`"""
    report = convergence_report(g.pp, compute_eta(g, omega))
    return SyncTestReport(test_id='T0',
                          lhs=report.eta_norm,
                          rhs=report.h_of_pcyc,
                          passed=report.passes_T0,
                          gamma_star=report.gamma_star,
                          pcut_norm=g.pp.cut_norm,
                          pcyc_norm=report.pcyc_norm)


def test_T1(g, p_sd):
    """Spectral test lambda_2(L) > ||B^T p_sd||_2"""
    p_sd = check_centered(p_sd, g.n)
    lhs = float(np.linalg.norm(g.B.T @ p_sd))
    rhs = algebraic_connectivity(g)
    return SyncTestReport(test_id='T1', lhs=lhs, rhs=rhs, passed=bool(rhs > lhs))


def test_T2(g, p_sd):
    """Infinity-norm test ||B^T L^+ p_sd||_inf <= g(||P_cut||_inf)

    When it passes, the solution lies in the region of angle
    arccos((c-1)/(c+1)) with c = ||P_cut||_inf.
    """
    pp = g.pp
    c = pp.cut_norm
    lhs = inf_norm(compute_eta(g, p_sd))
    rhs = g_fn(c)
    passed = bool(lhs <= rhs)
    return SyncTestReport(test_id='T2', lhs=lhs, rhs=rhs, passed=passed,
                          gamma_star=math.acos((c - 1)/(c + 1)) if passed else None,
                          pcut_norm=c, pcyc_norm=pp.cyc_norm)


def _check_gamma(gamma):
    gamma = float(gamma)
    if not (0 <= gamma <= np.pi/2):
        raise DomainError(f"gamma must lie in [0, pi/2], got {gamma!r}.")
    return gamma


def test_ATk(se, k, gamma):
    """Approximate test ||A_1 + ... + A_k||_inf <= sin(gamma)

    Parameters
    ----------
    se : `SeriesExpansion`
        Expansion holding at least order `k`
    k : int
        Odd truncation order
    gamma : float
        Target angle in [0, pi/2]
    """
    gamma = _check_gamma(gamma)
    lhs = inf_norm(truncated_solution(se, k))
    rhs = math.sin(gamma)
    return SyncTestReport(test_id=f"AT{k}", lhs=lhs, rhs=rhs,
                          passed=bool(lhs <= rhs), gamma=gamma)


def test_AT3_closed_form(pp, eta, gamma):
    """Third order test ||eta - (1/6) P_cyc eta^3||_inf <= sin(gamma)"""
    gamma = _check_gamma(gamma)
    eta = np.asarray(eta, dtype=float)
    lhs = inf_norm(eta - (pp.P_cyc @ eta**3)/6)
    rhs = math.sin(gamma)
    return SyncTestReport(test_id='AT3', lhs=lhs, rhs=rhs,
                          passed=bool(lhs <= rhs), gamma=gamma)


for _test in (test_T0_report, test_T1, test_T2, test_ATk, test_AT3_closed_form):
    _test.__test__ = False


def parse_test_id(test_id):
    """Normalize a test name; returns ('T', 0..2) or ('AT', k)"""
    match = re.fullmatch(r'\s*(AT|T)(\d+)\s*', str(test_id).upper())
    if match is None:
        raise ValidationError(f"Unknown test '{test_id}'.")
    kind, number = match.group(1), int(match.group(2))
    if kind == 'T' and number > 2:
        raise ValidationError(f"Unknown sufficient test '{test_id}'.")
    if kind == 'AT' and (number % 2 == 0 or number > MAX_ORDER):
        raise ValidationError(f"Approximate test order must be odd and <= {MAX_ORDER}, "
                              f"got '{test_id}'.")
    return kind, number


def run_tests(g, omega, tests=DEFAULT_TESTS, gamma=np.pi/2):
    """Evaluate several tests on one instance

    Returns
    -------
    reports : list of `SyncTestReport`
    """
    parsed = [parse_test_id(t) for t in tests]
    orders = [k for kind, k in parsed if kind == 'AT']
    se = evaluate_terms(g.pp, compute_eta(g, omega), max(orders)) if orders else None

    reports = []
    for kind, k in parsed:
        if kind == 'AT':
            reports.append(test_ATk(se, k, gamma))
        elif k == 0:
            reports.append(test_T0_report(g, omega))
        elif k == 1:
            reports.append(test_T1(g, omega))
        else:
            reports.append(test_T2(g, omega))
    return reports


# Coupling conventions
# --------------------
def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise ValidationError(f"Unknown coupling convention '{convention}'; "
                              f"expected one of {CONVENTIONS}.")
    return convention


def load_from_coupling(K, convention='scaled_injection'):
    """Injection scale s such that omega = s * p_nom at coupling K"""
    _check_convention(convention)
    K = float(K)
    if convention == 'scaled_injection':
        return K
    return math.inf if K == 0 else 1.0 / K


def coupling_from_load(s, convention='scaled_injection'):
    """Inverse of `load_from_coupling`"""
    _check_convention(convention)
    s = float(s)
    if convention == 'scaled_injection':
        return s
    if s == 0:
        return math.inf
    return 0.0 if math.isinf(s) else 1.0 / s


def _ratio(a, b):
    with np.errstate(divide='ignore', invalid='ignore'):
        return float(np.divide(np.float64(a), np.float64(b)))


# Scans
# -----
@dataclass(frozen=True, eq=False)
class ScanResult:
    """Critical coupling and per-test thresholds of one instance

    Loads `u_*` are normalized so that larger means harder; couplings `K_*`
    are in the requested convention. A scan that never fails reports
    u_C = inf (K_C = inf for scaled injections, 0 for uniform gain).
    """
    convention: str
    eta_nom_norm: float
    u_C: float
    K_C: float
    dK: float
    resolution: float
    u_T: dict = field(default_factory=dict)
    K_T: dict = field(default_factory=dict)
    x_last: np.ndarray = field(default=None, repr=False)

    def ratio_KT_KC(self, test_id):
        return _ratio(self.K_T[test_id], self.K_C)

    def ratio_KC_KT(self, test_id):
        return _ratio(self.K_C, self.K_T[test_id])

    def critical_ratio(self, test_id):
        """u_T / u_C, at most 1 (up to resolution) for sufficient tests"""
        return _ratio(self.u_T[test_id], self.u_C)

    def with_thresholds(self, u_T):
        K_T = {t: coupling_from_load(u / self.eta_nom_norm, self.convention)
               for t, u in u_T.items()}
        return ScanResult(convention=self.convention, eta_nom_norm=self.eta_nom_norm,
                          u_C=self.u_C, K_C=self.K_C, dK=self.dK,
                          resolution=self.resolution, u_T=dict(u_T), K_T=K_T,
                          x_last=self.x_last)

    def to_frame(self):
        rows = [{'test': t,
                 'K_C': self.K_C,
                 'K_T': self.K_T[t],
                 'u_C': self.u_C,
                 'u_T': self.u_T[t],
                 'KT_over_KC': self.ratio_KT_KC(t),
                 'KC_over_KT': self.ratio_KC_KT(t),
                 'critical_ratio': self.critical_ratio(t)} for t in self.u_T]
        columns = ['test', 'K_C', 'K_T', 'u_C', 'u_T',
                   'KT_over_KC', 'KC_over_KT', 'critical_ratio']
        return pd.DataFrame(rows, columns=columns)


def _nominal(g, p_nom):
    p_nom = check_centered(p_nom, g.n)
    eta_nom = compute_eta(g, p_nom)
    return p_nom, eta_nom, inf_norm(eta_nom)


def _solve_at(g, p_nom, scale, x0, gamma_stop):
    """Newton at omega = scale * p_nom; None when lost or past gamma_stop"""
    try:
        outcome = solve_newton(g, scale * p_nom, x0=x0)
    except SolverError as exc:
        logger.debug("Newton lost the solution at scale %.6g: %s", scale, exc)
        return None
    if inf_norm(g.B.T @ outcome.solution) >= gamma_stop:
        return None
    return outcome.solution


def scan_K_C(g, p_nom, dK=DK, gamma_stop=GAMMA_STOP, convention='scaled_injection',
             resolution=RESOLUTION, u_max=U_MAX, progress=False):
    """Critical coupling by warm-started Newton continuation

    The normalized load u is stepped by `dK` until Newton fails or the
    largest edge angle reaches `gamma_stop`; the last step is then refined
    by bisection to `resolution`.

    Parameters
    ----------
    g : `WeightedGraph`
    p_nom : (n,) array
        Centered nominal injections
    dK : float (optional)
        Continuation step in normalized load
    gamma_stop : float (optional)
        Edge angle at which the solution counts as lost
    convention : str (optional)
        'scaled_injection' or 'uniform_gain'
    resolution : float (optional)
        Bisection accuracy in normalized load
    u_max : float (optional)
        Largest load probed
    progress : bool (optional)
        Show a progress bar

    Returns
    -------
    result : `ScanResult`
        No thresholds yet; see `critical_ratios`

    Raises
    ------
    NoSolutionAtK0
        If the very first step already fails
    """
    _check_convention(convention)
    if dK <= 0:
        raise ValidationError(f"dK must be positive, got {dK!r}.")
    p_nom, _, eta_nom_norm = _nominal(g, p_nom)

    def result(u_C, x_last):
        s_C = u_C / eta_nom_norm if eta_nom_norm > 0 else math.inf
        return ScanResult(convention=convention, eta_nom_norm=eta_nom_norm,
                          u_C=u_C, K_C=coupling_from_load(s_C, convention),
                          dK=dK, resolution=resolution, x_last=x_last)

    if eta_nom_norm == 0:
        logger.info("Zero nominal injections; the solution is never lost.")
        return result(math.inf, np.zeros(g.n))

    steps = int(math.floor(u_max / dK))
    x_good, u_good = None, 0.0
    for step in tqdm(range(1, steps + 1), desc='Continuation', disable=not progress):
        u = step * dK
        x = _solve_at(g, p_nom, u / eta_nom_norm, x_good, gamma_stop)
        if x is None:
            break
        x_good, u_good = x, u
    else:
        logger.warning("No loss of synchronization up to u = %.6g.", u_max)
        return result(math.inf, x_good)

    if x_good is None:
        raise NoSolutionAtK0(f"Newton fails at the first load step u = {dK}.")

    lo, hi = u_good, u
    while hi - lo > resolution:
        mid = (lo + hi) / 2
        x = _solve_at(g, p_nom, mid / eta_nom_norm, x_good, gamma_stop)
        if x is None:
            hi = mid
        else:
            lo, x_good = mid, x
    logger.debug("Critical load bracketed in [%.6g, %.6g].", lo, hi)
    return result(hi, x_good)


def _failure_predicate(g, p_nom, eta_nom, eta_nom_norm, test_id, gamma):
    """fails(u) for a test at normalized load u"""
    kind, k = parse_test_id(test_id)
    if kind == 'AT':
        gamma = _check_gamma(gamma)
        direction = eta_nom / eta_nom_norm
        terms = evaluate_terms(g.pp, direction, k).terms
        sin_gamma = math.sin(gamma)

        def fails(u):
            # A_{2i+1} is homogeneous of degree 2i+1 in eta
            partial = sum(u**(2*i + 1) * term for i, term in enumerate(terms))
            return inf_norm(partial) > sin_gamma + COMPARE_TOL
        return fails

    test = {0: test_T0_report, 1: test_T1, 2: test_T2}[k]

    def fails(u):
        report = test(g, (u / eta_nom_norm) * p_nom)
        return report.lhs > report.rhs + COMPARE_TOL
    return fails


def threshold_load(g, p_nom, test_id, gamma=np.pi/2, resolution=RESOLUTION,
                   u_max=U_MAX):
    """Smallest normalized load at which a test fails

    T1 uses the closed form lambda_2 / ||B^T p_nom||_2; the other tests are
    bracketed by doubling and bisected to `resolution`.

    Raises
    ------
    TestNeverFails
        If the test still passes at `u_max`
    NonMonotoneDetected
        If the test passes again beyond the bracket
    """
    kind, k = parse_test_id(test_id)
    p_nom, eta_nom, eta_nom_norm = _nominal(g, p_nom)
    if eta_nom_norm == 0:
        raise TestNeverFails(f"{test_id} never fails for zero injections.")

    if (kind, k) == ('T', 1):
        s_T = algebraic_connectivity(g) / float(np.linalg.norm(g.B.T @ p_nom))
        return s_T * eta_nom_norm

    fails = _failure_predicate(g, p_nom, eta_nom, eta_nom_norm, test_id, gamma)
    lo, hi = 0.0, min(0.125, u_max)
    if fails(lo):
        raise NonMonotoneDetected(f"{test_id} already fails at zero load.")
    while not fails(hi):
        if hi >= u_max:
            raise TestNeverFails(f"{test_id} still passes at u = {u_max}.")
        lo, hi = hi, min(2*hi, u_max)
    beyond = min(2*hi, u_max)
    if beyond > hi and not fails(beyond):
        raise NonMonotoneDetected(f"{test_id} fails at u = {hi:.6g} but passes "
                                  f"again at u = {beyond:.6g}.")

    while hi - lo > resolution:
        mid = (lo + hi) / 2
        if fails(mid):
            hi = mid
        else:
            lo = mid
    logger.debug("%s threshold bracketed in [%.6g, %.6g].", test_id, lo, hi)
    return hi


def threshold_K_T(g, p_nom, test_id, gamma=np.pi/2, resolution=RESOLUTION,
                  convention='scaled_injection', u_max=U_MAX):
    """Coupling at which a test first fails, in the requested convention"""
    _check_convention(convention)
    u_T = threshold_load(g, p_nom, test_id, gamma=gamma, resolution=resolution,
                         u_max=u_max)
    eta_nom_norm = inf_norm(compute_eta(g, p_nom))
    return coupling_from_load(u_T / eta_nom_norm, convention)


def critical_ratios(g, p_nom, tests=DEFAULT_TESTS, gamma=np.pi/2, dK=DK,
                    resolution=RESOLUTION, convention='scaled_injection',
                    gamma_stop=GAMMA_STOP, u_max=U_MAX, progress=False):
    """Critical coupling plus the threshold of every requested test

    Returns
    -------
    result : `ScanResult`
        Use `to_frame` for K_T/K_C, K_C/K_T and the normalized ratio
    """
    scan = scan_K_C(g, p_nom, dK=dK, gamma_stop=gamma_stop, convention=convention,
                    resolution=resolution, u_max=u_max, progress=progress)
    u_T = {}
    for test_id in tests:
        test_id = str(test_id).upper()
        u_T[test_id] = threshold_load(g, p_nom, test_id, gamma=gamma,
                                      resolution=resolution, u_max=u_max)
    return scan.with_thresholds(u_T)
