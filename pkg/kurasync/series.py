"""Power series inversion of the unconstrained edge balance map

The solution phi of  eta = P_cut phi + P_cyc arcsin(phi)  is expanded as
phi = A_1(eta) + A_3(eta) + A_5(eta) + ... where A_1 = eta and every higher
term is -P_cyc applied to Hadamard products of lower terms, weighted by the
arcsin Taylor coefficients and the number of orderings of each product.
"""
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numpy.polynomial.polynomial import polyval
import pandas as pd
import sympy
from scipy.optimize import bisect

from .errors import DomainError, OrderNotComputed, Overflow
from .graph import eta as compute_eta
from .utils import inf_norm


__all__ = ['SymbolicTerm',
           'Summand',
           'SeriesExpansion',
           'ConvergenceReport',
           'double_factorial',
           'arcsin_coeff',
           'h',
           'h_inverse',
           'gamma_star',
           'convergence_report',
           'test_T0',
           'odd_partitions',
           'perm_count',
           'symbolic_terms',
           'symbolic_table',
           'format_symbolic',
           'evaluate_terms',
           'truncated_solution',
           'term_norms',
           'commutes',
           'commuting_term']


# Highest supported series order; the partition count grows exponentially
MAX_ORDER = 41
DEFAULT_ORDER = 7
# Bisection settings for h^{-1}
H_INVERSE_XTOL = 1e-14
H_INVERSE_MAXITER = 200
# Below this u, u - arctan(u) is summed as a series; 15 terms reach 1e-17
ARCTAN_SERIES_SWITCH = 0.25
ARCTAN_SERIES = np.array([(-1)**k / (2*k + 3) for k in range(15)])
# Below this load gamma* is its leading asymptote 3 ||eta|| / 2
GAMMA_ASYMPTOTE_BELOW = 1e-100


# Scalar functions
# ----------------
def double_factorial(k):
    """Exact double factorial k!! = k (k-2) (k-4) ... with 0!! = 1"""
    k = int(k)
    if k < 0:
        raise DomainError(f"Double factorial needs k >= 0, got {k}.")
    return math.prod(range(k, 0, -2))


def arcsin_coeff(i):
    """Taylor coefficient (2i-1)!! / ((2i)!! (2i+1)) of r^(2i+1) in arcsin(r)

    Returns
    -------
    coeff : `Fraction`
        Exact rational coefficient
    """
    i = int(i)
    if i < 0:
        raise DomainError(f"arcsin coefficient index must be >= 0, got {i}.")
    if i == 0:
        return Fraction(1)
    return Fraction(double_factorial(2*i - 1),
                    double_factorial(2*i) * (2*i + 1))


def _u_minus_arctan(u):
    """u - arctan(u) for u >= 0"""
    u = np.asarray(u, dtype=float)
    value = u - np.arctan(u)
    small = u < ARCTAN_SERIES_SWITCH
    # u^3 (1/3 - u^2/5 + u^4/7 - ...) where the difference cancels
    value[small] = u[small]**3 * polyval(u[small]**2, ARCTAN_SERIES)
    return value


def h(x):
    """Gap function h(x) = (x+1) sqrt(1 - (x/(x+1))^2) - x arccos(x/(x+1))

    Evaluated as x (u - arctan u) with u = sqrt(2x+1) / x, so the tail
    h(x) ~ 2 sqrt(2) / (3 sqrt(x)) keeps its relative precision for large x.
    h(0) = 1 and h decreases strictly to 0.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("h is defined for x >= 0 only.")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    value = np.ones_like(x)
    interior = (x > 0) & np.isfinite(x)
    xi = x[interior]
    value[interior] = xi * _u_minus_arctan(np.sqrt(2*xi + 1) / xi)
    value[np.isinf(x)] = 0.0
    return float(value[0]) if scalar else value


def h_inverse(y):
    """Inverse of `h` on (0, 1]

    Brackets the root by doubling an upper bound, starting from 1 or from
    the tail estimate x ~ 8 / (9 y^2), then bisects.

    Parameters
    ----------
    y : float
        Value in (0, 1]

    Returns
    -------
    x : float
        The unique x >= 0 with h(x) = y

    Raises
    ------
    DomainError
        If y is so small that the root exceeds the float range
    """
    y = float(y)
    if not (0 < y <= 1):
        raise DomainError(f"h^-1 is defined on (0, 1], got {y!r}.")
    if y == 1:
        return 0.0
    with np.errstate(over='ignore', divide='ignore'):
        x_lo, x_hi = 0.0, max(1.0, 8 / (9 * np.float64(y)**2))
        while h(x_hi) >= y:
            x_lo, x_hi = x_hi, 2 * x_hi
    if not np.isfinite(x_hi):
        raise DomainError(f"h^-1({y!r}) exceeds the float range.")
    return bisect(lambda x: h(x) - y, x_lo, x_hi,
                  xtol=H_INVERSE_XTOL, maxiter=H_INVERSE_MAXITER)


def gamma_star(eta_norm):
    """Certified angle radius arccos(x / (x+1)) with x = h^{-1}(||eta||_inf)

    Increases from 0 (at ||eta|| = 0, taken as the limit) to pi/2 (at
    ||eta|| = 1).
    """
    eta_norm = float(eta_norm)
    if not (0 <= eta_norm <= 1):
        raise DomainError(f"gamma* needs 0 <= ||eta|| <= 1, got {eta_norm!r}.")
    if eta_norm < GAMMA_ASYMPTOTE_BELOW:
        return 1.5 * eta_norm
    x = h_inverse(eta_norm)
    return float(np.arctan2(np.sqrt(2*x + 1), x))


# Test T0
# -------
@dataclass(frozen=True)
class ConvergenceReport:
    """Outcome of the series convergence test ||eta|| < h(||P_cyc||)"""
    eta_norm: float
    pcyc_norm: float
    h_of_pcyc: float
    passes_T0: bool
    gamma_star: float = None

    @property
    def margin(self):
        return self.h_of_pcyc - self.eta_norm

    def to_dict(self):
        return {'eta_norm': self.eta_norm,
                'pcyc_norm': self.pcyc_norm,
                'h_of_pcyc': self.h_of_pcyc,
                'passes_T0': self.passes_T0,
                'gamma_star': self.gamma_star,
                'margin': self.margin}


def convergence_report(pp, eta_vec):
    """T0 report for a precomputed projection pair and flow vector"""
    eta_norm = inf_norm(eta_vec)
    pcyc_norm = pp.cyc_norm
    h_of_pcyc = h(pcyc_norm)
    passes = eta_norm < h_of_pcyc
    return ConvergenceReport(eta_norm=eta_norm,
                             pcyc_norm=pcyc_norm,
                             h_of_pcyc=h_of_pcyc,
                             passes_T0=passes,
                             gamma_star=gamma_star(eta_norm) if passes else None)


def test_T0(g, omega):
    """Sufficient test ||B^T L^+ omega||_inf < h(||P_cyc||_inf)

    Parameters
    ----------
    g : `WeightedGraph`
    omega : (n,) array
        Centered natural frequencies

    Returns
    -------
    report : `ConvergenceReport`
        Includes gamma* when the test passes
    """
    return convergence_report(g.pp, compute_eta(g, omega))


test_T0.__test__ = False


# Symbolic terms
# --------------
@dataclass(frozen=True)
class Summand:
    """coefficient * A_{p1} o A_{p2} o ... for the odd parts p of `partition`"""
    coefficient: Fraction
    partition: tuple
    k: int
    perm_count: int

    def monomial(self):
        """Powers of each lower-order term, highest order first"""
        counts = Counter(self.partition)
        return tuple(sorted(counts.items(), reverse=True))


@dataclass(frozen=True)
class SymbolicTerm:
    """A_order = -P_cyc( sum of summands ); order 1 is the bare eta"""
    order: int
    summands: tuple = field(default=())


def odd_partitions(total, parts, largest=None):
    """Multisets of `parts` odd positive integers summing to `total`

    Yields non-increasing tuples.
    """
    if largest is None:
        largest = total
    if parts == 0:
        if total == 0:
            yield ()
        return
    # Remaining parts are at least 1 each
    top = min(largest, total - (parts - 1))
    if top % 2 == 0:
        top -= 1
    for first in range(top, 0, -2):
        if first * parts < total:
            break
        for rest in odd_partitions(total - first, parts - 1, first):
            yield (first,) + rest


def perm_count(partition):
    """Number of distinct orderings of a multiset"""
    count = math.factorial(len(partition))
    for multiplicity in Counter(partition).values():
        count //= math.factorial(multiplicity)
    return count


def _check_order(order):
    order = int(order)
    if order < 1 or order % 2 == 0:
        raise DomainError(f"Series orders are odd and >= 1, got {order}.")
    if order > MAX_ORDER:
        raise DomainError(f"Series order {order} exceeds the cap {MAX_ORDER}.")
    return order


@lru_cache(maxsize=None)
def _symbolic_term(order):
    if order == 1:
        return SymbolicTerm(order=1)
    summands = []
    for k in range(1, (order - 1)//2 + 1):
        c_k = arcsin_coeff(k)
        for partition in odd_partitions(order, 2*k + 1):
            count = perm_count(partition)
            summands.append(Summand(coefficient=c_k * count,
                                    partition=partition,
                                    k=k,
                                    perm_count=count))
    return SymbolicTerm(order=order, summands=tuple(summands))


def symbolic_terms(max_order):
    """Symbolic recursion for A_1, A_3, ..., A_max_order

    Parameters
    ----------
    max_order : int
        Odd order, 1 <= max_order <= `MAX_ORDER`

    Returns
    -------
    terms : list of `SymbolicTerm`
        For order 2i+1 and each k = 1..i, every odd multiset of size 2k+1
        summing to 2i+1, weighted by arcsin_coeff(k) times its number of
        orderings
    """
    max_order = _check_order(max_order)
    return [_symbolic_term(order) for order in range(1, max_order + 1, 2)]


def symbolic_table(terms):
    """Long-format DataFrame of symbolic summands, one row per summand"""
    rows = []
    for term in terms:
        for s in term.summands:
            rows.append({'order': term.order,
                         'k': s.k,
                         'partition': ' '.join(str(p) for p in s.partition),
                         'perm_count': s.perm_count,
                         'arcsin_coeff': str(arcsin_coeff(s.k)),
                         'coefficient': str(s.coefficient)})
    columns = ['order', 'k', 'partition', 'perm_count', 'arcsin_coeff', 'coefficient']
    return pd.DataFrame(rows, columns=columns)


def _text_monomial(summand):
    factors = []
    for order, power in summand.monomial():
        factors.append(f"A{order}" if power == 1 else f"A{order}^{power}")
    return ' o '.join(factors)


def _sympy_expression(term):
    expr = sympy.Integer(0)
    for s in term.summands:
        monomial = sympy.Integer(1)
        for order, power in s.monomial():
            monomial *= sympy.Symbol(f"A_{{{order}}}", commutative=True)**power
        expr += sympy.Rational(s.coefficient.numerator, s.coefficient.denominator) * monomial
    return expr


def format_symbolic(terms, fmt='text'):
    """Render symbolic terms as text, LaTeX or CSV

    Products are Hadamard products; in LaTeX they are written as ordinary
    products of powers since the Hadamard product commutes.
    """
    if fmt == 'csv':
        return symbolic_table(terms).to_csv(index=False)
    lines = []
    for term in terms:
        if fmt == 'latex':
            if term.order == 1:
                lines.append(r"A_{1} = \eta")
                continue
            body = sympy.latex(_sympy_expression(term))
            lines.append(rf"A_{{{term.order}}} = -\mathcal{{P}}_{{\mathrm{{cyc}}}}\left({body}\right)")
        elif fmt == 'text':
            if term.order == 1:
                lines.append("A1 = eta")
                continue
            body = ' + '.join(f"{s.coefficient} * {_text_monomial(s)}"
                              for s in term.summands)
            lines.append(f"A{term.order} = -Pcyc( {body} )")
        else:
            raise DomainError(f"Unknown format {fmt!r}; use text, latex or csv.")
    return '\n'.join(lines) + '\n'


# Numerical evaluation
# --------------------
@dataclass(frozen=True, eq=False)
class SeriesExpansion:
    """Odd series terms A_1(eta), A_3(eta), ..., A_max_order(eta)

    `terms[i]` holds A_{2i+1}; `partial_sums[i]` holds their sum through i.
    """
    eta: np.ndarray
    max_order: int
    terms: tuple
    partial_sums: tuple
    pp: object = field(default=None, repr=False, compare=False)

    def term(self, order):
        if order > self.max_order or order < 1 or order % 2 == 0:
            raise OrderNotComputed(f"Order {order} is not available "
                                   f"(max_order={self.max_order}).")
        return self.terms[(order - 1)//2]


def _coefficient_as_float(coefficient):
    try:
        return float(coefficient)
    except OverflowError as exc:
        raise Overflow(f"Coefficient {coefficient} overflows float.") from exc


def evaluate_terms(pp, eta, max_order, previous=None):
    """Evaluate the series terms numerically, bottom-up

    Parameters
    ----------
    pp : `ProjectionPair`
        Projections of the graph
    eta : (m,) array
        Point of expansion (normally B^T L^+ omega)
    max_order : int
        Highest odd order to evaluate
    previous : `SeriesExpansion` (optional)
        Expansion at the same (pp, eta) whose terms are reused

    Returns
    -------
    se : `SeriesExpansion`
    """
    max_order = _check_order(max_order)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (pp.m,):
        raise DomainError(f"eta has shape {eta.shape}, expected ({pp.m},).")

    # Reuse lower orders from a previous expansion of the same instance
    if previous is not None and previous.pp is pp and np.array_equal(previous.eta, eta):
        if previous.max_order >= max_order:
            count = (max_order + 1)//2
            return SeriesExpansion(eta=eta, max_order=max_order,
                                   terms=previous.terms[:count],
                                   partial_sums=previous.partial_sums[:count],
                                   pp=pp)
        terms = list(previous.terms)
    else:
        terms = [eta.copy()]

    for symbolic in symbolic_terms(max_order)[len(terms):]:
        inner = np.zeros_like(eta)
        for s in symbolic.summands:
            product = np.ones_like(eta)
            for order, power in s.monomial():
                product *= terms[(order - 1)//2]**power
            inner += _coefficient_as_float(s.coefficient) * product
        terms.append(-(pp.P_cyc @ inner))

    partial_sums = tuple(np.cumsum(np.vstack(terms), axis=0))
    return SeriesExpansion(eta=eta, max_order=max_order,
                           terms=tuple(terms),
                           partial_sums=partial_sums,
                           pp=pp)


def truncated_solution(se, k):
    """Partial sum A_1 + A_3 + ... + A_k, the order-k estimate of sin(B^T x*)"""
    se.term(k)
    return se.partial_sums[(k - 1)//2]


def term_norms(se):
    """Infinity norms of each stored term, indexed by order"""
    return {2*i + 1: inf_norm(t) for i, t in enumerate(se.terms)}


def commutes(pp, eta, tol=1e-12):
    """Whether P_cyc and diag(eta) commute up to `tol` (entrywise)"""
    eta = np.asarray(eta, dtype=float)
    commutator = pp.P_cyc * eta[np.newaxis, :] - eta[:, np.newaxis] * pp.P_cyc
    return float(np.max(np.abs(commutator), initial=0.0)) <= tol


def commuting_term(pp, eta, i):
    """Closed form -arcsin_coeff(i) P_cyc(eta^(2i+1)) for commuting instances"""
    eta = np.asarray(eta, dtype=float)
    if i == 0:
        return eta.copy()
    return -float(arcsin_coeff(i)) * (pp.P_cyc @ eta**(2*i + 1))
