"""Balance-equation residuals and solvers

Four transcriptions of the synchronization manifold are evaluated here:

* node balance            omega = B A sin(B^T x)
* flow balance            eta = P_cut sin(z),            z in Img(B^T)
* constrained edge        eta = P_cut psi,               arcsin(psi) in Img(B^T)
* unconstrained edge      eta = P_cut phi + P_cyc arcsin(phi)

with eta = B^T L^+ omega. Solutions convert as z = B^T x and
psi = phi = sin(B^T x).
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import LinAlgWarning

from .errors import (DomainError, IterateLeftDomain, MaxIterationsExceeded,
                     NotAFlowSine, SingularJacobian)
from .graph import check_centered, eta as compute_eta
from .series import convergence_report, truncated_solution
from .utils import inf_norm, safe_arcsin


__all__ = ['SolveOutcome',
           'EquivalenceReport',
           'residual_node',
           'residual_unconstrained',
           'residual_flow',
           'residual_constrained',
           'series_residual',
           'node_jacobian',
           'solve_fixed_point',
           'solve_newton',
           'recover_angles',
           'acyclic_solution',
           'check_equivalence']


logger = logging.getLogger(__name__)

# Defaults
TOL = 1e-10
NEWTON_MAX_ITER = 100
FIXED_POINT_MAX_ITER = 10_000
# ||P_cyc arcsin(phi)|| above this means phi is not the sine of a flow
MEMBERSHIP_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    """Result of a solver run

    Parameters
    ----------
    solution : ndarray
        Edge vector phi* (fixed point) or node vector x* (Newton)
    iterations : int
        Number of iterations taken
    residual_inf : float
        Final infinity norm of the solver's own residual
    converged : bool
        Whether the tolerance was met
    gamma_used : float or None
        Certified angle radius gamma* when test T0 held
    method : str
        'fixed-point' or 'newton'
    history : tuple of float
        Per-iteration step norms (fixed point) or residual norms (Newton)
    """
    solution: np.ndarray
    iterations: int
    residual_inf: float
    converged: bool
    gamma_used: float = None
    method: str = ''
    history: tuple = field(default=(), repr=False)

    @property
    def certified(self):
        return self.gamma_used is not None


@dataclass(frozen=True)
class EquivalenceReport:
    """Infinity-norm residuals of the four transcriptions at one solution"""
    node_residual: float
    flow_residual: float
    constrained_residual: float
    unconstrained_residual: float

    @property
    def max_mismatch(self):
        return max(self.node_residual, self.flow_residual,
                   self.constrained_residual, self.unconstrained_residual)

    def to_dict(self):
        return {'node_residual': self.node_residual,
                'flow_residual': self.flow_residual,
                'constrained_residual': self.constrained_residual,
                'unconstrained_residual': self.unconstrained_residual,
                'max_mismatch': self.max_mismatch}


# Residuals
# ---------
def residual_node(g, omega, x):
    """omega - B diag(w) sin(B^T x)"""
    x = np.asarray(x, dtype=float)
    B = g.B
    return np.asarray(omega, dtype=float) - (B * g.weights) @ np.sin(B.T @ x)


def residual_unconstrained(pp, eta, phi):
    """eta - P_cut phi - P_cyc arcsin(phi)

    Raises
    ------
    DomainError
        If any |phi_i| > 1 beyond the rounding clamp
    """
    phi = np.asarray(phi, dtype=float)
    return eta - pp.P_cut @ phi - pp.P_cyc @ safe_arcsin(phi)


def residual_flow(pp, eta, z):
    """eta - P_cut sin(z)"""
    return eta - pp.P_cut @ np.sin(np.asarray(z, dtype=float))


def residual_constrained(pp, eta, psi):
    """Constrained edge balance residual

    Returns
    -------
    residual : (m,) array
        eta - P_cut psi
    membership : float
        ||P_cyc arcsin(psi)||_inf, zero iff arcsin(psi) is a flow vector
    """
    psi = np.asarray(psi, dtype=float)
    membership = inf_norm(pp.P_cyc @ safe_arcsin(psi))
    return eta - pp.P_cut @ psi, membership


def series_residual(pp, se, k):
    """Unconstrained balance residual norm of the order-k truncated series"""
    return inf_norm(residual_unconstrained(pp, se.eta, truncated_solution(se, k)))


def node_jacobian(g, x):
    """Jacobian of the node residual, -B diag(w cos(B^T x)) B^T"""
    B = g.B
    return -((B * (g.weights * np.cos(B.T @ x))) @ B.T)


# Solvers
# -------
def solve_fixed_point(pp, eta, tol=TOL, max_iter=FIXED_POINT_MAX_ITER):
    """Banach iteration phi <- eta - P_cyc(arcsin(phi) - phi) from phi = eta

    The map is a contraction on the polydisk of radius sin(gamma*) whenever
    test T0 holds; otherwise the run proceeds but is not certified.

    Parameters
    ----------
    pp : `ProjectionPair`
    eta : (m,) array
        Flow vector B^T L^+ omega
    tol : float (optional)
        Stop once ||phi_{t+1} - phi_t||_inf < tol
    max_iter : int (optional)
        Iteration cap

    Returns
    -------
    outcome : `SolveOutcome`
        `solution` is phi*, `residual_inf` its unconstrained balance residual

    Raises
    ------
    IterateLeftDomain
        If an iterate leaves the cube |phi_i| <= 1
    MaxIterationsExceeded
        If the increments do not drop below `tol`
    """
    eta = np.asarray(eta, dtype=float)
    report = convergence_report(pp, eta)
    gamma_used = report.gamma_star if report.passes_T0 else None
    if gamma_used is None:
        logger.debug("Fixed point started outside T0 (||eta|| = %.3g >= h = %.3g); "
                     "result is uncertified.", report.eta_norm, report.h_of_pcyc)

    phi = eta.copy()
    steps = []
    for iteration in range(1, max_iter + 1):
        try:
            arc = safe_arcsin(phi)
        except DomainError as exc:
            outcome = SolveOutcome(solution=phi, iterations=iteration - 1,
                                   residual_inf=np.inf, converged=False,
                                   gamma_used=gamma_used, method='fixed-point',
                                   history=tuple(steps))
            raise IterateLeftDomain(f"Iterate left the domain at step {iteration}: {exc}",
                                    outcome=outcome) from exc
        update = eta - pp.P_cyc @ (arc - phi)
        step = inf_norm(update - phi)
        steps.append(step)
        phi = update
        if step < tol:
            break
    else:
        outcome = SolveOutcome(solution=phi, iterations=max_iter,
                               residual_inf=np.inf, converged=False,
                               gamma_used=gamma_used, method='fixed-point',
                               history=tuple(steps))
        raise MaxIterationsExceeded(f"Fixed point did not converge in {max_iter} "
                                    f"iterations (last step {steps[-1]:.3g}).",
                                    outcome=outcome)

    try:
        residual = inf_norm(residual_unconstrained(pp, eta, phi))
    except DomainError as exc:
        raise IterateLeftDomain(f"Final iterate is outside the domain: {exc}") from exc
    return SolveOutcome(solution=phi, iterations=iteration,
                        residual_inf=residual, converged=True,
                        gamma_used=gamma_used, method='fixed-point',
                        history=tuple(steps))


def solve_newton(g, omega, x0=None, tol=TOL, max_iter=NEWTON_MAX_ITER):
    """Newton-Raphson on the node balance equations

    The Jacobian is singular along 1_n; steps are taken on the complement by
    solving with J - (1/n) 1 1^T, which is regular exactly when J has rank
    n - 1 and returns mean-zero steps for mean-zero residuals.

    Parameters
    ----------
    g : `WeightedGraph`
    omega : (n,) array
        Centered natural frequencies
    x0 : (n,) array (optional)
        Initial angles; defaults to the linearization L^+ omega
    tol : float (optional)
        Target ||omega - B A sin(B^T x)||_inf
    max_iter : int (optional)
        Iteration cap

    Returns
    -------
    outcome : `SolveOutcome`
        `solution` is x* with mean(x*) = 0

    Raises
    ------
    MaxIterationsExceeded, SingularJacobian
    """
    omega = check_centered(omega, g.n)
    n = g.n
    x = g.L_pinv @ omega if x0 is None else np.array(x0, dtype=float)
    x = x - x.mean()
    grounding = np.full((n, n), 1.0 / n)

    residuals = []
    for iteration in range(max_iter + 1):
        f = residual_node(g, omega, x)
        residual = inf_norm(f)
        residuals.append(residual)
        if residual < tol:
            return SolveOutcome(solution=x - x.mean(), iterations=iteration,
                                residual_inf=residual, converged=True,
                                method='newton', history=tuple(residuals))
        if iteration == max_iter or not np.isfinite(residual):
            break
        J = node_jacobian(g, x)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter('error', LinAlgWarning)
                dx = scipy.linalg.solve(J - grounding, -f, assume_a='sym')
        except (np.linalg.LinAlgError, LinAlgWarning) as exc:
            outcome = SolveOutcome(solution=x, iterations=iteration,
                                   residual_inf=residual, converged=False,
                                   method='newton', history=tuple(residuals))
            raise SingularJacobian(f"Newton Jacobian is singular at step {iteration} "
                                   f"(max |edge angle| = {inf_norm(g.B.T @ x):.6f}).",
                                   outcome=outcome) from exc
        x = x + dx

    outcome = SolveOutcome(solution=x, iterations=iteration,
                           residual_inf=residual, converged=False,
                           method='newton', history=tuple(residuals))
    raise MaxIterationsExceeded(f"Newton did not converge in {max_iter} iterations "
                                f"(residual {residual:.3g}).", outcome=outcome)


def recover_angles(g, phi, check=True):
    """Node angles x = L^+ B diag(w) arcsin(phi) for an edge sine vector

    Parameters
    ----------
    g : `WeightedGraph`
    phi : (m,) array
        Candidate sin(B^T x*)
    check : bool (optional)
        Reject phi whose arcsin is not a flow vector; without the check a
        truncated series gives its least-squares angles

    Returns
    -------
    x : (n,) array
        Mean-zero angles with sin(B^T x) = phi

    Raises
    ------
    DomainError
        If any |phi_i| > 1
    NotAFlowSine
        If arcsin(phi) is not a flow vector
    """
    arc = safe_arcsin(phi)
    membership = inf_norm(g.pp.P_cyc @ arc)
    if check and membership > MEMBERSHIP_TOL:
        raise NotAFlowSine(f"arcsin(phi) is not in Img(B^T): ||P_cyc arcsin(phi)|| = "
                           f"{membership:.3g}.")
    return g.L_pinv @ ((g.B * g.weights) @ arc)


def acyclic_solution(g, omega):
    """Closed-form angles x* = L^+ B A arcsin(B^T L^+ omega) on trees

    Raises
    ------
    DomainError
        If the graph has cycles or ||B^T L^+ omega||_inf > 1
    """
    if g.m != g.n - 1:
        raise DomainError("The closed form holds for acyclic graphs only.")
    eta_vec = compute_eta(g, omega)
    if inf_norm(eta_vec) > 1:
        raise DomainError(f"No synchronized solution: ||eta|| = {inf_norm(eta_vec):.6f} > 1.")
    return g.L_pinv @ ((g.B * g.weights) @ safe_arcsin(eta_vec))


def check_equivalence(g, omega, x):
    """Evaluate all four transcriptions at z = B^T x, psi = phi = sin(B^T x)

    Returns
    -------
    report : `EquivalenceReport`
    """
    eta_vec = compute_eta(g, omega)
    pp = g.pp
    z = g.B.T @ np.asarray(x, dtype=float)
    phi = np.sin(z)
    residual, membership = residual_constrained(pp, eta_vec, phi)
    return EquivalenceReport(
        node_residual=inf_norm(residual_node(g, omega, x)),
        flow_residual=inf_norm(residual_flow(pp, eta_vec, z)),
        constrained_residual=max(inf_norm(residual), membership),
        unconstrained_residual=inf_norm(residual_unconstrained(pp, eta_vec, phi)))
