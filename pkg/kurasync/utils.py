import numpy as np

from .errors import DomainError


__all__ = ['inf_norm',
           'matrix_inf_norm',
           'center',
           'safe_arcsin']


# Values within this distance of +/-1 are clamped before arcsin
ARCSIN_CLAMP = 1e-12


def inf_norm(v):
    """Vector infinity norm (0 for empty vectors)"""
    v = np.asarray(v, dtype=float)
    return float(np.max(np.abs(v))) if v.size else 0.0


def matrix_inf_norm(M):
    """Induced infinity norm, i.e. maximum absolute row sum"""
    M = np.asarray(M, dtype=float)
    return float(np.max(np.sum(np.abs(M), axis=1))) if M.size else 0.0


def center(omega):
    """Subtract the mean so that the vector lies in the complement of 1"""
    omega = np.asarray(omega, dtype=float)
    return omega - omega.mean()


def safe_arcsin(phi, clamp=ARCSIN_CLAMP):
    """Componentwise arcsin that tolerates rounding just outside [-1, 1]

    Parameters
    ----------
    phi : array-like
        Sine values
    clamp : float (optional)
        Entries with 1 < |phi_i| <= 1 + clamp are clipped to +/-1

    Returns
    -------
    angles : ndarray
        arcsin(phi) in [-pi/2, pi/2]

    Raises
    ------
    DomainError
        If any |phi_i| exceeds 1 + clamp
    """
    phi = np.asarray(phi, dtype=float)
    worst = inf_norm(phi)
    if worst > 1.0 + clamp or not np.all(np.isfinite(phi)):
        raise DomainError(f"arcsin argument out of domain: max |phi| = {worst:.17g}")
    return np.arcsin(np.clip(phi, -1.0, 1.0))
