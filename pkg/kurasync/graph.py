"""Weighted graphs and the linear algebra derived from them

Conventions
-----------
* Edges are stored as (i, j, w) with i < j, sorted by (i, j). This order is
  the row order of every edge vector in the package.
* The incidence matrix B has +1 at the lower node index and -1 at the higher
  one, so an edge vector B^T x holds the differences x_i - x_j.
* Everything is dense; P_cut and P_cyc are dense even for sparse graphs.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from .errors import (DisconnectedGraph, DuplicateEdge, NonpositiveWeight,
                     SelfLoop, NodeIndexError, ValidationError,
                     UncenteredFrequencies, SingularBeyondKernel)
from .utils import inf_norm, matrix_inf_norm


__all__ = ['WeightedGraph',
           'ProjectionPair',
           'build_graph',
           'reweight',
           'incidence',
           'laplacian',
           'pseudoinverse',
           'projections',
           'eta',
           'check_centered',
           'is_flow',
           'is_acyclic',
           'algebraic_connectivity']


# Eigenvalues below this fraction of the largest one are treated as zero
PINV_RTOL = 1e-10
# Relative tolerance on the mean of a frequency vector
CENTERING_RTOL = 1e-8
# Relative tolerance on ||P_cyc v|| for membership in Img(B^T)
FLOW_RTOL = 1e-8


@dataclass(frozen=True)
class WeightedGraph:
    """Connected undirected graph with positive edge weights

    Build instances with `build_graph`, which validates and canonicalizes the
    edge list. Derived matrices are computed on first access and memoized;
    the graph itself never changes.

    Parameters
    ----------
    n : int
        Number of nodes
    edges : tuple of (int, int, float)
        Canonical edge list (i < j, sorted)
    """
    n: int
    edges: tuple

    @property
    def m(self):
        return len(self.edges)

    @cached_property
    def weights(self):
        return np.array([w for _, _, w in self.edges], dtype=float)

    @cached_property
    def B(self):
        return incidence(self)

    @cached_property
    def L(self):
        return laplacian(self)

    @cached_property
    def L_pinv(self):
        return pseudoinverse(self.L)

    @cached_property
    def pp(self):
        return projections(self)

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, m={self.m})"


@dataclass(frozen=True, eq=False)
class ProjectionPair:
    """Weighted cutset and cycle projections of a graph

    Parameters
    ----------
    P_cut : (m, m) array
        Oblique projection onto Img(B^T) parallel to Ker(B A)
    P_cyc : (m, m) array
        Complementary projection I - P_cut
    """
    P_cut: np.ndarray
    P_cyc: np.ndarray

    @cached_property
    def cut_norm(self):
        return matrix_inf_norm(self.P_cut)

    @cached_property
    def cyc_norm(self):
        return matrix_inf_norm(self.P_cyc)

    @property
    def m(self):
        return self.P_cut.shape[0]


def build_graph(n, edges):
    """Validate an edge list and build a `WeightedGraph`

    Parameters
    ----------
    n : int
        Number of nodes (at least 2)
    edges : iterable of (i, j, w)
        Undirected edges between nodes `i` and `j` with weight `w` > 0

    Returns
    -------
    g : `WeightedGraph`
        Graph with edges sorted by (min(i, j), max(i, j))

    Raises
    ------
    NodeIndexError, SelfLoop, NonpositiveWeight, DuplicateEdge, DisconnectedGraph
    """
    n = int(n)
    if n < 2:
        raise ValidationError(f"A graph needs at least 2 nodes, got n={n}.")

    canonical = {}
    for edge in edges:
        i, j, w = edge
        i, j, w = int(i), int(j), float(w)
        if not (0 <= i < n and 0 <= j < n):
            raise NodeIndexError(f"Edge ({i}, {j}) references a node outside 0..{n - 1}.")
        if i == j:
            raise SelfLoop(f"Self-loop at node {i}.")
        if not (np.isfinite(w) and w > 0):
            raise NonpositiveWeight(f"Edge ({i}, {j}) has weight {w}; weights must be > 0.")
        key = (min(i, j), max(i, j))
        if key in canonical:
            raise DuplicateEdge(f"Edge {key} appears more than once.")
        canonical[key] = w

    # Verify connectivity by breadth-first traversal from node 0
    if canonical:
        rows, cols = np.array(list(canonical)).T
    else:
        rows = cols = np.array([], dtype=int)
    adjacency = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    reached = breadth_first_order(adjacency, 0, directed=False,
                                  return_predecessors=False)
    if len(reached) != n:
        raise DisconnectedGraph(f"Graph is disconnected: node 0 reaches "
                                f"{len(reached)} of {n} nodes.")

    ordered = tuple((i, j, canonical[(i, j)]) for (i, j) in sorted(canonical))
    return WeightedGraph(n=n, edges=ordered)


def reweight(g, weights):
    """Same topology with new edge weights (given in canonical edge order)"""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (g.m,):
        raise ValidationError(f"Expected {g.m} weights, got shape {weights.shape}.")
    return build_graph(g.n, [(i, j, w) for (i, j, _), w in zip(g.edges, weights)])


def incidence(g):
    """Oriented node-edge incidence matrix B (n x m)

    Edge (i, j) with i < j contributes +1 in row i and -1 in row j.
    """
    B = np.zeros((g.n, g.m))
    for e, (i, j, _) in enumerate(g.edges):
        B[i, e] = 1.0
        B[j, e] = -1.0
    return B


def laplacian(g):
    """Weighted Laplacian L = B diag(w) B^T"""
    B = g.B
    return (B * g.weights) @ B.T


def pseudoinverse(L):
    """Moore-Penrose pseudoinverse of a connected-graph Laplacian

    Parameters
    ----------
    L : (n, n) array
        Symmetric positive semidefinite Laplacian

    Returns
    -------
    L_pinv : (n, n) array
        Pseudoinverse computed from the symmetric eigendecomposition, with
        eigenvalues below `PINV_RTOL` times the largest treated as zero

    Raises
    ------
    SingularBeyondKernel
        If the numerical rank is below n - 1 (the graph is disconnected)
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    evals, evecs = scipy.linalg.eigh(L)
    cutoff = PINV_RTOL * np.max(np.abs(evals))
    keep = np.abs(evals) > cutoff
    rank = int(np.count_nonzero(keep))
    if rank < n - 1:
        raise SingularBeyondKernel(f"Laplacian rank {rank} < n - 1 = {n - 1}; "
                                   "the graph is not connected.")
    V = evecs[:, keep]
    L_pinv = (V / evals[keep]) @ V.T
    # Symmetrize away rounding
    return (L_pinv + L_pinv.T) / 2


def projections(g):
    """Weighted cutset and cycle projections

    P_cut = B^T L^+ B diag(w) and P_cyc = I - P_cut. For trees (m = n - 1)
    P_cut is the identity and P_cyc is set to exactly zero.

    Returns
    -------
    pp : `ProjectionPair`
    """
    m = g.m
    if is_acyclic(g):
        return ProjectionPair(P_cut=np.eye(m), P_cyc=np.zeros((m, m)))
    B = g.B
    P_cut = (B.T @ g.L_pinv @ B) * g.weights
    P_cyc = np.eye(m) - P_cut
    return ProjectionPair(P_cut=P_cut, P_cyc=P_cyc)


def check_centered(omega, n=None, rtol=CENTERING_RTOL):
    """Validate a frequency vector and return it as a float array

    Raises
    ------
    ValidationError
        If the length does not match `n`
    UncenteredFrequencies
        If |mean(omega)| > rtol * ||omega||_inf
    """
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or (n is not None and omega.shape[0] != n):
        raise ValidationError(f"Expected a frequency vector of length {n}, "
                              f"got shape {omega.shape}.")
    mean = float(omega.mean()) if omega.size else 0.0
    if abs(mean) > rtol * inf_norm(omega):
        raise UncenteredFrequencies(f"Frequencies are not centered: mean = {mean:.17g}.")
    return omega


def eta(g, omega):
    """Linearized edge flow eta = B^T L^+ omega

    Parameters
    ----------
    g : `WeightedGraph`
    omega : (n,) array
        Centered natural frequencies

    Returns
    -------
    eta : (m,) array
        Flow vector in Img(B^T)
    """
    omega = check_centered(omega, g.n)
    return g.B.T @ (g.L_pinv @ omega)


def is_flow(pp, v, rtol=FLOW_RTOL):
    """Whether an edge vector lies in Img(B^T) up to tolerance"""
    v = np.asarray(v, dtype=float)
    return inf_norm(pp.P_cyc @ v) <= rtol * max(1.0, inf_norm(v))


def is_acyclic(g):
    """Connected graphs are trees iff m = n - 1"""
    return g.m == g.n - 1


def algebraic_connectivity(g):
    """Second-smallest Laplacian eigenvalue lambda_2"""
    evals = scipy.linalg.eigvalsh(g.L)
    return float(evals[1])
