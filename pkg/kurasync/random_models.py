"""Seeded random graphs and natural frequencies

All randomness flows from integer seeds through numpy's PCG64 bit generator.
Graph topologies come from networkx, seeded with integers drawn from that
stream, so a (spec, seed) pair reproduces the same graph bit for bit.
"""
import logging
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import RetriesExhausted, ValidationError
from .graph import build_graph, reweight
from .utils import center


__all__ = ['ModelSpec',
           'FrequencySpec',
           'MODELS',
           'gen_graph',
           'gen_weights',
           'gen_frequencies',
           'split_seeds',
           'rng_from_seed']


logger = logging.getLogger(__name__)

MODELS = ('er', 'rgg', 'ws')
WEIGHT_DISTS = ('unit', 'uniform')
FREQUENCY_DISTS = ('uniform', 'bipolar')

# Draws allowed before giving up on a connected graph
MAX_DRAWS = 10_000
W_MAX = 10.0
# Ring lattice degree for Watts-Strogatz (2 neighbours per side)
WS_NEIGHBORS = 4


def rng_from_seed(seed):
    """numpy Generator on the PCG64 bit generator"""
    return np.random.Generator(np.random.PCG64(seed))


def split_seeds(master_seed, count):
    """Derive `count` independent 64-bit seeds from a master seed

    Uses `numpy.random.SeedSequence.spawn`, so the i-th child seed depends
    only on (master_seed, i).
    """
    children = np.random.SeedSequence(master_seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


@dataclass(frozen=True)
class ModelSpec:
    """Random graph model

    Parameters
    ----------
    model : str
        'er' (Erdos-Renyi), 'rgg' (random geometric) or 'ws' (Watts-Strogatz)
    n : int
        Number of nodes
    p : float
        Edge probability (er), connection radius (rgg) or rewiring
        probability (ws)
    seed : int
        Seed of the draw
    weight_dist : str (optional)
        'unit' or 'uniform' on (0, w_max]
    w_max : float (optional)
        Upper weight bound for 'uniform'
    ws_neighbors : int (optional)
        Ring lattice degree for 'ws', 4 (two per side) or 2
    """
    model: str
    n: int
    p: float
    seed: int = 0
    weight_dist: str = 'unit'
    w_max: float = W_MAX
    ws_neighbors: int = WS_NEIGHBORS

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValidationError(f"Unknown model '{self.model}'; expected one of {MODELS}.")
        if self.n < 2:
            raise ValidationError(f"Random graphs need n >= 2, got {self.n}.")
        if self.model == 'er' and not 0 < self.p <= 1:
            raise ValidationError(f"Erdos-Renyi needs 0 < p <= 1, got {self.p}.")
        if self.model == 'ws' and not 0 <= self.p <= 1:
            raise ValidationError(f"Watts-Strogatz needs 0 <= p <= 1, got {self.p}.")
        if self.model == 'rgg' and not self.p > 0:
            raise ValidationError(f"Random geometric graphs need a radius > 0, got {self.p}.")
        if self.weight_dist not in WEIGHT_DISTS:
            raise ValidationError(f"Unknown weight distribution '{self.weight_dist}'.")
        if self.ws_neighbors not in (2, 4):
            raise ValidationError("ws_neighbors must be 2 or 4.")
        if self.model == 'ws' and self.n <= self.ws_neighbors:
            raise ValidationError(f"A Watts-Strogatz ring of degree {self.ws_neighbors} "
                                  f"needs n > {self.ws_neighbors}, got {self.n}.")


@dataclass(frozen=True)
class FrequencySpec:
    """Natural frequency distribution

    `dist` is 'uniform' on (-a, a) or 'bipolar' on {-1, +1}; samples are
    centered after drawing.
    """
    dist: str
    n: int
    seed: int = 0
    a: float = 1.0

    def __post_init__(self):
        if self.dist not in FREQUENCY_DISTS:
            raise ValidationError(f"Unknown frequency distribution '{self.dist}'; "
                                  f"expected one of {FREQUENCY_DISTS}.")
        if self.a <= 0:
            raise ValidationError(f"Uniform half-width must be positive, got {self.a}.")


def _draw_topology(spec, seed):
    if spec.model == 'er':
        return nx.gnp_random_graph(spec.n, spec.p, seed=seed)
    if spec.model == 'rgg':
        return nx.random_geometric_graph(spec.n, spec.p, seed=seed)
    return nx.watts_strogatz_graph(spec.n, spec.ws_neighbors, spec.p, seed=seed)


def gen_graph(spec, max_draws=MAX_DRAWS):
    """Draw a connected graph from a random model

    Disconnected draws are discarded and redrawn.

    Parameters
    ----------
    spec : `ModelSpec`
    max_draws : int (optional)
        Number of draws before giving up

    Returns
    -------
    g : `WeightedGraph`

    Raises
    ------
    RetriesExhausted
        If no connected graph appears within `max_draws` draws
    """
    rng = rng_from_seed(spec.seed)
    for draw in range(1, max_draws + 1):
        G = _draw_topology(spec, int(rng.integers(2**62)))
        if nx.is_connected(G):
            break
    else:
        raise RetriesExhausted(f"No connected {spec.model.upper()} graph "
                               f"(n={spec.n}, p={spec.p}) in {max_draws} draws.",
                               draws=max_draws)
    if draw > 1:
        logger.debug("Connected %s graph after %d draws.", spec.model, draw)

    g = build_graph(spec.n, [(i, j, 1.0) for i, j in G.edges()])
    if spec.weight_dist == 'uniform':
        g = gen_weights(g, 'uniform', int(rng.integers(2**62)), w_max=spec.w_max)
    return g


def gen_weights(g, dist='uniform', seed=0, w_max=W_MAX):
    """Resample edge weights independently, uniform on (0, w_max]

    `dist='unit'` returns the graph unchanged.
    """
    if dist == 'unit':
        return g
    if dist not in WEIGHT_DISTS:
        raise ValidationError(f"Unknown weight distribution '{dist}'.")
    if w_max <= 0:
        raise ValidationError(f"w_max must be positive, got {w_max}.")
    rng = rng_from_seed(seed)
    # 1 - U[0, 1) lies in (0, 1]
    return reweight(g, w_max * (1.0 - rng.random(g.m)))


def gen_frequencies(spec):
    """Centered natural frequencies omega_i = q_i - mean(q)

    Parameters
    ----------
    spec : `FrequencySpec`

    Returns
    -------
    omega : (n,) array
    """
    rng = rng_from_seed(spec.seed)
    if spec.dist == 'uniform':
        q = rng.uniform(-spec.a, spec.a, spec.n)
    else:
        q = rng.choice(np.array([-1.0, 1.0]), spec.n)
    return center(q)
