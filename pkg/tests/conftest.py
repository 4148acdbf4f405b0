import numpy as np
import pytest

from kurasync.graph import build_graph
from kurasync.random_models import ModelSpec, gen_graph


@pytest.fixture
def path2():
    return build_graph(2, [(0, 1, 1.0)])


@pytest.fixture
def triangle():
    return build_graph(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)])


def make_eps3(eps):
    return build_graph(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, eps)])


@pytest.fixture
def eps3():
    return make_eps3


def random_graph(seed, n=12, p=0.4, weights='uniform', model='er'):
    """Seeded connected random graph"""
    return gen_graph(ModelSpec(model=model, n=n, p=p, seed=seed, weight_dist=weights))


def random_tree(seed, n):
    """Uniformly attached random tree with weights in (0.5, 2]"""
    rng = np.random.default_rng(seed)
    edges = [(int(rng.integers(i)), i, 0.5 + 1.5*(1 - rng.random())) for i in range(1, n)]
    return build_graph(n, edges)


def centered(rng, n, scale=1.0):
    q = rng.uniform(-scale, scale, n)
    return q - q.mean()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
