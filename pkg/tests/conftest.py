import numpy as np
import pytest

from mcperturb.core import StochasticMatrix
from mcperturb.models import random_chain


def make_pair(n, seed):
    """Independent random base/perturbing kernels."""
    return random_chain(n, seed), random_chain(n, seed + 1)


def reversible_chain(n, seed):
    """Row-normalized symmetric weights: reversible, strictly positive."""
    rng = np.random.Generator(np.random.Philox(seed))
    W = 1.0 - rng.random((n, n))
    W = 0.5 * (W + W.T)
    return StochasticMatrix(W, renormalize=True)


def chain_with_transients(seed, n_closed=4, n_transient=3):
    """Unichain with a strictly positive closed block fed by transient states."""
    rng = np.random.Generator(np.random.Philox(seed))
    n = n_closed + n_transient
    P = np.zeros((n, n))
    P[:n_closed, :n_closed] = 1.0 - rng.random((n_closed, n_closed))
    P[n_closed:, :] = 1.0 - rng.random((n_transient, n))
    return StochasticMatrix(P, renormalize=True)


@pytest.fixture
def pair_factory():
    return make_pair


@pytest.fixture
def reversible_factory():
    return reversible_chain
