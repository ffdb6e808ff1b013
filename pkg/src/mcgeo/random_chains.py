"""Seeded random instances: stochastic matrices, reversible chains, product targets."""
from __future__ import annotations

import numpy as np

from .state import Distribution, ProductStateSpace, StochasticMatrix, product_distribution


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.Generator(np.random.Philox(seed_or_rng))


def random_stochastic(space: ProductStateSpace, rng, floor: float = 0.0) -> StochasticMatrix:
    """Rows drawn from a flat Dirichlet, optionally bounded away from zero."""
    rng = _rng(rng)
    n = space.total
    a = rng.dirichlet(np.ones(n), size=n)
    if floor > 0:
        a = (a + floor) / (1.0 + n * floor)
    return StochasticMatrix(space, a)


def random_distribution(space: ProductStateSpace, rng, floor: float = 0.05) -> Distribution:
    rng = _rng(rng)
    m = rng.random(space.total) + floor
    return Distribution(space, m / m.sum())


def random_product_distribution(space: ProductStateSpace, rng, floor: float = 0.05) -> Distribution:
    rng = _rng(rng)
    parts = [random_distribution(ProductStateSpace((k,)), rng, floor) for k in space.factor_sizes]
    return Distribution(space, product_distribution(parts).mass)


def metropolis_chain(pi: Distribution, rng, lazy: bool = False, density: float = 1.0) -> StochasticMatrix:
    """Random symmetric proposal corrected to be ``pi``-reversible.

    ``density < 1`` drops proposal edges at random (a spanning path keeps the
    chain irreducible).
    """
    rng = _rng(rng)
    n = pi.space.total
    q = rng.random((n, n))
    q = 0.5 * (q + q.T)
    if density < 1.0:
        keep = rng.random((n, n)) < density
        keep = keep | keep.T
        idx = np.arange(n - 1)
        keep[idx, idx + 1] = keep[idx + 1, idx] = True
        q = q * keep
    np.fill_diagonal(q, 0.0)
    q /= q.sum(axis=1).max()
    ratio = np.minimum(1.0, pi.mass[None, :] / pi.mass[:, None])
    p = q * ratio
    p[np.diag_indices(n)] = np.clip(1.0 - p.sum(axis=1), 0.0, None)
    if lazy:
        p = 0.5 * (p + np.eye(n))
    return StochasticMatrix(pi.space, p)


def stationary_instance(space: ProductStateSpace, rng, product: bool = True, lazy: bool = False):
    """``(P, pi)`` with ``P`` reversible for a positive ``pi`` (product by default)."""
    rng = _rng(rng)
    pi = random_product_distribution(space, rng) if product else random_distribution(space, rng)
    return metropolis_chain(pi, rng, lazy=lazy), pi
