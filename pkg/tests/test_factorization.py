import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _oracles import loop_keep_in, rng_for
from mcgeo.divergences import kl_rate
from mcgeo.factorization import (
    CliqueCover,
    Partition,
    block_candidate,
    clique_candidate,
    clique_factorized,
    clique_pythagorean_check,
    independence_decomposition,
    partition_projection,
)
from mcgeo.random_chains import random_distribution, random_stochastic
from mcgeo.state import ProductStateSpace

SPACE = ProductStateSpace((2, 2, 3))
PARTITIONS = [((0,), (1, 2)), ((0, 2), (1,)), ((0, 1, 2),), ((0,), (1,), (2,))]


def _sub(sizes):
    return ProductStateSpace(tuple(sizes))


@given(st.integers(0, 10_000), st.sampled_from(PARTITIONS))
def test_partition_pythagorean(seed, blocks):
    rng = rng_for(seed)
    p = random_stochastic(SPACE, rng)
    pi = random_distribution(SPACE, rng)
    part = Partition(3, blocks)
    proj = partition_projection(p, pi, part)
    cands = [random_stochastic(_sub(SPACE.factor_sizes[i] for i in b), rng) for b in blocks]
    lhs = kl_rate(pi, p, block_candidate(SPACE, part, cands))
    rhs = proj.divergence_to_input + sum(
        kl_rate(pi.marginal(b), m, l) for b, m, l in zip(blocks, proj.factors, cands))
    assert lhs == pytest.approx(rhs, abs=1e-12)


@given(st.integers(0, 10_000), st.sampled_from(PARTITIONS[:2]))
def test_independence_decomposition_residual(seed, blocks):
    rng = rng_for(seed)
    p = random_stochastic(SPACE, rng)
    pi = random_distribution(SPACE, rng)
    dec = independence_decomposition(p, pi, Partition(3, blocks))
    assert abs(dec.residual) < 1e-12
    assert dec.to_factorizability >= -1e-15


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition(3, ((0,), (1,)))
    with pytest.raises(ValueError):
        Partition(3, ((0, 1), (1, 2)))
    assert len(Partition.singletons(4).blocks) == 4


def test_clique_cover_validation():
    g = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=bool)
    with pytest.raises(ValueError, match="not a clique"):
        CliqueCover(3, g, ((0, 1, 2),))
    with pytest.raises(ValueError, match="cover"):
        CliqueCover(3, g, ((0, 1),))
    c = CliqueCover.from_cliques(3, [(0, 1), (1, 2)])
    assert c.graph[0, 1] and c.graph[1, 2] and not c.graph[0, 2]


def test_clique_candidate_uses_keep_in_blocks():
    rng = rng_for(3)
    p = random_stochastic(SPACE, rng)
    pi = random_distribution(SPACE, rng)
    cover = CliqueCover.from_cliques(3, [(0, 1), (1, 2)])
    cand = clique_candidate(p, pi, cover)
    a = loop_keep_in(p.rows, pi.mass, SPACE.factor_sizes, (0, 1))
    b = loop_keep_in(p.rows, pi.mass, SPACE.factor_sizes, (1, 2))
    states = SPACE.states()
    raw = np.empty((SPACE.total, SPACE.total))
    for i, x in enumerate(states):
        for j, y in enumerate(states):
            raw[i, j] = a[x[0] * 2 + x[1], y[0] * 2 + y[1]] * b[x[1] * 3 + x[2], y[1] * 3 + y[2]]
    assert np.allclose(cand.normalizers, raw.sum(axis=1), atol=1e-14)
    assert np.allclose(cand.matrix.rows, raw / raw.sum(axis=1, keepdims=True), atol=1e-14)


@given(st.integers(0, 10_000))
def test_clique_identity_with_normalizer_term(seed):
    rng = rng_for(seed)
    p = random_stochastic(SPACE, rng)
    pi = random_distribution(SPACE, rng)
    cover = CliqueCover.from_cliques(3, [(0, 1), (1, 2)])
    blocks = [random_stochastic(_sub((2, 2)), rng), random_stochastic(_sub((2, 3)), rng)]
    rep = clique_pythagorean_check(p, pi, cover, blocks)
    # exact identity: D(P||L) = D(P||P_C) + sum of block terms + E_pi ln(Z_L / Z_P)
    assert rep.lhs == pytest.approx(rep.rhs + rep.normalizer_term, abs=1e-12)
    if rep.asserted:
        assert rep.holds
    else:
        assert rep.holds is None


def test_clique_disjoint_cover_reduces_to_partition():
    rng = rng_for(4)
    p = random_stochastic(SPACE, rng)
    pi = random_distribution(SPACE, rng)
    cover = CliqueCover.from_cliques(3, [(0,), (1, 2)])
    blocks = [random_stochastic(_sub((2,)), rng), random_stochastic(_sub((2, 3)), rng)]
    rep = clique_pythagorean_check(p, pi, cover, blocks)
    assert rep.asserted
    assert rep.normalizer_term == pytest.approx(0.0, abs=1e-14)
    assert rep.slack == pytest.approx(0.0, abs=1e-12)
    cand = clique_factorized(SPACE, cover, blocks)
    assert np.allclose(cand.normalizers, 1.0)
