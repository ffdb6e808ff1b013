import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _oracles import rng_for
from mcgeo.errors import DomainError, ShapeError, SizeGuardError
from mcgeo.spectral import spectral_gap
from mcgeo.state import Distribution, reversibility_residual, stationarity_residual
from mcgeo.swapping import (
    GibbsLadder,
    SwapConfig,
    build_swapping_matrix,
    gamma_escape,
    hypercube_ledger,
    hypercube_walk,
    projection_sampler_matrix,
    resample_then_step_matrix,
    restriction_chain,
    restriction_formula,
    simulate_projection_sampler,
    simulate_replicas,
    speedup_report,
    step_distribution,
    total_variation,
)


def energy(n_bits, seed):
    return rng_for(seed).random(2 ** n_bits) * 2.0


def loop_swap_matrix(cfg):
    """Swapping kernel assembled state by state from the move description."""
    n, d = cfg.n, cfg.d
    h, betas, p0 = cfg.energy, cfg.betas, cfg.base_chain.rows
    states = list(itertools.product(range(n), repeat=d))
    pos = {x: k for k, x in enumerate(states)}
    out = np.zeros((len(states), len(states)))
    for x in states:
        a = pos[x]
        for i in range(d):
            for z in range(n):
                acc = min(1.0, math.exp(-betas[i] * (h[z] - h[x[i]])))
                y = x[:i] + (z,) + x[i + 1:]
                out[a, pos[y]] += p0[x[i], z] * acc / (2 * d)
                out[a, a] += p0[x[i], z] * (1 - acc) / (2 * d)
        for i in range(d - 1):
            ratio = math.exp((betas[i + 1] - betas[i]) * (h[x[i + 1]] - h[x[i]]))
            acc = min(1.0, ratio)
            y = list(x)
            y[i], y[i + 1] = y[i + 1], y[i]
            out[a, pos[tuple(y)]] += acc / (2 * (d - 1))
            out[a, a] += (1 - acc) / (2 * (d - 1))
    return out


def test_hypercube_walk():
    p = hypercube_walk(3)
    assert np.allclose(p.rows.sum(axis=1), 1)
    assert np.all(np.diag(p.rows) == 0)
    # neighbours differ in exactly one bit
    for x in range(8):
        for y in range(8):
            assert (p.rows[x, y] > 0) == (bin(x ^ y).count("1") == 1)


@pytest.mark.parametrize("n_bits,betas", [(2, (0.0, 1.0)), (2, (0.3, 0.7, 1.5)), (3, (0.0, 1.0))])
def test_swap_matrix_matches_loops(n_bits, betas):
    cfg = SwapConfig.hypercube(n_bits, energy(n_bits, 1), betas)
    p = build_swapping_matrix(cfg)
    assert np.allclose(p.rows, loop_swap_matrix(cfg), atol=1e-15)
    pi = GibbsLadder.of(cfg).joint()
    assert stationarity_residual(p, pi) < 1e-14
    assert reversibility_residual(p, pi) < 1e-15
    for x in [(0,) * cfg.d, tuple(range(cfg.d))]:
        row = step_distribution(cfg, x)
        k = cfg.swap_space.index(x)
        for y, w in row.items():
            assert p.rows[k, cfg.swap_space.index(y)] == pytest.approx(w, abs=1e-15)


def test_gibbs_ladder():
    cfg = SwapConfig.hypercube(2, [0.0, 1.0, 2.0, 3.0], (0.0, 1.0))
    lad = GibbsLadder.of(cfg)
    assert np.allclose(lad.dists[0].mass, 0.25)
    w = np.exp(-np.arange(4.0))
    assert np.allclose(lad.dists[1].mass, w / w.sum())
    assert cfg.oscillation == 3.0


@pytest.mark.parametrize("n_bits", [2, 3])
@pytest.mark.parametrize("d", [2, 3])
def test_restriction_chain_closed_form(n_bits, d):
    betas = tuple(np.linspace(0.0, 1.0, d))
    cfg = SwapConfig.hypercube(n_bits, energy(n_bits, 2), betas)
    p = build_swapping_matrix(cfg)
    formula = restriction_formula(cfg).rows
    assert np.allclose(formula, p0_mix(cfg, 1 / (2 * d)))
    for fixed in itertools.product(range(cfg.n), repeat=d - 1):
        assert np.abs(restriction_chain(cfg, fixed, p).rows - formula).max() <= 1e-12
    u = Distribution.uniform(cfg.base_space)
    assert spectral_gap(restriction_formula(cfg), u) == pytest.approx(spectral_gap(cfg.base_chain, u) / (2 * d))


def p0_mix(cfg, c):
    return c * cfg.base_chain.rows + (1 - c) * np.eye(cfg.n)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_gamma_escape(d):
    cfg = SwapConfig.hypercube(2, energy(2, 3), tuple(np.linspace(0, 1, d)))
    p = build_swapping_matrix(cfg)
    n = cfg.n
    want = 0.0
    for k, x in enumerate(cfg.swap_space.states()):
        same = [j for j, y in enumerate(cfg.swap_space.states()) if tuple(y[1:]) == tuple(x[1:])]
        want = max(want, 1 - p.rows[k, same].sum())
    assert gamma_escape(cfg, p) == pytest.approx(want, abs=1e-15)
    if d == 2:
        assert want == pytest.approx(0.75, abs=1e-12)
    assert n == 4


def test_projection_chain_is_resample_then_step():
    cfg = SwapConfig.hypercube(3, energy(3, 4), (0.0, 0.5, 1.0))
    p = build_swapping_matrix(cfg)
    a = projection_sampler_matrix(cfg, p).rows
    b = resample_then_step_matrix(cfg, p).rows
    assert np.abs(a - b).max() < 1e-14


def test_validation_and_guard():
    with pytest.raises(ValueError):
        SwapConfig.hypercube(2, np.zeros(4), (1.0, 0.5))
    with pytest.raises(ValueError):
        SwapConfig.hypercube(2, np.zeros(4), (1.0,))
    with pytest.raises(ShapeError):
        SwapConfig.hypercube(2, np.zeros(5), (0.0, 1.0))
    with pytest.raises(DomainError):
        SwapConfig.hypercube(2, [0, 1, np.inf, 0], (0.0, 1.0))
    with pytest.raises(SizeGuardError):
        build_swapping_matrix(SwapConfig.hypercube(7, np.zeros(128), (0.0, 1.0)))


def test_sampler_matches_exact_law():
    cfg = SwapConfig.hypercube(3, energy(3, 5), (0.0, 1.0))
    run = simulate_projection_sampler(cfg, seed=3, steps=100_000, coordinate=1)
    exact = GibbsLadder.of(cfg).dists[1]
    assert total_variation(run.empirical, exact) < 0.03
    assert run.counts.sum(axis=1).tolist() == [100_000, 100_000]


def test_sampler_reproducible_and_records():
    cfg = SwapConfig.hypercube(2, energy(2, 6), (0.0, 0.5, 1.0))
    a = simulate_projection_sampler(cfg, seed=9, steps=70_000, record=True)
    b = simulate_projection_sampler(cfg, seed=9, steps=70_000)
    assert np.array_equal(a.counts, b.counts)
    assert a.trajectory.shape == (70_000, 3)
    for i in range(3):
        assert np.array_equal(np.bincount(a.trajectory[:, i], minlength=4), a.counts[i])
    # every transition of the levels 2..d is a possible move of the projection chain
    proj = projection_sampler_matrix(cfg).rows
    space = cfg.swap_space.subspace((1, 2))
    rest = [space.index(tuple(r)) for r in a.trajectory[:, 1:]]
    assert all(proj[x, y] > 0 for x, y in zip(rest, rest[1:]))
    with pytest.raises(IndexError):
        simulate_projection_sampler(cfg, seed=1, steps=10, coordinate=3)
    with pytest.raises(ValueError):
        simulate_projection_sampler(cfg, seed=1, steps=0)


def test_replicas_are_seed_shifted(monkeypatch):
    cfg = SwapConfig.hypercube(2, energy(2, 7), (0.0, 1.0))
    monkeypatch.setenv("MCGEO_THREADS", "2")
    runs = simulate_replicas(cfg, seed=4, steps=5_000, replicas=3)
    for r, run in enumerate(runs):
        solo = simulate_projection_sampler(cfg, seed=4 + r, steps=5_000)
        assert np.array_equal(run.counts, solo.counts)


def test_constant_energy_gap_ratio():
    # with H = 0 the ratio is 1/(N+1): the one-third bound is tight at N = 2
    for n_bits in (2, 3):
        cfg = SwapConfig.hypercube(n_bits, np.zeros(2 ** n_bits), (0.0, 1.0))
        rep = speedup_report(cfg, restarts=4, mixing=False)
        assert rep.values["ratio"] == pytest.approx(1 / (n_bits + 1), abs=1e-12)
        assert rep.values["gamma_sw"] == pytest.approx(1 / (2 * n_bits), abs=1e-12)
        assert rep.stated_claims["gap_third"]


def test_gap_third_fails_for_random_energy():
    """The one-third gap bound does not survive a non-constant energy at N = 2."""
    cfg = SwapConfig.hypercube(2, energy(2, 0), (0.0, 1.0))
    rep = speedup_report(cfg, restarts=4, mixing=False)
    assert rep.values["ratio"] > 1 / 3
    assert not rep.stated_claims["gap_third"]
    assert rep.theorems_ok


@given(st.integers(0, 1000))
def test_speedup_theorems_hold(seed):
    cfg = SwapConfig.hypercube(2, energy(2, seed), (0.0, 1.0))
    rep = speedup_report(cfg, restarts=4, seed=seed)
    assert rep.theorems_ok, rep.theorems
    assert rep.values["Gamma"] == pytest.approx(0.75)


def test_hypercube_ledger_values():
    for n_bits in (2, 3):
        led = hypercube_ledger(n_bits, restarts=8)
        assert led["gamma"] == pytest.approx(2 / n_bits)
        assert led["stated_gamma"] == pytest.approx(2 / (n_bits + 1))
        assert 0.45 <= led["alpha_over_gamma"] <= 0.55
