"""Swapping (replica-exchange) chain, its block decomposition and the projection sampler."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DomainError, ShapeError, SizeGuardError
from .projections import keep_in
from .spectral import l2_mixing_time, log_sobolev_bracket, spectral_gap
from .state import Distribution, ProductStateSpace, StochasticMatrix, product_distribution

# dense matrices: 2^12 states is 128 MiB per matrix
MAX_SWAP_STATES = 1 << 12
CHUNK_STEPS = 1 << 15


def hypercube_walk(n_bits: int) -> StochasticMatrix:
    """Flip a uniformly chosen bit with probability 1 (no holding)."""
    if n_bits < 1:
        raise ValueError("hypercube dimension must be positive")
    space = ProductStateSpace((2,) * n_bits)
    n = space.total
    rows = np.zeros((n, n))
    for x in range(n):
        for j in range(n_bits):
            # coordinate 0 is the most significant bit
            rows[x, x ^ (1 << (n_bits - 1 - j))] = 1.0 / n_bits
    return StochasticMatrix(space, rows)


@dataclass(frozen=True)
class SwapConfig:
    base_space: ProductStateSpace
    energy: np.ndarray
    betas: tuple[float, ...]
    base_chain: StochasticMatrix

    def __post_init__(self):
        h = np.asarray(self.energy, dtype=float).reshape(-1)
        if h.size != self.base_space.total:
            raise ShapeError(f"energy has {h.size} entries, base space has {self.base_space.total} states")
        if not np.all(np.isfinite(h)):
            raise DomainError("energy must be finite")
        betas = tuple(float(b) for b in self.betas)
        if len(betas) < 2:
            raise ValueError("need at least two inverse temperatures")
        if betas[0] < 0 or any(b >= c for b, c in zip(betas, betas[1:])):
            raise ValueError("betas must be non-negative and strictly increasing")
        p0 = self.base_chain
        if p0.n != self.base_space.total:
            raise ShapeError("base chain does not match the base space")
        if np.max(np.abs(p0.rows - p0.rows.T)) > 1e-10:
            raise DomainError("base chain must be reversible for the uniform distribution")
        h.setflags(write=False)
        object.__setattr__(self, "energy", h)
        object.__setattr__(self, "betas", betas)

    @classmethod
    def hypercube(cls, n_bits: int, energy, betas) -> "SwapConfig":
        p0 = hypercube_walk(n_bits)
        return cls(p0.space, np.asarray(energy, dtype=float), tuple(betas), p0)

    @property
    def d(self) -> int:
        return len(self.betas)

    @property
    def n(self) -> int:
        return self.base_space.total

    @property
    def swap_space(self) -> ProductStateSpace:
        return ProductStateSpace((self.n,) * self.d)

    @property
    def oscillation(self) -> float:
        return float(self.energy.max() - self.energy.min())


@dataclass(frozen=True)
class GibbsLadder:
    dists: tuple[Distribution, ...]

    @classmethod
    def of(cls, cfg: SwapConfig) -> "GibbsLadder":
        out = []
        for b in cfg.betas:
            logw = -b * cfg.energy
            w = np.exp(logw - logw.max())
            out.append(Distribution(cfg.base_space, w / w.sum()))
        return cls(tuple(out))

    def joint(self) -> Distribution:
        """The product target ``pi_sw`` on the swap space."""
        flat = [Distribution(ProductStateSpace((m.space.total,)), m.mass) for m in self.dists]
        return product_distribution(flat)


def _guard(cfg: SwapConfig):
    total = cfg.n ** cfg.d
    if total > MAX_SWAP_STATES:
        raise SizeGuardError(f"swap space has {total} states; dense construction is limited to {MAX_SWAP_STATES}")


def level_chain(cfg: SwapConfig, beta: float) -> np.ndarray:
    """Metropolis chain for ``pi_beta`` with proposal ``P0``."""
    h = cfg.energy
    acc = np.minimum(1.0, np.exp(-beta * (h[None, :] - h[:, None])))
    m = cfg.base_chain.rows * acc
    np.fill_diagonal(m, 0.0)
    m[np.diag_indices_from(m)] = 1.0 - m.sum(axis=1)
    return m


def level_acceptance(cfg: SwapConfig) -> np.ndarray:
    h = cfg.energy
    return np.stack([np.minimum(1.0, np.exp(-b * (h[None, :] - h[:, None]))) for b in cfg.betas])


def swap_acceptance(cfg: SwapConfig) -> np.ndarray:
    """``acc[i, a, b]`` for swapping ``x_i = a`` with ``x_{i+1} = b``."""
    h = cfg.energy
    gap = np.maximum(h[:, None] - h[None, :], 0.0)
    return np.stack([np.exp(-(c - b) * gap) for b, c in zip(cfg.betas, cfg.betas[1:])])


def build_swapping_matrix(cfg: SwapConfig) -> StochasticMatrix:
    """Half level moves (uniform level, Metropolis on ``P0``), half adjacent swaps."""
    _guard(cfg)
    d, n = cfg.d, cfg.n
    space = cfg.swap_space
    total = space.total
    states = space.states()
    idx = np.arange(total)
    strides = n ** np.arange(d - 1, -1, -1)
    rows = np.zeros((total, total))
    for i, beta in enumerate(cfg.betas):
        m = level_chain(cfg, beta)
        xi = states[:, i]
        base = idx - xi * strides[i]
        targets = base[:, None] + np.arange(n)[None, :] * strides[i]
        rows[idx[:, None], targets] += m[xi] / (2.0 * d)
    acc = swap_acceptance(cfg)
    for i in range(d - 1):
        a, b = states[:, i], states[:, i + 1]
        y = idx + (b - a) * strides[i] + (a - b) * strides[i + 1]
        pr = acc[i, a, b] / (2.0 * (d - 1))
        rows[idx, y] += pr
        rows[idx, idx] += 1.0 / (2.0 * (d - 1)) - pr
    return StochasticMatrix(space, rows)


def step_distribution(cfg: SwapConfig, x: Sequence[int]) -> dict[tuple[int, ...], float]:
    """One-step law from ``x`` by enumerating every move; an independent route to one row."""
    d = cfg.d
    h = cfg.energy
    p0 = cfg.base_chain.rows
    out: dict[tuple[int, ...], float] = {}

    def add(y, w):
        out[tuple(y)] = out.get(tuple(y), 0.0) + w

    x = list(x)
    for i in range(d):
        for z in range(cfg.n):
            q = p0[x[i], z]
            if q == 0.0:
                continue
            a = min(1.0, math.exp(-cfg.betas[i] * (h[z] - h[x[i]])))
            y = list(x)
            y[i] = z
            add(y, 0.5 / d * q * a)
            add(x, 0.5 / d * q * (1.0 - a))
    for i in range(d - 1):
        a = math.exp(-(cfg.betas[i + 1] - cfg.betas[i]) * max(h[x[i]] - h[x[i + 1]], 0.0))
        y = list(x)
        y[i], y[i + 1] = y[i + 1], y[i]
        add(y, 0.5 / (d - 1) * a)
        add(x, 0.5 / (d - 1) * (1.0 - a))
    return out


def _block_indices(cfg: SwapConfig, fixed: Sequence[int]) -> np.ndarray:
    fixed = list(fixed)
    if len(fixed) != cfg.d - 1 or any(not 0 <= v < cfg.n for v in fixed):
        raise ShapeError(f"fixed block must list {cfg.d - 1} states of the base space")
    space = cfg.swap_space
    return np.array([space.index([y] + fixed) for y in range(cfg.n)])


def restriction_chain(cfg: SwapConfig, fixed: Sequence[int], p_sw: StochasticMatrix | None = None) -> StochasticMatrix:
    """Chain on the block ``X x {fixed}`` with off-block mass folded into the diagonal."""
    if p_sw is None:
        p_sw = build_swapping_matrix(cfg)
    ids = _block_indices(cfg, fixed)
    r = p_sw.rows[np.ix_(ids, ids)].copy()
    np.fill_diagonal(r, 0.0)
    r[np.diag_indices_from(r)] = 1.0 - r.sum(axis=1)
    return StochasticMatrix(cfg.base_space, r)


def restriction_formula(cfg: SwapConfig) -> StochasticMatrix:
    """``(1/(2d)) P0 + (1 - 1/(2d)) I``."""
    c = 1.0 / (2 * cfg.d)
    return StochasticMatrix(cfg.base_space, c * cfg.base_chain.rows + (1.0 - c) * np.eye(cfg.n))


def gamma_escape(cfg: SwapConfig, p_sw: StochasticMatrix | None = None) -> float:
    """Largest one-step probability of leaving a block, by exhaustive scan."""
    if p_sw is None:
        p_sw = build_swapping_matrix(cfg)
    n, d = cfg.n, cfg.d
    # group columns by the fixed coordinates: within-block mass of row (y, x)
    t = p_sw.rows.reshape(n, n ** (d - 1), n, n ** (d - 1))
    inside = np.einsum("ykzk->yk", t)
    return float((1.0 - inside).max())


def projection_sampler_matrix(cfg: SwapConfig, p_sw: StochasticMatrix | None = None) -> StochasticMatrix:
    """Keep-{2..d}-in chain of the swapping chain."""
    if p_sw is None:
        p_sw = build_swapping_matrix(cfg)
    pi = GibbsLadder.of(cfg).joint()
    return keep_in(p_sw, pi, tuple(range(1, cfg.d)))


def resample_then_step_matrix(cfg: SwapConfig, p_sw: StochasticMatrix | None = None) -> StochasticMatrix:
    """Exact expectation of the simulation kernel: resample level 1, then one swapping step."""
    if p_sw is None:
        p_sw = build_swapping_matrix(cfg)
    n, d = cfg.n, cfg.d
    rest = n ** (d - 1)
    pi0 = GibbsLadder.of(cfg).dists[0].mass
    t = p_sw.rows.reshape(n, rest, n, rest)
    q = np.einsum("a,akbl->kl", pi0, t)
    return StochasticMatrix(ProductStateSpace((n,) * (d - 1)), q)


@dataclass
class SamplerRun:
    seed: int
    steps: int
    coordinate: int
    empirical: Distribution
    counts: np.ndarray = field(repr=False)
    trajectory: np.ndarray | None = field(default=None, repr=False)
    backend: str = kernels.BACKEND


def _cdf(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p, axis=-1)
    c[..., -1] = 1.0
    return np.ascontiguousarray(c)


def simulate_projection_sampler(cfg: SwapConfig, seed: int, steps: int, coordinate: int = -1,
                                record: bool = False, backend=None) -> SamplerRun:
    """Run the resample-then-step sampler from the all-zero state.

    Randomness comes from ``numpy.random.Philox(seed)``; each step consumes five
    uniforms in the order (resample, move type, index, proposal, acceptance),
    drawn in blocks of ``CHUNK_STEPS`` steps.  Both kernel backends consume the
    same stream, so runs are bit-identical across them.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    d, n = cfg.d, cfg.n
    if not -d <= coordinate < d:
        raise IndexError(f"coordinate {coordinate} out of range for d = {d}")
    coordinate %= d
    impl = backend if backend is not None else kernels
    ladder = GibbsLadder.of(cfg)
    cdf0 = _cdf(ladder.dists[0].mass)
    p0cdf = _cdf(cfg.base_chain.rows)
    acc_l = np.ascontiguousarray(level_acceptance(cfg))
    acc_s = np.ascontiguousarray(swap_acceptance(cfg))
    rng = np.random.Generator(np.random.Philox(seed))
    state = np.zeros(d, dtype=np.int64)
    counts = np.zeros((d, n), dtype=np.int64)
    traj = np.zeros((steps, d), dtype=np.int64) if record else None
    empty = np.zeros((0, d), dtype=np.int64)
    done = 0
    while done < steps:
        m = min(CHUNK_STEPS, steps - done)
        u = rng.random((m, 5))
        out = traj[done:done + m] if record else empty
        impl.sampler_chunk(state, u, cdf0, p0cdf, acc_l, acc_s, counts, out)
        done += m
    emp = Distribution(cfg.base_space, counts[coordinate] / steps)
    name = getattr(impl, "BACKEND", None) or ("cython" if impl.__name__.endswith("_speedups") else "python")
    return SamplerRun(seed, steps, coordinate, emp, counts, traj, name)


def _threads() -> int:
    v = int(os.environ.get("MCGEO_THREADS", "0") or 0)
    return v if v > 0 else (os.cpu_count() or 1)


def simulate_replicas(cfg: SwapConfig, seed: int, steps: int, replicas: int,
                      coordinate: int = -1) -> list[SamplerRun]:
    """Independent runs with seeds ``seed + r``; results do not depend on thread count."""
    seeds = [seed + r for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=min(_threads(), replicas)) as ex:
        return list(ex.map(lambda s: simulate_projection_sampler(cfg, s, steps, coordinate), seeds))


def total_variation(a: Distribution, b: Distribution) -> float:
    return 0.5 * float(np.abs(a.mass - b.mass).sum())


@dataclass
class SpeedupReport:
    values: dict
    # inequality-form speedup claims, evaluated exactly as stated
    stated_claims: dict
    # classical theorems the numbers must satisfy
    theorems: dict
    # equality-form displays, recorded with residuals only
    recorded: dict

    @property
    def asserted_ok(self) -> bool:
        return all(self.stated_claims.values())

    @property
    def theorems_ok(self) -> bool:
        return all(self.theorems.values())


def _dsc_upper(pi_min: float) -> float:
    return 4.0 + math.log(math.log(1.0 / pi_min))


def speedup_report(cfg: SwapConfig, restarts: int = 32, seed: int = 0, mixing: bool = True) -> SpeedupReport:
    if any(s != 2 for s in cfg.base_space.factor_sizes):
        raise DomainError("speedup report needs a hypercube base space")
    n_bits = cfg.base_space.d
    d = cfg.d
    beta = cfg.betas[-1]
    p_sw = build_swapping_matrix(cfg)
    ladder = GibbsLadder.of(cfg)
    pi_sw = ladder.joint()
    proj = keep_in(p_sw, pi_sw, tuple(range(1, d)))
    pi_proj = pi_sw.marginal(tuple(range(1, d)))
    uniform = Distribution.uniform(cfg.base_space)
    g0 = spectral_gap(cfg.base_chain, uniform)
    g_sw = spectral_gap(p_sw, pi_sw)
    g_bar = spectral_gap(proj, pi_proj)
    g_res = spectral_gap(restriction_formula(cfg), uniform)
    big_gamma = gamma_escape(cfg, p_sw)
    a_sw = log_sobolev_bracket(p_sw, pi_sw, restarts=restarts, seed=seed)
    a_bar = log_sobolev_bracket(proj, pi_proj, restarts=restarts, seed=seed)
    values = dict(N=n_bits, d=d, betas=list(cfg.betas), osc=cfg.oscillation,
                  gamma_p0=g0, gamma_sw=g_sw, gamma_proj=g_bar, gamma_restriction=g_res,
                  Gamma=big_gamma, ratio=g_sw / g_bar,
                  alpha_sw=[a_sw.lower, a_sw.numeric, a_sw.upper],
                  alpha_proj=[a_bar.lower, a_bar.numeric, a_bar.upper])
    stated_claims = {}
    recorded = {}
    c = 1.0 - 1.0 / (2 * d) - 0.5 * (d - 2) / (d - 1)
    rhs_relax_d = d * (n_bits + 1) + 3 * c * d * (n_bits + 1) / g_bar
    stated_claims["relaxation_lower_bound_dN"] = 1.0 / g_sw >= rhs_relax_d - 1e-12
    recorded["relaxation_dN"] = dict(lhs=1.0 / g_sw, rhs=rhs_relax_d)
    if d == 2:
        stated_claims["gap_third"] = g_sw <= g_bar / 3.0 + 1e-12
        rhs_relax = 2 * (n_bits + 1) + 4.5 * (n_bits + 1) / g_bar
        recorded["relaxation_equality_N"] = dict(lhs=1.0 / g_sw, rhs=rhs_relax, residual=1.0 / g_sw - rhs_relax)
        rhs_ls = 4 * (n_bits + 1) + 9 * (n_bits + 1) / a_bar.numeric
        recorded["log_sobolev_equality_N"] = dict(lhs=1.0 / a_sw.numeric, rhs=rhs_ls,
                                                  residual=1.0 / a_sw.numeric - rhs_ls)
    gmin = g_res
    decomp_lb = min(g_bar / 3.0, g_bar * gmin / (g_bar + 3.0 * big_gamma))
    theorems = {
        "decomposition_lower_bound": g_sw >= decomp_lb - 1e-12,
        "contraction": g_sw <= g_bar + 1e-12,
        "restriction_gap": abs(g_res - g0 / (2 * d)) <= 1e-12,
    }
    values["decomposition_lower_bound"] = decomp_lb
    if mixing:
        t_bar = l2_mixing_time(proj, pi_proj, math.exp(-1))
        t_sw = l2_mixing_time(p_sw, pi_sw, math.exp(-1))
        scale = 1 if d == 2 else d
        osc_bound = (4.0 + math.log(beta * scale * cfg.oscillation + n_bits * math.log(2))) / a_bar.lower
        values.update(tmix_sw=t_sw, tmix_proj=t_bar, tmix_proj_osc_bound=osc_bound)
        for name, t, a, pi in (("sw", t_sw, a_sw, pi_sw), ("proj", t_bar, a_bar, pi_proj)):
            lo = 1.0 / (2.0 * a.upper)
            hi = _dsc_upper(float(pi.mass.min())) / a.lower
            values[f"tmix_{name}_sandwich"] = [lo, hi]
            theorems[f"sandwich_{name}"] = lo - 1e-6 <= t <= hi + 1e-6
        if d == 2:
            theorems["oscillation_bound"] = t_bar <= osc_bound + 1e-6
        else:
            # only the d = 2 form follows from min pi >= exp(-beta Osc) / 2^N
            stated_claims["oscillation_bound_d"] = t_bar <= osc_bound + 1e-6
        if d == 2:
            rhs_tmix = 9 * (n_bits + 1) / (2 * a_bar.numeric)
            recorded["tmix_lower_N"] = dict(lhs=t_sw, rhs=rhs_tmix, holds=t_sw >= rhs_tmix)
    return SpeedupReport(values, stated_claims, theorems, recorded)


def hypercube_ledger(n_bits: int, restarts: int = 32, seed: int = 0) -> dict:
    """Computed constants of the flip walk next to the displayed ``1/(N+1)`` values."""
    p0 = hypercube_walk(n_bits)
    u = Distribution.uniform(p0.space)
    g = spectral_gap(p0, u)
    br = log_sobolev_bracket(p0, u, restarts=restarts, seed=seed)
    return dict(
        N=n_bits,
        gamma=g,
        gamma_closed_form=2.0 / n_bits,
        alpha_lower=br.lower,
        alpha_numeric=br.numeric,
        alpha_upper=br.upper,
        alpha_over_gamma=br.numeric / g,
        stated_gamma=2.0 / (n_bits + 1),
        stated_alpha=1.0 / (n_bits + 1),
        gamma_discrepancy=g - 2.0 / (n_bits + 1),
    )
