"""Spectral gap, log-Sobolev bracket, Cheeger constant, hitting times, heat kernel and L2 mixing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from . import kernels
from .errors import DomainError, SizeGuardError
from .inequalities import kl_contraction_chain
from .projections import keep_in
from .state import (
    Distribution,
    StochasticMatrix,
    as_subset,
    block_product,
    is_irreducible,
    reversibility_residual,
    stationary_distribution,
)

REVERSIBLE_TOL = 1e-9
CHEEGER_MAX_STATES = 22
MONO_TOL = 1e-10


def _resolve_pi(p: StochasticMatrix, pi: Distribution | None) -> Distribution:
    return stationary_distribution(p) if pi is None else pi


def _require_reversible(p: StochasticMatrix, pi: Distribution):
    if not pi.positive:
        raise DomainError("pi must be positive")
    res = reversibility_residual(p, pi)
    if res > REVERSIBLE_TOL:
        raise DomainError(f"chain is not pi-reversible (detailed-balance residual {res:.3g})")


def _symmetrized(p: StochasticMatrix, pi: Distribution) -> np.ndarray:
    s = np.sqrt(pi.mass)
    a = s[:, None] * p.rows / s[None, :]
    return 0.5 * (a + a.T)


def eigen_system(p: StochasticMatrix, pi: Distribution):
    """Eigenvalues (descending) and ``L2(pi)``-orthonormal right eigenvectors of a reversible chain."""
    _require_reversible(p, pi)
    lam, v = linalg.eigh(_symmetrized(p, pi))
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    phi = v[:, order] / np.sqrt(pi.mass)[:, None]
    return lam, phi


def spectral_gap(p: StochasticMatrix, pi: Distribution | None = None) -> float:
    """Right spectral gap ``1 - lambda_2`` of an irreducible reversible chain."""
    pi = _resolve_pi(p, pi)
    if p.n == 1:
        return 1.0
    # the right gap only needs irreducibility; periodic chains such as the flip walk are allowed
    if not is_irreducible(p):
        raise DomainError("spectral gap needs an irreducible chain")
    lam, _ = eigen_system(p, pi)
    return float(1.0 - lam[1])


def dirichlet_form(p: StochasticMatrix, pi: Distribution, f: np.ndarray) -> float:
    """``(1/2) sum_{x,y} pi(x) P(x,y) (f(x) - f(y))^2``."""
    f = np.asarray(f, dtype=float)
    diff = f[:, None] - f[None, :]
    return float(0.5 * np.sum(pi.mass[:, None] * p.rows * diff ** 2))


def entropy_of_square(pi: Distribution, f: np.ndarray) -> float:
    g = np.asarray(f, dtype=float) ** 2
    m = float(pi.mass @ g)
    if m <= 0:
        return 0.0
    logs = np.zeros_like(g)
    np.log(g / m, out=logs, where=g > 0)
    return float(pi.mass @ (g * logs))


@dataclass(frozen=True)
class LogSobolevBracket:
    lower: float
    upper: float
    numeric: float


def _alpha_lower(gamma: float, pi_min: float) -> float:
    if abs(1.0 - 2.0 * pi_min) < 1e-12:
        return gamma / 2.0
    return gamma * (1.0 - 2.0 * pi_min) / math.log(1.0 / pi_min - 1.0)


def _ls_objective(u, q, w):
    # f = exp(u); q = diag(pi) - sym(pi P), so D(f, f) = f^T q f
    u = u - u.max()
    f = np.exp(u)
    g = f * f
    m = w @ g
    d = f @ q @ f
    ln = 2.0 * u - np.log(m)
    ent = w @ (g * ln)
    if ent <= 1e-300:
        return np.inf, np.zeros_like(u)
    dd = 2.0 * (q @ f)
    de = 2.0 * f * w * ln
    grad_f = (dd * ent - d * de) / ent ** 2
    return d / ent, grad_f * f


def log_sobolev_bracket(p: StochasticMatrix, pi: Distribution | None = None,
                        restarts: int = 32, seed: int = 0) -> LogSobolevBracket:
    """Certified bracket for the log-Sobolev constant plus a numerical estimate.

    ``upper = gamma / 2`` and ``lower = gamma (1 - 2 pi_*) / ln(1 / pi_* - 1)``.
    The estimate minimizes ``D(f, f) / Ent(f^2)`` over positive ``f = exp(u)``
    (the quotient is scale invariant, so this is the unit-sphere problem) from
    four starts along the second eigenfunction plus ``restarts`` seeded random
    starts, and is clipped into the bracket.
    """
    pi = _resolve_pi(p, pi)
    gamma = spectral_gap(p, pi)
    upper = gamma / 2.0
    lower = min(_alpha_lower(gamma, float(pi.mass.min())), upper)
    w = pi.mass
    a = pi.mass[:, None] * p.rows
    q = np.diag(w) - 0.5 * (a + a.T)
    rng = np.random.Generator(np.random.Philox(seed))
    best = upper
    n = p.n
    # deterministic starts along the slowest eigenfunction, then random ones
    _, phi = eigen_system(p, pi)
    v = phi[:, 1] / np.abs(phi[:, 1]).max()
    starts = [s * v for s in (-3.0, -1.0, 1.0, 3.0)]
    for k in range(restarts):
        scale = 0.25 + 3.0 * rng.random()
        starts.append(scale * rng.standard_normal(n))
    for u0 in starts:
        res = optimize.minimize(_ls_objective, u0, args=(q, w), jac=True, method="L-BFGS-B",
                                options={"maxiter": 500, "gtol": 1e-12, "ftol": 1e-14})
        if np.isfinite(res.fun):
            best = min(best, float(res.fun))
    numeric = float(min(max(best, lower), upper))
    return LogSobolevBracket(lower, upper, numeric)


def _edge_weights(p: StochasticMatrix, pi: Distribution) -> np.ndarray:
    return np.ascontiguousarray(pi.mass[:, None] * p.rows)


def cheeger_constant(p: StochasticMatrix, pi: Distribution | None = None) -> float:
    """Exhaustive ``min_{0 < pi(A) <= 1/2} (pi ⊠ P)(A, A^c) / pi(A)``."""
    pi = _resolve_pi(p, pi)
    n = p.n
    if n > CHEEGER_MAX_STATES:
        raise SizeGuardError(f"Cheeger scan over {n} states would visit {2 ** n - 1} subsets; "
                             f"limit is {CHEEGER_MAX_STATES} states")
    if not pi.positive:
        raise DomainError("pi must be positive")
    if n == 1:
        raise DomainError("Cheeger constant needs at least two states")
    val, _ = kernels.cheeger_scan(_edge_weights(p, pi), np.ascontiguousarray(pi.mass))
    return float(val)


def cheeger_set(p: StochasticMatrix, pi: Distribution | None = None) -> tuple[float, list[int]]:
    """Cheeger constant together with a minimizing set of flat state indices."""
    pi = _resolve_pi(p, pi)
    if p.n > CHEEGER_MAX_STATES:
        raise SizeGuardError(f"Cheeger scan over {p.n} states exceeds the limit of {CHEEGER_MAX_STATES}")
    val, mask = kernels.cheeger_scan(_edge_weights(p, pi), np.ascontiguousarray(pi.mass))
    return float(val), [k for k in range(p.n) if (mask >> k) & 1]


@dataclass(frozen=True)
class HittingReport:
    hit: np.ndarray
    commute: np.ndarray
    t_c: float
    t_av: float
    # max over sampled (x, y, f) of D(f, f) * commute(x, y); never below 1 when the check holds
    variational_min_product: float | None = None
    # |D(h, h) * commute - 1| for the harmonic h(z) = P_z(tau_x < tau_y), max over pairs
    harmonic_residual: float | None = None

    @property
    def variational_ok(self) -> bool | None:
        if self.variational_min_product is None:
            return None
        return self.variational_min_product >= 1.0 - 1e-8


def hitting_times(p: StochasticMatrix) -> np.ndarray:
    """``E_x tau_y`` by one linear solve per target ``y``."""
    if not is_irreducible(p):
        raise DomainError("hitting times need an irreducible chain")
    n = p.n
    hit = np.zeros((n, n))
    a = np.eye(n) - p.rows
    for y in range(n):
        keep = np.arange(n) != y
        try:
            hit[keep, y] = linalg.solve(a[np.ix_(keep, keep)], np.ones(n - 1))
        except linalg.LinAlgError as exc:
            raise DomainError(f"hitting-time system for target {y} is singular") from exc
    return hit


def _harmonic(p: StochasticMatrix, x: int, y: int) -> np.ndarray:
    n = p.n
    h = np.zeros(n)
    h[x] = 1.0
    free = np.array([k for k in range(n) if k not in (x, y)], dtype=int)
    if free.size:
        a = np.eye(free.size) - p.rows[np.ix_(free, free)]
        h[free] = linalg.solve(a, p.rows[free, x])
    return h


def hitting_analysis(p: StochasticMatrix, pi: Distribution | None = None,
                     samples: int = 50, seed: int = 0, check_pairs: int = 200) -> HittingReport:
    """Hitting, commute and average hitting times.

    For reversible chains the commute-time variational formula is also checked:
    ``samples`` random admissible ``f`` per pair must satisfy
    ``1 / D(f, f) <= commute(x, y)``, and the harmonic ``f`` must attain it.
    At most ``check_pairs`` pairs are checked, chosen deterministically.
    """
    pi = _resolve_pi(p, pi)
    hit = hitting_times(p)
    commute = hit + hit.T
    t_c = float(commute.max())
    t_av = float(pi.mass @ hit @ pi.mass)
    if samples <= 0 or p.n < 2 or reversibility_residual(p, pi) > REVERSIBLE_TOL:
        return HittingReport(hit, commute, t_c, t_av)
    n = p.n
    rng = np.random.Generator(np.random.Philox(seed))
    pairs = [(x, y) for x in range(n) for y in range(x + 1, n)]
    if len(pairs) > check_pairs:
        idx = rng.choice(len(pairs), size=check_pairs, replace=False)
        pairs = [pairs[k] for k in sorted(idx)]
    worst = np.inf
    harm = 0.0
    w = pi.mass[:, None] * p.rows
    for x, y in pairs:
        f = rng.random((samples, n))
        f[:, x] = 1.0
        f[:, y] = 0.0
        diff = f[:, :, None] - f[:, None, :]
        dforms = 0.5 * np.einsum("xy,kxy->k", w, diff ** 2)
        worst = min(worst, float((dforms * commute[x, y]).min()))
        h = _harmonic(p, x, y)
        harm = max(harm, abs(dirichlet_form(p, pi, h) * commute[x, y] - 1.0))
    return HittingReport(hit, commute, t_c, t_av, worst, harm)


def heat_kernel(p: StochasticMatrix, t: float, pi: Distribution | None = None) -> StochasticMatrix:
    """``exp(t (P - I))``; eigendecomposition for reversible chains, ``expm`` otherwise."""
    if t < 0:
        raise DomainError("heat kernel needs t >= 0")
    if t == 0:
        return StochasticMatrix(p.space, np.eye(p.n))
    rev = False
    if pi is not None or is_irreducible(p):
        try:
            pi = _resolve_pi(p, pi)
            rev = pi.positive and reversibility_residual(p, pi) <= REVERSIBLE_TOL
        except DomainError:
            rev = False
    if rev:
        lam, phi = eigen_system(p, pi)
        h = (phi * np.exp(t * (lam - 1.0))) @ (phi * pi.mass[:, None]).T
    else:
        h = linalg.expm(t * (p.rows - np.eye(p.n)))
    h = np.clip(h, 0.0, None)
    return StochasticMatrix(p.space, h)


def l2_distance_profile(p: StochasticMatrix, pi: Distribution | None = None):
    """Return ``t -> max_x ||H_t(x, .) / pi - 1||_{L2(pi)}`` using the spectral expansion."""
    pi = _resolve_pi(p, pi)
    lam, phi = eigen_system(p, pi)
    rates = 1.0 - lam[1:]
    sq = phi[:, 1:] ** 2

    def dist(t: float) -> float:
        return float(np.sqrt(np.max(sq @ np.exp(-2.0 * t * rates))))

    return dist


def l2_mixing_time(p: StochasticMatrix, pi: Distribution | None = None, eps: float = math.exp(-1),
                   xtol: float = 1e-9) -> float:
    """Smallest ``t`` whose worst-case L2 distance to ``pi`` falls below ``eps``."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    pi = _resolve_pi(p, pi)
    if not is_irreducible(p):
        raise DomainError("mixing time needs an irreducible chain")
    if p.n == 1:
        return 0.0
    dist = l2_distance_profile(p, pi)
    if dist(0.0) <= eps:
        return 0.0
    hi = 1.0
    while dist(hi) >= eps:
        hi *= 2.0
        if hi > 1e12:
            raise DomainError("mixing time bracket diverged")
    return float(optimize.brentq(lambda t: dist(t) - eps, 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))


@dataclass(frozen=True)
class SpectralReport:
    gamma: float
    alpha_lower: float
    alpha_upper: float
    alpha_numeric: float
    cheeger: float | None = None

    @property
    def t_rel(self) -> float:
        return 1.0 / self.gamma


def spectral_report(p: StochasticMatrix, pi: Distribution | None = None, cheeger: bool = False,
                    restarts: int = 32, seed: int = 0) -> SpectralReport:
    pi = _resolve_pi(p, pi)
    gamma = spectral_gap(p, pi)
    br = log_sobolev_bracket(p, pi, restarts=restarts, seed=seed)
    phi = cheeger_constant(p, pi) if cheeger else None
    return SpectralReport(gamma, br.lower, br.upper, br.numeric, phi)


@dataclass
class ContractionReport:
    # one row per chain: P, P^(S), P^(T)
    rows: list[dict]
    checks: dict[str, bool]
    # alpha comparisons from the non-convex estimate; not asserted
    advisory: dict[str, bool] = field(default_factory=dict)
    tensor_gap: tuple[float, float] | None = None

    @property
    def holds(self) -> bool:
        return all(self.checks.values())


def _nonincreasing(vals, tol=MONO_TOL):
    return all(b <= a + tol for a, b in zip(vals, vals[1:]))


def _nondecreasing(vals, tol=MONO_TOL):
    return all(b >= a - tol for a, b in zip(vals, vals[1:]))


def contraction_report(p: StochasticMatrix, pi: Distribution | None, s, t,
                       cheeger: bool = True, alpha: bool = False, seed: int = 0) -> ContractionReport:
    """Tabulate mixing parameters along ``P, P^(S), P^(T)`` and check their monotonicity."""
    pi = _resolve_pi(p, pi)
    _require_reversible(p, pi)
    d = p.space.d
    s = as_subset(s, d)
    t = as_subset(t, d)
    if len(t) == 0 or not set(t.members) <= set(s.members):
        raise ValueError("need non-empty T contained in S")
    chains = [(p, pi), (keep_in(p, pi, s), pi.marginal(s)), (keep_in(p, pi, t), pi.marginal(t))]
    rows = []
    for m, pm in chains:
        row = {"states": m.n, "gamma": spectral_gap(m, pm) if m.n > 1 else None}
        if m.n > 1:
            hr = hitting_analysis(m, pm, samples=0)
            row.update(t_c=hr.t_c, t_av=hr.t_av)
            if cheeger and m.n <= CHEEGER_MAX_STATES:
                row["cheeger"] = cheeger_constant(m, pm)
            if alpha:
                br = log_sobolev_bracket(m, pm, seed=seed)
                row.update(alpha_lower=br.lower, alpha_upper=br.upper, alpha_numeric=br.numeric)
        rows.append(row)
    live = [r for r in rows if r["gamma"] is not None]
    checks = {
        "gamma": _nondecreasing([r["gamma"] for r in live]),
        "t_c": _nonincreasing([r["t_c"] for r in live]),
        "t_av": _nonincreasing([r["t_av"] for r in live]),
    }
    if all("cheeger" in r for r in live):
        checks["cheeger"] = _nondecreasing([r["cheeger"] for r in live])
    kl = kl_contraction_chain(p, pi, s, t)
    for k in range(3):
        rows[k]["independence"] = kl.independence[k]
        rows[k]["to_equilibrium"] = kl.to_equilibrium[k]
    checks["independence"] = _nonincreasing(list(kl.independence))
    checks["to_equilibrium"] = _nonincreasing(list(kl.to_equilibrium))
    advisory = {}
    if alpha:
        advisory["alpha_numeric"] = _nondecreasing([r["alpha_numeric"] for r in live], tol=1e-3)
    tensor = None
    if p.is_lazy() and len(s) < d:
        tensor = tensor_gap_pair(p, pi, s)
        checks["tensor_gap"] = tensor[0] <= tensor[1] + MONO_TOL
    return ContractionReport(rows, checks, advisory, tensor)


def tensor_gap_pair(p: StochasticMatrix, pi: Distribution, s) -> tuple[float, float]:
    """``(gamma(P), gamma(P^(S) ⊗ P^(-S)))`` in the original coordinate order."""
    d = p.space.d
    s = as_subset(s, d)
    rest = s.complement()
    a = keep_in(p, pi, s)
    b = keep_in(p, pi, rest)
    prod = StochasticMatrix(p.space, block_product([a.rows, b.rows], [s.members, rest.members], p.space))
    # the tensor chain is stationary for the product of the two marginals
    states = p.space.states()
    sizes = np.array(p.space.factor_sizes)
    ms, mr = list(s.members), list(rest.members)
    i_s = np.ravel_multi_index(states[:, ms].T, sizes[ms])
    i_r = np.ravel_multi_index(states[:, mr].T, sizes[mr])
    mu = Distribution(p.space, pi.marginal(s).mass[i_s] * pi.marginal(rest).mass[i_r])
    return spectral_gap(p, pi), spectral_gap(prod, mu)
