"""Keep-S-in / leave-S-out chains and closest product chains."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .divergences import DivergenceGenerator, f_div_arrays, f_div_chains, kl_rate
from .errors import DomainError, ShapeError
from .state import (
    Distribution,
    StochasticMatrix,
    as_subset,
    as_tensor,
    block_product,
    embed,
    tensor_product,
)


@dataclass(frozen=True)
class ProjectionResult:
    factors: tuple[StochasticMatrix, ...]
    product: StochasticMatrix
    divergence_to_input: float
    # uniqueness of the minimizer is only guaranteed for positive pi
    unique: bool = False


def _require_positive(pi: Distribution):
    if not pi.positive:
        raise DomainError("pi must be positive (min entry > 0)")


def keep_in(p: StochasticMatrix, pi: Distribution, s) -> StochasticMatrix:
    """Keep-S-in chain: pi-weighted marginalization of the edge measure onto ``s``."""
    _require_positive(pi)
    space = p.space
    sub = as_subset(s, space.d)
    if len(sub) == 0:
        raise ValueError("keep_in needs a non-empty coordinate subset")
    d = space.d
    e = as_tensor(pi.mass[:, None] * p.rows, space)
    drop = [i for i in range(d) if i not in sub]
    axes = tuple(drop) + tuple(d + i for i in drop)
    if axes:
        e = e.sum(axis=axes)
    subspace = space.subspace(sub)
    e = e.reshape(subspace.total, subspace.total)
    pis = e.sum(axis=1)
    return StochasticMatrix(subspace, e / pis[:, None])


def leave_out(p: StochasticMatrix, pi: Distribution, s) -> StochasticMatrix:
    return keep_in(p, pi, as_subset(s, p.space.d).complement())


def marginal_chain(p: StochasticMatrix, pi: Distribution, i: int) -> StochasticMatrix:
    if not 0 <= i < p.space.d:
        raise IndexError(f"coordinate {i} out of range for d = {p.space.d}")
    return keep_in(p, pi, (i,))


def marginals(p: StochasticMatrix, pi: Distribution) -> list[StochasticMatrix]:
    return [marginal_chain(p, pi, i) for i in range(p.space.d)]


def closest_product_kl(p: StochasticMatrix, pi: Distribution) -> ProjectionResult:
    """Closest product chain under KL and the distance to independence."""
    _require_positive(pi)
    factors = tuple(marginals(p, pi))
    prod = tensor_product(factors)
    return ProjectionResult(factors, prod, kl_rate(pi, p, prod), unique=True)


def distance_to_independence(p: StochasticMatrix, pi: Distribution,
                             f: DivergenceGenerator | None = None, **descent_kw) -> float:
    """``I_f^pi(P)``; closed form for KL, coordinate descent for ReverseKL/Alpha."""
    if f is None or f.kind == "KL":
        return closest_product_kl(p, pi).divergence_to_input
    res = coordinate_descent(p, pi, f, **descent_kw)
    return res.trace[-1]


def _other_weights(p: StochasticMatrix, pi: Distribution, i: int,
                   others: Sequence[StochasticMatrix]) -> np.ndarray:
    """Tensor of ``prod_{j != i} L_j(x^j, y^j)`` broadcast to ``sizes + sizes``."""
    space = p.space
    if len(others) != space.d - 1:
        raise ShapeError(f"expected {space.d - 1} fixed factors, got {len(others)}")
    w = np.ones([1] * (2 * space.d))
    js = [j for j in range(space.d) if j != i]
    for j, lj in zip(js, others):
        if lj.space.factor_sizes != (space.factor_sizes[j],):
            raise ShapeError(f"factor for coordinate {j} has the wrong size")
        w = w * embed(lj.rows, [j], space)
    return np.broadcast_to(w, space.factor_sizes * 2)


def _sum_to_coordinate(t: np.ndarray, i: int, d: int) -> np.ndarray:
    axes = tuple(k for k in range(2 * d) if k not in (i, d + i))
    return t.sum(axis=axes) if axes else t


def prescribed_projection(p: StochasticMatrix, pi: Distribution, i: int,
                          others: Sequence[StochasticMatrix],
                          f: DivergenceGenerator) -> StochasticMatrix:
    """Optimal i-th factor given the other factors of a product candidate."""
    _require_positive(pi)
    space = p.space
    d = space.d
    if not 0 <= i < d:
        raise IndexError(f"coordinate {i} out of range for d = {d}")
    if f.kind == "KL":
        return marginal_chain(p, pi, i)
    if f.kind not in ("ReverseKL", "Alpha"):
        raise ValueError(f"no closed-form prescribed projection for {f.kind}")
    w = _other_weights(p, pi, i, others)
    pit = pi.mass.reshape(space.factor_sizes + (1,) * d)
    pt = as_tensor(p.rows, space)
    ni = space.factor_sizes[i]
    if f.kind == "ReverseKL":
        weight = pit * w
        live = weight > 0
        if np.any(live & (pt == 0)):
            raise DomainError("reverse-KL projection needs P > 0 wherever the weights are positive")
        logp = np.zeros(pt.shape)
        np.log(pt, out=logp, where=live)
        c = _sum_to_coordinate(weight * logp, i, d)
        a = pi.marginal(i).mass
        log_l = c / a[:, None]
        log_l = log_l - logsumexp(log_l, axis=1, keepdims=True)
        return StochasticMatrix(space.subspace([i]), np.exp(log_l).reshape(ni, ni))
    alpha = f.alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        wa = np.where(pt > 0, pit * np.power(w, 1.0 - alpha) * np.power(pt, alpha), 0.0)
    if not np.all(np.isfinite(wa)):
        raise DomainError("alpha projection undefined: fixed factors vanish where P > 0")
    v = _sum_to_coordinate(wa, i, d)
    lstar = np.power(v, 1.0 / alpha)
    sums = lstar.sum(axis=1, keepdims=True)
    lstar = np.where(sums > 0, lstar / np.where(sums > 0, sums, 1.0), 1.0 / ni)
    return StochasticMatrix(space.subspace([i]), lstar)


class DescentResult(NamedTuple):
    factors: list
    # divergence after initialization and after every single-coordinate update
    trace: list


def coordinate_descent(p: StochasticMatrix, pi: Distribution, f: DivergenceGenerator,
                       init: Sequence[StochasticMatrix] | None = None,
                       max_iters: int = 500, tol: float = 1e-10) -> DescentResult:
    """Cyclic coordinate descent over product candidates using the closed-form updates.

    Stops once a full sweep lowers the divergence by less than ``tol`` or after
    ``max_iters`` sweeps.  ``trace[k * d]`` is the value after sweep ``k``.
    """
    space = p.space
    d = space.d
    if f.kind not in ("KL", "ReverseKL", "Alpha"):
        raise ValueError(f"coordinate descent supports KL, ReverseKL and Alpha, not {f.kind}")
    if init is None:
        factors = [StochasticMatrix(space.subspace([j]), np.full((n, n), 1.0 / n))
                   for j, n in enumerate(space.factor_sizes)]
    else:
        factors = list(init)
        if len(factors) != d:
            raise ShapeError(f"init needs {d} factor matrices")

    def value():
        prod = block_product([m.rows for m in factors], [[j] for j in range(d)], space)
        return f_div_arrays(pi.mass, p.rows, prod, f)

    trace = [value()]
    for _ in range(max_iters):
        start = trace[-1]
        for j in range(d):
            others = factors[:j] + factors[j + 1:]
            factors[j] = prescribed_projection(p, pi, j, others, f)
            trace.append(value())
        if not start - trace[-1] >= tol:
            break
    return DescentResult(factors, trace)


def candidate_divergence(p: StochasticMatrix, pi: Distribution,
                         factors: Sequence[StochasticMatrix], f: DivergenceGenerator) -> float:
    """``D_f^pi(P || tensor of factors)``."""
    return f_div_chains(pi, p, tensor_product(list(factors)), f)
