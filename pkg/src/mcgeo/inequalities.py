"""Partition lemma, Han/Shearer inequalities, entropy rates and modularity scans."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Sequence

import numpy as np

from .divergences import DivergenceGenerator, f_div_arrays, kl_rate
from .errors import DomainError, ShapeError, SizeGuardError
from .factorization import Partition, partition_projection
from .projections import closest_product_kl, keep_in, prescribed_projection
from .state import (
    CoordinateSubset,
    Distribution,
    EdgeMeasure,
    ProductStateSpace,
    StochasticMatrix,
    as_subset,
    block_product,
    check_same_space,
    is_stationary,
    stationary_distribution,
    stationary_matrix,
    tensor_product,
)

SLACK_TOL = 1e-10


@dataclass(frozen=True)
class InequalityReport:
    lhs: float
    rhs: float
    # False when the inputs fall outside the hypotheses under which the inequality is a theorem
    premise: bool = True

    @property
    def slack(self) -> float:
        if self.lhs == self.rhs:
            return 0.0
        return self.lhs - self.rhs

    @property
    def holds(self) -> bool:
        return self.slack >= -SLACK_TOL


@dataclass(frozen=True)
class SubsetCoverSpec:
    """Subsets of the coordinates in which every coordinate appears at least ``r`` times."""

    d: int
    subsets: tuple[CoordinateSubset, ...]
    r: int

    def __post_init__(self):
        subsets = tuple(as_subset(s, self.d) for s in self.subsets)
        if self.r < 1:
            raise ValueError("cover multiplicity r must be positive")
        for j in range(self.d):
            k = sum(j in s for s in subsets)
            if k < self.r:
                raise ValueError(f"coordinate {j} belongs to {k} subsets, fewer than r = {self.r}")
        object.__setattr__(self, "subsets", subsets)

    def counts(self) -> list[int]:
        return [sum(j in s for s in self.subsets) for j in range(self.d)]

    @property
    def at_most_r(self) -> bool:
        """Every coordinate lies in at most ``r`` subsets.

        Superadditivity of KL against a product reference needs this bound;
        the lower bound ``r`` alone does not suffice (the full set plus any
        singleton is a counterexample with ``r = 1``).
        """
        return max(self.counts()) <= self.r

    @classmethod
    def han(cls, d: int) -> "SubsetCoverSpec":
        """Leave-one-out cover with multiplicity ``d - 1``."""
        if d < 2:
            raise ValueError("the Han cover needs d >= 2")
        return cls(d, tuple(tuple(k for k in range(d) if k != i) for i in range(d)), d - 1)

    @classmethod
    def with_max_r(cls, d: int, subsets) -> "SubsetCoverSpec":
        subs = [as_subset(s, d) for s in subsets]
        r = min(sum(j in s for s in subs) for j in range(d))
        return cls(d, tuple(subs), r)


def _require_product(pi: Distribution):
    if not pi.positive:
        raise DomainError("pi must be positive")
    if not pi.is_product():
        raise DomainError("pi must be a product distribution")


def partition_lemma_check(pi: Distribution, p: StochasticMatrix, l: StochasticMatrix, s) -> InequalityReport:
    check_same_space(p, l)
    sub = as_subset(s, p.space.d)
    if len(sub) == 0:
        raise ValueError("partition lemma needs a non-empty subset")
    lhs = kl_rate(pi, p, l)
    rhs = kl_rate(pi.marginal(sub), keep_in(p, pi, sub), keep_in(l, pi, sub))
    return InequalityReport(lhs, rhs)


def shearer_chain_check(pi: Distribution, p: StochasticMatrix,
                        l_factors: Sequence[StochasticMatrix], cover: SubsetCoverSpec) -> InequalityReport:
    _require_product(pi)
    d = p.space.d
    if len(l_factors) != d or cover.d != d:
        raise ShapeError("need one factor per coordinate and a cover over d coordinates")
    lhs = kl_rate(pi, p, tensor_product(list(l_factors)))
    total = 0.0
    for s in cover.subsets:
        if len(s) == 0:
            continue
        ls = tensor_product([l_factors[j] for j in s])
        total += kl_rate(pi.marginal(s), keep_in(p, pi, s), ls)
    return InequalityReport(lhs, total / cover.r, cover.at_most_r)


def shearer_independence_check(pi: Distribution, p: StochasticMatrix,
                               cover: SubsetCoverSpec) -> InequalityReport:
    _require_product(pi)
    lhs = closest_product_kl(p, pi).divergence_to_input
    total = 0.0
    for s in cover.subsets:
        if len(s) == 0:
            continue
        total += closest_product_kl(keep_in(p, pi, s), pi.marginal(s)).divergence_to_input
    return InequalityReport(lhs, total / cover.r, cover.at_most_r)


def entropy_rate(p: StochasticMatrix, pi: Distribution | None = None) -> float:
    """Shannon entropy rate ``-sum_x pi(x) sum_y P(x,y) ln P(x,y)`` of the stationary chain."""
    if pi is None:
        pi = stationary_distribution(p)
    r = p.rows
    logs = np.zeros_like(r)
    np.log(r, out=logs, where=r > 0)
    return float(-np.dot(pi.mass, (r * logs).sum(axis=1)))


FUNCTIONALS = ("entropy", "fact", "ind")


def subset_functional(p: StochasticMatrix, pi: Distribution, functional: str):
    """Return ``g(S)`` for the chosen functional; ``g`` takes a tuple of coordinates."""
    d = p.space.d
    full = tuple(range(d))
    cache: dict[tuple, float] = {}

    def proj(s):
        return keep_in(p, pi, s), pi.marginal(s)

    def h(s):
        if not s:
            return 0.0
        m, ps = proj(s)
        return entropy_rate(m, ps)

    def g(s):
        s = tuple(sorted(s))
        if s in cache:
            return cache[s]
        if functional == "entropy":
            v = h(s)
        elif functional == "fact":
            rest = tuple(i for i in full if i not in s)
            if not s or not rest:
                v = 0.0
            else:
                v = partition_projection(p, pi, Partition(d, (s, rest))).divergence_to_input
        elif functional == "ind":
            v = 0.0 if len(s) <= 1 else closest_product_kl(*proj(s)).divergence_to_input
        else:
            raise ValueError(f"unknown functional {functional!r}")
        cache[s] = v
        return v

    return g


@dataclass
class ScanReport:
    functional: str
    triples: int
    min_modularity_slack: float
    min_monotonicity_slack: float | None
    values: dict = field(repr=False)

    @property
    def holds(self) -> bool:
        ok = self.min_modularity_slack >= -SLACK_TOL
        if self.min_monotonicity_slack is not None:
            ok = ok and self.min_monotonicity_slack >= -SLACK_TOL
        return ok


def _subsets(d):
    for k in range(d + 1):
        yield from combinations(range(d), k)


def triple_count(d: int) -> int:
    # sum over T of 2^|T| choices of S and (d - |T|) choices of i
    return sum(comb(d, t) * 2 ** t * (d - t) for t in range(d + 1))


def modularity_scan(p: StochasticMatrix, functional: str, pi: Distribution | None = None,
                    max_d: int = 5) -> ScanReport:
    """Exhaustive sub/supermodularity scan over all ``S ⊆ T``, ``i ∉ T``.

    ``entropy`` and ``fact`` are checked for submodularity, ``ind`` for
    supermodularity and monotonicity.
    """
    d = p.space.d
    if d > max_d:
        raise SizeGuardError(f"d = {d} exceeds {max_d}; the scan would visit {triple_count(d)} triples")
    if pi is None:
        pi = stationary_distribution(p)
    elif not is_stationary(p, pi):
        raise DomainError("modularity scans need a pi-stationary chain")
    g = subset_functional(p, pi, functional)
    values = {s: g(s) for s in _subsets(d)}
    sign = -1.0 if functional == "ind" else 1.0
    worst = np.inf
    worst_mono = np.inf if functional == "ind" else None
    n = 0
    for t in values:
        tset = set(t)
        for s in _subsets(len(t)):
            s_coords = tuple(t[k] for k in s)
            if functional == "ind":
                worst_mono = min(worst_mono, values[t] - values[s_coords])
            for i in range(d):
                if i in tset:
                    continue
                n += 1
                si = tuple(sorted(s_coords + (i,)))
                ti = tuple(sorted(t + (i,)))
                slack = values[si] - values[s_coords] - values[ti] + values[t]
                worst = min(worst, sign * slack)
    return ScanReport(functional, n, float(worst), None if worst_mono is None else float(worst_mono), values)


def factorizability_entropy_identity(p: StochasticMatrix, pi: Distribution, s) -> tuple[float, float]:
    """Both sides of ``D(P || P^S ⊗ P^-S) = H(P^S) + H(P^-S) - H(P)``."""
    sub = as_subset(s, p.space.d)
    rest = sub.complement()
    lhs = partition_projection(p, pi, Partition(p.space.d, (sub, rest))).divergence_to_input
    rhs = (entropy_rate(keep_in(p, pi, sub), pi.marginal(sub))
           + entropy_rate(keep_in(p, pi, rest), pi.marginal(rest))
           - entropy_rate(p, pi))
    return lhs, rhs


def independence_entropy_identity(p: StochasticMatrix, pi: Distribution, s) -> tuple[float, float]:
    """Both sides of ``I(P^S) = sum_{i in S} H(P^i) - H(P^S)``."""
    sub = as_subset(s, p.space.d)
    ps = keep_in(p, pi, sub)
    pis = pi.marginal(sub)
    lhs = closest_product_kl(ps, pis).divergence_to_input
    rhs = sum(entropy_rate(keep_in(p, pi, (i,)), pi.marginal(i)) for i in sub) - entropy_rate(ps, pis)
    return lhs, rhs


@dataclass(frozen=True)
class ContractionChain:
    """KL monotonicity ``P ⊇ S ⊇ T`` for distance to independence and ``D(P || Pi)``."""

    independence: tuple[float, float, float]
    to_equilibrium: tuple[float, float, float]

    @property
    def holds(self) -> bool:
        a, b, c = self.independence
        u, v, w = self.to_equilibrium
        return (a - b >= -SLACK_TOL and b - c >= -SLACK_TOL
                and u - v >= -SLACK_TOL and v - w >= -SLACK_TOL)


def kl_contraction_chain(p: StochasticMatrix, pi: Distribution, s, t) -> ContractionChain:
    d = p.space.d
    s = as_subset(s, d)
    t = as_subset(t, d)
    if not set(t.members) <= set(s.members) or len(t) == 0:
        raise ValueError("need a non-empty T contained in S")
    ind = []
    eq = []
    for sub in (CoordinateSubset(d, tuple(range(d))), s, t):
        m = keep_in(p, pi, sub)
        ps = pi.marginal(sub)
        ind.append(closest_product_kl(m, ps).divergence_to_input if len(sub) > 1 else 0.0)
        eq.append(kl_rate(ps, m, stationary_matrix(ps)))
    return ContractionChain(tuple(ind), tuple(eq))


def pair_empirical_measure(trajectory: Sequence[int], space: ProductStateSpace | int) -> EdgeMeasure:
    """Cyclic pair empirical measure of a trajectory of flat state indices."""
    if isinstance(space, int):
        space = ProductStateSpace((space,))
    x = np.asarray(trajectory, dtype=np.int64)
    if x.size == 0:
        raise ValueError("trajectory is empty")
    n = space.total
    if x.min() < 0 or x.max() >= n:
        raise ValueError("trajectory visits a state outside the space")
    counts = np.zeros((n, n))
    np.add.at(counts, (x, np.roll(x, -1)), 1.0)
    return EdgeMeasure(space, counts / x.size)


_RKL = DivergenceGenerator.reverse_kl()


def sanov_rate(p: StochasticMatrix, pi: Distribution, i: int,
               others: Sequence[StochasticMatrix]) -> float:
    """Reverse-KL rate exponent of the prescribed-marginal projection (upper bound only)."""
    _require_product(pi)
    if np.any(p.rows <= 0):
        raise DomainError("the Sanov rate needs an entrywise positive P")
    if not is_stationary(p, pi):
        raise DomainError("P must be pi-stationary")
    d = p.space.d
    js = [j for j in range(d) if j != i]
    for j, lj in zip(js, others):
        if not is_stationary(lj, pi.marginal(j)):
            raise DomainError(f"fixed factor for coordinate {j} is not stationary for its marginal")
    lstar = prescribed_projection(p, pi, i, others, _RKL)
    factors = list(others[:i]) + [lstar] + list(others[i:])
    prod = block_product([m.rows for m in factors], [[j] for j in range(d)], p.space)
    return f_div_arrays(pi.mass, p.rows, prod, _RKL)
