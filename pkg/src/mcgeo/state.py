"""Product state spaces, distributions and transition matrices.

Every matrix and distribution in the package is indexed by the flat
mixed-radix index of :class:`ProductStateSpace`, with coordinate 0 as the most
significant digit.  The helpers :func:`embed` and :func:`as_tensor` convert
between flat matrices and per-coordinate tensors of shape
``sizes + sizes`` (first half: current state, second half: next state).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ShapeError

STOCHASTIC_TOL = 1e-12
STATIONARY_TOL = 1e-10
RENORMALIZE_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ProductStateSpace:
    """Finite product space X^(1) x ... x X^(d)."""

    factor_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.factor_sizes)
        if not sizes:
            raise ValueError("a state space needs at least one factor")
        if any(n < 1 for n in sizes):
            raise ValueError(f"factor sizes must be positive, got {sizes}")
        object.__setattr__(self, "factor_sizes", sizes)

    @classmethod
    def of(cls, *sizes: int) -> "ProductStateSpace":
        return cls(tuple(sizes))

    @property
    def d(self) -> int:
        return len(self.factor_sizes)

    @property
    def total(self) -> int:
        return math.prod(self.factor_sizes)

    def index(self, multi: Sequence[int]) -> int:
        if len(multi) != self.d:
            raise ShapeError(f"expected {self.d} coordinates, got {len(multi)}")
        k = 0
        for x, n in zip(multi, self.factor_sizes):
            if not 0 <= x < n:
                raise ValueError(f"coordinate value {x} outside [0, {n})")
            k = k * n + int(x)
        return k

    def unindex(self, k: int) -> tuple[int, ...]:
        if not 0 <= k < self.total:
            raise ValueError(f"flat index {k} outside [0, {self.total})")
        out = []
        for n in reversed(self.factor_sizes):
            k, r = divmod(k, n)
            out.append(r)
        return tuple(reversed(out))

    def states(self) -> np.ndarray:
        """All multi-indices as a ``(total, d)`` integer array in flat order."""
        grids = np.indices(self.factor_sizes).reshape(self.d, -1)
        return grids.T.copy()

    def subspace(self, members: Iterable[int]) -> "ProductStateSpace":
        return ProductStateSpace(tuple(self.factor_sizes[i] for i in members))


@dataclass(frozen=True)
class CoordinateSubset:
    """Sorted set of coordinate indices (0-based) out of ``d``."""

    d: int
    members: tuple[int, ...]

    def __post_init__(self):
        members = tuple(sorted(set(int(i) for i in self.members)))
        if any(not 0 <= i < self.d for i in members):
            raise ValueError(f"coordinates {members} not all in [0, {self.d})")
        object.__setattr__(self, "members", members)

    def complement(self) -> "CoordinateSubset":
        return CoordinateSubset(self.d, tuple(i for i in range(self.d) if i not in self.members))

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def __contains__(self, i):
        return i in self.members


def as_subset(s, d: int) -> CoordinateSubset:
    if isinstance(s, CoordinateSubset):
        if s.d != d:
            raise ShapeError(f"subset is over {s.d} coordinates, space has {d}")
        return s
    if isinstance(s, (int, np.integer)):
        s = (int(s),)
    return CoordinateSubset(d, tuple(s))


@dataclass(frozen=True)
class Distribution:
    space: ProductStateSpace
    mass: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float).ravel()
        if m.shape != (self.space.total,):
            raise ShapeError(f"mass has length {m.size}, space has {self.space.total} states")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise DomainError("distribution entries must be finite and non-negative")
        dev = abs(m.sum() - 1.0)
        if dev > RENORMALIZE_TOL:
            raise DomainError(f"distribution sums to {m.sum():.17g}")
        if dev > 0:
            m = m / m.sum()
        object.__setattr__(self, "mass", _frozen(m))

    @classmethod
    def uniform(cls, space: ProductStateSpace) -> "Distribution":
        return cls(space, np.full(space.total, 1.0 / space.total))

    @property
    def positive(self) -> bool:
        return bool(self.mass.min() > 0)

    def marginal(self, s) -> "Distribution":
        """Keep-S-in marginal: sum out every coordinate not in ``s``."""
        sub = as_subset(s, self.space.d)
        t = self.mass.reshape(self.space.factor_sizes)
        drop = tuple(i for i in range(self.space.d) if i not in sub)
        m = t.sum(axis=drop) if drop else t
        return Distribution(self.space.subspace(sub), m.ravel())

    def is_product(self, tol: float = 1e-12) -> bool:
        return bool(np.abs(self.mass - product_distribution(
            [self.marginal(i) for i in range(self.space.d)]).mass).max() <= tol)


@dataclass(frozen=True)
class StochasticMatrix:
    space: ProductStateSpace
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.space.total
        a = np.asarray(self.rows, dtype=float)
        if a.size == n * n:
            a = a.reshape(n, n)
        if a.shape != (n, n):
            raise ShapeError(f"matrix shape {a.shape} does not match {n} states")
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise DomainError("transition matrix entries must be finite and non-negative")
        sums = a.sum(axis=1)
        dev = np.abs(sums - 1.0)
        bad = np.flatnonzero(dev > RENORMALIZE_TOL)
        if bad.size:
            raise DomainError(f"row {int(bad[0])} (0-based) sums to {sums[bad[0]]:.17g}")
        if dev.max() > 0:
            a = a / sums[:, None]
        object.__setattr__(self, "rows", _frozen(a))

    @property
    def n(self) -> int:
        return self.space.total

    def __matmul__(self, other: "StochasticMatrix") -> "StochasticMatrix":
        return StochasticMatrix(self.space, self.rows @ other.rows)

    def power(self, k: int) -> "StochasticMatrix":
        return StochasticMatrix(self.space, np.linalg.matrix_power(self.rows, k))

    def is_lazy(self) -> bool:
        return bool(np.all(np.diag(self.rows) >= 0.5))


@dataclass(frozen=True)
class EdgeMeasure:
    space: ProductStateSpace
    mass: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.space.total
        a = np.asarray(self.mass, dtype=float).reshape(n, n)
        if abs(a.sum() - 1.0) > STOCHASTIC_TOL * n or np.any(a < 0):
            raise DomainError("edge measure must be a probability on X x X")
        object.__setattr__(self, "mass", _frozen(a))

    def first_marginal(self) -> np.ndarray:
        return self.mass.sum(axis=1)

    def second_marginal(self) -> np.ndarray:
        return self.mass.sum(axis=0)


def identity(space: ProductStateSpace) -> StochasticMatrix:
    return StochasticMatrix(space, np.eye(space.total))


def stationary_matrix(pi: Distribution) -> StochasticMatrix:
    """The matrix Pi whose rows all equal ``pi``."""
    return StochasticMatrix(pi.space, np.tile(pi.mass, (pi.space.total, 1)))


def tensor_product(ms: Sequence[StochasticMatrix]) -> StochasticMatrix:
    if not ms:
        raise ValueError("tensor_product needs at least one matrix")
    space = ProductStateSpace(sum((m.space.factor_sizes for m in ms), ()))
    rows = reduce(np.kron, [m.rows for m in ms])
    return StochasticMatrix(space, rows)


def product_distribution(ds: Sequence[Distribution]) -> Distribution:
    if not ds:
        raise ValueError("product_distribution needs at least one factor")
    space = ProductStateSpace(sum((p.space.factor_sizes for p in ds), ()))
    return Distribution(space, reduce(np.kron, [p.mass for p in ds]))


def as_tensor(a: np.ndarray, space: ProductStateSpace) -> np.ndarray:
    """View a flat ``(n, n)`` array as a ``sizes + sizes`` tensor."""
    return np.asarray(a).reshape(space.factor_sizes * 2)


def embed(block: np.ndarray, members: Sequence[int], space: ProductStateSpace) -> np.ndarray:
    """Broadcast a matrix over coordinates ``members`` to the full tensor shape.

    The result has shape ``sizes + sizes`` with singleton axes on coordinates
    outside ``members``, so products of embedded blocks give the tensor
    product in the original coordinate order.
    """
    members = list(members)
    d = space.d
    sub = [space.factor_sizes[i] for i in members]
    t = np.asarray(block).reshape(sub + sub)
    # order axes of t by coordinate position, then insert singleton axes
    order = np.argsort(members)
    t = np.transpose(t, list(order) + [len(members) + k for k in order])
    shape = [1] * (2 * d)
    for i in members:
        shape[i] = space.factor_sizes[i]
        shape[d + i] = space.factor_sizes[i]
    return t.reshape(shape)


def block_product(blocks: Sequence[np.ndarray], members: Sequence[Sequence[int]],
                  space: ProductStateSpace) -> np.ndarray:
    """Flat ``(n, n)`` product of matrices living on the given coordinate blocks."""
    out = np.ones([1] * (2 * space.d))
    for b, m in zip(blocks, members):
        out = out * embed(b, m, space)
    out = np.broadcast_to(out, space.factor_sizes * 2)
    return np.ascontiguousarray(out).reshape(space.total, space.total)


def support_reachability(rows: np.ndarray) -> np.ndarray:
    """Boolean reachability closure of the support graph (reflexive)."""
    from scipy.sparse.csgraph import shortest_path

    dist = shortest_path(rows > 0, unweighted=True, directed=True)
    return np.isfinite(dist)


def is_irreducible(p: StochasticMatrix) -> bool:
    from scipy.sparse.csgraph import connected_components

    k, _ = connected_components(p.rows > 0, directed=True, connection="strong")
    return k == 1


def period(p: StochasticMatrix) -> int:
    """Period of an irreducible chain: gcd of level differences along support edges."""
    adj = p.rows > 0
    n = p.n
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u, v in zip(*np.nonzero(adj)):
        if level[u] >= 0 and level[v] >= 0:
            g = math.gcd(g, int(level[u] + 1 - level[v]))
    return g


def is_ergodic(p: StochasticMatrix) -> bool:
    return is_irreducible(p) and period(p) == 1


def _unreachable_pair(p: StochasticMatrix) -> tuple[int, int]:
    reach = support_reachability(p.rows)
    x, y = np.argwhere(~reach)[0]
    return int(x), int(y)


def stationary_distribution(p: StochasticMatrix) -> Distribution:
    """Unique stationary law of an irreducible chain (dense left-null-space solve)."""
    if not is_irreducible(p):
        x, y = _unreachable_pair(p)
        raise DomainError(f"chain is reducible: state {y} is unreachable from state {x}")
    n = p.n
    a = p.rows.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    # one refinement step against the residual keeps ||pi P - pi||_1 near 1e-16
    r = b - a @ pi
    pi = pi + np.linalg.solve(a, r)
    pi = np.clip(pi, 0.0, None)
    return Distribution(p.space, pi / pi.sum())


def stationarity_residual(p: StochasticMatrix, pi: Distribution) -> float:
    return float(np.abs(pi.mass @ p.rows - pi.mass).sum())


def is_stationary(p: StochasticMatrix, pi: Distribution, tol: float = STATIONARY_TOL) -> bool:
    return stationarity_residual(p, pi) <= tol


def reversibility_residual(p: StochasticMatrix, pi: Distribution) -> float:
    e = pi.mass[:, None] * p.rows
    return float(np.abs(e - e.T).max())


def is_reversible(p: StochasticMatrix, pi: Distribution, tol: float = STATIONARY_TOL) -> bool:
    return reversibility_residual(p, pi) <= tol


def time_reversal(p: StochasticMatrix, pi: Distribution) -> StochasticMatrix:
    if not pi.positive:
        raise DomainError("time reversal needs a positive distribution")
    res = stationarity_residual(p, pi)
    if res > STATIONARY_TOL:
        raise DomainError(f"chain is not stationary for pi (residual {res:.3e})")
    q = pi.mass[None, :] * p.rows.T / pi.mass[:, None]
    return StochasticMatrix(p.space, q)


def edge_measure(pi: Distribution, p: StochasticMatrix) -> EdgeMeasure:
    if pi.space.total != p.space.total:
        raise ShapeError("distribution and matrix live on different spaces")
    return EdgeMeasure(p.space, pi.mass[:, None] * p.rows)


def check_same_space(*objs) -> ProductStateSpace:
    space = objs[0].space
    for o in objs[1:]:
        if o.space.factor_sizes != space.factor_sizes:
            raise ShapeError(f"space {o.space.factor_sizes} does not match {space.factor_sizes}")
    return space
