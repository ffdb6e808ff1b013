"""Partition- and clique-factorizable projections."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .divergences import kl_rate
from .errors import DomainError, ShapeError
from .projections import ProjectionResult, closest_product_kl, keep_in
from .state import (
    CoordinateSubset,
    Distribution,
    StochasticMatrix,
    as_subset,
    block_product,
)


@dataclass(frozen=True)
class Partition:
    d: int
    blocks: tuple[CoordinateSubset, ...]

    def __post_init__(self):
        blocks = tuple(as_subset(b, self.d) for b in self.blocks)
        seen: list[int] = []
        for b in blocks:
            if len(b) == 0:
                raise ValueError("partition blocks must be non-empty")
            seen.extend(b.members)
        if sorted(seen) != list(range(self.d)):
            raise ValueError(f"blocks {[b.members for b in blocks]} do not partition {self.d} coordinates")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def singletons(cls, d: int) -> "Partition":
        return cls(d, tuple((i,) for i in range(d)))


@dataclass(frozen=True)
class CliqueCover:
    d: int
    graph: np.ndarray
    cliques: tuple[CoordinateSubset, ...]

    def __post_init__(self):
        g = np.asarray(self.graph, dtype=bool)
        if g.shape != (self.d, self.d) or np.any(g != g.T):
            raise ValueError("graph must be a symmetric d x d adjacency matrix")
        cliques = tuple(as_subset(c, self.d) for c in self.cliques)
        for c in cliques:
            if len(c) == 0:
                raise ValueError("cliques must be non-empty")
            for a, b in combinations(c.members, 2):
                if not g[a, b]:
                    raise ValueError(f"{list(c.members)} is not a clique: {a} and {b} are not adjacent")
        covered = set().union(*(c.members for c in cliques))
        if covered != set(range(self.d)):
            raise ValueError("cliques must cover every coordinate")
        g.setflags(write=False)
        object.__setattr__(self, "graph", g)
        object.__setattr__(self, "cliques", cliques)

    @classmethod
    def from_cliques(cls, d: int, cliques) -> "CliqueCover":
        """Cover whose graph is the union of the cliques' complete subgraphs."""
        g = np.zeros((d, d), dtype=bool)
        for c in cliques:
            for a, b in combinations(sorted(c), 2):
                g[a, b] = g[b, a] = True
        return cls(d, g, tuple(tuple(c) for c in cliques))


def partition_projection(p: StochasticMatrix, pi: Distribution, part: Partition) -> ProjectionResult:
    if part.d != p.space.d:
        raise ShapeError("partition and state space disagree on d")
    factors = tuple(keep_in(p, pi, b) for b in part.blocks)
    prod = block_product([m.rows for m in factors], [b.members for b in part.blocks], p.space)
    prod = StochasticMatrix(p.space, prod)
    return ProjectionResult(factors, prod, kl_rate(pi, p, prod), unique=True)


def block_candidate(space, part: Partition, blocks: Sequence[StochasticMatrix]) -> StochasticMatrix:
    """Tensor product of per-block matrices, in the original coordinate order."""
    return StochasticMatrix(space, block_product([m.rows for m in blocks],
                                                 [b.members for b in part.blocks], space))


@dataclass(frozen=True)
class Decomposition:
    total: float
    to_factorizability: float
    per_block: tuple[float, ...]

    @property
    def residual(self) -> float:
        return self.total - self.to_factorizability - sum(self.per_block)


def independence_decomposition(p: StochasticMatrix, pi: Distribution, part: Partition) -> Decomposition:
    total = closest_product_kl(p, pi).divergence_to_input
    proj = partition_projection(p, pi, part)
    per_block = tuple(
        closest_product_kl(m, pi.marginal(b)).divergence_to_input
        for m, b in zip(proj.factors, part.blocks)
    )
    return Decomposition(total, proj.divergence_to_input, per_block)


@dataclass(frozen=True)
class CliqueCandidate:
    matrix: StochasticMatrix
    normalizers: np.ndarray


def clique_factorized(space, cover: CliqueCover, blocks: Sequence[StochasticMatrix]) -> CliqueCandidate:
    """Row-normalized product of per-clique matrices, with its normalizers ``Z(x)``."""
    if len(blocks) != len(cover.cliques):
        raise ShapeError(f"need {len(cover.cliques)} clique matrices, got {len(blocks)}")
    raw = block_product([m.rows for m in blocks], [c.members for c in cover.cliques], space)
    z = raw.sum(axis=1)
    zero = np.flatnonzero(z <= 0)
    if zero.size:
        x = space.unindex(int(zero[0]))
        raise DomainError(f"normalizer vanishes at state {x}")
    return CliqueCandidate(StochasticMatrix(space, raw / z[:, None]), z)


def clique_candidate(p: StochasticMatrix, pi: Distribution, cover: CliqueCover) -> CliqueCandidate:
    if cover.d != p.space.d:
        raise ShapeError("clique cover and state space disagree on d")
    projs = [keep_in(p, pi, c) for c in cover.cliques]
    return clique_factorized(p.space, cover, projs)


@dataclass(frozen=True)
class CliqueReport:
    lhs: float
    divergence_to_candidate: float
    block_divergences: tuple[float, ...]
    z_condition: np.ndarray
    # sum_x pi(x) ln(Z_L(x) / Z_P(x)); lhs equals rhs plus this term exactly
    normalizer_term: float

    @property
    def rhs(self) -> float:
        return self.divergence_to_candidate + sum(self.block_divergences)

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def asserted(self) -> bool:
        return bool(np.all(self.z_condition))

    @property
    def holds(self) -> bool | None:
        """``None`` when the normalizer condition fails somewhere."""
        if not self.asserted:
            return None
        return self.slack >= -1e-10


def clique_pythagorean_check(p: StochasticMatrix, pi: Distribution, cover: CliqueCover,
                             candidate_blocks: Sequence[StochasticMatrix]) -> CliqueReport:
    ref = clique_candidate(p, pi, cover)
    cand = clique_factorized(p.space, cover, candidate_blocks)
    projs = [keep_in(p, pi, c) for c in cover.cliques]
    blocks = tuple(kl_rate(pi.marginal(c), m, l)
                   for c, m, l in zip(cover.cliques, projs, candidate_blocks))
    z_ok = cand.normalizers >= ref.normalizers * (1 - 1e-12)
    term = float(np.dot(pi.mass, np.log(cand.normalizers / ref.normalizers)))
    return CliqueReport(kl_rate(pi, p, cand.matrix), kl_rate(pi, p, ref.matrix), blocks, z_ok, term)
