"""f-divergences between probability masses and between transition matrices.

Boundary conventions: ``0 f(0/0) = 0``, ``0 f(a/0) = a f'(+inf)`` and
``0 * inf = 0``.  Divergence values are floats; ``math.inf`` marks an
infinite divergence and never arises from a ``0 * inf`` product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ShapeError
from .state import Distribution, StochasticMatrix, check_same_space

INF = math.inf

_GRID = np.linspace(0.05, 10.0, 21)


def _kl(t):
    return t * np.log(t)


def _rkl(t):
    return -np.log(t)


def _hellinger(t):
    return (np.sqrt(t) - 1.0) ** 2


@dataclass(frozen=True)
class DivergenceGenerator:
    """Convex ``f`` with ``f(1) = 0``, plus its limits at 0 and at infinity.

    ``f`` must accept numpy arrays of positive reals.  ``f_prime_at_inf`` is
    ``lim_{x -> 0+} x f(1/x)``.
    """

    kind: str
    f: Callable[[np.ndarray], np.ndarray]
    f_at_zero: float
    f_prime_at_inf: float
    alpha: float | None = None

    def __post_init__(self):
        one = float(self.f(np.array([1.0]))[0])
        if abs(one) > 1e-12:
            raise ValueError(f"generator must vanish at 1, got f(1) = {one}")
        a, b = np.meshgrid(_GRID, _GRID)
        mid = self.f(0.5 * (a + b))
        chord = 0.5 * self.f(a) + 0.5 * self.f(b)
        if np.any(mid > chord + 1e-12):
            raise ValueError("generator fails the convexity spot check")

    @classmethod
    def kl(cls):
        return cls("KL", _kl, 0.0, INF)

    @classmethod
    def reverse_kl(cls):
        return cls("ReverseKL", _rkl, INF, 0.0)

    @classmethod
    def alpha_div(cls, alpha: float):
        alpha = float(alpha)
        if alpha <= 0 or alpha == 1:
            raise ValueError("alpha must lie in (0, 1) or (1, inf)")
        return cls(
            "Alpha",
            lambda t: (t ** alpha - 1.0) / (alpha - 1.0),
            -1.0 / (alpha - 1.0),
            0.0 if alpha < 1 else INF,
            alpha,
        )

    @classmethod
    def squared_hellinger(cls):
        return cls("SquaredHellinger", _hellinger, 1.0, 1.0)

    @classmethod
    def custom(cls, f, f_at_zero: float, f_prime_at_inf: float):
        return cls("Custom", f, float(f_at_zero), float(f_prime_at_inf))

    @classmethod
    def by_name(cls, name: str, alpha: float | None = None):
        name = name.lower()
        if name == "kl":
            return cls.kl()
        if name in ("rkl", "reverse_kl", "reversekl"):
            return cls.reverse_kl()
        if name == "alpha":
            if alpha is None:
                raise ValueError("the alpha divergence needs --alpha")
            return cls.alpha_div(alpha)
        if name in ("hellinger", "squared_hellinger"):
            return cls.squared_hellinger()
        raise ValueError(f"unknown divergence {name!r}")


def _terms(num: np.ndarray, den: np.ndarray, f: DivergenceGenerator) -> np.ndarray:
    """Entrywise ``den * f(num / den)`` with the boundary conventions."""
    out = np.zeros(np.broadcast(num, den).shape)
    num, den = np.broadcast_arrays(num, den)
    both = (den > 0) & (num > 0)
    out[both] = den[both] * f.f(num[both] / den[both])
    num_zero = (den > 0) & (num == 0)
    if num_zero.any():
        out[num_zero] = den[num_zero] * f.f_at_zero if f.f_at_zero != INF else INF
    den_zero = (den == 0) & (num > 0)
    if den_zero.any():
        out[den_zero] = num[den_zero] * f.f_prime_at_inf if f.f_prime_at_inf != INF else INF
    return out


def _weighted_sum(weights: np.ndarray, values: np.ndarray) -> float:
    live = weights > 0
    v = values[live]
    if np.any(np.isinf(v)):
        return INF
    return float(np.dot(weights[live], v))


def f_div_measures(mu: Distribution, nu: Distribution, f: DivergenceGenerator) -> float:
    if mu.space.total != nu.space.total:
        raise ShapeError("measures live on spaces of different size")
    t = _terms(mu.mass, nu.mass, f)
    if np.any(np.isinf(t)):
        return INF
    return float(t.sum())


def row_divergences(m: StochasticMatrix, l: StochasticMatrix, f: DivergenceGenerator) -> np.ndarray:
    """Per-row ``D_f(M(x, .) || L(x, .))``; may contain ``inf``."""
    t = _terms(m.rows, l.rows, f)
    with np.errstate(invalid="ignore"):
        return t.sum(axis=1)


def f_div_chains(pi: Distribution, m: StochasticMatrix, l: StochasticMatrix,
                 f: DivergenceGenerator) -> float:
    check_same_space(m, l)
    if pi.space.total != m.n:
        raise ShapeError("pi and the matrices live on spaces of different size")
    return _weighted_sum(pi.mass, row_divergences(m, l, f))


def f_div_arrays(pi: np.ndarray, m: np.ndarray, l: np.ndarray, f: DivergenceGenerator) -> float:
    """Same as :func:`f_div_chains` on raw arrays; used by inner loops."""
    t = _terms(m, l, f)
    with np.errstate(invalid="ignore"):
        rows = t.sum(axis=1)
    return _weighted_sum(pi, rows)


_KL = DivergenceGenerator.kl()


def kl_rate(pi: Distribution, m: StochasticMatrix, l: StochasticMatrix) -> float:
    """KL divergence from ``l`` to ``m`` weighted by ``pi``."""
    return f_div_chains(pi, m, l, _KL)


def kl_measures(mu: Distribution, nu: Distribution) -> float:
    return f_div_measures(mu, nu, _KL)
