import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _oracles import loop_f_div, loop_kl, rng_for
from mcgeo.divergences import (
    DivergenceGenerator,
    f_div_chains,
    f_div_measures,
    kl_measures,
    kl_rate,
    row_divergences,
)
from mcgeo.random_chains import random_distribution, random_stochastic
from mcgeo.state import Distribution, ProductStateSpace, StochasticMatrix

SPACE = ProductStateSpace((2, 2))


def test_binary_entropy_value():
    # KL(Bern(0.1) || Bern(0.5)) = ln 2 - H(0.1)
    mu = Distribution(ProductStateSpace((2,)), [0.1, 0.9])
    u = Distribution.uniform(mu.space)
    h = -(0.1 * math.log(0.1) + 0.9 * math.log(0.9))
    assert h == pytest.approx(0.325083, abs=1e-6)
    assert kl_measures(mu, u) == pytest.approx(math.log(2) - h, abs=1e-15)


@given(st.integers(0, 10_000), st.sampled_from(["kl", "rkl", "alpha0.5", "alpha2", "hellinger"]))
def test_chain_divergence_matches_loops(seed, name):
    rng = rng_for(seed)
    m = random_stochastic(SPACE, rng)
    l = random_stochastic(SPACE, rng)
    pi = random_distribution(SPACE, rng)
    if name.startswith("alpha"):
        a = float(name[5:])
        gen = DivergenceGenerator.alpha_div(a)

        def f(t):
            return (t ** a - 1) / (a - 1)
    else:
        gen = DivergenceGenerator.by_name(name)
        f = {"kl": lambda t: t * math.log(t), "rkl": lambda t: -math.log(t),
             "hellinger": lambda t: (math.sqrt(t) - 1) ** 2}[name]
    want = loop_f_div(pi.mass, m.rows, l.rows, f, gen.f_at_zero, gen.f_prime_at_inf)
    assert f_div_chains(pi, m, l, gen) == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_infinity_conventions():
    space = ProductStateSpace((2,))
    m = StochasticMatrix(space, [[1.0, 0.0], [0.5, 0.5]])
    l = StochasticMatrix(space, [[0.5, 0.5], [1.0, 0.0]])
    pi = Distribution.uniform(space)
    assert kl_rate(pi, m, l) == math.inf
    assert loop_kl(pi.mass, m.rows, l.rows) == math.inf
    # the offending row carries no weight
    pi0 = Distribution(space, [1.0, 0.0])
    assert kl_rate(pi0, m, l) == pytest.approx(math.log(2), abs=1e-15)
    # reverse KL is infinite where M vanishes and L does not
    rkl = DivergenceGenerator.reverse_kl()
    assert f_div_chains(pi0, m, l, rkl) == math.inf
    # alpha < 1 stays finite in both directions
    a = DivergenceGenerator.alpha_div(0.5)
    assert math.isfinite(f_div_chains(pi, m, l, a))


def test_zero_on_equal_and_nonnegative():
    rng = rng_for(3)
    m = random_stochastic(SPACE, rng)
    pi = random_distribution(SPACE, rng)
    for gen in (DivergenceGenerator.kl(), DivergenceGenerator.reverse_kl(),
                DivergenceGenerator.squared_hellinger(), DivergenceGenerator.alpha_div(3.0)):
        assert f_div_chains(pi, m, m, gen) == pytest.approx(0.0, abs=1e-15)
        assert np.all(row_divergences(m, random_stochastic(SPACE, rng), gen) >= -1e-15)


def test_measure_divergence():
    mu = Distribution(SPACE, [0.1, 0.2, 0.3, 0.4])
    nu = Distribution.uniform(SPACE)
    want = sum(p * math.log(p / 0.25) for p in mu.mass)
    assert f_div_measures(mu, nu, DivergenceGenerator.kl()) == pytest.approx(want, abs=1e-15)


def test_generator_validation():
    with pytest.raises(ValueError):
        DivergenceGenerator.alpha_div(1.0)
    with pytest.raises(ValueError):
        DivergenceGenerator.custom(lambda t: t, 0.0, 1.0)
    with pytest.raises(ValueError, match="convexity"):
        DivergenceGenerator.custom(lambda t: -(t - 1) ** 2, -1.0, -math.inf)
    with pytest.raises(ValueError):
        DivergenceGenerator.by_name("alpha")
    with pytest.raises(ValueError):
        DivergenceGenerator.by_name("tv2")
    tv = DivergenceGenerator.custom(lambda t: 0.5 * np.abs(t - 1), 0.5, 0.5)
    space = ProductStateSpace((2,))
    m = StochasticMatrix(space, [[1.0, 0.0], [0.0, 1.0]])
    l = StochasticMatrix(space, [[0.0, 1.0], [1.0, 0.0]])
    assert f_div_chains(Distribution.uniform(space), m, l, tv) == pytest.approx(1.0)
