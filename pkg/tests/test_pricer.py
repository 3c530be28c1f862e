import math

import mpmath
import numpy as np
import pytest

from deltavisc.model import MarketParams
from deltavisc.pricer import (
    linear_call_oracle,
    linear_delta_oracle,
    price_residual,
    reconstruct_price,
)
from deltavisc.spatial import uniform_grid
from deltavisc.stepper import Trajectory


def mp_delta(S, t, m):
    d1 = (mpmath.log(S / m.K) + (m.r - m.q + m.sigma**2 / 2) * t) / (m.sigma * mpmath.sqrt(t))
    return float(mpmath.exp(-m.q * t) * (1 + mpmath.erf(d1 / mpmath.sqrt(2))) / 2)


def test_step_reconstruction():
    x = np.linspace(0, 4, 41)
    h = x[1]
    u = np.where(x < 1, 0.0, np.where(x > 1, 1.0, 0.5))
    V = reconstruct_price(u, x).V
    exact = np.maximum(x - 1, 0)
    k = np.argmin(np.abs(x - 1))
    # trapezoid with the midpoint value at the strike overshoots by h/4 there only
    assert V[k] == pytest.approx(h / 4)
    mask = np.arange(x.size) != k
    assert np.allclose(V[mask], exact[mask], atol=1e-14)


def test_trivial_fields():
    x = np.linspace(0, 4, 11)
    assert np.all(reconstruct_price(np.zeros(11), x).V == 0)
    assert np.allclose(reconstruct_price(np.ones(11), x).V, x)


@pytest.mark.parametrize("q", [0.0, 0.03])
@pytest.mark.parametrize("S,t", [(1.0, 0.5), (0.8, 0.5), (1.0, 0.1), (1.3, 0.25), (2.5, 1.0)])
def test_delta_oracle_against_erf(S, t, q):
    m = MarketParams(a=0.0, q=q)
    assert linear_delta_oracle(S, t, m) == pytest.approx(mp_delta(S, t, m), abs=1e-10)


def test_delta_oracle_limits(linear_market):
    assert linear_delta_oracle(0.0, 0.5, linear_market) == 0.0
    assert linear_delta_oracle(1e3, 0.5, linear_market) == pytest.approx(1.0)
    assert list(linear_delta_oracle(np.array([0.5, 1.0, 2.0]), 0.0, linear_market)) == [0.0, 0.5, 1.0]


def test_call_oracle_delta_consistency(linear_market):
    S = np.linspace(0.5, 2.0, 31)
    h = 1e-5
    fd = (linear_call_oracle(S + h, 0.4, linear_market) - linear_call_oracle(S - h, 0.4, linear_market)) / (2 * h)
    assert np.allclose(fd, linear_delta_oracle(S, 0.4, linear_market), atol=1e-8)


def test_zero_field_residual():
    g = uniform_grid(41, 4.0)
    tr = Trajectory(g, np.linspace(0, 0.5, 6), np.zeros((6, 41)), 0.1)
    rep = price_residual(tr, MarketParams())
    assert rep.max == 0.0 and rep.scale == 0.0


def test_analytic_delta_has_small_residual(linear_market):
    g = uniform_grid(801, 4.0)
    t = np.linspace(0, 0.5, 501)
    vals = np.array([linear_delta_oracle(g.x, ti, linear_market) for ti in t])
    vals[:, -1] = 1.0
    tr = Trajectory(g, t, vals, t[1])
    coarse = price_residual(tr, linear_market)
    assert coarse.max <= 1e-2
    tr2 = Trajectory(g, t[::2], vals[::2], 2 * t[1])
    assert price_residual(tr2, linear_market).max > coarse.max
    assert coarse.times.min() >= 0.05 and coarse.S.size == 801 - 10


def test_residual_needs_three_snapshots():
    g = uniform_grid(11, 4.0)
    with pytest.raises(ValueError):
        price_residual(Trajectory(g, np.array([0.0, 0.1]), np.zeros((2, 11)), 0.1), MarketParams())


def test_round_trip_far_field(small_config):
    from deltavisc.solver import solve

    tr = solve(small_config)
    m = small_config.market
    for t, u in zip(tr.times, tr.values):
        pc = reconstruct_price(u, tr.grid.x, small_config.T - t)
        assert pc.V[0] == 0.0
        assert pc.V[-1] / (small_config.b - m.K * math.exp(-m.r * t)) == pytest.approx(1.0, abs=1e-2)
