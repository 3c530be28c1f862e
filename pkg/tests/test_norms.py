import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltavisc.config import RunConfig
from deltavisc.norms import (
    NORM_NAMES,
    UnderResolvedError,
    cauchy_deltas,
    discrete_norms,
    epsilon_sweep,
    fit_exponent,
    shift_to_v,
)
from deltavisc.pricer import second_difference
from deltavisc.solver import solve
from deltavisc.spatial import uniform_grid
from deltavisc.stepper import Trajectory, initial_profile


def frozen_trajectory(x, u, times):
    return Trajectory(uniform_grid(x.size, x[-1]), np.asarray(times), np.tile(u, (len(times), 1)), times[1] - times[0])


def test_zero_v_has_zero_norms():
    x = np.linspace(0, 4, 101)
    tr = frozen_trajectory(x, x / 4, np.linspace(0, 1, 11))
    rep = discrete_norms(tr, 4.0)
    for name in NORM_NAMES:
        if name != "w_Linf_Linf":
            assert getattr(rep, name) == pytest.approx(0.0, abs=1e-12), name
    assert rep.w_Linf_Linf == pytest.approx(0.25)


@pytest.mark.parametrize("n", [201, 401])
def test_sine_mode_norms(n):
    x = np.linspace(0, 1, n)
    h = x[1]
    tr = frozen_trajectory(x, np.sin(np.pi * x) + x, np.linspace(0, 1, 21))
    rep = discrete_norms(tr, 1.0)
    tol = 10 * h**2
    assert rep.v_Linf_L2 == pytest.approx(math.sqrt(0.5), rel=tol)
    assert rep.v_Linf_Linf == pytest.approx(1.0, rel=tol)
    assert rep.vx_L2_L2 == pytest.approx(math.pi * math.sqrt(0.5), rel=tol)
    assert rep.vx_Linf_L2 == pytest.approx(math.pi * math.sqrt(0.5), rel=tol)
    assert rep.vxx_L2_L2 == pytest.approx(math.pi**2 * math.sqrt(0.5), rel=tol)
    assert rep.vt_L2_L2 == 0.0
    assert rep.w_Linf_Linf == pytest.approx(math.pi + 1, rel=tol)


def test_time_derivative_of_linear_growth():
    # v = t * sin(pi x): v_t = sin(pi x) exactly under differencing
    x = np.linspace(0, 1, 201)
    t = np.linspace(0, 1, 11)
    values = np.array([ti * np.sin(np.pi * x) + x for ti in t])
    tr = Trajectory(uniform_grid(201, 1.0), t, values, 0.1)
    assert discrete_norms(tr, 1.0).vt_L2_L2 == pytest.approx(math.sqrt(0.5), rel=1e-4)


def test_shift_vanishes_at_boundary():
    x = np.linspace(0, 4, 41)
    u = initial_profile(uniform_grid(41, 4.0), 1.0, 0.1)
    v = shift_to_v(u, x)
    assert v[0] == 0.0 and v[-1] == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_fit_exponent_recovers_power(p, c):
    eps = np.array([0.2, 0.1, 0.05, 0.025])
    assert fit_exponent(eps, c * eps ** (-p)) == pytest.approx(p, abs=1e-9)


def test_fit_exponent_rejects_nonpositive():
    assert math.isnan(fit_exponent([0.1, 0.05], [1.0, 0.0]))


def test_second_difference_exact_on_quadratic():
    x = np.sort(np.concatenate([[0.0, 2.0], np.random.default_rng(0).uniform(0, 2, 30)]))
    assert np.allclose(second_difference(3 * x**2 - x, x), 6.0)


def test_initial_curvature_growth_is_bounded():
    # the smoothed step has |v0''|_L2 ~ eps^-1.5, well inside the eps^-2 budget
    eps = np.array([0.1, 0.05, 0.025, 0.0125])
    vals = []
    for e in eps:
        g = uniform_grid(3201, 4.0)
        v = shift_to_v(initial_profile(g, 1.0, e), g.x)
        vals.append(math.sqrt(np.trapezoid(second_difference(v, g.x) ** 2, g.x)))
    p = fit_exponent(eps, vals)
    assert p <= 2.1
    assert p == pytest.approx(1.5, abs=0.1)


def test_under_resolved_sweep_raises():
    cfg = RunConfig(nx=41, nt=5, eps_list=(0.2, 0.1, 0.01))
    with pytest.raises(UnderResolvedError):
        epsilon_sweep(cfg)


@pytest.mark.parametrize("eps_list", [(0.2, 0.1), (0.1, 0.2, 0.05), (0.2, 0.2, 0.1)])
def test_eps_list_validation(eps_list):
    with pytest.raises(ValueError):
        epsilon_sweep(RunConfig(nx=401, nt=5), eps_list=eps_list)


def test_norms_stable_under_restriction():
    cfg = RunConfig(nx=801, nt=100, eps=0.1, dt_out=0.0)
    tr = solve(cfg)
    coarse = Trajectory(uniform_grid(401, cfg.b), tr.times, tr.values[:, ::2], tr.dt)
    full = discrete_norms(tr, cfg.b).as_dict()
    half = discrete_norms(coarse, cfg.b).as_dict()
    for name in NORM_NAMES:
        assert half[name] == pytest.approx(full[name], rel=0.05), name


def test_small_sweep(small_config):
    cfg = small_config.replace(nx=321, eps_list=(0.2, 0.1, 0.05))
    res = epsilon_sweep(cfg, threads=2)
    assert len(res.reports) == 3 and res.fit_points == 3
    assert res.cauchy.shape == (2,)
    assert set(res.exponents) == set(NORM_NAMES)
    serial = epsilon_sweep(cfg, threads=1)
    assert serial.exponents == res.exponents


def test_cauchy_interpolates_across_grids(small_config):
    a = solve(small_config)
    b = solve(small_config.replace(nx=2 * small_config.nx - 1))
    d = cauchy_deltas([a, b])
    assert 0 <= d[0] < 0.05
    with pytest.raises(ValueError):
        cauchy_deltas([a, solve(small_config.replace(nt=10))])
