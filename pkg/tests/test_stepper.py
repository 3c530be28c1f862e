import math

import numpy as np
import pytest

from deltavisc import stepper
from deltavisc.model import MarketParams
from deltavisc.pricer import linear_delta_oracle
from deltavisc.spatial import semidiscrete_rhs, uniform_grid
from deltavisc.stepper import (
    StepFailure,
    initial_profile,
    march,
    monotonicity_report,
    step_implicit,
)


@pytest.fixture
def grid():
    return uniform_grid(201, 4.0)


def test_linear_step_needs_one_newton_iteration(grid, linear_market):
    u0 = initial_profile(grid, 1.0, 0.05)
    _, info = step_implicit(u0, 0.0, 0.01, grid, linear_market, 1e-3)
    assert info.newton_iters == 1 and info.picard_iters == 0


def test_step_satisfies_residual_contract(grid, market):
    u0 = initial_profile(grid, 1.0, 0.05)
    dt, tol = 0.01, 1e-10
    u, info = step_implicit(u0, 0.0, dt, grid, market, 1e-3, tol=tol)
    G = u - u0 - dt * semidiscrete_rhs(u, dt, grid, market, 1e-3)
    assert np.max(np.abs(G)) <= tol
    assert info.residual <= tol
    assert u[0] == 0.0 and u[-1] == 1.0


def test_tiny_step_barely_moves(grid, market):
    u0 = initial_profile(grid, 1.0, 0.05)
    u, _ = step_implicit(u0, 0.0, 1e-8, grid, market, 1e-3)
    assert np.max(np.abs(u - u0)) <= 1e-4


def test_zero_horizon_returns_initial_profile(grid, market):
    u0 = initial_profile(grid, 1.0, 0.05)
    tr = march(u0, grid, market, 1e-3, 0.0, 10)
    assert tr.times.tolist() == [0.0]
    assert np.array_equal(tr.values[0], u0)
    assert tr.steps == []


def test_range_and_monotone(grid, market):
    tr = march(initial_profile(grid, 1.0, 0.02), grid, market, 1e-3, 0.5, 50)
    assert tr.values.min() >= -1e-8 and tr.values.max() <= 1 + 1e-8
    assert monotonicity_report(tr).clean
    assert all(s.pinned() for s in tr.snapshots)


def test_output_stride(grid, market):
    tr = march(initial_profile(grid, 1.0, 0.05), grid, market, 1e-3, 0.5, 50, dt_out=0.1)
    assert np.allclose(tr.times, [0, 0.1, 0.2, 0.3, 0.4, 0.5])
    assert len(tr.steps) == 50
    assert np.allclose(tr.thinned(0.25).times, [0.0, 0.2, 0.4, 0.5])


def test_monotonicity_detector_flags_dip(grid, market):
    tr = march(initial_profile(grid, 1.0, 0.05), grid, market, 1e-3, 0.1, 5)
    tr.values[3, 120] = tr.values[3, 119] - 1e-3
    rep = monotonicity_report(tr)
    assert rep.flagged.tolist() == [3]
    assert rep.location[3] == pytest.approx(grid.x[119])


def test_comparison_principle(grid, market):
    lo = initial_profile(grid, 1.0, 0.05)
    hi = initial_profile(grid, 0.95, 0.05)
    assert np.all(lo <= hi)
    a = march(lo, grid, market, 1e-3, 0.5, 50)
    b = march(hi, grid, market, 1e-3, 0.5, 50)
    assert np.max(a.values - b.values) <= 1e-8


def test_time_refinement_order(linear_market):
    # self-convergence in time on a fixed grid
    g = uniform_grid(201, 4.0)
    u0 = initial_profile(g, 1.0, 0.1)
    finals = [march(u0, g, linear_market, 1e-3, 0.5, nt).values[-1] for nt in (25, 50, 100)]
    d1 = np.max(np.abs(finals[0] - finals[1]))
    d2 = np.max(np.abs(finals[1] - finals[2]))
    assert math.log2(d1 / d2) >= 0.9


def test_linear_run_tracks_oracle(linear_market):
    g = uniform_grid(401, 4.0)
    tr = march(initial_profile(g, 1.0, 1e-3), g, linear_market, 1e-6, 0.5, 200)
    err = np.abs(tr.values[-1] - linear_delta_oracle(g.x, 0.5, linear_market))[5:-5]
    assert err.max() <= 5e-3


def test_failed_step_is_halved(grid, market, monkeypatch):
    real = stepper.step_implicit

    def picky(u, t, dt, *args, **kwargs):
        if dt > 0.02:
            raise StepFailure("too big")
        return real(u, t, dt, *args, **kwargs)

    monkeypatch.setattr(stepper, "step_implicit", picky)
    tr = march(initial_profile(grid, 1.0, 0.05), grid, market, 1e-3, 0.1, 2)
    assert tr.times.tolist() == [0.0, 0.05, 0.1]
    assert len(tr.steps) == 8
    assert all(s.halvings == 2 for s in tr.steps)
    assert sum(s.dt for s in tr.steps) == pytest.approx(0.1)


def test_persistent_failure_raises(grid, market, monkeypatch):
    def never(*args, **kwargs):
        raise StepFailure("no")

    monkeypatch.setattr(stepper, "step_implicit", never)
    with pytest.raises(StepFailure):
        march(initial_profile(grid, 1.0, 0.05), grid, market, 1e-3, 0.1, 1)


def test_picard_fallback_recovers(grid, market, monkeypatch):
    # a sign-flipped Jacobian makes every Newton direction an ascent direction
    real = stepper.jacobian
    monkeypatch.setattr(stepper, "jacobian", lambda *a, **k: -real(*a, **k))
    u0 = initial_profile(grid, 1.0, 0.05)
    u, info = step_implicit(u0, 0.0, 0.01, grid, market, 1e-3, tol=1e-10, max_iter=30)
    assert info.picard_iters >= 1
    assert info.residual <= 1e-10


def test_nonpositive_dt_rejected(grid, market):
    with pytest.raises(ValueError):
        step_implicit(np.zeros(grid.n), 0.0, 0.0, grid, market, 1e-3)
