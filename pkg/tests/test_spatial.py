import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltavisc.model import MarketParams
from deltavisc.spatial import (
    Grid,
    SolutionField,
    banded_to_dense,
    face_fluxes,
    graded_grid,
    jacobian,
    make_grid,
    semidiscrete_rhs,
    uniform_grid,
)


def test_constant_field_only_sees_discount():
    m = MarketParams(q=0.05)
    g = uniform_grid(41, 4.0)
    rate = semidiscrete_rhs(np.full(41, 0.7), 0.1, g, m, 1e-3)
    assert np.allclose(rate[1:-1], -0.05 * 0.7, atol=1e-14)
    assert rate[0] == rate[-1] == 0.0


def test_linear_field_exact_on_uniform_grid(linear_market):
    b = 4.0
    g = uniform_grid(81, b)
    rate = semidiscrete_rhs(g.x / b, 0.2, g, linear_market, 1e-3)
    x = g.x[1:-1]
    expected = (linear_market.sigma**2 * x + linear_market.r * x) / b
    assert np.allclose(rate[1:-1], expected, rtol=0, atol=1e-12)


@pytest.mark.parametrize("mode", ["uniform", "graded"])
@pytest.mark.parametrize("q", [0.0, 0.2])
def test_jacobian_matches_differences(mode, q, rng):
    # q = 0.2 > r flips the advection direction
    m = MarketParams(a=0.2, q=q)
    g = make_grid(61, 4.0, mode, 1.0, 0.1)
    u = np.clip(g.x / 4 + 0.05 * np.sin(3 * g.x), 0, 1)
    u[0], u[-1] = 0.0, 1.0
    J = banded_to_dense(jacobian(u, 0.3, g, m, 1e-3))
    h = 1e-7
    fd = np.empty_like(J)
    for j in range(g.n):
        e = np.zeros(g.n)
        e[j] = h
        fd[:, j] = (semidiscrete_rhs(u + e, 0.3, g, m, 1e-3) - semidiscrete_rhs(u - e, 0.3, g, m, 1e-3)) / (2 * h)
    scale = np.max(np.abs(J))
    assert np.max(np.abs(J - fd)) <= 1e-6 * scale


def test_linear_jacobian_is_field_independent(linear_market, rng):
    g = uniform_grid(31, 4.0)
    J1 = jacobian(rng.uniform(size=31), 0.1, g, linear_market, 1e-3)
    J2 = jacobian(rng.uniform(size=31), 0.1, g, linear_market, 1e-3)
    assert np.array_equal(J1, J2)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=21, max_size=21))
def test_conservation_telescopes(values):
    # without advection or discounting, volume-weighted rates sum to boundary fluxes
    m = MarketParams(q=0.0, a=0.05)
    g = graded_grid(21, 4.0, 1.0, 0.2)
    u = np.array(values)
    rate = semidiscrete_rhs(u, 0.2, g, m, 1e-3, advection=False)
    _, flux = face_fluxes(u, 0.2, g, m, 1e-3)
    total = np.sum(rate[1:-1] * g.volumes)
    assert total == pytest.approx(flux[-1] - flux[0], rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("eps", [0.05, 0.01, 1e-3])
def test_graded_grid_clusters(eps):
    g = graded_grid(801, 4.0, 1.0, eps)
    assert g.x[0] == 0.0 and g.x[-1] == 4.0
    assert np.all(np.diff(g.x) > 0)
    assert g.count_in(1.0 - 2 * eps, 1.0 + 2 * eps) >= 0.2 * g.n


def test_uniform_grid_properties():
    g = uniform_grid(5, 4.0)
    assert g.n == 5 and g.b == 4.0
    assert np.allclose(g.faces, [0.5, 1.5, 2.5, 3.5])
    assert np.allclose(g.volumes, 1.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        Grid(np.array([0.0, 2.0, 1.0]))
    with pytest.raises(ValueError):
        Grid(np.array([0.1, 1.0, 2.0]))
    with pytest.raises(ValueError):
        make_grid(11, 4.0, "chebyshev")


def test_solution_field_pinned():
    assert SolutionField(np.array([0.0, 0.3, 1.0]), 0.0).pinned()
    assert not SolutionField(np.array([0.1, 0.3, 1.0]), 0.0).pinned()
