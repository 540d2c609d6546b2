import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from eulerlimits.grid import (
    Grid, SpaceTimeField, SupportError, check_support, constant_field, cutoff, integrate_space,
    make_battery, make_bump, product_time_weights, prolong, restrict, trapezoid_weights, weak_pairing,
)


def unit_grid(n):
    return Grid((n,), ((0.0, 1.0),))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid((4, 8), ((0, 1), (0, 1)))
    with pytest.raises(ValueError):
        Grid((4,), ((0, 1),), "periodic")
    with pytest.raises(ValueError):
        Grid((4,), ((0, 1),), pad=0.5)


def test_refine_coarsen_and_transfer():
    g = Grid((8, 8), ((0, 1), (0, 1)))
    f = g.refine(4)
    assert f.refinement_factor(g) == 4 and f.coarsen(4) == g
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3,) + g.cells)
    np.testing.assert_array_equal(restrict(prolong(a, g, f), f, g), a)
    fine = rng.normal(size=f.cells)
    # restriction preserves the integral
    assert integrate_space(g, restrict(fine, f, g)) == pytest.approx(integrate_space(f, fine), rel=1e-13)


@pytest.mark.parametrize("n", [3, 10, 100])
def test_midpoint_constant(n):
    g = unit_grid(n)
    assert integrate_space(g, np.ones(g.cells)) == pytest.approx(1.0, rel=1e-15)


def test_midpoint_linear_and_quadratic():
    g = unit_grid(100)
    x = g.axis_centers(0)
    assert integrate_space(g, x) == pytest.approx(0.5, abs=1e-15)
    ref = float(oracles.midpoint_sum(lambda t: t * t, oracles.mp.mpf(0), oracles.mp.mpf(1), 100))
    val = integrate_space(g, x * x)
    assert val == pytest.approx(ref, rel=1e-14)
    assert val == pytest.approx(1 / 3 - 0.01**2 / 12, rel=1e-13)
    assert round(val, 7) == 0.3333250


def test_integrate_space_rejects_nan():
    g = unit_grid(4)
    with pytest.raises(ValueError, match="NaN"):
        integrate_space(g, np.array([0.0, np.nan, 0.0, 0.0]))


def test_product_time_weights_exact():
    times = np.linspace(0.0, 1.0, 7)
    # integral of a linear function against 1 and t
    assert np.sum(product_time_weights(times, np.ones_like)) == pytest.approx(1.0, rel=1e-14)
    assert np.sum(product_time_weights(times, lambda t: t) * times) == pytest.approx(1 / 3, rel=1e-14)
    tf = make_bump((0.5,), 0.1, time_center=0.4, time_radius=0.3)
    assert np.sum(tf.time_weights(times)) == pytest.approx(0.3 * 16 / 15, rel=1e-13)
    assert abs(np.sum(tf.time_weights(times, derivative=True))) < 1e-15
    np.testing.assert_allclose(trapezoid_weights(times), product_time_weights(times, np.ones_like), rtol=1e-13)


def test_space_bump_gradient_matches_finite_differences():
    tf = make_bump((0.1, -0.2), (0.4, 0.3))
    rng = np.random.default_rng(2)
    X = rng.uniform(-0.5, 0.5, size=(2, 50))
    h = 1e-6
    for k in range(2):
        e = np.zeros((2, 1))
        e[k] = h
        fd = (tf.phi(X + e) - tf.phi(X - e)) / (2 * h)
        np.testing.assert_allclose(tf.grad_phi(X)[k], fd, atol=1e-7)


def test_support_errors():
    g = Grid((32,), ((-1.0, 1.0),), pad=0.25)
    with pytest.raises(SupportError, match="not compactly supported"):
        make_bump((0.6,), 0.2, grid=g)
    tf = make_bump((0.0,), 0.2, time_center=0.2, time_radius=0.15)
    with pytest.raises(SupportError):
        check_support(tf, g, 0.0, 0.25)
    f = constant_field(g, np.linspace(0, 0.25, 5), 1.0, (0.0,))
    with pytest.raises(SupportError):
        weak_pairing(f, tf, "scalar_dt", f.rho)


def test_time_constant_field_dt_pairing_vanishes():
    g = Grid((64,), ((-1.0, 1.0),), pad=0.25)
    f = constant_field(g, np.linspace(0, 1, 11), 1.7, (0.3,))
    for tf in make_battery(g, 10, 5, T=1.0):
        assert abs(weak_pairing(f, tf, "scalar_dt", f.rho)) < 1e-14


def test_far_field_flux_pairing_vanishes():
    g = Grid((64, 64), ((-1, 1), (-1, 1)), pad=0.25)
    f = constant_field(g, np.linspace(0, 1, 5), 1.0, (0.4, -0.2))
    for tf in make_battery(g, 8, 3, T=1.0):
        val = weak_pairing(f, tf, "vector_grad", f.m)
        assert abs(val) < 1e-3 * tf.c1_norm()


def test_integration_by_parts_oracle():
    # int x phi'(x) dx = -int phi dx; phi has integral 16/15 r
    g = Grid((512,), ((-1.0, 1.0),), pad=0.25)
    times = np.linspace(0, 1, 3)
    X = g.centers()
    F = np.broadcast_to(X[None], (3, 1) + g.cells)
    f = constant_field(g, times, 1.0, (0.0,))
    tf = make_bump((0.1,), 0.3)
    val = weak_pairing(f, tf, "vector_grad", F)
    assert val == pytest.approx(-16 / 15 * 0.3, rel=1e-4)


def test_vector_contractions_consistent():
    g = Grid((32, 32), ((-1, 1), (-1, 1)), pad=0.25)
    times = np.linspace(0, 1, 4)
    f = constant_field(g, times, 1.0, (0.0, 0.0))
    rng = np.random.default_rng(1)
    c = rng.normal()
    eye = np.broadcast_to(c * np.eye(2).reshape(2, 2, 1, 1), (4, 2, 2) + g.cells)
    scal = np.full((4,) + g.cells, c)
    tf = make_bump((0.1, 0.0), 0.3, kind="vector", direction=(0.6, 0.8), time_center=0.5, time_radius=0.4)
    assert weak_pairing(f, tf, "matrix_grad", eye) == pytest.approx(weak_pairing(f, tf, "scalar_div", scal),
                                                                    rel=1e-12, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_pairing_is_linear(a, b, seed):
    g = Grid((32,), ((-1.0, 1.0),), pad=0.25)
    rng = np.random.default_rng(seed)
    times = np.linspace(0, 1, 6)
    f = constant_field(g, times, 1.0, (0.0,))
    F1, F2 = rng.normal(size=(2, 6) + g.cells)
    tf = make_battery(g, 1, seed, T=1.0)[0]
    lhs = weak_pairing(f, tf, "scalar_dt", a * F1 + b * F2)
    rhs = a * weak_pairing(f, tf, "scalar_dt", F1) + b * weak_pairing(f, tf, "scalar_dt", F2)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(a) + abs(b)))


def test_battery_is_deterministic_and_interior():
    g = Grid((64, 64), ((-1, 1), (-1, 1)), pad=0.25)
    b1 = make_battery(g, 20, 9, kind="vector", T=0.5)
    b2 = make_battery(g, 20, 9, kind="vector", T=0.5)
    assert b1 == b2
    for tf in b1:
        check_support(tf, g, 0.0, 0.5)


def test_cutoff_bounds():
    for n in (1, 2, 4, 8):
        c = cutoff("whole_space", n, {"center": (0.0, 0.0), "length": 1.0})
        X = np.array([[0.5 * n, 2.1 * n], [0.0, 0.0]])
        np.testing.assert_allclose(c(X), [1.0, 0.0])
        assert c.grad_ratio == pytest.approx(1.5, rel=1e-3)
        b = cutoff("boundary_layer", n, {"box": ((0, 1), (0, 1))})
        if n >= 2:  # the centre is at least 1/n from every face
            assert b(np.array([[0.5], [0.5]]))[0] == pytest.approx(1.0)
        assert b(np.array([[0.1 / n], [0.5]]))[0] == 0.0
        assert b.grad_ratio < 5.0
    with pytest.raises(ValueError):
        cutoff("whole_space", 0)


def test_field_validation():
    g = unit_grid(4)
    with pytest.raises(ValueError, match="start at 0"):
        SpaceTimeField(g, [0.5, 1.0], np.ones((2, 4)), np.zeros((2, 1, 4)))
    with pytest.raises(ValueError, match="negative density"):
        SpaceTimeField(g, [0.0], -np.ones((1, 4)), np.zeros((1, 1, 4)))
