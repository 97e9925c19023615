import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smms.quadrature import (
    angular_grid, default_angular_orders, gauss_axis, sphere_point,
    sphere_point_derivative, sphere_point_second_derivative, trapezoid_axis,
)
from smms.spheres import ball_volume_coefficient, sphere_area

RNG = np.random.default_rng(7)


def test_sphere_constants():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(5) == pytest.approx(8 * math.pi**2 / 3)
    assert ball_volume_coefficient(2) == pytest.approx(math.pi)
    assert ball_volume_coefficient(3) == pytest.approx(4 * math.pi / 3)
    with pytest.raises(ValueError):
        sphere_area(0.0)


@given(st.floats(min_value=0.1, max_value=40.0))
@settings(max_examples=60, deadline=None)
def test_area_volume_identity_real_k(k):
    assert sphere_area(k) == pytest.approx(k * ball_volume_coefficient(k), rel=1e-12)


def test_gauss_axis_polynomial_exactness():
    t, w = gauss_axis(6, 0.0, 2.0)
    assert np.all((t > 0) & (t < 2))
    # degree-11 polynomial integrated exactly
    assert np.sum(w * t**11) == pytest.approx(2.0**12 / 12, rel=1e-13)


def test_trapezoid_axis_periodic_exactness():
    t, w = trapezoid_axis(16, 0.0, 2 * math.pi)
    assert np.sum(w * np.cos(3 * t) ** 2) == pytest.approx(math.pi, rel=1e-12)
    assert np.sum(w * np.sin(t)) == pytest.approx(0.0, abs=1e-13)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_angular_grid_total_measure(n):
    angles, w = angular_grid(n)
    assert angles.shape == (w.size, n - 1)
    assert np.sum(w) == pytest.approx(sphere_area(n), rel=1e-12)


@pytest.mark.parametrize("n", [3, 4])
def test_angular_grid_polynomial_moments(n):
    # moments of coordinates over the sphere: int omega_i^2 = |S^{n-1}|/n
    angles, w = angular_grid(n)
    om = sphere_point(angles)
    for i in range(n):
        assert np.sum(w * om[:, i] ** 2) == pytest.approx(sphere_area(n) / n, rel=1e-10)
        assert np.sum(w * om[:, i]) == pytest.approx(0.0, abs=1e-10)


def test_default_orders_shapes():
    assert len(default_angular_orders(2)) == 1
    assert len(default_angular_orders(5)) == 4
    with pytest.raises(ValueError):
        angular_grid(3, orders=(8,))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_sphere_point_unit_norm(n):
    angles = RNG.uniform(0.2, 2.8, (20, n - 1))
    om = sphere_point(angles)
    np.testing.assert_allclose(np.linalg.norm(om, axis=-1), 1.0, rtol=1e-13)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_sphere_point_derivatives_match_fd(n):
    angles = RNG.uniform(0.3, 2.7, (6, n - 1))
    d = sphere_point_derivative(angles)
    d2 = sphere_point_second_derivative(angles)
    h = 1e-5
    for a in range(n - 1):
        e = np.zeros(n - 1)
        e[a] = h
        fd = (sphere_point(angles + e) - sphere_point(angles - e)) / (2 * h)
        np.testing.assert_allclose(d[:, a], fd, atol=1e-9)
        fd2 = (sphere_point_derivative(angles + e)
               - sphere_point_derivative(angles - e)) / (2 * h)
        np.testing.assert_allclose(d2[:, a], fd2, atol=1e-8)
