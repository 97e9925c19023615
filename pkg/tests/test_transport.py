"""Oracle checks for the radial transport engine.

Closed-form references: Euclidean cone expansion from a unit sphere,
round-sphere and hyperbolic geodesic spheres, and the exact weighted
ball volume of the standard Gaussian density in the plane.
"""

import dataclasses
import math

import numpy as np
import pytest

from smms.fields import Box, DensityField, MetricField, Smms, INFINITE
from smms.quadrature import angular_grid
from smms.spheres import ball_volume_coefficient
from smms.transport import (
    FROZEN_TARGET, TransportOptions, integrate_geodesic, point_transport,
    radial_transport, transport_rays,
)


def euclidean(n):
    return Smms(MetricField.flat(n), DensityField.zero(n), INFINITE,
                name=f"euclidean-{n}")


def sphere3():
    metric = MetricField.polar_warped(3, np.sin, np.cos,
                                      lambda r: -np.sin(r), r_max=math.pi)
    return Smms(metric, DensityField.zero(3), INFINITE, chart="radial")


def hyperbolic3():
    metric = MetricField.polar_warped(3, np.sinh, np.cosh, np.sinh, r_max=40.0)
    return Smms(metric, DensityField.zero(3), INFINITE, chart="radial")


def unit_sphere_start(n):
    x = np.zeros(n)
    x[0] = 1.0
    nu = x.copy()
    return x, nu


class TestEuclideanCone:
    """From the unit sphere outward: m = (n-1)/(1+t), A = (1+t)^{n-1}."""

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_mean_curvature_and_area(self, n):
        x, nu = unit_sphere_start(n)
        ray = radial_transport(euclidean(n), (x, nu, np.eye(n - 1)), r_max=10.0)
        assert ray.focal_r is None and ray.exit_r is None
        assert len(ray.r_grid) == 513 and ray.r_grid[0] == 0.0
        t = ray.r_grid
        np.testing.assert_allclose(ray.m, (n - 1) / (1 + t), rtol=1e-7)
        np.testing.assert_allclose(ray.A, (1 + t) ** (n - 1), rtol=1e-7)
        np.testing.assert_allclose(ray.m_f, ray.m, rtol=0, atol=0)

    def test_volume_matches_shell_integral(self):
        # V(t) = int_0^t (1+s)^2 ds for a unit solid-angle tube in R^3
        x, nu = unit_sphere_start(3)
        ray = radial_transport(euclidean(3), (x, nu, np.eye(2)), r_max=4.0)
        exact = ((1 + ray.r_grid) ** 3 - 1.0) / 3.0
        np.testing.assert_allclose(ray.V, exact, rtol=1e-7, atol=1e-15)

    def test_inward_collapse_focal_radius(self):
        x, nu = unit_sphere_start(3)
        ray = radial_transport(euclidean(3), (x, -nu, -np.eye(2)), r_max=2.0)
        assert ray.focal_r == pytest.approx(1.0, abs=1e-5)
        assert ray.r_grid.max() < 1.0
        before = ray.r_grid < 0.9
        np.testing.assert_allclose(ray.A[before],
                                   (1 - ray.r_grid[before]) ** 2, rtol=1e-6)

    def test_initial_conditions_exact(self):
        # m_f(0) = tr S0 - df/dr and theta(0) = e^{-f(x)}, by construction
        n = 3
        phi = lambda r: 0.25 * r ** 2
        dens = DensityField.radial_cartesian(n, phi, lambda r: 0.5 * r,
                                             lambda r: np.full_like(r, 0.5))
        space = Smms(MetricField.flat(n), dens, INFINITE)
        x, nu = unit_sphere_start(n)
        ray = radial_transport(space, (x, nu, np.eye(n - 1)),
                               t_grid=np.array([1e-3, 1e-2, 0.5]))
        assert ray.H_f0 == pytest.approx(2.0 - 0.5, abs=1e-12)
        assert ray.m_f[0] == ray.H_f0
        assert ray.A[0] == 1.0
        assert ray.theta[0] == pytest.approx(math.exp(-0.25), abs=1e-14)
        # H_f0 matches m_f(0+), so theta stays flat to O(t^2)
        assert ray.theta[1] == pytest.approx(math.exp(-0.25), abs=1e-5)

    def test_shape_matrices_reported(self):
        x, nu = unit_sphere_start(3)
        ray = radial_transport(euclidean(3), (x, nu, np.eye(2)), r_max=2.0)
        expect = np.eye(2) / (1.0 + ray.r_grid)[:, None, None]
        np.testing.assert_allclose(ray.shape, expect, rtol=1e-7)


class TestRoundSphere:
    def test_mean_curvature_cotangent_law(self):
        r0 = 0.6
        x = np.array([r0, 1.1, 2.0])
        nu = np.array([1.0, 0.0, 0.0])
        S0 = (math.cos(r0) / math.sin(r0)) * np.eye(2)
        ray = radial_transport(sphere3(), (x, nu, S0), r_max=2.0)
        assert ray.focal_r is None
        t = ray.r_grid
        np.testing.assert_allclose(ray.m, 2.0 / np.tan(r0 + t),
                                   rtol=1e-7, atol=1e-9)
        np.testing.assert_allclose(ray.A,
                                   (np.sin(r0 + t) / math.sin(r0)) ** 2,
                                   rtol=1e-7)

    @pytest.mark.parametrize("r0", [0.5, 1.0, 2.0])
    def test_focal_radius(self, r0):
        x = np.array([r0, 1.3, 0.7])
        nu = np.array([1.0, 0.0, 0.0])
        S0 = (math.cos(r0) / math.sin(r0)) * np.eye(2)
        ray = radial_transport(sphere3(), (x, nu, S0), r_max=3.4)
        assert ray.focal_r is not None
        assert ray.focal_r == pytest.approx(math.pi - r0, abs=1e-4)
        assert ray.r_grid.max() < math.pi - r0


class TestHyperbolic:
    def test_mean_curvature_no_focal(self):
        r0 = 0.7
        x = np.array([r0, 1.3, 0.7])
        nu = np.array([1.0, 0.0, 0.0])
        S0 = (math.cosh(r0) / math.sinh(r0)) * np.eye(2)
        ray = radial_transport(hyperbolic3(), (x, nu, S0), r_max=5.0)
        assert ray.focal_r is None
        np.testing.assert_allclose(ray.m, 2.0 / np.tanh(r0 + ray.r_grid),
                                   rtol=1e-7)

    def test_log_weighted_area_derivative_is_mf(self):
        # 4th-order difference of log A_f against m_f on a uniform grid
        r0 = 0.7
        x = np.array([r0, 1.3, 0.7])
        nu = np.array([1.0, 0.0, 0.0])
        dens = DensityField.radial_chart(
            3, lambda r: 0.3 * r ** 2, lambda r: 0.6 * r,
            lambda r: np.full_like(r, 0.6))
        space = Smms(hyperbolic3().metric, dens, 2.0, chart="radial")
        h = 1e-3
        grid = np.arange(1, 502) * h
        S0 = (math.cosh(r0) / math.sinh(r0)) * np.eye(2)
        ray = radial_transport(space, (x, nu, S0), t_grid=grid)
        assert ray.r_grid[0] == 0.0  # prepended start keeps spacing uniform
        logAf = np.log(ray.A_f)
        cd = (-logAf[4:] + 8 * logAf[3:-1] - 8 * logAf[1:-3]
              + logAf[:-4]) / (12 * h)
        np.testing.assert_allclose(cd, ray.m_f[2:-2], atol=1e-7)
        # closed form: m_f = 2 coth(r0+t) - 0.6 (r0+t)
        np.testing.assert_allclose(ray.m_f, 2.0 / np.tanh(r0 + ray.r_grid)
                                   - 0.6 * (r0 + ray.r_grid), rtol=1e-7)


class TestPointTransport:
    def test_euclidean_ball_volume(self):
        for n in (2, 3):
            space = euclidean(n)
            grid = np.array([0.5, 1.0, 2.0])
            batch = point_transport(space, None, grid)
            assert batch.valid.all()
            vol = batch.weights @ batch.V
            np.testing.assert_allclose(
                vol, ball_volume_coefficient(n) * grid ** n, rtol=1e-6)
            expect = np.broadcast_to(grid ** (n - 1), batch.A.shape)
            np.testing.assert_allclose(batch.A, expect, rtol=1e-6)

    def test_seed_scale_insensitivity(self):
        # halving the seed radius moves nothing above integrator noise
        space = euclidean(3)
        grid = np.array([1.0, 4.0])
        a = point_transport(space, None, grid, eps=1e-4)
        b = point_transport(space, None, grid, eps=5e-5)
        np.testing.assert_allclose(a.V, b.V, rtol=5e-9)
        np.testing.assert_allclose(a.logA, b.logA, atol=5e-9)

    def test_gaussian_plane_weighted_volume(self):
        dens = DensityField.radial_cartesian(
            2, lambda r: r ** 2 / 2.0, lambda r: r, lambda r: np.ones_like(r))
        space = Smms(MetricField.flat(2), dens, INFINITE)
        grid = np.array([1.0, 2.0, 8.0])
        batch = point_transport(space, None, grid)
        vol = batch.weights @ batch.V
        exact = 2 * math.pi * (1 - np.exp(-grid ** 2 / 2))
        np.testing.assert_allclose(vol, exact, rtol=1e-7)

    def test_polar_chart_center_seeding(self):
        # hyperbolic 3-ball: vol(B(r)) = 4 pi int_0^r sinh^2 = pi (sinh 2r - 2r)
        # the integrand is rotation invariant, so the colatitude order only
        # needs to capture the sin measure itself
        space = hyperbolic3()
        grid = np.array([0.5, 1.0])
        batch = point_transport(space, None, grid, orders=(12, 8))
        vol = batch.weights @ batch.V
        exact = np.pi * (np.sinh(2 * grid) - 2 * grid)
        np.testing.assert_allclose(vol, exact, rtol=1e-6)

    def test_per_ray_stopping(self):
        space = euclidean(2)
        grid = np.array([0.5, 3.0])

        def stops(angles):
            return 1.0 + 0.2 * np.cos(angles[:, 0])

        batch = point_transport(space, None, grid, t_stop_fn=stops)
        assert set(batch.codes.tolist()) == {FROZEN_TARGET}
        # each ray's volume integrand stops at its own radius
        angles, _ = angular_grid(2, None)
        r_b = 1.0 + 0.2 * np.cos(angles[:, 0])
        np.testing.assert_allclose(batch.V[:, -1], r_b ** 2 / 2, rtol=1e-8)
        # int (1 + a cos s)^2 / 2 ds = pi (1 + a^2/2)
        area = batch.weights @ batch.V[:, -1]
        np.testing.assert_allclose(area, math.pi * 1.02, rtol=1e-7)

    def test_point_transport_rejects_off_center_radial(self):
        with pytest.raises(ValueError, match="chart center"):
            point_transport(sphere3(), np.array([0.5, 1.0, 1.0]),
                            np.array([1.0]))


class TestFrameAndBatch:
    def test_requires_unit_normal(self):
        space = euclidean(3)
        with pytest.raises(ValueError, match="unit"):
            radial_transport(space,
                             (np.zeros(3), np.array([0.0, 0.0, 2.0]),
                              np.eye(2)), r_max=1.0)

    def test_requires_symmetric_shape(self):
        space = euclidean(3)
        S0 = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(ValueError, match="symmetric"):
            radial_transport(space,
                             (np.zeros(3), np.array([0.0, 0.0, 1.0]), S0),
                             r_max=1.0)

    def test_bad_grid(self):
        space = euclidean(2)
        with pytest.raises(ValueError, match="increasing"):
            radial_transport(space,
                             (np.zeros(2), np.array([1.0, 0.0]),
                              np.zeros((1, 1))),
                             t_grid=np.array([1.0, 0.5]))

    def test_batch_matches_single_rays(self):
        # one batched call == two independent calls
        space = sphere3()
        grid = np.linspace(0.1, 1.5, 15)
        x0 = np.array([[0.6, 1.1, 2.0], [0.9, 0.8, 0.3]])
        nu = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        S0 = np.stack([(math.cos(r) / math.sin(r)) * np.eye(2)
                       for r in (0.6, 0.9)])
        E0 = np.zeros((2, 2, 3))
        for i, r in enumerate((0.6, 0.9)):
            E0[i, 0, 1] = 1.0 / math.sin(r)
            E0[i, 1, 2] = 1.0 / (math.sin(r) * math.sin(x0[i, 1]))
        H = np.array([2 * math.cos(r) / math.sin(r) for r in (0.6, 0.9)])
        batch = transport_rays(space, x0, nu, E0, S0, np.zeros(2), np.zeros(2),
                               0.0, grid, H, np.zeros(2))
        for i, r0 in enumerate((0.6, 0.9)):
            np.testing.assert_allclose(batch.m[i], 2.0 / np.tan(r0 + grid),
                                       rtol=1e-7)

    def test_thread_count_does_not_change_bits(self):
        # n=3 default orders give 2048 rays = 8 chunks, so the pool
        # actually splits the work
        space = euclidean(3)
        grid = np.array([1.0, 2.0])
        a = point_transport(space, None, grid,
                            opts=TransportOptions(threads=1))
        b = point_transport(space, None, grid,
                            opts=TransportOptions(threads=4))
        assert np.array_equal(a.V, b.V) and np.array_equal(a.logA, b.logA)


class TestGeodesics:
    def test_straight_line(self):
        metric = MetricField.flat(3)
        v = np.array([1.0, 2.0, -2.0]) / 3.0
        path = integrate_geodesic(metric, np.zeros(3), v, 6.0)
        np.testing.assert_allclose(path.x, path.t[:, None] * v, atol=1e-10)
        np.testing.assert_allclose(path.energy, 1.0, atol=1e-12)
        assert not path.exited

    def test_equator_of_round_sphere(self):
        # unit S^2: start on the equator moving in azimuth, end antipodal
        metric = MetricField.polar_warped(2, np.sin, np.cos,
                                          lambda r: -np.sin(r), r_max=math.pi)
        x0 = np.array([math.pi / 2, 0.1])
        v0 = np.array([0.0, 1.0])
        path = integrate_geodesic(metric, x0, v0, math.pi, tol=1e-11,
                                  samples=128)
        end = path.x[-1]
        np.testing.assert_allclose(end[0], math.pi / 2, atol=1e-8)
        np.testing.assert_allclose(end[1], 0.1 + math.pi, atol=1e-8)
        np.testing.assert_allclose(path.energy, 1.0, atol=1e-9)

    def test_hyperbolic_radial_ray(self):
        metric = MetricField.polar_warped(2, np.sinh, np.cosh, np.sinh,
                                          r_max=50.0)
        path = integrate_geodesic(metric, np.array([0.3, 1.0]),
                                  np.array([1.0, 0.0]), 8.0)
        np.testing.assert_allclose(path.x[:, 0], 0.3 + path.t, atol=1e-9)
        np.testing.assert_allclose(path.x[:, 1], 1.0, atol=1e-12)

    def test_chart_exit_truncates(self):
        box = Box((-1.0, -1.0), (1.0, 1.0))
        metric = dataclasses.replace(MetricField.flat(2), chart_domain=box)
        path = integrate_geodesic(metric, np.zeros(2),
                                  np.array([1.0, 0.0]), 5.0)
        assert path.exited
        assert path.exit_t == pytest.approx(1.0, abs=0.05)
        assert path.x[-1, 0] <= 1.0

    def test_rejects_non_unit_velocity(self):
        with pytest.raises(ValueError, match="unit"):
            integrate_geodesic(MetricField.flat(2), np.zeros(2),
                               np.array([2.0, 0.0]), 1.0)
