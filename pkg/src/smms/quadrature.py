"""Tensor-product quadrature over spheres and parameter rectangles.

Angular grids use Gauss-Legendre nodes in each colatitude and an
equispaced half-step-offset trapezoid rule in the azimuth, so nodes
never sit on coordinate seams (poles, azimuth wrap).  The spherical
measure prod_i sin^{n-1-i}(t_i) is folded into the weights: summing
weights times integrand values approximates the integral over S^{n-1}.

Hyperspherical components, 0-indexed, angles t_0..t_{n-2}:

    omega_i = cos(t_i) * prod_{j<i} sin(t_j)   for i < n-1
    omega_{n-1} = prod_j sin(t_j)
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import roots_legendre

__all__ = [
    "gauss_axis", "trapezoid_axis", "angular_grid", "default_angular_orders",
    "sphere_point", "sphere_point_derivative", "sphere_point_second_derivative",
]

_DEFAULT_ORDERS = {2: (64,), 3: (32, 64), 4: (16, 16, 32)}


def default_angular_orders(n):
    """Per-axis node counts for the S^{n-1} grid."""
    if n in _DEFAULT_ORDERS:
        return _DEFAULT_ORDERS[n]
    return (16,) * (n - 2) + (32,)


def gauss_axis(order, lo, hi):
    """Gauss-Legendre nodes/weights on (lo, hi); nodes strictly interior."""
    x, w = roots_legendre(order)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def trapezoid_axis(order, lo, hi):
    """Equispaced periodic rule offset by half a step; exact for trig poly."""
    h = (hi - lo) / order
    return lo + h * (np.arange(order) + 0.5), np.full(order, h)


def angular_grid(n, orders=None):
    """Quadrature for S^{n-1}: angles (Q, n-1) and weights (Q,).

    Weights include the spherical volume element, so sum(w) converges
    to sphere_area(n).  Colatitudes use Gauss-Legendre, the azimuth a
    periodic trapezoid.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    orders = tuple(orders) if orders is not None else default_angular_orders(n)
    if len(orders) != n - 1:
        raise ValueError(f"need {n - 1} angular orders for n={n}, got {len(orders)}")
    axes = []
    for i, order in enumerate(orders):
        if i < n - 2:
            t, w = gauss_axis(order, 0.0, math.pi)
            w = w * np.sin(t) ** (n - 2 - i)
        else:
            t, w = trapezoid_axis(order, 0.0, 2.0 * math.pi)
        axes.append((t, w))
    grids = np.meshgrid(*[t for t, _ in axes], indexing="ij")
    angles = np.stack([g.reshape(-1) for g in grids], axis=-1)
    wgrids = np.meshgrid(*[w for _, w in axes], indexing="ij")
    weight = np.ones(angles.shape[0])
    for wg in wgrids:
        weight = weight * wg.reshape(-1)
    return angles, weight


# factor tables: value, first, second derivative as (kind, t) -> arrays
def _factor(kind, t, order):
    if kind == "sin":
        return (np.sin(t), np.cos(t), -np.sin(t))[order]
    return (np.cos(t), -np.sin(t), -np.cos(t))[order]


def _component_factors(n, i):
    """(axis, kind) factors of omega_i (0-indexed component)."""
    fac = [(j, "sin") for j in range(i)]
    if i < n - 1:
        fac.append((i, "cos"))
    return fac


def sphere_point(angles):
    """Unit vectors omega(t); angles (..., n-1) -> (..., n)."""
    angles = np.asarray(angles, dtype=float)
    n = angles.shape[-1] + 1
    out = np.empty(angles.shape[:-1] + (n,))
    for i in range(n):
        val = np.ones(angles.shape[:-1])
        for axis, kind in _component_factors(n, i):
            val = val * _factor(kind, angles[..., axis], 0)
        out[..., i] = val
    return out


def sphere_point_derivative(angles):
    """d omega / d t_a; angles (..., n-1) -> (..., n-1, n)."""
    angles = np.asarray(angles, dtype=float)
    n = angles.shape[-1] + 1
    out = np.zeros(angles.shape[:-1] + (n - 1, n))
    for i in range(n):
        factors = _component_factors(n, i)
        axes = [axis for axis, _ in factors]
        for a in axes:
            val = np.ones(angles.shape[:-1])
            for axis, kind in factors:
                val = val * _factor(kind, angles[..., axis], 1 if axis == a else 0)
            out[..., a, i] = val
    return out


def sphere_point_second_derivative(angles):
    """d^2 omega / d t_a d t_b; angles (..., n-1) -> (..., n-1, n-1, n)."""
    angles = np.asarray(angles, dtype=float)
    n = angles.shape[-1] + 1
    out = np.zeros(angles.shape[:-1] + (n - 1, n - 1, n))
    omega = sphere_point(angles)
    for i in range(n):
        factors = _component_factors(n, i)
        axes = [axis for axis, _ in factors]
        for a in axes:
            # pure second derivative flips the factor sign: f'' = -f
            out[..., a, a, i] = -omega[..., i]
            for b in axes:
                if b == a:
                    continue
                val = np.ones(angles.shape[:-1])
                for axis, kind in factors:
                    order = 1 if axis in (a, b) else 0
                    val = val * _factor(kind, angles[..., axis], order)
                out[..., a, b, i] = val
    return out
