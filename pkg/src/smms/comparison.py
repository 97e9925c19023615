"""Verdicts for the comparison statements along normal geodesics.

Each check reduces a transported ray against its model counterpart and
returns a ComparisonVerdict: the signed worst violation over the sample
grid, the sample where it happened, and the tolerance the verdict was
judged at.  max_violation <= tolerance means the statement held on the
sampled grid; nothing here is a proof.

The exponent k is never accepted on faith: the transport records the k
of the space it was integrated in, and a mismatching explicit k is
rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spheres import sphere_area

__all__ = [
    "ComparisonVerdict", "model_mean_curvature", "auxiliary_h",
    "compare_mean_curvature", "check_theta_monotone",
    "check_volume_element_bound", "willmore_gap", "myers_diameter_bound",
]


@dataclass(frozen=True)
class ComparisonVerdict:
    """Outcome of one sampled comparison.

    max_violation is signed (<= 0 everywhere satisfied, even with slack);
    witness is the (surface point, radius) of the worst sample; ties go
    to the lowest sample index.  grid_size makes reruns reproducible.
    hypothesis_flags carries certification context along, it does not
    change the verdict.
    """

    quantity: str
    max_violation: float
    witness: tuple
    tolerance: float
    grid_size: int
    hypothesis_flags: tuple = ()

    @property
    def holds(self):
        return self.max_violation <= self.tolerance

    def as_dict(self):
        x, r = self.witness
        return {
            "quantity": self.quantity,
            "max_violation": self.max_violation,
            "witness": {"x": [float(c) for c in np.atleast_1d(x)],
                        "r": float(r)},
            "tolerance": self.tolerance,
            "grid_size": self.grid_size,
            "holds": self.holds,
            "hypothesis_flags": list(self.hypothesis_flags),
        }


def model_mean_curvature(H_f_at_x, k, r):
    """Mean curvature (k-1) H_f / (k-1 + H_f r) of the flat model cone.

    Solves m' = -m^2/(k-1) with m(0) = H_f.  r may be an array; every
    entry must stay before the model blow-down k-1 + H_f r = 0.
    """
    if not k > 1.0:
        raise ValueError("k must exceed 1")
    r = np.asarray(r, dtype=float)
    denom = (k - 1.0) + H_f_at_x * r
    if np.any(denom <= 0.0):
        raise ValueError("model blow-down: k-1 + H_f r <= 0")
    out = (k - 1.0) * H_f_at_x / denom
    return float(out) if out.ndim == 0 else out


def auxiliary_h(H_f_at_x, n, r):
    """h(r) = (n-1) + H_f r, the auxiliary ray function of the finite
    comparison argument; (h^2)' = 2 h^2 m0 / (n-1) with k = n."""
    if n < 2:
        raise ValueError("n must be at least 2")
    r = np.asarray(r, dtype=float)
    out = (n - 1.0) + H_f_at_x * r
    return float(out) if out.ndim == 0 else out


def _check_k(transport, k):
    if k is None:
        return transport.k
    if abs(float(k) - transport.k) > 1e-12:
        raise ValueError(f"explicit k={k} does not match the transport's "
                         f"k={transport.k}")
    return transport.k


def _check_H_f(transport, H_f_at_x):
    if H_f_at_x is None:
        return float(transport.H_f0)
    ref = float(transport.H_f0)
    if abs(float(H_f_at_x) - ref) > 1e-6 * max(1.0, abs(ref)):
        raise ValueError("H_f_at_x does not match the transport's initial "
                         "weighted mean curvature")
    return float(H_f_at_x)


def _base_point(transport):
    return tuple(float(c) for c in transport.geodesic.x[0])


def _worst(r_grid, values):
    i = int(np.argmax(values))
    return float(values[i]), float(r_grid[i])


def compare_mean_curvature(transport, H_f_at_x=None, k=None, tol=1e-7,
                           hypothesis_flags=()):
    """Verdict for m_f(r) <= m0(r) on the transported grid.

    Samples at or past the model blow-down (possible only when H_f < 0)
    are excluded; the transport rows themselves already stop before the
    focal radius.
    """
    k = _check_k(transport, k)
    H_f = _check_H_f(transport, H_f_at_x)
    r = transport.r_grid
    if r.size == 0:
        raise ValueError("empty transport grid")
    denom = (k - 1.0) + H_f * r
    live = denom > 0.0
    if not np.any(live):
        raise ValueError("model blow-down precedes every sample")
    viol = np.where(live, transport.m_f - (k - 1.0) * H_f
                    / np.where(live, denom, 1.0), -np.inf)
    worst, r_at = _worst(r, viol)
    return ComparisonVerdict(
        quantity="mean_curvature_comparison", max_violation=worst,
        witness=(_base_point(transport), r_at), tolerance=tol,
        grid_size=int(r.size), hypothesis_flags=tuple(hypothesis_flags))


def check_theta_monotone(transport, tol=1e-7, hypothesis_flags=()):
    """Verdict for theta nonincreasing: worst forward difference."""
    r = transport.r_grid
    if r.size < 2:
        raise ValueError("need at least two samples for a difference")
    diff = np.diff(transport.theta)
    i = int(np.argmax(diff))
    return ComparisonVerdict(
        quantity="theta_monotone", max_violation=float(diff[i]),
        witness=(_base_point(transport), float(r[i + 1])), tolerance=tol,
        grid_size=int(r.size), hypothesis_flags=tuple(hypothesis_flags))


def check_volume_element_bound(transport, H_f_at_x=None, k=None,
                               f_at_x=None, tol=1e-7, hypothesis_flags=()):
    """Verdict for A_f(r) <= e^{-f(x)} (1 + H_f r/(k-1))^{k-1}."""
    k = _check_k(transport, k)
    H_f = _check_H_f(transport, H_f_at_x)
    if f_at_x is None:
        f_at_x = float(transport.f0)
    r = transport.r_grid
    if r.size == 0:
        raise ValueError("empty transport grid")
    base = 1.0 + H_f * r / (k - 1.0)
    live = base > 0.0
    bound = np.where(live, math.exp(-f_at_x)
                     * np.where(live, base, 1.0) ** (k - 1.0), 0.0)
    viol = np.where(live, transport.A_f - bound, -np.inf)
    if not np.any(live):
        raise ValueError("model blow-down precedes every sample")
    worst, r_at = _worst(r, viol)
    return ComparisonVerdict(
        quantity="volume_element_bound", max_violation=worst,
        witness=(_base_point(transport), r_at), tolerance=tol,
        grid_size=int(r.size), hypothesis_flags=tuple(hypothesis_flags))


def willmore_gap(lhs, avr, k):
    """lhs - |S^{k-1}| avr, the slack in the boundary inequality.

    |S^{k-1}| = 2 pi^{k/2} / Gamma(k/2) holds for real k, so non-integer
    weights go through the same call.
    """
    if not k >= 2.0:
        raise ValueError("k must be at least 2")
    return float(lhs) - sphere_area(k) * float(avr)


def myers_diameter_bound(n, N, H):
    """Diameter bound sqrt((n+N-1)/(n-1)) pi / sqrt(H) for H_f >= H > 0."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if not N > 0.0:
        raise ValueError("N must be positive")
    if not H > 0.0:
        raise ValueError("H must be positive")
    return math.sqrt((n + N - 1.0) / (n - 1.0)) * math.pi / math.sqrt(H)
