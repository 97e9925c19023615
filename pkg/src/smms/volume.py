"""Weighted volumes of balls and tubes, the quotient Theta_f, and AVR.

Ball volumes integrate the transported weighted volume element over a
tensor-product direction grid, truncating each direction at its focal
radius.  The quotient Theta_f(r) = vol_f(B(r)) / (omega_k r^k) uses the
real-k ball coefficient, so non-integer weights need no special case.
All direction sums run through math.fsum in a fixed ray order: results
are bit-stable under any parallel schedule of the transports.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .spheres import ball_volume_coefficient
from .surfaces import shape_operator, surface_nodes
from .transport import (
    FROZEN_EXIT, FROZEN_NONFINITE, TransportOptions, point_transport,
    transport_rays,
)

__all__ = [
    "ThetaSeries", "TubeSpec", "ResolutionWarning", "weighted_ball_volume",
    "theta_f", "avr_estimate", "tube_volume", "focal_time",
]


class ResolutionWarning(UserWarning):
    """Numerical resolution contradicted a certified monotonicity."""


@dataclass(frozen=True)
class ThetaSeries:
    """Volume quotient samples and the AVR bracket derived from them.

    avr_upper = Theta(r_max) bounds the limit from above whenever Theta
    is nonincreasing; avr_extrapolated comes from a least-squares fit
    Theta ~ a + b/r over the tail, with fit_error the worst tail
    residual (reported, never hidden).
    """

    radii: np.ndarray
    theta: np.ndarray
    monotone_ok: bool
    max_increase: float
    avr_upper: float
    avr_extrapolated: float
    fit_error: float
    k: float

    def as_dict(self):
        return {
            "radii": [float(r) for r in self.radii],
            "theta": [float(t) for t in self.theta],
            "monotone_ok": self.monotone_ok,
            "max_increase": self.max_increase,
            "avr_upper": self.avr_upper,
            "avr_extrapolated": self.avr_extrapolated,
            "fit_error": self.fit_error,
            "k": self.k,
        }


@dataclass(frozen=True)
class TubeSpec:
    """Tube T_Omega(R) around the region bounded by the embedding.

    interior_volume may be supplied; when None it is computed by radial
    integration from the ball center, which requires the embedding to
    be a centered metric sphere (the star-shaped built-ins).
    """

    embedding: object
    R: float
    interior_volume: float = None

    def __post_init__(self):
        if not self.R > 0.0:
            raise ValueError("R must be positive")
        if self.interior_volume is not None and self.interior_volume < 0.0:
            raise ValueError("interior_volume must be nonnegative")


def _checked_batch(smms, p0, t_grid, orders, opts, eps):
    batch = point_transport(smms, p0, t_grid, orders=orders, opts=opts,
                            eps=eps)
    if np.any(batch.codes == FROZEN_EXIT):
        ray = int(np.argmax(batch.codes == FROZEN_EXIT))
        raise ValueError(
            f"geodesic left the chart at r = {batch.freeze_t[ray]:.6g} "
            f"before the requested radius")
    if np.any(batch.codes == FROZEN_NONFINITE):
        raise RuntimeError("transport produced non-finite state")
    return batch


def _fsum_dot(w, v):
    return math.fsum(float(a) * float(b) for a, b in zip(w, v))


def _ball_series(smms, p0, radii, orders=None, opts=None, eps=1e-4):
    """vol_f(B(r)) at each r of an increasing grid, one transport pass."""
    radii = np.asarray(radii, dtype=float)
    batch = _checked_batch(smms, p0, radii, orders, opts, eps)
    return np.array([_fsum_dot(batch.weights, batch.V[:, i])
                     for i in range(radii.size)])


def weighted_ball_volume(smms, p0, r, orders=None, opts=None,
                         refine_check=None, seed_check=False, eps=1e-4):
    """Weighted volume of the metric ball of radius r around p0.

    p0 must be the chart center for radial charts (pass None).  Each
    direction is truncated at its focal radius; leaving the chart
    before r is an error.  refine_check, when set to a relative
    tolerance, recomputes at 1.5x the angular orders and rejects the
    result if it moves more than that.  seed_check repeats the run with
    the seeding radius halved and demands 1e-8 relative agreement.
    """
    if not r > 0.0:
        raise ValueError("r must be positive")
    vol = float(_ball_series(smms, p0, [r], orders=orders, opts=opts,
                             eps=eps)[0])
    if refine_check is not None:
        from .quadrature import default_angular_orders
        base = orders if orders is not None \
            else default_angular_orders(smms.dim)
        finer = tuple(int(math.ceil(1.5 * o)) for o in base)
        vol2 = float(_ball_series(smms, p0, [r], orders=finer,
                                  opts=opts, eps=eps)[0])
        if abs(vol2 - vol) > refine_check * max(1.0, abs(vol)):
            raise ValueError(
                f"angular quadrature order insufficient: refinement moved "
                f"the volume by {abs(vol2 - vol):.3e}")
    if seed_check:
        vol_half = float(_ball_series(smms, p0, [r], orders=orders,
                                      opts=opts, eps=0.5 * eps)[0])
        if abs(vol_half - vol) > 1e-8 * max(1.0, abs(vol)):
            raise RuntimeError(
                f"seeding-radius check failed: eps/2 moved the volume by "
                f"{abs(vol_half - vol):.3e}")
    return vol


def theta_f(smms, p0, r, orders=None, opts=None, eps=1e-4):
    """Theta_f(r) = vol_f(B(r)) / (omega_k r^k) with k from the space."""
    vol = weighted_ball_volume(smms, p0, r, orders=orders, opts=opts,
                               eps=eps)
    k = smms.k
    return vol / (ball_volume_coefficient(k) * float(r) ** k)


def avr_estimate(smms, p0, schedule, orders=None, opts=None,
                 clean_hypotheses=False, mono_tol=1e-7, eps=1e-4):
    """ThetaSeries over a radius schedule, with the AVR bracket.

    schedule needs at least 4 strictly increasing radii.  When the
    scenario's hypotheses were certified clean (clean_hypotheses=True),
    a Theta increase beyond mono_tol is a numerical-resolution failure
    and raises a ResolutionWarning rather than passing silently.
    """
    radii = np.asarray(schedule, dtype=float)
    if radii.size < 4:
        raise ValueError("schedule needs at least 4 radii")
    if np.any(np.diff(radii) <= 0.0) or radii[0] <= 0.0:
        raise ValueError("schedule must be positive and strictly increasing")
    vols = _ball_series(smms, p0, radii, orders=orders, opts=opts,
                        eps=eps)
    k = smms.k
    theta = vols / (ball_volume_coefficient(k) * radii ** k)

    increases = np.diff(theta)
    max_increase = float(np.max(increases)) if increases.size else 0.0
    monotone_ok = max_increase <= mono_tol
    if clean_hypotheses and not monotone_ok:
        warnings.warn(
            f"Theta increased by {max_increase:.3e} on a clean-hypothesis "
            f"scenario: numerical resolution is insufficient, tighten the "
            f"quadrature or the ODE tolerances", ResolutionWarning,
            stacklevel=2)

    tail = max(3, radii.size // 2)
    rt, tt = radii[-tail:], theta[-tail:]
    design = np.column_stack([np.ones(tail), 1.0 / rt])
    coef, *_ = np.linalg.lstsq(design, tt, rcond=None)
    fit_error = float(np.max(np.abs(design @ coef - tt)))
    return ThetaSeries(
        radii=radii, theta=theta, monotone_ok=bool(monotone_ok),
        max_increase=max_increase, avr_upper=float(theta[-1]),
        avr_extrapolated=float(coef[0]), fit_error=fit_error, k=k)


def tube_volume(smms, tube, orders=None, opts=None, eps=1e-4):
    """Weighted volume of the distance tube of radius R around Omega.

    interior_volume plus the surface integral of the transported
    weighted volume element up to min(R, focal radius) per node.
    """
    emb = tube.embedding
    interior = tube.interior_volume
    if interior is None:
        radius = getattr(emb, "sphere_radius", None)
        if radius is None:
            raise ValueError("embedding does not bound a centered ball; "
                             "supply interior_volume")
        if smms.chart == "cartesian" and not smms.metric.flat_chart:
            raise ValueError("chart rays are not geodesics here; supply "
                             "interior_volume")
        p0 = None if smms.chart == "radial" else \
            np.asarray(emb.interior_point, dtype=float)
        interior = weighted_ball_volume(smms, p0, radius, orders=orders,
                                        opts=opts, eps=eps)

    params, w = surface_nodes(emb)
    sd = shape_operator(emb, smms.metric, params, density=smms.density)
    rays = params.shape[0]
    batch = transport_rays(
        smms, sd.chart_point, sd.normal, sd.frame, sd.shape,
        np.zeros(rays), np.zeros(rays), 0.0,
        np.asarray([tube.R], dtype=float), H_f0=sd.H_f, f0=sd.f_at,
        opts=opts)
    if np.any(batch.codes == FROZEN_EXIT):
        raise ValueError("normal geodesic left the chart inside the tube")
    if np.any(batch.codes == FROZEN_NONFINITE):
        raise RuntimeError("transport produced non-finite state")
    shell = _fsum_dot(w * sd.area_weight, batch.V[:, 0])
    return float(interior) + shell


def focal_time(transport):
    """First blow-down radius of the transported volume element.

    None means no focal radius was detected up to the transport's grid
    end, an upper-bound statement only.
    """
    return transport.focal_r
