"""Sampled certification of the sign hypotheses behind the inequalities.

Four checks, each reporting the worst sampled value and where it was
seen: nonnegativity of the Bakry-Emery tensor as a form relative to g,
monotonicity of the density along normal geodesics from the surface,
the same along radial geodesics from the base point, and nonnegativity
of the weighted mean curvature on the surface.  All of them evaluate a
finite sample set, so a passing report is evidence, never a proof, and
says so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curvature import bakry_emery, min_generalized_eigenvalue
from .surfaces import shape_operator, surface_nodes
from .transport import point_transport, transport_rays

__all__ = [
    "SampleSpec", "CheckResult", "CertificationReport",
    "certify_hypotheses", "SAMPLED_DISCLAIMER", "CHECKS",
]

SAMPLED_DISCLAIMER = (
    "certification is sampled at finitely many points; "
    "a passing check is evidence, not a proof")

CURVATURE = "bakry_emery_min_eigenvalue"
NORMAL_SLOPE = "df_dr_normal_min"
RADIAL_SLOPE = "df_dr_radial_min"
SURFACE_HF = "H_f_min"
CHECKS = (CURVATURE, NORMAL_SLOPE, RADIAL_SLOPE, SURFACE_HF)


@dataclass(frozen=True)
class SampleSpec:
    """Where the hypotheses get sampled.

    checks is a subset of CHECKS; None selects every check the inputs
    support (curvature always, surface checks when an embedding is
    given, the radial check when a base point exists).  Requesting a
    check whose input is missing is an error.  Geodesics are sampled on
    r_samples points up to r_max; orders sets the angular resolution of
    the radial bundle; surface_scale multiplies the embedding's
    quadrature orders.  points adds explicit chart points to the
    curvature sample set.
    """

    r_max: float = 8.0
    r_samples: int = 48
    orders: tuple = None
    surface_scale: float = 1.0
    points: object = None
    checks: tuple = None
    tolerance: float = 1e-8
    max_curvature_samples: int = 4096

    def __post_init__(self):
        if not (self.r_max > 0.0):
            raise ValueError("r_max must be positive")
        if self.r_samples < 2:
            raise ValueError("r_samples must be at least 2")
        if not (self.tolerance > 0.0):
            raise ValueError("tolerance must be positive")
        if self.checks is not None:
            unknown = set(self.checks) - set(CHECKS)
            if unknown:
                raise ValueError(f"unknown checks: {sorted(unknown)}")


@dataclass(frozen=True)
class CheckResult:
    """Worst sampled value of one hypothesis and the sample realizing it."""

    name: str
    value: float
    witness: tuple
    detail: dict
    passed: bool

    def as_dict(self):
        return {"name": self.name, "value": self.value,
                "witness": list(self.witness), "detail": dict(self.detail),
                "passed": self.passed}


@dataclass(frozen=True)
class CertificationReport:
    checks: tuple
    tolerance: float
    curvature_samples: int
    flags: tuple
    disclaimer: str = SAMPLED_DISCLAIMER

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {
            "passed": self.passed,
            "tolerance": self.tolerance,
            "curvature_samples": self.curvature_samples,
            "flags": list(self.flags),
            "disclaimer": self.disclaimer,
            "checks": [c.as_dict() for c in self.checks],
        }


def _min_over_rays(t_grid, batch, value0, values):
    """Minimum over the r=0 row and every in-domain ray sample.

    Returns (value, witness point, {"r", "ray"}).
    """
    best_v = float(np.min(value0))
    ray = int(np.argmin(value0))
    best_w = batch.init[0][ray]
    best_r = 0.0
    if np.any(batch.valid):
        masked = np.where(batch.valid, values, np.inf)
        flat = int(np.argmin(masked))
        i, j = np.unravel_index(flat, masked.shape)
        if masked[i, j] < best_v:
            best_v = float(masked[i, j])
            best_w = batch.x[i, j]
            best_r = float(t_grid[j])
            ray = int(i)
    return best_v, best_w, {"r": best_r, "ray": ray}


def _subsample(points, cap):
    if len(points) <= cap:
        return points
    idx = np.linspace(0, len(points) - 1, cap).round().astype(int)
    return points[np.unique(idx)]


def certify_hypotheses(smms, surface=None, sample_spec=None):
    """Sample the curvature and monotonicity hypotheses and report minima.

    surface is an optional Embedding; the base point for the radial
    check is smms.base_point() (radial charts sample from the chart
    center).  Samples for the curvature check pool the surface nodes,
    every point visited by the sampled geodesics, and any explicit
    points in the spec.
    """
    spec = sample_spec if sample_spec is not None else SampleSpec()
    if smms.chart == "radial":
        # a ray bundle can leave the chart origin only when the warp
        # closes there (annuli and exterior charts have no center) and
        # the density is radial
        warp = smms.metric.warp
        radial_ready = (
            smms.metric.chart_domain.lower[0] <= 0.0
            and warp is not None
            and abs(float(np.asarray(warp[0](np.zeros(1)))[0])) <= 1e-9
            and smms.density.radial_profile is not None)
    else:
        radial_ready = smms.base_point() is not None

    if spec.checks is None:
        names = [CURVATURE]
        if surface is not None:
            names += [NORMAL_SLOPE, SURFACE_HF]
        if radial_ready:
            names.append(RADIAL_SLOPE)
    else:
        names = list(spec.checks)
        if not names:
            raise ValueError("sample plan requests no checks")
        if (NORMAL_SLOPE in names or SURFACE_HF in names) and surface is None:
            raise ValueError("surface checks requested without a surface")
        if RADIAL_SLOPE in names and not radial_ready:
            raise ValueError("radial check requested without a base point")

    t_grid = np.linspace(0.0, spec.r_max, spec.r_samples + 1)[1:]
    tol = spec.tolerance
    results = []
    pool = []
    if spec.points is not None:
        pts = np.atleast_2d(np.asarray(spec.points, dtype=float))
        if pts.shape[-1] != smms.dim:
            raise ValueError("explicit sample points have wrong dimension")
        pool.append(pts)

    sd = None
    if surface is not None and (NORMAL_SLOPE in names or SURFACE_HF in names
                                or CURVATURE in names):
        params, _ = surface_nodes(surface, scale=spec.surface_scale)
        sd = shape_operator(surface, smms.metric, params,
                            density=smms.density)
        pool.append(sd.chart_point)

    if SURFACE_HF in names:
        i = int(np.argmin(sd.H_f))
        results.append(CheckResult(
            name=SURFACE_HF, value=float(sd.H_f[i]),
            witness=tuple(sd.chart_point[i]),
            detail={"param": list(sd.point[i])},
            passed=bool(sd.H_f[i] >= -tol)))

    if NORMAL_SLOPE in names:
        rays = sd.chart_point.shape[0]
        batch = transport_rays(
            smms, sd.chart_point, sd.normal, sd.frame, sd.shape,
            np.zeros(rays), np.zeros(rays), 0.0, t_grid,
            H_f0=sd.H_f, f0=sd.f_at)
        slope0 = sd.H - sd.H_f  # <nu, grad f> at r = 0
        value, witness, detail = _min_over_rays(t_grid, batch, slope0,
                                                batch.dfdr)
        results.append(CheckResult(
            name=NORMAL_SLOPE, value=value, witness=tuple(witness),
            detail=detail, passed=bool(value >= -tol)))
        pool.append(batch.x[batch.valid])

    if RADIAL_SLOPE in names or (CURVATURE in names and radial_ready
                                 and surface is None):
        p0 = smms.base_point() if smms.chart == "cartesian" else None
        batch = point_transport(smms, p0, t_grid, orders=spec.orders)
        if RADIAL_SLOPE in names:
            if smms.chart == "cartesian":
                slope0 = np.einsum("ri,i->r", batch.init[1],
                                   smms.density.grad(p0))
            else:
                # seed radius of the ray bundle stands in for r = 0
                dphi = smms.density.radial_profile[1]
                slope0 = np.asarray(dphi(batch.init[0][:, 0]), dtype=float)
            value, witness, detail = _min_over_rays(t_grid, batch, slope0,
                                                    batch.dfdr)
            results.append(CheckResult(
                name=RADIAL_SLOPE, value=value, witness=tuple(witness),
                detail=detail, passed=bool(value >= -tol)))
        pool.append(batch.x[batch.valid])

    if CURVATURE in names:
        if not pool:
            raise ValueError("sample plan is empty: no surface, base point "
                             "or explicit points to sample")
        pts = _subsample(np.concatenate(pool, axis=0),
                         spec.max_curvature_samples)
        B = bakry_emery(smms, pts)
        mu = min_generalized_eigenvalue(B, smms.metric.g(pts))
        i = int(np.argmin(mu))
        results.insert(0, CheckResult(
            name=CURVATURE, value=float(mu[i]), witness=tuple(pts[i]),
            detail={"samples": int(len(pts))},
            passed=bool(mu[i] >= -tol)))
        n_curv = int(len(pts))
    else:
        n_curv = 0

    flags = []
    if smms.real_weight_extension:
        flags.append("real_weight_extension")
    if not math.isfinite(smms.weight):
        flags.append("infinite_weight")
    return CertificationReport(
        checks=tuple(results), tolerance=tol, curvature_samples=n_curv,
        flags=tuple(flags))
