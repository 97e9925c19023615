"""Scenario runner: build the configured model, verify, assemble a Report.

Every scenario produces the same report shape so the emitters stay
format-only: named results (scalars and series), a verdict list whose
entries carry the tolerance they were judged at, captured warnings, and
an optional hypothesis certification.  Verdict tolerances are widened
by the resolution metadata of the estimators involved (quadrature
refinement deltas, extrapolation residuals), so a verdict never claims
more accuracy than the computation that produced it.
"""

import hashlib
import json
import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .certify import SampleSpec, certify_hypotheses
from .comparison import (check_theta_monotone, check_volume_element_bound,
                         compare_mean_curvature, model_mean_curvature,
                         willmore_gap)
from .config import ScenarioConfig
from .models import build_model
from .spheres import ball_volume_coefficient, sphere_area
from .surfaces import (WILLMORE_MODES, Embedding, shape_operator,
                       surface_nodes, willmore_lhs)
from .transport import radial_transport
from .volume import TubeSpec, avr_estimate, tube_volume, weighted_ball_volume

__all__ = ["Report", "ScenarioError", "run_scenario", "emit_report",
           "exit_code", "SCHEMA"]

SCHEMA = "smms-report/1"


class ScenarioError(RuntimeError):
    """A downstream operation failed; message carries the scenario."""


@dataclass
class Report:
    scenario: str
    config_digest: str
    inputs: dict
    results: dict
    verdicts: list
    warnings: list
    certification: dict = None
    timing: float = 0.0
    schema: str = SCHEMA

    @property
    def passed(self):
        return all(v["passed"] for v in self.verdicts)

    def as_dict(self):
        return {
            "schema": self.schema,
            "scenario": self.scenario,
            "config_digest": self.config_digest,
            "inputs": self.inputs,
            "results": self.results,
            "verdicts": self.verdicts,
            "warnings": self.warnings,
            "certification": self.certification,
            "timing": self.timing,
        }


def _digest(canonical):
    blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _verdict(name, value, tolerance, passed):
    return {"name": name, "value": float(value), "tolerance": float(tolerance),
            "passed": bool(passed)}


def _series(*columns):
    names = [name for name, _ in columns]
    arrays = [np.asarray(vals, dtype=float) for _, vals in columns]
    rows = [[float(a[i]) for a in arrays] for i in range(arrays[0].size)]
    return {"columns": names, "rows": rows}


def _resolve_surface(config, smms, emb_canonical):
    spec = config.surface
    if spec is None or spec["type"] == "canonical":
        if emb_canonical is None:
            raise ValueError(
                f"model {config.model.name!r} has no canonical surface; "
                f"configure an explicit one")
        emb = emb_canonical
    elif spec["type"] == "sphere":
        if smms.chart == "radial":
            if spec["center"] is not None:
                raise ValueError("spheres in a radial chart are centered; "
                                 "drop 'center' or use a cartesian model")
            emb = Embedding.geodesic_sphere(spec["radius"], smms.dim)
        else:
            emb = Embedding.sphere(spec["radius"], center=spec["center"],
                                   dim=smms.dim)
    elif spec["type"] == "ellipsoid":
        if smms.chart != "cartesian":
            raise ValueError("ellipsoid surfaces need a cartesian chart")
        emb = Embedding.ellipsoid(spec["semi_axes"], center=spec["center"])
    else:
        if smms.chart != "radial":
            raise ValueError("geodesic_sphere surfaces need a radial chart")
        emb = Embedding.geodesic_sphere(spec["r0"], smms.dim)
    if spec is not None and spec["orders"] is not None:
        emb = emb.with_orders(spec["orders"])
    if emb.param_dim != smms.dim - 1:
        raise ValueError("surface dimension does not match the model")
    return emb


def _center_ready(smms):
    if smms.chart != "radial":
        return smms.base_point() is not None
    warp = smms.metric.warp
    return (smms.metric.chart_domain.lower[0] <= 0.0
            and warp is not None
            and abs(float(np.asarray(warp[0](np.zeros(1)))[0])) <= 1e-9
            and smms.density.radial_profile is not None)


def _chart_reach(smms):
    """Largest ball radius the chart can hold around the base point."""
    box = smms.metric.chart_domain
    if smms.chart == "radial":
        return float(box.upper[0])
    p0 = smms.base_point()
    if p0 is None:
        return math.inf
    gaps = np.minimum(np.asarray(box.upper) - p0, p0 - np.asarray(box.lower))
    return float(np.min(gaps))


def _usable_schedule(schedule, reach, sink):
    if not math.isfinite(reach):
        return tuple(schedule)
    kept = tuple(r for r in schedule if r < 0.98 * reach)
    if len(kept) >= 4:
        if len(kept) < len(schedule):
            sink(f"radius schedule clamped to the chart domain "
                 f"(kept radii below {0.98 * reach:.6g})")
        return kept
    top = 0.95 * reach
    fallback = tuple(top / 2.0 ** j for j in range(4, -1, -1))
    sink(f"radius schedule replaced by a geometric one inside the chart "
         f"(top radius {top:.6g})")
    return fallback


def _surface_extent(smms, emb):
    """How far the surface reaches from the chart's base point."""
    params, _ = surface_nodes(emb)
    pts = np.asarray(emb.chart_map(params), dtype=float)
    if smms.chart == "radial":
        return float(np.max(pts[:, 0]))
    p0 = smms.base_point()
    if p0 is None:
        p0 = np.zeros(smms.dim)
    return float(np.max(np.linalg.norm(pts - p0, axis=-1)))


def _fit_tail(radii, values):
    """Least squares a + b/r over the tail half; (a, worst residual)."""
    tail = max(3, len(radii) // 2)
    rt = np.asarray(radii[-tail:], dtype=float)
    vt = np.asarray(values[-tail:], dtype=float)
    design = np.column_stack([np.ones(tail), 1.0 / rt])
    coef, *_ = np.linalg.lstsq(design, vt, rcond=None)
    return float(coef[0]), float(np.max(np.abs(design @ coef - vt)))


def _tube_theta_series(config, smms, emb, sink):
    """AVR estimate from tube growth, for spaces without a usable center.

    vol_f of the region enclosed by the surface is a constant that the
    1/r fit cannot see (it decays like r^-k), so it is set to zero.
    """
    num = config.numerics
    reach = _chart_reach(smms) - _surface_extent(smms, emb)
    schedule = _usable_schedule(num.schedule, reach, sink)
    k = smms.k
    vols = [tube_volume(smms, TubeSpec(emb, R, interior_volume=0.0),
                        orders=num.orders, eps=num.eps_seed)
            for R in schedule]
    radii = np.asarray(schedule, dtype=float)
    theta = np.asarray(vols) / (ball_volume_coefficient(k) * radii ** k)
    avr, fit_error = _fit_tail(radii, theta)
    return {
        "method": "tube_growth",
        "schedule": [float(r) for r in radii],
        "theta": [float(t) for t in theta],
        "value": avr,
        "upper": float(theta[-1]),
        "fit_error": fit_error,
    }


def _avr_info(config, smms, emb, sink):
    """AVR estimate dict: ball growth from a center when one exists,
    tube growth from the surface otherwise."""
    num = config.numerics
    if _center_ready(smms):
        schedule = _usable_schedule(num.schedule, _chart_reach(smms), sink)
        p0 = None if smms.chart == "radial" else smms.base_point()
        series = avr_estimate(
            smms, p0, schedule, orders=num.orders,
            clean_hypotheses=num.clean_hypotheses, eps=num.eps_seed)
        vols = series.theta * ball_volume_coefficient(series.k) \
            * series.radii ** series.k
        if vols[-1] > 0 and (vols[-1] - vols[-2]) < 1e-6 * vols[-1]:
            sink(f"finite total weighted volume: ball volume saturates "
                 f"near {vols[-1]:.9g}")
        return {
            "method": "ball_growth",
            "schedule": [float(r) for r in series.radii],
            "theta": [float(t) for t in series.theta],
            "value": series.avr_extrapolated,
            "upper": series.avr_upper,
            "fit_error": series.fit_error,
            "monotone_ok": series.monotone_ok,
            "max_increase": series.max_increase,
        }
    if emb is None:
        raise ValueError("no center to grow balls from and no surface to "
                         "grow tubes from")
    return _tube_theta_series(config, smms, emb, sink)


def _lhs_all_modes(emb, smms):
    modes = {}
    for mode in WILLMORE_MODES:
        try:
            value, err = willmore_lhs(emb, smms, mode=mode, return_error=True)
            modes[mode] = {"value": value, "quadrature_error": err}
        except ValueError as e:
            modes[mode] = {"value": None, "undefined": str(e)}
    return modes


def _primary_mode(config, smms):
    if config.numerics.mode is not None:
        return config.numerics.mode
    return "absolute" if smms.finite_weight else "plain_power"


def _certify(config, smms, emb):
    num = config.numerics
    scale = 1.0
    if config.surface is not None and config.surface.get("scale"):
        scale = config.surface["scale"]
    spec = SampleSpec(r_max=num.r_max, orders=num.orders,
                      surface_scale=scale, points=num.points,
                      tolerance=num.certify_tolerance)
    return certify_hypotheses(smms, surface=emb, sample_spec=spec)


def _space_inputs(smms, meta):
    return {
        "model": meta.get("model"),
        "n": smms.dim,
        "weight": smms.weight,
        "k": smms.k,
        "chart": smms.chart,
        "real_weight_extension": smms.real_weight_extension,
    }


def _run_willmore(config, smms, emb_c, meta, sink):
    emb = _resolve_surface(config, smms, emb_c)
    cert = _certify(config, smms, emb)
    modes = _lhs_all_modes(emb, smms)
    primary = _primary_mode(config, smms)
    entry = modes[primary]
    if entry["value"] is None:
        raise ValueError(f"willmore integrand mode {primary!r} is undefined "
                         f"here: {entry['undefined']}")
    lhs, lhs_err = entry["value"], entry["quadrature_error"]
    avr = _avr_info(config, smms, emb, sink)
    k = smms.k
    rhs = sphere_area(k) * avr["value"]
    gap = willmore_gap(lhs, avr["value"], k)
    tol = (config.numerics.tolerance * max(1.0, abs(lhs))
           + 4.0 * sphere_area(k) * avr["fit_error"] + 4.0 * lhs_err)
    results = {
        "k": k,
        "lhs": {"mode": primary, "value": lhs, "quadrature_error": lhs_err},
        "lhs_modes": modes,
        "avr": avr,
        "rhs": {"value": rhs, "sphere_area_k": sphere_area(k)},
        "gap": {"value": gap, "tolerance": tol},
        "series": _series(("r", avr["schedule"]), ("theta_f", avr["theta"])),
    }
    verdicts = [_verdict("willmore_gap_nonnegative", gap, tol, gap >= -tol)]
    return results, verdicts, cert.as_dict()


def _run_avr(config, smms, emb_c, meta, sink):
    emb = _resolve_surface(config, smms, emb_c) if config.surface else None
    avr = _avr_info(config, smms, emb, sink)
    results = {
        "k": smms.k,
        "avr": avr,
        "series": _series(("r", avr["schedule"]), ("theta_f", avr["theta"])),
    }
    tol = config.numerics.tolerance
    if avr["method"] == "ball_growth":
        verdicts = [_verdict("theta_nonincreasing", avr["max_increase"],
                             tol, avr["max_increase"] <= tol)]
    else:
        # tube growth has no monotonicity lemma behind it
        verdicts = []
    return results, verdicts, None


def _model_bound_series(transport):
    base = 1.0 + transport.H_f0 * transport.r_grid / (transport.k - 1.0)
    with np.errstate(invalid="ignore"):
        bound = math.exp(-transport.f0) \
            * np.where(base > 0.0, base, np.nan) ** (transport.k - 1.0)
    return bound


def _run_comparison(config, smms, emb_c, meta, sink):
    emb = _resolve_surface(config, smms, emb_c)
    num = config.numerics
    params, _ = surface_nodes(emb)
    count = min(num.comparison_points, params.shape[0])
    idx = np.unique(np.round(
        np.linspace(0, params.shape[0] - 1, count)).astype(int))
    sd = shape_operator(emb, smms.metric, params[idx], density=smms.density)
    t_grid = np.linspace(0.0, num.r_max, num.r_samples + 1)[1:]
    tol = num.tolerance
    flags = ("real_weight_extension",) if smms.real_weight_extension else ()

    per_point = []
    worst = {"mean_curvature_comparison": -math.inf,
             "theta_monotone": -math.inf,
             "volume_element_bound": -math.inf}
    worst_transport = None
    worst_violation = -math.inf
    max_abs_dev = 0.0
    for row in range(len(idx)):
        tr = radial_transport(
            smms, (sd.chart_point[row], sd.normal[row], sd.shape[row],
                   sd.f_at[row]),
            t_grid=t_grid, E0=sd.frame[row])
        checks = [
            compare_mean_curvature(tr, tol=tol, hypothesis_flags=flags),
            check_theta_monotone(tr, tol=tol, hypothesis_flags=flags),
            check_volume_element_bound(tr, tol=tol, hypothesis_flags=flags),
        ]
        m0 = model_mean_curvature(tr.H_f0, tr.k, tr.r_grid)
        dev = float(np.max(np.abs(tr.m_f - m0)))
        max_abs_dev = max(max_abs_dev, dev)
        point_worst = max(c.max_violation for c in checks)
        if point_worst > worst_violation:
            worst_violation = point_worst
            worst_transport = (tr, m0)
        for c in checks:
            worst[c.quantity] = max(worst[c.quantity], c.max_violation)
        per_point.append({
            "index": int(idx[row]),
            "chart_point": [float(v) for v in sd.chart_point[row]],
            "H_f": float(sd.H_f[row]),
            "checks": [c.as_dict() for c in checks],
        })

    tr, m0 = worst_transport
    results = {
        "k": smms.k,
        "points_checked": len(idx),
        "grid_size": int(t_grid.size),
        "mean_curvature_max_abs_deviation": max_abs_dev,
        "per_point": per_point,
        "series": _series(
            ("r", tr.r_grid), ("m_f", tr.m_f), ("m0", m0),
            ("theta", tr.theta), ("A_f", tr.A_f),
            ("A_f_bound", _model_bound_series(tr))),
    }
    verdicts = [_verdict(name, worst[name], tol, worst[name] <= tol)
                for name in ("mean_curvature_comparison", "theta_monotone",
                             "volume_element_bound")]
    return results, verdicts, None


def _run_certify(config, smms, emb_c, meta, sink):
    emb = None
    if config.surface is not None:
        emb = _resolve_surface(config, smms, emb_c)
    elif emb_c is not None:
        emb = emb_c
    cert = _certify(config, smms, emb)
    worst = min(c.value for c in cert.checks)
    results = {"k": smms.k, "checks_run": [c.name for c in cert.checks]}
    verdicts = [_verdict("hypotheses_certified", worst,
                         config.numerics.certify_tolerance, cert.passed)]
    return results, verdicts, cert.as_dict()


def _run_rigidity(config, smms, emb_c, meta, sink):
    emb = _resolve_surface(config, smms, emb_c)
    num = config.numerics
    primary = _primary_mode(config, smms)
    lhs, lhs_err = willmore_lhs(emb, smms, mode=primary, return_error=True)
    avr = _avr_info(config, smms, emb, sink)
    k = smms.k
    rhs = sphere_area(k) * avr["value"]
    gap = willmore_gap(lhs, avr["value"], k)
    gap_tol = (num.tolerance * max(1.0, abs(lhs))
               + 4.0 * sphere_area(k) * avr["fit_error"] + 4.0 * lhs_err)

    params, _ = surface_nodes(emb)
    count = min(num.comparison_points, params.shape[0])
    idx = np.unique(np.round(
        np.linspace(0, params.shape[0] - 1, count)).astype(int))
    sd = shape_operator(emb, smms.metric, params[idx], density=smms.density)
    t_grid = np.linspace(0.0, num.r_max, num.r_samples + 1)[1:]
    drift = 0.0
    worst_tr = None
    for row in range(len(idx)):
        tr = radial_transport(
            smms, (sd.chart_point[row], sd.normal[row], sd.shape[row],
                   sd.f_at[row]),
            t_grid=t_grid, E0=sd.frame[row])
        limit = math.exp(-tr.f0)
        d = float(np.max(np.abs(tr.theta - limit))) / limit
        if d >= drift:
            drift, worst_tr = d, tr
    results = {
        "k": k,
        "lhs": {"mode": primary, "value": lhs, "quadrature_error": lhs_err},
        "closed_form_lhs": meta.get("willmore_lhs"),
        "avr": avr,
        "rhs": {"value": rhs, "sphere_area_k": sphere_area(k)},
        "gap": {"value": gap, "tolerance": gap_tol},
        "theta_drift": {"value": drift, "tolerance": num.tolerance,
                        "points_checked": len(idx),
                        "grid_size": int(t_grid.size)},
        "series": _series(
            ("r", worst_tr.r_grid), ("theta", worst_tr.theta),
            ("theta_limit", np.full(worst_tr.r_grid.size,
                                    math.exp(-worst_tr.f0)))),
    }
    verdicts = [
        _verdict("gap_matches_equality", abs(gap), gap_tol,
                 abs(gap) <= gap_tol),
        _verdict("theta_constant", drift, num.tolerance,
                 drift <= num.tolerance),
    ]
    return results, verdicts, None


def _model_tube_integral(H, k, R):
    """Elementwise integral of (1 + H t/(k-1))^(k-1) over [0, R].

    Past a model blow-down (negative H) the model element is zero, so
    the integral saturates at (k-1)/(k |H|).
    """
    H = np.asarray(H, dtype=float)
    base = 1.0 + H * R / (k - 1.0)
    tiny = np.abs(H) * R < 1e-8
    safe_H = np.where(tiny, 1.0, H)
    general = (k - 1.0) / (k * safe_H) \
        * (np.maximum(base, 0.0) ** k - 1.0)
    return np.where(tiny, R + H * R * R / 2.0, general)


def _run_tube(config, smms, emb_c, meta, sink):
    emb = _resolve_surface(config, smms, emb_c)
    num = config.numerics
    interior = config.surface.get("interior_volume")
    if interior is None:
        radius = getattr(emb, "sphere_radius", None)
        if radius is None:
            raise ValueError("surface does not bound a centered ball; set "
                             "surface.interior_volume")
        p0 = None if smms.chart == "radial" else \
            np.asarray(emb.interior_point, dtype=float)
        interior = weighted_ball_volume(smms, p0, radius, orders=num.orders,
                                        eps=num.eps_seed)
    primary = _primary_mode(config, smms)
    lhs, lhs_err = willmore_lhs(emb, smms, mode=primary, return_error=True)
    k = smms.k

    params, w = surface_nodes(emb)
    sd = shape_operator(emb, smms.metric, params, density=smms.density)
    node_weight = w * sd.area_weight * np.exp(-sd.f_at)

    reach = _chart_reach(smms) - _surface_extent(smms, emb)
    schedule = _usable_schedule(num.schedule, reach, sink)
    tubes, leading, bounds = [], [], []
    for R in schedule:
        tubes.append(tube_volume(
            smms, TubeSpec(emb, R, interior_volume=float(interior)),
            orders=num.orders, eps=num.eps_seed))
        leading.append(R ** k / k * lhs)
        bounds.append(float(interior) + float(
            node_weight @ _model_tube_integral(sd.H_f, k, R)))
    tubes, leading, bounds = (np.asarray(a) for a in (tubes, leading, bounds))
    ratio = tubes / leading
    violation = float(np.max((tubes - bounds) / np.maximum(1.0, bounds)))
    tol = num.tolerance
    results = {
        "k": k,
        "lhs": {"mode": primary, "value": lhs, "quadrature_error": lhs_err},
        "interior_volume": float(interior),
        "leading_coefficient": lhs / k,
        "series": _series(
            ("R", schedule), ("tube_volume", tubes),
            ("leading_term", leading), ("ratio", ratio),
            ("model_bound", bounds)),
    }
    verdicts = [_verdict("tube_below_model_bound", violation, tol,
                         violation <= tol)]
    return results, verdicts, None


_DISPATCH = {
    "willmore-check": _run_willmore,
    "avr": _run_avr,
    "comparison": _run_comparison,
    "certify": _run_certify,
    "rigidity-model": _run_rigidity,
    "tube-volume": _run_tube,
}


def run_scenario(config):
    if not isinstance(config, ScenarioConfig):
        raise TypeError("run_scenario takes a ScenarioConfig")
    start = time.perf_counter()
    captured = []

    def sink(message):
        captured.append(str(message))

    for note in config.notes:
        sink(note)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        try:
            smms, emb_c, meta = build_model(config.model)
            results, verdicts, cert = _DISPATCH[config.scenario](
                config, smms, emb_c, meta, sink)
        except (ValueError, RuntimeError, ArithmeticError) as e:
            raise ScenarioError(f"scenario {config.scenario!r}: {e}") from e
    for w in rec:
        sink(f"{w.category.__name__}: {w.message}")
    seen, ordered = set(), []
    for msg in captured:
        if msg not in seen:
            seen.add(msg)
            ordered.append(msg)
    results["model"] = meta
    return Report(
        scenario=config.scenario,
        config_digest=_digest(config.canonical),
        inputs={"config": config.canonical, "space": _space_inputs(smms, meta)},
        results=results,
        verdicts=verdicts,
        warnings=ordered,
        certification=cert,
        timing=time.perf_counter() - start,
    )


def exit_code(report, strict=False):
    """0 verdicts hold, 2 verdict failed, 3 certification failed.

    Certification failure wins over a verdict failure: when the
    hypotheses do not hold the inequality is not expected to, and the
    exit code should say why.  With strict=True, hypothesis warnings
    count as certification failures and resolution warnings as verdict
    failures.
    """
    cert = report.certification
    if cert is not None and not cert.get("passed", True):
        return 3
    if any(not v["passed"] for v in report.verdicts):
        return 2
    if strict:
        if any(w.startswith("HypothesisWarning:") for w in report.warnings):
            return 3
        if any(w.startswith("ResolutionWarning:") for w in report.warnings):
            return 2
    return 0


def _sanitize(value):
    if isinstance(value, dict):
        return {str(k): _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_sanitize(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "infinite" if value > 0 else "-infinite"
        return value
    return value


def _format_num(value):
    return repr(float(value))


def _emit_json(report):
    doc = _sanitize(report.as_dict())
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _emit_csv(report):
    series = report.results.get("series")
    lines = []
    if series is not None:
        lines.append(",".join(series["columns"]))
        for row in series["rows"]:
            lines.append(",".join(_format_num(v) for v in row))
    else:
        lines.append("name,value,tolerance,passed")
        for v in report.verdicts:
            lines.append(f"{v['name']},{_format_num(v['value'])},"
                         f"{_format_num(v['tolerance'])},{int(v['passed'])}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _emit_plotdata(report):
    chunks = [f"# scenario: {report.scenario}"]
    series = report.results.get("series")
    if series is not None:
        x_name = series["columns"][0]
        for col in range(1, len(series["columns"])):
            chunks.append(f"\n# curve: {series['columns'][col]} vs {x_name}")
            for row in series["rows"]:
                chunks.append(f"{_format_num(row[0])} "
                              f"{_format_num(row[col])}")
    chunks.append("\n# verdicts: name value tolerance passed")
    for v in report.verdicts:
        chunks.append(f"# {v['name']} {_format_num(v['value'])} "
                      f"{_format_num(v['tolerance'])} {int(v['passed'])}")
    return ("\n".join(chunks) + "\n").encode("utf-8")


def emit_report(report, format="json"):
    """Render a Report to bytes; byte-stable for a fixed report."""
    if format == "json":
        return _emit_json(report)
    if format == "csv":
        return _emit_csv(report)
    if format == "plotdata":
        return _emit_plotdata(report)
    raise ValueError(f"unknown report format {format!r}")
