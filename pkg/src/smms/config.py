"""Scenario configuration: a single JSON document, strictly validated.

Unknown keys are rejected by default so a typo in a geometry parameter
cannot silently fall back to a default.  Permissive mode keeps the run
going but records every ignored key in the config's warning list.
"""

import json
import math
import numbers
from dataclasses import dataclass, field

from .models import ModelSpec

SCENARIOS = (
    "willmore-check", "avr", "comparison", "certify", "rigidity-model",
    "tube-volume",
)

FORMATS = ("json", "csv", "plotdata")

DEFAULT_SCHEDULE = (1.0, 2.0, 4.0, 8.0, 16.0)

_SURFACE_TYPES = ("canonical", "sphere", "ellipsoid", "geodesic_sphere")

_TOP_KEYS = {"scenario", "model", "surface", "numerics", "output"}
_MODEL_KEYS = {"name", "params"}
_SURFACE_KEYS = {"type", "radius", "semi_axes", "center", "r0", "orders",
                 "scale", "interior_volume"}
_NUMERICS_KEYS = {"tolerance", "r_max", "r_samples", "schedule", "eps_seed",
                  "orders", "comparison_points", "clean_hypotheses", "mode",
                  "certify_tolerance", "points"}
_OUTPUT_KEYS = {"format", "path"}


class ConfigError(ValueError):
    """Invalid scenario configuration; the CLI maps this to exit 4."""


@dataclass(frozen=True)
class Numerics:
    tolerance: float = 1e-7
    r_max: float = 8.0
    r_samples: int = 256
    schedule: tuple = DEFAULT_SCHEDULE
    eps_seed: float = 1e-4
    orders: tuple = None
    comparison_points: int = 8
    clean_hypotheses: bool = False
    mode: str = None              # willmore integrand override
    certify_tolerance: float = 1e-8
    points: tuple = None          # explicit curvature sample points


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    model: ModelSpec
    surface: dict = None
    numerics: Numerics = field(default_factory=Numerics)
    output_format: str = "json"
    output_path: str = None
    canonical: dict = None        # normalized echo of the input document
    notes: tuple = ()             # permissive-mode observations


def _reject_unknown(mapping, allowed, where, strict, notes):
    unknown = sorted(set(mapping) - allowed)
    if not unknown:
        return
    if strict:
        raise ConfigError(f"unknown key {unknown[0]!r} in {where}")
    notes.append(f"ignored unknown keys in {where}: {', '.join(unknown)}")


def _number(mapping, key, where, default=None, positive=True,
            allow_int=True):
    if key not in mapping:
        return default
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigError(f"{where}.{key} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where}.{key} must be finite")
    if positive and value <= 0.0:
        raise ConfigError(f"{where}.{key} must be positive, got {value}")
    return value


def _int(mapping, key, where, default=None, minimum=1):
    if key not in mapping:
        return default
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, numbers.Real) \
            or value != int(value):
        raise ConfigError(f"{where}.{key} must be an integer")
    value = int(value)
    if value < minimum:
        raise ConfigError(f"{where}.{key} must be at least {minimum}")
    return value


def _tuple_of_numbers(mapping, key, where, default=None, positive=True):
    if key not in mapping or mapping[key] is None:
        return default
    seq = mapping[key]
    if not isinstance(seq, (list, tuple)) or not seq:
        raise ConfigError(f"{where}.{key} must be a nonempty list of numbers")
    out = []
    for v in seq:
        if isinstance(v, bool) or not isinstance(v, numbers.Real):
            raise ConfigError(f"{where}.{key} must contain only numbers")
        if positive and v <= 0:
            raise ConfigError(f"{where}.{key} entries must be positive")
        out.append(float(v))
    return tuple(out)


def load_config(source, strict=True, scenario=None):
    """Parse and validate a scenario config from a path or JSON text.

    `scenario` fills in when the document omits the field (the CLI
    passes its positional argument); when both are present they must
    agree.
    """
    text = source
    origin = "<text>"
    if isinstance(source, str) \
            and not source.lstrip().startswith(("{", "[")):
        origin = source
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {source!r}: {e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"config parse error in {origin} at line {e.lineno} "
            f"column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")

    notes = []
    _reject_unknown(doc, _TOP_KEYS, "config", strict, notes)

    declared = doc.get("scenario")
    if declared is None and scenario is None:
        raise ConfigError("missing required field 'scenario'")
    if declared is not None and scenario is not None and declared != scenario:
        raise ConfigError(
            f"config declares scenario {declared!r} but {scenario!r} was "
            f"requested")
    name = declared if declared is not None else scenario
    if name not in SCENARIOS:
        raise ConfigError(
            f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")

    if "model" not in doc:
        raise ConfigError("missing required field 'model'")
    model_doc = doc["model"]
    if not isinstance(model_doc, dict):
        raise ConfigError("'model' must be an object")
    _reject_unknown(model_doc, _MODEL_KEYS, "model", strict, notes)
    if "name" not in model_doc:
        raise ConfigError("missing required field 'model.name'")
    params = model_doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("'model.params' must be an object")
    if not strict:
        from .models import _ALLOWED_PARAMS
        allowed = _ALLOWED_PARAMS.get(model_doc["name"])
        if allowed is not None:
            kept = {k: v for k, v in params.items() if k in allowed}
            dropped = sorted(set(params) - allowed)
            if dropped:
                notes.append("ignored unknown keys in model.params: "
                             + ", ".join(dropped))
            params = kept
    try:
        model = ModelSpec(model_doc["name"], params)
    except ValueError as e:
        raise ConfigError(f"model: {e}") from e

    surface = None
    if doc.get("surface") is not None:
        sdoc = doc["surface"]
        if not isinstance(sdoc, dict):
            raise ConfigError("'surface' must be an object")
        _reject_unknown(sdoc, _SURFACE_KEYS, "surface", strict, notes)
        stype = sdoc.get("type", "canonical")
        if stype not in _SURFACE_TYPES:
            raise ConfigError(
                f"unknown surface type {stype!r}; known: "
                f"{', '.join(_SURFACE_TYPES)}")
        surface = {
            "type": stype,
            "radius": _number(sdoc, "radius", "surface"),
            "r0": _number(sdoc, "r0", "surface"),
            "semi_axes": _tuple_of_numbers(sdoc, "semi_axes", "surface"),
            "center": _tuple_of_numbers(sdoc, "center", "surface",
                                        positive=False),
            "orders": None,
            "scale": _number(sdoc, "scale", "surface", default=1.0),
            "interior_volume": _number(sdoc, "interior_volume", "surface",
                                       positive=False),
        }
        orders = _tuple_of_numbers(sdoc, "orders", "surface")
        if orders is not None:
            if any(o != int(o) or o < 2 for o in orders):
                raise ConfigError("surface.orders must be integers >= 2")
            surface["orders"] = tuple(int(o) for o in orders)
        if stype == "sphere" and surface["radius"] is None:
            raise ConfigError("surface type 'sphere' requires 'radius'")
        if stype == "ellipsoid" and surface["semi_axes"] is None:
            raise ConfigError("surface type 'ellipsoid' requires 'semi_axes'")
        if stype == "geodesic_sphere" and surface["r0"] is None:
            raise ConfigError("surface type 'geodesic_sphere' requires 'r0'")
    if surface is None and name in ("willmore-check", "comparison",
                                    "tube-volume"):
        raise ConfigError(f"scenario {name!r} requires a 'surface'")

    ndoc = doc.get("numerics", {})
    if not isinstance(ndoc, dict):
        raise ConfigError("'numerics' must be an object")
    _reject_unknown(ndoc, _NUMERICS_KEYS, "numerics", strict, notes)
    orders = _tuple_of_numbers(ndoc, "orders", "numerics")
    if orders is not None:
        if any(o != int(o) or o < 2 for o in orders):
            raise ConfigError("numerics.orders must be integers >= 2")
        orders = tuple(int(o) for o in orders)
    mode = ndoc.get("mode")
    if mode is not None and mode not in ("absolute", "positive_part",
                                         "plain_power"):
        raise ConfigError(f"numerics.mode {mode!r} is not a willmore "
                          f"integrand mode")
    clean = ndoc.get("clean_hypotheses", False)
    if not isinstance(clean, bool):
        raise ConfigError("numerics.clean_hypotheses must be a boolean")
    points = None
    if ndoc.get("points") is not None:
        pts = ndoc["points"]
        if not isinstance(pts, list) or not all(
                isinstance(p, (list, tuple)) for p in pts):
            raise ConfigError("numerics.points must be a list of points")
        points = tuple(tuple(float(v) for v in p) for p in pts)
    schedule = _tuple_of_numbers(ndoc, "schedule", "numerics",
                                 default=DEFAULT_SCHEDULE)
    if list(schedule) != sorted(set(schedule)):
        raise ConfigError("numerics.schedule must be strictly increasing")
    numerics = Numerics(
        tolerance=_number(ndoc, "tolerance", "numerics", default=1e-7),
        r_max=_number(ndoc, "r_max", "numerics", default=8.0),
        r_samples=_int(ndoc, "r_samples", "numerics", default=256, minimum=2),
        schedule=schedule,
        eps_seed=_number(ndoc, "eps_seed", "numerics", default=1e-4),
        orders=orders,
        comparison_points=_int(ndoc, "comparison_points", "numerics",
                               default=8, minimum=1),
        clean_hypotheses=clean,
        mode=mode,
        certify_tolerance=_number(ndoc, "certify_tolerance", "numerics",
                                  default=1e-8),
        points=points,
    )

    odoc = doc.get("output", {})
    if not isinstance(odoc, dict):
        raise ConfigError("'output' must be an object")
    _reject_unknown(odoc, _OUTPUT_KEYS, "output", strict, notes)
    fmt = odoc.get("format", "json")
    if fmt not in FORMATS:
        raise ConfigError(
            f"unknown output format {fmt!r}; known: {', '.join(FORMATS)}")
    path = odoc.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigError("output.path must be a string")

    canonical = {
        "scenario": name,
        "model": {"name": model.name, "params": dict(model.params)},
        "surface": surface,
        "numerics": {
            "tolerance": numerics.tolerance,
            "r_max": numerics.r_max,
            "r_samples": numerics.r_samples,
            "schedule": list(numerics.schedule),
            "eps_seed": numerics.eps_seed,
            "orders": list(numerics.orders) if numerics.orders else None,
            "comparison_points": numerics.comparison_points,
            "clean_hypotheses": numerics.clean_hypotheses,
            "mode": numerics.mode,
            "certify_tolerance": numerics.certify_tolerance,
            "points": [list(p) for p in numerics.points]
            if numerics.points else None,
        },
        "output": {"format": fmt, "path": path},
    }
    return ScenarioConfig(
        scenario=name, model=model, surface=surface, numerics=numerics,
        output_format=fmt, output_path=path, canonical=canonical,
        notes=tuple(notes))
