"""Built-in space catalog and expression-driven model construction.

Each builder returns the space in one global chart together with a
canonical boundary sphere (when the model has one) and a metadata
mapping of closed-form reference values that tests and reports check
against.  Metadata values are plain numbers and strings so they can be
serialized as-is.
"""

import math
import numbers

import numpy as np
import scipy.integrate
from numpy.polynomial import Polynomial

from .expr import (
    Expr, compile_expr, diff, eval_expr, free_variables, parse_expr, pretty,
)
from .fields import INFINITE, Box, DensityField, MetricField, Smms
from .quadrature import default_angular_orders
from .spheres import sphere_area
from .surfaces import Embedding

__all__ = [
    "MODEL_NAMES", "ModelSpec", "build_model", "warped_product_smms",
    "warped_ball_volume_oracle",
]

MODEL_NAMES = (
    "euclidean", "gaussian_soliton", "sphere_ambient",
    "cone_power_density", "twisted_exterior", "warped_custom",
)

_ALLOWED_PARAMS = {
    "euclidean": {"n", "radius"},
    "gaussian_soliton": {"n", "lambda", "radius"},
    "sphere_ambient": {"n", "radius", "r0"},
    "cone_power_density": {"n", "N", "r0"},
    "twisted_exterior": {"n", "H", "radius", "r_max"},
    "warped_custom": {"n", "w", "phi", "N", "r_max", "r_min"},
}

_REQUIRED_PARAMS = {
    "euclidean": {"n"},
    "gaussian_soliton": {"n", "lambda"},
    "sphere_ambient": {"n"},
    "cone_power_density": {"n", "N"},
    "twisted_exterior": {"n", "H"},
    "warped_custom": {"n", "w"},
}


def _require_number(params, key, *, positive=True):
    value = params[key]
    if not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise ValueError(f"parameter {key!r} must be a finite number")
    value = float(value)
    if positive and value <= 0.0:
        raise ValueError(f"parameter {key!r} must be positive, got {value}")
    return value


def _parse_weight(value):
    """Finite positive N, or INFINITE (also spelled 'infinite'/'inf')."""
    if isinstance(value, str):
        if value.lower() in ("infinite", "inf"):
            return INFINITE
        raise ValueError(f"weight must be a positive number or 'infinite', got {value!r}")
    if value == INFINITE or value == math.inf:
        return INFINITE
    if not isinstance(value, numbers.Real) or not (value > 0.0):
        raise ValueError(f"weight must be a positive number or 'infinite', got {value!r}")
    return float(value)


def _as_expr(source, variables, what):
    if isinstance(source, Expr):
        extra = free_variables(source) - set(variables)
        if extra:
            raise ValueError(f"{what} uses unknown variables {sorted(extra)}")
        return source
    if isinstance(source, str):
        return parse_expr(source, variables=frozenset(variables))
    raise ValueError(f"{what} must be an expression string, got {type(source).__name__}")


class ModelSpec:
    """Validated (name, params) pair naming a catalog model."""

    __slots__ = ("name", "params")

    def __init__(self, name, params=None):
        if name not in MODEL_NAMES:
            raise ValueError(
                f"unknown model {name!r}; known models: {', '.join(MODEL_NAMES)}")
        params = dict(params or {})
        unknown = set(params) - _ALLOWED_PARAMS[name]
        if unknown:
            raise ValueError(
                f"unknown parameters for {name}: {sorted(unknown)}")
        missing = _REQUIRED_PARAMS[name] - set(params)
        if missing:
            raise ValueError(f"{name} requires parameters {sorted(missing)}")
        n = params["n"]
        if not isinstance(n, numbers.Real) or n != int(n) or int(n) < 2:
            raise ValueError(f"n must be an integer >= 2, got {n!r}")
        params["n"] = int(n)
        self.name = name
        self.params = params

    def __repr__(self):
        return f"ModelSpec({self.name!r}, {self.params!r})"


def build_model(spec):
    """Construct (Smms, canonical Embedding or None, metadata) for a spec."""
    if not isinstance(spec, ModelSpec):
        raise TypeError("build_model takes a ModelSpec")
    builder = {
        "euclidean": _build_euclidean,
        "gaussian_soliton": _build_gaussian_soliton,
        "sphere_ambient": _build_sphere_ambient,
        "cone_power_density": _build_cone,
        "twisted_exterior": _build_twisted_exterior,
        "warped_custom": _build_warped_custom,
    }[spec.name]
    return builder(spec.params)


def _base_meta(name, smms):
    return {
        "model": name,
        "n": smms.dim,
        "weight": smms.weight,
        "k": smms.k,
    }


def _build_euclidean(params):
    n = params["n"]
    radius = _require_number(params, "radius") if "radius" in params else 1.0
    smms = Smms(metric=MetricField.flat(n), density=DensityField.zero(n),
                weight=INFINITE, name="euclidean")
    emb = Embedding.sphere(radius, dim=n, name="canonical sphere")
    meta = _base_meta("euclidean", smms)
    meta.update({
        "ricci_factor": 0.0,
        "canonical_radius": radius,
        # any centered sphere integrates |H/(n-1)|^{n-1} to the unit
        # sphere area, independent of radius
        "willmore_lhs": sphere_area(n),
        "f_avr": 1.0,
    })
    return smms, emb, meta


def _build_gaussian_soliton(params):
    n = params["n"]
    lam = _require_number(params, "lambda")
    radius = _require_number(params, "radius") if "radius" in params else 1.0
    density = DensityField.radial_cartesian(
        n,
        phi=lambda r: 0.5 * lam * np.asarray(r, dtype=float) ** 2,
        dphi=lambda r: lam * np.asarray(r, dtype=float),
        d2phi=lambda r: np.full(np.shape(r), lam, dtype=float),
    )
    smms = Smms(metric=MetricField.flat(n), density=density,
                weight=INFINITE, name="gaussian_soliton")
    emb = Embedding.sphere(radius, dim=n, name="canonical sphere")
    meta = _base_meta("gaussian_soliton", smms)
    meta.update({
        "lambda": lam,
        "bakry_emery_factor": lam,
        "total_weighted_volume": (2.0 * math.pi / lam) ** (n / 2.0),
        "f_avr": 0.0,
        "canonical_radius": radius,
        "boundary_H_f": (n - 1) / radius - lam * radius,
    })
    return smms, emb, meta


def _build_sphere_ambient(params):
    n = params["n"]
    a = _require_number(params, "radius") if "radius" in params else 1.0
    r0 = _require_number(params, "r0") if "r0" in params else 0.25 * math.pi * a
    if not r0 < math.pi * a:
        raise ValueError(f"r0 must lie in (0, pi*radius), got {r0}")
    metric = MetricField.polar_warped(
        n,
        w=lambda r: a * np.sin(np.asarray(r, dtype=float) / a),
        dw=lambda r: np.cos(np.asarray(r, dtype=float) / a),
        d2w=lambda r: -np.sin(np.asarray(r, dtype=float) / a) / a,
        r_max=math.pi * a)
    smms = Smms(metric=metric, density=DensityField.zero(n),
                weight=INFINITE, name="sphere_ambient", chart="radial")
    emb = Embedding.geodesic_sphere(r0, n, name="canonical geodesic sphere")
    meta = _base_meta("sphere_ambient", smms)
    meta.update({
        "radius": a,
        "r0": r0,
        "ricci_factor": (n - 1) / a ** 2,
        "total_volume": sphere_area(n + 1) * a ** n,
        "willmore_lhs": sphere_area(n) * math.cos(r0 / a) ** (n - 1),
        "focal_radius_from_canonical": math.pi * a - r0,
        "f_avr": 0.0,
    })
    return smms, emb, meta


def _build_cone(params):
    n = params["n"]
    N = _require_number(params, "N")
    r0 = _require_number(params, "r0") if "r0" in params else 1.0
    phi, dphi, d2phi, cap_meta = _capped_cone_profile(N, r0)
    density = DensityField.radial_cartesian(n, phi, dphi, d2phi)
    smms = Smms(metric=MetricField.flat(n), density=density,
                weight=N, name="cone_power_density")
    emb = Embedding.sphere(r0, dim=n, name="canonical sphere")
    k = n + N
    # weighted volume of the capped core, by radial quadrature: the
    # plateau part is exact, the transition shell is not elementary
    shell, _ = scipy.integrate.quad(
        lambda t: math.exp(-float(phi(t))) * t ** (n - 1), 0.5 * r0, r0,
        epsabs=1e-13, epsrel=1e-13)
    core = math.exp(-cap_meta["plateau_f"]) * (0.5 * r0) ** n / n
    meta = _base_meta("cone_power_density", smms)
    meta.update({
        "N": N,
        "r0": r0,
        "H_f_on_boundary": (n + N - 1) / r0,
        "willmore_lhs": sphere_area(n) * r0 ** (-N),
        "f_avr": sphere_area(n) / (sphere_area(k) * r0 ** N),
        "vol_f_core": sphere_area(n) * (core + shell),
        "cap": cap_meta,
        "note": ("equality model: the Bakry-Emery tensor has negative "
                 "transverse eigenvalues outside the cap, so only the "
                 "two sides of the inequality are certified, not the "
                 "curvature hypothesis"),
    })
    return smms, emb, meta


def _capped_cone_profile(N, r0):
    """f = -N log(rho/r0) outside r0, blended to a constant inside.

    The blend acts on f' rather than f: f'(rho) = -N s(rho)/rho with s
    the quintic smoothstep rising from 0 at r0/2 to 1 at r0.  That
    keeps f monotone by construction and C^2 at both seams, and f
    itself integrates in closed form (the constant term of the
    polynomial s contributes a logarithm, the rest plain powers).
    """
    u = Polynomial([-1.0, 2.0 / r0])          # u(rho) = 2 rho/r0 - 1
    s = 6 * u ** 5 - 15 * u ** 4 + 10 * u ** 3
    ds = s.deriv()
    c = s.coef

    def F(t):
        out = c[0] * np.log(t)
        for j in range(1, len(c)):
            out = out + c[j] * t ** j / j
        return out

    F_r0 = float(F(r0))
    plateau = N * (F_r0 - float(F(0.5 * r0)))

    # np.select evaluates every branch, so each one is guarded against
    # arguments outside the region it is selected for
    def phi(rho):
        rho = np.asarray(rho, dtype=float)
        safe = np.clip(rho, 0.5 * r0, r0)
        blend = N * (F_r0 - F(safe))
        outer = -N * np.log(np.maximum(rho, 0.5 * r0) / r0)
        return np.select([rho >= r0, rho > 0.5 * r0], [outer, blend],
                         default=plateau)

    def dphi(rho):
        rho = np.asarray(rho, dtype=float)
        safe = np.clip(rho, 0.5 * r0, r0)
        return np.select(
            [rho >= r0, rho > 0.5 * r0],
            [-N / np.maximum(rho, 0.5 * r0), -N * s(safe) / safe],
            default=0.0)

    def d2phi(rho):
        rho = np.asarray(rho, dtype=float)
        safe = np.clip(rho, 0.5 * r0, r0)
        return np.select(
            [rho >= r0, rho > 0.5 * r0],
            [N / np.maximum(rho, 0.5 * r0) ** 2,
             -N * (ds(safe) * safe - s(safe)) / safe ** 2],
            default=0.0)

    cap_meta = {
        "kind": "quintic smoothstep on df/drho",
        "interval": (0.5 * r0, r0),
        "plateau_f": plateau,
        "smoothstep_coefficients": [float(v) for v in c],
    }
    return phi, dphi, d2phi, cap_meta


def _link_angle_names(n):
    return [f"x{i}" for i in range(1, n)]


def _link_slice_embedding(n, name):
    """The boundary r = 0 of an exterior chart (r, t_1, ..., t_{n-1})."""

    def chart_map(u):
        u = np.asarray(u, dtype=float)
        out = np.empty(u.shape[:-1] + (n,))
        out[..., 0] = 0.0
        out[..., 1:] = u
        return out

    def jacobian(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape[:-1] + (n - 1, n))
        for a in range(n - 1):
            out[..., a, a + 1] = 1.0
        return out

    def hessian(u):
        u = np.asarray(u, dtype=float)
        return np.zeros(u.shape[:-1] + (n - 1, n - 1, n))

    # the parameter-frame cross product points along (-1)^{n-1} d/dr;
    # the enclosed region is not in the chart, so orientation is fixed
    # by parity instead of a reference point
    return Embedding(
        ambient_dim=n,
        intervals=((0.0, math.pi),) * (n - 2) + ((0.0, 2 * math.pi),),
        periodic=(False,) * (n - 2) + (True,),
        chart_map=chart_map, jacobian=jacobian, hessian=hessian,
        orders=default_angular_orders(n), interior_point=None,
        flip=(n % 2 == 0), name=name)


def _build_twisted_exterior(params):
    n = params["n"]
    if n > 4:
        raise ValueError("twisted_exterior supports n up to 4 "
                         "(link variables x1..x3)")
    a = _require_number(params, "radius") if "radius" in params else 1.0
    r_max = (_require_number(params, "r_max") if "r_max" in params
             else math.inf)
    angle_names = _link_angle_names(n)

    H_param = params["H"]
    if isinstance(H_param, numbers.Real) and not isinstance(H_param, bool):
        if not (float(H_param) > 0.0):
            raise ValueError(f"H must be positive, got {H_param}")
        H_ast = parse_expr(repr(float(H_param)), variables=frozenset())
        H_src = pretty(H_ast)
    else:
        H_ast = _as_expr(H_param, angle_names, "H")
        H_src = pretty(H_ast)

    H_min, H_max = _link_extrema(H_ast, n)
    if not (H_min > 0.0):
        raise ValueError(
            f"H must be positive on the link; sampled minimum {H_min:.6g}")

    # the chart extends a little below r = 0 so the boundary slice is
    # interior; the warp 1 + H r/(n-1) stays well clear of zero there
    margin = 0.1 * (n - 1) / H_max
    lo = (-margin,) + (0.0,) * (n - 1)
    hi = ((r_max,) + (math.pi,) * (n - 2) + (2.0 * math.pi,))
    names = ["r"] + angle_names

    warp_src = f"(1 + ({H_src})*r/{n - 1})"
    zero = parse_expr("0", variables=frozenset(names))
    entries = [[zero] * n for _ in range(n)]
    entries[0][0] = parse_expr("1", variables=frozenset(names))
    for i in range(1, n):
        sines = "".join(f" * sin(x{j})^2" for j in range(1, i))
        entries[i][i] = parse_expr(
            f"{warp_src}^2 * {a * a}{sines}", variables=frozenset(names))
    metric = MetricField.from_exprs(entries, names, domain=Box(lo, hi))

    if n == 2:
        f_ast = parse_expr("0", variables=frozenset(names))
    else:
        f_ast = parse_expr(f"{n - 2} * log({H_src})",
                           variables=frozenset(names))
    density = DensityField.from_expr(n, f_ast, names, chart="radial")
    smms = Smms(metric=metric, density=density, weight=INFINITE,
                name="twisted_exterior", chart="radial")
    emb = _link_slice_embedding(n, "boundary link slice")

    meta = _base_meta("twisted_exterior", smms)
    meta.update({
        "H": H_src,
        "link_radius": a,
        "boundary_area": sphere_area(n) * a ** (n - 1),
        "f_normalization": f"f = {n - 2} * log(H), no additive constant",
    })
    if not free_variables(H_ast):
        H_val = float(eval_expr(H_ast, {}))
        meta.update({
            "H": H_val,
            "willmore_lhs": (H_val * a ** (n - 1) * sphere_area(n)
                             / (n - 1) ** (n - 1)),
            "f_avr": H_val * a ** (n - 1) / (n - 1) ** (n - 1),
        })
    return smms, emb, meta


def _link_extrema(H_ast, n):
    fn = compile_expr(H_ast, _link_angle_names(n))
    axes = [np.linspace(1e-3, math.pi - 1e-3, 41) for _ in range(n - 2)]
    axes.append(np.linspace(0.0, 2.0 * math.pi, 81))
    grids = np.meshgrid(*axes, indexing="ij") if axes else []
    values = np.asarray(fn(*grids), dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("H is not finite everywhere on the link")
    return float(np.min(values)), float(np.max(values))


def _build_warped_custom(params):
    n = params["n"]
    weight = _parse_weight(params["N"]) if "N" in params else INFINITE
    r_max = (_require_number(params, "r_max") if "r_max" in params
             else math.inf)
    r_min = (_require_number(params, "r_min", positive=False)
             if "r_min" in params else 0.0)
    if r_min < 0.0:
        raise ValueError(f"r_min must be nonnegative, got {r_min}")
    w_ast = _as_expr(params["w"], ("r",), "w")
    phi_ast = _as_expr(params.get("phi", "0"), ("r",), "phi")
    smms = warped_product_smms(w_ast, phi_ast, n, weight=weight,
                               r_max=r_max, r_min=r_min)
    meta = _base_meta("warped_custom", smms)
    meta.update({
        "w": pretty(w_ast),
        "phi": pretty(phi_ast),
        "r_min": r_min,
        "r_max": r_max,
    })
    return smms, None, meta


def warped_product_smms(profile_w, density_phi, n, weight=INFINITE,
                        r_max=math.inf, r_min=0.0):
    """Rotationally symmetric space dr^2 + w(r)^2 g_{S^{n-1}}, f = phi(r).

    Profiles are expressions in the single variable r.  With r_min = 0
    the chart closes at a center, which requires w(0) = 0 and
    w'(0) = 1; with r_min > 0 the model is an annulus or exterior
    region and only positivity of w in the interior is required.
    """
    if not isinstance(n, numbers.Real) or n != int(n) or int(n) < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    w_ast = _as_expr(profile_w, ("r",), "w")
    phi_ast = _as_expr(density_phi, ("r",), "phi")
    w_fns = _compiled_radial_triplet(w_ast)
    phi_fns = _compiled_radial_triplet(phi_ast)

    if r_min == 0.0:
        w0 = float(np.asarray(w_fns[0](np.zeros(1)))[0])
        dw0 = float(np.asarray(w_fns[1](np.zeros(1)))[0])
        if not (abs(w0) <= 1e-9 and abs(dw0 - 1.0) <= 1e-9):
            raise ValueError(
                f"point closure needs w(0) = 0 and w'(0) = 1; "
                f"got w(0) = {w0:.6g}, w'(0) = {dw0:.6g}")

    hi = r_max if math.isfinite(r_max) else max(4.0 * (r_min + 1.0), 20.0)
    rs = np.linspace(r_min, hi, 259)[1:-1]
    ws = np.asarray(w_fns[0](rs), dtype=float)
    if not np.all(np.isfinite(ws)) or np.any(ws <= 0.0):
        bad = rs[np.argmin(np.where(np.isfinite(ws), ws, -math.inf))]
        raise ValueError(
            f"profile nonpositive in domain interior near r = {bad:.6g}")

    metric = MetricField.polar_warped(n, *w_fns, r_max=r_max, r_min=r_min)
    density = DensityField.radial_chart(n, *phi_fns)
    return Smms(metric=metric, density=density, weight=weight,
                name="warped_custom", chart="radial")


def _compiled_radial_triplet(ast):
    d1 = diff(ast, "r")
    d2 = diff(d1, "r")
    fns = [compile_expr(e, ["r"]) for e in (ast, d1, d2)]

    def wrap(fn):
        return lambda r: np.asarray(fn(np.asarray(r, dtype=float)),
                                    dtype=float)

    return tuple(wrap(fn) for fn in fns)


def warped_ball_volume_oracle(profile_w, density_phi, n, r):
    """Closed-form reduction of the weighted ball volume.

    For the rotationally symmetric space built by warped_product_smms
    the weighted volume of B(r) around the center collapses to the 1-D
    integral |S^{n-1}| int_0^r e^{-phi(t)} w(t)^{n-1} dt, evaluated
    here by adaptive quadrature.  Used as an independent check of the
    ray-bundle volume pipeline.
    """
    w_ast = _as_expr(profile_w, ("r",), "w")
    phi_ast = _as_expr(density_phi, ("r",), "phi")
    w_fn = compile_expr(w_ast, ["r"])
    phi_fn = compile_expr(phi_ast, ["r"])

    def integrand(t):
        return math.exp(-float(phi_fn(np.float64(t)))) \
            * float(w_fn(np.float64(t))) ** (n - 1)

    val, err = scipy.integrate.quad(integrand, 0.0, r,
                                    epsabs=1e-12, epsrel=1e-12, limit=200)
    return sphere_area(n) * val
