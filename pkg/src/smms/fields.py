"""Core field types: charts, metric tensors, densities, and the weighted triple.

A model lives in a single coordinate chart.  MetricField and
DensityField carry batched callables for the tensor components and
their first and second coordinate derivatives; downstream geometry
(Christoffel symbols, curvature, Hessians) consumes those exact
derivatives, never finite differences.

Index layout conventions used throughout:

    g(x)   -> (..., n, n)          g[..., i, j] = g_ij
    dg(x)  -> (..., n, n, n)       dg[..., k, i, j] = d g_ij / d x^k
    d2g(x) -> (..., n, n, n, n)    d2g[..., k, l, i, j] = d_k d_l g_ij

    value(x) -> (...,)             f
    grad(x)  -> (..., n)           d f / d x^i
    hess(x)  -> (..., n, n)        d_i d_j f   (coordinate, no Christoffel)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import Expr, Var, compile_expr, diff, free_variables

__all__ = ["Box", "MetricField", "DensityField", "Smms", "INFINITE"]

INFINITE = math.inf


@dataclass(frozen=True)
class Box:
    """Axis-aligned chart domain; bounds may be infinite."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower/upper length mismatch")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("empty box")

    @property
    def dim(self):
        return len(self.lower)

    def contains(self, x):
        """Pointwise containment; x has shape (..., dim)."""
        x = np.asarray(x, dtype=float)
        lo = np.array(self.lower)
        hi = np.array(self.upper)
        return np.all((x > lo) & (x < hi), axis=-1)

    @staticmethod
    def unbounded(dim):
        return Box((-math.inf,) * dim, (math.inf,) * dim)


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise ValueError(f"expected points with last axis {dim}, got {x.shape}")
    return x


@dataclass(frozen=True)
class MetricField:
    """Riemannian metric in one chart, with exact derivative callables."""

    dim: int
    chart_domain: Box
    g: object
    dg: object
    d2g: object
    flat_chart: bool = False  # dg identically zero; geometry kernels short-circuit
    warp: tuple = None        # (w, dw, d2w) callables for polar warped metrics

    def require_inside(self, x):
        x = _as_points(x, self.dim)
        ok = self.chart_domain.contains(x)
        if not np.all(ok):
            bad = np.asarray(x)[~np.asarray(ok, dtype=bool)]
            raise ValueError(f"point outside chart domain: {np.atleast_2d(bad)[0]}")
        return x

    # -- constructors -------------------------------------------------------

    @staticmethod
    def flat(dim):
        """Euclidean metric on the Cartesian chart."""
        eye = np.eye(dim)

        def g(x):
            x = _as_points(x, dim)
            return np.broadcast_to(eye, x.shape[:-1] + (dim, dim)).copy()

        def dg(x):
            x = _as_points(x, dim)
            return np.zeros(x.shape[:-1] + (dim, dim, dim))

        def d2g(x):
            x = _as_points(x, dim)
            return np.zeros(x.shape[:-1] + (dim, dim, dim, dim))

        return MetricField(dim, Box.unbounded(dim), g, dg, d2g, flat_chart=True)

    @staticmethod
    def polar_warped(dim, w, dw, d2w, r_max=math.inf, r_min=0.0):
        """dr^2 + w(r)^2 g_{S^{n-1}} in hyperspherical coordinates.

        Chart order is (r, t_1, ..., t_{n-1}) with colatitudes
        t_1..t_{n-2} in (0, pi) and azimuth t_{n-1} in (0, 2pi).
        The callables w, dw, d2w must be vectorized over r.
        """
        n = dim
        lo = (r_min,) + (0.0,) * (n - 1)
        hi = (r_max,) + (math.pi,) * max(n - 2, 0) + ((2.0 * math.pi,) if n >= 2 else ())
        box = Box(lo, hi)

        # g_ii = w(r)^2 * prod_{j<i} sin^2(t_j) for angle slots i = 1..n-1
        def _assemble(x, order):
            x = _as_points(x, n)
            base = x.shape[:-1]
            r = x[..., 0]
            wv, dwv, d2wv = w(r), dw(r), d2w(r)
            sin = np.sin(x[..., 1:n - 1])  # colatitudes only enter the products
            cos = np.cos(x[..., 1:n - 1])
            out_g = np.zeros(base + (n, n))
            out_g[..., 0, 0] = 1.0
            out_dg = np.zeros(base + (n, n, n)) if order >= 1 else None
            out_d2g = np.zeros(base + (n, n, n, n)) if order >= 2 else None
            w2 = wv * wv
            for i in range(1, n):
                # A = prod of sin^2 over colatitude slots 1..i-1
                cols = list(range(1, i))
                A = np.ones(base)
                for j in cols:
                    A = A * sin[..., j - 1] ** 2
                out_g[..., i, i] = w2 * A
                if order < 1:
                    continue
                dA = {}
                for m in cols:
                    t = 2.0 * sin[..., m - 1] * cos[..., m - 1]
                    for j in cols:
                        if j != m:
                            t = t * sin[..., j - 1] ** 2
                    dA[m] = t
                out_dg[..., 0, i, i] = 2.0 * wv * dwv * A
                for m in cols:
                    out_dg[..., m, i, i] = w2 * dA[m]
                if order < 2:
                    continue
                out_d2g[..., 0, 0, i, i] = 2.0 * (dwv * dwv + wv * d2wv) * A
                for m in cols:
                    v = 2.0 * wv * dwv * dA[m]
                    out_d2g[..., 0, m, i, i] = v
                    out_d2g[..., m, 0, i, i] = v
                for m in cols:
                    for l in cols:
                        if m == l:
                            t = 2.0 * np.cos(2.0 * x[..., m])
                            for j in cols:
                                if j != m:
                                    t = t * sin[..., j - 1] ** 2
                        else:
                            t = (2.0 * sin[..., m - 1] * cos[..., m - 1]
                                 * 2.0 * sin[..., l - 1] * cos[..., l - 1])
                            for j in cols:
                                if j != m and j != l:
                                    t = t * sin[..., j - 1] ** 2
                        out_d2g[..., m, l, i, i] = w2 * t
            return out_g, out_dg, out_d2g

        def g(x):
            return _assemble(x, 0)[0]

        def dg(x):
            return _assemble(x, 1)[1]

        def d2g(x):
            return _assemble(x, 2)[2]

        return MetricField(n, box, g, dg, d2g, warp=(w, dw, d2w))

    @staticmethod
    def from_exprs(entries, var_names, domain=None):
        """Metric from an n x n array of Expr entries over named chart variables.

        First and second derivatives are produced symbolically once and
        compiled to vectorized callables.
        """
        entries = [[e for e in row] for row in entries]
        n = len(entries)
        names = list(var_names)
        if len(names) != n:
            raise ValueError("need one variable name per chart axis")
        for row in entries:
            if len(row) != n:
                raise ValueError("entries must be square")
        for i in range(n):
            for j in range(n):
                if entries[i][j] != entries[j][i]:
                    raise ValueError("metric entries must be symmetric")
                extra = free_variables(entries[i][j]) - set(names)
                if extra:
                    raise ValueError(f"entry ({i},{j}) uses unknown variables {sorted(extra)}")
        d1 = [[[diff(entries[i][j], nm) for j in range(n)] for i in range(n)] for nm in names]
        d2 = [[[[diff(d1[k][i][j], nm) for j in range(n)] for i in range(n)]
               for k in range(n)] for nm in names]
        c0 = [[compile_expr(entries[i][j], names) for j in range(n)] for i in range(n)]
        c1 = [[[compile_expr(d1[k][i][j], names) for j in range(n)] for i in range(n)]
              for k in range(n)]
        c2 = [[[[compile_expr(d2[l][k][i][j], names) for j in range(n)] for i in range(n)]
               for k in range(n)] for l in range(n)]

        def g(x):
            x = _as_points(x, n)
            cols = [x[..., a] for a in range(n)]
            out = np.empty(x.shape[:-1] + (n, n))
            for i in range(n):
                for j in range(n):
                    out[..., i, j] = c0[i][j](*cols)
            return out

        def dg(x):
            x = _as_points(x, n)
            cols = [x[..., a] for a in range(n)]
            out = np.empty(x.shape[:-1] + (n, n, n))
            for k in range(n):
                for i in range(n):
                    for j in range(n):
                        out[..., k, i, j] = c1[k][i][j](*cols)
            return out

        def d2g(x):
            x = _as_points(x, n)
            cols = [x[..., a] for a in range(n)]
            out = np.empty(x.shape[:-1] + (n, n, n, n))
            for l in range(n):
                for k in range(n):
                    for i in range(n):
                        for j in range(n):
                            out[..., l, k, i, j] = c2[l][k][i][j](*cols)
            return out

        return MetricField(n, domain or Box.unbounded(n), g, dg, d2g)


@dataclass(frozen=True)
class DensityField:
    """Scalar density f with exact coordinate gradient and Hessian."""

    dim: int
    value: object
    grad: object
    hess: object
    radial_profile: tuple = None  # (phi, dphi, d2phi) of geodesic distance, if radial
    is_zero: bool = False

    @staticmethod
    def zero(dim):
        def value(x):
            x = _as_points(x, dim)
            return np.zeros(x.shape[:-1])

        def grad(x):
            x = _as_points(x, dim)
            return np.zeros(x.shape[:-1] + (dim,))

        def hess(x):
            x = _as_points(x, dim)
            return np.zeros(x.shape[:-1] + (dim, dim))

        return DensityField(dim, value, grad, hess,
                            radial_profile=(lambda r: np.zeros_like(r),) * 3,
                            is_zero=True)

    @staticmethod
    def radial_cartesian(dim, phi, dphi, d2phi):
        """f(x) = phi(|x|) on a Cartesian chart.

        Requires dphi(0) = 0 for smoothness at the origin; the
        transverse Hessian term dphi/rho is continued by d2phi there.
        """

        def value(x):
            x = _as_points(x, dim)
            return phi(np.linalg.norm(x, axis=-1))

        def grad(x):
            x = _as_points(x, dim)
            rho = np.linalg.norm(x, axis=-1)
            safe = np.where(rho > 0.0, rho, 1.0)
            return (dphi(rho) / safe)[..., None] * x

        def hess(x):
            x = _as_points(x, dim)
            rho = np.linalg.norm(x, axis=-1)
            safe = np.where(rho > 0.0, rho, 1.0)
            xhat = x / safe[..., None]
            rr = xhat[..., :, None] * xhat[..., None, :]
            eye = np.eye(dim)
            ratio = np.where(rho > 0.0, dphi(rho) / safe, d2phi(rho))
            return (d2phi(rho)[..., None, None] * rr
                    + ratio[..., None, None] * (eye - rr))

        return DensityField(dim, value, grad, hess, radial_profile=(phi, dphi, d2phi))

    @staticmethod
    def radial_chart(dim, phi, dphi, d2phi):
        """f = phi(r) on a polar chart whose first coordinate is r."""

        def value(x):
            x = _as_points(x, dim)
            return phi(x[..., 0])

        def grad(x):
            x = _as_points(x, dim)
            out = np.zeros(x.shape[:-1] + (dim,))
            out[..., 0] = dphi(x[..., 0])
            return out

        def hess(x):
            x = _as_points(x, dim)
            out = np.zeros(x.shape[:-1] + (dim, dim))
            out[..., 0, 0] = d2phi(x[..., 0])
            return out

        return DensityField(dim, value, grad, hess, radial_profile=(phi, dphi, d2phi))

    @staticmethod
    def from_expr(dim, expr, var_names, chart="cartesian"):
        """Density from an Expr; radial when expr depends on one radial variable.

        For chart="cartesian" with a single variable named "rho" the
        expression is treated as a radial profile phi(|x|); for
        chart="radial" with variable "r" it is phi(r) in a polar chart.
        Otherwise var_names must name every chart axis and the
        derivatives are taken per axis.
        """
        if chart == "cartesian" and list(var_names) == ["rho"]:
            d1 = diff(expr, "rho")
            d2 = diff(d1, "rho")
            fns = [compile_expr(e, ["rho"]) for e in (expr, d1, d2)]
            return DensityField.radial_cartesian(dim, *fns)
        if chart == "radial" and list(var_names) == ["r"]:
            d1 = diff(expr, "r")
            d2 = diff(d1, "r")
            fns = [compile_expr(e, ["r"]) for e in (expr, d1, d2)]
            return DensityField.radial_chart(dim, *fns)
        names = list(var_names)
        if len(names) != dim:
            raise ValueError("need one variable name per chart axis")
        c0 = compile_expr(expr, names)
        grads = [diff(expr, nm) for nm in names]
        c1 = [compile_expr(e, names) for e in grads]
        c2 = [[compile_expr(diff(grads[i], nm), names) for nm in names] for i in range(dim)]

        def value(x):
            x = _as_points(x, dim)
            out = np.asarray(c0(*[x[..., a] for a in range(dim)]), dtype=float)
            # compiled constant subtrees collapse to scalars
            if out.shape != x.shape[:-1]:
                out = np.broadcast_to(out, x.shape[:-1]).copy()
            return out

        def grad(x):
            x = _as_points(x, dim)
            cols = [x[..., a] for a in range(dim)]
            out = np.empty(x.shape[:-1] + (dim,))
            for i in range(dim):
                out[..., i] = c1[i](*cols)
            return out

        def hess(x):
            x = _as_points(x, dim)
            cols = [x[..., a] for a in range(dim)]
            out = np.empty(x.shape[:-1] + (dim, dim))
            for i in range(dim):
                for j in range(dim):
                    out[..., i, j] = c2[i][j](*cols)
            return out

        return DensityField(dim, value, grad, hess)


@dataclass(frozen=True)
class Smms:
    """Smooth metric measure space (M, g, e^{-f} dvol) with weight N.

    weight is a positive real or INFINITE.  The comparison exponent k
    is n + N for finite weight and n otherwise.  Non-integer finite
    weights are accepted as the real-exponent extension and flagged so
    reports can say so.
    """

    metric: MetricField
    density: DensityField
    weight: float
    name: str = ""
    chart: str = "cartesian"  # "cartesian" or "radial" (polar, first axis r)
    center: tuple = None      # default base point p0 (None means chart center)

    def __post_init__(self):
        if self.metric.dim != self.density.dim:
            raise ValueError("metric and density dimensions differ")
        if self.chart not in ("cartesian", "radial"):
            raise ValueError(f"unknown chart kind {self.chart!r}")
        if not (self.weight == INFINITE or self.weight > 0.0):
            raise ValueError("weight must be positive or INFINITE")

    @property
    def dim(self):
        return self.metric.dim

    @property
    def k(self):
        """Comparison exponent: n + N (finite weight) or n (infinite)."""
        if self.weight == INFINITE:
            return float(self.dim)
        return float(self.dim + self.weight)

    @property
    def finite_weight(self):
        return self.weight != INFINITE

    @property
    def real_weight_extension(self):
        """True when N is finite and not an integer (Remark-style extension)."""
        return self.finite_weight and self.weight != int(self.weight)

    def base_point(self):
        """Default p0: stored center, or the origin of a Cartesian chart."""
        if self.center is not None:
            return np.asarray(self.center, dtype=float)
        if self.chart == "cartesian":
            return np.zeros(self.dim)
        return None
