"""Transport of the weighted volume element along normal geodesics.

Each ray carries the state

    u      chart position of the geodesic            (n,)
    v      velocity (unit speed)                     (n,)
    E      parallel orthonormal frame of v-perp      (n-1, n)
    S      Riccati matrix in that frame              (n-1, n-1)
    logA   log of the transverse Jacobian determinant
    V      running weighted volume  int_0^t e^{-f} A ds

evolving by

    u' = v,   v'^k = -Gamma^k_ab v^a v^b,   E_a'^k = -Gamma^k_ab v^a E_a^b,
    S' = -S^2 - Rt,          Rt_ab = g(E_a, R(E_b, v) v),
    (log A)' = tr S,         V' = e^{-f(u)} A.

m(t) = tr S is the mean curvature of the distance level sets taken so
that A'/A = m; A_f = e^{-f(u(t))} A is the weighted volume element and
theta(t) = A_f / (1 + H_f t/(k-1))^{k-1} the model-normalized ratio.

All rays in a batch share the step sequence of an embedded
Dormand-Prince 4(5) pair; the error norm is the worst ray, so the ray
closest to a focal point controls the step.  A ray freezes (stops
advancing, keeps its last state) when its Jacobian collapses
(A <= focal_area_tol), its level-set curvature blows up
(|m| >= focal_m_tol), it leaves the chart, or it reaches a per-ray
target radius.  Blow-down and blow-up freezes record focal_r.

Batches are cut into fixed-size chunks integrated independently;
SMMS_THREADS (or opts.threads) maps chunks onto a thread pool.  Chunk
boundaries never depend on the thread count, so results are bit-stable
regardless of parallelism.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .curvature import christoffel_with_derivative, riemann_from_christoffel
from .quadrature import angular_grid, sphere_point, sphere_point_derivative

__all__ = [
    "TransportOptions", "TransportBatch", "RadialTransport", "TransportError",
    "GeodesicPath", "transport_rays", "radial_transport", "point_transport",
    "integrate_geodesic",
]

# ray-batch granularity: one adaptive solve per chunk, so larger chunks
# amortize per-step overhead while a fixed size keeps results
# independent of the thread count
_CHUNK = 4096

# Dormand-Prince 4(5) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4

FROZEN_NONE = 0
FROZEN_FOCAL_AREA = 1
FROZEN_FOCAL_M = 2
FROZEN_EXIT = 3
FROZEN_NONFINITE = 4
FROZEN_TARGET = 5


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True)
class TransportOptions:
    rtol: float = 1e-9
    atol: float = 1e-12
    focal_area_tol: float = 1e-10
    focal_m_tol: float = 1e10
    max_steps: int = 2_000_000
    threads: int = None  # None: read SMMS_THREADS, default 1

    def resolved_threads(self):
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get("SMMS_THREADS", "").strip()
        return max(1, int(env)) if env else 1


def _state_layout(n):
    m = n - 1
    sizes = {"u": n, "v": n, "E": m * n, "S": m * m, "logA": 1, "V": 1}
    offs, pos = {}, 0
    for key, size in sizes.items():
        offs[key] = (pos, pos + size)
        pos += size
    return offs, pos


class _RiccatiSystem:
    """RHS and freeze rules for the full volume-element transport."""

    def __init__(self, smms, opts):
        self.smms = smms
        self.metric = smms.metric
        self.density = smms.density
        self.n = smms.dim
        self.offs, self.width = _state_layout(self.n)
        self.opts = opts

    def unpack(self, Y):
        n, m = self.n, self.n - 1
        o = self.offs
        u = Y[..., o["u"][0]:o["u"][1]]
        v = Y[..., o["v"][0]:o["v"][1]]
        E = Y[..., o["E"][0]:o["E"][1]].reshape(Y.shape[:-1] + (m, n))
        S = Y[..., o["S"][0]:o["S"][1]].reshape(Y.shape[:-1] + (m, m))
        logA = Y[..., o["logA"][0]]
        V = Y[..., o["V"][0]]
        return u, v, E, S, logA, V

    def pack(self, u, v, E, S, logA, V):
        parts = [u, v, E.reshape(E.shape[:-2] + (-1,)),
                 S.reshape(S.shape[:-2] + (-1,)),
                 logA[..., None], V[..., None]]
        return np.concatenate(parts, axis=-1)

    def rhs(self, t, Y):
        u, v, E, S, logA, V = self.unpack(Y)
        if self.metric.flat_chart:
            du = v
            dv = np.zeros_like(v)
            dE = np.zeros_like(E)
            dS = -np.matmul(S, S)
        else:
            gamma, dgamma = christoffel_with_derivative(self.metric, u, validate=False)
            du = v
            # gv[k, i] = gamma^k_ij v^j;  vg[k, j] = gamma^k_ij v^i
            gv = np.matmul(gamma, v[..., None, :, None])[..., 0]
            dv = -np.matmul(gv, v[..., :, None])[..., 0]
            vg = np.matmul(v[..., None, None, :], gamma)[..., 0, :]
            dE = -np.matmul(E, vg.swapaxes(-1, -2))
            R = riemann_from_christoffel(gamma, dgamma)
            # tidal operator Rv[p, m] = R^p_smn v^s v^n
            Rn = np.matmul(R, v[..., None, None, :, None])[..., 0]
            Rv = np.matmul(v[..., None, None, :], Rn)[..., 0, :]
            g = self.metric.g(u)
            RvE = np.matmul(E, Rv.swapaxes(-1, -2))
            Rt = np.matmul(np.matmul(E, g), RvE.swapaxes(-1, -2))
            dS = -np.matmul(S, S) - Rt
        dlogA = np.trace(S, axis1=-2, axis2=-1)
        with np.errstate(over="ignore", under="ignore"):
            dV = np.exp(np.clip(-self.density.value(u) + logA, -745.0, 700.0))
        return self.pack(du, dv, dE, dS, dlogA, dV)

    def freeze_codes(self, Y):
        """Per-ray freeze reason (0 = keep going) for post-step states."""
        u, v, E, S, logA, V = self.unpack(Y)
        codes = np.zeros(Y.shape[0], dtype=np.int8)
        finite = np.all(np.isfinite(Y), axis=-1)
        codes[~finite] = FROZEN_NONFINITE
        inside = self.metric.chart_domain.contains(u)
        codes[finite & ~inside] = FROZEN_EXIT
        m = np.trace(S, axis1=-2, axis2=-1)
        live = codes == 0
        codes[live & (logA <= math.log(self.opts.focal_area_tol))] = FROZEN_FOCAL_AREA
        live = codes == 0
        codes[live & (np.abs(m) >= self.opts.focal_m_tol)] = FROZEN_FOCAL_M
        return codes


def _initial_step(t0, t_end, Y, dY, rtol, atol):
    scale = atol + rtol * np.abs(Y)
    d0 = np.sqrt(np.mean((Y / scale) ** 2))
    d1 = np.sqrt(np.mean((dY / scale) ** 2))
    h = 0.01 * d0 / d1 if d1 > 1e-30 else 1e-6
    return min(h, (t_end - t0) * 0.1)


def _rk45_chunk(system, Y, t0, t_grid, t_stop, opts):
    """Integrate one chunk; returns (snaps, valid, freeze_t, codes, nsteps)."""
    R = Y.shape[0]
    T = len(t_grid)
    snaps = np.empty((R, T) + Y.shape[1:])
    valid = np.zeros((R, T), dtype=bool)
    freeze_t = np.full(R, np.nan)
    codes = np.zeros(R, dtype=np.int8)
    active = np.ones(R, dtype=bool)
    rtol, atol = opts.rtol, opts.atol

    # freeze any rays that violate conditions at t0 (e.g. start outside)
    start_codes = system.freeze_codes(Y)
    newly = (start_codes != 0) & (start_codes != FROZEN_TARGET)
    codes[newly] = start_codes[newly]
    freeze_t[newly] = t0
    active &= ~newly

    t = t0
    k1 = np.zeros_like(Y)
    if np.any(active):
        k1[active] = system.rhs(t, Y[active])
    h = _initial_step(t0, t_grid[-1], Y[active], k1[active], rtol, atol) \
        if np.any(active) else 1.0
    ci = 0
    nsteps = 0
    tiny = lambda s: 1e-12 * max(1.0, abs(s))

    while ci < T:
        if t_stop is not None:
            reached = active & (t_stop <= t + tiny(t))
            if np.any(reached):
                codes[reached] = FROZEN_TARGET
                freeze_t[reached] = t_stop[reached]
                active &= ~reached
        if not np.any(active):
            break
        t_target = t_grid[ci]
        h_eff = min(h, t_target - t)
        if t_stop is not None:
            h_eff = min(h_eff, np.min(t_stop[active]) - t)
        h_eff = max(h_eff, 1e-14 * max(1.0, abs(t)))

        idx = np.where(active)[0]
        Ya = Y[idx]
        ks = [k1[idx]]
        bad_step = False
        for s in range(1, 7):
            ys = Ya + h_eff * sum(a * k for a, k in zip(_A[s], ks))
            if not np.all(np.isfinite(ys)):
                bad_step = True
                break
            ks.append(system.rhs(t + _C[s] * h_eff, ys))
        if not bad_step:
            y5 = ys  # stage 7 input is the 5th-order solution (FSAL)
            err = h_eff * sum(e * k for e, k in zip(_E, ks))
            scale = atol + rtol * np.maximum(np.abs(Ya), np.abs(y5))
            with np.errstate(invalid="ignore"):
                enorm = np.sqrt(np.mean((err / scale) ** 2, axis=-1))
            worst = np.max(enorm) if enorm.size else 0.0
        if bad_step or not np.isfinite(worst):
            # a ray produced non-finite trial values; shrink, then cut it loose
            if h_eff > 1e-12 * max(1.0, abs(t)):
                h = h_eff * 0.25
                nsteps += 1
                if nsteps > opts.max_steps:
                    raise TransportError("step limit exceeded")
                continue
            if bad_step:
                sick = ~np.all(np.isfinite(ys), axis=-1)
                if not np.any(sick):
                    sick[:] = True
            else:
                sick = ~np.isfinite(enorm)
            codes[idx[sick]] = FROZEN_NONFINITE
            freeze_t[idx[sick]] = t
            active[idx[sick]] = False
            continue
        if worst > 1.0:
            h = h_eff * max(0.2, 0.9 * worst ** -0.25)
            nsteps += 1
            if nsteps > opts.max_steps:
                raise TransportError("step limit exceeded")
            continue

        # accepted
        t_new = t + h_eff
        if abs(t_new - t_target) <= tiny(t_target):
            t_new = t_target
        Y[idx] = y5
        k1[idx] = ks[6]
        prev_t = t
        t = t_new
        nsteps += 1
        if nsteps > opts.max_steps:
            raise TransportError("step limit exceeded")

        step_codes = system.freeze_codes(Y[idx])
        for local, code in enumerate(step_codes):
            ray = idx[local]
            if code in (FROZEN_EXIT, FROZEN_NONFINITE):
                # revert to the last state inside the chart
                Y[ray] = Ya[local]
                k1[ray] = ks[0][local]
                codes[ray] = code
                freeze_t[ray] = prev_t
                active[ray] = False
            elif code != FROZEN_NONE:
                codes[ray] = code
                freeze_t[ray] = t
                active[ray] = False
        while ci < T and t >= t_grid[ci] - tiny(t_grid[ci]):
            snaps[:, ci] = Y
            valid[:, ci] = np.isnan(freeze_t) | (freeze_t >= t_grid[ci] - tiny(t_grid[ci]))
            ci += 1

        grow = 0.9 * worst ** -0.2 if worst > 1e-14 else 5.0
        h = h_eff * min(5.0, max(0.2, grow))

    while ci < T:
        snaps[:, ci] = Y
        valid[:, ci] = np.isnan(freeze_t) | (freeze_t >= t_grid[ci] - tiny(t_grid[ci]))
        ci += 1
    return snaps, valid, freeze_t, codes, nsteps


@dataclass(frozen=True)
class GeodesicPath:
    """Sampled unit-speed geodesic; energy is |v|_g at each sample."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    energy: np.ndarray
    exited: bool = False
    exit_t: float = None


@dataclass(frozen=True)
class RadialTransport:
    """One ray's transported quantities, r_grid[0] = 0 with A(0) = 1.

    Rows stop before the focal radius (A blow-down or |m| blow-up) or a
    chart exit; focal_r / exit_r record where.  theta is the
    model-normalized ratio A_f / (1 + H_f0 r/(k-1))^{k-1}.
    """

    geodesic: GeodesicPath
    r_grid: np.ndarray
    shape: np.ndarray
    m: np.ndarray
    m_f: np.ndarray
    A: np.ndarray
    A_f: np.ndarray
    theta: np.ndarray
    V: np.ndarray
    H_f0: float
    f0: float
    k: float
    focal_r: float = None   # None when no blow-down/up detected
    exit_r: float = None    # None unless the geodesic left the chart

    @property
    def x(self):
        return self.geodesic.x


class TransportBatch:
    """Batched transport results over a shared checkpoint grid."""

    def __init__(self, smms, t_grid, snaps, valid, freeze_t, codes, system,
                 H_f0, f0, init, t0, weights=None, nsteps=0):
        self.smms = smms
        self.k = smms.k
        self.t = np.asarray(t_grid)
        self.t0 = t0
        self.init = init  # (x0, v0, S0, logA0, V0) before integration
        self.valid = valid
        self.codes = codes
        self.freeze_t = freeze_t
        self.weights = weights
        self.nsteps = nsteps
        self.H_f0 = np.asarray(H_f0, dtype=float)
        self.f0 = np.asarray(f0, dtype=float)
        u, v, E, S, logA, V = system.unpack(snaps)
        self.x = u
        self.v = v
        self.shape = S
        self.m = np.einsum("...aa->...", S)
        self.logA = logA
        self.V = V
        f = smms.density.value(u)
        df = smms.density.grad(u)
        self.f = f
        self.dfdr = np.einsum("...i,...i->...", v, df)
        self.m_f = self.m - self.dfdr
        self.A = np.exp(logA)
        self.A_f = np.exp(-f + logA)

    @property
    def rays(self):
        return self.m.shape[0]

    def focal_r(self, i=None):
        focal = np.where(
            (self.codes == FROZEN_FOCAL_AREA) | (self.codes == FROZEN_FOCAL_M),
            self.freeze_t, np.nan)
        return focal if i is None else (None if np.isnan(focal[i]) else float(focal[i]))

    def exit_r(self, i=None):
        ex = np.where(self.codes == FROZEN_EXIT, self.freeze_t, np.nan)
        return ex if i is None else (None if np.isnan(ex[i]) else float(ex[i]))

    def theta(self):
        """theta(t) = A_f / (1 + H_f t/(k-1))^{k-1} per ray."""
        k = self.k
        base = 1.0 + self.H_f0[:, None] * self.t[None, :] / (k - 1.0)
        with np.errstate(invalid="ignore"):
            return self.A_f / np.where(base > 0.0, base, np.nan) ** (k - 1.0)

    def ray(self, i):
        """Single-ray view: initial row at t0 prepended, frozen rows cut."""
        keep = self.valid[i]
        x0, v0, S0, logA0, V0 = (a[i] for a in self.init)
        t = np.concatenate([[self.t0], self.t[keep]])
        x = np.concatenate([x0[None], self.x[i, keep]])
        v = np.concatenate([v0[None], self.v[i, keep]])
        S = np.concatenate([S0[None], self.shape[i, keep]])
        m0 = float(np.trace(S0))
        m = np.concatenate([[m0], self.m[i, keep]])
        m_f = np.concatenate([[self.H_f0[i]], self.m_f[i, keep]])
        A0 = math.exp(logA0)
        A = np.concatenate([[A0], self.A[i, keep]])
        A_f0 = math.exp(-self.f0[i] + logA0)
        A_f = np.concatenate([[A_f0], self.A_f[i, keep]])
        base0 = 1.0 + self.H_f0[i] * self.t0 / (self.k - 1.0)
        theta = np.concatenate([[A_f0 / base0 ** (self.k - 1.0)],
                                self.theta()[i, keep]])
        V = np.concatenate([[V0], self.V[i, keep]])
        gmat = self.smms.metric.g(x)
        energy = np.sqrt(np.einsum("...i,...ij,...j->...", v, gmat, v))
        exit_r = self.exit_r(i)
        geo = GeodesicPath(t=t, x=x, v=v, energy=energy,
                           exited=exit_r is not None, exit_t=exit_r)
        return RadialTransport(
            geodesic=geo, r_grid=t, shape=S, m=m, m_f=m_f, A=A, A_f=A_f,
            theta=theta, V=V, H_f0=float(self.H_f0[i]), f0=float(self.f0[i]),
            k=self.k, focal_r=self.focal_r(i), exit_r=exit_r)


def transport_rays(smms, x0, v0, E0, S0, logA0, V0, t0, t_grid, H_f0, f0,
                   opts=None, t_stop=None, weights=None):
    """Low-level batched transport from explicit initial data.

    Shapes: x0, v0 (R, n); E0 (R, n-1, n); S0 (R, n-1, n-1); logA0, V0,
    H_f0, f0 (R,).  t_grid must be strictly increasing with
    t_grid[0] > t0.  Returns a TransportBatch.
    """
    opts = opts or TransportOptions()
    system = _RiccatiSystem(smms, opts)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a nonempty 1-D array")
    if np.any(np.diff(t_grid) <= 0.0) or t_grid[0] <= t0:
        raise ValueError("t_grid must be strictly increasing and start after t0")
    Y = system.pack(np.asarray(x0, float), np.asarray(v0, float),
                    np.asarray(E0, float), np.asarray(S0, float),
                    np.asarray(logA0, float), np.asarray(V0, float))
    R = Y.shape[0]
    stops = None if t_stop is None else np.asarray(t_stop, dtype=float)

    chunks = [(lo, min(lo + _CHUNK, R)) for lo in range(0, R, _CHUNK)]

    def run(bounds):
        lo, hi = bounds
        sub = None if stops is None else stops[lo:hi]
        return _rk45_chunk(system, Y[lo:hi].copy(), t0, t_grid, sub, opts)

    threads = opts.resolved_threads()
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]

    snaps = np.concatenate([r[0] for r in results], axis=0)
    valid = np.concatenate([r[1] for r in results], axis=0)
    freeze_t = np.concatenate([r[2] for r in results], axis=0)
    codes = np.concatenate([r[3] for r in results], axis=0)
    nsteps = sum(r[4] for r in results)
    init = (np.asarray(x0, float), np.asarray(v0, float),
            np.asarray(S0, float), np.asarray(logA0, float),
            np.asarray(V0, float))
    return TransportBatch(smms, t_grid, snaps, valid, freeze_t, codes, system,
                          H_f0, f0, init, t0, weights=weights, nsteps=nsteps)


def _orthonormal_normal_frame(g, nu):
    """Complete unit nu to a g-orthonormal basis of nu-perp (Gram-Schmidt)."""
    n = len(nu)
    vecs = [nu]
    for i in range(n):
        cand = np.zeros(n)
        cand[i] = 1.0
        for w in vecs:
            cand = cand - (cand @ g @ w) * w
        norm2 = cand @ g @ cand
        if norm2 > 1e-20:
            vecs.append(cand / math.sqrt(norm2))
        if len(vecs) == n:
            break
    if len(vecs) < n:
        raise ValueError("frame completion failed")
    return np.stack(vecs[1:])


def radial_transport(smms, start, r_max=None, tol=None, t_grid=None,
                     opts=None, E0=None):
    """Transport from one surface point along its outward normal.

    Parameters
    ----------
    smms : Smms
    start : (x, nu, S0) or (x, nu, S0, f_x) with x the chart point, nu
        the g-unit outward normal, S0 the symmetric (n-1, n-1) shape
        operator in the frame E0 (a g-orthonormal basis of nu-perp,
        completed automatically when omitted; for isotropic S0 the
        choice is immaterial), and f_x the density at x (evaluated
        when omitted).
    r_max, t_grid : checkpoint grid (t_grid wins; else 512 uniform
        points on (0, r_max]).
    tol : focal-detection threshold; the ray stops where A <= tol or
        |m| >= 1/tol (default 1e-10).

    Returns a RadialTransport on [0, r_max] truncated at the focal
    radius or chart exit.
    """
    if len(start) == 3:
        x, nu, S0 = start
        f_x = None
    else:
        x, nu, S0, f_x = start
    opts = opts or TransportOptions()
    if tol is not None:
        opts = replace(opts, focal_area_tol=tol, focal_m_tol=1.0 / tol)
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    S0 = np.asarray(S0, dtype=float)
    if not np.allclose(S0, S0.T, atol=1e-9):
        raise ValueError("S0 must be symmetric")
    g = smms.metric.g(x)
    speed = float(nu @ g @ nu)
    if abs(speed - 1.0) > 1e-6:
        raise ValueError("nu must be g-unit")
    if t_grid is None:
        if r_max is None:
            raise ValueError("need r_max or t_grid")
        t_grid = np.linspace(0.0, r_max, 513)[1:]
    if E0 is None:
        E0 = _orthonormal_normal_frame(g, nu)
    f_x = float(smms.density.value(x)) if f_x is None else float(f_x)
    dfdr0 = float(nu @ smms.density.grad(x))
    H_f0 = float(np.trace(S0)) - dfdr0
    batch = transport_rays(
        smms, x[None], nu[None], E0[None], S0[None],
        np.zeros(1), np.zeros(1), 0.0, t_grid, np.array([H_f0]),
        np.array([f_x]), opts=opts)
    return batch.ray(0)


def point_transport(smms, p0, t_grid, orders=None, opts=None, eps=1e-4,
                    t_stop_fn=None):
    """Radial transport of a full direction grid from a base point.

    The Riccati datum at a point is singular, so rays are seeded at
    t = eps with the Euclidean asymptotics S = (1/eps) I,
    A = eps^{n-1}, V = e^{-f(p0)} eps^n / n.

    For a Cartesian chart p0 is any chart point and directions come
    from the angular grid mapped through the Cholesky factor of
    g(p0); for a radial (polar) chart p0 must be None (the chart
    center) and rays start at (eps, angles) with v = d/dr.

    t_stop_fn, when given, maps direction angles (Q, n-1) to per-ray
    stopping radii (star-shaped boundary truncation).

    Returns a TransportBatch whose `weights` are the solid-angle
    quadrature weights (summing to sphere_area(n)).
    """
    opts = opts or TransportOptions()
    n = smms.dim
    # the seed area element eps^{n-1} must sit above the blow-down
    # detector, or every ray freezes at t0 (bites at n >= 4)
    seed_area = eps ** (n - 1)
    if opts.focal_area_tol > seed_area * 1e-2:
        opts = replace(opts, focal_area_tol=seed_area * 1e-2)
    angles, w = angular_grid(n, orders)
    Q = angles.shape[0]
    if smms.chart == "cartesian":
        p0 = smms.base_point() if p0 is None else np.asarray(p0, dtype=float)
        g0 = smms.metric.g(p0)
        # rows map through L^{-T}: Euclidean-orthonormal frames become
        # g(p0)-orthonormal ones
        Linv = np.linalg.inv(np.linalg.cholesky(g0))
        om = sphere_point(angles)
        dom = sphere_point_derivative(angles)
        dirs = om @ Linv
        x0 = p0[None, :] + eps * dirs
        v0 = dirs
        scale = np.linalg.norm(dom, axis=-1)
        E0 = (dom / scale[..., None]) @ Linv
        f_p0 = float(smms.density.value(p0))
    elif smms.chart == "radial":
        if p0 is not None:
            raise ValueError("radial-chart models transport from the chart center")
        warp = smms.metric.warp
        if warp is None or abs(float(np.asarray(warp[0](np.zeros(1)))[0])) > 1e-9:
            raise ValueError(
                "radial chart does not close at r = 0: no center to transport from")
        x0 = np.concatenate([np.full((Q, 1), eps), angles], axis=1)
        v0 = np.zeros((Q, n))
        v0[:, 0] = 1.0
        g_eps = smms.metric.g(x0)
        E0 = np.zeros((Q, n - 1, n))
        for a in range(1, n):
            E0[:, a - 1, a] = 1.0 / np.sqrt(g_eps[:, a, a])
        phi = smms.density.radial_profile
        if phi is None:
            raise ValueError("radial-chart density must expose a radial profile")
        f_p0 = float(phi[0](np.zeros(1))[0])
    else:
        raise ValueError(f"unsupported chart {smms.chart!r}")

    S0 = np.broadcast_to(np.eye(n - 1) / eps, (Q, n - 1, n - 1)).copy()
    logA0 = np.full(Q, (n - 1) * math.log(eps))
    V0 = np.full(Q, math.exp(-f_p0) * eps ** n / n)
    H_f0 = np.full(Q, (n - 1) / eps)
    f0 = np.full(Q, f_p0)
    t_stop = None if t_stop_fn is None else np.asarray(t_stop_fn(angles), dtype=float)
    return transport_rays(smms, x0, v0, E0, S0, logA0, V0, eps,
                          np.asarray(t_grid, dtype=float), H_f0, f0,
                          opts=opts, t_stop=t_stop, weights=w)


# ---------------------------------------------------------------------------
# Plain geodesics (no volume element)

class _GeodesicSystem:
    """Stripped system: position and velocity only."""

    def __init__(self, metric):
        self.metric = metric
        self.n = metric.dim

    def rhs(self, t, Y):
        n = self.n
        u, v = Y[..., :n], Y[..., n:]
        if self.metric.flat_chart:
            return np.concatenate([v, np.zeros_like(v)], axis=-1)
        gamma = christoffel_with_derivative(self.metric, u, validate=False)[0]
        dv = -np.einsum("...kij,...i,...j->...k", gamma, v, v)
        return np.concatenate([v, dv], axis=-1)

    def freeze_codes(self, Y):
        codes = np.zeros(Y.shape[0], dtype=np.int8)
        finite = np.all(np.isfinite(Y), axis=-1)
        codes[~finite] = FROZEN_NONFINITE
        inside = self.metric.chart_domain.contains(Y[..., :self.n])
        codes[finite & ~inside] = FROZEN_EXIT
        return codes


def integrate_geodesic(metric, x0, v0, r_max, tol=1e-9, samples=256):
    """Unit-speed geodesic from x0 with initial velocity v0.

    v0 must be g-unit within tol.  Returns a GeodesicPath sampled on a
    uniform grid; if the path leaves the chart before r_max it is
    truncated and flagged.
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    g0 = metric.g(x0)
    speed = float(v0 @ g0 @ v0)
    if abs(speed - 1.0) > max(tol, 1e-12) * 10.0 + 1e-9:
        raise ValueError("v0 must be g-unit")
    if r_max <= 0.0:
        raise ValueError("r_max must be positive")
    system = _GeodesicSystem(metric)
    opts = TransportOptions(rtol=tol, atol=tol * 1e-3, threads=1)
    t_grid = np.linspace(0.0, r_max, samples + 1)[1:]
    Y0 = np.concatenate([x0, v0])[None, :]
    snaps, valid, freeze_t, codes, _ = _rk45_chunk(
        system, Y0.copy(), 0.0, t_grid, None, opts)
    n = metric.dim
    keep = valid[0]
    t = np.concatenate([[0.0], t_grid[keep]])
    xs = np.concatenate([x0[None], snaps[0, keep, :n]])
    vs = np.concatenate([v0[None], snaps[0, keep, n:]])
    gmat = metric.g(xs)
    energy = np.sqrt(np.einsum("...i,...ij,...j->...", vs, gmat, vs))
    exited = codes[0] == FROZEN_EXIT
    exit_t = float(freeze_t[0]) if exited else None
    return GeodesicPath(t=t, x=xs, v=vs, energy=energy, exited=exited,
                        exit_t=exit_t)
