"""Curvature kernels: Christoffel symbols, tidal operator, Ricci, Hessians.

Conventions (indices written left to right as stored):

    Gamma[..., k, i, j]        Gamma^k_ij, symmetric in (i, j)
    R[..., p, s, m, n]         R^p_smn = d_m Gamma^p_ns - d_n Gamma^p_ms
                                        + Gamma^p_ml Gamma^l_ns
                                        - Gamma^p_nl Gamma^l_ms
    Ric[..., s, n]             R^p_spn
    tidal (R_v)[..., p, m]     R^p_smn v^s v^n, the Jacobi operator R(., v)v

With this convention the unit round sphere has Ric = (n-1) g and the
tidal operator of a unit tangent on S^3 is the identity on v-perp,
i.e. sectional curvature enters with a positive sign.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .fields import INFINITE

__all__ = [
    "christoffel", "christoffel_with_derivative", "riemann",
    "riemann_from_christoffel", "curvature_operator", "ricci", "hessian",
    "bakry_emery", "min_generalized_eigenvalue",
]


def _zeros_like_points(metric, x, extra):
    x = metric.require_inside(x)
    return np.zeros(x.shape[:-1] + extra)


# the contractions below run inside the ODE right-hand side, once per
# integrator stage, on small batched tensors; spelled as matmul and
# axis permutations because einsum's dispatch overhead dominates at
# these sizes


def _symmetrized_dg(dg):
    """T_ijl = dg_ijl + dg_jil - dg_lij over the three trailing axes."""
    return dg + dg.swapaxes(-3, -2) - np.moveaxis(dg, -3, -1)


def _gamma_from(ginv, T):
    # gamma^k_ij = ginv^{kl} T_ijl / 2
    n = T.shape[-1]
    base = T.shape[:-3]
    flat = np.matmul(T.reshape(base + (n * n, n)), ginv.swapaxes(-1, -2))
    return 0.5 * np.moveaxis(flat.reshape(base + (n, n, n)), -1, -3)


def christoffel(metric, x):
    """Gamma^k_ij at x; shape (..., n, n, n) indexed [k, i, j]."""
    n = metric.dim
    if metric.flat_chart:
        return _zeros_like_points(metric, x, (n, n, n))
    x = metric.require_inside(x)
    ginv = np.linalg.inv(metric.g(x))
    return _gamma_from(ginv, _symmetrized_dg(metric.dg(x)))


def christoffel_with_derivative(metric, x, validate=True):
    """(Gamma, dGamma) with dGamma[..., m, k, i, j] = d_m Gamma^k_ij.

    validate=False skips the chart-domain check so ODE trial stages may
    probe slightly past the boundary (callables must stay evaluable).
    """
    n = metric.dim
    if metric.flat_chart:
        x = metric.require_inside(x) if validate else np.asarray(x, dtype=float)
        base = x.shape[:-1]
        return np.zeros(base + (n, n, n)), np.zeros(base + (n, n, n, n))
    x = metric.require_inside(x) if validate else np.asarray(x, dtype=float)
    g = metric.g(x)
    dg = metric.dg(x)
    d2g = metric.d2g(x)
    base = g.shape[:-2]
    ginv = np.linalg.inv(g)
    T = _symmetrized_dg(dg)
    gamma = _gamma_from(ginv, T)
    # d_m ginv^{kl} = -ginv^{ka} dg_mab ginv^{bl}
    dginv = -np.matmul(np.matmul(ginv[..., None, :, :], dg),
                       ginv[..., None, :, :])
    dT = _symmetrized_dg(d2g)
    # first piece: dginv^{mkl} T_ijl; second: ginv^{kl} dT_mijl
    first = np.matmul(dginv.reshape(base + (n * n, n)),
                      T.reshape(base + (n * n, n)).swapaxes(-1, -2))
    second = np.matmul(dT.reshape(base + (n * n * n, n)),
                       ginv.swapaxes(-1, -2))
    dgamma = 0.5 * (first.reshape(base + (n, n, n, n))
                    + np.moveaxis(second.reshape(base + (n, n, n, n)),
                                  -1, -3))
    return gamma, dgamma


def riemann_from_christoffel(gamma, dgamma):
    """Assemble R^p_smn from Gamma and its coordinate derivative."""
    n = gamma.shape[-1]
    base = gamma.shape[:-3]
    # d_m Gamma^p_ns, reordered to R[p, s, m, n]
    dpart = np.moveaxis(dgamma, (-3, -1, -4, -2), (-4, -3, -2, -1))
    # Gamma^p_ml Gamma^l_ns, assembled as [p, m] x [n, s] then reordered
    quad = np.matmul(gamma.reshape(base + (n * n, n)),
                     gamma.reshape(base + (n, n * n)))
    gpart = np.moveaxis(quad.reshape(base + (n, n, n, n)),
                        (-4, -1, -3, -2), (-4, -3, -2, -1))
    out = dpart + gpart
    return out - out.swapaxes(-2, -1)


def riemann(metric, x, validate=True):
    """Full curvature tensor R^p_smn at x; shape (..., n, n, n, n)."""
    n = metric.dim
    if metric.flat_chart:
        if validate:
            return _zeros_like_points(metric, x, (n, n, n, n))
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (n, n, n, n))
    gamma, dgamma = christoffel_with_derivative(metric, x, validate=validate)
    return riemann_from_christoffel(gamma, dgamma)


def curvature_operator(metric, x, v):
    """Tidal operator (R_v)^p_m = R^p_smn v^s v^n at x.

    Self-adjoint with respect to g; its g-trace on unit v is Ric(v, v).
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.linalg.norm(v, axis=-1) > 0.0):
        raise ValueError("zero direction vector")
    R = riemann(metric, x)
    return np.einsum("...psmn,...s,...n->...pm", R, v, v)


def ricci(metric, x):
    """Ricci tensor Ric_sn at x; shape (..., n, n)."""
    return np.einsum("...pspn->...sn", riemann(metric, x))


def hessian(density, metric, x):
    """Covariant Hessian of the density: d_i d_j f - Gamma^k_ij d_k f."""
    x = metric.require_inside(x)
    H = density.hess(x)
    if metric.flat_chart or density.is_zero:
        return H
    gamma = christoffel(metric, x)
    return H - np.einsum("...kij,...k->...ij", gamma, density.grad(x))


def bakry_emery(smms, x):
    """Bakry-Emery tensor: Ric + D^2 f - (1/N) df x df, or Ric + D^2 f.

    Finite weight N uses the N-tensor, INFINITE drops the df x df term.
    Symmetric; with constant density it reduces to the Ricci tensor.
    """
    out = ricci(smms.metric, x) + hessian(smms.density, smms.metric, x)
    if smms.weight != INFINITE:
        df = smms.density.grad(np.asarray(x, dtype=float))
        out = out - np.einsum("...i,...j->...ij", df, df) / smms.weight
    return out


def min_generalized_eigenvalue(B, g):
    """Smallest mu with det(B - mu g) = 0, batched over leading axes.

    Solved by symmetric reduction with the Cholesky factor of g, which
    is what scipy's generalized symmetric solver does; g must be
    positive definite.
    """
    B = np.asarray(B, dtype=float)
    g = np.asarray(g, dtype=float)
    if B.ndim == 2:
        return float(scipy.linalg.eigh(B, g, eigvals_only=True)[0])
    flatB = B.reshape(-1, B.shape[-2], B.shape[-1])
    flatg = g.reshape(-1, g.shape[-2], g.shape[-1])
    out = np.empty(flatB.shape[0])
    for idx in range(flatB.shape[0]):
        out[idx] = scipy.linalg.eigh(flatB[idx], flatg[idx], eigvals_only=True)[0]
    return out.reshape(B.shape[:-2])
