"""Shared numerical kernels: differentiation, quadrature, roots, PSD linear algebra.

Everything here is a pure function of its inputs and safe to call from
multiple threads.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import BracketError, NumericalError, SingularMatrixError

__all__ = [
    "gauss_legendre",
    "grad_fd",
    "jacobian_fd",
    "integrate_2d",
    "find_root",
    "logdet_psd",
    "schur_complement",
    "symmetrize",
]

# Cholesky pivot below PIVOT_RTOL * max(diag) declares the matrix non-PD.
# Information matrices at identifiability boundaries are genuinely singular
# and must fail loudly instead of returning garbage log-determinants.
PIVOT_RTOL = 1e-12


@lru_cache(maxsize=64)
def gauss_legendre(order: int):
    """Nodes and weights of the `order`-point Gauss-Legendre rule on [-1, 1]."""
    if order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order}")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def _fd_steps(p: np.ndarray, h: float | None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if h is not None:
        return np.full(p.shape, float(h))
    return np.maximum(1e-5, 1e-5 * np.abs(p))


def grad_fd(f, p, h: float | None = None) -> np.ndarray:
    """Gradient of a scalar function by central differences plus one
    Richardson extrapolation step (error O(h^4) for smooth f).

    Parameters
    ----------
    f : callable
        Maps a 1-d parameter vector to a finite scalar.
    p : array_like
        Point at which to differentiate.
    h : float, optional
        Step size; defaults to ``max(1e-5, 1e-5*|p_i|)`` per coordinate.

    Raises
    ------
    NumericalError
        If any evaluation of ``f`` is non-finite (message names the
        offending coordinate).
    """
    p = np.asarray(p, dtype=float)
    steps = _fd_steps(p, h)
    grad = np.empty(p.shape)
    for i, hi in enumerate(steps):
        e = np.zeros_like(p)
        e[i] = 1.0
        vals = [f(p + s * e) for s in (hi, -hi, hi / 2, -hi / 2)]
        if not np.all(np.isfinite(vals)):
            raise NumericalError(
                f"non-finite function value while differentiating coordinate {i}"
            )
        d_h = (vals[0] - vals[1]) / (2 * hi)
        d_h2 = (vals[2] - vals[3]) / hi
        grad[i] = (4 * d_h2 - d_h) / 3
    return grad


def jacobian_fd(f, p, h: float | None = None) -> np.ndarray:
    """Jacobian of a vector/array-valued function, same stencil as grad_fd.

    ``f(p)`` may return an array of any shape; the result has that shape
    plus a trailing axis over the coordinates of ``p``.
    """
    p = np.asarray(p, dtype=float)
    steps = _fd_steps(p, h)
    cols = []
    for i, hi in enumerate(steps):
        e = np.zeros_like(p)
        e[i] = 1.0
        vals = [np.asarray(f(p + s * e), dtype=float)
                for s in (hi, -hi, hi / 2, -hi / 2)]
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise NumericalError(
                f"non-finite function value while differentiating coordinate {i}"
            )
        d_h = (vals[0] - vals[1]) / (2 * hi)
        d_h2 = (vals[2] - vals[3]) / hi
        cols.append((4 * d_h2 - d_h) / 3)
    return np.stack(cols, axis=-1)


@lru_cache(maxsize=64)
def _graded_rule(order: int):
    """Gauss-Legendre nodes/weights on (0,1) under a quintic smoothstep map.

    The substitution t -> t^3 (10 - 15 t + 6 t^2) clusters nodes toward the
    endpoints with a Jacobian vanishing quadratically there, which restores
    fast convergence for integrands with integrable endpoint singularities
    (copula densities at the corners of the unit square). Polynomials are
    still integrated essentially exactly. Evaluated symmetrically about
    t = 1/2 so the mapped nodes never leave the open interval.
    """
    x, w = gauss_legendre(order)
    t = 0.5 * (x + 1.0)
    s = np.minimum(t, 1.0 - t)
    val = s**3 * (10.0 - 15.0 * s + 6.0 * s**2)
    rho = np.where(t <= 0.5, val, 1.0 - val)
    drho = 30.0 * s**2 * (1.0 - s) ** 2
    return rho, 0.5 * w * drho


def integrate_2d(f, region, order: int) -> float:
    """Tensor Gauss-Legendre integral of ``f`` over a rectangle.

    The rule is applied after a per-axis smoothstep change of variables
    (see _graded_rule), so integrable singularities on the rectangle edge
    do not wreck the convergence order. Results should be checked for
    stability under order doubling before being trusted.

    Parameters
    ----------
    f : callable
        Vectorized integrand ``f(u, v)`` accepting meshgrid arrays.
    region : tuple
        ``(ulo, uhi, vlo, vhi)``.
    order : int
        Nodes per axis (>= 2).
    """
    if order < 2:
        raise ValueError(f"order must be >= 2, got {order}")
    ulo, uhi, vlo, vhi = map(float, region)
    rho, wg = _graded_rule(order)
    u = ulo + (uhi - ulo) * rho
    v = vlo + (vhi - vlo) * rho
    uu, vv = np.meshgrid(u, v, indexing="ij")
    vals = np.asarray(f(uu, vv), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite integrand in integrate_2d")
    return float((uhi - ulo) * (vhi - vlo) * np.einsum("i,j,ij->", wg, wg, vals))


def tensor_nodes_2d(region, order: int):
    """Meshgrid nodes and combined weights of the integrate_2d rule.

    Lets callers that need several integrals of a shared expensive
    integrand evaluate the mesh once; ``sum(W * f(U, V))`` reproduces
    ``integrate_2d(f, region, order)``.
    """
    ulo, uhi, vlo, vhi = map(float, region)
    rho, wg = _graded_rule(order)
    u = ulo + (uhi - ulo) * rho
    v = vlo + (vhi - vlo) * rho
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ww = (uhi - ulo) * (vhi - vlo) * np.outer(wg, wg)
    return uu, vv, ww


def find_root(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Brent-style bracketed root of a scalar function.

    Requires ``f(lo)`` and ``f(hi)`` to have opposite (or zero) signs,
    otherwise raises BracketError.
    """
    flo, fhi = f(lo), f(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)):
        raise NumericalError("non-finite endpoint value in find_root")
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if flo * fhi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo:.3g},{fhi:.3g}")
    from scipy.optimize import brentq

    return float(brentq(f, lo, hi, xtol=tol, rtol=8 * np.finfo(float).eps))


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Exactly symmetric copy of a nearly-symmetric matrix."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def _cholesky_pivoted(m: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor with an explicit pivot check.

    Raises SingularMatrixError carrying the first failing pivot index.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(m, m.T, rtol=0, atol=1e-8 * max(1.0, np.abs(m).max())):
        raise ValueError("matrix must be symmetric")
    diag_max = max(np.max(np.diag(m)), 0.0)
    tol = PIVOT_RTOL * diag_max
    L = np.zeros_like(m)
    for j in range(n):
        pivot = m[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= tol:
            raise SingularMatrixError(
                f"non-positive-definite pivot {pivot:.3g} at index {j}",
                pivot_index=j,
            )
        L[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            L[j + 1:, j] = (m[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def logdet_psd(m: np.ndarray) -> float:
    """log det of a symmetric positive definite matrix via Cholesky.

    Fails with SingularMatrixError (including the pivot index) rather
    than returning a value for non-PD input.
    """
    L = _cholesky_pivoted(m)
    return float(2.0 * np.sum(np.log(np.diag(L))))


def schur_complement(m: np.ndarray, s: int) -> np.ndarray:
    """Schur complement M11 - M12 M22^-1 M12^T of the leading s x s block.

    The trailing block M22 must be positive definite.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if not 1 <= s < n:
        raise ValueError(f"block size s={s} must satisfy 1 <= s < {n}")
    m11 = m[:s, :s]
    m12 = m[:s, s:]
    m22 = m[s:, s:]
    L = _cholesky_pivoted(m22)
    # M22^-1 M12^T by two triangular solves
    from scipy.linalg import solve_triangular

    y = solve_triangular(L, m12.T, lower=True)
    return symmetrize(m11 - y.T @ y)
