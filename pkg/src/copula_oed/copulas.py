"""Parametric bivariate copulas, mixtures, Khoudraji transforms and tau maps.

All copula objects are immutable after construction and evaluate pointwise
on numpy arrays (broadcasting over both the arguments and, where useful,
the copula parameter itself). Distribution functions accept the closed
unit square; densities are defined on the open square only, because the
Clayton/Gumbel/Joe densities diverge at corners and silently clamping
there would corrupt downstream quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, expit, spence

from .errors import DomainError, NumericalError
from .numerics import find_root, gauss_legendre

__all__ = [
    "IndependenceCopula",
    "ClaytonCopula",
    "GumbelCopula",
    "FrankCopula",
    "JoeCopula",
    "MixtureCopula",
    "KhoudrajiCopula",
    "make_base_copula",
    "kendall_tau",
    "tau_from_cdf",
    "tau_inverse",
    "tau_inverse_vec",
    "khoudraji_cdf_raw",
    "TauLink",
    "tau_matched_mixture",
    "BASE_FAMILIES",
]

_EULER_GAMMA = float(np.euler_gamma)
_ZETA2 = np.pi**2 / 6.0
_ZETA3 = 1.2020569031595943
_ZETA4 = np.pi**4 / 90.0
_ZETA5 = 1.0369277551433699


def _check_unit_square(u, v, *, open_interval=False):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if open_interval:
        if np.any((u <= 0) | (u >= 1) | (v <= 0) | (v >= 1)):
            raise DomainError("density arguments must lie strictly inside (0,1)")
    else:
        if np.any((u < 0) | (u > 1) | (v < 0) | (v > 1)):
            raise DomainError("copula arguments must lie in [0,1]")
    return u, v


def _boundary_mask(u, v, interior_fn):
    """Evaluate interior_fn away from the boundary and patch the exact
    boundary values C(u,0)=0, C(0,v)=0, C(u,1)=u, C(1,v)=v."""
    u, v = np.broadcast_arrays(u, v)
    out = np.empty(np.broadcast(u, v).shape, dtype=float)
    on_edge = (u == 0) | (v == 0) | (u == 1) | (v == 1)
    if np.any(~on_edge):
        ui = np.where(on_edge, 0.5, u)
        vi = np.where(on_edge, 0.5, v)
        out[...] = interior_fn(ui, vi)
    out = np.where((u == 0) | (v == 0), 0.0, out)
    out = np.where(u == 1, np.where(v == 1, 1.0, v), out)
    out = np.where(v == 1, np.where(u == 1, 1.0, u), out)
    return out


class _Copula:
    """Shared argument checking and defaults for all copula classes."""

    def cdf(self, u, v):
        u, v = _check_unit_square(u, v)
        return _boundary_mask(u, v, self._cdf)

    def pdf(self, u, v):
        u, v = _check_unit_square(u, v, open_interval=True)
        return self._pdf(u, v)

    def du(self, u, v):
        """Partial derivative of the cdf in its first argument."""
        u, v = _check_unit_square(u, v, open_interval=True)
        return self._du(u, v)

    def dv(self, u, v):
        """Partial derivative of the cdf in its second argument."""
        u, v = _check_unit_square(u, v, open_interval=True)
        return self._dv(u, v)

    def kendall_tau(self):
        return tau_from_cdf(self)

    # subclasses with an exchangeable closed form may reuse _du
    def _dv(self, u, v):
        return self._du(v, u)


class IndependenceCopula(_Copula):
    """Product copula C(u,v) = uv."""

    family = "product"

    def _cdf(self, u, v):
        return u * v

    def _pdf(self, u, v):
        return np.ones(np.broadcast(u, v).shape)

    def _du(self, u, v):
        return v + np.zeros_like(u)

    def _dv(self, u, v):
        return u + np.zeros_like(v)

    def kendall_tau(self):
        return 0.0

    def __repr__(self):
        return "IndependenceCopula()"


class ClaytonCopula(_Copula):
    """Clayton copula, alpha > 0 (lower tail dependent).

    C(u,v) = (u^-a + v^-a - 1)^(-1/a). Evaluation is carried out in log
    space so that strong dependence (a = 18 corresponds to tau = 0.9)
    stays finite for arguments as small as 1e-300.
    """

    family = "clayton"

    def __init__(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha <= 0):
            raise DomainError(f"Clayton parameter must be > 0, got {alpha}")
        self.alpha = alpha if alpha.ndim else float(alpha)

    def _log_s(self, u, v):
        """log(u^-a + v^-a - 1) plus the exponents t1, t2."""
        a = self.alpha
        t1 = -a * np.log(u)
        t2 = -a * np.log(v)
        m = np.maximum(t1, t2)
        log_s = m + np.log(np.exp(t1 - m) + np.exp(t2 - m) - np.exp(-m))
        return log_s, t1, t2

    def _cdf(self, u, v):
        log_s, _, _ = self._log_s(u, v)
        return np.exp(-log_s / self.alpha)

    def _du(self, u, v):
        a = self.alpha
        log_s, t1, _ = self._log_s(u, v)
        return np.exp((1.0 + 1.0 / a) * (t1 - log_s))

    def _pdf(self, u, v):
        return np.exp(self.log_pdf(u, v))

    def log_pdf(self, u, v):
        a = self.alpha
        log_s, t1, t2 = self._log_s(u, v)
        return np.log1p(a) + (1.0 + 1.0 / a) * (t1 + t2) - (1.0 / a + 2.0) * log_s

    def dlogpdf_du(self, u, v):
        # u^(-a-1)/S = exp(((a+1)/a) t1 - log S)
        a = self.alpha
        log_s, t1, _ = self._log_s(u, v)
        return -(a + 1.0) / u + (1.0 + 2.0 * a) * np.exp((1.0 + 1.0 / a) * t1 - log_s)

    def dlogpdf_dv(self, u, v):
        return self.dlogpdf_du(v, u)

    def dlogpdf_dalpha(self, u, v):
        a = self.alpha
        log_s, t1, t2 = self._log_s(u, v)
        ds_over_s = (t1 * np.exp(t1 - log_s) + t2 * np.exp(t2 - log_s)) / a
        return (
            1.0 / (1.0 + a)
            + (t1 + t2) / a
            + log_s / a**2
            - (1.0 / a + 2.0) * ds_over_s
        )

    def conditional_inverse(self, u, w=None, *, log_w=None):
        """Quantile v of V | U=u at probability w: the inverse h-function.

        Accepts either w or its logarithm (useful when w saturates to 1 in
        double precision). Returns (v, one_minus_v) with the complement
        computed stably for v near 1.
        """
        a = self.alpha
        u = np.asarray(u, dtype=float)
        if log_w is None:
            log_w = np.log(np.asarray(w, dtype=float))
        t1 = -a * np.log(u)
        q = -(a / (a + 1.0)) * np.asarray(log_w, dtype=float)
        log_em1 = q + np.log1p(-np.exp(-q))  # log(w^(-a/(a+1)) - 1)
        big_a = t1 + log_em1
        log_v = -np.logaddexp(0.0, big_a) / a
        v = np.exp(log_v)
        return v, -np.expm1(log_v)

    def kendall_tau(self):
        return self.alpha / (self.alpha + 2.0)

    def __repr__(self):
        return f"ClaytonCopula(alpha={self.alpha})"


class GumbelCopula(_Copula):
    """Gumbel copula, alpha >= 1 (upper tail dependent)."""

    family = "gumbel"

    def __init__(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha < 1):
            raise DomainError(f"Gumbel parameter must be >= 1, got {alpha}")
        self.alpha = alpha if alpha.ndim else float(alpha)

    def _log_t(self, u, v):
        """log T with T = ((-log u)^a + (-log v)^a)^(1/a), plus the logs."""
        a = self.alpha
        lx = np.log(-np.log(u))
        ly = np.log(-np.log(v))
        m = np.maximum(a * lx, a * ly)
        log_ta = m + np.log(np.exp(a * lx - m) + np.exp(a * ly - m))
        return log_ta / a, lx, ly

    def _cdf(self, u, v):
        log_t, _, _ = self._log_t(u, v)
        return np.exp(-np.exp(log_t))

    def _du(self, u, v):
        a = self.alpha
        log_t, lx, _ = self._log_t(u, v)
        return np.exp(-np.exp(log_t) + (a - 1.0) * (lx - log_t) - np.log(u))

    def _pdf(self, u, v):
        a = self.alpha
        log_t, lx, ly = self._log_t(u, v)
        t = np.exp(log_t)
        return np.exp(
            -t
            - np.log(u)
            - np.log(v)
            + (a - 1.0) * (lx + ly)
            + (1.0 - 2.0 * a) * log_t
            + np.log(t + a - 1.0)
        )

    def kendall_tau(self):
        return 1.0 - 1.0 / self.alpha

    def __repr__(self):
        return f"GumbelCopula(alpha={self.alpha})"


class FrankCopula(_Copula):
    """Frank copula, alpha != 0 (radially symmetric, no tail dependence)."""

    family = "frank"

    def __init__(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha == 0):
            raise DomainError("Frank parameter must be nonzero")
        self.alpha = alpha if alpha.ndim else float(alpha)

    def _cdf(self, u, v):
        a = self.alpha
        ratio = np.expm1(-a * u) * np.expm1(-a * v) / np.expm1(-a)
        return -np.log1p(ratio) / a

    def _du(self, u, v):
        a = self.alpha
        den = np.expm1(-a) + np.expm1(-a * u) * np.expm1(-a * v)
        return np.exp(-a * u) * np.expm1(-a * v) / den

    def _pdf(self, u, v):
        a = self.alpha
        den = np.expm1(-a) + np.expm1(-a * u) * np.expm1(-a * v)
        return -a * np.expm1(-a) * np.exp(-a * (u + v)) / den**2

    def kendall_tau(self):
        return _frank_tau(self.alpha)

    def __repr__(self):
        return f"FrankCopula(alpha={self.alpha})"


def _debye_integral(a):
    """g(a) = integral_0^a t/(e^t - 1) dt via the dilogarithm.

    Uses Li2(z) = spence(1 - z); g(a) = a log(1-e^-a) - Li2(e^-a) + pi^2/6.
    """
    a = np.asarray(a, dtype=float)
    ea = np.exp(-a)
    return a * np.log1p(-ea) - spence(1.0 - ea) + _ZETA2


def _frank_tau(a):
    """Kendall tau of the Frank copula, odd in the parameter."""
    a = np.asarray(a, dtype=float)
    aa = np.abs(a)
    tau = 1.0 - 4.0 / aa + 4.0 * _debye_integral(aa) / aa**2
    tau = np.sign(a) * tau
    return tau if tau.ndim else float(tau)


def _joe_tau(a):
    """Kendall tau of the Joe copula.

    Uses the digamma form of the series 1 - 4 sum_k 1/(k(ak+2)(a(k-1)+2));
    with p = 2/a this collapses to 1 - p^2 G(p) + p psi(1+p) where
    G(p) = (p psi(p) + euler_gamma)/(p(p-1)), which has a removable
    singularity at p = 1 (a = 2) handled by a local Taylor expansion.
    """
    a = np.asarray(a, dtype=float)
    p = 2.0 / a
    e = p - 1.0
    near_one = np.abs(e) < 1e-3
    p_safe = np.where(near_one, 2.0, p)
    g_exact = (p_safe * digamma(p_safe) + _EULER_GAMMA) / (p_safe * (p_safe - 1.0))
    g_taylor = (
        (_ZETA2 - _EULER_GAMMA)
        + (_ZETA2 - _ZETA3) * e
        + (_ZETA4 - _ZETA3) * e**2
        + (_ZETA4 - _ZETA5) * e**3
    ) / (1.0 + e)
    g = np.where(near_one, g_taylor, g_exact)
    tau = 1.0 - p**2 * g + p * digamma(1.0 + p)
    return tau if tau.ndim else float(tau)


class JoeCopula(_Copula):
    """Joe copula, alpha >= 1 (strong upper tail dependence)."""

    family = "joe"

    def __init__(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha < 1):
            raise DomainError(f"Joe parameter must be >= 1, got {alpha}")
        self.alpha = alpha if alpha.ndim else float(alpha)

    def _log_a(self, u, v):
        """log A with A = x^a + y^a - x^a y^a, x = 1-u, y = 1-v."""
        a = self.alpha
        tx = a * np.log1p(-u)
        ty = a * np.log1p(-v)
        m = np.maximum(tx, ty)
        # all three exponents <= 0; the combination stays in [1, 2] after
        # factoring out exp(m), so no cancellation occurs
        log_a = m + np.log(np.exp(tx - m) + np.exp(ty - m) - np.exp(tx + ty - m))
        return log_a, tx, ty

    def _cdf(self, u, v):
        log_a, _, _ = self._log_a(u, v)
        return -np.expm1(log_a / self.alpha)

    def _du(self, u, v):
        a = self.alpha
        log_a, tx, ty = self._log_a(u, v)
        one_minus_ya = -np.expm1(ty)
        return np.exp(
            (a - 1.0) / a * tx + np.log(one_minus_ya) + (1.0 / a - 1.0) * log_a
        )

    def _pdf(self, u, v):
        a = self.alpha
        log_a, tx, ty = self._log_a(u, v)
        big_a = np.exp(log_a)
        return np.exp(
            (1.0 / a - 2.0) * log_a
            + (a - 1.0) / a * (tx + ty)
            + np.log(a - 1.0 + big_a)
        )

    def kendall_tau(self):
        return _joe_tau(self.alpha)

    def __repr__(self):
        return f"JoeCopula(alpha={self.alpha})"


class MixtureCopula(_Copula):
    """Convex combination of copulas; any such combination is a copula."""

    family = "mixture"

    def __init__(self, components):
        components = [(c, float(w)) for c, w in components]
        if not components:
            raise DomainError("mixture needs at least one component")
        weights = np.array([w for _, w in components])
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise DomainError(
                f"mixture weights must be nonnegative and sum to 1, got {weights}"
            )
        self.components = tuple(components)

    def _combine(self, method, u, v):
        return sum(w * getattr(c, method)(u, v) for c, w in self.components)

    def _cdf(self, u, v):
        return self._combine("_cdf", u, v)

    def _pdf(self, u, v):
        return self._combine("_pdf", u, v)

    def _du(self, u, v):
        return self._combine("_du", u, v)

    def _dv(self, u, v):
        return self._combine("_dv", u, v)

    def __repr__(self):
        return f"MixtureCopula({list(self.components)!r})"


def _khoudraji_cdf_parts(base, a2, a3, u, v):
    """Base-copula arguments u^(1-a2), v^(1-a3) for the asymmetrized cdf.

    Exponents are not range-checked here: finite-difference derivatives
    with respect to a2/a3 may step slightly outside [0,1].
    """
    bu = np.exp((1.0 - a2) * np.log(u))
    bv = np.exp((1.0 - a3) * np.log(v))
    return bu, bv


def khoudraji_cdf_raw(base, a2, a3, u, v):
    """Khoudraji cdf for interior (u, v) without exponent validation.

    Used where derivatives with respect to a2/a3 are taken numerically and
    the stencil may step below 0; the expression stays analytic there.
    """
    bu, bv = _khoudraji_cdf_parts(base, a2, a3, u, v)
    return u**a2 * v**a3 * base.cdf(bu, bv)


class KhoudrajiCopula(_Copula):
    """Khoudraji asymmetrization u^a2 v^a3 C(u^(1-a2), v^(1-a3)).

    Non-exchangeable whenever a2 != a3 (and the base is not the product
    copula); a2 = a3 = 0 recovers the base, a2 = a3 = 1 independence.
    """

    family = "khoudraji"

    def __init__(self, base, alpha2, alpha3):
        alpha2 = float(alpha2)
        alpha3 = float(alpha3)
        if not (0.0 <= alpha2 <= 1.0 and 0.0 <= alpha3 <= 1.0):
            raise DomainError(
                f"Khoudraji exponents must lie in [0,1], got ({alpha2}, {alpha3})"
            )
        self.base = base
        self.alpha2 = alpha2
        self.alpha3 = alpha3

    def _cdf(self, u, v):
        a2, a3 = self.alpha2, self.alpha3
        bu, bv = _khoudraji_cdf_parts(self.base, a2, a3, u, v)
        return u**a2 * v**a3 * self.base.cdf(bu, bv)

    def _du(self, u, v):
        a2, a3 = self.alpha2, self.alpha3
        bu, bv = _khoudraji_cdf_parts(self.base, a2, a3, u, v)
        c0 = self.base.cdf(bu, bv)
        c0_u = self.base.du(bu, bv)
        return a2 * u ** (a2 - 1.0) * v**a3 * c0 + (1.0 - a2) * v**a3 * c0_u

    def _dv(self, u, v):
        a2, a3 = self.alpha2, self.alpha3
        bu, bv = _khoudraji_cdf_parts(self.base, a2, a3, u, v)
        c0 = self.base.cdf(bu, bv)
        c0_v = self.base.dv(bu, bv)
        return a3 * v ** (a3 - 1.0) * u**a2 * c0 + (1.0 - a3) * u**a2 * c0_v

    def _pdf(self, u, v):
        a2, a3 = self.alpha2, self.alpha3
        bu, bv = _khoudraji_cdf_parts(self.base, a2, a3, u, v)
        c0 = self.base.cdf(bu, bv)
        c0_u = self.base.du(bu, bv)
        c0_v = self.base.dv(bu, bv)
        dens = self.base.pdf(bu, bv)
        return (
            a2 * a3 * u ** (a2 - 1.0) * v ** (a3 - 1.0) * c0
            + a2 * (1.0 - a3) * u ** (a2 - 1.0) * c0_v
            + (1.0 - a2) * a3 * v ** (a3 - 1.0) * c0_u
            + (1.0 - a2) * (1.0 - a3) * dens
        )

    def __repr__(self):
        return (
            f"KhoudrajiCopula({self.base!r}, alpha2={self.alpha2}, "
            f"alpha3={self.alpha3})"
        )


BASE_FAMILIES = {
    "product": IndependenceCopula,
    "clayton": ClaytonCopula,
    "gumbel": GumbelCopula,
    "frank": FrankCopula,
    "joe": JoeCopula,
}

# root-search brackets covering tau in [0.01, 0.99] for each family
_TAU_BRACKETS = {
    "clayton": (1e-6, 1e3),
    "gumbel": (1.0 + 1e-6, 1e3),
    "joe": (1.0 + 1e-6, 1e3),
    "frank": (1e-6, 5e2),
}


def make_base_copula(family: str, alpha=None):
    """Instantiate one of the named base families."""
    family = family.lower()
    if family not in BASE_FAMILIES:
        raise DomainError(f"unknown copula family {family!r}")
    if family == "product":
        return IndependenceCopula()
    if alpha is None:
        raise DomainError(f"family {family!r} requires a parameter")
    return BASE_FAMILIES[family](alpha)


def kendall_tau(copula) -> float:
    """Kendall's tau of a copula object (closed form where available)."""
    return copula.kendall_tau()


def tau_from_cdf(copula, order: int = 80) -> float:
    """Numerical Kendall's tau, 1 - 4 int int dC/du * dC/dv du dv.

    The partial derivatives are taken by central differences of the cdf,
    which keeps the integrand bounded even for families whose density
    diverges at the corners. Independent of any closed-form tau.
    """
    x, w = gauss_legendre(order)
    g = 0.5 * (x + 1.0)
    gw = 0.5 * w
    uu, vv = np.meshgrid(g, g, indexing="ij")
    h = np.minimum(1e-6, np.minimum(uu, 1.0 - uu) / 2.0)
    k = np.minimum(1e-6, np.minimum(vv, 1.0 - vv) / 2.0)
    d1 = (copula.cdf(uu + h, vv) - copula.cdf(uu - h, vv)) / (2.0 * h)
    d2 = (copula.cdf(uu, vv + k) - copula.cdf(uu, vv - k)) / (2.0 * k)
    integral = np.einsum("i,j,ij->", gw, gw, d1 * d2)
    if not np.isfinite(integral):
        raise NumericalError("Kendall tau quadrature produced a non-finite value")
    return float(1.0 - 4.0 * integral)


def _family_tau_fn(family: str):
    if family == "clayton":
        return lambda a: a / (a + 2.0)
    if family == "gumbel":
        return lambda a: 1.0 - 1.0 / a
    if family == "frank":
        return _frank_tau
    if family == "joe":
        return _joe_tau
    raise DomainError(f"no tau map for family {family!r}")


def tau_inverse(family: str, tau: float) -> float:
    """Copula parameter attaining a given Kendall's tau.

    Only strictly positive association is supported; tau values at or
    outside the attainable open interval (0, 1) raise DomainError.
    """
    family = family.lower()
    if family == "product":
        raise DomainError("the product copula has no parameter to invert")
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau={tau} outside the attainable range (0, 1)")
    if family == "clayton":
        return 2.0 * tau / (1.0 - tau)
    if family == "gumbel":
        return 1.0 / (1.0 - tau)
    if family not in _TAU_BRACKETS:
        raise DomainError(f"unknown copula family {family!r}")
    lo, hi = _TAU_BRACKETS[family]
    fn = _family_tau_fn(family)
    return find_root(lambda a: fn(a) - tau, lo, hi, tol=1e-13)


def tau_inverse_vec(family: str, tau: np.ndarray) -> np.ndarray:
    """Vectorized tau_inverse: bracketed Newton on the closed-form tau maps.

    Newton steps falling outside the current bracket degrade to bisection,
    so convergence is guaranteed; iterates until |tau(a) - tau| < 1e-12.
    """
    family = family.lower()
    tau = np.asarray(tau, dtype=float)
    if np.any((tau <= 0.0) | (tau >= 1.0)):
        raise DomainError("tau values must lie strictly in (0, 1)")
    if family == "clayton":
        return 2.0 * tau / (1.0 - tau)
    if family == "gumbel":
        return 1.0 / (1.0 - tau)
    if family not in _TAU_BRACKETS:
        raise DomainError(f"unknown copula family {family!r}")
    fn = _family_tau_fn(family)
    lo = np.full(tau.shape, _TAU_BRACKETS[family][0])
    hi = np.full(tau.shape, _TAU_BRACKETS[family][1])
    if family == "frank":
        a = np.maximum(9.0 * tau, 4.0 / (1.0 - tau))
    else:
        a = 2.0 / (1.0 - tau)
    a = np.clip(a, lo, hi)
    for _ in range(200):
        f = fn(a) - tau
        hi = np.where(f > 0, a, hi)
        lo = np.where(f <= 0, a, lo)
        if np.all(np.abs(f) < 1e-12):
            break
        delta = np.maximum(1e-7, 1e-7 * np.abs(a))
        slope = (fn(a + delta) - fn(a - delta)) / (2.0 * delta)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(slope > 0, f / slope, 0.0)
        nxt = a - step
        bad = ~np.isfinite(nxt) | (nxt <= lo) | (nxt >= hi)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        a = np.where(np.abs(f) < 1e-12, a, nxt)
    else:
        raise NumericalError(f"tau inversion for {family} did not converge")
    return a


@dataclass(frozen=True)
class TauLink:
    """Logistic model for Kendall's tau as a function of the regressor.

    tau(x) = expit(alpha1 * x - c) with c pinned by tau(0) = epsilon and
    alpha1 calibrated so that tau(x_max) = tau_max; tau then sweeps the
    interval [epsilon, tau_max] exactly across the design space.
    """

    epsilon: float
    tau_max: float
    x_max: float
    c: float
    alpha1: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < self.tau_max < 1.0:
            raise DomainError(
                f"need 0 < epsilon < tau_max < 1, got ({self.epsilon}, {self.tau_max})"
            )
        if abs(self.tau_at(0.0) - self.epsilon) > 1e-12:
            raise DomainError("link does not satisfy tau(0) = epsilon")
        if abs(self.tau_at(self.x_max) - self.tau_max) > 1e-12:
            raise DomainError("link does not satisfy tau(x_max) = tau_max")

    @classmethod
    def calibrate(cls, tau_max: float, epsilon: float = 0.05, x_max: float = 10.0):
        c = np.log((1.0 - epsilon) / epsilon)
        alpha1 = (c + np.log(tau_max / (1.0 - tau_max))) / x_max
        return cls(epsilon=epsilon, tau_max=tau_max, x_max=x_max,
                   c=float(c), alpha1=float(alpha1))

    def tau_at(self, x, alpha1=None):
        """tau(x), clamped to [epsilon, tau_max] against roundoff."""
        x = np.asarray(x, dtype=float)
        if np.any((x < 0) | (x > self.x_max)):
            raise DomainError(f"x outside the design space [0, {self.x_max}]")
        a1 = self.alpha1 if alpha1 is None else alpha1
        tau = expit(a1 * x - self.c)
        tau = np.clip(tau, self.epsilon, self.tau_max)
        return tau if tau.ndim else float(tau)


def tau_at_x(link: TauLink, x):
    return link.tau_at(x)


def tau_matched_mixture(family1: str, family2: str, link: TauLink,
                        alpha2: float, x) -> MixtureCopula:
    """Two-family mixture with both components matched to tau(x).

    Returns alpha2 * C1(.; h1) + (1 - alpha2) * C2(.; h2) where the h_i
    invert each family's tau map at tau(x). With array-valued x the
    component copulas carry array parameters and evaluate pointwise.
    """
    if not 0.0 <= alpha2 <= 1.0:
        raise DomainError(f"mixture weight must lie in [0,1], got {alpha2}")
    tau = link.tau_at(x)
    c1 = make_base_copula(family1, tau_inverse_vec(family1, tau))
    c2 = make_base_copula(family2, tau_inverse_vec(family2, tau))
    return MixtureCopula([(c1, alpha2), (c2, 1.0 - alpha2)])
