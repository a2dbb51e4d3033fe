"""Outcome models: distributions over responses and single-point Fisher
information matrices m(x, gamma).

Three model families are provided.

* FedorovModel -- a pair of polynomial regressions with standard Gaussian
  margins coupled by a copula; continuous outcomes.
* BinaryLogitModel -- bivariate binary outcomes with logistic margins and
  a regressor-dependent tau-matched mixture copula.
* WeibullModel -- dichotomized bivariate Weibull damage outcomes, either
  with the Marshall-Olkin shared-shock dependence (singular diagonal
  component) or with a Khoudraji-asymmetrized Clayton copula over the
  same margins.

All models expose ``param_names``, ``default_gamma()``, ``fim_single`` and
``fim_batch``; discrete models additionally expose ``cell_probs``. The
parameter layout of each model is fixed so that leading-subset criteria
are meaningful; the Weibull models put the asymmetry block
(nu1, nu2[, alpha2, alpha3]) first for exactly that reason.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, log_ndtr, ndtr, ndtri

from .copulas import (
    ClaytonCopula,
    IndependenceCopula,
    khoudraji_cdf_raw,
    tau_inverse_vec,
    TauLink,
)
from .errors import ModelError
from .numerics import jacobian_fd, grad_fd, symmetrize, tensor_nodes_2d

__all__ = [
    "FedorovModel",
    "BinaryLogitModel",
    "WeibullModel",
    "multinomial_fim_oracle",
    "CELL_ORDER",
]

# column order of all cell-probability arrays
CELL_ORDER = ("p00", "p01", "p10", "p11")

_NEG_CELL_TOL = 1e-9  # beyond this, inclusion-exclusion has genuinely failed
_CLAMP_TOL = 1e-12  # roundoff band clamped to zero


def _npdf(z):
    return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)


def _ndtri_stable(v, one_minus_v):
    """Standard normal quantile, accurate in both tails."""
    return np.where(v <= 0.5, ndtri(np.maximum(v, 1e-300)),
                    -ndtri(np.maximum(one_minus_v, 1e-300)))


class FedorovModel:
    """Two polynomial regressions observed jointly on x in [0, 1].

    E[Y1] = b1 + b2 x + b3 x^2 and E[Y2] = b4 x + b5 x^3 + b6 x^4, both
    with unit-variance Gaussian errors, coupled by ``copula``. The model
    is linear in the regression coefficients, so m(x) does not depend on
    them; the only localized quantity is the copula parameter.

    Parameter layout: (b1..b6[, alpha1]); the trailing copula parameter is
    present unless the copula is the product copula.
    """

    def __init__(self, copula=None, design_space=(0.0, 1.0), quad_order=128):
        self.copula = copula if copula is not None else IndependenceCopula()
        self.design_space = (float(design_space[0]), float(design_space[1]))
        self.quad_order = int(quad_order)
        self._has_alpha = not isinstance(self.copula, IndependenceCopula)
        self.param_names = tuple(f"b{i}" for i in range(1, 7)) + (
            ("alpha1",) if self._has_alpha else ()
        )
        self._moments = None

    @property
    def n_params(self):
        return len(self.param_names)

    def default_gamma(self):
        beta = np.zeros(6)
        if self._has_alpha:
            return np.concatenate([beta, [float(self.copula.alpha)]])
        return beta

    # -- score moments -------------------------------------------------

    def score_moments(self):
        """Copula-scale score second moments.

        Returns the matrix Q = E[(psi1, psi2, s_a)^T (psi1, psi2, s_a)]
        where psi_i = z_i - phi(z_i) d log c / d u_i is the score factor
        of each margin's location parameters and s_a the copula-parameter
        score; for the product copula Q is the 2x2 identity. Cached.
        """
        if self._moments is None:
            self._moments = self._compute_moments(self.quad_order)
        return self._moments

    def _compute_moments(self, order):
        if not self._has_alpha:
            return np.eye(2)
        if isinstance(self.copula, ClaytonCopula):
            return self._moments_clayton(order)
        return self._moments_generic(order)

    def _moments_clayton(self, order):
        # expectation over (U,V) ~ C via u = Phi(z), v = conditional
        # quantile at Phi(w): removes the density weight entirely, so the
        # sharp ridge of strong Clayton dependence never meets the rule
        cop = self.copula
        L = 8.5
        zz, ww, wts = tensor_nodes_2d((-L, L, -L, L), order)
        u = ndtr(zz)
        v, one_minus_v = cop.conditional_inverse(u, log_w=log_ndtr(ww))
        z1 = zz
        z2 = _ndtri_stable(v, one_minus_v)
        psi1 = z1 - _npdf(z1) * cop.dlogpdf_du(u, v)
        psi2 = z2 - _npdf(z2) * cop.dlogpdf_dv(u, v)
        s_a = cop.dlogpdf_dalpha(u, v)
        dens = _npdf(zz) * _npdf(ww) * wts
        return self._assemble_moments((psi1, psi2, s_a), dens)

    def _moments_generic(self, order):
        # direct copula-scale quadrature with the density as weight; fine
        # for mild dependence, checked by order doubling in the tests
        cop = self.copula
        uu, vv, wts = tensor_nodes_2d((0.0, 1.0, 0.0, 1.0), order)
        z1 = ndtri(uu)
        z2 = ndtri(vv)
        h = 1e-6
        dlog_du = (np.log(cop.pdf(uu + h, vv)) - np.log(cop.pdf(uu - h, vv))) / (2 * h)
        dlog_dv = (np.log(cop.pdf(uu, vv + h)) - np.log(cop.pdf(uu, vv - h))) / (2 * h)
        a = float(self.copula.alpha)
        ha = max(1e-6, 1e-6 * abs(a))
        cop_hi = type(cop)(a + ha)
        cop_lo = type(cop)(a - ha)
        s_a = (np.log(cop_hi.pdf(uu, vv)) - np.log(cop_lo.pdf(uu, vv))) / (2 * ha)
        psi1 = z1 - _npdf(z1) * dlog_du
        psi2 = z2 - _npdf(z2) * dlog_dv
        dens = cop.pdf(uu, vv) * wts
        return self._assemble_moments((psi1, psi2, s_a), dens)

    @staticmethod
    def _assemble_moments(scores, dens):
        k = len(scores)
        q = np.empty((k, k))
        for i in range(k):
            for j in range(i, k):
                q[i, j] = q[j, i] = np.sum(scores[i] * scores[j] * dens)
        return q

    # -- information ----------------------------------------------------

    def _basis(self, x):
        x = np.asarray(x, dtype=float)
        f = np.stack([np.ones_like(x), x, x**2], axis=-1)
        g = np.stack([x, x**3, x**4], axis=-1)
        return f, g

    def fim_batch(self, xs, gamma=None):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        q = self.score_moments()
        f, g = self._basis(xs)
        d = self.n_params
        t = np.zeros((len(xs), d, q.shape[0]))
        t[:, 0:3, 0] = f
        t[:, 3:6, 1] = g
        if self._has_alpha:
            t[:, 6, 2] = 1.0
        m = np.einsum("nij,jk,nlk->nil", t, q, t)
        return 0.5 * (m + np.swapaxes(m, 1, 2))

    def fim_single(self, x, gamma=None):
        return self.fim_batch(np.array([x]), gamma)[0]


class BinaryLogitModel:
    """Bivariate binary response with logistic margins on x in [0, x_max].

    Success probabilities pi_i(x) = expit(b_i1 + b_i2 x); the joint cell
    probabilities come from a two-family mixture copula whose components
    are parameter-matched to a common Kendall's tau following the logistic
    link tau(x) = expit(alpha1 x - c). gamma layout:
    (b11, b12, b21, b22, alpha1, alpha2) with alpha2 the mixture weight.

    Inside the likelihood the link is the pure logistic (no clamping):
    the clamp in TauLink.tau_at is a guard for link evaluation, and
    clamping here would kink the alpha1-derivative at x = x_max.
    """

    param_names = ("b11", "b12", "b21", "b22", "alpha1", "alpha2")
    n_params = 6

    def __init__(self, family1, family2, link: TauLink,
                 beta1=(-1.0, 1.0), beta2=(-2.0, 0.5), alpha2=0.5):
        self.family1 = family1
        self.family2 = family2
        self.link = link
        self.beta1 = (float(beta1[0]), float(beta1[1]))
        self.beta2 = (float(beta2[0]), float(beta2[1]))
        self.alpha2 = float(alpha2)
        self.design_space = (0.0, link.x_max)

    def default_gamma(self):
        return np.array([*self.beta1, *self.beta2, self.link.alpha1, self.alpha2])

    def cell_probs(self, x, gamma=None):
        """Cell probabilities (..., 4) in CELL_ORDER for scalar or array x."""
        x = np.asarray(x, dtype=float)
        g = self.default_gamma() if gamma is None else np.asarray(gamma, dtype=float)
        b11, b12, b21, b22, alpha1, alpha2 = g
        pi1 = expit(b11 + b12 * x)
        pi2 = expit(b21 + b22 * x)
        tau = expit(alpha1 * x - self.link.c)
        c1 = _matched_copula(self.family1, tau)
        c2 = _matched_copula(self.family2, tau)
        p11 = alpha2 * c1.cdf(pi1, pi2) + (1.0 - alpha2) * c2.cdf(pi1, pi2)
        return _cells_from_joint(pi1, pi2, p11)

    def fim_batch(self, xs, gamma=None):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        g = self.default_gamma() if gamma is None else np.asarray(gamma, dtype=float)
        return _discrete_fim(lambda gg: self.cell_probs(xs, gg), g)

    def fim_single(self, x, gamma=None):
        return self.fim_batch(np.array([x]), gamma)[0]


def _matched_copula(family, tau):
    if family == "product":
        return IndependenceCopula()
    from .copulas import make_base_copula

    return make_base_copula(family, tau_inverse_vec(family, tau))


def _cells_from_joint(pi1, pi2, p11):
    """Assemble (p00, p01, p10, p11) from margins and the joint success."""
    p10 = pi1 - p11
    p01 = pi2 - p11
    p00 = 1.0 - pi1 - pi2 + p11
    cells = np.stack([p00, p01, p10, p11], axis=-1)
    if np.any(cells < -_NEG_CELL_TOL):
        worst = float(cells.min())
        raise ModelError(f"cell probability {worst} below -{_NEG_CELL_TOL}")
    return np.clip(cells, 0.0, None)


def _discrete_fim(cells_of_gamma, gamma):
    """Score outer-product information of a 4-cell model, batched over x.

    For multinomial likelihoods the expected negative Hessian equals
    sum_cells (dp)(dp)^T / p, which is cheaper and PSD by construction.
    """
    cells = np.asarray(cells_of_gamma(gamma), dtype=float)
    if np.any(cells <= 0.0):
        raise ModelError("zero cell probability in Fisher information")
    jac = jacobian_fd(cells_of_gamma, gamma)  # (n, 4, d)
    m = np.einsum("ncj,nck,nc->njk", jac, jac, 1.0 / cells)
    return 0.5 * (m + np.swapaxes(m, 1, 2))


class WeibullModel:
    """Dichotomized bivariate Weibull damage model on x in [0, 1].

    Component damages (Y, Z) follow the shared-shock bivariate Weibull
    whose rate combinations are tied to the stress x through
    -log(b3 + b5) = th0 + th1 x, -log(b3 + b4) = th0 + th2 x and
    -log(b1 + b2 + b3) = th0 + th3 x, with th1 = th2 + nu1 and
    b1 = b2 + nu2 so that (nu1, nu2) measures margin dissimilarity.
    Failure indicators are U = 1{Y >= zeta1}, V = 1{Z >= zeta2}.

    dependence="marshall_olkin" uses the shared-shock joint law itself
    (absolutely continuous off the diagonal plus a singular diagonal
    mass); gamma = (nu1, nu2, th0, th2, th3, b2, kappa).

    dependence=(alpha1, alpha2, alpha3) keeps the same margins but joins
    them with a Khoudraji-asymmetrized Clayton copula;
    gamma = (nu1, nu2, alpha2, alpha3, th0, th2, th3, b2, kappa, alpha1)
    so that the asymmetry block (nu1, nu2, alpha2, alpha3) leads.
    """

    _COMMON = dict(theta0=-2.0, theta2=5.0, theta3=2.0, nu1=-1.0,
                   nu2=0.1, beta2=0.2, kappa=2.0)

    def __init__(self, dependence="marshall_olkin", cutoffs=(0.8, 0.7), **overrides):
        self.cutoffs = (float(cutoffs[0]), float(cutoffs[1]))
        self.design_space = (0.0, 1.0)
        common = dict(self._COMMON)
        common.update(overrides)
        self._base = common
        if dependence == "marshall_olkin":
            self.dependence = "marshall_olkin"
            self.copula_params = None
            self.param_names = ("nu1", "nu2", "theta0", "theta2", "theta3",
                                "beta2", "kappa")
        else:
            a1, a2, a3 = map(float, dependence)
            self.dependence = "khoudraji_clayton"
            self.copula_params = (a1, a2, a3)
            self.param_names = ("nu1", "nu2", "alpha2", "alpha3", "theta0",
                                "theta2", "theta3", "beta2", "kappa", "alpha1")

    @property
    def n_params(self):
        return len(self.param_names)

    def default_gamma(self):
        b = self._base
        if self.dependence == "marshall_olkin":
            vals = (b["nu1"], b["nu2"], b["theta0"], b["theta2"], b["theta3"],
                    b["beta2"], b["kappa"])
        else:
            a1, a2, a3 = self.copula_params
            vals = (b["nu1"], b["nu2"], a2, a3, b["theta0"], b["theta2"],
                    b["theta3"], b["beta2"], b["kappa"], a1)
        return np.array(vals, dtype=float)

    def _unpack(self, gamma):
        g = dict(zip(self.param_names, np.asarray(gamma, dtype=float)))
        if self.dependence == "marshall_olkin":
            cop = None
        else:
            cop = (g["alpha1"], g["alpha2"], g["alpha3"])
        return g, cop

    def _rates(self, x, g):
        """Per-point rate parameters (b1, b2, b3, r1, r2, r3, q1, q2).

        r_i are the three predictor rates (always positive); b4 and b5
        need never be formed individually because every probability
        depends on them only through r1 = b3+b5, r2 = b3+b4 and the
        complements q1 = r3-r1, q2 = r3-r2.
        """
        x = np.asarray(x, dtype=float)
        th1 = g["theta2"] + g["nu1"]
        b1 = g["beta2"] + g["nu2"]
        b2 = g["beta2"]
        r1 = np.exp(-(g["theta0"] + th1 * x))
        r2 = np.exp(-(g["theta0"] + g["theta2"] * x))
        r3 = np.exp(-(g["theta0"] + g["theta3"] * x))
        b3 = r3 - b1 - b2
        if np.any(b3 <= 0) or b1 <= 0 or b2 <= 0:
            raise ModelError("shock rates must be positive on the design space")
        return b1, b2, b3, r1, r2, r3, r3 - r1, r3 - r2

    def _margins(self, g, x):
        """P(Y >= zeta1), P(Z >= zeta2): weighted Weibull survivals."""
        b1, b2, b3, r1, r2, r3, q1, q2 = self._rates(x, g)
        kappa = g["kappa"]
        y = self.cutoffs[0] ** kappa
        z = self.cutoffs[1] ** kappa
        s_y = np.exp(-r3 * y) * (1.0 + b2 * _expm1_rel(q2, y))
        s_z = np.exp(-r3 * z) * (1.0 + b1 * _expm1_rel(q1, z))
        return s_y, s_z

    def cell_probs(self, x, gamma=None):
        x = np.asarray(x, dtype=float)
        g, cop = self._unpack(self.default_gamma() if gamma is None else gamma)
        s_y, s_z = self._margins(g, x)
        if self.dependence == "marshall_olkin":
            p00 = self._p00_marshall_olkin(g, x)
        else:
            a1, a2, a3 = cop
            p00 = khoudraji_cdf_raw(ClaytonCopula(a1), a2, a3,
                                    1.0 - s_y, 1.0 - s_z)
        p01 = (1.0 - s_y) - p00
        p10 = (1.0 - s_z) - p00
        p11 = s_y + s_z - 1.0 + p00
        cells = np.stack(np.broadcast_arrays(p00, p01, p10, p11), axis=-1)
        if np.any(cells < -_NEG_CELL_TOL):
            raise ModelError(f"cell probability {float(cells.min())} < -{_NEG_CELL_TOL}")
        return np.clip(cells, 0.0, None)

    def _p00_marshall_olkin(self, g, x):
        """P(Y < zeta1, Z < zeta2) under the shared-shock joint law.

        Splits into the two absolutely continuous wedges plus the
        singular diagonal mass b3 k y^(k-1) exp(-(b1+b2+b3) y^k) over
        y in [0, min(zeta1, zeta2)].
        """
        b1, b2, b3, r1, r2, r3, q1, q2 = self._rates(x, g)
        kappa = g["kappa"]
        big1 = self.cutoffs[0] ** kappa
        big2 = self.cutoffs[1] ** kappa
        # wedge y < z <= zeta2 (zeta2 < zeta1 keeps y below zeta1 for free)
        wedge_lo = b1 * r1 * _div_diff_exp(r1, r3, big2)
        # wedge z < y, y <= zeta1, z <= zeta2
        wedge_hi = b2 * r2 * _div_diff_exp(r2, r3, big2) + b2 * _one_minus_exp(
            q2, big2
        ) * (np.exp(-r2 * big2) - np.exp(-r2 * big1))
        diag = b3 / r3 * -np.expm1(-r3 * big2)
        return wedge_lo + wedge_hi + diag

    def fim_batch(self, xs, gamma=None):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        g = self.default_gamma() if gamma is None else np.asarray(gamma, dtype=float)
        return _discrete_fim(lambda gg: self.cell_probs(xs, gg), g)

    def fim_single(self, x, gamma=None):
        return self.fim_batch(np.array([x]), gamma)[0]

    def sample_damage(self, x, n, rng, gamma=None):
        """Monte-Carlo draws of (Y^kappa, Z^kappa) from the shock build.

        First event at combined rate b1+b2+b3; a component-1 event leaves
        the survivor running at rate r1 = b3+b5, a component-2 event at
        rate r2 = b3+b4, and a shared shock fells both at once. Used as
        the independent oracle for the closed-form cell probabilities.
        """
        g, _ = self._unpack(self.default_gamma() if gamma is None else gamma)
        b1, b2, b3, r1, r2, r3, _, _ = self._rates(float(x), g)
        t = rng.exponential(1.0 / r3, size=n)
        pick = rng.uniform(size=n)
        extra = rng.exponential(1.0, size=n)
        a = np.where(pick < b2 / r3, t + extra / r2, t)
        b = np.where(pick < b2 / r3, t,
                     np.where(pick < (b1 + b2) / r3, t + extra / r1, t))
        return a, b


def _expm1_rel(q, y):
    """expm1(q*y)/q with the q -> 0 limit y."""
    qy = q * y
    small = np.abs(qy) < 1e-8
    safe_q = np.where(small, 1.0, q)
    return np.where(small, y * (1.0 + 0.5 * qy), np.expm1(qy) / safe_q)


def _one_minus_exp(q, y):
    """(1 - exp(-q*y))/q with the q -> 0 limit y."""
    qy = q * y
    small = np.abs(qy) < 1e-8
    safe_q = np.where(small, 1.0, q)
    return np.where(small, y * (1.0 - 0.5 * qy), -np.expm1(-qy) / safe_q)


def _div_diff_exp(ra, rb, big):
    """(F(ra) - F(rb)) / (rb - ra) for F(r) = (1 - exp(-r*big))/r.

    The limit rb -> ra is -F'(ra); the predictor rates collide exactly at
    x = 0, so the degenerate branch is exercised at a real design point.
    """
    q = rb - ra
    mid = 0.5 * (ra + rb)
    f_mid = -np.expm1(-mid * big) / mid
    deriv = -(big * np.exp(-mid * big) - f_mid) / mid
    small = np.abs(q) < 1e-7 * np.maximum(ra, rb)
    safe_q = np.where(small, 1.0, q)
    fa = -np.expm1(-ra * big) / ra
    fb = -np.expm1(-rb * big) / rb
    return np.where(small, deriv, (fa - fb) / safe_q)


def multinomial_fim_oracle(model, x, gamma=None, step=1e-3):
    """Expected negative log-likelihood Hessian, by nested differences.

    Computes sum_cells p_cell * (-Hessian of log p_cell) directly from
    the definition; deliberately independent of the score outer-product
    route used by the models' fim_single. Test use only (slow).
    """
    gamma = np.asarray(
        model.default_gamma() if gamma is None else gamma, dtype=float
    )
    cells = np.asarray(model.cell_probs(np.array([x]), gamma), dtype=float)[0]
    d = len(gamma)
    fim = np.zeros((d, d))
    for c in range(cells.shape[-1]):
        def log_cell(g, _c=c):
            return float(np.log(model.cell_probs(np.array([x]), g)[0, _c]))

        hess = np.empty((d, d))
        for j in range(d):
            eta = step * max(1.0, abs(gamma[j]))
            e = np.zeros(d)
            e[j] = eta
            g_hi = grad_fd(log_cell, gamma + e)
            g_lo = grad_fd(log_cell, gamma - e)
            hess[:, j] = (g_hi - g_lo) / (2.0 * eta)
        hess = symmetrize(hess)
        fim -= cells[c] * hess
    return symmetrize(fim)
