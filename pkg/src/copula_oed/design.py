"""Approximate designs, optimality criteria, sensitivity functions and the
design optimizer.

A design is a finitely supported probability measure on the design
interval. Criteria follow the classical log-determinant family:

* D        -- log det M
* DA(A)    -- -log det(A^T M^-1 A) for a full-column-rank contrast matrix
* Ds(s)    -- log det of the Schur complement of the leading s x s block

Optimality of a candidate design is certified through the corresponding
equivalence theorem: the criterion's sensitivity function must not exceed
its bound (k+l for D, s for DA/Ds) anywhere on the design space, with
equality on the support.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import SingularMatrixError
from .numerics import logdet_psd, schur_complement, symmetrize

__all__ = [
    "Design",
    "DCriterion",
    "DACriterion",
    "DsCriterion",
    "subset_criterion",
    "OptimizerConfig",
    "DesignResult",
    "info_matrix",
    "criterion_value",
    "sensitivity",
    "sensitivity_map",
    "optimize_design",
    "efficiency",
    "efficiency_loss_percent",
    "check_certificate",
    "CertificateReport",
]


@dataclass(frozen=True)
class Design:
    """Finite-support design: points x_i with weights w_i summing to 1."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_1d(np.asarray(self.points, float)))
        object.__setattr__(self, "weights", np.atleast_1d(np.asarray(self.weights, float)))
        if self.points.shape != self.weights.shape:
            raise ValueError("points and weights must have equal length")
        if np.any(self.weights < 0):
            raise ValueError("design weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"design weights sum to {self.weights.sum()}, not 1")

    def canonical(self, merge_tol: float = 1e-9) -> "Design":
        """Sorted copy with points closer than merge_tol merged."""
        order = np.argsort(self.points)
        pts = self.points[order]
        wts = self.weights[order]
        out_p, out_w = [pts[0]], [wts[0]]
        for p, w in zip(pts[1:], wts[1:]):
            if p - out_p[-1] <= merge_tol:
                # weight-average the merged location
                out_p[-1] = (out_p[-1] * out_w[-1] + p * w) / (out_w[-1] + w)
                out_w[-1] += w
            else:
                out_p.append(p)
                out_w.append(w)
        w = np.array(out_w)
        return Design(np.array(out_p), w / w.sum())

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class DCriterion:
    """Maximize log det M: joint precision for all parameters."""

    kind = "D"

    def bound(self, dim: int) -> float:
        return float(dim)


@dataclass(frozen=True)
class DACriterion:
    """Maximize -log det(A^T M^-1 A): precision of the contrasts A^T gamma.

    ``a_matrix`` has shape (k+l, s) with full column rank s < k+l.
    """

    a_matrix: np.ndarray
    kind = "DA"

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a_matrix, float))
        object.__setattr__(self, "a_matrix", a)
        if a.shape[1] >= a.shape[0]:
            raise ValueError("contrast matrix must be tall: s < k+l")
        if np.linalg.matrix_rank(a) < a.shape[1]:
            raise ValueError("contrast matrix must have full column rank")

    @property
    def s(self) -> int:
        return self.a_matrix.shape[1]

    def bound(self, dim: int) -> float:
        if self.a_matrix.shape[0] != dim:
            raise ValueError("contrast matrix does not match parameter dimension")
        return float(self.s)


@dataclass(frozen=True)
class DsCriterion:
    """Maximize log det of the Schur complement of the leading s block."""

    s: int
    kind = "Ds"

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("subset size must be >= 1")

    def bound(self, dim: int) -> float:
        if not self.s < dim:
            raise ValueError("subset must be a strict subset: s < k+l")
        return float(self.s)


def subset_criterion(indices, dim: int) -> DACriterion:
    """DA criterion selecting an arbitrary coordinate subset of gamma.

    Equivalent to Ds after permuting the chosen coordinates to the front.
    """
    indices = list(indices)
    a = np.zeros((dim, len(indices)))
    for col, idx in enumerate(indices):
        a[idx, col] = 1.0
    return DACriterion(a)


def info_matrix(model, design: Design, gamma=None) -> np.ndarray:
    """Normalized information matrix sum_i w_i m(x_i, gamma)."""
    fims = model.fim_batch(design.points, gamma)
    return symmetrize(np.einsum("n,nij->ij", design.weights, fims))


def criterion_value(m: np.ndarray, spec) -> float:
    """Criterion value of an information matrix (larger is better)."""
    try:
        if spec.kind == "D":
            return logdet_psd(m)
        if spec.kind == "Ds":
            return logdet_psd(schur_complement(m, spec.s))
        if spec.kind == "DA":
            a = spec.a_matrix
            c, low = cho_factor(m, lower=True)
            x = cho_solve((c, low), a)
            return -logdet_psd(symmetrize(a.T @ x))
    except np.linalg.LinAlgError as exc:  # cho_factor failure
        raise SingularMatrixError(f"{spec.kind}-criterion: {exc}") from exc
    raise TypeError(f"unknown criterion {spec!r}")


def _sensitivity_weight_matrix(m: np.ndarray, spec) -> np.ndarray:
    """Matrix P with sensitivity(x) = <P, m(x)> (Frobenius inner product)."""
    dim = m.shape[0]
    try:
        if spec.kind == "D":
            c, low = cho_factor(m, lower=True)
            return symmetrize(cho_solve((c, low), np.eye(dim)))
        if spec.kind == "Ds":
            c, low = cho_factor(m, lower=True)
            minv = cho_solve((c, low), np.eye(dim))
            s = spec.s
            m22 = m[s:, s:]
            c2, low2 = cho_factor(m22, lower=True)
            p = minv.copy()
            p[s:, s:] -= cho_solve((c2, low2), np.eye(dim - s))
            return symmetrize(p)
        if spec.kind == "DA":
            a = spec.a_matrix
            c, low = cho_factor(m, lower=True)
            g = cho_solve((c, low), a)  # M^-1 A
            mid = symmetrize(a.T @ g)  # A^T M^-1 A
            cm, lowm = cho_factor(mid, lower=True)
            return symmetrize(g @ cho_solve((cm, lowm), g.T))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{spec.kind}-sensitivity: {exc}") from exc
    raise TypeError(f"unknown criterion {spec!r}")


def sensitivity(model, x, design: Design, gamma, spec) -> float:
    """Equivalence-theorem sensitivity function at a single point."""
    m = info_matrix(model, design, gamma)
    p = _sensitivity_weight_matrix(m, spec)
    return float(np.sum(p * model.fim_single(x, gamma)))


def sensitivity_map(m: np.ndarray, fims: np.ndarray, spec) -> np.ndarray:
    """Sensitivities of a stack of single-point FIMs against a fixed M."""
    p = _sensitivity_weight_matrix(m, spec)
    return np.einsum("ij,nij->n", p, fims)


@dataclass(frozen=True)
class OptimizerConfig:
    grid_size: int = 201
    max_iter: int = 20000
    delta: float = 1e-4  # relative sensitivity slack for convergence
    w_floor: float = 1e-6  # weights below this are purged
    damping: float = 1.0  # multiplicative exponent lambda
    exchange_every: int = 25  # weight steps between vertex-exchange passes
    polish: bool = True
    polish_rounds: int = 2
    merge_tol: float = 1e-9


@dataclass
class DesignResult:
    design: Design
    criterion_value: float
    max_sensitivity: float
    sensitivity_samples: np.ndarray  # (n, 2): x, sensitivity
    iterations: int
    converged: bool
    bound: float
    criterion_history: list = field(default_factory=list, repr=False)


class _GridState:
    """Weight vector over a candidate grid plus cached FIMs."""

    def __init__(self, points, fims, spec, bound):
        self.points = points
        self.fims = fims
        self.spec = spec
        self.bound = bound
        n = len(points)
        self.w = np.full(n, 1.0 / n)

    def info(self):
        return symmetrize(np.einsum("n,nij->ij", self.w, self.fims))

    def value(self):
        return criterion_value(self.info(), self.spec)

    def sens(self):
        return sensitivity_map(self.info(), self.fims, self.spec)


def _multiplicative_pass(state: _GridState, damping, steps, history):
    """Damped multiplicative reweighting w <- w (sens/bound)^lambda.

    Monotonicity guard: a step that decreases the criterion is retried
    with the exponent halved (the undamped update is only guaranteed
    monotone for D-type criteria).
    """
    val = history[-1] if history else state.value()
    done = 0
    for _ in range(steps):
        sens = state.sens()
        lam = damping
        w_old = state.w
        for _try in range(12):
            w_new = w_old * (sens / state.bound) ** lam
            total = w_new.sum()
            if total <= 0 or not np.isfinite(total):
                lam *= 0.5
                continue
            w_new = w_new / total
            state.w = w_new
            new_val = state.value()
            if new_val >= val - 1e-10:
                break
            lam *= 0.5
        else:
            state.w = w_old
            break
        val = new_val
        history.append(val)
        done += 1
    return done


def _guarded_purge(state: _GridState, keep_idx: int, w_floor: float):
    """Remove negligible weights; undo if that breaks the information rank.

    Tiny weights can still be carrying the identifiability of a parameter
    block (single-point FIMs here have low rank), so a purge that makes
    the criterion singular is rolled back.
    """
    w_old = state.w
    keep = w_old >= w_floor
    keep[keep_idx] = True
    w_new = np.where(keep, w_old, 0.0)
    w_new[keep_idx] = max(w_new[keep_idx], w_floor)
    w_new = w_new / w_new.sum()
    state.w = w_new
    try:
        state.value()
    except SingularMatrixError:
        state.w = w_old


def _wynn_step(state: _GridState, idx: int, history):
    """Move mass toward grid point ``idx``: w <- (1-eta) w + eta e_idx.

    The step size is chosen by golden-section maximization of the
    criterion along the segment, so the step is monotone by construction.
    Complements the multiplicative sweep, which shifts mass only slowly
    for small-subset criteria.
    """
    w0 = state.w

    def value_at(eta):
        w = (1.0 - eta) * w0
        w[idx] += eta
        state.w = w
        try:
            return state.value()
        except SingularMatrixError:
            return -np.inf

    eta, val = _golden_max(value_at, 0.0, 0.5, tol=1e-6, max_iter=40)
    if eta > 1e-12 and val >= history[-1] - 1e-12:
        w = (1.0 - eta) * w0
        w[idx] += eta
        state.w = w
        history.append(val)
    else:
        state.w = w0


def _golden_max(fn, lo, hi, tol=1e-10, max_iter=80):
    """Golden-section maximization on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def optimize_design(model, gamma=None, spec=DCriterion(), grid=None,
                    cfg: OptimizerConfig = OptimizerConfig()) -> DesignResult:
    """Compute a criterion-optimal approximate design on an interval.

    Alternates damped multiplicative weight updates on the active grid
    with vertex-exchange steps (inject the sensitivity argmax, purge
    negligible weights), then polishes each surviving support point by
    golden-section maximization of the sensitivity function within its
    grid cell. Terminates when the maximum sensitivity over the candidate
    grid is below bound*(1 + delta), or at the iteration cap, in which
    case the result is returned with converged=False rather than raising.

    Parameters
    ----------
    model : object
        Provides fim_batch/fim_single, design_space and n_params.
    gamma : array_like, optional
        Localized parameter vector (model default when omitted).
    spec : DCriterion | DACriterion | DsCriterion
    grid : array_like, optional
        Candidate points; default ``cfg.grid_size`` equispaced points.
    cfg : OptimizerConfig
    """
    lo, hi = model.design_space
    if grid is None:
        grid = np.linspace(lo, hi, cfg.grid_size)
    else:
        grid = np.asarray(grid, dtype=float)
    if gamma is None:
        gamma = model.default_gamma()
    bound = spec.bound(model.n_params)
    fims = model.fim_batch(grid, gamma)
    state = _GridState(grid, fims, spec, bound)

    history = [state.value()]
    total_steps = 0
    converged = False
    stalls = 0
    while total_steps < cfg.max_iter:
        done = _multiplicative_pass(
            state, cfg.damping, min(cfg.exchange_every, cfg.max_iter - total_steps),
            history,
        )
        total_steps += done + 1
        # vertex exchange: transfer mass toward the sensitivity argmax,
        # then purge negligible weights
        sens = state.sens()
        if np.max(sens) <= bound * (1.0 + cfg.delta):
            converged = True
            break
        prev_val = history[-1]
        _wynn_step(state, int(np.argmax(sens)), history)
        _guarded_purge(state, int(np.argmax(sens)), cfg.w_floor)
        stalls = stalls + 1 if (done == 0 and history[-1] <= prev_val + 1e-12) else 0
        if stalls >= 2:  # neither sweep can improve further
            break

    # polish support points off-grid by maximizing the sensitivity
    if cfg.polish and converged:
        cell = (grid[-1] - grid[0]) / max(len(grid) - 1, 1)
        for _ in range(cfg.polish_rounds):
            m = state.info()
            p = _sensitivity_weight_matrix(m, spec)
            active = np.flatnonzero(state.w > 0)

            def sens_at(x):
                return float(np.sum(p * model.fim_single(x, gamma)))

            new_pts = state.points.copy()
            for idx in active:
                x0 = state.points[idx]
                x_new, _ = _golden_max(sens_at, max(lo, x0 - cell), min(hi, x0 + cell))
                new_pts[idx] = x_new
            moved = np.any(new_pts != state.points)
            if moved:
                refreshed = model.fim_batch(new_pts[active], gamma)
                state.points = state.points.copy()
                state.fims = state.fims.copy()
                state.points[active] = new_pts[active]
                state.fims[active] = refreshed
            total_steps += _multiplicative_pass(state, cfg.damping, 400, history)
            _guarded_purge(state, int(np.argmax(state.sens())), cfg.w_floor)

    active = np.flatnonzero(state.w > 0)
    design = Design(state.points[active], state.w[active]).canonical(cfg.merge_tol)
    m = info_matrix(model, design, gamma)
    sens_grid = sensitivity_map(m, fims, spec)
    max_sens = float(np.max(sens_grid))
    converged = converged and max_sens <= bound * (1.0 + 2 * cfg.delta)
    return DesignResult(
        design=design,
        criterion_value=criterion_value(m, spec),
        max_sensitivity=max_sens,
        sensitivity_samples=np.column_stack([grid, sens_grid]),
        iterations=total_steps,
        converged=converged,
        bound=bound,
        criterion_history=history,
    )


def efficiency(model, design: Design, reference: Design, gamma=None, spec=DCriterion()) -> float:
    """Criterion efficiency of ``design`` relative to ``reference``.

    Determinant ratio to the power 1/s (1/(k+l) for the D-criterion);
    equals 1 when the designs are equally informative and is below 1
    whenever the reference is better.
    """
    bound = spec.bound(model.n_params)
    v1 = criterion_value(info_matrix(model, design, gamma), spec)
    v2 = criterion_value(info_matrix(model, reference, gamma), spec)
    return float(np.exp((v1 - v2) / bound))


def efficiency_loss_percent(model, design, reference, gamma=None, spec=DCriterion()) -> float:
    """(1 - efficiency) * 100."""
    return 100.0 * (1.0 - efficiency(model, design, reference, gamma, spec))


@dataclass(frozen=True)
class CertificateReport:
    max_sensitivity: float
    bound: float
    slack: float
    weighted_sensitivity: float  # sum_i w_i sens(x_i), equals bound at any design
    passed: bool


def check_certificate(model, design: Design, gamma, spec, grid_size: int = 2001,
                      slack: float = 2e-4) -> CertificateReport:
    """Re-check the equivalence-theorem certificate on a fresh fine grid.

    Verifies max-sensitivity <= bound*(1+slack) over ``grid_size``
    equispaced points including the support, and the trace identity
    sum_i w_i sens(x_i) == bound.
    """
    lo, hi = model.design_space
    grid = np.linspace(lo, hi, grid_size)
    if gamma is None:
        gamma = model.default_gamma()
    bound = spec.bound(model.n_params)
    m = info_matrix(model, design, gamma)
    sens_grid = sensitivity_map(m, model.fim_batch(grid, gamma), spec)
    sens_support = sensitivity_map(m, model.fim_batch(design.points, gamma), spec)
    max_sens = float(max(np.max(sens_grid), np.max(sens_support)))
    weighted = float(np.dot(design.weights, sens_support))
    passed = max_sens <= bound * (1.0 + slack) and abs(weighted - bound) <= 1e-8
    return CertificateReport(
        max_sensitivity=max_sens,
        bound=bound,
        slack=slack,
        weighted_sensitivity=weighted,
        passed=passed,
    )
