"""Single-constraint convex QCQP solved through its KKT conditions.

    minimize    x^H A x - x^H v - v^H x
    subject to  x^H B x + q^H x + x^H q + c <= P

with A Hermitian PD and B Hermitian PSD. The stationary point for a
multiplier λ is ``x(λ) = (A + λB)^{-1}(v - λq)`` and the constraint value
along that path is nonincreasing in λ, so λ is a scalar root-find.

λ = 0 is tried first with one Cholesky solve. Only when that point violates
the constraint is the pencil (A, B) diagonalized, after which every
evaluation of x(λ) and of the constraint is O(N).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from airfl.complexlin import cholesky
from airfl.errors import BracketFailure, DimensionMismatch, NoFeasiblePoint, NotPositiveDefinite

PENCIL_COND_MAX = 1e10


@dataclass
class QcqpInstance:
    a_mat: np.ndarray
    b_mat: np.ndarray
    v: np.ndarray
    q: np.ndarray = None
    const_term: float = 0.0
    budget: float = np.inf

    def __post_init__(self):
        self.a_mat = np.atleast_2d(np.asarray(self.a_mat, dtype=np.complex128))
        self.b_mat = np.atleast_2d(np.asarray(self.b_mat, dtype=np.complex128))
        self.v = np.asarray(self.v, dtype=np.complex128).reshape(-1)
        n = self.v.size
        self.q = np.zeros(n, complex) if self.q is None else np.asarray(self.q, dtype=np.complex128).reshape(-1)
        if self.a_mat.shape != (n, n) or self.b_mat.shape != (n, n) or self.q.size != n:
            raise DimensionMismatch("QCQP matrices and vectors disagree in size")
        self.const_term = float(np.real(self.const_term))

    @property
    def size(self):
        return self.v.size

    def objective(self, x):
        x = np.asarray(x, dtype=np.complex128)
        return float(np.real(np.vdot(x, self.a_mat @ x)) - 2.0 * np.real(np.vdot(x, self.v)))

    def constraint(self, x):
        x = np.asarray(x, dtype=np.complex128)
        return float(np.real(np.vdot(x, self.b_mat @ x)) + 2.0 * np.real(np.vdot(self.q, x)) + self.const_term)


@dataclass
class QcqpSolution:
    x: np.ndarray
    lam: float
    constraint: float
    objective: float
    method: str  # "unconstrained", "bound", "doubling", "grid", "forced"


class _WhitenedPencil:
    """Diagonalization of (A, B) used to evaluate x(λ) cheaply.

    ``t`` holds generalized eigenvectors with ``T^H A T = I`` and
    ``T^H B T = diag(mu)``.
    """

    def __init__(self, inst):
        try:
            mu, t = scipy.linalg.eigh(inst.b_mat, inst.a_mat, check_finite=False, driver="gvd")
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(f"A is not positive definite: {exc}") from exc
        self.mu = np.maximum(mu, 0.0)
        self.t = t
        self.alpha = t.conj().T @ inst.v
        self.beta = t.conj().T @ inst.q
        self.const = inst.const_term

    def coords(self, lam):
        return (self.alpha - lam * self.beta) / (1.0 + lam * self.mu)

    def x(self, lam):
        return self.t @ self.coords(lam)

    def constraint(self, lam):
        y = self.coords(lam)
        return float(self.mu @ np.abs(y) ** 2 + 2.0 * np.real(np.vdot(self.beta, y)) + self.const)

    def limit_constraint(self):
        """Constraint value as λ → ∞ (−inf when a B-null direction carries q)."""
        mu_max = self.mu.max() if self.mu.size else 0.0
        null = self.mu <= 1e-14 * max(mu_max, 1e-300)
        if np.any(np.abs(self.beta[null]) > 0):
            return -np.inf
        pos = ~null
        return float(self.const - np.sum(np.abs(self.beta[pos]) ** 2 / self.mu[pos]))


def solve_qcqp_kkt(inst, bisect_tol=1e-8, lambda_grid_points=2000, force_active=False):
    """Return the KKT point of ``inst`` as a :class:`QcqpSolution`.

    ``force_active`` makes the power constraint hold with equality even when
    λ = 0 would leave slack (λ is then allowed to go negative while A + λB
    stays PD).
    """
    budget = inst.budget
    low = cholesky(inst.a_mat)
    x0 = scipy.linalg.cho_solve((low, True), inst.v, check_finite=False)
    c0 = inst.constraint(x0)
    if not np.isfinite(budget):
        return QcqpSolution(x0, 0.0, c0, inst.objective(x0), "unconstrained")
    slack_tol = bisect_tol * max(abs(budget), 1e-300)
    if c0 <= budget + slack_tol and not (force_active and c0 < budget - slack_tol):
        return QcqpSolution(x0, 0.0, c0, inst.objective(x0), "unconstrained")

    if not force_active:
        newton = _newton_multiplier(inst, budget, c0, slack_tol)
        if newton is not None:
            lam, x, c = newton
            return QcqpSolution(x, lam, c, inst.objective(x), "newton")

    pencil = _WhitenedPencil(inst)

    def finish(lam, method):
        x = pencil.x(lam)
        return QcqpSolution(x, float(lam), inst.constraint(x), inst.objective(x), method)

    if c0 <= budget + slack_tol:
        return _forced_active(pencil, budget, bisect_tol, finish)

    if pencil.limit_constraint() > budget + slack_tol:
        raise NoFeasiblePoint(
            f"constraint cannot be brought below {pencil.limit_constraint():.6g} > budget {budget:.6g}"
        )

    def excess(lam):
        return pencil.constraint(lam) - budget

    hi, method = _upper_bracket(pencil, inst, budget, excess)
    try:
        lam = scipy.optimize.brentq(excess, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        lam = _feasible_side(excess, lam, hi, slack_tol)
    except (ValueError, RuntimeError, BracketFailure):
        lam = _grid_lambda(excess, hi, lambda_grid_points)
        method = "grid"
    return finish(lam, method)


def _newton_multiplier(inst, budget, c0, slack_tol, max_iter=60):
    """Safeguarded Newton on 1/sqrt(c(λ)) using one Cholesky of A + λB per step.

    Returns ``(λ, x, c)`` or ``None`` when the iteration fails to settle, in
    which case the caller diagonalizes the pencil instead.
    """
    if budget <= 0:
        return None
    a, bm, v, q = inst.a_mat, inst.b_mat, inst.v, inst.q
    target = budget ** -0.5
    lam, c, lo, hi = 0.0, c0, 0.0, np.inf
    for _ in range(max_iter):
        try:
            fac = scipy.linalg.cho_factor(a + lam * bm, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            return None
        x = scipy.linalg.cho_solve(fac, v - lam * q, check_finite=False)
        c = inst.constraint(x)
        if abs(c - budget) <= 1e-4 * slack_tol:
            return lam, x, c
        if c > budget:
            lo = lam
        else:
            hi = lam
        w = bm @ x + q
        dc = -2.0 * float(np.real(np.vdot(w, scipy.linalg.cho_solve(fac, w, check_finite=False))))
        if dc >= 0:
            return None
        if c > 0:
            # d/dλ c^{-1/2} = -½ c^{-3/2} c'
            step = (target - c ** -0.5) / (-0.5 * c ** -1.5 * dc)
        else:
            step = (budget - c) / dc
        nxt = lam + step
        if abs(step) <= 1e-14 * abs(lam):
            break
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi) if np.isfinite(hi) else max(4.0 * lam, nxt, 1e-300)
        if nxt == lam:
            break
        lam = nxt
    if c <= budget + slack_tol:
        return lam, x, c
    return None


def _upper_bracket(pencil, inst, budget, excess):
    mu = pencil.mu
    q_zero = not np.any(inst.q)
    if q_zero and mu.size and mu.min() > mu.max() / PENCIL_COND_MAX and budget > 0:
        # λ < sqrt(v^H B^{-1} v / P); in whitened coordinates v^H B^{-1} v = Σ|α|²/μ
        hi = float(np.sqrt(np.sum(np.abs(pencil.alpha) ** 2 / mu) / budget))
        if hi > 0 and excess(hi) <= 0:
            return hi, "bound"
    hi = 1.0 / max(mu.max(), 1e-300) if mu.size else 1.0
    for _ in range(2100):
        if excess(hi) <= 0:
            return hi, "doubling"
        hi *= 2.0
    raise NoFeasiblePoint("no multiplier brings the constraint under budget")


def _feasible_side(excess, lam, hi, slack_tol):
    """Nudge a root estimate so the constraint is not exceeded beyond tolerance."""
    if excess(lam) <= slack_tol:
        return lam
    lo = lam
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0:
            hi = mid
        else:
            lo = mid
        if abs(excess(hi)) <= slack_tol:
            break
    if excess(lo) < excess(hi):
        raise BracketFailure("constraint value not monotone on the bracket")
    return hi


def _grid_lambda(excess, hi, points):
    grid = np.concatenate([[0.0], np.logspace(np.log10(hi) - 16, np.log10(hi), points)])
    vals = np.array([excess(g) for g in grid])
    ok = np.nonzero(vals <= 0)[0]
    if ok.size == 0:
        raise NoFeasiblePoint("grid search found no feasible multiplier")
    k = int(ok[0])
    if k == 0:
        return 0.0
    lo, up = grid[k - 1], grid[k]
    for _ in range(200):
        mid = 0.5 * (lo + up)
        if excess(mid) <= 0:
            up = mid
        else:
            lo = mid
    return up


def _forced_active(pencil, budget, bisect_tol, finish):
    mu_max = pencil.mu.max()
    if mu_max <= 0:
        return finish(0.0, "unconstrained")
    lo = -1.0 / mu_max

    def excess(lam):
        return pencil.constraint(lam) - budget

    a = lo * (1 - 1e-12)
    if excess(a) < 0:
        return finish(0.0, "unconstrained")
    lam = scipy.optimize.brentq(excess, a, 0.0, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return finish(lam, "forced")


def kkt_residual(inst, sol):
    """Relative stationarity residual ‖(A + λB)x − (v − λq)‖ / ‖v − λq‖."""
    lam = sol.lam
    lhs = (inst.a_mat + lam * inst.b_mat) @ sol.x
    rhs = inst.v - lam * inst.q
    scale = max(np.linalg.norm(rhs), np.linalg.norm(lhs), 1e-300)
    return float(np.linalg.norm(lhs - rhs) / scale)
