"""Convex QP kernel: min 1/2 x'Hx + c'x s.t. equalities, inequalities, bounds.

Backed by the Clarabel interior-point solver; KKT residuals are recomputed
here, independently of the solver's own reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max-iterations"


@dataclass
class QuadraticProgram:
    H: sp.csc_matrix            # symmetric PSD (diagonal in all uses here)
    c: np.ndarray
    A_eq: sp.csc_matrix | None = None
    b_eq: np.ndarray | None = None
    A_in: sp.csc_matrix | None = None   # A_in x <= b_in
    b_in: np.ndarray | None = None
    lower: np.ndarray | None = None     # -inf allowed
    upper: np.ndarray | None = None     # +inf allowed
    labels: list | None = None          # per-variable (unit, interval) tags

    def __post_init__(self):
        self.H = sp.csc_matrix(self.H)
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        if self.H.shape != (n, n):
            raise ValueError(f"H shape {self.H.shape} does not match n={n}")
        h_scale = float(abs(self.H).max()) if self.H.nnz else 0.0
        if (abs(self.H - self.H.T) > 1e-12 * (1.0 + h_scale)).nnz:
            raise ValueError("H is not symmetric")
        if self.H.diagonal().min(initial=0.0) < -1e-12:
            raise ValueError("H has a negative diagonal entry")
        for name in ("A_eq", "A_in"):
            a = getattr(self, name)
            if a is not None:
                a = sp.csc_matrix(a)
                setattr(self, name, a)
                if a.shape[1] != n:
                    raise ValueError(f"{name} has {a.shape[1]} columns, expected {n}")
        if (self.A_eq is None) != (self.b_eq is None):
            raise ValueError("A_eq and b_eq must be given together")
        if (self.A_in is None) != (self.b_in is None):
            raise ValueError("A_in and b_in must be given together")
        if self.b_eq is not None:
            self.b_eq = np.asarray(self.b_eq, dtype=float)
            if self.b_eq.size != self.A_eq.shape[0]:
                raise ValueError("b_eq length does not match A_eq")
        if self.b_in is not None:
            self.b_in = np.asarray(self.b_in, dtype=float)
            if self.b_in.size != self.A_in.shape[0]:
                raise ValueError("b_in length does not match A_in")
        if self.lower is not None:
            self.lower = np.asarray(self.lower, dtype=float)
        if self.upper is not None:
            self.upper = np.asarray(self.upper, dtype=float)
        if self.lower is not None and self.upper is not None:
            if np.any(self.lower > self.upper + 1e-12):
                raise ValueError("lower bound exceeds upper bound")

    @property
    def n(self):
        return self.c.size

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ (self.H @ x)) + float(self.c @ x)


@dataclass
class KktResiduals:
    primal: float
    dual: float
    complementarity: float


@dataclass
class QpSolution:
    x: np.ndarray = field(repr=False)
    objective: float
    status: str
    kkt: KktResiduals
    iterations: int = 0


def _stack_conic(qp: QuadraticProgram):
    """Rewrite the QP constraints as Ax + s = b with zero/nonnegative cones."""
    n = qp.n
    blocks, rhs, cones = [], [], []
    m_eq = 0
    if qp.A_eq is not None and qp.A_eq.shape[0]:
        blocks.append(qp.A_eq)
        rhs.append(qp.b_eq)
        m_eq = qp.A_eq.shape[0]
        cones.append(clarabel.ZeroConeT(m_eq))
    m_in = 0
    if qp.A_in is not None and qp.A_in.shape[0]:
        blocks.append(qp.A_in)
        rhs.append(qp.b_in)
        m_in += qp.A_in.shape[0]
    eye = sp.identity(n, format="csc")
    if qp.upper is not None:
        rows = np.flatnonzero(np.isfinite(qp.upper))
        if rows.size:
            blocks.append(eye[rows])
            rhs.append(qp.upper[rows])
            m_in += rows.size
    if qp.lower is not None:
        rows = np.flatnonzero(np.isfinite(qp.lower))
        if rows.size:
            blocks.append(-eye[rows])
            rhs.append(-qp.lower[rows])
            m_in += rows.size
    if m_in:
        cones.append(clarabel.NonnegativeConeT(m_in))
    if blocks:
        a = sp.vstack(blocks, format="csc")
        b = np.concatenate(rhs)
    else:
        a = sp.csc_matrix((0, n))
        b = np.zeros(0)
    return a, b, cones, m_eq


def _kkt_residuals(qp: QuadraticProgram, x, a, b, z, m_eq):
    """Independent KKT check at (x, z) for the stacked conic form."""
    slack = b - a @ x
    primal = 0.0
    if m_eq:
        primal = float(np.max(np.abs(slack[:m_eq]), initial=0.0))
    if slack.size > m_eq:
        primal = max(primal, float(np.max(-slack[m_eq:], initial=0.0)))
    dual_vec = qp.H @ x + qp.c + a.T @ z
    dual = float(np.max(np.abs(dual_vec), initial=0.0))
    comp = 0.0
    if slack.size > m_eq:
        comp = float(np.max(np.abs(z[m_eq:] * slack[m_eq:]), initial=0.0))
    return KktResiduals(primal=primal, dual=dual, complementarity=comp)


def _make_settings(feas_tol, max_iter):
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = int(max_iter)
    # solve tighter than the contract tolerances so the independent KKT
    # check is what binds
    settings.tol_feas = min(feas_tol, 1e-9)
    settings.tol_gap_abs = 1e-9
    settings.tol_gap_rel = 1e-10
    return settings


def _finalize(qp, res, a, b, m_eq, feas_tol, opt_tol) -> QpSolution:
    """Classify a raw solver result against independently computed residuals."""
    status_name = str(res.status)
    x = np.asarray(res.x, dtype=float)
    z = np.asarray(res.z, dtype=float)
    kkt = _kkt_residuals(qp, x, a, b, z, m_eq)
    scale = 1.0 + max(float(np.max(np.abs(qp.c), initial=0.0)),
                      float(np.max(np.abs(qp.H.data), initial=0.0)) if qp.H.nnz else 0.0)

    if "Infeasible" in status_name:
        status = INFEASIBLE
    elif status_name in ("Solved", "AlmostSolved") and \
            kkt.primal <= feas_tol and kkt.dual <= opt_tol * scale:
        status = OPTIMAL
    else:
        status = MAX_ITERATIONS
    return QpSolution(x=x, objective=qp.objective(x), status=status, kkt=kkt,
                      iterations=int(res.iterations))


def solve_qp(qp: QuadraticProgram, feas_tol=1e-6, opt_tol=1e-6, max_iter=200,
             x0=None) -> QpSolution:
    """Solve a convex QP; deterministic for identical inputs.

    `x0` is accepted for interface compatibility and currently ignored (the
    interior-point backend does not warm start); passing it never changes the
    result. Dual residuals are scale-relative to the objective data.
    """
    del x0
    a, b, cones, m_eq = _stack_conic(qp)
    settings = _make_settings(feas_tol, max_iter)
    solver = clarabel.DefaultSolver(sp.csc_matrix(qp.H), qp.c, a, b, cones, settings)
    res = solver.solve()
    return _finalize(qp, res, a, b, m_eq, feas_tol, opt_tol)


class PersistentQpSolver:
    """Re-solve a family of QPs sharing constraints, bounds, and variable count.

    Only the quadratic diagonal and the linear term may differ between calls.
    The conic form and the interior-point workspace (including the symbolic
    factorization) are built once from the template problem; later solves
    push new objective data into the existing workspace. The diagonal is
    stored with explicit zeros so every entry stays updatable.
    """

    def __init__(self, template: QuadraticProgram, feas_tol=1e-6, opt_tol=1e-6,
                 max_iter=200):
        if template.H.nnz and (abs(template.H - sp.diags(template.H.diagonal())
                                   ).nnz):
            raise ValueError("persistent solving requires a diagonal H")
        self._feas_tol = feas_tol
        self._opt_tol = opt_tol
        self._a, self._b, self._cones, self._m_eq = _stack_conic(template)
        n = template.n
        idx = np.arange(n)
        p = sp.csc_matrix((template.H.diagonal(), (idx, idx)), shape=(n, n))
        # repeated solves inside an outer iteration tolerate looser interior
        # point targets than one-shot solves; the independent KKT check in
        # _finalize still gates the reported status at the contract tolerances
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = int(max_iter)
        settings.tol_feas = feas_tol / 10.0
        settings.tol_gap_abs = opt_tol / 10.0
        settings.tol_gap_rel = 1e-8
        self._solver = clarabel.DefaultSolver(
            p, template.c, self._a, self._b, self._cones, settings)

    def solve(self, qp: QuadraticProgram) -> QpSolution:
        """Solve `qp`, which must share the template's constraints."""
        self._solver.update(P=qp.H.diagonal(), q=qp.c)
        res = self._solver.solve()
        return _finalize(qp, res, self._a, self._b, self._m_eq,
                         self._feas_tol, self._opt_tol)
