"""Two-phase revised simplex with an explicit basis inverse.

The working problem is ``min c.x  s.t.  A x = b, x >= 0, b >= 0`` built from
the model by shifting lower bounds, turning upper bounds into rows, scaling
each row by its largest coefficient and adding slack and artificial
columns.  Entering variables are chosen by most negative reduced cost
(lowest index on ties); after ``BLAND_AFTER`` consecutive degenerate
pivots the solver switches to Bland's rule for the rest of the phase.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import EQ, GE, LE, MAXIMIZE, LPModel, LPSolution, Status

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
RC_TOL = 1e-9
PIVOT_TOL = 1e-9
BOUND_TOL = 1e-9
BLAND_AFTER = 1000
REFACTOR_EVERY = 64


class _Unstable(Exception):
    pass


class _Standard:
    """Equality-form problem derived from an :class:`LPModel`."""

    def __init__(self, model: LPModel, perturb: float = 0.0, seed: int = 0):
        n = model.n_vars
        lower = np.asarray(model.lower, dtype=float)
        rows_i: list[int] = []
        rows_j: list[int] = []
        vals: list[float] = []
        rhs: list[float] = []
        rels: list[str] = []
        self.infeasible_empty_row = False
        r = 0
        for con in model.constraints:
            b = con.rhs - sum(c * lower[i] for i, c in con.coeffs.items())
            if not con.coeffs:
                ok = (b >= -FEAS_TOL) if con.rel == LE else (b <= FEAS_TOL) if con.rel == GE else abs(b) <= FEAS_TOL
                if not ok:
                    self.infeasible_empty_row = True
                continue
            scale = max(abs(c) for c in con.coeffs.values())
            for i, c in con.coeffs.items():
                rows_i.append(r)
                rows_j.append(i)
                vals.append(c / scale)
            rhs.append(b / scale)
            rels.append(con.rel)
            r += 1
        for i, up in enumerate(model.upper):
            if up is None:
                continue
            rows_i.append(r)
            rows_j.append(i)
            vals.append(1.0)
            rhs.append(up - lower[i])
            rels.append(LE)
            r += 1
        m = r
        b = np.asarray(rhs, dtype=float)
        if perturb:
            rng = np.random.default_rng(seed)
            b = b + perturb * (1.0 + np.abs(b)) * rng.random(m)
        sign = np.where(b < 0, -1.0, 1.0)
        b = b * sign
        rels = [
            rel if s > 0 else (GE if rel == LE else LE if rel == GE else EQ)
            for rel, s in zip(rels, sign)
        ]
        vals = [v * sign[i] for i, v in zip(rows_i, vals)]
        col = n
        basis = [-1] * m
        for i, rel in enumerate(rels):
            if rel == EQ:
                continue
            rows_i.append(i)
            rows_j.append(col)
            vals.append(1.0 if rel == LE else -1.0)
            if rel == LE:
                basis[i] = col
            col += 1
        self.n_struct = n
        self.n_slack = col - n
        art_start = col
        for i in range(m):
            if basis[i] < 0:
                rows_i.append(i)
                rows_j.append(col)
                vals.append(1.0)
                basis[i] = col
                col += 1
        self.art_start = art_start
        self.n_cols = col
        self.m = m
        self.A = sp.csc_matrix((vals, (rows_i, rows_j)), shape=(m, col), dtype=float)
        self.AT = self.A.T.tocsr()
        self.b = b
        self.basis = np.asarray(basis, dtype=int)
        self.lower = lower
        c = model.cost_vector()
        if model.sense == MAXIMIZE:
            c = -c
        self.cost2 = np.concatenate([c, np.zeros(col - n)])
        self.cost1 = np.concatenate([np.zeros(art_start), np.ones(col - art_start)])


class _Solver:
    def __init__(self, std: _Standard, max_iter: int):
        self.s = std
        self.basis = std.basis.copy()
        self.iterations = 0
        self.max_iter = max_iter
        self._refactor()

    def _refactor(self) -> None:
        s = self.s
        if s.m == 0:
            self.Binv = np.zeros((0, 0))
            self.xB = np.zeros(0)
            return
        B = s.A[:, self.basis].tocsc()
        try:
            lu = spla.splu(B)
        except RuntimeError as exc:  # exactly singular
            raise _Unstable(str(exc)) from None
        self.Binv = lu.solve(np.eye(s.m))
        if not np.all(np.isfinite(self.Binv)):
            raise _Unstable("singular basis")
        self.xB = self.Binv @ s.b
        self.xB[(self.xB < 0) & (self.xB > -1e-9)] = 0.0
        self.since_refactor = 0

    def column(self, q: int) -> np.ndarray:
        A = self.s.A
        lo, hi = A.indptr[q], A.indptr[q + 1]
        return self.Binv[:, A.indices[lo:hi]] @ A.data[lo:hi]

    def pivot(self, r: int, q: int, alpha: np.ndarray, theta: float) -> None:
        self.xB -= theta * alpha
        self.xB[r] = theta
        self.xB[(self.xB < 0) & (self.xB > -1e-9)] = 0.0
        piv_row = self.Binv[r] / alpha[r]
        # basis-inverse columns are mostly sparse; touch only rows that change
        rows = np.flatnonzero(alpha)
        self.Binv[rows] -= alpha[rows, None] * piv_row
        self.Binv[r] = piv_row
        self.basis[r] = q
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self._refactor()

    def run(self, cost: np.ndarray, allowed: np.ndarray) -> str:
        """Minimise ``cost``; returns "optimal" or "unbounded"."""
        s = self.s
        bland = False
        degenerate = 0
        in_basis = np.zeros(s.n_cols, dtype=bool)
        while True:
            if self.iterations >= self.max_iter:
                raise _Unstable("iteration limit")
            y = cost[self.basis] @ self.Binv if s.m else np.zeros(0)
            d = cost - s.AT @ y if s.m else cost.copy()
            in_basis[:] = False
            in_basis[self.basis] = True
            cand = (~in_basis) & allowed & (d < -RC_TOL)
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "optimal"
            q = int(idx[0]) if bland else int(idx[np.argmin(d[idx])])
            alpha = self.column(q)
            pos = np.flatnonzero(alpha > PIVOT_TOL)
            if pos.size == 0:
                return "unbounded"
            ratios = self.xB[pos] / alpha[pos]
            theta = float(ratios.min())
            ties = pos[ratios <= theta + 1e-12 * (1.0 + abs(theta))]
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(alpha[ties])])
            theta = max(0.0, float(self.xB[r] / alpha[r]))
            if theta <= 1e-12:
                degenerate += 1
                if degenerate >= BLAND_AFTER and not bland:
                    log.debug("switching to Bland's rule after %d degenerate pivots", degenerate)
                    bland = True
            else:
                degenerate = 0
            self.pivot(r, q, alpha, theta)
            self.iterations += 1

    def drive_out_artificials(self) -> None:
        s = self.s
        for r in range(s.m):
            if self.basis[r] < s.art_start:
                continue
            row = s.A[:, : s.art_start].T @ self.Binv[r]
            row[self.basis[self.basis < s.art_start]] = 0.0
            j = int(np.argmax(np.abs(row))) if row.size else -1
            if j < 0 or abs(row[j]) <= 1e-7:
                continue  # redundant row; the artificial stays basic at zero
            alpha = self.column(j)
            self.pivot(r, j, alpha, float(self.xB[r] / alpha[r]))
            self.iterations += 1

    def primal(self) -> np.ndarray:
        x = np.zeros(self.s.n_cols)
        x[self.basis] = self.xB
        return x


def _attempt(model: LPModel, perturb: float, seed: int) -> tuple[Status, np.ndarray | None, int, str]:
    std = _Standard(model, perturb, seed)
    if std.infeasible_empty_row:
        return Status.INFEASIBLE, None, 0, "empty row with unsatisfiable right-hand side"
    solver = _Solver(std, max_iter=50 * (std.m + std.n_cols) + 1000)
    allowed1 = np.ones(std.n_cols, dtype=bool)
    solver.run(std.cost1, allowed1)
    solver._refactor()
    infeas = float(std.cost1[solver.basis] @ solver.xB)
    if infeas > FEAS_TOL * max(1.0, std.m**0.5):
        return Status.INFEASIBLE, None, solver.iterations, f"phase 1 residual {infeas:.3e}"
    solver.drive_out_artificials()
    if not model.is_feasibility:
        allowed2 = np.zeros(std.n_cols, dtype=bool)
        allowed2[: std.art_start] = True
        outcome = solver.run(std.cost2, allowed2)
        if outcome == "unbounded":
            return Status.UNBOUNDED, None, solver.iterations, ""
        solver._refactor()
    x = solver.primal()[: std.n_struct] + std.lower
    return Status.OPTIMAL, x, solver.iterations, ""


def _verify(model: LPModel, x: np.ndarray) -> bool:
    if model.n_constraints and model.residuals(x).max() > FEAS_TOL:
        return False
    lo = np.asarray(model.lower)
    if np.any(x < lo - BOUND_TOL):
        return False
    for i, up in enumerate(model.upper):
        if up is not None and x[i] > up + BOUND_TOL:
            return False
    return True


def _clip(model: LPModel, x: np.ndarray) -> np.ndarray:
    x = np.maximum(x, np.asarray(model.lower))
    for i, up in enumerate(model.upper):
        if up is not None and x[i] > up:
            x[i] = up
    return x


def slacks(model: LPModel, x: np.ndarray) -> np.ndarray:
    out = np.zeros(model.n_constraints)
    for r, con in enumerate(model.constraints):
        lhs = sum(c * x[i] for i, c in con.coeffs.items())
        out[r] = (lhs - con.rhs) if con.rel == GE else (con.rhs - lhs)
    return out


def solve_simplex(model: LPModel) -> LPSolution:
    iters = 0
    for attempt, perturb in enumerate((0.0, 1e-10, 1e-9)):
        try:
            status, x, it, msg = _attempt(model, perturb, seed=attempt)
        except _Unstable as exc:
            log.debug("simplex attempt %d unstable: %s", attempt, exc)
            continue
        iters += it
        if status is not Status.OPTIMAL:
            if perturb == 0.0:
                return LPSolution(status, iterations=iters, message=msg)
            continue
        assert x is not None
        if _verify(model, x):
            x = _clip(model, x)
            return LPSolution(
                Status.OPTIMAL, x, model.evaluate(x), slacks(model, x), iters, msg
            )
        log.debug("simplex attempt %d failed verification; retrying perturbed", attempt)
    return LPSolution(
        Status.NUMERICALLY_UNSTABLE, iterations=iters, message="no verified basis after restarts"
    )


def solve_highs(model: LPModel) -> LPSolution:
    """Cross-check backend using the HiGHS solver bundled with SciPy."""
    from scipy.optimize import linprog

    A = model.matrix()
    rel = [c.rel for c in model.constraints]
    rhs = np.array([c.rhs for c in model.constraints])
    le = [i for i, r in enumerate(rel) if r == LE]
    ge = [i for i, r in enumerate(rel) if r == GE]
    eq = [i for i, r in enumerate(rel) if r == EQ]
    a_ub = sp.vstack([A[le], -A[ge]]) if le or ge else None
    b_ub = np.concatenate([rhs[le], -rhs[ge]]) if le or ge else None
    c = model.cost_vector()
    if model.sense == MAXIMIZE:
        c = -c
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=A[eq] if eq else None,
        b_eq=rhs[eq] if eq else None,
        bounds=list(zip(model.lower, model.upper)),
        method="highs",
    )
    if res.status == 2:
        return LPSolution(Status.INFEASIBLE, message=res.message)
    if res.status == 3:
        return LPSolution(Status.UNBOUNDED, message=res.message)
    if res.status != 0:
        return LPSolution(Status.NUMERICALLY_UNSTABLE, message=res.message)
    x = _clip(model, np.asarray(res.x, dtype=float))
    return LPSolution(Status.OPTIMAL, x, model.evaluate(x), slacks(model, x), int(res.nit), "")
