"""Bounded-variable primal simplex with Bland's anti-cycling rule.

A self-contained dense implementation meant for desk-scale models and for
cross-checking the default LP backend.  Maximization only; structural
variables must have finite bounds.  Two phases: phase 1 drives artificial
variables out of an initial slack basis, phase 2 optimizes the real
objective.  Duals are the row prices y = B^-T c_B of the final basis:
nonnegative for <= rows, nonpositive for >= rows, free for equalities.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import SolverError

DUAL_TOL = 1e-9  # reduced-cost eligibility
PIVOT_TOL = 1e-10  # ratio-test pivot floor
RATIO_TIE = 1e-12  # tie window for Bland's leaving rule
REFACTOR_EVERY = 64


@dataclass
class SimplexResult:
    status: str  # optimal | infeasible | unbounded | limit
    x: Optional[np.ndarray]  # structural variables only
    duals: Optional[np.ndarray]  # one per row
    objective: float
    iterations: int


def solve(A, senses, b, lb, ub, c, time_limit=None, max_iterations=200_000) -> SimplexResult:
    """Maximize c'x subject to A x {<=,=,>=} b and lb <= x <= ub."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise SolverError("constraint matrix must be 2-D")
    m, n = A.shape
    c = np.asarray(c, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(lb > ub + 1e-15):
        return SimplexResult("infeasible", None, None, float("nan"), 0)
    if m == 0:
        x = np.where(c > 0, ub, lb).astype(float)
        return SimplexResult("optimal", x, np.zeros(0), float(c @ x), 0)

    st = _State(A, senses, b, lb, ub, n)
    deadline = None if time_limit is None else time.perf_counter() + float(time_limit)
    iters = 0

    if st.artificials:
        c1 = np.zeros(st.n_total)
        c1[st.artificials] = -1.0
        status, it1 = _iterate(st, c1, deadline, max_iterations)
        iters += it1
        if status == "limit":
            return SimplexResult("limit", None, None, float("nan"), iters)
        if status == "unbounded":
            raise SolverError("phase-1 objective reported unbounded")
        if float(c1 @ st.x) < -1e-7 * max(1.0, float(np.abs(st.b).sum())):
            return SimplexResult("infeasible", None, None, float("nan"), iters)
        st.lb[st.artificials] = 0.0
        st.ub[st.artificials] = 0.0

    c2 = np.zeros(st.n_total)
    c2[:n] = c
    status, it2 = _iterate(st, c2, deadline, max_iterations - iters)
    iters += it2
    if status != "optimal":
        return SimplexResult(status, None, None, float("nan"), iters)

    B = st.A[:, st.basis]
    try:
        y = np.linalg.solve(B.T, c2[st.basis])
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular final basis: {exc}") from exc
    return SimplexResult("optimal", st.x[:n].copy(), y, float(c2 @ st.x), iters)


class _State:
    """Equality-form working state: slack-extended columns, bounds, basis."""

    def __init__(self, A, senses, b, lb, ub, n_struct):
        m = A.shape[0]
        self.m = m
        self.b = np.asarray(b, dtype=float)

        cols = [A]
        lo = [lb]
        hi = [ub]
        slack_of_row = np.full(m, -1, dtype=int)
        nxt = n_struct
        for r, sense in enumerate(senses):
            if sense == "=":
                continue
            e = np.zeros((m, 1))
            e[r, 0] = 1.0
            cols.append(e)
            if sense == "<=":
                lo.append(np.array([0.0]))
                hi.append(np.array([np.inf]))
            elif sense == ">=":
                lo.append(np.array([-np.inf]))
                hi.append(np.array([0.0]))
            else:
                raise SolverError(f"unknown row sense {sense!r}")
            slack_of_row[r] = nxt
            nxt += 1

        self.A = np.hstack(cols)
        self.lb = np.concatenate(lo)
        self.ub = np.concatenate(hi)

        # all structural variables start at their lower bound
        residual = self.b - A @ lb
        self.basis: List[int] = [-1] * m
        need_art: List[Tuple[int, float]] = []
        for r in range(m):
            s = slack_of_row[r]
            if s >= 0:
                fits = residual[r] >= -1e-12 if senses[r] == "<=" else residual[r] <= 1e-12
                if fits:
                    self.basis[r] = s
                    continue
            need_art.append((r, residual[r]))

        self.artificials: List[int] = []
        if need_art:
            art = np.zeros((m, len(need_art)))
            for k, (r, t) in enumerate(need_art):
                art[r, k] = 1.0 if t >= 0 else -1.0
            base = self.A.shape[1]
            self.A = np.hstack([self.A, art])
            self.lb = np.concatenate([self.lb, np.zeros(len(need_art))])
            self.ub = np.concatenate([self.ub, np.full(len(need_art), np.inf)])
            for k, (r, _) in enumerate(need_art):
                self.basis[r] = base + k
                self.artificials.append(base + k)

        self.n_total = self.A.shape[1]
        # nonbasic variables must sit on a finite bound (>= slacks live at 0 = ub)
        self.at_upper = ~np.isfinite(self.lb)
        self.Binv = np.linalg.inv(self.A[:, self.basis])
        self.x = self._positions()

    def _positions(self) -> np.ndarray:
        x = np.where(self.at_upper, self.ub, self.lb).astype(float)
        x[~np.isfinite(x)] = 0.0
        mask = np.ones(self.n_total, dtype=bool)
        mask[self.basis] = False
        x[self.basis] = self.Binv @ (self.b - self.A[:, mask] @ x[mask])
        return x

    def refactor(self):
        self.Binv = np.linalg.inv(self.A[:, self.basis])
        self.x = self._positions()


def _iterate(st: _State, c: np.ndarray, deadline, max_iterations) -> Tuple[str, int]:
    """Bland-rule pivots in place until optimal/unbounded/limit."""
    m = st.m
    it = 0
    since_refactor = 0
    while it < max_iterations:
        if deadline is not None and it % 32 == 0 and time.perf_counter() > deadline:
            return "limit", it
        it += 1
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            st.refactor()
            since_refactor = 0

        y = st.Binv.T @ c[st.basis]
        d = c - y @ st.A

        in_basis = np.zeros(st.n_total, dtype=bool)
        in_basis[st.basis] = True
        entering = -1
        from_upper = False
        for j in range(st.n_total):  # Bland: smallest eligible index
            if in_basis[j] or st.ub[j] - st.lb[j] <= 0:
                continue
            if not st.at_upper[j] and d[j] > DUAL_TOL:
                entering, from_upper = j, False
                break
            if st.at_upper[j] and d[j] < -DUAL_TOL:
                entering, from_upper = j, True
                break
        if entering < 0:
            return "optimal", it

        w = st.Binv @ st.A[:, entering]
        # moving the entering variable by t>=0 changes basics by t*v
        v = w if from_upper else -w
        flip_t = st.ub[entering] - st.lb[entering]
        rmin = np.inf
        leave_pos = -1
        for i in range(m):
            vi = v[i]
            if vi > PIVOT_TOL:
                hi = st.ub[st.basis[i]]
                if not np.isfinite(hi):
                    continue
                ti = (hi - st.x[st.basis[i]]) / vi
            elif vi < -PIVOT_TOL:
                lo = st.lb[st.basis[i]]
                if not np.isfinite(lo):
                    continue
                ti = (st.x[st.basis[i]] - lo) / (-vi)
            else:
                continue
            ti = max(ti, 0.0)
            if ti < rmin - RATIO_TIE:
                rmin, leave_pos = ti, i
            elif ti <= rmin + RATIO_TIE and leave_pos >= 0 and st.basis[i] < st.basis[leave_pos]:
                leave_pos = i

        if not np.isfinite(min(rmin, flip_t)):
            return "unbounded", it

        if flip_t <= rmin:
            # bound flip: entering variable crosses to its other bound
            step = flip_t
            st.x[st.basis] += step * v
            st.at_upper[entering] = not from_upper
            st.x[entering] = st.ub[entering] if st.at_upper[entering] else st.lb[entering]
            continue

        step = rmin
        st.x[st.basis] += step * v
        st.x[entering] = (st.ub[entering] - step) if from_upper else (st.lb[entering] + step)
        leaving = st.basis[leave_pos]
        st.at_upper[leaving] = v[leave_pos] > 0  # hit its upper bound iff it was rising
        st.x[leaving] = st.ub[leaving] if st.at_upper[leaving] else st.lb[leaving]
        st.basis[leave_pos] = entering
        st.at_upper[entering] = False

        piv = w[leave_pos]
        if abs(piv) < PIVOT_TOL:
            st.refactor()
            since_refactor = 0
            continue
        st.Binv[leave_pos, :] /= piv
        col = w.copy()
        col[leave_pos] = 0.0
        st.Binv -= np.outer(col, st.Binv[leave_pos, :])

    return "limit", it
