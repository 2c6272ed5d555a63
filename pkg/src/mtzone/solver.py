"""Generic LP and MIP solving behind a small, swappable contract.

LinearModel is a maximization with finite variable bounds and sparse rows.
solve_lp returns primal values, one dual per constraint row, and a status;
two interchangeable backends are provided: "highs" (scipy's HiGHS wrapper,
the default) and "simplex" (the built-in bounded-variable simplex).  Dual
sign convention for the maximization: >= 0 on <= rows, <= 0 on >= rows,
free on equalities.

solve_mip is a deterministic best-first branch-and-bound over the flagged
binary/integer variables: branching on the most fractional variable (ties
to the lowest index), node selection by best bound, bounds from the chosen
LP backend.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize as sopt
import scipy.sparse as sp

from . import simplex
from .errors import SolverError, ValidationError

FEAS_TOL = 1e-7
INT_TOL = 1e-6
DEFAULT_GAP_TOL = 1e-6


@dataclass
class LinearModel:
    """A maximization LP/MIP under construction.

    Variables carry finite bounds, an objective coefficient and an
    integrality flag; constraints are sparse rows with a sense in
    {'<=', '=', '>='} and a right-hand side.
    """

    lb: List[float] = field(default_factory=list)
    ub: List[float] = field(default_factory=list)
    obj: List[float] = field(default_factory=list)
    integer: List[bool] = field(default_factory=list)
    rows: List[Dict[int, float]] = field(default_factory=list)
    senses: List[str] = field(default_factory=list)
    rhs: List[float] = field(default_factory=list)
    var_names: List[str] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return len(self.lb)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_variable(
        self, lb: float, ub: float, obj: float = 0.0, integer: bool = False, name: str = ""
    ) -> int:
        if not (math.isfinite(lb) and math.isfinite(ub)):
            raise ValidationError(f"variable bounds must be finite, got [{lb}, {ub}]")
        if lb > ub:
            raise ValidationError(f"variable lower bound {lb} exceeds upper bound {ub}")
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.obj.append(float(obj))
        self.integer.append(bool(integer))
        self.var_names.append(name or f"x{len(self.lb) - 1}")
        return len(self.lb) - 1

    def add_constraint(self, coeffs: Dict[int, float], sense: str, rhs: float) -> int:
        if sense not in ("<=", "=", ">="):
            raise ValidationError(f"unknown constraint sense {sense!r}")
        for j, a in coeffs.items():
            if not (0 <= j < self.n_vars):
                raise ValidationError(f"constraint references unknown variable {j}")
            if not math.isfinite(a):
                raise ValidationError(f"non-finite coefficient on variable {j}")
        if not math.isfinite(rhs):
            raise ValidationError("non-finite right-hand side")
        self.rows.append({int(j): float(a) for j, a in coeffs.items()})
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        return len(self.rows) - 1

    def dense_matrix(self) -> np.ndarray:
        A = np.zeros((self.n_rows, self.n_vars))
        for r, row in enumerate(self.rows):
            for j, a in row.items():
                A[r, j] = a
        return A

    def copy(self) -> "LinearModel":
        return LinearModel(
            lb=list(self.lb),
            ub=list(self.ub),
            obj=list(self.obj),
            integer=list(self.integer),
            rows=[dict(r) for r in self.rows],
            senses=list(self.senses),
            rhs=list(self.rhs),
            var_names=list(self.var_names),
        )


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | limit
    primal: Optional[np.ndarray]
    duals: Optional[np.ndarray]
    objective: float


@dataclass
class MipSolution:
    status: str  # optimal | infeasible | unbounded | limit
    primal: Optional[np.ndarray]
    objective: float
    bound: float
    gap: float
    node_count: int


def solve_lp(
    model: LinearModel,
    time_limit: Optional[float] = None,
    backend: str = "highs",
    lb: Optional[Sequence[float]] = None,
    ub: Optional[Sequence[float]] = None,
) -> LpSolution:
    """Solve the LP relaxation (integrality flags ignored).

    lb/ub optionally override the model bounds without mutating it, which
    is how branch-and-bound nodes are expressed.
    """
    eff_lb = np.asarray(lb if lb is not None else model.lb, dtype=float)
    eff_ub = np.asarray(ub if ub is not None else model.ub, dtype=float)
    if backend == "highs":
        return _solve_lp_highs(model, eff_lb, eff_ub, time_limit)
    if backend == "simplex":
        res = simplex.solve(
            model.dense_matrix(),
            list(model.senses),
            np.asarray(model.rhs, dtype=float),
            eff_lb,
            eff_ub,
            np.asarray(model.obj, dtype=float),
            time_limit=time_limit,
        )
        return LpSolution(res.status, res.x, res.duals, res.objective)
    raise SolverError(f"unknown LP backend {backend!r}")


def _solve_lp_highs(model, eff_lb, eff_ub, time_limit) -> LpSolution:
    n = model.n_vars
    c_min = -np.asarray(model.obj, dtype=float)

    ub_rows, ub_rhs, ub_map = [], [], []  # (row index, sign into max-dual)
    eq_rows, eq_rhs, eq_map = [], [], []
    for r, (row, sense, rhs) in enumerate(zip(model.rows, model.senses, model.rhs)):
        items = sorted(row.items())
        cols = [j for j, _ in items]
        vals = np.array([a for _, a in items], dtype=float)
        if sense == "=":
            eq_rows.append((cols, vals))
            eq_rhs.append(rhs)
            eq_map.append(r)
        elif sense == "<=":
            ub_rows.append((cols, vals))
            ub_rhs.append(rhs)
            ub_map.append((r, -1.0))  # y_max = -marginal_min
        else:  # '>=' becomes -a x <= -rhs; its min-marginal already matches y_max
            ub_rows.append((cols, -vals))
            ub_rhs.append(-rhs)
            ub_map.append((r, 1.0))

    def build(rows_list):
        data, indices, indptr = [], [], [0]
        for cols, vals in rows_list:
            indices.extend(cols)
            data.extend(vals.tolist())
            indptr.append(len(indices))
        return sp.csr_matrix((data, indices, indptr), shape=(len(rows_list), n))

    kwargs = {}
    if ub_rows:
        kwargs["A_ub"] = build(ub_rows)
        kwargs["b_ub"] = np.asarray(ub_rhs, dtype=float)
    if eq_rows:
        kwargs["A_eq"] = build(eq_rows)
        kwargs["b_eq"] = np.asarray(eq_rhs, dtype=float)
    options = {"presolve": True}
    if time_limit is not None:
        options["time_limit"] = max(float(time_limit), 1e-3)

    res = sopt.linprog(
        c_min,
        bounds=list(zip(eff_lb.tolist(), eff_ub.tolist())),
        method="highs",
        options=options,
        **kwargs,
    )
    if res.status == 2:
        return LpSolution("infeasible", None, None, float("nan"))
    if res.status == 3:
        return LpSolution("unbounded", None, None, float("nan"))
    if res.status == 1:
        return LpSolution("limit", None, None, float("nan"))
    if res.status != 0 or res.x is None:
        raise SolverError(f"HiGHS failure: status={res.status} message={res.message!r}")

    duals = np.zeros(model.n_rows)
    if ub_rows:
        marg = np.asarray(res.ineqlin.marginals, dtype=float)
        for k, (r, sgn) in enumerate(ub_map):
            duals[r] = sgn * marg[k]
    if eq_rows:
        marg = np.asarray(res.eqlin.marginals, dtype=float)
        for k, r in enumerate(eq_map):
            duals[r] = -marg[k]
    return LpSolution("optimal", np.asarray(res.x, dtype=float), duals, float(-res.fun))


def solve_mip(
    model: LinearModel,
    time_limit: Optional[float] = None,
    gap_tol: float = DEFAULT_GAP_TOL,
    backend: str = "highs",
    node_limit: Optional[int] = None,
) -> MipSolution:
    """Best-first branch-and-bound on the flagged variables.

    Branches on the most fractional flagged variable (ties by lowest
    index); returns the incumbent and the best remaining bound.  A time or
    node limit yields status "limit" with whatever incumbent exists.
    """
    deadline = None if time_limit is None else time.perf_counter() + float(time_limit)
    int_vars = [j for j, f in enumerate(model.integer) if f]

    root = solve_lp(model, time_limit=_remaining(deadline), backend=backend)
    if root.status in ("infeasible", "unbounded"):
        return MipSolution(root.status, None, float("nan"), float("nan"), float("nan"), 1)
    if root.status == "limit":
        return MipSolution("limit", None, -math.inf, math.inf, math.inf, 1)

    incumbent: Optional[np.ndarray] = None
    inc_obj = -math.inf
    node_count = 1
    counter = 0

    frac = _most_fractional(root.primal, int_vars)
    if frac is None:
        return MipSolution("optimal", root.primal, root.objective, root.objective, 0.0, 1)

    # heap of open nodes: (-parent bound, insertion counter, lb, ub)
    heap: List[Tuple[float, int, np.ndarray, np.ndarray]] = []
    lb0 = np.asarray(model.lb, dtype=float)
    ub0 = np.asarray(model.ub, dtype=float)
    for child_lb, child_ub in _branch(lb0, ub0, frac, root.primal[frac]):
        heap.append((-root.objective, counter, child_lb, child_ub))
        counter += 1
    heapq.heapify(heap)

    status = "optimal"
    while heap:
        best_bound = -heap[0][0]
        if incumbent is not None and best_bound - inc_obj <= gap_tol * max(1.0, abs(inc_obj)):
            break
        if deadline is not None and time.perf_counter() > deadline:
            status = "limit"
            break
        if node_limit is not None and node_count >= node_limit:
            status = "limit"
            break

        _, _, nlb, nub = heapq.heappop(heap)
        sol = solve_lp(model, time_limit=_remaining(deadline), backend=backend, lb=nlb, ub=nub)
        node_count += 1
        if sol.status == "limit":
            status = "limit"
            break
        if sol.status == "infeasible":
            continue
        if sol.status == "unbounded":
            return MipSolution("unbounded", None, float("nan"), float("nan"), float("nan"), node_count)
        if incumbent is not None and sol.objective <= inc_obj + gap_tol * max(1.0, abs(inc_obj)):
            continue  # pruned by bound
        frac = _most_fractional(sol.primal, int_vars)
        if frac is None:
            if sol.objective > inc_obj:
                incumbent = sol.primal
                inc_obj = sol.objective
            continue
        for child_lb, child_ub in _branch(nlb, nub, frac, sol.primal[frac]):
            heapq.heappush(heap, (-sol.objective, counter, child_lb, child_ub))
            counter += 1

    open_bound = max((-h[0] for h in heap), default=-math.inf)
    bound = max(inc_obj, open_bound) if (incumbent is not None or heap) else open_bound
    if incumbent is None:
        if status == "limit":
            return MipSolution("limit", None, -math.inf, bound, math.inf, node_count)
        return MipSolution("infeasible", None, float("nan"), float("nan"), float("nan"), node_count)
    gap = max(0.0, bound - inc_obj) / max(1.0, abs(inc_obj))
    return MipSolution(status, incumbent, inc_obj, bound, gap, node_count)


def _remaining(deadline) -> Optional[float]:
    if deadline is None:
        return None
    return max(1e-3, deadline - time.perf_counter())


def _most_fractional(x: np.ndarray, int_vars: List[int]) -> Optional[int]:
    best_j, best_score = None, INT_TOL
    for j in int_vars:
        f = x[j] - math.floor(x[j])
        score = min(f, 1.0 - f)  # distance to the nearest integer
        if score > best_score + 1e-12:
            best_j, best_score = j, score
    return best_j


def _branch(lb, ub, j, value):
    down_ub = ub.copy()
    down_ub[j] = math.floor(value)
    up_lb = lb.copy()
    up_lb[j] = math.ceil(value)
    return (lb, down_ub), (up_lb, ub)


def check_feasible(model: LinearModel, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
    """Replay a point against the model's rows and bounds."""
    lb = np.asarray(model.lb)
    ub = np.asarray(model.ub)
    if np.any(x < lb - tol) or np.any(x > ub + tol):
        return False
    for row, sense, rhs in zip(model.rows, model.senses, model.rhs):
        a = sum(coef * x[j] for j, coef in row.items())
        if sense == "<=" and a > rhs + tol:
            return False
        if sense == ">=" and a < rhs - tol:
            return False
        if sense == "=" and abs(a - rhs) > tol:
            return False
    return True


def write_lp(model: LinearModel) -> str:
    """Plain-text LP-format-style dump for debugging."""
    lines = ["Maximize", " obj: " + _expr({j: c for j, c in enumerate(model.obj) if c}, model)]
    lines.append("Subject To")
    for r, (row, sense, rhs) in enumerate(zip(model.rows, model.senses, model.rhs)):
        op = {"<=": "<=", ">=": ">=", "=": "="}[sense]
        lines.append(f" c{r}: " + _expr(row, model) + f" {op} {rhs:g}")
    lines.append("Bounds")
    for j in range(model.n_vars):
        lines.append(f" {model.lb[j]:g} <= {model.var_names[j]} <= {model.ub[j]:g}")
    ints = [model.var_names[j] for j, f in enumerate(model.integer) if f]
    if ints:
        lines.append("General")
        lines.append(" " + " ".join(ints))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _expr(coeffs: Dict[int, float], model: LinearModel) -> str:
    if not coeffs:
        return "0"
    parts = []
    for j in sorted(coeffs):
        a = coeffs[j]
        sign = "-" if a < 0 else ("+" if parts else "")
        parts.append(f"{sign} {abs(a):g} {model.var_names[j]}".strip())
    return " ".join(parts)
