"""LP/MILP solves over ModelIR through scipy's HiGHS interface.

The backend is capability-tagged: HiGHS handles {lp, milp}.  Models that
still carry bilinear terms must go through a relaxation or restriction
first; sending one here raises CapabilityError instead of silently
dropping the nonconvex part.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

from .modelir import GE, INF, LE, ModelIR

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
TIME_LIMIT = "time-limit"
ERROR = "error"


class CapabilityError(RuntimeError):
    """Model requires a capability (e.g. nonconvex) the backend lacks."""


@dataclass
class SolveParams:
    time_limit_s: float = 3600.0      # one-hour default
    rel_gap: float | None = None      # None = 1e-6 for LP-equivalent, 1e-4 for MILP
    threads: int = 1
    seed: int = 0

    def effective_gap(self, is_mip: bool) -> float:
        if self.rel_gap is not None:
            return self.rel_gap
        return 1e-4 if is_mip else 1e-6


@dataclass
class SolveResult:
    status: str
    objective: float | None
    dual_bound: float | None
    assignment: dict[str, float] = field(default_factory=dict)
    seconds: float = 0.0
    gap: float | None = None

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE, TIME_LIMIT) and self.objective is not None


@dataclass(frozen=True)
class CompiledModel:
    """ModelIR lowered to scipy arrays; reusable across objective swaps (OBBT)."""

    names: tuple[str, ...]
    index: dict[str, int]
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
    c: np.ndarray


def compile_model(model: ModelIR) -> CompiledModel:
    names = tuple(sorted(model.variables))
    index = {n: i for i, n in enumerate(names)}
    n = len(names)
    lb = np.array([model.variables[v].lb for v in names])
    ub = np.array([model.variables[v].ub for v in names])
    integrality = np.array(
        [1 if model.variables[v].binary else 0 for v in names], dtype=int)

    data, rows_ix, cols_ix = [], [], []
    row_lo = np.empty(len(model.rows))
    row_hi = np.empty(len(model.rows))
    for r, row in enumerate(model.rows):
        for v, c in row.coeffs:
            rows_ix.append(r)
            cols_ix.append(index[v])
            data.append(c)
        if row.sense == LE:
            row_lo[r], row_hi[r] = -INF, row.rhs
        elif row.sense == GE:
            row_lo[r], row_hi[r] = row.rhs, INF
        else:
            row_lo[r] = row_hi[r] = row.rhs
    A = sp.csr_matrix((data, (rows_ix, cols_ix)), shape=(len(model.rows), n))

    c = np.zeros(n)
    for v, coeff in model.objective.items():
        c[index[v]] += coeff
    return CompiledModel(names, index, A, row_lo, row_hi, lb, ub, integrality, c)


def _status_from_highs(res, is_mip: bool) -> str:
    if res.status == 0:
        return OPTIMAL
    if res.status == 1:  # iteration or time limit
        return TIME_LIMIT
    if res.status == 2:
        return INFEASIBLE
    if res.status == 3:
        return UNBOUNDED
    return ERROR


def solve_compiled(cm: CompiledModel, params: SolveParams | None = None,
                   c_override: np.ndarray | None = None) -> SolveResult:
    params = params or SolveParams()
    is_mip = bool(cm.integrality.any())
    c = cm.c if c_override is None else c_override
    options = {"time_limit": float(params.time_limit_s)}
    if is_mip:
        options["mip_rel_gap"] = params.effective_gap(True)
    t0 = time.perf_counter()
    constraints = None
    if cm.A.shape[0]:
        constraints = LinearConstraint(cm.A, cm.row_lo, cm.row_hi)
    res = milp(c=c, constraints=constraints,
               integrality=cm.integrality,
               bounds=Bounds(cm.lb, cm.ub),
               options=options)
    elapsed = time.perf_counter() - t0

    status = _status_from_highs(res, is_mip)
    objective = None
    assignment: dict[str, float] = {}
    if res.x is not None:
        # on a time limit the incumbent (if any) is still reported here
        objective = float(res.fun)
        assignment = {nm: float(x) for nm, x in zip(cm.names, res.x)}
    dual = None
    if is_mip:
        db = getattr(res, "mip_dual_bound", None)
        if db is not None and math.isfinite(db):
            dual = float(db)
    elif objective is not None and status == OPTIMAL:
        dual = objective
    if status == OPTIMAL and dual is None:
        dual = objective
    gap = None
    if objective is not None and dual is not None:
        gap = abs(objective - dual) / max(1.0, abs(objective))
    return SolveResult(status, objective, dual, assignment, elapsed, gap)


class HighsBackend:
    """Default backend adapter: scipy/HiGHS, capabilities {lp, milp}."""

    capabilities = frozenset({"lp", "milp"})

    def solve(self, model: ModelIR, params: SolveParams | None = None) -> SolveResult:
        if model.bilinear:
            raise CapabilityError(
                f"model {model.name!r} has {len(model.bilinear)} bilinear terms; "
                "this backend supports only {lp, milp} - solve a relaxation or "
                "restriction instead")
        return solve_compiled(compile_model(model), params)


_DEFAULT = HighsBackend()


def solve(model: ModelIR, params: SolveParams | None = None,
          backend: HighsBackend | None = None) -> SolveResult:
    return (backend or _DEFAULT).solve(model, params)
