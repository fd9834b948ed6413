"""Exact bilinear multi-commodity flow models and their shared machinery.

Two bases are supported: the source basis decomposes each pool's outgoing
flow by originating source; the terminal basis decomposes incoming flow by
final destination.  Both carry the network/capacity/specification backbone;
the bilinear proportion constraints are attached only for exact models and
are dropped by the multi-commodity-flow (MCF) relaxation.

Variable naming (deterministic, used by dumps and tests):
    f[a,b]      arc flow, physical arcs and commodity ghost pairs
    x[a,b,c]    decomposed flow on physical arc (a,b) for commodity c
    q[i,c]      proportion of commodity c at pool i
    v[t,k]      soft-specification violation at terminal t, spec k
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instances import SOURCE, PoolingInstance
from .modelir import INF, ModelIR
from .rank1 import BoundBox, is_rank_le_one, make_box

SOURCE_BASIS = "source"
TERMINAL_BASIS = "terminal"

# When True (the literal reading of the flow-decomposition equalities), the
# total commodity flow at a pool equals the pair's arc flow whenever the
# physical arc exists, so a commodity cannot re-enter such a pool through
# other pools.  Block row bounds are then exactly the arc intervals.
FORBID_COMMODITY_REENTRY = True


def fvar(a: str, b: str) -> str:
    return f"f[{a},{b}]"


def xvar(a: str, b: str, c: str) -> str:
    return f"x[{a},{b},{c}]"


def qvar(i: str, c: str) -> str:
    return f"q[{i},{c}]"


def vvar(t: str, k: int, side: str) -> str:
    return f"v[{t},{k},{side}]"


@dataclass(frozen=True)
class PoolBlock:
    """One pool's decomposed-flow matrix: rows are commodities, columns are
    the physical arcs of the decomposed side."""

    pool: str
    basis: str
    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    box: BoundBox

    def var(self, r: int, c: int) -> str:
        if self.basis == SOURCE_BASIS:
            return xvar(self.pool, self.col_ids[c], self.row_ids[r])
        return xvar(self.col_ids[c], self.pool, self.row_ids[r])

    def values(self, assignment: dict[str, float]) -> np.ndarray:
        out = np.zeros((len(self.row_ids), len(self.col_ids)))
        for r in range(len(self.row_ids)):
            for c in range(len(self.col_ids)):
                out[r, c] = assignment.get(self.var(r, c), 0.0)
        return out


@dataclass
class BilinearModel:
    model: ModelIR
    basis: str
    inst: PoolingInstance
    blocks: list[PoolBlock] = field(default_factory=list)
    soft_terminals: tuple[str, ...] = ()

    @property
    def name(self) -> str:
        return self.model.name


def _commodities(inst: PoolingInstance, basis: str, pool: str) -> tuple[str, ...]:
    return inst.S_i[pool] if basis == SOURCE_BASIS else inst.T_i[pool]


def _decomposed_arcs(inst: PoolingInstance, basis: str, pool: str) -> tuple[str, ...]:
    return inst.out_nbrs[pool] if basis == SOURCE_BASIS else inst.in_nbrs[pool]


def _commodity_pair(basis: str, pool: str, c: str) -> tuple[str, str]:
    return (c, pool) if basis == SOURCE_BASIS else (pool, c)


def pool_blocks(bm: BilinearModel) -> list[PoolBlock]:
    return list(bm.blocks)


def _build_blocks(inst: PoolingInstance, basis: str) -> list[PoolBlock]:
    blocks = []
    for i in inst.pools:
        rows = tuple(sorted(_commodities(inst, basis, i)))
        cols = tuple(sorted(_decomposed_arcs(inst, basis, i)))
        if not rows or not cols:
            continue
        l, u, lp, up = [], [], [], []
        for c in rows:
            if basis == SOURCE_BASIS:
                lo, hi = inst.commodity_bound(c, i)
            else:
                lo, hi = inst.terminal_commodity_bound(i, c)
            if not FORBID_COMMODITY_REENTRY and _commodity_pair(basis, i, c) in inst.arcs:
                # re-entry allowed: the arc interval no longer bounds the
                # commodity total, fall back to the pool capacity
                lo, hi = 0.0, inst.nodes[i].U
            l.append(lo)
            u.append(hi)
        for j in cols:
            arc = inst.arcs[(i, j) if basis == SOURCE_BASIS else (j, i)]
            lp.append(arc.l)
            up.append(arc.u)
        node = inst.nodes[i]
        blocks.append(PoolBlock(i, basis, rows, cols,
                                make_box(l, u, lp, up, node.L, node.U)))
    return blocks


def build_backbone(inst: PoolingInstance, basis: str,
                   name: str | None = None) -> BilinearModel:
    """Everything except the bilinear proportion constraints (pure LP)."""
    model = ModelIR(name or f"{inst.name}:{basis}:mcf")
    soft = tuple(t for t in inst.terminals if t in inst.penalty)

    for arc in inst.arcs.values():
        model.add_var(fvar(arc.tail, arc.head), arc.l, arc.u)
    for pair in inst.ghost_pairs(basis):
        pool = pair[1] if basis == SOURCE_BASIS else pair[0]
        lo, hi = inst.ghost_bound(pair, pool)
        model.add_var(fvar(*pair), lo, hi)

    # decomposed flows on physical arcs of the decomposed side
    for i in inst.pools:
        for j in _decomposed_arcs(inst, basis, i):
            arc = inst.arcs[(i, j) if basis == SOURCE_BASIS else (j, i)]
            for c in _commodities(inst, basis, i):
                model.add_var(xvar(arc.tail, arc.head, c), 0.0,
                              arc.u if math.isfinite(arc.u) else INF)

    # node capacities
    for nid in inst.nodes:
        node = inst.nodes[nid]
        if node.kind == SOURCE:
            expr = {fvar(nid, j): 1.0 for j in inst.out_nbrs[nid]}
        else:
            expr = {fvar(j, nid): 1.0 for j in inst.in_nbrs[nid]}
        if not expr:
            continue
        model.add_range(f"cap[{nid}]", expr, node.L, node.U)

    # flow decomposition on each decomposed physical arc
    for i in inst.pools:
        for j in _decomposed_arcs(inst, basis, i):
            a, b = (i, j) if basis == SOURCE_BASIS else (j, i)
            coeffs = {xvar(a, b, c): 1.0 for c in _commodities(inst, basis, i)}
            coeffs[fvar(a, b)] = coeffs.get(fvar(a, b), 0.0) - 1.0
            model.add_row(f"dec[{a},{b}]", coeffs, "==", 0.0)

    # per-commodity balance and ghost/total definitions
    for i in inst.pools:
        for c in _commodities(inst, basis, i):
            pair = _commodity_pair(basis, i, c)
            if basis == SOURCE_BASIS:
                outflow = {xvar(i, j, c): 1.0 for j in inst.out_nbrs[i]}
                inflow: dict[str, float] = {}
                for j in inst.in_nbrs[i]:
                    if j == c:
                        inflow[fvar(c, i)] = inflow.get(fvar(c, i), 0.0) + 1.0
                    elif j in inst.pools and c in inst.S_i[j]:
                        inflow[xvar(j, i, c)] = inflow.get(xvar(j, i, c), 0.0) + 1.0
            else:
                outflow = {xvar(j, i, c): 1.0 for j in inst.in_nbrs[i]}
                inflow = {}
                for j in inst.out_nbrs[i]:
                    if j == c:
                        inflow[fvar(i, c)] = inflow.get(fvar(i, c), 0.0) + 1.0
                    elif j in inst.pools and c in inst.T_i[j]:
                        inflow[xvar(i, j, c)] = inflow.get(xvar(i, j, c), 0.0) + 1.0
            bal = dict(outflow)
            for k, v in inflow.items():
                bal[k] = bal.get(k, 0.0) - v
            model.add_row(f"bal[{i},{c}]", bal, "==", 0.0)
            if pair not in inst.arcs or FORBID_COMMODITY_REENTRY:
                tot = dict(outflow)
                tot[fvar(*pair)] = tot.get(fvar(*pair), 0.0) - 1.0
                model.add_row(f"gho[{i},{c}]", tot, "==", 0.0)

    # specification windows at terminals (hard, or soft with violation vars)
    for t in inst.terminals:
        inflow_f = {fvar(j, t): 1.0 for j in inst.in_nbrs[t]}
        if not inflow_f or inst.n_specs == 0:
            continue
        for k in range(inst.n_specs):
            lam_x: dict[str, float] = {}
            for j in inst.in_nbrs[t]:
                if j in inst.sources:
                    lam_x[fvar(j, t)] = lam_x.get(fvar(j, t), 0.0) + inst.lam[j][k]
                elif basis == SOURCE_BASIS:
                    for s in inst.S_i[j]:
                        lam_x[xvar(j, t, s)] = lam_x.get(xvar(j, t, s), 0.0) + inst.lam[s][k]
            if basis == TERMINAL_BASIS:
                # source material destined for t, counted at its entry pool
                for i in inst.pools:
                    if t not in inst.T_i[i]:
                        continue
                    for s in inst.in_nbrs[i]:
                        if s in inst.sources:
                            lam_x[xvar(s, i, t)] = lam_x.get(xvar(s, i, t), 0.0) + inst.lam[s][k]
            hi = inst.mu_hi.get(t, tuple([INF] * inst.n_specs))[k]
            lo = inst.mu_lo.get(t, tuple([0.0] * inst.n_specs))[k]
            is_soft = t in inst.penalty
            if math.isfinite(hi):
                coeffs = dict(lam_x)
                for var, c in inflow_f.items():
                    coeffs[var] = coeffs.get(var, 0.0) - hi * c
                if is_soft:
                    vname = model.add_var(vvar(t, k, "hi"))
                    coeffs[vname] = -1.0
                model.add_row(f"spec_hi[{t},{k}]", coeffs, "<=", 0.0)
            if lo > 0:
                coeffs = dict(lam_x)
                for var, c in inflow_f.items():
                    coeffs[var] = coeffs.get(var, 0.0) - lo * c
                if is_soft:
                    vname = model.add_var(vvar(t, k, "lo"))
                    coeffs[vname] = 1.0
                model.add_row(f"spec_lo[{t},{k}]", coeffs, ">=", 0.0)

    # objective: arc costs plus soft-spec penalties
    obj: dict[str, float] = {}
    for arc in inst.arcs.values():
        if arc.cost != 0.0:
            obj[fvar(arc.tail, arc.head)] = obj.get(fvar(arc.tail, arc.head), 0.0) + arc.cost
    for t in soft:
        for k in range(inst.n_specs):
            for side in ("hi", "lo"):
                name = vvar(t, k, side)
                if name in model.variables:
                    obj[name] = inst.penalty[t][k]
    model.set_objective(obj)

    return BilinearModel(model, basis, inst, _build_blocks(inst, basis), soft)


def _attach_bilinear(bm: BilinearModel) -> None:
    inst, basis, model = bm.inst, bm.basis, bm.model
    for i in inst.pools:
        for c in _commodities(inst, basis, i):
            model.add_var(qvar(i, c), 0.0, 1.0)
        for j in _decomposed_arcs(inst, basis, i):
            a, b = (i, j) if basis == SOURCE_BASIS else (j, i)
            for c in _commodities(inst, basis, i):
                model.add_bilinear(xvar(a, b, c), qvar(i, c), fvar(a, b))


def build_source_based(inst: PoolingInstance) -> BilinearModel:
    bm = build_backbone(inst, SOURCE_BASIS, f"{inst.name}:source:exact")
    _attach_bilinear(bm)
    return bm


def build_terminal_based(inst: PoolingInstance) -> BilinearModel:
    bm = build_backbone(inst, TERMINAL_BASIS, f"{inst.name}:terminal:exact")
    _attach_bilinear(bm)
    return bm


def build_mcf_relaxation(bm: BilinearModel) -> ModelIR:
    """Drop the bilinear proportion constraints (and the now-unused q
    variables); the result is a pure LP on the same backbone."""
    qnames = {v for v in bm.model.variables if v.startswith("q[")}
    return bm.model.copy_without_bilinear(bm.model.name.replace(":exact", "") + ":mcf",
                                          drop_vars=qnames)


# -- solution checking -----------------------------------------------------------

@dataclass
class CheckReport:
    families: dict[str, float]
    tol: float

    @property
    def ok(self) -> bool:
        return all(v <= self.tol for v in self.families.values())

    def worst(self) -> tuple[str, float]:
        fam = max(self.families, key=lambda k: self.families[k])
        return fam, self.families[fam]


def check_solution(bm: BilinearModel, assignment: dict[str, float],
                   tol: float = 1e-6) -> CheckReport:
    """Residuals per constraint family, plus bilinear and rank-one checks.

    Residuals are measured relative to max(1, |value scale|) per row.
    """
    model = bm.model
    missing = [v for v in model.variables if v not in assignment]
    if missing:
        raise KeyError(f"assignment missing {len(missing)} variables, "
                       f"e.g. {missing[:3]}")
    fam: dict[str, float] = {"bounds": 0.0, "rank": 0.0}

    def bump(family: str, value: float) -> None:
        fam[family] = max(fam.get(family, 0.0), value)

    for name, var in model.variables.items():
        val = assignment[name]
        scale = max(1.0, abs(var.lb), abs(var.ub) if math.isfinite(var.ub) else 1.0)
        bump("bounds", max(var.lb - val, (val - var.ub) if math.isfinite(var.ub) else 0.0) / scale)

    for row in model.rows:
        lhs = sum(c * assignment[v] for v, c in row.coeffs)
        scale = max(1.0, abs(row.rhs), max(abs(c) for _, c in row.coeffs))
        if row.sense == "<=":
            resid = (lhs - row.rhs) / scale
        elif row.sense == ">=":
            resid = (row.rhs - lhs) / scale
        else:
            resid = abs(lhs - row.rhs) / scale
        family = row.name.split("[", 1)[0].split(":", 1)[0]
        bump(family, resid)

    for term in model.bilinear:
        x = assignment[term.x]
        prod = assignment[term.q] * assignment[term.f]
        bump("bilinear", abs(x - prod) / max(1.0, abs(x), abs(prod)))

    for block in bm.blocks:
        X = block.values(assignment)
        if not is_rank_le_one(X, tol):
            # report the worst scaled minor
            scale = max(1.0, float(np.abs(X).max()) ** 2)
            minors = np.einsum("ij,IJ->iIjJ", X, X) - np.einsum("iJ,Ij->iIjJ", X, X)
            bump("rank", float(np.abs(minors).max()) / scale)
    return CheckReport(fam, tol)


def rederive_proportions(bm: BilinearModel, assignment: dict[str, float],
                         tol: float = 1e-9) -> dict[str, float]:
    """Fill q values consistent with the flows (restriction outputs omit q)."""
    out = dict(assignment)
    inst, basis = bm.inst, bm.basis
    for i in inst.pools:
        comms = _commodities(inst, basis, i)
        totals = {}
        for c in comms:
            pair = _commodity_pair(basis, i, c)
            totals[c] = assignment.get(fvar(*pair), 0.0)
        grand = sum(totals.values())
        for c in comms:
            out[qvar(i, c)] = totals[c] / grand if grand > tol else 0.0
    return out
