"""Bound tightening: optimization-based (OBBT) over an LP relaxation, and
the single-pass structural tightening for time-indexed mining instances.

Both produce BoundUpdate objects whose intervals are intersected into the
instance by apply_bounds; updates never widen an interval.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .formulations import SOURCE_BASIS, fvar
from .instances import POOL, SOURCE, TERMINAL, InconsistencyError, PoolingInstance
from .modelir import INF
from .relaxations import MethodSpec, build_method, parse_method
from .solver import SolveParams, compile_model, solve, solve_compiled

UNCHANGED = "unchanged"


class TighteningError(RuntimeError):
    pass


@dataclass
class BoundUpdate:
    node_bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    arc_bounds: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)
    ghost_bounds: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)
    z_box: tuple[float, float] | None = None

    def record(self, kind: str, key, old: tuple[float, float],
               new: tuple[float, float], tag: str, slack: float = 0.0) -> None:
        lo = max(old[0], new[0] - slack)
        hi = min(old[1], new[1] + slack)
        if hi < lo:
            lo = hi = 0.5 * (lo + hi)
        label = f"{kind}:{key}"
        target = {"node": self.node_bounds, "arc": self.arc_bounds,
                  "ghost": self.ghost_bounds}[kind]
        changed = lo > old[0] + 1e-12 or hi < old[1] - 1e-12
        target[key] = (lo, hi) if changed else old
        self.provenance[label] = tag if changed else UNCHANGED

    def to_json(self) -> str:
        return json.dumps({
            "nodes": {k: v for k, v in self.node_bounds.items()},
            "arcs": {f"{a}->{b}": v for (a, b), v in self.arc_bounds.items()},
            "ghosts": {f"{a}->{b}": v for (a, b), v in self.ghost_bounds.items()},
            "provenance": self.provenance,
            "z_box": self.z_box,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BoundUpdate":
        data = json.loads(text)

        def unkey(d):
            return {tuple(k.split("->")): tuple(v) for k, v in d.items()}

        upd = cls(node_bounds={k: tuple(v) for k, v in data["nodes"].items()},
                  arc_bounds=unkey(data["arcs"]),
                  ghost_bounds=unkey(data["ghosts"]),
                  provenance=data["provenance"],
                  z_box=tuple(data["z_box"]) if data.get("z_box") else None)
        return upd


def apply_bounds(inst: PoolingInstance, upd: BoundUpdate) -> PoolingInstance:
    """Intersect the update into the instance; empty intervals are errors."""
    def meet(old, new, what):
        lo, hi = max(old[0], new[0]), min(old[1], new[1])
        if lo > hi + 1e-9 * max(1.0, abs(hi)):
            raise TighteningError(f"empty interval for {what}: [{lo}, {hi}]")
        return lo, min(hi, old[1])

    node_b = {}
    for nid, new in upd.node_bounds.items():
        if nid not in inst.nodes:
            raise TighteningError(f"update targets unknown node {nid!r}")
        node = inst.nodes[nid]
        node_b[nid] = meet((node.L, node.U), new, f"node {nid}")
    arc_b = {}
    for key, new in upd.arc_bounds.items():
        if key not in inst.arcs:
            raise TighteningError(f"update targets unknown arc {key}")
        arc = inst.arcs[key]
        arc_b[key] = meet((arc.l, arc.u), new, f"arc {key}")
    ghost_b = {}
    for key, new in upd.ghost_bounds.items():
        pool = key[1] if inst.nodes.get(key[1], None) and inst.kind(key[1]) == POOL else key[0]
        old = inst.ghost_bound(key, pool)
        ghost_b[key] = meet(old, new, f"ghost {key}")
    return inst.with_bounds(node_b, arc_b, ghost_b)


# -- OBBT ---------------------------------------------------------------------------

def _node_expression(inst: PoolingInstance, nid: str) -> dict[str, float]:
    if inst.kind(nid) == SOURCE:
        return {fvar(nid, j): 1.0 for j in inst.out_nbrs[nid]}
    return {fvar(j, nid): 1.0 for j in inst.in_nbrs[nid]}


def obbt(inst: PoolingInstance, relax: MethodSpec | str | None = None,
         z_lb: float = -INF, z_ub: float = INF,
         targets: list[tuple[str, object]] | None = None,
         workers: int = 1, params: SolveParams | None = None) -> BoundUpdate:
    """Min/max each arc flow, ghost flow and node throughput over the given
    LP relaxation with the original objective boxed into [z_lb, z_ub]."""
    if z_lb > z_ub:
        raise TighteningError(f"invalid objective box [{z_lb}, {z_ub}]")
    if relax is None:
        relax = MethodSpec("MCF", "terminal")
    elif isinstance(relax, str):
        relax = parse_method(relax)
    built = build_method(inst, relax)
    model = built.model
    if model.bilinear:
        raise TighteningError("OBBT requires an LP relaxation")
    if model.objective:
        if math.isfinite(z_lb):
            model.add_row("obbt:z:lo", model.objective, ">=", z_lb)
        if math.isfinite(z_ub):
            model.add_row("obbt:z:hi", model.objective, "<=", z_ub)

    cm = compile_model(model)
    base = solve_compiled(cm, params)
    if base.status == "infeasible":
        raise TighteningError("relaxation with objective box is infeasible")

    if targets is None:
        targets = []
        for key in sorted(inst.arcs):
            targets.append(("arc", key))
        for pair in sorted(inst.ghost_pairs(relax.basis)):
            targets.append(("ghost", pair))
        for nid in sorted(inst.nodes):
            targets.append(("node", nid))

    def expression(kind, key) -> dict[str, float]:
        if kind in ("arc", "ghost"):
            return {fvar(*key): 1.0}
        return _node_expression(inst, key)

    def run(target):
        kind, key = target
        expr = expression(kind, key)
        expr = {v: c for v, c in expr.items() if v in cm.index}
        if not expr:
            return target, None
        c = np.zeros(len(cm.names))
        for v, coeff in expr.items():
            c[cm.index[v]] = coeff
        lo_res = solve_compiled(cm, params, c_override=c)
        hi_res = solve_compiled(cm, params, c_override=-c)
        if lo_res.objective is None or hi_res.objective is None:
            return target, None
        return target, (lo_res.objective, -hi_res.objective)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, targets))
    else:
        results = [run(t) for t in targets]

    upd = BoundUpdate(z_box=(z_lb, z_ub))
    scale = max([1.0] + [abs(a.u) for a in inst.arcs.values() if math.isfinite(a.u)])
    slack = 1e-6 * scale
    for target, interval in results:
        kind, key = target
        if interval is None:
            continue
        lo, hi = interval
        lo = max(lo, 0.0)
        if kind == "arc":
            arc = inst.arcs[key]
            old = (arc.l, arc.u)
        elif kind == "ghost":
            old = inst.ghost_bound(key, key[1] if relax.basis == SOURCE_BASIS else key[0])
        else:
            node = inst.nodes[key]
            old = (node.L, node.U)
        tag = "obbt-min" if lo > old[0] + slack else (
            "obbt-max" if hi < old[1] - slack else UNCHANGED)
        if lo > old[0] + slack and hi < old[1] - slack:
            tag = "obbt-min-max"
        upd.record(kind, key, old, (lo, hi), tag, slack=slack)
    return upd


def default_obbt_recipe(inst: PoolingInstance, workers: int = 8,
                        params: SolveParams | None = None,
                        relax: str = "F4:T") -> tuple[BoundUpdate, float, float]:
    """The benchmark recipe: lower box bound from the terminal-basis MCF
    value, upper from the H=3 terminal restriction, then a single OBBT
    pass over the terminal-basis row-column LP relaxation."""
    from .relaxations import parse_method

    mcf = build_method(inst, parse_method("MCF:T"))
    lo_res = solve(mcf.model, params)
    if lo_res.objective is None:
        raise TighteningError("MCF relaxation did not solve")
    z_lb = lo_res.objective
    rest = build_method(inst, parse_method("G2:T:H=3"))
    hi_res = solve(rest.model, params)
    z_ub = hi_res.objective if hi_res.objective is not None else INF
    upd = obbt(inst, relax, z_lb, z_ub, workers=workers, params=params)
    return upd, z_lb, z_ub


# -- mining single pass ----------------------------------------------------------------

def _mining_times(inst: PoolingInstance):
    """Node time tags from the converter's id scheme 'kind:pile:time'."""
    def time_of(nid: str) -> float:
        tag = nid.rsplit(":", 1)[1]
        return INF if tag == "inf" else float(tag)

    return time_of


def mining_tighten(inst: PoolingInstance) -> BoundUpdate:
    """Single pass over the converter's graph in the fixed step order.

    Steps 3 and 4 read the pre-pass pool capacities; step 5 then overwrites
    every pool's bounds with the sums of its incoming arc bounds.
    """
    time_of = _mining_times(inst)
    for s in inst.sources:
        if len(inst.out_nbrs[s]) != 1:
            raise InconsistencyError(f"source {s!r} must feed exactly one pool")
    for i in inst.pools:
        n_src = sum(1 for j in inst.in_nbrs[i] if j in inst.sources)
        if n_src > 1:
            raise InconsistencyError(f"pool {i!r} has {n_src} supply arcs")

    upd = BoundUpdate()
    arc_new: dict[tuple[str, str], tuple[float, float]] = {}

    # step 1: supply sources pin their node and arc bounds to the supply
    for s in inst.sources:
        qty = inst.nodes[s].U
        upd.record("node", s, (inst.nodes[s].L, inst.nodes[s].U), (qty, qty),
                   "mining-step-1")
        i = inst.out_nbrs[s][0]
        arc = inst.arcs[(s, i)]
        arc_new[(s, i)] = (qty, qty)
        upd.record("arc", (s, i), (arc.l, arc.u), (qty, qty), "mining-step-1")

    # step 2: terminals pin to their demand
    for t in inst.terminals:
        node = inst.nodes[t]
        upd.record("node", t, (node.L, node.U), (node.U, node.U), "mining-step-2")

    # step 3: pool-to-terminal arcs
    pre_U = {i: inst.nodes[i].U for i in inst.pools}
    pre_L = {i: inst.nodes[i].L for i in inst.pools}
    for (i, t), arc in sorted(inst.arcs.items()):
        if inst.kind(i) != POOL or inst.kind(t) != TERMINAL:
            continue
        others = [p for p in inst.in_nbrs[t] if p != i and p in inst.pools]
        lo = max(inst.nodes[t].L - sum(pre_U[p] for p in others), 0.0)
        hi = min(pre_U[i], inst.nodes[t].U)
        arc_new[(i, t)] = (max(arc.l, lo), min(arc.u, hi))
        upd.record("arc", (i, t), (arc.l, arc.u), (lo, hi), "mining-step-3")

    # step 4: pool-to-pool arcs, capped by the running supply surplus
    supplies = sorted((time_of(s), inst.nodes[s].U) for s in inst.sources)
    demands = sorted((time_of(t), inst.nodes[t].U) for t in inst.terminals
                     if not t.endswith(":inf"))

    def surplus_before(tau: float) -> float:
        sup = sum(q for tt, q in supplies if tt < tau)
        dem = sum(q for tt, q in demands if tt < tau)
        return max(sup - dem, 0.0)

    for (i, j), arc in sorted(inst.arcs.items()):
        if inst.kind(i) != POOL or inst.kind(j) != POOL:
            continue
        out_l = sum(arc_new.get((i, t), (inst.arcs[(i, t)].l,))[0]
                    for t in inst.out_nbrs[i] if inst.kind(t) == TERMINAL)
        out_U = sum(inst.nodes[t].U
                    for t in inst.out_nbrs[i] if inst.kind(t) == TERMINAL)
        lo = max(pre_L[i] - out_U, 0.0)
        hi = max(pre_U[i] - out_l, 0.0)
        hi = min(hi, surplus_before(time_of(j)))
        arc_new[(i, j)] = (max(arc.l, lo), min(arc.u, hi))
        upd.record("arc", (i, j), (arc.l, arc.u), (lo, hi), "mining-step-4")

    # step 5: pool bounds become the sums of their incoming arc bounds
    for i in inst.pools:
        lo = hi = 0.0
        for j in inst.in_nbrs[i]:
            arc = inst.arcs[(j, i)]
            a_lo, a_hi = arc_new.get((j, i), (arc.l, arc.u))
            lo += a_lo
            hi += a_hi
        node = inst.nodes[i]
        upd.record("node", i, (node.L, node.U), (lo, hi), "mining-step-5")
    return upd
