"""Pooling-network data model, JSON parsing, generalization and the
time-indexed (mining) schedule converter.

Instances are immutable after construction; all derived sets (reachable
sources S_i, reachable terminals T_i, adjacency, commodity in-neighbor
sets) are computed once in __post_init__ and shared freely.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

INF = math.inf

SOURCE, POOL, TERMINAL = "source", "pool", "terminal"
_KINDS = (SOURCE, POOL, TERMINAL)


class SchemaError(ValueError):
    """Instance / schedule file does not match the documented schema."""


class InconsistencyError(ValueError):
    """Structurally valid file with inconsistent content (l > u, unknown
    node, unreachable pool, ...)."""


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    L: float = 0.0
    U: float = INF


@dataclass(frozen=True)
class Arc:
    tail: str
    head: str
    l: float = 0.0
    u: float = INF
    cost: float = 0.0

    @property
    def key(self) -> tuple[str, str]:
        return (self.tail, self.head)


@dataclass(frozen=True)
class PoolingInstance:
    name: str
    nodes: dict[str, Node]
    arcs: dict[tuple[str, str], Arc]
    n_specs: int
    lam: dict[str, tuple[float, ...]]            # source -> spec vector
    mu_lo: dict[str, tuple[float, ...]]          # terminal -> lower windows
    mu_hi: dict[str, tuple[float, ...]]          # terminal -> upper windows
    penalty: dict[str, tuple[float, ...]] = field(default_factory=dict)
    ghost_bounds: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)

    # derived, filled in __post_init__
    sources: tuple[str, ...] = field(init=False, default=())
    pools: tuple[str, ...] = field(init=False, default=())
    terminals: tuple[str, ...] = field(init=False, default=())
    out_nbrs: dict[str, tuple[str, ...]] = field(init=False, default_factory=dict)
    in_nbrs: dict[str, tuple[str, ...]] = field(init=False, default_factory=dict)
    S_i: dict[str, tuple[str, ...]] = field(init=False, default_factory=dict)
    T_i: dict[str, tuple[str, ...]] = field(init=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sources",
                           tuple(sorted(n for n, v in self.nodes.items() if v.kind == SOURCE)))
        object.__setattr__(self, "pools",
                           tuple(sorted(n for n, v in self.nodes.items() if v.kind == POOL)))
        object.__setattr__(self, "terminals",
                           tuple(sorted(n for n, v in self.nodes.items() if v.kind == TERMINAL)))
        out: dict[str, list[str]] = {n: [] for n in self.nodes}
        inn: dict[str, list[str]] = {n: [] for n in self.nodes}
        for (t, h) in self.arcs:
            if t in out and h in inn:  # dangling arcs are reported by validate()
                out[t].append(h)
                inn[h].append(t)
        object.__setattr__(self, "out_nbrs",
                           {n: tuple(sorted(v)) for n, v in out.items()})
        object.__setattr__(self, "in_nbrs",
                           {n: tuple(sorted(v)) for n, v in inn.items()})
        # forward reachability from each source / backward from each terminal
        S_i: dict[str, set[str]] = {n: set() for n in self.nodes}
        for s in self.sources:
            seen, stack = {s}, [s]
            while stack:
                cur = stack.pop()
                for nxt in out[cur]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            for n in seen - {s}:
                S_i[n].add(s)
        T_i: dict[str, set[str]] = {n: set() for n in self.nodes}
        for t in self.terminals:
            seen, stack = {t}, [t]
            while stack:
                cur = stack.pop()
                for prv in inn[cur]:
                    if prv not in seen:
                        seen.add(prv)
                        stack.append(prv)
            for n in seen - {t}:
                T_i[n].add(t)
        object.__setattr__(self, "S_i", {n: tuple(sorted(v)) for n, v in S_i.items()})
        object.__setattr__(self, "T_i", {n: tuple(sorted(v)) for n, v in T_i.items()})

    # -- queries ----------------------------------------------------------------

    def kind(self, n: str) -> str:
        return self.nodes[n].kind

    def N_si_minus(self, s: str, i: str) -> tuple[str, ...]:
        """In-neighbors of pool i usable by commodity s: s itself plus
        non-source nodes that s can reach."""
        out = []
        for j in self.in_nbrs[i]:
            if j in self.sources and j != s:
                continue
            if j == s or s in self.S_i[j]:
                out.append(j)
        return tuple(out)

    def ghost_pairs(self, basis: str = "source") -> list[tuple[str, str]]:
        """(s, i) pairs with s in S_i but no arc (source basis), or (i, t)
        pairs with t in T_i but no arc (terminal basis)."""
        pairs = []
        if basis == "source":
            for i in self.pools:
                for s in self.S_i[i]:
                    if (s, i) not in self.arcs:
                        pairs.append((s, i))
        else:
            for i in self.pools:
                for t in self.T_i[i]:
                    if (i, t) not in self.arcs:
                        pairs.append((i, t))
        return pairs

    def ghost_bound(self, pair: tuple[str, str], pool: str) -> tuple[float, float]:
        if pair in self.ghost_bounds:
            return self.ghost_bounds[pair]
        return (0.0, self.nodes[pool].U)

    def commodity_bound(self, s: str, i: str) -> tuple[float, float]:
        """Bounds on the total commodity-s flow at pool i: the physical arc
        interval when the arc exists, otherwise the ghost interval."""
        arc = self.arcs.get((s, i))
        if arc is not None:
            return (arc.l, arc.u)
        return self.ghost_bound((s, i), i)

    def terminal_commodity_bound(self, i: str, t: str) -> tuple[float, float]:
        arc = self.arcs.get((i, t))
        if arc is not None:
            return (arc.l, arc.u)
        return self.ghost_bound((i, t), i)

    def pool_pool_cycles(self) -> bool:
        """True when the pool-pool subgraph has a directed cycle."""
        adj = {p: [q for q in self.out_nbrs[p] if q in self.pools] for p in self.pools}
        color = {p: 0 for p in self.pools}

        def dfs(v: str) -> bool:
            color[v] = 1
            for w in adj[v]:
                if color[w] == 1 or (color[w] == 0 and dfs(w)):
                    return True
            color[v] = 2
            return False

        return any(color[p] == 0 and dfs(p) for p in self.pools)

    def characteristics(self) -> dict[str, int]:
        """Node/arc counts; 'core' counts exclude the surplus machinery that
        the mining converter appends (ids carrying the 'inf' time tag)."""
        def is_surplus(n: str) -> bool:
            return n.endswith(":inf")

        core_nodes = {n for n in self.nodes if not is_surplus(n)}
        core_arcs = [(a, b) for (a, b) in self.arcs
                     if a in core_nodes and b in core_nodes]
        asi = sum(1 for (a, b) in core_arcs
                  if self.kind(a) == SOURCE and self.kind(b) == POOL)
        aii = sum(1 for (a, b) in core_arcs
                  if self.kind(a) == POOL and self.kind(b) == POOL)
        ait = sum(1 for (a, b) in core_arcs
                  if self.kind(a) == POOL and self.kind(b) == TERMINAL)
        return {
            "S": sum(1 for n in core_nodes if self.kind(n) == SOURCE),
            "I": sum(1 for n in core_nodes if self.kind(n) == POOL),
            "T": sum(1 for n in core_nodes if self.kind(n) == TERMINAL),
            "A": len(core_arcs),
            "K": self.n_specs,
            "ASI": asi, "AII": aii, "AIT": ait,
        }

    def with_bounds(self, node_bounds: dict[str, tuple[float, float]],
                    arc_bounds: dict[tuple[str, str], tuple[float, float]],
                    ghost_bounds: dict[tuple[str, str], tuple[float, float]]) -> "PoolingInstance":
        nodes = dict(self.nodes)
        for n, (lo, hi) in node_bounds.items():
            nodes[n] = replace(nodes[n], L=lo, U=hi)
        arcs = dict(self.arcs)
        for k, (lo, hi) in arc_bounds.items():
            arcs[k] = replace(arcs[k], l=lo, u=hi)
        gb = dict(self.ghost_bounds)
        gb.update(ghost_bounds)
        return PoolingInstance(self.name, nodes, arcs, self.n_specs, self.lam,
                               self.mu_lo, self.mu_hi, self.penalty, gb)


def validate(inst: PoolingInstance) -> PoolingInstance:
    for n, node in inst.nodes.items():
        if node.kind not in _KINDS:
            raise SchemaError(f"node {n!r}: unknown kind {node.kind!r}")
        if node.L < 0 or node.L > node.U:
            raise InconsistencyError(f"node {n!r}: bad capacity [{node.L}, {node.U}]")
    for (t, h), arc in inst.arcs.items():
        if t not in inst.nodes or h not in inst.nodes:
            raise InconsistencyError(f"arc ({t}, {h}) references unknown node")
        if arc.l < 0 or arc.l > arc.u:
            raise InconsistencyError(f"arc ({t}, {h}): bad interval [{arc.l}, {arc.u}]")
        kt, kh = inst.kind(t), inst.kind(h)
        if kt == TERMINAL or kh == SOURCE or (kt == POOL and kh == SOURCE):
            raise InconsistencyError(f"arc ({t}, {h}): {kt} -> {kh} not allowed")
    for s in inst.sources:
        if len(inst.lam.get(s, ())) != inst.n_specs:
            raise SchemaError(f"source {s!r}: spec vector missing or wrong length")
    for t in inst.terminals:
        lo = inst.mu_lo.get(t, tuple([0.0] * inst.n_specs))
        hi = inst.mu_hi.get(t, tuple([INF] * inst.n_specs))
        if len(lo) != inst.n_specs or len(hi) != inst.n_specs:
            raise SchemaError(f"terminal {t!r}: spec window has wrong length")
        if any(a > b for a, b in zip(lo, hi)):
            raise InconsistencyError(f"terminal {t!r}: empty spec window")
    for p in inst.pools:
        if not inst.S_i[p] or not inst.T_i[p]:
            raise InconsistencyError(f"pool {p!r} is unreachable (no source path "
                                     "or no terminal path)")
    return inst


# -- JSON parsing ---------------------------------------------------------------

def _num(value, default):
    if value is None:
        return default
    return float(value)


def parse_instance_dict(data: dict, name: str = "instance") -> PoolingInstance:
    try:
        nodes_raw = data["nodes"]
        arcs_raw = data["arcs"]
        specs = data.get("specs", {})
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"missing top-level field: {exc}") from exc
    nodes: dict[str, Node] = {}
    for nd in nodes_raw:
        try:
            nid, kind = str(nd["id"]), str(nd["kind"])
        except KeyError as exc:
            raise SchemaError(f"node entry missing field {exc}") from exc
        if nid in nodes:
            raise InconsistencyError(f"duplicate node id {nid!r}")
        nodes[nid] = Node(nid, kind, _num(nd.get("L"), 0.0), _num(nd.get("U"), INF))
    arcs: dict[tuple[str, str], Arc] = {}
    for ar in arcs_raw:
        try:
            t, h = str(ar["from"]), str(ar["to"])
        except KeyError as exc:
            raise SchemaError(f"arc entry missing field {exc}") from exc
        if (t, h) in arcs:
            raise InconsistencyError(f"duplicate arc ({t}, {h})")
        arcs[(t, h)] = Arc(t, h, _num(ar.get("l"), 0.0), _num(ar.get("u"), INF),
                           _num(ar.get("cost"), 0.0))
    k = int(specs.get("K", 0))
    lam = {str(s): tuple(float(v) for v in vec)
           for s, vec in specs.get("lambda", {}).items()}
    mu_lo = {str(t): tuple(float(v) for v in vec)
             for t, vec in specs.get("mu_lo", {}).items()}
    mu_hi = {str(t): tuple(_num(v, INF) for v in vec)
             for t, vec in specs.get("mu_hi", {}).items()}
    penalty = {str(t): tuple(float(v) for v in vec)
               for t, vec in data.get("penalty", {}).items()}
    inst = PoolingInstance(str(data.get("name", name)), nodes, arcs, k,
                           lam, mu_lo, mu_hi, penalty)
    return validate(inst)


def parse_instance(path) -> PoolingInstance:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
    return parse_instance_dict(data, name=str(path))


def generalize(inst: PoolingInstance) -> PoolingInstance:
    """Add both directed arcs between every ordered pool pair (cost 0,
    bounds [0, min(U_i, U_j)]); existing arcs are left untouched."""
    arcs = dict(inst.arcs)
    for i in inst.pools:
        for j in inst.pools:
            if i != j and (i, j) not in arcs:
                cap = min(inst.nodes[i].U, inst.nodes[j].U)
                arcs[(i, j)] = Arc(i, j, 0.0, cap, 0.0)
    return validate(PoolingInstance(inst.name, inst.nodes, arcs, inst.n_specs,
                                    inst.lam, inst.mu_lo, inst.mu_hi,
                                    inst.penalty, inst.ghost_bounds))


# -- mining schedules -------------------------------------------------------------

@dataclass(frozen=True)
class Supply:
    stockpile: str
    time: float
    qty: float
    spec: tuple[float, ...]


@dataclass(frozen=True)
class Demand:
    time: float
    qty: float
    spec_max: tuple[float, ...]
    penalty: tuple[float, ...]


@dataclass(frozen=True)
class MiningSchedule:
    stockpiles: tuple[str, ...]
    supplies: tuple[Supply, ...]
    demands: tuple[Demand, ...]

    @property
    def n_specs(self) -> int:
        return len(self.supplies[0].spec) if self.supplies else 0

    def surplus(self) -> float:
        return sum(s.qty for s in self.supplies) - sum(d.qty for d in self.demands)


def parse_mining_dict(data: dict) -> MiningSchedule:
    try:
        piles = tuple(str(p) for p in data["stockpiles"])
        supplies = tuple(Supply(str(s["stockpile"]), float(s["time"]),
                                float(s["qty"]), tuple(float(v) for v in s["spec"]))
                         for s in data["supplies"])
        demands = tuple(Demand(float(d["time"]), float(d["qty"]),
                               tuple(float(v) for v in d["spec_max"]),
                               tuple(float(v) for v in d.get("penalty",
                                     [1.0] * len(d["spec_max"]))))
                        for d in data["demands"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"mining schedule: missing field {exc}") from exc
    sched = MiningSchedule(piles, supplies, demands)
    for s in supplies:
        if s.stockpile not in piles:
            raise InconsistencyError(f"supply references unknown stockpile {s.stockpile!r}")
        if s.qty < 0:
            raise InconsistencyError("negative supply quantity")
    times = [s.time for s in supplies]
    if len(set((s.stockpile, s.time) for s in supplies)) != len(times):
        raise InconsistencyError("duplicate supply time within a stockpile")
    for d in demands:
        if d.qty < 0:
            raise InconsistencyError("negative demand quantity")
    if sched.surplus() < 0:
        raise InconsistencyError("total demand exceeds total supply")
    k = sched.n_specs
    if any(len(s.spec) != k for s in supplies) or any(len(d.spec_max) != k for d in demands):
        raise SchemaError("inconsistent spec vector lengths")
    return sched


def parse_mining(path) -> MiningSchedule:
    with open(path) as f:
        data = json.load(f)
    return parse_mining_dict(data)


def _tag(time: float) -> str:
    return f"{time:g}"


def convert_mining(sched: MiningSchedule,
                   default_penalty: float = 1.0) -> PoolingInstance:
    """Time-indexed pooling instance: one source+pool per supply, a pool
    chain per stockpile ending in a surplus pool, one terminal per demand
    (fed by each stockpile's latest pool) and one surplus terminal."""
    if sched.surplus() < 0:
        raise InconsistencyError("total demand exceeds total supply")
    k = sched.n_specs
    nodes: dict[str, Node] = {}
    arcs: dict[tuple[str, str], Arc] = {}
    lam: dict[str, tuple[float, ...]] = {}
    mu_lo: dict[str, tuple[float, ...]] = {}
    mu_hi: dict[str, tuple[float, ...]] = {}
    penalty: dict[str, tuple[float, ...]] = {}

    by_pile: dict[str, list[Supply]] = {p: [] for p in sched.stockpiles}
    for s in sched.supplies:
        by_pile[s.stockpile].append(s)
    for p in by_pile:
        by_pile[p].sort(key=lambda s: s.time)

    total_supply = sum(s.qty for s in sched.supplies)

    # supply sources and their pools; pool capacity starts at the cumulative
    # supply that can have reached it
    pool_of: dict[tuple[str, float], str] = {}
    for pile, sups in by_pile.items():
        if not sups:
            continue
        cum = 0.0
        for s in sups:
            cum += s.qty
            sid = f"s:{pile}:{_tag(s.time)}"
            pid = f"i:{pile}:{_tag(s.time)}"
            nodes[sid] = Node(sid, SOURCE, s.qty, s.qty)
            nodes[pid] = Node(pid, POOL, 0.0, cum)
            lam[sid] = s.spec
            arcs[(sid, pid)] = Arc(sid, pid, 0.0, s.qty, 0.0)
            pool_of[(pile, s.time)] = pid
        # chain within the stockpile, ending in the surplus pool
        surplus_pool = f"i:{pile}:inf"
        nodes[surplus_pool] = Node(surplus_pool, POOL, 0.0, cum)
        chain = [pool_of[(pile, s.time)] for s in sups] + [surplus_pool]
        for a, b in zip(chain, chain[1:]):
            arcs[(a, b)] = Arc(a, b, 0.0, cum, 0.0)

    # demand terminals, fed by the latest pool of each stockpile at that time
    demands = sorted(sched.demands, key=lambda d: d.time)
    for d in demands:
        tid = f"t:{_tag(d.time)}"
        if tid in nodes:
            raise InconsistencyError(f"duplicate demand time {d.time}")
        nodes[tid] = Node(tid, TERMINAL, d.qty, d.qty)
        mu_lo[tid] = tuple([0.0] * k)
        mu_hi[tid] = d.spec_max
        penalty[tid] = tuple(w if w > 0 else default_penalty for w in d.penalty)
        for pile, sups in by_pile.items():
            current = None
            for s in sups:
                if s.time <= d.time:
                    current = pool_of[(pile, s.time)]
            if current is not None:
                cap = nodes[current].U
                arcs[(current, tid)] = Arc(current, tid, 0.0, min(cap, d.qty), 0.0)

    # surplus terminal takes everything that is not demanded
    surplus = sched.surplus()
    tsur = "t:inf"
    nodes[tsur] = Node(tsur, TERMINAL, surplus, surplus)
    mu_lo[tsur] = tuple([0.0] * k)
    mu_hi[tsur] = tuple([INF] * k)
    for pile in sched.stockpiles:
        sp = f"i:{pile}:inf"
        if sp in nodes:
            arcs[(sp, tsur)] = Arc(sp, tsur, 0.0, nodes[sp].U, 0.0)

    inst = PoolingInstance("mining", nodes, arcs, k, lam, mu_lo, mu_hi, penalty)
    return validate(inst)


def to_dict(inst: PoolingInstance) -> dict:
    """Plain-JSON form of an instance (inverse of parse_instance_dict)."""
    def clean(v):
        return None if math.isinf(v) else v

    return {
        "name": inst.name,
        "nodes": [{"id": n.id, "kind": n.kind, "L": n.L, "U": clean(n.U)}
                  for n in sorted(inst.nodes.values(), key=lambda n: n.id)],
        "arcs": [{"from": a.tail, "to": a.head, "l": a.l, "u": clean(a.u),
                  "cost": a.cost}
                 for a in sorted(inst.arcs.values(), key=lambda a: a.key)],
        "specs": {
            "K": inst.n_specs,
            "lambda": {s: list(v) for s, v in sorted(inst.lam.items())},
            "mu_lo": {t: list(v) for t, v in sorted(inst.mu_lo.items())},
            "mu_hi": {t: [clean(x) for x in v]
                      for t, v in sorted(inst.mu_hi.items())},
        },
        "penalty": {t: list(v) for t, v in sorted(inst.penalty.items())},
    }


def content_hash(inst: PoolingInstance) -> str:
    """Stable digest of the instance content (bounds-cache keying)."""
    import hashlib

    blob = json.dumps(to_dict(inst), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
