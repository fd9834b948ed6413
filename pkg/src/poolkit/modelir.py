"""Solver-agnostic optimization model container.

A ModelIR holds continuous/binary variables with bounds, sparse linear
rows, an optional list of bilinear product terms x = q*f, and a linear
minimization objective.  Models are built once and treated as immutable;
solvers and the canonical text dump consume them read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


INF = math.inf

# row senses
LE, GE, EQ = "<=", ">=", "=="


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = 0.0
    ub: float = INF
    binary: bool = False


@dataclass(frozen=True)
class LinRow:
    """One linear constraint: sum(coeffs) sense rhs."""

    name: str
    coeffs: tuple[tuple[str, float], ...]  # (var name, coefficient)
    sense: str
    rhs: float

    def coeff_dict(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for v, c in self.coeffs:
            out[v] = out.get(v, 0.0) + c
        return out


@dataclass(frozen=True)
class BilinearTerm:
    """Product constraint x = q * f (all three are declared variables)."""

    x: str
    q: str
    f: str


class ModelError(ValueError):
    pass


@dataclass
class ModelIR:
    name: str = "model"
    variables: dict[str, Variable] = field(default_factory=dict)
    rows: list[LinRow] = field(default_factory=list)
    bilinear: list[BilinearTerm] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)

    # -- construction helpers -------------------------------------------------

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF,
                binary: bool = False) -> str:
        if name in self.variables:
            raise ModelError(f"duplicate variable {name!r}")
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ModelError(f"variable {name!r} has empty domain [{lb}, {ub}]")
        self.variables[name] = Variable(name, float(lb), float(ub), binary)
        return name

    def add_row(self, name: str, coeffs, sense: str, rhs: float) -> None:
        if sense not in (LE, GE, EQ):
            raise ModelError(f"bad sense {sense!r}")
        if not math.isfinite(rhs):
            raise ModelError(f"row {name!r} has non-finite rhs {rhs}")
        items = tuple(sorted(dict(coeffs).items()))
        for v, _ in items:
            if v not in self.variables:
                raise ModelError(f"row {name!r} references unknown variable {v!r}")
        self.rows.append(LinRow(name, items, sense, float(rhs)))

    def add_range(self, name: str, coeffs, lo: float, hi: float) -> None:
        """lo <= expr <= hi, skipping infinite sides; equality if lo == hi."""
        if lo == hi:
            self.add_row(name, coeffs, EQ, lo)
            return
        if lo > -INF:
            self.add_row(name + ":lo", coeffs, GE, lo)
        if hi < INF:
            self.add_row(name + ":hi", coeffs, LE, hi)

    def add_bilinear(self, x: str, q: str, f: str) -> None:
        for v in (x, q, f):
            if v not in self.variables:
                raise ModelError(f"bilinear term references unknown variable {v!r}")
        self.bilinear.append(BilinearTerm(x, q, f))

    def set_objective(self, coeffs) -> None:
        d = dict(coeffs)
        for v in d:
            if v not in self.variables:
                raise ModelError(f"objective references unknown variable {v!r}")
        self.objective = {v: float(c) for v, c in d.items() if c != 0.0}

    def add_objective_term(self, var: str, coeff: float) -> None:
        if var not in self.variables:
            raise ModelError(f"objective references unknown variable {var!r}")
        self.objective[var] = self.objective.get(var, 0.0) + float(coeff)

    # -- queries ---------------------------------------------------------------

    @property
    def num_binaries(self) -> int:
        return sum(1 for v in self.variables.values() if v.binary)

    def copy_without_bilinear(self, name: str | None = None,
                              drop_vars: set[str] | None = None) -> "ModelIR":
        """Shallow relaxation copy: same rows/bounds, bilinear terms removed."""
        drop = drop_vars or set()
        m = ModelIR(name or (self.name + ":linear"))
        m.variables = {k: v for k, v in self.variables.items() if k not in drop}
        for row in self.rows:
            if any(v in drop for v, _ in row.coeffs):
                raise ModelError(f"cannot drop {drop}: used by row {row.name!r}")
            m.rows.append(row)
        m.objective = {v: c for v, c in self.objective.items() if v not in drop}
        return m


# -- canonical dump -----------------------------------------------------------

def _fmt(x: float) -> str:
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return f"{x:.12g}"


def _fmt_expr(coeffs: tuple[tuple[str, float], ...]) -> str:
    return " + ".join(f"{_fmt(c)}*{v}" for v, c in coeffs)


def dump_model(model: ModelIR) -> str:
    """Deterministic, diffable text form: sorted ids, 12 significant digits."""
    lines = [f"model {model.name}"]
    lines.append("minimize")
    obj = sorted(model.objective.items())
    lines.append("  " + (_fmt_expr(tuple(obj)) if obj else "0"))
    lines.append("subject to")
    for row in sorted(model.rows, key=lambda r: r.name):
        lines.append(f"  {row.name}: {_fmt_expr(row.coeffs)} {row.sense} {_fmt(row.rhs)}")
    lines.append("bilinear")
    for t in sorted(model.bilinear, key=lambda t: (t.x, t.q, t.f)):
        lines.append(f"  {t.x} == {t.q} * {t.f}")
    lines.append("vars")
    for name in sorted(model.variables):
        v = model.variables[name]
        kind = " binary" if v.binary else ""
        lines.append(f"  {name} in [{_fmt(v.lb)}, {_fmt(v.ub)}]{kind}")
    return "\n".join(lines) + "\n"


def parse_dump(text: str) -> ModelIR:
    """Inverse of dump_model, up to float round-trip at 12 significant digits."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("model "):
        raise ModelError("dump must start with 'model <name>'")
    model = ModelIR(lines[0][len("model "):])
    section = None
    pending_rows: list[tuple[str, str]] = []
    pending_obj: str | None = None
    pending_bilinear: list[str] = []
    for ln in lines[1:]:
        stripped = ln.strip()
        if stripped in ("minimize", "subject to", "bilinear", "vars"):
            section = stripped
            continue
        if section == "minimize":
            pending_obj = stripped
        elif section == "subject to":
            name, rest = stripped.split(": ", 1)
            pending_rows.append((name, rest))
        elif section == "bilinear":
            pending_bilinear.append(stripped)
        elif section == "vars":
            name, rest = stripped.split(" in ", 1)
            binary = rest.endswith(" binary")
            if binary:
                rest = rest[: -len(" binary")]
            lo, hi = rest.strip("[]").split(", ")
            model.add_var(name, float(lo), float(hi), binary)
        else:
            raise ModelError(f"line outside any section: {ln!r}")

    def parse_expr(s: str) -> dict[str, float]:
        out: dict[str, float] = {}
        if s == "0":
            return out
        for term in s.split(" + "):
            c, v = term.split("*", 1)
            out[v] = out.get(v, 0.0) + float(c)
        return out

    if pending_obj is not None:
        model.set_objective(parse_expr(pending_obj))
    for name, rest in pending_rows:
        for sense in (LE, GE, EQ):
            marker = f" {sense} "
            if marker in rest:
                expr, rhs = rest.rsplit(marker, 1)
                model.add_row(name, parse_expr(expr), sense, float(rhs))
                break
        else:
            raise ModelError(f"cannot parse row: {rest!r}")
    for item in pending_bilinear:
        x, rest = item.split(" == ", 1)
        q, f = rest.split(" * ", 1)
        model.add_bilinear(x, q, f)
    return model
