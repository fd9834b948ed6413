"""Method parsing, F/M/G builders, valid-inequality injection."""

import pytest

from poolkit.bench import compute_gap
from poolkit.formulations import build_source_based, check_solution, rederive_proportions
from poolkit.instances import parse_instance_dict
from poolkit.relaxations import (MethodError, MethodSpec, build_method,
                                 build_mip_relaxation, build_mip_restriction,
                                 build_relaxation, inject_valid_inequalities,
                                 parse_method)
from poolkit.solver import solve


class TestMethodParsing:
    def test_simple_forms(self):
        assert parse_method("F4:S") == MethodSpec("F4", "source")
        assert parse_method("MCF:T") == MethodSpec("MCF", "terminal")
        spec = parse_method("M2:T:H=3")
        assert spec.kind == "M2" and spec.basis == "terminal" and spec.H == 3

    def test_cut_grammar(self):
        spec = parse_method("F3:S+Vab(x,r)")
        assert spec.cuts == ("Vab",) and spec.cut_space == "both"
        spec = parse_method("F4:S+Vab(x)+Vac(x)")
        assert spec.cuts == ("Vab", "Vac") and spec.cut_space == "x"

    def test_label_round_trip(self):
        for text in ["F1:S", "F4:T", "M1:S:H=3", "G2:T:H=3", "F3:S+Vab(x,r)"]:
            assert parse_method(parse_method(text).label()) == parse_method(text)

    def test_errors(self):
        with pytest.raises(MethodError):
            parse_method("F9:S")
        with pytest.raises(MethodError):
            parse_method("M1:S")      # missing H
        with pytest.raises(MethodError):
            parse_method("F1:S:H=3")  # H on an LP method
        with pytest.raises(MethodError):
            MethodSpec("G1", "source", 0)


def positive_lower_instance():
    """mining-shaped synthetic: hard lower bounds make every block's L > 0"""
    data = {"nodes": [{"id": "a", "kind": "source", "L": 6, "U": 6},
                      {"id": "b", "kind": "source", "L": 4, "U": 4},
                      {"id": "p1", "kind": "pool", "L": 2, "U": 10},
                      {"id": "p2", "kind": "pool", "L": 1, "U": 8},
                      {"id": "t1", "kind": "terminal", "L": 5, "U": 5},
                      {"id": "t2", "kind": "terminal", "L": 5, "U": 5}],
            "arcs": [{"from": "a", "to": "p1", "u": 6, "cost": 1.0},
                     {"from": "b", "to": "p2", "u": 4, "cost": 1.0},
                     {"from": "p1", "to": "p2", "u": 8, "cost": 0.1},
                     {"from": "p1", "to": "t1", "u": 6, "cost": 2.0},
                     {"from": "p1", "to": "t2", "u": 6, "cost": 1.5},
                     {"from": "p2", "to": "t1", "u": 8, "cost": 2.5},
                     {"from": "p2", "to": "t2", "u": 8, "cost": 0.5}],
            "specs": {"K": 1, "lambda": {"a": [3.0], "b": [1.0]},
                      "mu_lo": {"t1": [0.0], "t2": [0.0]},
                      "mu_hi": {"t1": [2.4], "t2": [2.6]}},
            "penalty": {"t1": [50.0], "t2": [50.0]}}
    return parse_instance_dict(data)


class TestFRelaxations:
    def test_haverly1_f1_gap(self, haverly1):
        res = solve(build_relaxation(haverly1, parse_method("F1:S")).model)
        assert compute_gap(-400.0, res.objective) == pytest.approx(25.00, abs=0.01)

    def test_dominance_on_instance(self, haverly3):
        vals = {}
        for kind in ["F1", "F2", "F3", "F4"]:
            vals[kind] = solve(build_relaxation(haverly3,
                                                parse_method(f"{kind}:T")).model).objective
        assert vals["F4"] >= vals["F3"] - 1e-6
        assert vals["F3"] >= max(vals["F1"], vals["F2"]) - 1e-6

    def test_mcf_rows_contained_in_f3(self, haverly1):
        from poolkit.modelir import dump_model
        mcf_rows = set(r.split(": ", 1)[1]
                       for r in dump_model(build_method(haverly1, parse_method("MCF:S")).model)
                       .splitlines() if ": " in r and "in [" not in r)
        f3_rows = set(r.split(": ", 1)[1]
                      for r in dump_model(build_method(haverly1, parse_method("F3:S")).model)
                      .splitlines() if ": " in r and "in [" not in r)
        assert mcf_rows <= f3_rows


class TestValidInequalities:
    def test_literature_blocks_with_zero_L_are_skipped(self, haverly1):
        built = build_relaxation(haverly1, parse_method("F4:S"))
        before = len(built.model.rows)
        inject_valid_inequalities(built, haverly1, parse_method("F4:S+Vab(x,r)"))
        assert built.cut_count == 0
        assert len(built.skipped_blocks) == len(haverly1.pools)
        assert len(built.model.rows) == before

    def test_vab_never_weakens_bound(self):
        inst = positive_lower_instance()
        base = solve(build_relaxation(inst, parse_method("F4:S")).model).objective
        cut = solve(build_relaxation(inst, parse_method("F4:S+Vab(x,r)")).model)
        assert cut.objective >= base - 1e-9
        cut2 = solve(build_relaxation(inst, parse_method("F4:S+Vac(x,r)")).model)
        assert cut2.objective >= base - 1e-9

    def test_cuts_do_not_cut_exact_optimum(self):
        from poolkit.bench import exact_value
        inst = positive_lower_instance()
        ev = exact_value(inst, workers=2)
        cut = solve(build_relaxation(inst, parse_method("F4:S+Vab(x,r)+Vac(x,r)")).model)
        assert cut.objective <= ev.value + 1e-6 * max(1.0, abs(ev.value))

    def test_r_cuts_on_f1_pull_in_cell_fractions(self):
        inst = positive_lower_instance()
        built = build_relaxation(inst, parse_method("F1:S+Vab(r)"))
        assert any(v.startswith("B[p1]:r[") for v in built.model.variables)
        assert built.cut_count > 0


class TestMIP:
    def test_relaxation_monotone_in_H(self, haverly3):
        vals = []
        for H in (1, 2, 3):
            res = solve(build_mip_relaxation(haverly3,
                                             parse_method(f"M1:S:H={H}")).model)
            vals.append(res.dual_bound)
        assert vals[0] <= vals[1] + 1e-7 and vals[1] <= vals[2] + 1e-7

    def test_relaxation_is_outer_restriction_is_inner(self, haverly1):
        m = solve(build_mip_relaxation(haverly1, parse_method("M2:S:H=2")).model)
        g = solve(build_mip_restriction(haverly1, parse_method("G2:S:H=2")).model)
        assert m.objective <= -400.0 + 1e-6
        assert g.objective >= -400.0 - 1e-6

    def test_high_H_restriction_approaches_exact_on_toy(self):
        # single-pool toy with known optimum by direct reasoning: best blend
        # hits the spec cap exactly
        data = {"nodes": [{"id": "a", "kind": "source", "U": 10},
                          {"id": "b", "kind": "source", "U": 10},
                          {"id": "p", "kind": "pool", "U": 10},
                          {"id": "t", "kind": "terminal", "U": 10}],
                "arcs": [{"from": "a", "to": "p", "u": 10, "cost": 1.0},
                         {"from": "b", "to": "p", "u": 10, "cost": 4.0},
                         {"from": "p", "to": "t", "u": 10, "cost": -5.0}],
                "specs": {"K": 1, "lambda": {"a": [3.0], "b": [1.0]},
                          "mu_lo": {"t": [0.0]}, "mu_hi": {"t": [2.0]}}}
        inst = parse_instance_dict(data)
        # optimum: blend a:b = 1:1 meets the cap, margin 5 - 2.5 per unit
        want = -(5 * 10 - (1.0 * 5 + 4.0 * 5))
        res = solve(build_mip_restriction(inst, parse_method("G2:S:H=8")).model)
        assert res.objective == pytest.approx(want, abs=1e-3)
        relax = solve(build_mip_relaxation(inst, parse_method("M2:S:H=8")).model)
        assert relax.dual_bound == pytest.approx(want, abs=1e-3)

    def test_restriction_solutions_are_feasible(self, haverly1):
        bm = build_source_based(haverly1)
        built = build_mip_restriction(haverly1, parse_method("G2:S:H=3"))
        res = solve(built.model)
        assignment = {v: res.assignment.get(v, 0.0) for v in bm.model.variables}
        assignment = rederive_proportions(bm, assignment)
        report = check_solution(bm, assignment, tol=1e-6)
        assert report.ok, report.families

    def test_H_validation(self, haverly1):
        with pytest.raises(MethodError):
            build_mip_relaxation(haverly1, parse_method("F1:S"))
