"""OBBT and the mining single-pass tightening."""

import pytest

from poolkit.bench import compute_gap
from poolkit.instances import Demand, MiningSchedule, Supply, convert_mining
from poolkit.relaxations import build_method, parse_method
from poolkit.solver import solve
from poolkit.tightening import (BoundUpdate, TighteningError, apply_bounds,
                                default_obbt_recipe, mining_tighten, obbt)
from conftest import make_schedule


def mcf_value(inst, basis="S"):
    return solve(build_method(inst, parse_method(f"MCF:{basis}")).model).objective


class TestOBBT:
    def test_haverly1_closes_all_f_gaps(self, haverly1):
        upd, zlb, zub = default_obbt_recipe(haverly1, workers=4)
        assert zlb == pytest.approx(-500.0) and zub == pytest.approx(-400.0)
        inst = apply_bounds(haverly1, upd)
        for label in ["F1:S", "F2:S", "F3:S", "F4:S"]:
            res = solve(build_method(inst, parse_method(label)).model)
            assert compute_gap(-400.0, res.objective) == pytest.approx(0.0, abs=0.05)

    def test_soundness_optimum_preserved(self, haverly3):
        from poolkit.bench import exact_value
        upd, _, _ = default_obbt_recipe(haverly3, workers=4)
        inst = apply_bounds(haverly3, upd)
        ev = exact_value(inst, use_obbt=False, workers=2)
        assert ev.value == pytest.approx(-750.0, rel=1e-4)

    def test_monotone_second_pass(self, haverly2):
        upd1, zlb, zub = default_obbt_recipe(haverly2, workers=4)
        inst1 = apply_bounds(haverly2, upd1)
        upd2 = obbt(inst1, "F4:T", zlb, zub, workers=4)
        for key, (lo, hi) in upd2.arc_bounds.items():
            arc = inst1.arcs[key]
            assert lo >= arc.l - 1e-7 and hi <= arc.u + 1e-7

    def test_worker_count_does_not_change_result(self, haverly1):
        a = obbt(haverly1, "MCF:T", -500.0, -400.0, workers=1)
        b = obbt(haverly1, "MCF:T", -500.0, -400.0, workers=4)
        assert a.arc_bounds == b.arc_bounds
        assert a.node_bounds == b.node_bounds
        assert a.ghost_bounds == b.ghost_bounds

    def test_unchanged_target_provenance(self, haverly1):
        upd = obbt(haverly1, "MCF:T", -1e6, 1e6, workers=1)
        # with a vacuous objective box some targets keep their bounds
        assert any(tag == "unchanged" for tag in upd.provenance.values())

    def test_bad_box_rejected(self, haverly1):
        with pytest.raises(TighteningError):
            obbt(haverly1, "MCF:T", 10.0, -10.0)

    def test_infeasible_box_diagnostic(self, haverly1):
        with pytest.raises(TighteningError, match="infeasible"):
            obbt(haverly1, "MCF:T", 1e6, 2e6)  # far beyond any feasible cost

    def test_identity_update_is_noop(self, haverly1):
        inst = apply_bounds(haverly1, BoundUpdate())
        assert inst.arcs == haverly1.arcs
        assert inst.nodes == haverly1.nodes

    def test_empty_interval_reported(self, haverly1):
        upd = BoundUpdate(node_bounds={"p1": (250.0, 200.0)})
        with pytest.raises(TighteningError, match="empty interval"):
            apply_bounds(haverly1, upd)

    def test_json_round_trip(self, haverly1):
        upd, _, _ = default_obbt_recipe(haverly1, workers=2)
        back = BoundUpdate.from_json(upd.to_json())
        assert back.arc_bounds == upd.arc_bounds
        assert back.node_bounds == upd.node_bounds
        assert back.z_box == pytest.approx(upd.z_box)


class TestMiningTighten:
    def test_step1_supply_pins_source_and_arc(self):
        sched = MiningSchedule(("sp1",), (Supply("sp1", 1.0, 10.0, (1.0,)),), ())
        inst = convert_mining(sched)
        upd = mining_tighten(inst)
        assert upd.node_bounds.get("s:sp1:1", None) in (None, (10.0, 10.0))
        lo, hi = upd.arc_bounds[("s:sp1:1", "i:sp1:1")]
        assert lo == hi == 10.0

    def test_step2_terminal_pins_demand(self):
        inst = convert_mining(make_schedule(2, 2, 3))
        upd = mining_tighten(inst)
        for t in inst.terminals:
            node = inst.nodes[t]
            got = upd.node_bounds.get(t, (node.L, node.U))
            assert got[0] == got[1] == node.U

    def test_step3_formula_and_lp_cross_check(self):
        # two pools feeding one terminal with demand 8; the other pool can
        # carry at most 5, so at least 3 units must use this arc
        sched = MiningSchedule(
            ("a", "b"),
            (Supply("a", 1.0, 10.0, (1.0,)), Supply("b", 2.0, 5.0, (1.0,))),
            (Demand(3.0, 8.0, (2.0,), (1.0,)),))
        inst = convert_mining(sched)
        upd = mining_tighten(inst)
        lo, hi = upd.arc_bounds[("i:a:1", "t:3")]
        assert lo == pytest.approx(max(8.0 - 5.0, 0.0))
        # cross-check by minimizing the arc flow over the MCF relaxation
        built = build_method(inst, parse_method("MCF:S"))
        model = built.model
        model.set_objective({"f[i:a:1,t:3]": 1.0})
        res = solve(model)
        assert res.objective >= lo - 1e-7

    def test_sound_for_mcf_value(self):
        sched = make_schedule(4, 3, 5)
        inst = convert_mining(sched)
        before = mcf_value(inst)
        tightened = apply_bounds(inst, mining_tighten(inst))
        after = mcf_value(tightened)
        assert after == pytest.approx(before, abs=1e-6 * max(1.0, abs(before)))

    def test_structure_precondition(self, haverly1):
        with pytest.raises(Exception):
            mining_tighten(haverly1)  # sources feed one pool each in mining graphs

    def test_surplus_cap_limits_carry_arcs(self):
        # one early demand consumes everything: the carry arc after it is 0
        sched = MiningSchedule(
            ("a",),
            (Supply("a", 1.0, 6.0, (1.0,)), Supply("a", 5.0, 4.0, (1.0,))),
            (Demand(2.0, 6.0, (2.0,), (1.0,)),))
        inst = convert_mining(sched)
        upd = mining_tighten(inst)
        lo, hi = upd.arc_bounds[("i:a:1", "i:a:5")]
        assert hi == pytest.approx(0.0)
