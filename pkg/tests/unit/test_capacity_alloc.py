# tests/unit/test_capacity_alloc.py

import unittest

from tests.mocks.mock_scenario import make_context
from uavmec.logic.capacity_alloc import (
    BudgetReport, budget_report, minimal_feasible_frequency, plan_frequency, solve_capacity,
    transmit_time, with_frequency,
)
from uavmec.logic.allocation import capped_allocation
from uavmec.logic.compute_model import evaluate_mode
from uavmec.models.decision import Allocation, FrequencyAssignment, Placement
from uavmec.models.scenario import ScenarioConfig
from uavmec.utils.errors import InfeasibleError


class TestMinimalFrequency(unittest.TestCase):
    def test_exact_fit(self):
        self.assertAlmostEqual(minimal_feasible_frequency(1e8, 10.0, 0.5, 0.0, 1e10), 2e9)

    def test_deviation_is_added(self):
        self.assertAlmostEqual(minimal_feasible_frequency(1e8, 10.0, 0.5, 1e8, 1e10), 2.1e9)
        self.assertAlmostEqual(minimal_feasible_frequency(1e8, 10.0, 0.5, -1e8, 1e10), 1.9e9)

    def test_over_cap_is_infeasible(self):
        with self.assertRaises(InfeasibleError):
            minimal_feasible_frequency(1e8, 10.0, 0.05, 0.0, 1e10)

    def test_no_time_left_is_infeasible(self):
        with self.assertRaises(InfeasibleError):
            minimal_feasible_frequency(1e8, 10.0, 0.0, 0.0, 1e10)

    def test_floor(self):
        self.assertEqual(minimal_feasible_frequency(1.0, 1.0, 1.0, 0.0, 1e10), 1e7)


class TestPlanFrequency(unittest.TestCase):
    def setUp(self):
        self.cfg = ScenarioConfig()

    def test_local_task_gets_minimal_frequency(self):
        ctx = make_context(Placement.LOCAL)
        assignment = plan_frequency(ctx, capped_allocation(ctx), self.cfg)
        self.assertTrue(assignment.feasible)
        self.assertAlmostEqual(assignment.frequency, 2e9)

    def test_device_task_accounts_for_transmission(self):
        ctx = make_context(Placement.DEVICE, f_dev=5e8)
        alloc = capped_allocation(ctx)
        t_tx = transmit_time(ctx, alloc, self.cfg)
        self.assertGreater(t_tx, 0.0)
        assignment = plan_frequency(ctx, alloc, self.cfg)
        self.assertAlmostEqual(assignment.frequency, 1e9 / (0.5 - t_tx) + 5e8, delta=1.0)

    def test_infeasible_task_keeps_cap(self):
        ctx = make_context(Placement.LOCAL, deadline=0.1)
        assignment = plan_frequency(ctx, capped_allocation(ctx), self.cfg)
        self.assertFalse(assignment.feasible)
        self.assertEqual(assignment.frequency, self.cfg.mtu_f_max)

    def test_relay_task_has_no_frequency(self):
        ctx = make_context(Placement.BS_RELAY)
        assignment = plan_frequency(ctx, capped_allocation(ctx), self.cfg)
        self.assertTrue(assignment.feasible)
        self.assertEqual(assignment.frequency, 0.0)
        self.assertEqual(transmit_time(ctx, capped_allocation(ctx), self.cfg), 0.0)

    def test_with_frequency_targets_the_right_field(self):
        alloc = Allocation(p_uav=0.1)
        updated = with_frequency(alloc, FrequencyAssignment(0, 0, Placement.UAV, 3e9, True))
        self.assertEqual(updated, Allocation(p_uav=0.1, f_uav=3e9))
        relay = with_frequency(alloc, FrequencyAssignment(0, 0, Placement.BS_RELAY, 0.0, True))
        self.assertEqual(relay, alloc)


class TestBudgets(unittest.TestCase):
    def setUp(self):
        self.cfg = ScenarioConfig()

    def test_draws_accumulate(self):
        report = BudgetReport()
        report.draw("mtu:0", 10.0, 6.0)
        report.draw("mtu:0", 10.0, 6.0)
        report.draw("device:1", 10.0, 1.0)
        self.assertEqual(report.usage["mtu:0"], 12.0)
        self.assertEqual(report.breaches, ["mtu:0"])

    def test_local_tasks_charge_idle_hover_to_uav(self):
        contexts = [make_context(Placement.LOCAL), make_context(Placement.LOCAL)]
        result = solve_capacity(contexts, [capped_allocation(c) for c in contexts], self.cfg)
        report = budget_report(contexts, result.outcomes, self.cfg)
        self.assertAlmostEqual(report.usage["uav"], 2 * self.cfg.hover_power * self.cfg.slot_share)
        self.assertAlmostEqual(report.usage["mtu:0"], result.objective)

    def test_uav_budget_override(self):
        contexts = [make_context(Placement.UAV)]
        result = solve_capacity(contexts, [capped_allocation(c) for c in contexts], self.cfg)
        self.assertEqual(result.budget.breaches, [])
        report = budget_report(contexts, result.outcomes, self.cfg, uav_budget=1e-6)
        self.assertEqual(report.breaches, ["uav"])


class TestSolveCapacity(unittest.TestCase):
    def setUp(self):
        self.cfg = ScenarioConfig()

    def test_every_feasible_task_meets_its_deadline(self):
        contexts = [make_context(p) for p in
                    (Placement.LOCAL, Placement.DEVICE, Placement.UAV, Placement.BS_RELAY)]
        result = solve_capacity(contexts, [capped_allocation(c) for c in contexts], self.cfg)
        self.assertEqual(result.infeasible, [])
        for ctx, out in zip(contexts, result.outcomes):
            self.assertTrue(out.meets(ctx.task.deadline))
        self.assertAlmostEqual(result.objective, sum(o.total_energy for o in result.outcomes))

    def test_lowers_energy_against_full_frequency(self):
        ctx = make_context(Placement.DEVICE)
        alloc = capped_allocation(ctx)
        result = solve_capacity([ctx], [alloc], self.cfg)
        self.assertLess(result.objective, evaluate_mode(ctx, alloc, self.cfg).total_energy)

    def test_reports_infeasible_indices(self):
        contexts = [make_context(Placement.LOCAL), make_context(Placement.LOCAL, deadline=0.1)]
        result = solve_capacity(contexts, [capped_allocation(c) for c in contexts], self.cfg)
        self.assertEqual(result.infeasible, [1])
        self.assertFalse(result.outcomes[1].meets(0.1))


if __name__ == '__main__':
    unittest.main()
