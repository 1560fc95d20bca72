# tests/unit/test_experiments.py

import json
import os
import tempfile
import unittest
from unittest import mock

import numpy as np
import pandas as pd

from tests.mocks.mock_scenario import tiny_settings
from uavmec.logic.baselines import run_design
from uavmec.logic.ddqn import QNetwork, load_checkpoint, save_checkpoint
from uavmec.logic.experiments import (
    CELL_COLUMNS, SweepCell, aggregate, apply_sweep_value, cmd_report, cmd_sweep, cmd_train,
    report_frame, run_cell, sweep_cells,
)
from uavmec.logic.scenario import sample_deviations
from uavmec.models.training import DesignId, SweepSpec
from uavmec.utils.errors import ConfigError, UavMecError


def cells_frame():
    return pd.DataFrame([
        {"variable": "L", "value": 80.0, "design": "proposed", "total_energy": 10.0,
         "mtu_energy": 4.0, "uav_energy": 6.0, "violations": 0},
        {"variable": "L", "value": 80.0, "design": "proposed", "total_energy": 14.0,
         "mtu_energy": 6.0, "uav_energy": 8.0, "violations": 2},
        {"variable": "L", "value": 80.0, "design": "local_only", "total_energy": 24.0,
         "mtu_energy": 24.0, "uav_energy": 0.0, "violations": 0},
        {"variable": "L", "value": 80.0, "design": "local_only", "total_energy": 24.0,
         "mtu_energy": 24.0, "uav_energy": 0.0, "violations": 0},
    ])


class TestSweepValues(unittest.TestCase):
    def setUp(self):
        self.settings = tiny_settings()

    def test_task_size_in_mbits(self):
        s = apply_sweep_value(self.settings, "L", 80.0).scenario
        self.assertEqual((s.task_bits_min, s.task_bits_max), (80e6, 80e6))

    def test_mtu_count(self):
        self.assertEqual(apply_sweep_value(self.settings, "M", 3.0).scenario.num_mtus, 3)

    def test_frequency_cap_in_ghz(self):
        self.assertEqual(apply_sweep_value(self.settings, "f_max_mtu", 5.0).scenario.mtu_f_max, 5e9)

    def test_deviation_and_learning_rate(self):
        self.assertEqual(apply_sweep_value(self.settings, "deviation_delta", 0.3)
                         .scenario.deviation_delta, 0.3)
        self.assertEqual(apply_sweep_value(self.settings, "learning_rate", 0.01)
                         .train.learning_rate, 0.01)

    def test_deviation_sweep_is_one_sided(self):
        self.assertEqual(self.settings.scenario.deviation_mode, "symmetric")
        point = apply_sweep_value(self.settings, "deviation_delta", 0.2).scenario
        self.assertEqual(point.deviation_mode, "positive")
        f_est = np.full(200, 6e9)
        devs = sample_deviations(f_est, point, np.random.default_rng(0))
        self.assertTrue(np.all(devs >= 0.0))
        self.assertTrue(np.all(devs <= 0.2 * 6e9))

    def test_larger_deviation_scales_the_same_draws(self):
        f_est = np.full(50, 6e9)
        low = apply_sweep_value(self.settings, "deviation_delta", 0.05).scenario
        high = apply_sweep_value(self.settings, "deviation_delta", 0.1).scenario
        a = sample_deviations(f_est, low, np.random.default_rng(7))
        b = sample_deviations(f_est, high, np.random.default_rng(7))
        np.testing.assert_allclose(b, 2.0 * a, rtol=1e-12)

    def test_invalid_values(self):
        with self.assertRaises(UavMecError):
            apply_sweep_value(self.settings, "bandwidth", 1.0)
        with self.assertRaises(ConfigError):
            apply_sweep_value(self.settings, "deviation_delta", 1.5)

    def test_grid_order(self):
        spec = SweepSpec("L", (80.0, 100.0), (0, 1), (DesignId.LOCAL_ONLY, DesignId.PROPOSED))
        cells = sweep_cells(spec, self.settings)
        self.assertEqual(len(cells), 8)
        self.assertEqual([(c.value, c.design, c.seed) for c in cells[:4]], [
            (80.0, "local_only", 0), (80.0, "local_only", 1),
            (80.0, "proposed", 0), (80.0, "proposed", 1),
        ])
        self.assertEqual(cells[4].settings.scenario.task_bits_max, 100e6)


class TestAggregate(unittest.TestCase):
    def test_mean_and_std_over_seeds(self):
        summary = aggregate(cells_frame())
        self.assertEqual(list(summary["design"]), ["proposed", "local_only"])
        proposed = summary.iloc[0]
        self.assertEqual(proposed["total_energy_mean"], 12.0)
        self.assertAlmostEqual(proposed["total_energy_std"], 2.8284271247, places=9)
        self.assertEqual(proposed["violations_mean"], 1.0)
        self.assertEqual(summary.iloc[1]["total_energy_std"], 0.0)


class TestReport(unittest.TestCase):
    def test_reference_gap_is_zero(self):
        report = report_frame(cells_frame())
        gaps = dict(zip(report["design"], report["gap_vs_proposed"]))
        self.assertEqual(gaps["proposed"], 0.0)
        self.assertAlmostEqual(gaps["local_only"], 0.5)

    def test_other_reference(self):
        report = report_frame(cells_frame(), "local_only")
        gaps = dict(zip(report["design"], report["gap_vs_local_only"]))
        self.assertAlmostEqual(gaps["proposed"], -1.0)

    def test_penalized_energy_ranks_designs(self):
        frame = cells_frame()
        frame["penalized_energy"] = frame["total_energy"] + 50.0 * frame["violations"]
        report = report_frame(frame)
        self.assertEqual(list(report["design"]), ["local_only", "proposed"])
        self.assertEqual(list(report["mean_penalized"]), [24.0, 62.0])
        self.assertEqual(list(report["mean_energy"]), [24.0, 12.0])
        gaps = dict(zip(report["design"], report["gap_vs_proposed"]))
        self.assertAlmostEqual(gaps["local_only"], (24.0 - 62.0) / 24.0)

    def test_missing_reference_falls_back_to_first_design(self):
        frame = cells_frame()
        report = report_frame(frame[frame["design"] == "local_only"])
        self.assertIn("gap_vs_local_only", report.columns)

    def test_empty_rows(self):
        with self.assertRaises(UavMecError):
            report_frame(cells_frame().iloc[0:0])

    def test_report_from_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "cells.csv")
            cells_frame().to_csv(path, index=False)
            text = cmd_report(path)
        self.assertIn("+50.00%", text)
        self.assertIn("proposed", text)

    def test_unusable_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(UavMecError):
                cmd_report(os.path.join(tmp, "missing.csv"))
            empty = os.path.join(tmp, "empty.csv")
            open(empty, "w").close()
            with self.assertRaises(UavMecError):
                cmd_report(empty)
            partial = os.path.join(tmp, "partial.csv")
            pd.DataFrame({"design": ["proposed"]}).to_csv(partial, index=False)
            with self.assertRaises(UavMecError):
                cmd_report(partial)


class TestCommands(unittest.TestCase):
    def test_train_writes_artifacts(self):
        with tempfile.TemporaryDirectory() as tmp:
            run_dir = cmd_train(tiny_settings(seed=4), DesignId.PROPOSED, tmp, "exp")
            self.assertEqual(str(run_dir), os.path.join(tmp, "exp", "proposed", "4"))
            for name in ("learning_curve.csv", "checkpoint.npz", "convergence.csv",
                         "metrics.csv", "trace.csv", "trajectory.csv", "run.json"):
                self.assertTrue((run_dir / name).exists(), name)
            with open(run_dir / "run.json", encoding="utf-8") as f:
                manifest = json.load(f)
            self.assertEqual(manifest["design"], "proposed")
            self.assertEqual(manifest["settings"]["scenario"]["num_mtus"], 2)
            self.assertEqual(len(pd.read_csv(run_dir / "trajectory.csv")), 8)

    def test_train_resumes_from_checkpoint(self):
        with tempfile.TemporaryDirectory() as tmp:
            first = cmd_train(tiny_settings(seed=4), DesignId.PROPOSED, tmp, "first")
            with mock.patch('uavmec.logic.experiments.run_design', wraps=run_design) as spy:
                cmd_train(tiny_settings(seed=4), DesignId.PROPOSED, tmp, "second",
                          resume=first / "checkpoint.npz")
            warm = spy.call_args.kwargs['warm_start']
            self.assertIsInstance(warm, QNetwork)
            self.assertEqual(warm.sizes, load_checkpoint(first / "checkpoint.npz").sizes)

    def test_resume_rejects_unusable_checkpoints(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(UavMecError):
                cmd_train(tiny_settings(), DesignId.PROPOSED, tmp,
                          resume=os.path.join(tmp, "missing.npz"))
            wrong = save_checkpoint(QNetwork.initialize((3, 4, 2), np.random.default_rng(0)),
                                    os.path.join(tmp, "wrong.npz"))
            with self.assertRaises(UavMecError):
                cmd_train(tiny_settings(), DesignId.PROPOSED, tmp, resume=wrong)

    def test_fixed_design_has_no_policy_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            run_dir = cmd_train(tiny_settings(), DesignId.LOCAL_ONLY, tmp)
            self.assertFalse((run_dir / "checkpoint.npz").exists())
            self.assertTrue((run_dir / "metrics.csv").exists())

    def test_run_cell(self):
        cell = SweepCell("L", 80.0, "local_only", 2, apply_sweep_value(tiny_settings(), "L", 80.0))
        row = run_cell(cell)
        self.assertEqual((row["variable"], row["value"], row["design"], row["seed"]),
                         ("L", 80.0, "local_only", 2))
        self.assertGreater(row["total_energy"], 0.0)

    def test_sweep_writes_cells_and_summary(self):
        spec = SweepSpec("L", (80.0, 100.0), (0, 1), (DesignId.LOCAL_ONLY,))
        with tempfile.TemporaryDirectory() as tmp:
            cells, summary = cmd_sweep(spec, tiny_settings(), tmp, "sweep_L")
            self.assertTrue(os.path.exists(os.path.join(tmp, "sweep_L", "cells.csv")))
            self.assertTrue(os.path.exists(os.path.join(tmp, "sweep_L", "summary.csv")))
        self.assertEqual(list(cells.columns), CELL_COLUMNS)
        self.assertEqual(len(cells), 4)
        self.assertEqual(len(summary), 2)
        self.assertLess(summary.iloc[0]["total_energy_mean"], summary.iloc[1]["total_energy_mean"])


if __name__ == '__main__':
    unittest.main()
