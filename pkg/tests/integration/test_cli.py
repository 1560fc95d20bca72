# tests/integration/test_cli.py

import contextlib
import io
import os
import tempfile
import unittest
from unittest import mock

from tests.mocks.mock_scenario import tiny_settings
from uavmec.main import build_parser, main, progress_bar
from uavmec.utils.settings import save_settings


def run_quietly(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


class TestCommandLine(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.config = os.path.join(self.tmp.name, "tiny.conf")
        save_settings(tiny_settings(seed=9), self.config)

    def tearDown(self):
        self.tmp.cleanup()

    def read(self, *parts):
        with open(os.path.join(self.tmp.name, *parts), "rb") as f:
            return f.read()

    def test_verify_subset_passes(self):
        code, out, _ = run_quietly(["verify", "--only", "targets,dt_identity"])
        self.assertEqual(code, 0)
        self.assertIn("PASS  targets", out)
        self.assertIn("PASS  dt_identity", out)

    def test_unknown_oracle(self):
        code, _, err = run_quietly(["verify", "--only", "telepathy"])
        self.assertEqual(code, 2)
        self.assertIn("telepathy", err)

    def test_invalid_design_is_rejected_by_the_parser(self):
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as raised:
                build_parser().parse_args(["train", "--design", "teleport"])
        self.assertNotEqual(raised.exception.code, 0)

    def test_report_on_missing_file(self):
        code, _, err = run_quietly(["report", os.path.join(self.tmp.name, "nope.csv")])
        self.assertEqual(code, 2)
        self.assertIn("No such file", err)

    def test_train_is_reproducible(self):
        for out in ("a", "b"):
            code, _, _ = run_quietly(["train", "--config", self.config, "--out",
                                      os.path.join(self.tmp.name, out)])
            self.assertEqual(code, 0)
        for name in ("metrics.csv", "trace.csv", "convergence.csv", "learning_curve.csv",
                     "trajectory.csv"):
            self.assertEqual(self.read("a", "train", "proposed", "9", name),
                             self.read("b", "train", "proposed", "9", name), name)

    def test_seed_override(self):
        code, out, _ = run_quietly(["train", "--config", self.config, "--out", self.tmp.name,
                                    "--design", "local_only", "--seed", "3"])
        self.assertEqual(code, 0)
        self.assertTrue(os.path.isdir(os.path.join(self.tmp.name, "train", "local_only", "3")))
        self.assertIn("Artifacts written to", out)

    def test_sweep_then_report(self):
        code, _, _ = run_quietly(["sweep", "--config", self.config, "--out", self.tmp.name,
                                  "--variable", "L", "--values", "80,120", "--seeds", "0,1",
                                  "--designs", "local_only,greedy_devices"])
        self.assertEqual(code, 0)
        cells = os.path.join(self.tmp.name, "sweep_L", "cells.csv")
        self.assertTrue(os.path.exists(cells))
        code, out, _ = run_quietly(["report", cells, "--reference", "greedy_devices"])
        self.assertEqual(code, 0)
        self.assertIn("gap_vs_greedy_devices", out)

    def test_invalid_override_is_a_config_error(self):
        code, _, err = run_quietly(["train", "--config", self.config, "--out", self.tmp.name,
                                    "--episodes", "0"])
        self.assertEqual(code, 2)
        self.assertIn("episodes", err)

    def test_train_resumes_from_an_earlier_checkpoint(self):
        code, _, _ = run_quietly(["train", "--config", self.config, "--out", self.tmp.name])
        self.assertEqual(code, 0)
        checkpoint = os.path.join(self.tmp.name, "train", "proposed", "9", "checkpoint.npz")
        code, out, _ = run_quietly(["train", "--config", self.config, "--out", self.tmp.name,
                                    "--experiment", "resumed", "--resume", checkpoint])
        self.assertEqual(code, 0)
        self.assertIn("resumed", out)
        code, _, err = run_quietly(["train", "--config", self.config, "--out", self.tmp.name,
                                    "--resume", os.path.join(self.tmp.name, "none.npz")])
        self.assertEqual(code, 2)
        self.assertIn("Cannot resume", err)


class FakeBar:
    def __init__(self):
        self.n = 0
        self.updates = []
        self.closed = False

    def update(self, step):
        self.updates.append(step)
        self.n += step

    def close(self):
        self.closed = True


class TestProgressBar(unittest.TestCase):
    def test_callback_drives_the_bar(self):
        bar = FakeBar()
        with mock.patch('uavmec.main.tqdm', return_value=bar) as factory:
            with progress_bar("train proposed") as update:
                for value in (10, 50, 50, 100, 120):
                    update(value)
        self.assertEqual(factory.call_args.kwargs["total"], 100)
        self.assertEqual(bar.updates, [10, 40, 50])
        self.assertEqual(bar.n, 100)
        self.assertTrue(bar.closed)

    def test_bar_closes_when_the_run_fails(self):
        bar = FakeBar()
        with mock.patch('uavmec.main.tqdm', return_value=bar):
            with self.assertRaises(RuntimeError):
                with progress_bar("sweep_L") as update:
                    update(20)
                    raise RuntimeError("cell failed")
        self.assertTrue(bar.closed)
        self.assertEqual(bar.n, 20)

    def test_train_command_reports_through_the_bar(self):
        bar = FakeBar()
        with tempfile.TemporaryDirectory() as tmp:
            config = os.path.join(tmp, "tiny.conf")
            save_settings(tiny_settings(seed=2), config)
            with mock.patch('uavmec.main.tqdm', return_value=bar):
                code, _, _ = run_quietly(["train", "--config", config, "--out", tmp])
        self.assertEqual(code, 0)
        self.assertEqual(bar.n, 100)
        self.assertTrue(bar.closed)


if __name__ == '__main__':
    unittest.main()
