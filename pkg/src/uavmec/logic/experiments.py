# src/uavmec/logic/experiments.py

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import pandas as pd

from uavmec.logic.baselines import (
    BREAKDOWN_COLUMNS, METRIC_COLUMNS, SCORE_COLUMNS, metrics, run_design,
)
from uavmec.logic.ddqn import load_checkpoint, save_checkpoint
from uavmec.logic.environment import OffloadingEnv
from uavmec.logic.joint_optimizer import EVAL_EPISODE, convergence_frame
from uavmec.logic.mobility import trajectory_frame
from uavmec.models.training import DesignId, Settings, SweepSpec
from uavmec.threads.sweep_pool import run_cells
from uavmec.utils.errors import UavMecError
from uavmec.utils.settings import validate_settings

RUN_COLUMNS = METRIC_COLUMNS + SCORE_COLUMNS + BREAKDOWN_COLUMNS
CELL_COLUMNS = ["variable", "value"] + RUN_COLUMNS
SUMMARY_METRICS = ["total_energy", "mtu_energy", "uav_energy", "violations", "penalized_energy"]
REPORT_REFERENCE = DesignId.PROPOSED.value

logger = logging.getLogger(__name__)


def apply_sweep_value(settings: Settings, variable: str, value: float) -> Settings:
    """
    Settings for one sweep point.

    L is the task size in Mbits (every task gets exactly that size), M the
    number of MTUs, f_max_mtu the MTU frequency cap in GHz. A deviation_delta
    point samples one-sided deviations, so a larger delta always means less
    true capacity.
    """
    if variable == "L":
        bits = value * 1e6
        updated = settings.with_overrides(task_bits_min=bits, task_bits_max=bits)
    elif variable == "M":
        updated = settings.with_overrides(num_mtus=int(value))
    elif variable == "deviation_delta":
        updated = settings.with_overrides(deviation_delta=value, deviation_mode="positive")
    elif variable == "f_max_mtu":
        updated = settings.with_overrides(mtu_f_max=value * 1e9)
    elif variable == "learning_rate":
        updated = settings.with_overrides(learning_rate=value)
    else:
        raise UavMecError(f"Unknown sweep variable '{variable}'")
    validate_settings(updated)
    return updated


@dataclass(frozen=True)
class SweepCell:
    variable: str
    value: float
    design: str
    seed: int
    settings: Settings


def run_cell(cell: SweepCell) -> Dict[str, Any]:
    """One (design, value, seed) run; a top-level function so worker processes can pickle it."""
    design = DesignId.parse(cell.design)
    settings = cell.settings.with_overrides(seed=cell.seed)
    result = run_design(design, settings)
    row = {"variable": cell.variable, "value": cell.value}
    row.update(metrics(result, design, cell.seed, settings.reward.penalty))
    return row


def aggregate(cells: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation over seeds per (variable, value, design)."""
    present = [m for m in SUMMARY_METRICS if m in cells.columns]
    grouped = cells.groupby(["variable", "value", "design"], sort=False)[present]
    summary = grouped.agg(["mean", "std"])
    summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
    return summary.reset_index()


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    return path


def cmd_train(settings: Settings, design: DesignId, out_dir: Union[str, Path],
              experiment: str = "train", resume: Optional[Union[str, Path]] = None,
              update_progress: Optional[Callable[[int], None]] = None,
              update_log: Optional[Callable[[str], None]] = None) -> Path:
    """
    Run one design and write its artifacts to out/<experiment>/<design>/<seed>/.

    :param settings: Full settings (seed included)
    :param design: Design to run
    :param out_dir: Output root
    :param experiment: Experiment name
    :param resume: Checkpoint the learned designs continue training from
    :param update_progress: Training progress callback (percent)
    :param update_log: Log line callback
    :return: The run directory
    :raises UavMecError: when the checkpoint cannot be read
    """
    validate_settings(settings)
    seed = settings.scenario.seed
    run_dir = Path(out_dir) / experiment / design.value / str(seed)
    warm_start = None
    if resume is not None:
        try:
            warm_start = load_checkpoint(resume)
        except (OSError, KeyError, ValueError) as e:
            raise UavMecError(f"Cannot resume from {resume}: {e}") from e
        logger.info(f"Resuming training from {resume}")
    result = run_design(design, settings, warm_start=warm_start,
                        update_progress=update_progress, update_log=update_log)
    row = metrics(result, design, seed, settings.reward.penalty)

    if result.training is not None:
        _write_csv(result.training.curve, run_dir / "learning_curve.csv")
        save_checkpoint(result.training.policy.net, run_dir / "checkpoint.npz")
    _write_csv(convergence_frame(result.log), run_dir / "convergence.csv")
    _write_csv(pd.DataFrame([row], columns=RUN_COLUMNS),
               run_dir / "metrics.csv")
    _write_csv(result.trace.frame, run_dir / "trace.csv")
    env = OffloadingEnv(settings)
    env.reset(EVAL_EPISODE)
    _write_csv(trajectory_frame(env.mobility_trace), run_dir / "trajectory.csv")

    manifest = {"design": design.value, "seed": seed, "settings": asdict(settings),
                "metrics": row, "iterations": result.log.iterations}
    with open(run_dir / "run.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=4)
    logger.info(f"Design '{design.value}' seed {seed}: {row['total_energy']:.6g} J, "
                f"{row['violations']} violations -> {run_dir}")
    return run_dir


def sweep_cells(spec: SweepSpec, settings: Settings) -> List[SweepCell]:
    cells = []
    for value in spec.values:
        point = apply_sweep_value(settings, spec.variable, value)
        for design in spec.designs:
            for seed in spec.seeds:
                cells.append(SweepCell(spec.variable, value, design.value, seed, point))
    return cells


def cmd_sweep(spec: SweepSpec, settings: Settings, out_dir: Union[str, Path],
              experiment: str = "sweep", max_workers: int = 1,
              update_progress: Optional[Callable[[int], None]] = None,
              update_log: Optional[Callable[[str], None]] = None,
              ) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Run the (value x design x seed) grid and write cells.csv and summary.csv
    under out/<experiment>/.

    :return: (per-cell frame, aggregated frame)
    """
    cells = sweep_cells(spec, settings)
    logger.info(f"Sweep over {spec.variable}: {len(cells)} cells on {max_workers} workers")
    rows = run_cells(run_cell, cells, max_workers, update_progress, update_log)
    frame = pd.DataFrame(rows, columns=CELL_COLUMNS)
    summary = aggregate(frame)
    root = Path(out_dir) / experiment
    _write_csv(frame, root / "cells.csv")
    _write_csv(summary, root / "summary.csv")
    return frame, summary


def report_frame(cells: pd.DataFrame, reference: str = REPORT_REFERENCE) -> pd.DataFrame:
    """
    Per-design means ranked by penalized energy, and the gap of the reference
    design against each one, (E_design - E_reference) / E_design on penalized
    energy; positive when the reference does better.

    Files written before penalized_energy existed fall back to total_energy.
    """
    if cells.empty:
        raise UavMecError("No rows to report")
    score = "penalized_energy" if "penalized_energy" in cells.columns else "total_energy"
    columns = list(dict.fromkeys(["total_energy", "violations", score]))
    means = cells.groupby("design", sort=False)[columns].mean()
    if reference not in means.index:
        reference = means.index[0]
    e_ref = means.loc[reference, score]
    base = means[score]
    gaps = (base - e_ref) / base.where(base != 0)
    report = pd.DataFrame({
        "design": means.index,
        "mean_energy": means["total_energy"].values,
        "mean_violations": means["violations"].values,
        "mean_penalized": means[score].values,
        f"gap_vs_{reference}": gaps.fillna(0.0).values,
    })
    return report.sort_values("mean_penalized", kind="stable").reset_index(drop=True)


def format_report(report: pd.DataFrame) -> str:
    gap_column = report.columns[-1]
    shown = report.copy()
    shown[gap_column] = [f"{g:+.2%}" for g in report[gap_column]]
    return shown.to_string(index=False, float_format=lambda v: f"{v:.4f}")


def cmd_report(csv_path: Union[str, Path], reference: str = REPORT_REFERENCE) -> str:
    """
    Summarize a sweep or metrics CSV.

    :raises UavMecError: when the file is missing, empty or lacks the metric columns
    """
    path = Path(csv_path)
    if not path.exists():
        raise UavMecError(f"No such file: {path}")
    try:
        cells = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise UavMecError(f"{path} is empty") from None
    missing = {"design", "total_energy", "violations"} - set(cells.columns)
    if missing:
        raise UavMecError(f"{path} lacks columns: {', '.join(sorted(missing))}")
    return format_report(report_frame(cells, reference))
