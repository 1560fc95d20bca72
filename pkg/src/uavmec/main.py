# src/uavmec/main.py

import argparse
import contextlib
import logging
import sys
from typing import Callable, Iterator, List, Optional, Sequence

from tqdm import tqdm

from uavmec import __version__
from uavmec.logic.experiments import REPORT_REFERENCE, cmd_report, cmd_sweep, cmd_train
from uavmec.logic.verification import OPT_IN_ORACLES, ORACLES, run_all
from uavmec.models.training import SWEEP_VARIABLES, DesignId, Settings, SweepSpec
from uavmec.utils.errors import UavMecError
from uavmec.utils.settings import load_settings, validate_settings

logger = logging.getLogger(__name__)

DESIGN_NAMES = [d.value for d in DesignId]


def _float_list(raw: str) -> List[float]:
    try:
        return [float(v) for v in raw.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{raw}'")


def _int_list(raw: str) -> List[int]:
    try:
        return [int(v) for v in raw.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{raw}'")


def _design_list(raw: str) -> List[str]:
    names = [v.strip() for v in raw.split(',') if v.strip()]
    for name in names:
        if name not in DESIGN_NAMES:
            raise argparse.ArgumentTypeError(
                f"invalid design '{name}' (choose from {', '.join(DESIGN_NAMES)})")
    return names


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help="Config file (default: config/default.conf)")
    parser.add_argument('--out', default='out', help="Output root directory")
    parser.add_argument('--episodes', type=int, help="Training episodes per run")
    parser.add_argument('--literal-eq7', action='store_true',
                        help="Use the previous speed as the heading memory term")
    parser.add_argument('--retrain-policy', action='store_true',
                        help="Retrain the policy inside the joint loop")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='uavmec',
        description="DT-assisted UAV edge-offloading simulator and joint optimizer")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('--verbose', action='store_true', help="Debug logging")
    sub = parser.add_subparsers(dest='command', required=True)

    train = sub.add_parser('train', help="Train and evaluate one design")
    _add_run_options(train)
    train.add_argument('--seed', type=int, help="Scenario and training seed")
    train.add_argument('--design', default=DesignId.PROPOSED.value, choices=DESIGN_NAMES)
    train.add_argument('--experiment', default='train', help="Experiment directory name")
    train.add_argument('--resume', metavar='CHECKPOINT',
                       help="Continue training from a checkpoint.npz of an earlier run")

    sweep = sub.add_parser('sweep', help="Run a design x value x seed grid")
    _add_run_options(sweep)
    sweep.add_argument('--variable', required=True, choices=SWEEP_VARIABLES)
    sweep.add_argument('--values', required=True, type=_float_list,
                       help="Comma-separated sweep values")
    sweep.add_argument('--seeds', type=_int_list, default=[0, 1, 2, 3, 4])
    sweep.add_argument('--seed', type=int, help="Run a single seed instead of --seeds")
    sweep.add_argument('--designs', type=_design_list, default=list(DESIGN_NAMES))
    sweep.add_argument('--design', choices=DESIGN_NAMES, help="Run a single design")
    sweep.add_argument('--workers', type=int, default=1, help="Worker processes")
    sweep.add_argument('--experiment', help="Experiment directory name (default: sweep_<variable>)")

    report = sub.add_parser('report', help="Summarize a sweep or metrics CSV")
    report.add_argument('csv', help="cells.csv or metrics.csv")
    report.add_argument('--reference', default=REPORT_REFERENCE, choices=DESIGN_NAMES)

    verify = sub.add_parser('verify', help="Run the property oracles")
    verify.add_argument('--only', type=lambda raw: [v.strip() for v in raw.split(',') if v.strip()],
                        help=f"Comma-separated subset of: {', '.join(n for n, _ in ORACLES)} "
                             f"(default: all except {', '.join(OPT_IN_ORACLES)})")
    verify.add_argument('--seed', type=int, default=0)
    return parser


def _settings_from(args: argparse.Namespace) -> Settings:
    settings = load_settings(args.config)
    overrides = {}
    if getattr(args, 'seed', None) is not None:
        overrides['seed'] = args.seed
    if args.episodes is not None:
        overrides['episodes'] = args.episodes
    if args.literal_eq7:
        overrides['literal_eq7'] = True
    if args.retrain_policy:
        overrides['retrain_policy'] = True
    if overrides:
        settings = settings.with_overrides(**overrides)
        validate_settings(settings)
    return settings


@contextlib.contextmanager
def progress_bar(desc: str) -> Iterator[Callable[[int], None]]:
    """Percent bar on stderr driven by an update_progress callback."""
    bar = tqdm(total=100, desc=desc, unit='%', file=sys.stderr)

    def update(value: int) -> None:
        step = min(value, 100) - bar.n
        if step > 0:
            bar.update(step)

    try:
        yield update
    finally:
        bar.close()


def run(args: argparse.Namespace) -> int:
    if args.command == 'train':
        settings = _settings_from(args)
        with progress_bar(f"train {args.design}") as update_progress:
            run_dir = cmd_train(settings, DesignId.parse(args.design), args.out, args.experiment,
                                resume=args.resume, update_progress=update_progress)
        print(f"Artifacts written to {run_dir}")
        return 0

    if args.command == 'sweep':
        settings = _settings_from(args)
        seeds = [args.seed] if args.seed is not None else args.seeds
        designs = [args.design] if args.design else args.designs
        try:
            spec = SweepSpec(args.variable, tuple(args.values), tuple(seeds),
                             tuple(DesignId.parse(d) for d in designs))
        except ValueError as e:
            raise UavMecError(str(e)) from e
        experiment = args.experiment or f"sweep_{args.variable}"
        with progress_bar(experiment) as update_progress:
            _, summary = cmd_sweep(spec, settings, args.out, experiment, args.workers,
                                   update_progress=update_progress)
        print(summary.to_string(index=False))
        return 0

    if args.command == 'report':
        print(cmd_report(args.csv, args.reference))
        return 0

    results = run_all(args.only, seed=args.seed)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status}  {result.name:<18} {result.detail} ({result.seconds:.2f} s)")
    return 0 if all(r.passed for r in results) else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )
    try:
        return run(args)
    except (UavMecError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
