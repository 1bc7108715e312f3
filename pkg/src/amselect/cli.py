"""Command-line surface: validate, panel, calibrate, simulate, select, serve.

Exit statuses: 0 success, 1 usage error, 2 dataset validation failure,
3 runtime error.  Every stochastic command takes an explicit --seed; there
is no silent nondeterminism.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .calibration import (
    CalibrationResult,
    GridSpec,
    auto_select_baseline,
    calibrate,
)
from .core import Dataset, NoiseParams
from .dataset_io import load_dataset, validate_dataset
from .ngram import DEFAULT_JUDGE_COUNT, build_panel
from .simulator import run_campaign, run_realization, write_curve_table
from .strategies import StrategyKind

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_RUNTIME = 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as status 1 instead of 2."""

    def error(self, message: str):
        raise CliError(EXIT_USAGE, f"{self.prog}: error: {message}")


def _dataset_arg(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("dataset", help="line-delimited dataset file")
    sub.add_argument(
        "--baseline",
        default=None,
        help="baseline model id, or 'auto' to pick one with the weak judges "
        "(default: first model in the file)",
    )


def _z_arg(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--z",
        type=int,
        default=DEFAULT_JUDGE_COUNT,
        help="number of weak judges (max k-gram order)",
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="amselect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a dataset file")
    _dataset_arg(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("panel", help="precompute the weak-judge cache")
    _dataset_arg(p)
    _z_arg(p)
    p.add_argument("--out", required=True, help="cache file to write")
    p.set_defaults(func=cmd_panel)

    p = sub.add_parser("calibrate", help="grid-search the noise parameters")
    _dataset_arg(p)
    _z_arg(p)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--grid-step", type=float, default=0.05)
    p.add_argument("--realizations", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--pool", type=int, default=None, help="pool size (default: all)")
    p.add_argument("--out", default="calibration.json", help="result file")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="run a replay campaign")
    _dataset_arg(p)
    _z_arg(p)
    p.add_argument(
        "--strategies",
        default="all",
        help="comma-separated strategy names, or 'all'",
    )
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--pool", type=int, default=None)
    p.add_argument("--realizations", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument(
        "--params",
        required=True,
        help="'EPS_LOSS,EPS_DRAW' or 'from-calibration:FILE'",
    )
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser(
        "select", help="one replay run; prints the chosen model and posterior"
    )
    _dataset_arg(p)
    _z_arg(p)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--pool", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--params", required=True)
    p.add_argument(
        "--strategy",
        default=StrategyKind.LLM_SELECTOR.value,
        help="acquisition strategy name",
    )
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("serve", help="start the annotation session service")
    p.add_argument("--dataset", required=True)
    p.add_argument("--baseline", default=None)
    _z_arg(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument(
        "--state-dir",
        default=None,
        help="directory for session transcripts (enables restart recovery)",
    )
    p.set_defaults(func=cmd_serve)

    return parser


def _load(path: str, baseline: str | None) -> Dataset:
    try:
        if baseline == "auto":
            bare = load_dataset(path, None)
            chosen = auto_select_baseline(bare)
            return load_dataset(path, chosen)
        return load_dataset(path, baseline)
    except (ValueError, OSError) as exc:
        raise CliError(EXIT_INVALID, f"dataset: {exc}") from exc


def _parse_params(text: str) -> NoiseParams:
    if text.startswith("from-calibration:"):
        path = text.split(":", 1)[1]
        try:
            return CalibrationResult.load(path).params()
        except (OSError, KeyError, ValueError) as exc:
            raise CliError(
                EXIT_RUNTIME, f"cannot read calibration file {path!r}: {exc}"
            ) from exc
    try:
        loss_text, draw_text = text.split(",")
        return NoiseParams(
            eps_loss=float(loss_text), eps_draw=float(draw_text)
        )
    except ValueError as exc:
        raise CliError(
            EXIT_USAGE,
            f"--params must be 'EPS_LOSS,EPS_DRAW' or "
            f"'from-calibration:FILE' (got {text!r}: {exc})",
        ) from exc


def _parse_strategies(text: str) -> list[StrategyKind]:
    if text == "all":
        return list(StrategyKind)
    try:
        return [StrategyKind.from_name(name) for name in text.split(",")]
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc


def _grid_from_step(step: float) -> GridSpec:
    if not 0.0 < step < 1.0:
        raise CliError(EXIT_USAGE, f"--grid-step must be in (0, 1), got {step}")
    values = []
    i = 1
    while (v := round(i * step, 10)) < 1.0:
        values.append(v)
        i += 1
    return GridSpec(values=tuple(values))


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        dataset = _load(args.dataset, args.baseline)
    except CliError as exc:
        print(exc.message, file=sys.stderr)
        return EXIT_INVALID
    report = validate_dataset(dataset)
    for line in report.lines():
        print(line)
    if not report.ok:
        return EXIT_INVALID
    print(
        f"ok: {dataset.n} queries, {dataset.m} models, "
        f"baseline {dataset.baseline_id!r}"
    )
    return EXIT_OK


def cmd_panel(args: argparse.Namespace) -> int:
    dataset = _load(args.dataset, args.baseline)
    panel = build_panel(dataset, args.z)
    panel.save(args.out, dataset.content_hash())
    print(f"panel with z={panel.z} judges written to {args.out}")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    dataset = _load(args.dataset, args.baseline)
    result = calibrate(
        dataset,
        budget=args.budget,
        realizations=args.realizations,
        seed=args.seed,
        grid=_grid_from_step(args.grid_step),
        n_pool=args.pool,
        z=args.z,
    )
    result.save(args.out)
    print(
        f"calibrated eps_loss={result.eps_loss} eps_draw={result.eps_draw} "
        f"-> {args.out}"
    )
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    dataset = _load(args.dataset, args.baseline)
    params = _parse_params(args.params)
    strategies = _parse_strategies(args.strategies)
    n_pool = args.pool if args.pool is not None else dataset.n
    result = run_campaign(
        dataset,
        strategies=strategies,
        params=params,
        n_pool=n_pool,
        budget=args.budget,
        realizations=args.realizations,
        master_seed=args.seed,
        z=args.z,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.report.save(out / "report.json")
    write_curve_table(result, out / "curves.csv")
    for name, sm in result.report.metrics.items():
        print(
            f"{name}: identification {sm.curve[-1]:.3f} at budget "
            f"{len(sm.curve)}, mean settle {sm.mean_settle_budget:.1f}"
        )
    print(f"report written to {out / 'report.json'}")
    return EXIT_OK


def cmd_select(args: argparse.Namespace) -> int:
    dataset = _load(args.dataset, args.baseline)
    params = _parse_params(args.params)
    strategy = StrategyKind.from_name(args.strategy)
    panel = build_panel(dataset, args.z)
    n_pool = args.pool if args.pool is not None else dataset.n
    trajectory = run_realization(
        dataset, panel, params, strategy, n_pool, args.budget, args.seed
    )
    payload = {
        "chosen_model": trajectory.chosen[-1],
        "posterior": trajectory.final_posterior,
        "annotation_order": list(trajectory.annotation_order),
        "pool_win_rates": trajectory.pool_win_rates,
        "true_best": trajectory.true_best,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    dataset = _load(args.dataset, args.baseline)
    dataset_id = Path(args.dataset).stem
    app = create_app(
        {dataset_id: dataset}, z=args.z, state_dir=args.state_dir
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(exc.message, file=sys.stderr)
        return exc.code
    except SystemExit as exc:  # --help
        code = exc.code
        return int(code) if isinstance(code, int) else EXIT_OK
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
