"""Command-line surface: ``pmcal ingest``, ``pmcal synth``, ``pmcal run``.

Exit status is nonzero exactly when an error-severity diagnostic or a stage
failure occurred.
"""

from __future__ import annotations

import argparse
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ToolkitError
from .io import read_series_csv, write_labels_csv, write_series_csv
from .pipeline import PipelineConfig, run_pipeline
from .scenario import load_scenario
from .synthgen import generate_truth, simulate_sensor


def _cmd_ingest(args: argparse.Namespace) -> int:
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    had_errors = False
    report_lines = []
    for path in args.paths:
        try:
            result = read_series_csv(path)
        except (ConfigurationError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            had_errors = True
            continue
        for diagnostic in result.diagnostics:
            report_lines.append(diagnostic.render())
            if diagnostic.severity == "error":
                had_errors = True
        report_lines.append(
            f"{path}: rows={result.n_rows} corrupted={result.n_corrupted} "
            f"completeness={result.row_completeness:.4f}%"
        )
        if out_dir is not None:
            write_series_csv(out_dir / Path(path).name, result.series)
    report = "\n".join(report_lines) + ("\n" if report_lines else "")
    sys.stdout.write(report)
    if out_dir is not None:
        (out_dir / "ingest_report.txt").write_text(report, encoding="utf-8", newline="\n")
    return 1 if had_errors else 0


def _sensor_seed(base_seed: int, index: int) -> int:
    children = np.random.SeedSequence(base_seed).spawn(index + 2)
    return int(children[index + 1].generate_state(1)[0])


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = load_scenario(args.scenario)
    out_dir = Path(args.out)
    if out_dir.exists():
        raise ConfigurationError(f"output directory {out_dir} already exists")
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".pmcal-synth-", dir=out_dir.parent))
    try:
        truth_seed = int(np.random.SeedSequence(args.seed).spawn(1)[0].generate_state(1)[0])
        reference, met = generate_truth(spec.scenario, truth_seed)
        write_series_csv(staging / "reference.csv", reference)
        write_series_csv(staging / "met.csv", met)
        for index, (name, profile) in enumerate(spec.sensors):
            sensor, labels = simulate_sensor(
                reference, met, profile, spec.scenario.fog_events,
                _sensor_seed(args.seed, index), device_id=name,
            )
            write_series_csv(staging / f"{name}.csv", sensor)
            write_labels_csv(staging / f"{name}_labels.csv", labels)
        staging.replace(out_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    print(f"wrote {2 + 2 * len(spec.sensors)} files to {out_dir}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    config = PipelineConfig.from_file(args.config)
    out_dir = Path(args.out) if args.out else config.out_dir
    if out_dir is None:
        raise ConfigurationError("no output directory: pass --out or set output.dir")
    run_pipeline(config, out_dir)
    print(f"artifacts written to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmcal",
        description="Calibrate and evaluate collocated PM sensor data; "
        "generate synthetic validation datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="validate sensor CSV files")
    ingest.add_argument("paths", nargs="+", help="CSV files to validate")
    ingest.add_argument("--out", help="directory for normalized copies and the report")
    ingest.set_defaults(func=_cmd_ingest)

    synth = sub.add_parser("synth", help="generate a synthetic collocated dataset")
    synth.add_argument("scenario", help="scenario key-value file")
    synth.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    synth.add_argument("--out", required=True, help="output directory (must not exist)")
    synth.set_defaults(func=_cmd_synth)

    run = sub.add_parser("run", help="run the calibration/evaluation pipeline")
    run.add_argument("--config", required=True, help="pipeline key-value config file")
    run.add_argument("--out", help="output directory (must not exist); overrides output.dir")
    run.set_defaults(func=_cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ToolkitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
