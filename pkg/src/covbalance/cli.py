"""Command-line entry point: ``covbalance run|sweep|compare|export-plot-data``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from covbalance.config import AXES, PROBLEMS, STRATEGIES, VARIANTS, ConfigError, load_config
from covbalance.harness import (
    RunRecord,
    compare,
    format_summary_table,
    format_win_matrix,
    run_experiment,
    sweep,
    write_records,
    write_summary,
)

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
PLOT_HEADER = ["run", "step", "series", "name", "value"]

EPILOG = f"""\
weighting strategies: {", ".join(STRATEGIES)}
variants: {", ".join(VARIANTS)}
problems: {", ".join(PROBLEMS)}
sweep axes: {", ".join(AXES)}

Output goes to --out-dir, else $COVBALANCE_OUT_DIR, else ./results.
Exit status: 0 success, 1 run aborted, 2 configuration error."""


def _csv_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="covbalance",
        description="Adaptive weighting of several training objectives, run on toy problems.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help="directory for CSV output")
    common.add_argument("--jobs", type=int, default=1, help="runs executed in parallel")

    p = sub.add_parser("run", parents=[common], help="train one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override the configured seed")

    p = sub.add_parser("sweep", parents=[common], help="one run per value along an axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True, type=_csv_list, help="comma separated")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("compare", parents=[common], help="pairwise win rates over a seed battery")
    p.add_argument("--config", required=True)
    p.add_argument("--strategies", required=True, type=_csv_list, help="comma separated")
    p.add_argument("--seeds", type=int, default=32, help="number of seeds (default 32)")
    p.add_argument("--seed", type=int, help="first seed of the battery")

    p = sub.add_parser("export-plot-data", parents=[common], help="merge emitted CSVs into long-format plot data")
    p.add_argument("records", nargs="+", help="emitted CSV files or directories containing them")
    p.add_argument("--output", help="output CSV (default <out-dir>/plot_data.csv)")
    return parser


def out_dir(args) -> Path:
    return Path(args.out_dir or os.environ.get("COVBALANCE_OUT_DIR") or "results")


def _load(args):
    config, overrides = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    return config.validate(), overrides


def cmd_run(args):
    config, _ = _load(args)
    record = run_experiment(config)
    (path,) = write_records([record], out_dir(args))
    write_summary([record], path.parent / "summary.csv")
    print(format_summary_table([record]))
    print(f"wrote {path}")
    if not record.valid:
        print(f"run aborted: {record.error}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sweep(args):
    config, _ = _load(args)
    records = sweep(config, args.axis, args.values, jobs=args.jobs)
    write_records(records, out_dir(args))
    summary = write_summary(records, out_dir(args) / config.name / f"sweep_{args.axis}_summary.csv")
    print(format_summary_table(records))
    print(f"wrote {summary}")
    aborted = [r for r in records if not r.valid]
    for r in aborted:
        print(f"run {r.experiment} aborted: {r.error}", file=sys.stderr)
    return EXIT_RUNTIME if aborted else EXIT_OK


def cmd_compare(args):
    config, overrides = _load(args)
    for name in args.strategies:
        if name not in STRATEGIES:
            raise ConfigError("strategies", f"unknown strategy {name!r}; valid: {', '.join(STRATEGIES)}")
    records, win = compare(config, args.strategies, args.seeds, jobs=args.jobs, strategy_params=overrides)
    flat = [r for s in args.strategies for r in records[s]]
    write_records(flat, out_dir(args))
    base = out_dir(args) / config.name
    write_summary(flat, base / "compare_summary.csv")
    with open(base / "win_rates.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strategy"] + args.strategies)
        for i, s in enumerate(args.strategies):
            w.writerow([s] + [repr(float(v)) for v in win[i]])
    print(format_win_matrix(args.strategies, win))
    print(f"wrote {base / 'win_rates.csv'}")
    aborted = [r for r in flat if not r.valid]
    for r in aborted:
        print(f"run {r.strategy} seed {r.seed} aborted: {r.error}", file=sys.stderr)
    return EXIT_RUNTIME if aborted else EXIT_OK


def _collect_paths(items):
    paths = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.rglob("*.csv")))
        elif p.is_file():
            paths.append(p)
        else:
            raise ConfigError("records", f"no such file or directory: {item}")
    return paths


def file_kind(path) -> str:
    """Classify an emitted CSV by its header: ``record``, ``summary``, ``win_rates`` or ``plot_data``."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if header[:1] == ["step"]:
        return "record"
    if header[:1] == ["run"] and "config_hash" in header:
        return "summary"
    if header[:1] == ["strategy"] and len(header) > 1:
        return "win_rates"
    if header == PLOT_HEADER:
        return "plot_data"
    raise ValueError(f"{path}: not a run record, summary, win-rate or plot-data file")


def _record_rows(path):
    rec = RunRecord.from_csv(path)
    run = f"{rec.experiment}/{rec.strategy}_{rec.seed}"
    scale_totals = rec.scale_weight_aggregates()
    for i, step in enumerate(rec.steps):
        step = int(step)
        for series, block in (("loss", rec.losses), ("weight", rec.weights), ("raw_weight", rec.raw_weights)):
            if block is None:
                continue
            for name, v in zip(rec.loss_names, block[i]):
                yield [run, step, series, name, repr(float(v))]
        yield [run, step, "objective", "", repr(float(rec.objective[i]))]
        yield [run, step, "dist_to_opt", "", repr(float(rec.dist_to_opt[i]))]
        for s, v in enumerate(scale_totals[i]):
            yield [run, step, "scale_weight", f"s{s}", repr(float(v))]


def _summary_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            run = f"{path.parent.name}/{row['run']}"
            for key, value in row.items():
                if key != "run" and value != "":
                    yield [run, "", "summary", key, value]


def _win_rate_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    columns = rows[0][1:]
    for row in rows[1:]:
        for col, value in zip(columns, row[1:]):
            yield [f"{path.parent.name}/{row[0]}", "", "win_rate", col, repr(float(value))]


def _plot_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh)
        next(rows)
        yield from rows


READERS = {"record": _record_rows, "summary": _summary_rows, "win_rates": _win_rate_rows, "plot_data": _plot_rows}


def export_plot_data(paths, output):
    """Merge emitted CSVs into one long-format table ``run,step,series,name,value``.

    Run records contribute every recorded loss, weight, objective and
    distance value plus per-scale weight totals; summary and win-rate files
    contribute their cells. Values are written with full float precision.
    """
    output = Path(output)
    paths = [Path(p) for p in paths if Path(p).resolve() != output.resolve()]
    kinds = [(p, file_kind(p)) for p in paths]
    output.parent.mkdir(parents=True, exist_ok=True)
    with open(output, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_HEADER)
        for path, kind in kinds:
            w.writerows(READERS[kind](path))
    return output


def cmd_export(args):
    paths = _collect_paths(args.records)
    if not paths:
        raise ConfigError("records", "no CSV files found")
    try:
        output = export_plot_data(paths, args.output or out_dir(args) / "plot_data.csv")
    except (ValueError, KeyError) as exc:
        raise ConfigError("records", str(exc)) from None
    print(f"wrote {output} ({len(paths)} files)")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "compare": cmd_compare, "export-plot-data": cmd_export}


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
