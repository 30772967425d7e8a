"""Command-line entry point: ``impactnorm {ingest,mhq,correlate,meta,synth}``.

Exit codes: 0 success, 1 report written but some rows are degenerate, 2 fatal.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from .errors import EmptyInput, ImpactNormError
from .ingest import FILES, input_paths, load_dataset, read_config, write_dataset
from .meta import MODES, read_coefficients
from .records import ALL_SOURCES, Source
from .report import (
    CORR_COLUMNS,
    GROUP_MODES,
    META_COLUMNS,
    MHQ_COLUMNS,
    RunManifest,
    correlation_rows,
    meta_rows,
    mhq_rows,
    worker_count,
    write_json,
    write_tsv,
)
from .synth import GENERATOR, SynthConfig, generate, write_synthetic

log = logging.getLogger("impactnorm")

EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2


class Fatal(Exception):
    pass


def _metrics(raw: str | None) -> list[Source]:
    if not raw:
        return list(ALL_SOURCES)
    try:
        return [Source(m.strip().lower()) for m in raw.split(",") if m.strip()]
    except ValueError as exc:
        raise Fatal(str(exc)) from None


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(directory, config_path=None):
    paths = input_paths(directory)
    if config_path:
        paths["config"] = Path(config_path)
    config = read_config(paths["config"]) if Path(paths["config"]).is_file() else None
    dataset, report = load_dataset(paths, config)
    return dataset, report, paths


def _archive(args):
    try:
        dataset, report, paths = _load(args.archive, args.config)
    except ImpactNormError as exc:
        raise Fatal(f"unreadable archive {args.archive}: {exc}") from None
    return dataset, report, paths


def _status_exit(rows) -> int:
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_PARTIAL


def cmd_ingest(args) -> int:
    try:
        dataset, report, paths = _load(args.input, args.config)
    except ImpactNormError as exc:
        raise Fatal(str(exc)) from None
    out = _out_dir(args)
    manifest = RunManifest("ingest", asdict(dataset.config))
    for key in (*FILES, "config"):
        manifest.add_input(paths[key])
    written = write_dataset(dataset, out)
    write_json(report.to_dict(), out / "ingest_report.json")
    manifest.outputs = sorted(p.name for p in written.values()) + ["ingest_report.json"]
    manifest.warnings = report.warnings + [str(e) for e in report.row_errors]
    manifest.write(out)
    for err in report.row_errors:
        log.warning("%s", err)
    print(f"ingested {len(dataset.publications)} papers, {len(dataset.links)} links, "
          f"{len(dataset.mentions)} mention records, {len(dataset.unit_profiles)} unit profiles "
          f"-> {out}")
    return EXIT_OK


def cmd_mhq(args) -> int:
    dataset, _, paths = _archive(args)
    metrics = _metrics(args.metrics)
    rows = mhq_rows(dataset, args.mode, metrics, threads=worker_count())
    out = _out_dir(args)
    write_tsv(rows, MHQ_COLUMNS, out / "mhq_report.tsv")
    write_json(rows, out / "mhq_report.json")
    manifest = RunManifest("mhq", {**asdict(dataset.config), "mode": args.mode,
                                   "metrics": [m.value for m in metrics]})
    for p in paths.values():
        manifest.add_input(p)
    manifest.outputs = ["mhq_report.tsv", "mhq_report.json"]
    manifest.warnings = [f"{r['group']}/{r['metric']}: {r['status']}" for r in rows if r["status"] != "ok"]
    manifest.write(out)
    return _status_exit(rows)


def cmd_correlate(args) -> int:
    dataset, _, paths = _archive(args)
    if not dataset.unit_profiles:
        raise Fatal("archive holds no unit profiles")
    metrics = _metrics(args.metrics)
    rows = correlation_rows(dataset, metrics, threads=worker_count())
    out = _out_dir(args)
    write_tsv(rows, CORR_COLUMNS, out / "corr_report.tsv")
    write_json(rows, out / "corr_report.json")
    manifest = RunManifest("correlate", {**asdict(dataset.config),
                                         "metrics": [m.value for m in metrics]})
    for p in paths.values():
        manifest.add_input(p)
    manifest.outputs = ["corr_report.tsv", "corr_report.json"]
    manifest.warnings = [f"{r['metric']}/{r['dimension']}: {r['status']}" for r in rows if r["status"] != "ok"]
    manifest.write(out)
    return _status_exit(rows)


def cmd_meta(args) -> int:
    try:
        coeffs = read_coefficients(args.coefficients)
    except FileNotFoundError:
        raise Fatal(f"input file not found: {args.coefficients}") from None
    except ImpactNormError as exc:
        raise Fatal(str(exc)) from None
    if not coeffs:
        raise Fatal(f"{args.coefficients}: no coefficients")
    level = 0.95
    if args.config:
        level = read_config(args.config).ci_level
    modes = MODES if args.mode == "both" else (args.mode,)
    try:
        rows = meta_rows(coeffs, modes, level)
    except EmptyInput as exc:
        raise Fatal(str(exc)) from None
    out = _out_dir(args)
    write_tsv(rows, META_COLUMNS, out / "meta_report.tsv")
    write_json(rows, out / "meta_report.json")
    manifest = RunManifest("meta", {"ci_level": level, "modes": list(modes)})
    manifest.add_input(args.coefficients)
    manifest.outputs = ["meta_report.tsv", "meta_report.json"]
    manifest.write(out)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        config = SynthConfig.from_json(args.config) if args.config else SynthConfig()
        if args.seed is not None:
            config = replace(config, seed=args.seed)
    except FileNotFoundError:
        raise Fatal(f"input file not found: {args.config}") from None
    except (ImpactNormError, ValueError, TypeError) as exc:
        raise Fatal(f"invalid synth config: {exc}") from None
    dataset, truth = generate(config)
    out = _out_dir(args)
    written = write_synthetic(dataset, truth, out)
    manifest = RunManifest("synth", {**config.to_dict(), "generator": GENERATOR})
    if args.config:
        manifest.add_input(args.config)
    manifest.outputs = sorted(p.name for p in written.values())
    manifest.write(out)
    print(f"wrote {len(dataset.publications)} synthetic papers (seed {config.seed}) -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="impactnorm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and join input tables into a dataset archive")
    p.add_argument("input", help="directory holding publications/links/mentions/units CSV files")
    p.add_argument("--config", help="key = value config file (default: <input>/config.txt)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("mhq", help="MHq' per group and metric")
    p.add_argument("archive")
    p.add_argument("--mode", choices=GROUP_MODES, default="three-group")
    p.add_argument("--metrics", help="comma-separated sources (default: all)")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mhq)

    p = sub.add_parser("correlate", help="Spearman correlation of unit MHq' with unit scores")
    p.add_argument("archive")
    p.add_argument("--metrics")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("meta", help="random-effects pooling of correlation coefficients")
    p.add_argument("coefficients", help="CSV with study_id,r,n")
    p.add_argument("--mode", choices=(*MODES, "both"), default="both")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_meta)

    p = sub.add_parser("synth", help="write a synthetic dataset with planted effects")
    p.add_argument("--config", help="JSON file with SynthConfig fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Fatal as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
