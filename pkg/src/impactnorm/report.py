"""Report tables: MHq' per group and metric, unit correlations, pooled coefficients.

Row builders return plain dicts holding full-precision values; :func:`write_tsv`
renders them with six significant digits and empty cells for missing numbers.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .assess import correlate_units
from .errors import ConstantInput, MhqError, TooFewUnits
from .ingest import GROUP_LABELS, partition_groups, unit_groups
from .meta import MODES, StudyCoefficient, pool
from .mhq import compute_mhq
from .records import ALL_SOURCES, Dataset, Dimension, Role, Source
from .stratify import build_strata

MHQ_COLUMNS = ("group", "metric", "mhq", "ci_low", "ci_high", "n_group",
               "strata_used", "strata_skipped", "status")
CORR_COLUMNS = ("metric", "dimension", "n_units", "r_s", "ci_low", "ci_high", "status")
META_COLUMNS = ("mode", "k", "r_pooled", "ci_low", "ci_high", "tau_sq")

GROUP_MODES = ("three-group", "per-unit")


def worker_count() -> int:
    """Worker cap from ``IMPACTNORM_THREADS``; 0 or unset means one per CPU."""
    raw = os.environ.get("IMPACTNORM_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"IMPACTNORM_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("IMPACTNORM_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _parallel_map(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool_:
        return list(pool_.map(fn, items))


def _mhq_row(dataset, strata, group, metric):
    row = {"group": group.label, "metric": metric.value, "mhq": None, "ci_low": None,
           "ci_high": None, "n_group": len(group), "strata_used": None,
           "strata_skipped": None, "status": "ok"}
    if len(group) == 0:
        row["status"] = "empty-group"
        return row
    try:
        res = compute_mhq(dataset, group, metric, strata=strata)
    except MhqError as exc:
        row["status"] = exc.status
        return row
    row.update(mhq=res.value, ci_low=res.ci_low, ci_high=res.ci_high, n_group=res.n_group,
               strata_used=res.strata_used, strata_skipped=res.strata_skipped, status=res.status)
    return row


def pcs_pro_difference(rows: Sequence[dict], metric: str) -> float | None:
    by_group = {r["group"]: r["mhq"] for r in rows if r["metric"] == metric}
    pcs, pro = by_group.get("PCS"), by_group.get("PRO")
    if pcs is None or pro is None:
        return None
    return pcs - pro


def mhq_rows(
    dataset: Dataset,
    mode: str = "three-group",
    metrics: Iterable[Source] = ALL_SOURCES,
    threads: int = 1,
) -> list[dict]:
    """One row per (group, metric).

    In three-group mode metrics are ordered by decreasing PCS minus PRO
    difference; metrics where the difference is undefined come last in input
    order. Within a metric the groups appear as PCS, PRO, PCS&PRO.
    """
    metrics = [Source(m) for m in metrics]
    strata = build_strata(dataset)
    dataset.counts(Source.CITATIONS), dataset.paper_index  # fill caches before threading
    if mode == "three-group":
        groups = list(partition_groups(dataset))
    elif mode == "per-unit":
        groups = []
        for role in Role:
            groups += [type(g)(f"{u}/{role.value}", g.member_paper_ids)
                       for u, g in unit_groups(dataset, role).items()]
    else:
        raise ValueError(f"unknown group mode {mode!r}; expected one of {GROUP_MODES}")
    jobs = [(g, m) for g in groups for m in metrics]
    rows = _parallel_map(lambda job: _mhq_row(dataset, strata, *job), jobs, threads)
    if mode == "per-unit":
        return rows
    diffs = {m.value: pcs_pro_difference(rows, m.value) for m in metrics}
    defined = sorted((m for m in diffs if diffs[m] is not None), key=lambda m: -diffs[m])
    order = defined + [m.value for m in metrics if diffs[m.value] is None]
    rank = {m: i for i, m in enumerate(order)}
    group_rank = {label: i for i, label in enumerate(GROUP_LABELS)}
    return sorted(rows, key=lambda r: (rank[r["metric"]], group_rank[r["group"]]))


def correlation_rows(
    dataset: Dataset,
    metrics: Iterable[Source] = ALL_SOURCES,
    dimensions: Iterable[Dimension] = tuple(Dimension),
    threads: int = 1,
) -> list[dict]:
    jobs = [(Source(m), Dimension(d)) for m in metrics for d in dimensions]

    def run(job):
        metric, dim = job
        row = {"metric": metric.value, "dimension": dim.value, "n_units": None, "r_s": None,
               "ci_low": None, "ci_high": None, "status": "ok"}
        try:
            res = correlate_units(dataset, metric, dimension=dim)
        except TooFewUnits as exc:
            row["status"] = exc.status
            return row
        except ConstantInput:
            row["status"] = "constant-input"
            return row
        row.update(n_units=res.n_units, r_s=res.r_s, ci_low=res.ci_low, ci_high=res.ci_high)
        if res.ci_low == res.ci_high:
            row["status"] = "perfect-correlation"
        return row

    return _parallel_map(run, jobs, threads)


def meta_rows(coeffs: Sequence[StudyCoefficient], modes: Iterable[str] = MODES,
              level: float = 0.95) -> list[dict]:
    rows = []
    for mode in modes:
        res = pool(coeffs, mode, level)
        rows.append({"mode": mode, "k": res.k, "r_pooled": res.r_pooled, "ci_low": res.ci_low,
                     "ci_high": res.ci_high, "tau_sq": res.tau_sq})
    return rows


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"refusing to write non-finite value {value}")
        return f"{value:.6g}"
    return str(value)


def write_tsv(rows: Sequence[dict], columns: Sequence[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])


def read_tsv(path) -> list[dict]:
    """Read a report back; empty cells become ``None``, numeric cells floats or ints."""
    def coerce(cell):
        if cell == "":
            return None
        try:
            return int(cell)
        except ValueError:
            pass
        try:
            return float(cell)
        except ValueError:
            return cell

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        return [{k: coerce(v) for k, v in row.items()} for row in reader]


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Provenance record written next to every report as ``run_manifest.json``."""

    def __init__(self, command: str, config: dict | None = None):
        self.command = command
        self.config = dict(config or {})
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.warnings: list[str] = []
        self.started = datetime.now(timezone.utc).isoformat()

    def add_input(self, path) -> None:
        path = Path(path)
        if path.is_file():
            self.inputs[str(path)] = file_digest(path)

    def to_dict(self) -> dict:
        return {
            "tool": "impactnorm",
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "warnings": self.warnings,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
        }

    def write(self, directory) -> Path:
        path = Path(directory) / "run_manifest.json"
        write_json(self.to_dict(), path)
        return path
