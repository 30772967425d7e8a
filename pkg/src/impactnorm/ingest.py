"""Parsing, normalization and joining of the input tables.

Input is a directory (or explicit paths) holding::

    publications.csv  paper_id,doi,pub_year,subject_codes
    links.csv         paper_id,unit_id,role
    mentions.csv      paper_id,source,count
    units.csv         unit_id,dimension,pct4,pct3,pct2,pct1,pct0
    config.txt        key = value lines (optional)

Malformed rows are collected as :class:`RowError` and reported; only a
reference to a paper that never appeared in ``publications.csv`` is fatal.
"""

from __future__ import annotations

import csv
import logging
import os
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

from .errors import EmptySubset, FileMissing, IntegrityError, MalformedCode, SchemaMismatch
from .records import (
    STAR_LEVELS,
    Dataset,
    DatasetConfig,
    Dimension,
    GroupSpec,
    MentionCount,
    PublicationRecord,
    Role,
    Source,
    SubmissionLink,
    UnitProfile,
)
from .stratify import aggregate_code

log = logging.getLogger(__name__)

FILES = ("publications", "links", "mentions", "units")
FILENAMES = {
    "publications": "publications.csv",
    "links": "links.csv",
    "mentions": "mentions.csv",
    "units": "units.csv",
    "config": "config.txt",
}
COLUMNS = {
    "publications": ("paper_id", "doi", "pub_year", "subject_codes"),
    "links": ("paper_id", "unit_id", "role"),
    "mentions": ("paper_id", "source", "count"),
    "units": ("unit_id", "dimension", "pct4", "pct3", "pct2", "pct1", "pct0"),
}
CONFIG_KEYS = {"year_min": int, "year_max": int, "ci_level": float, "mention_threshold": int}

_DOI_PREFIXES = ("https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "doi:")


def normalize_doi(raw: str | None) -> str | None:
    if raw is None:
        return None
    doi = raw.strip().lower()
    for prefix in _DOI_PREFIXES:
        if doi.startswith(prefix):
            doi = doi[len(prefix):].strip()
            break
    if not doi.startswith("10."):
        return None
    return doi


@dataclass(frozen=True)
class RowError:
    file: str
    line: int
    message: str

    def __str__(self):
        return f"{self.file}:{self.line}: {self.message}"


@dataclass
class RawTables:
    publications: list[dict] = field(default_factory=list)
    links: list[dict] = field(default_factory=list)
    mentions: list[dict] = field(default_factory=list)
    units: list[dict] = field(default_factory=list)
    config: DatasetConfig = field(default_factory=DatasetConfig)
    rows_read: dict[str, int] = field(default_factory=dict)
    row_errors: list[RowError] = field(default_factory=list)
    # paper ids named by publication rows, whether or not the row parsed
    known_paper_ids: set[str] = field(default_factory=set)


@dataclass
class IngestReport:
    rows_read: dict[str, int]
    rows_retained: dict[str, int]
    rows_dropped: dict[str, dict[str, int]]
    papers_dropped_no_doi: int = 0
    papers_dropped_year: int = 0
    links_dropped_error: int = 0
    duplicate_mentions_merged: int = 0
    row_errors: list[RowError] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def balanced(self) -> bool:
        return all(
            self.rows_read[f] == self.rows_retained[f] + sum(self.rows_dropped[f].values())
            for f in FILES
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["row_errors"] = [str(e) for e in self.row_errors]
        return out


def input_paths(directory) -> dict[str, Path]:
    directory = Path(directory)
    return {name: directory / fname for name, fname in FILENAMES.items()}


def read_config(path) -> DatasetConfig:
    """Parse a flat ``key = value`` file; blank lines and ``#`` comments are ignored."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in CONFIG_KEYS:
                raise SchemaMismatch(f"{path}:{lineno}: unrecognized config line {line!r}")
            try:
                values[key] = CONFIG_KEYS[key](value.strip())
            except ValueError:
                raise SchemaMismatch(f"{path}:{lineno}: bad value for {key}: {value.strip()!r}")
    return DatasetConfig(**values)


def write_config(config: DatasetConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in CONFIG_KEYS:
            fh.write(f"{key} = {getattr(config, key)}\n")


def _read_csv(kind: str, path: Path, errors: list[RowError]) -> tuple[list[tuple[int, dict]], int]:
    if not path.is_file():
        raise FileMissing(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in COLUMNS[kind] if c not in header]
        if missing:
            raise SchemaMismatch(f"{path}: missing column(s) {', '.join(missing)}")
        rows = []
        for row in reader:
            if None in row or any(row[c] is None for c in COLUMNS[kind]):
                errors.append(RowError(path.name, reader.line_num, "wrong number of fields"))
                rows.append((reader.line_num, None))
                continue
            rows.append((reader.line_num, {c: row[c].strip() for c in COLUMNS[kind]}))
    return rows, len(rows)


def _parse_publication(row):
    paper_id = row["paper_id"]
    if not paper_id:
        raise ValueError("empty paper_id")
    year = int(row["pub_year"])
    codes = frozenset(c.strip() for c in row["subject_codes"].split(";") if c.strip())
    for code in codes:
        aggregate_code(code)
    return {"paper_id": paper_id, "doi": normalize_doi(row["doi"]), "pub_year": year,
            "subject_codes": codes}


def _parse_link(row):
    if not row["paper_id"] or not row["unit_id"]:
        raise ValueError("empty paper_id or unit_id")
    return {"paper_id": row["paper_id"], "unit_id": row["unit_id"], "role": Role(row["role"].lower())}


def _parse_mention(row):
    count = int(row["count"])
    if count < 0:
        raise ValueError(f"negative count {count}")
    return {"paper_id": row["paper_id"], "source": Source(row["source"].lower()), "count": count}


def _parse_unit(row):
    pct = {level: float(row[f"pct{level}"]) for level in STAR_LEVELS}
    if any(v < 0 for v in pct.values()):
        raise ValueError("negative percentage")
    if abs(sum(pct.values()) - 100.0) > 0.5:
        raise ValueError(f"percentages sum to {sum(pct.values()):.3f}")
    return {"unit_id": row["unit_id"], "dimension": Dimension(row["dimension"].lower()), "pct": pct}


_PARSERS = {
    "publications": _parse_publication,
    "links": _parse_link,
    "mentions": _parse_mention,
    "units": _parse_unit,
}


def parse_tables(paths: Mapping[str, os.PathLike] | os.PathLike | str) -> RawTables:
    """Read and type the input files.

    ``paths`` is either a directory holding the standard file names or a
    mapping from ``publications``/``links``/``mentions``/``units``/``config``
    to file paths. A missing config file means defaults.
    """
    if not isinstance(paths, Mapping):
        paths = input_paths(paths)
    tables = RawTables()
    for kind in FILES:
        path = Path(paths[kind])
        rows, n = _read_csv(kind, path, tables.row_errors)
        tables.rows_read[kind] = n
        parsed = getattr(tables, kind)
        for line, row in rows:
            if row is None:
                continue
            if kind == "publications" and row["paper_id"]:
                tables.known_paper_ids.add(row["paper_id"])
            try:
                parsed.append((line, _PARSERS[kind](row)))
            except (ValueError, MalformedCode) as exc:
                tables.row_errors.append(RowError(path.name, line, str(exc)))
    file_rank = {Path(paths[k]).name: i for i, k in enumerate(FILES)}
    tables.row_errors.sort(key=lambda e: (file_rank.get(e.file, len(FILES)), e.line))
    config_path = paths.get("config")
    if config_path is not None and Path(config_path).is_file():
        tables.config = read_config(config_path)
    return tables


def build_dataset(tables: RawTables, config: DatasetConfig | None = None) -> tuple[Dataset, IngestReport]:
    """Apply exclusion rules, merge duplicate mentions and assemble a :class:`Dataset`.

    Papers without a DOI or outside the configured year range are dropped
    together with their links and mentions. Raises :class:`IntegrityError`
    if a link or mention names a paper absent from the publications file.
    """
    config = config or tables.config
    row_errors = list(tables.row_errors)
    parse_errors = Counter(e.file for e in row_errors)
    dropped = {f: Counter() for f in FILES}
    for kind in FILES:
        n_err = parse_errors.get(FILENAMES[kind], 0)
        if n_err:
            dropped[kind]["error"] = n_err
    report_warnings = []

    pubs = {}
    n_no_doi = n_year = 0
    for line, row in tables.publications:
        if row["paper_id"] in pubs:
            row_errors.append(RowError(FILENAMES["publications"], line,
                                              f"duplicate paper_id {row['paper_id']}"))
            dropped["publications"]["error"] += 1
        elif row["doi"] is None:
            n_no_doi += 1
            dropped["publications"]["no_doi"] += 1
        elif not config.year_min <= row["pub_year"] <= config.year_max:
            n_year += 1
            dropped["publications"]["year"] += 1
        else:
            pubs[row["paper_id"]] = PublicationRecord(**row)
    # ids of papers dropped for any reason stay resolvable so their rows can be dropped cleanly
    excluded = (tables.known_paper_ids | {r["paper_id"] for _, r in tables.publications}) - set(pubs)

    def resolve(kind, paper_id):
        if paper_id in pubs:
            return True
        if paper_id in excluded:
            dropped[kind]["excluded_paper"] += 1
            return False
        raise IntegrityError(f"{FILENAMES[kind]} references unknown paper_id {paper_id}", paper_id)

    links = set()
    for _, row in tables.links:
        if not resolve("links", row["paper_id"]):
            continue
        link = SubmissionLink(**row)
        if link in links:
            dropped["links"]["duplicate"] += 1
        else:
            links.add(link)

    merged: dict[tuple[str, Source], int] = {}
    n_merged = 0
    for line, row in tables.mentions:
        if not resolve("mentions", row["paper_id"]):
            continue
        key = (row["paper_id"], row["source"])
        if key in merged:
            n_merged += 1
            dropped["mentions"]["merged"] += 1
            msg = (f"{FILENAMES['mentions']}:{line}: duplicate mention row for "
                   f"{key[0]}/{key[1].value} summed")
            log.warning(msg)
            report_warnings.append(msg)
            merged[key] += row["count"]
        else:
            merged[key] = row["count"]
    mentions = [MentionCount(p, s, c) for (p, s), c in merged.items()]

    profiles = {}
    for line, row in tables.units:
        key = (row["unit_id"], row["dimension"])
        if key in profiles:
            row_errors.append(RowError(FILENAMES["units"], line,
                                              f"duplicate profile {key[0]}/{key[1].value}"))
            dropped["units"]["error"] += 1
            continue
        profiles[key] = UnitProfile(**row)

    dataset = Dataset(tuple(pubs.values()), tuple(links), tuple(mentions),
                      tuple(profiles.values()), config)
    retained = {
        "publications": len(dataset.publications),
        "links": len(dataset.links),
        "mentions": len(dataset.mentions),
        "units": len(dataset.unit_profiles),
    }
    report = IngestReport(
        rows_read=dict(tables.rows_read),
        rows_retained=retained,
        rows_dropped={f: dict(sorted(dropped[f].items())) for f in FILES},
        papers_dropped_no_doi=n_no_doi,
        papers_dropped_year=n_year,
        links_dropped_error=dropped["links"].get("error", 0),
        duplicate_mentions_merged=n_merged,
        row_errors=row_errors,
        warnings=report_warnings,
    )
    return dataset, report


def load_dataset(paths, config: DatasetConfig | None = None) -> tuple[Dataset, IngestReport]:
    return build_dataset(parse_tables(paths), config)


def _fmt_pct(value: float) -> str:
    return repr(float(value))


def write_dataset(dataset: Dataset, directory) -> dict[str, Path]:
    """Write the dataset in the input formats; output is byte-stable for equal datasets."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = input_paths(directory)

    def dump(kind, rows):
        with open(paths[kind], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COLUMNS[kind])
            writer.writerows(rows)

    dump("publications", ((p.paper_id, p.doi, p.pub_year, ";".join(sorted(p.subject_codes)))
                          for p in dataset.publications))
    dump("links", ((l.paper_id, l.unit_id, l.role.value) for l in dataset.links))
    dump("mentions", ((m.paper_id, m.source.value, m.count) for m in dataset.mentions))
    dump("units", ((u.unit_id, u.dimension.value, *(_fmt_pct(u.pct[k]) for k in STAR_LEVELS))
                   for u in dataset.unit_profiles))
    write_config(dataset.config, paths["config"])
    return paths


class ThreeGroups(NamedTuple):
    pcs: GroupSpec
    pro: GroupSpec
    both: GroupSpec


GROUP_LABELS = ("PCS", "PRO", "PCS&PRO")


def partition_groups(dataset: Dataset) -> ThreeGroups:
    """Split linked papers into case-reference only, output only, and both."""
    roles: dict[str, set[Role]] = {}
    for link in dataset.links:
        roles.setdefault(link.paper_id, set()).add(link.role)
    pcs = {p for p, r in roles.items() if r == {Role.CASE_REF}}
    pro = {p for p, r in roles.items() if r == {Role.OUTPUT}}
    both = {p for p, r in roles.items() if len(r) == 2}
    return ThreeGroups(GroupSpec("PCS", pcs), GroupSpec("PRO", pro), GroupSpec("PCS&PRO", both))


def unit_groups(dataset: Dataset, role: Role) -> dict[str, GroupSpec]:
    role = Role(role)
    members: dict[str, set[str]] = {}
    for link in dataset.links:
        if link.role is role:
            members.setdefault(link.unit_id, set()).add(link.paper_id)
    return {u: GroupSpec(u, members[u]) for u in sorted(members)}


def units_with_role(dataset: Dataset, role: Role) -> set[str]:
    return {l.unit_id for l in dataset.links if l.role is Role(role)}


def _mean_profile(profiles: Iterable[UnitProfile]) -> dict[int, float]:
    profiles = list(profiles)
    return {k: sum(p.pct[k] for p in profiles) / len(profiles) for k in STAR_LEVELS}


def representativeness(
    dataset: Dataset,
    subset_unit_ids: Iterable[str],
    dimension: Dimension = Dimension.IMPACT,
) -> dict[str, dict[int, float]]:
    """Mean percentage per star level over all units and over ``subset_unit_ids``."""
    dimension = Dimension(dimension)
    subset = set(subset_unit_ids)
    full = [u for u in dataset.unit_profiles if u.dimension is dimension]
    part = [u for u in full if u.unit_id in subset]
    if not part:
        raise EmptySubset(f"no {dimension.value} profiles for the requested units")
    return {"full": _mean_profile(full), "subset": _mean_profile(part)}
