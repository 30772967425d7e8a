"""Field x publication-year strata and group-excluded fourfold tables.

Fields follow partition semantics: the set of aggregated subject codes a paper
carries is itself the field, so each paper sits in exactly one cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping, NamedTuple

import numpy as np

from .errors import MalformedCode

if TYPE_CHECKING:
    from .records import Dataset, GroupSpec, Source

UNCLASSIFIED = "UNCLASSIFIED"


def aggregate_code(code: str) -> str:
    """Collapse a 4-digit subject code to its two-digit area, e.g. ``"1105" -> "1100"``."""
    if not isinstance(code, str) or len(code) != 4 or not (code.isascii() and code.isdigit()):
        raise MalformedCode(f"malformed subject code {code!r}")
    return code[:2] + "00"


def partition_cell(subject_codes: Iterable[str]) -> str:
    codes = sorted({aggregate_code(c) for c in subject_codes})
    if not codes:
        return UNCLASSIFIED
    return ";".join(codes)


class StratumKey(NamedTuple):
    cell: str
    year: int


@dataclass(frozen=True)
class StratumSet:
    keys: tuple[StratumKey, ...]
    members: tuple[tuple[str, ...], ...]
    # stratum index of each dataset publication, aligned with Dataset.publications
    stratum_of: np.ndarray

    def __len__(self):
        return len(self.keys)

    def sizes(self) -> list[int]:
        return [len(m) for m in self.members]


@dataclass(frozen=True)
class FourfoldTable:
    a: int
    b: int
    c_prime: int
    d_prime: int
    key: StratumKey | None = None

    def __post_init__(self):
        if min(self.a, self.b, self.c_prime, self.d_prime) < 0:
            raise ValueError(f"negative cell in fourfold table {self}")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c_prime + self.d_prime

    def scaled(self, k: int) -> FourfoldTable:
        return FourfoldTable(self.a * k, self.b * k, self.c_prime * k, self.d_prime * k, self.key)


def build_strata(dataset: Dataset) -> StratumSet:
    buckets: dict[StratumKey, list[str]] = {}
    for pub in dataset.publications:
        buckets.setdefault(StratumKey(pub.cell, pub.pub_year), []).append(pub.paper_id)
    keys = tuple(sorted(buckets))
    position = {k: i for i, k in enumerate(keys)}
    stratum_of = np.fromiter(
        (position[StratumKey(p.cell, p.pub_year)] for p in dataset.publications),
        dtype=np.int64,
        count=len(dataset.publications),
    )
    stratum_of.setflags(write=False)
    return StratumSet(keys, tuple(tuple(buckets[k]) for k in keys), stratum_of)


def cross_table(
    stratum_counts: Mapping[str, int],
    group: GroupSpec,
    threshold: int = 1,
    key: StratumKey | None = None,
) -> FourfoldTable:
    """Fourfold table of one stratum.

    ``stratum_counts`` maps every paper of the stratum to its count for the
    metric; papers without a mention record must be present with count 0.
    Group papers form the first row, all remaining stratum papers the world row.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    a = b = c = d = 0
    members = group.member_paper_ids
    for paper_id, count in stratum_counts.items():
        hit = count >= threshold
        if paper_id in members:
            if hit:
                a += 1
            else:
                b += 1
        elif hit:
            c += 1
        else:
            d += 1
    return FourfoldTable(a, b, c, d, key)


def stratum_counts(dataset: Dataset, strata: StratumSet, index: int, metric: Source) -> dict[str, int]:
    counts = dataset.counts(metric)
    pos = dataset.paper_index
    return {p: int(counts[pos[p]]) for p in strata.members[index]}


def cross_tables(
    dataset: Dataset,
    strata: StratumSet,
    group: GroupSpec,
    metric: Source,
    threshold: int = 1,
) -> list[FourfoldTable]:
    """One fourfold table per stratum, computed with array counting.

    Equivalent to calling :func:`cross_table` on every stratum.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    n_strata = len(strata)
    in_group = dataset.mask(group.member_paper_ids)
    hit = dataset.counts(metric) >= threshold
    s = strata.stratum_of

    def tally(selector):
        return np.bincount(s[selector], minlength=n_strata)

    a = tally(in_group & hit)
    b = tally(in_group & ~hit)
    c = tally(~in_group & hit)
    d = tally(~in_group & ~hit)
    return [
        FourfoldTable(int(a[i]), int(b[i]), int(c[i]), int(d[i]), strata.keys[i])
        for i in range(n_strata)
    ]
