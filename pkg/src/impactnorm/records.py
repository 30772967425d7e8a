"""Core domain types.

Everything here is immutable once built. A :class:`Dataset` checks referential
integrity and year bounds at construction, so any instance in circulation is
known to be consistent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .errors import IntegrityError
from .stratify import partition_cell


class Role(str, enum.Enum):
    OUTPUT = "output"
    CASE_REF = "case_ref"


class Source(str, enum.Enum):
    TWITTER = "twitter"
    FACEBOOK = "facebook"
    BLOGS = "blogs"
    NEWS = "news"
    POLICY = "policy"
    WIKIPEDIA = "wikipedia"
    CITATIONS = "citations"


class Dimension(str, enum.Enum):
    OUTPUT = "output"
    IMPACT = "impact"


STAR_LEVELS = (4, 3, 2, 1, 0)
ALL_SOURCES = tuple(Source)
ALTMETRIC_SOURCES = tuple(s for s in Source if s is not Source.CITATIONS)


@dataclass(frozen=True)
class PublicationRecord:
    paper_id: str
    doi: str | None
    pub_year: int
    subject_codes: frozenset[str] = frozenset()
    cell: str = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "subject_codes", frozenset(self.subject_codes))
        object.__setattr__(self, "cell", partition_cell(self.subject_codes))
        if self.doi is not None and self.doi != self.doi.strip().lower():
            raise ValueError(f"DOI not normalized for {self.paper_id}: {self.doi!r}")


@dataclass(frozen=True)
class SubmissionLink:
    paper_id: str
    unit_id: str
    role: Role


@dataclass(frozen=True)
class MentionCount:
    paper_id: str
    source: Source
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"negative mention count for {self.paper_id}/{self.source.value}")


@dataclass(frozen=True)
class UnitProfile:
    """Star-rating percentage profile of one unit on one dimension."""

    unit_id: str
    dimension: Dimension
    pct: Mapping[int, float]

    def __post_init__(self):
        pct = {level: float(self.pct.get(level, 0.0)) for level in STAR_LEVELS}
        object.__setattr__(self, "pct", pct)

    @property
    def total(self) -> float:
        return sum(self.pct.values())


@dataclass(frozen=True)
class GroupSpec:
    label: str
    member_paper_ids: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "member_paper_ids", frozenset(self.member_paper_ids))

    def __len__(self):
        return len(self.member_paper_ids)


@dataclass(frozen=True)
class DatasetConfig:
    year_min: int = 2008
    year_max: int = 2014
    ci_level: float = 0.95
    mention_threshold: int = 1

    def __post_init__(self):
        if self.year_min > self.year_max:
            raise ValueError("year_min must not exceed year_max")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie in (0, 1)")
        if self.mention_threshold < 1:
            raise ValueError("mention_threshold must be >= 1")


@dataclass(frozen=True)
class Dataset:
    """A validated, immutable collection of papers, links, mentions and profiles.

    Records are stored in canonical sorted order so that two datasets built from
    the same content compare and serialize identically.
    """

    publications: tuple[PublicationRecord, ...]
    links: tuple[SubmissionLink, ...] = ()
    mentions: tuple[MentionCount, ...] = ()
    unit_profiles: tuple[UnitProfile, ...] = ()
    config: DatasetConfig = DatasetConfig()

    def __post_init__(self):
        pubs = tuple(sorted(self.publications, key=lambda p: p.paper_id))
        object.__setattr__(self, "publications", pubs)
        object.__setattr__(self, "links", tuple(sorted(
            set(self.links), key=lambda l: (l.paper_id, l.unit_id, l.role.value))))
        object.__setattr__(self, "mentions", tuple(sorted(
            self.mentions, key=lambda m: (m.paper_id, m.source.value))))
        object.__setattr__(
            self,
            "unit_profiles",
            tuple(sorted(self.unit_profiles, key=lambda u: (u.unit_id, u.dimension.value))),
        )
        self._validate()

    def _validate(self):
        ids = set()
        for pub in self.publications:
            if pub.paper_id in ids:
                raise IntegrityError(f"duplicate paper_id {pub.paper_id}", pub.paper_id)
            ids.add(pub.paper_id)
            if not self.config.year_min <= pub.pub_year <= self.config.year_max:
                raise IntegrityError(
                    f"paper {pub.paper_id} year {pub.pub_year} outside "
                    f"[{self.config.year_min}, {self.config.year_max}]",
                    pub.paper_id,
                )
        for link in self.links:
            if link.paper_id not in ids:
                raise IntegrityError(f"link references unknown paper {link.paper_id}", link.paper_id)
        seen = set()
        for m in self.mentions:
            if m.paper_id not in ids:
                raise IntegrityError(f"mention references unknown paper {m.paper_id}", m.paper_id)
            if (m.paper_id, m.source) in seen:
                raise IntegrityError(
                    f"duplicate mention record {m.paper_id}/{m.source.value}", m.paper_id
                )
            seen.add((m.paper_id, m.source))
        profile_keys = [(u.unit_id, u.dimension) for u in self.unit_profiles]
        if len(profile_keys) != len(set(profile_keys)):
            raise IntegrityError("duplicate unit profile")

    @property
    def paper_ids(self) -> tuple[str, ...]:
        return tuple(p.paper_id for p in self.publications)

    @cached_property
    def paper_index(self) -> dict[str, int]:
        return {p.paper_id: i for i, p in enumerate(self.publications)}

    @cached_property
    def _count_arrays(self) -> dict[Source, np.ndarray]:
        arrays = {s: np.zeros(len(self.publications), dtype=np.int64) for s in Source}
        index = self.paper_index
        for m in self.mentions:
            arrays[m.source][index[m.paper_id]] = m.count
        for arr in arrays.values():
            arr.setflags(write=False)
        return arrays

    def counts(self, source: Source) -> np.ndarray:
        """Per-paper counts for ``source``, aligned with ``publications``; absent rows are 0."""
        return self._count_arrays[Source(source)]

    def count(self, paper_id: str, source: Source) -> int:
        return int(self.counts(source)[self.paper_index[paper_id]])

    def profile(self, unit_id: str, dimension: Dimension) -> UnitProfile | None:
        return self._profiles.get((unit_id, Dimension(dimension)))

    @cached_property
    def _profiles(self) -> dict[tuple[str, Dimension], UnitProfile]:
        return {(u.unit_id, u.dimension): u for u in self.unit_profiles}

    def mask(self, paper_ids) -> np.ndarray:
        """Boolean membership mask over ``publications``."""
        out = np.zeros(len(self.publications), dtype=bool)
        index = self.paper_index
        out[[index[p] for p in paper_ids]] = True
        return out
