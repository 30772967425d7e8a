"""Deterministic synthetic datasets with planted effects.

Each paper's probability of being mentioned by a source is built on the
log-odds scale from four parts: the source's base probability, a per-stratum
offset, its unit's quality effect, and for case-reference papers the log of
the source's planted group odds ratio. Mentioned papers receive a count of
``1 + Poisson(extra)``; everything else is recorded as not mentioned.

Randomness comes from numpy's PCG64 bit generator seeded with ``seed``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidConfig
from .ingest import write_dataset
from .records import (
    STAR_LEVELS,
    Dataset,
    DatasetConfig,
    Dimension,
    MentionCount,
    PublicationRecord,
    Role,
    Source,
    SubmissionLink,
    UnitProfile,
)

GENERATOR = "numpy.random.PCG64"

DEFAULT_BASE_PROB = {
    "twitter": 0.35,
    "facebook": 0.10,
    "blogs": 0.06,
    "news": 0.07,
    "policy": 0.04,
    "wikipedia": 0.05,
    "citations": 0.70,
}
DEFAULT_EXTRA_MEAN = {s.value: (3.0 if s is Source.CITATIONS else 1.0) for s in Source}

# spread of the star distribution around a unit's mean rating
PROFILE_SPREAD = 0.8


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_units: int = 40
    papers_per_unit: int = 100
    n_cells: int = 6
    year_range: tuple[int, int] = (2008, 2014)
    base_mention_prob: dict = field(default_factory=lambda: dict(DEFAULT_BASE_PROB))
    group_odds_ratio: dict = field(default_factory=lambda: {s.value: 1.0 for s in Source})
    score_noise_sd: float = 0.15
    case_ref_share: float = 0.10
    both_share: float = 0.05
    unit_log_odds_sd: float = 0.4
    stratum_log_odds_sd: float = 0.5
    score_slope: float = 0.4
    extra_count_mean: dict = field(default_factory=lambda: dict(DEFAULT_EXTRA_MEAN))

    def __post_init__(self):
        object.__setattr__(self, "year_range", tuple(int(y) for y in self.year_range))
        base = {Source(k).value: float(v) for k, v in self.base_mention_prob.items()}
        odds = {s.value: 1.0 for s in Source}
        odds.update({Source(k).value: float(v) for k, v in self.group_odds_ratio.items()})
        extra = dict(DEFAULT_EXTRA_MEAN)
        extra.update({Source(k).value: float(v) for k, v in self.extra_count_mean.items()})
        object.__setattr__(self, "base_mention_prob", base)
        object.__setattr__(self, "group_odds_ratio", odds)
        object.__setattr__(self, "extra_count_mean", extra)
        self.validate()

    def validate(self):
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")
        if self.n_units < 1 or self.papers_per_unit < 1:
            raise InvalidConfig("n_units and papers_per_unit must be positive")
        if not 1 <= self.n_cells <= 80:
            raise InvalidConfig("n_cells must lie in [1, 80]")
        y0, y1 = self.year_range
        if y0 > y1:
            raise InvalidConfig("year_range must be ascending")
        if set(self.base_mention_prob) != {s.value for s in Source}:
            raise InvalidConfig("base_mention_prob needs one entry per source")
        if any(not 0.0 < p < 1.0 for p in self.base_mention_prob.values()):
            raise InvalidConfig("base mention probabilities must lie in (0, 1)")
        if any(v < 0 for v in self.group_odds_ratio.values()):
            raise InvalidConfig("group odds ratios must be non-negative")
        if any(v < 0 for v in self.extra_count_mean.values()):
            raise InvalidConfig("extra count means must be non-negative")
        if min(self.score_noise_sd, self.unit_log_odds_sd, self.stratum_log_odds_sd) < 0:
            raise InvalidConfig("standard deviations must be non-negative")
        if self.case_ref_share < 0 or self.both_share < 0 or self.case_ref_share + self.both_share > 1:
            raise InvalidConfig("role shares must be non-negative and sum to at most 1")

    @classmethod
    def from_dict(cls, data: dict) -> SynthConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown synth config key(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> SynthConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["year_range"] = list(self.year_range)
        return out


@dataclass(frozen=True)
class GroundTruth:
    config: dict
    generator: str
    numpy_version: str
    unit_quality: dict[str, float]
    unit_odds_ratio: dict[str, float]
    unit_score_mean: dict[str, dict[str, float]]
    cell_codes: dict[str, list[str]]
    stratum_mention_prob: dict[str, dict[str, float]]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _cells(n_cells: int) -> list[list[str]]:
    # even cells have one area, odd cells combine the previous area with a new one
    areas = [f"{10 + i}00" for i in range(n_cells)]
    return [[areas[i]] if i % 2 == 0 else [areas[i - 1], areas[i]] for i in range(n_cells)]


def _profile(mean_rating: float) -> dict[int, float]:
    weights = {k: math.exp(-((k - mean_rating) ** 2) / (2 * PROFILE_SPREAD**2)) for k in STAR_LEVELS}
    total = sum(weights.values())
    pct = {k: round(100.0 * w / total, 1) for k, w in weights.items()}
    top = max(pct, key=pct.get)
    pct[top] = round(pct[top] + 100.0 - sum(pct.values()), 1)
    return pct


def _logit(p):
    return math.log(p / (1.0 - p))


def generate(config: SynthConfig) -> tuple[Dataset, GroundTruth]:
    rng = np.random.Generator(np.random.PCG64(config.seed))
    y0, y1 = config.year_range
    years = np.arange(y0, y1 + 1)
    cells = _cells(config.n_cells)
    n_strata = config.n_cells * len(years)
    sources = list(Source)

    unit_ids = [f"U{u:03d}" for u in range(config.n_units)]
    quality = rng.standard_normal(config.n_units)
    stratum_offset = rng.normal(0.0, config.stratum_log_odds_sd, size=(n_strata, len(sources)))
    if config.stratum_log_odds_sd == 0:
        stratum_offset[:] = 0.0

    n = config.n_units * config.papers_per_unit
    unit_of = np.repeat(np.arange(config.n_units), config.papers_per_unit)
    cell_of = rng.integers(0, config.n_cells, size=n)
    year_idx = rng.integers(0, len(years), size=n)
    stratum_of = cell_of * len(years) + year_idx
    role_draw = rng.random(n)
    is_case_only = role_draw < config.case_ref_share
    is_both = (role_draw >= config.case_ref_share) & (role_draw < config.case_ref_share + config.both_share)
    is_case = is_case_only | is_both
    # case-study unit of papers in both roles is drawn independently of the output unit
    case_unit_of = np.where(is_both, rng.integers(0, config.n_units, size=n), unit_of)
    detail = rng.integers(1, 100, size=(n, 2))

    unit_log_odds = config.unit_log_odds_sd * quality
    counts = np.zeros((n, len(sources)), dtype=np.int64)
    for j, source in enumerate(sources):
        s = source.value
        eta = _logit(config.base_mention_prob[s]) + stratum_offset[stratum_of, j] + unit_log_odds[unit_of]
        odds = config.group_odds_ratio[s]
        boost = math.log(odds) if odds > 0 else -math.inf
        eta = np.where(is_case, eta + boost, eta)
        p = np.clip(1.0 / (1.0 + np.exp(-eta)), 1e-12, 1 - 1e-12)
        mentioned = rng.random(n) < p
        extra = rng.poisson(config.extra_count_mean[s], size=n)
        counts[:, j] = np.where(mentioned, 1 + extra, 0)

    pubs, links, mentions = [], [], []
    hit_rows, hit_cols = np.nonzero(counts)
    for i, j in zip(hit_rows.tolist(), hit_cols.tolist()):
        mentions.append(MentionCount(f"P{i:07d}", sources[j], int(counts[i, j])))
    for i in range(n):
        paper_id = f"P{i:07d}"
        codes = frozenset(
            code[:2] + f"{detail[i, k]:02d}" for k, code in enumerate(cells[cell_of[i]])
        )
        pubs.append(PublicationRecord(paper_id, f"10.5555/synth.{config.seed}.{i:07d}",
                                      int(years[year_idx[i]]), codes))
        if not is_case_only[i]:
            links.append(SubmissionLink(paper_id, unit_ids[unit_of[i]], Role.OUTPUT))
        if is_case[i]:
            links.append(SubmissionLink(paper_id, unit_ids[case_unit_of[i]], Role.CASE_REF))

    profiles = []
    score_means = {}
    for u, unit_id in enumerate(unit_ids):
        score_means[unit_id] = {}
        for dim in Dimension:
            mean = 2.9 + config.score_slope * quality[u] + rng.normal(0.0, config.score_noise_sd)
            mean = float(min(4.0, max(0.0, mean)))
            score_means[unit_id][dim.value] = mean
            profiles.append(UnitProfile(unit_id, dim, _profile(mean)))

    dataset = Dataset(tuple(pubs), tuple(links), tuple(mentions), tuple(profiles),
                      DatasetConfig(year_min=y0, year_max=y1))

    stratum_prob = {}
    for c, codes in enumerate(cells):
        for yi, year in enumerate(years):
            row = c * len(years) + yi
            key = f"{';'.join(codes)}|{year}"
            stratum_prob[key] = {
                source.value: 1.0 / (1.0 + math.exp(-(_logit(config.base_mention_prob[source.value])
                                                     + stratum_offset[row, j])))
                for j, source in enumerate(sources)
            }
    truth = GroundTruth(
        config=config.to_dict(),
        generator=GENERATOR,
        numpy_version=np.__version__,
        unit_quality={u: float(q) for u, q in zip(unit_ids, quality)},
        unit_odds_ratio={u: float(math.exp(v)) for u, v in zip(unit_ids, unit_log_odds)},
        unit_score_mean=score_means,
        cell_codes={";".join(c): c for c in cells},
        stratum_mention_prob=stratum_prob,
    )
    return dataset, truth


def write_synthetic(dataset: Dataset, truth: GroundTruth, directory) -> dict[str, Path]:
    paths = write_dataset(dataset, directory)
    paths["ground_truth"] = Path(directory) / "ground_truth.json"
    paths["ground_truth"].write_text(truth.to_json(), encoding="utf-8")
    return paths
