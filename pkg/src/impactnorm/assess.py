"""Unit scores from star profiles and their rank correlation with unit MHq' values."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence
import warnings

import numpy as np
from scipy.stats import rankdata

from ._normal import two_sided_z
from .errors import (
    ConstantInput,
    LengthMismatch,
    MhqError,
    ProfileSumViolation,
    TooFewUnits,
)
from .ingest import unit_groups
from .mhq import compute_mhq
from .records import STAR_LEVELS, Dataset, Dimension, Role, Source, UnitProfile
from .stratify import build_strata

PROFILE_SUM_SLACK = 0.5

# REF output scores go with PRO groups, impact scores with PCS groups
DIMENSION_ROLE = {Dimension.OUTPUT: Role.OUTPUT, Dimension.IMPACT: Role.CASE_REF}


@dataclass(frozen=True)
class UnitScore:
    unit_id: str
    dimension: Dimension
    score: float


class Interval(NamedTuple):
    low: float
    high: float
    degenerate: bool = False


@dataclass(frozen=True)
class CorrelationResult:
    metric: Source
    dimension: Dimension
    n_units: int
    r_s: float
    ci_low: float
    ci_high: float
    n_dropped: int = 0


def check_profile(profile: UnitProfile) -> None:
    if any(v < 0 for v in profile.pct.values()):
        raise ProfileSumViolation(f"negative percentage in profile of {profile.unit_id}")
    if abs(profile.total - 100.0) > PROFILE_SUM_SLACK:
        raise ProfileSumViolation(
            f"profile of {profile.unit_id}/{profile.dimension.value} sums to {profile.total:.3f}"
        )


def unit_score(profile: UnitProfile) -> UnitScore:
    """Weighted star sum ``(4*pct4 + 3*pct3 + 2*pct2 + 1*pct1) / 100``, on a 0-4 scale."""
    check_profile(profile)
    score = math.fsum(level * profile.pct[level] for level in STAR_LEVELS) / 100.0
    return UnitScore(profile.unit_id, profile.dimension, score)


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman's rho: Pearson correlation of average ranks."""
    if len(xs) != len(ys):
        raise LengthMismatch(f"lengths differ: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValueError("need at least two pairs")
    rx = rankdata(xs, method="average")
    ry = rankdata(ys, method="average")
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0 or syy == 0:
        raise ConstantInput("correlation undefined for a constant input")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def spearman_ci(r_s: float, n: int, level: float = 0.95) -> Interval:
    """Fisher-z interval with standard error ``1/sqrt(n-3)``.

    A perfect correlation yields the degenerate interval ``(r, r)`` with the
    ``degenerate`` flag set.
    """
    if n < 4:
        raise TooFewUnits(f"need at least 4 units for an interval, got {n}")
    if abs(r_s) >= 1.0:
        return Interval(r_s, r_s, True)
    z = math.atanh(r_s)
    half = two_sided_z(level) / math.sqrt(n - 3)
    return Interval(math.tanh(z - half), math.tanh(z + half))


def unit_mhq_values(
    dataset: Dataset,
    metric: Source,
    role: Role,
    threshold: int | None = None,
    level: float | None = None,
) -> tuple[dict[str, float], int]:
    """MHq' per unit for one metric and role; returns values and the number of units dropped.

    Units whose quotient is undefined, or zero because none of their papers is
    mentioned, are dropped.
    """
    strata = build_strata(dataset)
    values = {}
    dropped = 0
    for unit_id, group in unit_groups(dataset, role).items():
        try:
            result = compute_mhq(dataset, group, metric, threshold, level, strata=strata)
        except MhqError:
            dropped += 1
            continue
        if result.status != "ok":
            dropped += 1
            continue
        values[unit_id] = result.value
    return values, dropped


def correlate_units(
    dataset: Dataset,
    metric: Source,
    role: Role | None = None,
    dimension: Dimension = Dimension.OUTPUT,
    threshold: int | None = None,
    level: float | None = None,
) -> CorrelationResult:
    """Spearman correlation between unit MHq' values and unit scores.

    Complete cases only: units whose MHq' is undefined for ``metric`` or that
    lack a profile for ``dimension`` are left out.
    """
    metric, dimension = Source(metric), Dimension(dimension)
    role = DIMENSION_ROLE[dimension] if role is None else Role(role)
    if level is None:
        level = dataset.config.ci_level
    values, dropped = unit_mhq_values(dataset, metric, role, threshold, level)
    xs, ys = [], []
    for unit_id in sorted(values):
        profile = dataset.profile(unit_id, dimension)
        if profile is None:
            dropped += 1
            continue
        xs.append(values[unit_id])
        ys.append(unit_score(profile).score)
    if len(xs) < 4:
        raise TooFewUnits(
            f"{metric.value}/{dimension.value}: only {len(xs)} complete units ({dropped} dropped)"
        )
    r = spearman(xs, ys)
    ci = spearman_ci(r, len(xs), level)
    if ci.degenerate:
        warnings.warn(f"perfect rank correlation for {metric.value}/{dimension.value}")
    return CorrelationResult(metric, dimension, len(xs), r, ci.low, ci.high, dropped)
