"""DerSimonian-Laird random-effects pooling of correlation coefficients on the Fisher-z scale."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from ._normal import two_sided_z
from .errors import EmptyInput, OutOfRange, SchemaMismatch


@dataclass(frozen=True)
class StudyCoefficient:
    study_id: str
    r: float
    n: float

    def __post_init__(self):
        if not -1.0 < self.r < 1.0:
            raise OutOfRange(f"{self.study_id}: r={self.r} outside (-1, 1)")
        if self.n < 4:
            raise OutOfRange(f"{self.study_id}: n={self.n} below 4")

    @property
    def z(self) -> float:
        return fisher_z(self.r)

    @property
    def variance(self) -> float:
        return 1.0 / (self.n - 3)


@dataclass(frozen=True)
class PooledResult:
    r_pooled: float
    ci_low: float
    ci_high: float
    tau_sq: float
    k: int
    weights: tuple[float, ...]
    z_pooled: float
    se_z: float
    q_stat: float


def fisher_z(r: float) -> float:
    if not -1.0 < r < 1.0:
        raise OutOfRange(f"Fisher z undefined for r={r}")
    return math.atanh(r)


def inv_fisher_z(z: float) -> float:
    return math.tanh(z)


def _weighted_mean(zs, ws):
    return math.fsum(w * z for w, z in zip(ws, zs)) / math.fsum(ws)


def dersimonian_laird_tau_sq(zs: Sequence[float], variances: Sequence[float]) -> tuple[float, float]:
    """Between-study variance and Cochran's Q."""
    k = len(zs)
    w = [1.0 / v for v in variances]
    z_fixed = _weighted_mean(zs, w)
    q = math.fsum(wi * (zi - z_fixed) ** 2 for wi, zi in zip(w, zs))
    if k < 2:
        return 0.0, q
    sw = math.fsum(w)
    c = sw - math.fsum(wi * wi for wi in w) / sw
    if c <= 0:
        return 0.0, q
    return max(0.0, (q - (k - 1)) / c), q


def pool_random_effects(
    coeffs: Sequence[StudyCoefficient],
    level: float = 0.95,
    tau_sq: float | None = None,
) -> PooledResult:
    """Pool coefficients with DerSimonian-Laird weights.

    Passing ``tau_sq`` fixes the between-study variance instead of estimating
    it; ``tau_sq=0`` gives the fixed-effect inverse-variance estimate.
    """
    coeffs = list(coeffs)
    if not coeffs:
        raise EmptyInput("no coefficients to pool")
    zs = [c.z for c in coeffs]
    variances = [c.variance for c in coeffs]
    est_tau, q = dersimonian_laird_tau_sq(zs, variances)
    if tau_sq is None:
        tau_sq = est_tau
    raw = [1.0 / (v + tau_sq) for v in variances]
    total = math.fsum(raw)
    z_pooled = math.fsum(w * z for w, z in zip(raw, zs)) / total
    se = math.sqrt(1.0 / total)
    half = two_sided_z(level) * se
    return PooledResult(
        r_pooled=inv_fisher_z(z_pooled),
        ci_low=inv_fisher_z(z_pooled - half),
        ci_high=inv_fisher_z(z_pooled + half),
        tau_sq=tau_sq,
        k=len(coeffs),
        weights=tuple(w / total for w in raw),
        z_pooled=z_pooled,
        se_z=se,
        q_stat=q,
    )


def collapse_clusters(coeffs: Iterable[StudyCoefficient]) -> list[StudyCoefficient]:
    """One aggregate per study: ``(n-3)``-weighted mean z and the mean member n.

    Studies are returned in order of first appearance.
    """
    clusters: dict[str, list[StudyCoefficient]] = {}
    for c in coeffs:
        clusters.setdefault(c.study_id, []).append(c)
    out = []
    for study_id, members in clusters.items():
        if len(members) == 1:
            out.append(members[0])
            continue
        weights = [m.n - 3 for m in members]
        zs = [m.z for m in members]
        r = inv_fisher_z(_weighted_mean(zs, weights))
        n = math.fsum(m.n for m in members) / len(members)
        out.append(StudyCoefficient(study_id, r, n))
    return out


MODES = ("all", "clustered")


def pool(coeffs: Sequence[StudyCoefficient], mode: str = "all", level: float = 0.95) -> PooledResult:
    """Pool directly (``all``) or after collapsing each study to one coefficient (``clustered``)."""
    if mode == "all":
        return pool_random_effects(coeffs, level)
    if mode == "clustered":
        return pool_random_effects(collapse_clusters(coeffs), level)
    raise ValueError(f"unknown meta-analysis mode {mode!r}; expected one of {MODES}")


def read_coefficients(path) -> list[StudyCoefficient]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"study_id", "r", "n"} - set(reader.fieldnames or [])
        if missing:
            raise SchemaMismatch(f"{path}: missing column(s) {', '.join(sorted(missing))}")
        out = []
        for row in reader:
            try:
                out.append(StudyCoefficient(row["study_id"].strip(), float(row["r"]), float(row["n"])))
            except (TypeError, ValueError) as exc:
                raise SchemaMismatch(f"{path}:{reader.line_num}: {exc}") from None
    return out
