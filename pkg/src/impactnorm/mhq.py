"""Pooled Mantel-Haenszel quotient (MHq') over stratified fourfold tables.

Per stratum with ``n = a + b + c' + d'``::

    R_f = a d' / n        S_f = b c' / n
    P_f = (a + d') / n    Q_f = 1 - P_f

The indicator is ``R / S`` with ``R = sum R_f`` and ``S = sum S_f``. The variance
of its logarithm is the Robins-Breslow-Greenland estimator::

    Var(ln MHq') = 1/2 [ sum P R / R^2 + sum (P S + Q R) / (R S) + sum Q S / S^2 ]

and the interval is ``exp(ln MHq' -/+ z sqrt(Var))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ._normal import two_sided_z
from .errors import DegenerateDenominator, MhqError, NoInformativeStrata
from .records import Dataset, GroupSpec, Source
from .stratify import FourfoldTable, StratumSet, build_strata, cross_tables


@dataclass(frozen=True)
class MhqAccumulator:
    R_f: tuple[float, ...]
    S_f: tuple[float, ...]
    P_f: tuple[float, ...]
    Q_f: tuple[float, ...]
    n_f: tuple[int, ...]
    R: float
    S: float
    strata_used: int
    strata_skipped: int
    strata_informative: int

    @property
    def value(self) -> float:
        if self.S == 0:
            raise DegenerateDenominator(
                "S = 0: every group paper is mentioned or every world paper is unmentioned"
            )
        return self.R / self.S


@dataclass(frozen=True)
class MhqResult:
    value: float
    var_log: float | None
    ci_low: float | None
    ci_high: float | None
    strata_used: int
    strata_skipped: int
    n_group: int
    n_world: int
    group: str | None = None
    metric: str | None = None

    @property
    def status(self) -> str:
        # R = 0 gives a well-defined quotient of 0 but no log-scale interval
        return "ok" if self.var_log is not None else "zero-numerator"


def mhq_point(tables: Sequence[FourfoldTable]) -> MhqAccumulator:
    """Accumulate per-stratum terms; strata with ``n = 0`` are skipped.

    A stratum is informative when both its group row and its world row hold at
    least one paper. Raises :class:`NoInformativeStrata` when none is, and
    :class:`DegenerateDenominator` when ``S = 0``.
    """
    R_f, S_f, P_f, Q_f, n_f = [], [], [], [], []
    skipped = informative = 0
    for t in tables:
        n = t.n
        if n == 0:
            skipped += 1
            continue
        if t.a + t.b > 0 and t.c_prime + t.d_prime > 0:
            informative += 1
        R_f.append(t.a * t.d_prime / n)
        S_f.append(t.b * t.c_prime / n)
        p = (t.a + t.d_prime) / n
        P_f.append(p)
        Q_f.append(1.0 - p)
        n_f.append(n)
    if informative == 0:
        raise NoInformativeStrata(
            f"no stratum has both group and world papers ({len(n_f)} used, {skipped} empty)"
        )
    acc = MhqAccumulator(
        tuple(R_f), tuple(S_f), tuple(P_f), tuple(Q_f), tuple(n_f),
        R=math.fsum(R_f), S=math.fsum(S_f),
        strata_used=len(n_f), strata_skipped=skipped, strata_informative=informative,
    )
    acc.value  # raises on S = 0
    return acc


def mhq_variance(acc: MhqAccumulator) -> float:
    R, S = acc.R, acc.S
    if R == 0 or S == 0:
        raise DegenerateDenominator(f"log-variance undefined with R={R}, S={S}")
    pr = math.fsum(p * r for p, r in zip(acc.P_f, acc.R_f))
    cross = math.fsum(p * s + q * r for p, q, r, s in zip(acc.P_f, acc.Q_f, acc.R_f, acc.S_f))
    qs = math.fsum(q * s for q, s in zip(acc.Q_f, acc.S_f))
    return 0.5 * (pr / (R * R) + cross / (R * S) + qs / (S * S))


def mhq_ci(value: float, var_log: float, level: float = 0.95) -> tuple[float, float]:
    if value <= 0:
        raise ValueError(f"interval needs a positive point value, got {value}")
    if var_log < 0:
        raise ValueError(f"negative log-variance {var_log}")
    half = two_sided_z(level) * math.sqrt(var_log)
    centre = math.log(value)
    return math.exp(centre - half), math.exp(centre + half)


def mhq_from_tables(
    tables: Sequence[FourfoldTable],
    level: float = 0.95,
    *,
    group: str | None = None,
    metric: str | None = None,
) -> MhqResult:
    """Point value, log-variance and interval from a list of tables."""
    try:
        acc = mhq_point(tables)
    except MhqError as exc:
        raise type(exc)(str(exc), group=group, metric=metric) from None
    used = [t for t in tables if t.n > 0]
    n_group = sum(t.a + t.b for t in used)
    n_world = sum(t.c_prime + t.d_prime for t in used)
    value = acc.value
    if acc.R == 0:
        var_log = low = high = None
    else:
        var_log = mhq_variance(acc)
        low, high = mhq_ci(value, var_log, level)
    return MhqResult(
        value=value, var_log=var_log, ci_low=low, ci_high=high,
        strata_used=acc.strata_used, strata_skipped=acc.strata_skipped,
        n_group=n_group, n_world=n_world, group=group, metric=metric,
    )


def compute_mhq(
    dataset: Dataset,
    group: GroupSpec,
    metric: Source,
    threshold: int | None = None,
    level: float | None = None,
    strata: StratumSet | None = None,
) -> MhqResult:
    """MHq' of ``group`` against the rest of the dataset for one metric.

    ``threshold`` and ``level`` default to the dataset configuration. Pass a
    prebuilt ``strata`` to avoid rebuilding it for every group.
    """
    if len(group) == 0:
        raise ValueError(f"group {group.label!r} is empty")
    metric = Source(metric)
    if threshold is None:
        threshold = dataset.config.mention_threshold
    if level is None:
        level = dataset.config.ci_level
    if strata is None:
        strata = build_strata(dataset)
    tables = cross_tables(dataset, strata, group, metric, threshold)
    return mhq_from_tables(tables, level, group=group.label, metric=metric.value)
