from statistics import NormalDist


def two_sided_z(level: float) -> float:
    """Standard-normal multiplier for a two-sided interval; exactly 1.96 at 95%."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    if level == 0.95:
        return 1.96
    return NormalDist().inv_cdf(0.5 + level / 2.0)
