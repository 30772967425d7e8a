"""Exception hierarchy shared across the package."""


class ImpactNormError(Exception):
    """Base class for all package errors."""


# ingest
class FileMissing(ImpactNormError):
    def __init__(self, path):
        super().__init__(f"input file not found: {path}")
        self.path = path


class SchemaMismatch(ImpactNormError):
    pass


class IntegrityError(ImpactNormError):
    def __init__(self, message, dangling_id=None):
        super().__init__(message)
        self.dangling_id = dangling_id


class EmptySubset(ImpactNormError):
    pass


# stratify
class MalformedCode(ImpactNormError, ValueError):
    pass


# mhq
class MhqError(ImpactNormError):
    """Raised when the pooled quotient cannot be computed."""

    status = "error"

    def __init__(self, message, group=None, metric=None):
        if group is not None or metric is not None:
            message = f"{message} (group={group}, metric={metric})"
        super().__init__(message)
        self.group = group
        self.metric = metric


class NoInformativeStrata(MhqError):
    status = "no-informative-strata"


class DegenerateDenominator(MhqError):
    status = "degenerate-denominator"


# assess
class ProfileSumViolation(ImpactNormError, ValueError):
    pass


class LengthMismatch(ImpactNormError, ValueError):
    pass


class ConstantInput(ImpactNormError, ValueError):
    pass


class TooFewUnits(ImpactNormError, ValueError):
    status = "too-few-units"


# meta
class OutOfRange(ImpactNormError, ValueError):
    pass


class EmptyInput(ImpactNormError, ValueError):
    pass


# synth
class InvalidConfig(ImpactNormError, ValueError):
    pass
