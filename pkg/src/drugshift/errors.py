"""Exception hierarchy shared across the package."""


class DrugshiftError(Exception):
    """Base class for all errors raised by this package."""


class IngestError(DrugshiftError):
    """A file could not be parsed into event records."""


class CohortError(DrugshiftError):
    """Event records violate a cohort invariant."""


class DesignError(DrugshiftError):
    """A regression design could not be assembled (e.g. no usable rows)."""


class EvaluationError(DrugshiftError):
    """A ranking metric is undefined for the given inputs."""


class SynthConfigError(DrugshiftError):
    """A synthetic-data configuration is infeasible."""
