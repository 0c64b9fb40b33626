"""Shared exception types for ingestion, labeling and model contracts."""


class SchemaError(ValueError):
    """An input file is missing required columns or is structurally unreadable."""


class DataError(ValueError):
    """An input file parsed but its content violates a data invariant."""


class UnsupportedRateError(ValueError):
    """A frame-rate conversion was requested that the resampler cannot do."""


class LabelingError(ValueError):
    """A maneuver label was requested on a window without full coverage."""


class ContractViolation(ValueError):
    """A caller handed an operation arguments outside its stated contract."""
