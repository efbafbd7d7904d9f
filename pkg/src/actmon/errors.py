"""Exception and warning types shared across the toolkit."""


class ActmonError(Exception):
    """Base class for all toolkit errors."""


class ParseError(ActmonError):
    """A trace or model file contains a malformed record."""


class SchemaError(ActmonError):
    """A record is well-formed but violates the declared schema."""


class InvalidFractions(ActmonError):
    """Split fractions are not positive reals summing to one."""


class DimensionMismatch(ActmonError):
    """Vector or matrix shapes do not agree."""


class TooFewSamples(ActmonError):
    """An estimator needs more samples than were provided."""


class TooFewDistinctPoints(ActmonError):
    """K-Means requires at least k distinct input vectors."""


class NotPositiveDefinite(ActmonError):
    """Covariance factorization failed (only possible with ridge = 0)."""


class MissingLayer(ActmonError):
    """A sample or trace set lacks the monitored layer."""


class EmptyCalibration(ActmonError):
    """Threshold calibration received no samples."""


class DivergedError(ActmonError):
    """Training loss became non-finite."""


class UnsupportedLayer(ActmonError):
    """The requested layer index is not a hidden layer of the network."""


class OneClassOnly(ActmonError):
    """Binary training data contains a single label value."""


class MissingNet(ActmonError):
    """No scoring network is available for a class."""


class EmptyClassInputs(ActmonError):
    """A class has no inputs where the operation requires some."""


class EmptyCategory(ActmonError):
    """An evaluation category contains no samples."""


class InvalidParameter(ActmonError):
    """A perturbation or config parameter is outside its documented range."""


class MonitorWarning(UserWarning):
    """Non-fatal conditions: degenerate classes, dropped categories."""
