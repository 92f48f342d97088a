"""Exception types raised by knncp."""


class KnnCPError(Exception):
    """Base class for all library errors."""


class DataError(KnnCPError, ValueError):
    """Malformed or inconsistent input data."""


class ConfigurationError(KnnCPError, ValueError):
    """Invalid predictor, measure or experiment configuration."""
