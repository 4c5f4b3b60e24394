"""Exception types shared across the package."""


class StratliftError(Exception):
    """Base class for all package errors."""


class SchemaError(StratliftError):
    """Input file is missing required columns or has an unusable header."""


class ParseError(StratliftError):
    """A cell could not be parsed; message names the offending row."""


class ValidationError(StratliftError):
    """Parsed data violates a semantic rule (duplicate ids, negative outcomes, ...)."""


class IdentificationError(StratliftError):
    """The requested model is not identified from this dataset."""


class SingularDesignError(StratliftError):
    """A least-squares design matrix is rank deficient (typically an empty stratum cell)."""
