"""Exception hierarchy shared by all pipeline stages.

Every error carries a short category tag that the CLI prefixes to its exit
message, so scripted callers can grep failures by kind.
"""

from __future__ import annotations


class ReidflowError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class ParameterError(ReidflowError):
    """A parameter is out of range or incompatible with the data size."""

    category = "parameter"


class NotFoundError(ReidflowError):
    """A referenced identity is absent from the set being queried."""

    category = "not-found"


class InputError(ReidflowError):
    """Malformed input data (files, records, duplicate identities)."""

    category = "input"


class ValidationError(ReidflowError):
    """Inconsistent model state: missing embeddings, bad dimensions."""

    category = "validation"


class ConfigError(ReidflowError):
    """Bad configuration file or configuration value."""

    category = "config"


class EvaluationError(ReidflowError):
    """Evaluation cannot proceed, e.g. a true match is missing."""

    category = "evaluation"
