"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 1, DataError (and plain
I/O errors) -> 2, ProviderError -> 3.
"""


class GranolaError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GranolaError):
    """Invalid or incomplete configuration."""


class TemplateError(ConfigError):
    """A prompt template was rendered without a required slot."""

    def __init__(self, placeholder: str):
        super().__init__(f"missing template slot: {placeholder!r}")
        self.placeholder = placeholder


class DataError(GranolaError):
    """Problems with datasets, predictions, or derived records."""


class DatasetParseError(DataError):
    """A dataset or predictions line could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ValidationError(DataError):
    """A record violates a schema invariant; names the offending field."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class EvaluationError(DataError):
    """Predictions cannot be evaluated against the given examples."""


class ExtractionError(DataError):
    """A question does not match its relation template."""


class DisambiguationError(DataError):
    """Entity disambiguation received no candidates."""


class LevelParseError(DataError):
    """LLM output for multi-granularity answers could not be parsed."""


class ProviderError(GranolaError):
    """Base class for LLM / knowledge-graph provider failures."""


class TransportError(ProviderError):
    """Transient network or server failure; safe to retry."""


class ProviderRefusal(ProviderError):
    """The provider declined the request; not retryable."""


class MockScriptError(ProviderError):
    """A scripted mock provider has no entry for the given prompt."""
