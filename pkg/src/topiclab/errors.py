"""Exception types shared across the pipeline."""


class TopiclabError(Exception):
    """Base class for all pipeline errors."""


class ConfigurationError(TopiclabError):
    """Invalid configuration: missing columns, unresolvable paths, bad params."""


class ParameterError(TopiclabError):
    """Algorithm parameters incompatible with the data (e.g. k >= n)."""


class EmptySplitError(TopiclabError):
    """A corpus filter matched no documents."""


class EmbeddingFormatError(TopiclabError):
    """Corrupt or inconsistent embedding file."""


class ProviderError(TopiclabError):
    """An embedding provider failed or violated its contract."""


class NotScorableError(TopiclabError):
    """A labeling cannot be scored (fewer than 2 valid clusters)."""


class UndefinedMetricError(TopiclabError):
    """A coherence metric is undefined for the given inputs."""


class EmptySelectionError(TopiclabError):
    """No sweep record satisfies the selection rule."""


class InvalidTrialError(TopiclabError):
    """An LLM response could not be parsed into a score."""


class TransportError(TopiclabError):
    """The LLM transport failed after retries."""
