"""Shared exception types."""


class CounterreactError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(CounterreactError):
    """A classifier spec, config file, or run setup is invalid."""


class DumpError(CounterreactError):
    """A comment dump is structurally unusable (duplicate ids, cycles)."""


class InconsistencyError(CounterreactError):
    """Caller-supplied ids or artifacts disagree with the tree/corpus."""


class TransportError(CounterreactError):
    """A remote classifier call failed after all retries."""


class ProtocolError(CounterreactError):
    """A remote classifier returned a malformed or mismatched response."""
