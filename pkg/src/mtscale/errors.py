"""Exception hierarchy. Transport errors are retryable; configuration and
input errors are not."""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for all harness errors."""


class ConfigurationError(HarnessError):
    """Bad config, missing catalog entry, unusable endpoint (HTTP 4xx)."""


class TransportError(HarnessError):
    """Network-level failure talking to an external service; retryable."""


class InputError(HarnessError):
    """Caller violated an operation precondition (empty text, bad shape)."""


class IngestionError(HarnessError):
    """Dataset or prompt file failed validation."""


class StoreError(HarnessError):
    """Run-store failure (missing run, IO trouble)."""


class StoreCorruptionError(StoreError):
    """A persisted line failed to parse.

    Carries the offending path and 1-based line number so analytics can skip
    the trace and name the corruption in their report.
    """

    def __init__(self, path: str, line_number: int, reason: str):
        super().__init__(f"{path}:{line_number}: {reason}")
        self.path = path
        self.line_number = line_number
