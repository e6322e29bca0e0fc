"""
Exception hierarchy for the DPS-QKD simulator.

Every error raised on purpose by the library derives from QkdSimError so the
CLI can map it to an exit code.
"""

from __future__ import annotations


class QkdSimError(RuntimeError):
    """Base class for simulator errors."""


class ConfigurationError(QkdSimError, ValueError):
    """Raised when a configuration value is missing, malformed or inconsistent.

    Attributes:
        field: Dotted path of the offending field (e.g. ``"detector.hold_off"``),
            or None when the problem spans several fields.
    """

    def __init__(self, message: str, field: str | None = None) -> None:
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class DomainError(QkdSimError, ValueError):
    """Raised when an argument lies outside an operation's domain."""


class UndefinedStatisticError(QkdSimError, ZeroDivisionError):
    """Raised when a statistic has no data to be computed from (e.g. QBER of zero counts)."""


class EmptyResultError(QkdSimError):
    """Raised when a run produced nothing usable (e.g. zero sifted bits)."""
