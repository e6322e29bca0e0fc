"""
Abstract base class for click-record formats.

This module defines the RecordFormat interface that every on-disk format of
the click export implements.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Iterable, Iterator

from scripts.qkd.protocol import ClickRow

# Column order of the click export
CLICK_COLUMNS = ("pulse_index", "time_ns", "bin", "port", "alice_bit", "bob_bit", "flags")


class RecordFormat(ABC):
    """Abstract base class for reading and writing click exports.

    Implementations must round-trip every ClickRow field exactly, including
    the float timestamps and the unassigned (None) fields.
    """

    @property
    @abstractmethod
    def format_name(self) -> str:
        """Return the format name (e.g., 'csv', 'parquet')."""
        pass

    @property
    @abstractmethod
    def supported_extensions(self) -> list[str]:
        """Return supported file extensions (e.g., ['.csv'])."""
        pass

    @abstractmethod
    def write(self, filename: str, rows: Iterable[ClickRow]) -> int:
        """Write rows to ``filename``, replacing it.

        Returns:
            Number of rows written.
        """
        pass

    @abstractmethod
    def load(self, filename: str) -> Iterator[ClickRow]:
        """Lazily read rows back.

        Raises:
            FileNotFoundError: If the file does not exist.
            ValueError: If the file does not follow the click layout.
        """
        pass

    def load_all(self, filename: str, max_records: int | None = None) -> list[ClickRow]:
        """Read all rows (or the first ``max_records``) into memory."""
        rows: list[ClickRow] = []
        for i, row in enumerate(self.load(filename)):
            if max_records is not None and i >= max_records:
                break
            rows.append(row)
        return rows

    def get_record_count(self, filename: str) -> int:
        return sum(1 for _ in self.load(filename))
