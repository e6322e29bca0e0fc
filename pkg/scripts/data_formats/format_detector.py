"""
Format detection utilities for click exports.

This module provides functions to detect file formats and get the matching
RecordFormat.
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from scripts.data_formats.base import RecordFormat


# Mapping of file extensions to format names
EXTENSION_MAP: dict[str, str] = {
    ".csv": "csv",
    ".parquet": "parquet",
    ".pq": "parquet",
}

SUPPORTED_FORMATS = frozenset(["csv", "parquet"])


def detect_format(filename: str) -> str:
    """Detect file format from extension or content.

    Args:
        filename: Path to the file.

    Returns:
        Format name: "csv" or "parquet".

    Raises:
        ValueError: If the format cannot be determined.

    Examples:
        >>> detect_format("session.csv")
        'csv'
        >>> detect_format("session.pq")
        'parquet'
    """
    extension = Path(filename).suffix.lower()
    if extension in EXTENSION_MAP:
        return EXTENSION_MAP[extension]

    path = Path(filename)
    if path.exists():
        try:
            with open(filename, "rb") as f:
                head = f.read(64)
        except OSError:
            head = b""
        if head.startswith(b"PAR1"):
            return "parquet"
        if head.startswith(b"pulse_index,"):
            return "csv"

    raise ValueError(
        f"Cannot determine format for '{filename}'. "
        f"Supported extensions: {', '.join(sorted(EXTENSION_MAP.keys()))}"
    )


def get_format_for_name(format_name: str) -> "RecordFormat":
    """Return the RecordFormat registered under ``format_name``.

    Raises:
        ValueError: If the format name is not supported.
    """
    # Imported here to avoid circular imports
    from scripts.data_formats.click_csv import ClickCSVFormat
    from scripts.data_formats.click_parquet import ClickParquetFormat

    if format_name not in SUPPORTED_FORMATS:
        raise ValueError(
            f"Unsupported format '{format_name}'. "
            f"Supported formats: {', '.join(sorted(SUPPORTED_FORMATS))}"
        )
    formats: dict[str, RecordFormat] = {
        "csv": ClickCSVFormat(),
        "parquet": ClickParquetFormat(),
    }
    return formats[format_name]


def get_format(filename: str) -> "RecordFormat":
    """Return the RecordFormat for a file, detected from its name or content."""
    return get_format_for_name(detect_format(filename))
