"""
Data formats module for simulator output.

This module provides a unified interface for writing and reading click
exports (CSV line format or Parquet) and the column tables produced by
sweeps and reports.

Usage:
    from scripts.data_formats import get_format

    fmt = get_format("session.csv")
    fmt.write("session.csv", export_rows(record))
    for row in fmt.load("session.csv"):
        print(row.pulse_index, row.flags)
"""

from scripts.data_formats.base import CLICK_COLUMNS, RecordFormat
from scripts.data_formats.click_csv import ClickCSVFormat
from scripts.data_formats.click_parquet import ClickParquetFormat
from scripts.data_formats.format_detector import (
    EXTENSION_MAP,
    SUPPORTED_FORMATS,
    detect_format,
    get_format,
    get_format_for_name,
)
from scripts.data_formats.schema import (
    ATTACK_REPORT_SCHEMA,
    CLICK_SCHEMA,
    FIT_SCHEMA,
    SIFTED_KEY_SCHEMA,
    sweep_schema,
)
from scripts.data_formats.tables import build_table, read_table, table_to_csv_text, write_table

__all__ = [
    "RecordFormat",
    "CLICK_COLUMNS",
    # Format detection
    "detect_format",
    "get_format",
    "get_format_for_name",
    "EXTENSION_MAP",
    "SUPPORTED_FORMATS",
    # Formats
    "ClickCSVFormat",
    "ClickParquetFormat",
    # Tables
    "CLICK_SCHEMA",
    "SIFTED_KEY_SCHEMA",
    "ATTACK_REPORT_SCHEMA",
    "FIT_SCHEMA",
    "sweep_schema",
    "build_table",
    "write_table",
    "read_table",
    "table_to_csv_text",
]
