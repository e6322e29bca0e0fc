"""
CSV line format of the click export.

One header line, then one line per click:

    pulse_index,time_ns,bin,port,alice_bit,bob_bit,flags

Unassigned or unsifted fields are empty. Timestamps are written with
repr() so reading a file back reproduces the floats bit for bit.
"""

from __future__ import annotations

import csv
from typing import Iterable, Iterator

from scripts.data_formats.base import CLICK_COLUMNS, RecordFormat
from scripts.qkd.protocol import ClickRow


def _opt_int(value: str) -> int | None:
    return int(value) if value != "" else None


def _fmt(value: int | None) -> str:
    return "" if value is None else str(value)


def row_to_fields(row: ClickRow) -> list[str]:
    return [
        str(row.pulse_index),
        repr(float(row.time_ns)),
        _fmt(row.bin_index),
        _fmt(row.port),
        _fmt(row.alice_bit),
        _fmt(row.bob_bit),
        row.flags,
    ]


def fields_to_row(fields: list[str], line_no: int) -> ClickRow:
    if len(fields) != len(CLICK_COLUMNS):
        raise ValueError(f"line {line_no}: expected {len(CLICK_COLUMNS)} fields, got {len(fields)}")
    try:
        return ClickRow(
            pulse_index=int(fields[0]),
            time_ns=float(fields[1]),
            bin_index=_opt_int(fields[2]),
            port=_opt_int(fields[3]),
            alice_bit=_opt_int(fields[4]),
            bob_bit=_opt_int(fields[5]),
            flags=fields[6],
        )
    except ValueError as e:
        raise ValueError(f"line {line_no}: {e}") from e


class ClickCSVFormat(RecordFormat):
    """Click export as comma-separated lines.

    Attributes:
        format_name: Returns 'csv'.
        supported_extensions: Returns ['.csv'].
    """

    @property
    def format_name(self) -> str:
        return "csv"

    @property
    def supported_extensions(self) -> list[str]:
        return [".csv"]

    def write(self, filename: str, rows: Iterable[ClickRow]) -> int:
        count = 0
        with open(filename, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CLICK_COLUMNS)
            for row in rows:
                writer.writerow(row_to_fields(row))
                count += 1
        return count

    def load(self, filename: str) -> Iterator[ClickRow]:
        """Lazily read a click CSV.

        Raises:
            FileNotFoundError: If the file does not exist.
            ValueError: If the header or a line is malformed.
        """
        with open(filename, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or tuple(header) != CLICK_COLUMNS:
                raise ValueError(f"'{filename}' is not a click export (header {header!r})")
            for line_no, fields in enumerate(reader, start=2):
                if not fields:
                    continue
                yield fields_to_row(fields, line_no)
