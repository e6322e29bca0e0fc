"""
Parquet layout of the click export.

Same columns as the CSV line format, typed by CLICK_SCHEMA; unassigned
fields are nulls.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import pyarrow as pa
import pyarrow.parquet as pq

from scripts.data_formats.base import CLICK_COLUMNS, RecordFormat
from scripts.data_formats.schema import CLICK_SCHEMA
from scripts.qkd.protocol import ClickRow


def rows_to_table(rows: Iterable[ClickRow]) -> pa.Table:
    rows = list(rows)
    columns = {
        "pulse_index": [r.pulse_index for r in rows],
        "time_ns": [r.time_ns for r in rows],
        "bin": [r.bin_index for r in rows],
        "port": [r.port for r in rows],
        "alice_bit": [r.alice_bit for r in rows],
        "bob_bit": [r.bob_bit for r in rows],
        "flags": [r.flags for r in rows],
    }
    return pa.Table.from_pydict(columns, schema=CLICK_SCHEMA)


class ClickParquetFormat(RecordFormat):
    """Click export as a Parquet file.

    Attributes:
        format_name: Returns 'parquet'.
        supported_extensions: Returns ['.parquet', '.pq'].
    """

    @property
    def format_name(self) -> str:
        return "parquet"

    @property
    def supported_extensions(self) -> list[str]:
        return [".parquet", ".pq"]

    def write(self, filename: str, rows: Iterable[ClickRow]) -> int:
        table = rows_to_table(rows)
        pq.write_table(table, filename)
        return table.num_rows

    def load(self, filename: str) -> Iterator[ClickRow]:
        """Read a click Parquet file batch by batch.

        Raises:
            FileNotFoundError: If the file does not exist.
            ValueError: If the columns differ from the click layout.
        """
        parquet_file = pq.ParquetFile(filename)
        names = tuple(parquet_file.schema_arrow.names)
        if names != CLICK_COLUMNS:
            raise ValueError(f"'{filename}' is not a click export (columns {names!r})")
        for batch in parquet_file.iter_batches():
            for r in batch.to_pylist():
                yield ClickRow(
                    pulse_index=r["pulse_index"],
                    time_ns=r["time_ns"],
                    bin_index=r["bin"],
                    port=r["port"],
                    alice_bit=r["alice_bit"],
                    bob_bit=r["bob_bit"],
                    flags=r["flags"],
                )

    def get_record_count(self, filename: str) -> int:
        return pq.ParquetFile(filename).metadata.num_rows
