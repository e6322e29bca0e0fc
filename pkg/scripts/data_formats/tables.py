"""
Writers for column tables (sweeps, sifted keys, attack reports) via PyArrow.
"""

from __future__ import annotations

from typing import Any, Mapping, Sequence

import pyarrow as pa
import pyarrow.csv as pacsv
import pyarrow.parquet as pq

from scripts.data_formats.format_detector import detect_format


def build_table(rows: Sequence[Mapping[str, Any]], schema: pa.Schema) -> pa.Table:
    """Build a table with ``schema``'s column order; NaN floats stay NaN."""
    columns = {name: [row[name] for row in rows] for name in schema.names}
    return pa.Table.from_pydict(columns, schema=schema)


def write_table(rows: Sequence[Mapping[str, Any]], schema: pa.Schema, filename: str) -> None:
    """Write rows as CSV or Parquet depending on ``filename``'s extension."""
    table = build_table(rows, schema)
    if detect_format(filename) == "parquet":
        pq.write_table(table, filename)
    else:
        pacsv.write_csv(table, filename)


def table_to_csv_text(rows: Sequence[Mapping[str, Any]], schema: pa.Schema) -> str:
    sink = pa.BufferOutputStream()
    pacsv.write_csv(build_table(rows, schema), sink)
    return sink.getvalue().to_pybytes().decode("utf-8")


def read_table(filename: str) -> pa.Table:
    if detect_format(filename) == "parquet":
        return pq.read_table(filename)
    return pacsv.read_csv(filename)
