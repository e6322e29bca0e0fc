"""
Canonical PyArrow schemas of every table the simulator writes.

Schemas are enforced on write, not inferred, so column types stay stable
across runs (an all-empty optional column is still int8).
"""

from __future__ import annotations

import pyarrow as pa

# Click export, one row per detector click
CLICK_SCHEMA = pa.schema(
    [
        pa.field("pulse_index", pa.int64(), nullable=False),
        pa.field("time_ns", pa.float64(), nullable=False),
        pa.field("bin", pa.int16()),
        pa.field("port", pa.int8()),
        pa.field("alice_bit", pa.int8()),
        pa.field("bob_bit", pa.int8()),
        pa.field("flags", pa.string(), nullable=False),
    ]
)

# Sifted key, one row per bit pair
SIFTED_KEY_SCHEMA = pa.schema(
    [
        pa.field("pulse_index", pa.int64(), nullable=False),
        pa.field("diff_index", pa.int16(), nullable=False),
        pa.field("alice_bit", pa.int8(), nullable=False),
        pa.field("bob_bit", pa.int8(), nullable=False),
    ]
)

ATTACK_REPORT_SCHEMA = pa.schema(
    [
        pa.field("n_bins", pa.int16()),
        pa.field("qber_exact", pa.float64()),
        pa.field("qber_enumerated", pa.float64()),
        pa.field("qber_mc", pa.float64()),
        pa.field("qber_mc_se", pa.float64()),
        pa.field("sifted_bits", pa.int64()),
    ]
)

FIT_SCHEMA = pa.schema(
    [
        pa.field("length_km", pa.float64()),
        pa.field("measured_bps", pa.float64()),
        pa.field("model_bps", pa.float64()),
    ]
)


def sweep_schema(columns: tuple[str, ...]) -> pa.Schema:
    """Schema of a sweep table: integer bit counts and N, doubles elsewhere."""
    ints = {"n_bins", "mc_sifted_bits"}
    return pa.schema([pa.field(c, pa.int64() if c in ints else pa.float64()) for c in columns])
