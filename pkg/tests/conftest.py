"""Pytest configuration and shared fixtures for the DPS-QKD simulator tests."""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from scripts.qkd.devices import ChannelConfig, MultiplexConfig, SourceConfig, SpdConfig
from scripts.qkd.protocol import SessionConfig, SessionRecord, ideal_config
from scripts.qkd.states import pattern_bits_table, pattern_index

REPO_ROOT = Path(__file__).parent.parent
CONFIGS_DIR = REPO_ROOT / "configs"


@pytest.fixture
def configs_dir() -> Path:
    """Return path to the shipped YAML configurations."""
    return CONFIGS_DIR


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a seeded generator for tests that draw directly."""
    return np.random.default_rng(12345)


@pytest.fixture
def source() -> SourceConfig:
    return SourceConfig()


@pytest.fixture
def multiplex() -> MultiplexConfig:
    return MultiplexConfig()


@pytest.fixture
def quiet_spd() -> SpdConfig:
    """Return a perfect free-running detector: eta = 1, no noise, no dead time, no jitter."""
    return SpdConfig(
        efficiency=1.0,
        dark_count_rate=0.0,
        afterpulse_prob=0.0,
        hold_off=0.0,
        jitter_sigma=0.0,
    )


@pytest.fixture
def ideal_session() -> Callable[..., SessionConfig]:
    """Return a factory for noiseless, loss-free sessions; keyword arguments go to SessionConfig."""

    def factory(**overrides) -> SessionConfig:
        return ideal_config(replace(SessionConfig(n_pulses=50_000, seed=3), **overrides), lossless=True)

    return factory


@pytest.fixture
def lossless_channel() -> ChannelConfig:
    return ChannelConfig(length_km=0.0, attenuation_db_per_km=0.0, insertion_loss_db=0.0)


def _make_record(
    cfg: SessionConfig,
    pulse_bits: list[tuple[int, ...]],
    clicks: list[tuple[float, int, int]],
) -> SessionRecord:
    """Build a SessionRecord by hand.

    Args:
        cfg: Configuration the record claims to come from.
        pulse_bits: Differential bits Alice sent on each pulse.
        clicks: (time in seconds, bin, port) per click, sorted by time; pass
            bin = port = -1 for an unassigned click.
    """
    n_bins = cfg.source.n_bins
    indices = np.array([pattern_index(b) for b in pulse_bits], dtype=np.int64)
    times = np.array([c[0] for c in clicks], dtype=float)
    return SessionRecord(
        config=cfg,
        pattern_indices=indices,
        alice_bits=pattern_bits_table(n_bins)[indices],
        times=times,
        click_pulses=np.floor(times * cfg.source.rep_rate).astype(np.int64),
        click_bins=np.array([c[1] for c in clicks], dtype=np.int64),
        click_ports=np.array([c[2] for c in clicks], dtype=np.int64),
        origin_codes=np.zeros(len(clicks), dtype=np.int8),
    )


@pytest.fixture
def record_builder() -> Callable[..., SessionRecord]:
    """Return the hand-made SessionRecord builder."""
    return _make_record
