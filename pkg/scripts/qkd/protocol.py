"""
End-to-end DPS-QKD session.

A session draws Alice's phase patterns and photon numbers, sends the photons
through the channel (and optionally an eavesdropper), decodes them in Bob's
DLI, multiplexes both ports onto one gated detector and returns the resulting
timestamp stream. Sifting then demultiplexes every timestamp, applies the
temporal guard band, drops edge-bin clicks and pairs the remaining clicks with
Alice's differential bits.

Usage:
    from scripts.qkd.protocol import SessionConfig, run_session, sift

    record = run_session(SessionConfig(n_pulses=200_000, seed=7))
    key = sift(record)
    print(len(key), key.qber())
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from functools import cached_property
from typing import Sequence

import numpy as np

from scripts.qkd.attacks import BsAttackConfig, IrAttackConfig, bs_attack_apply, ir_attack_pulses
from scripts.qkd.devices import (
    ORIGIN_CODES,
    ORIGINS_BY_CODE,
    ChannelConfig,
    ClickOrigin,
    MultiplexConfig,
    SourceConfig,
    SpdConfig,
    TIE_TOLERANCE,
    TimestampRecord,
    check_timing,
    demultiplex_many,
    detect_stream,
    leak_mean_photons,
    photon_counts,
    transmittance,
)
from scripts.qkd.errors import ConfigurationError, DomainError, UndefinedStatisticError
from scripts.qkd.states import (
    PhasePattern,
    distribution_table,
    pattern_bits_table,
    pattern_index,
    sample_detections,
)
from scripts.qkd.streams import session_streams

logger = logging.getLogger(__name__)

AttackConfig = IrAttackConfig | BsAttackConfig


@dataclass(frozen=True)
class GuardBandPolicy:
    """Temporal filter around bin boundaries.

    Attributes:
        guard_time: Total excluded width g per boundary (g/2 on each side), seconds.
    """

    guard_time: float = 0.0

    def __post_init__(self) -> None:
        if self.guard_time < 0:
            raise ConfigurationError("must be >= 0", "session.guard_time")

    def check(self, bin_width: float) -> None:
        """Raise ConfigurationError unless g <= bin_width / 2."""
        if self.guard_time > bin_width / 2:
            raise ConfigurationError(
                f"guard time {self.guard_time:.3e} s exceeds half a bin ({bin_width / 2:.3e} s)",
                "session.guard_time",
            )


@dataclass(frozen=True)
class SessionConfig:
    """Everything needed to reproduce one simulated run.

    Attributes:
        source: Weak coherent time-bin source.
        channel: Fibre link.
        dli_visibility: Interference visibility of Bob's DLI.
        spd: Detector.
        multiplex: Port multiplexing fibre delay and coupler.
        n_pulses: Number of pulses Alice sends.
        seed: Master seed of all random streams.
        attack: Optional eavesdropper.
        guard: Temporal guard band used when sifting.
        fixed_pattern: Differential bits sent on every pulse instead of random ones.
    """

    source: SourceConfig = field(default_factory=SourceConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    dli_visibility: float = 0.92
    spd: SpdConfig = field(default_factory=SpdConfig)
    multiplex: MultiplexConfig = field(default_factory=MultiplexConfig)
    n_pulses: int = 1_000_000
    seed: int = 42
    attack: AttackConfig | None = None
    guard: GuardBandPolicy = field(default_factory=GuardBandPolicy)
    fixed_pattern: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_pulses < 1:
            raise ConfigurationError("must be >= 1", "session.n_pulses")
        if not 0.0 <= self.dli_visibility <= 1.0:
            raise ConfigurationError("must lie in [0, 1]", "dli.visibility")
        check_timing(self.source, self.multiplex, self.spd)
        self.guard.check(self.source.bin_width)
        if self.fixed_pattern is not None:
            bits = tuple(int(b) for b in self.fixed_pattern)
            if len(bits) != self.source.n_bins - 1 or any(b not in (0, 1) for b in bits):
                raise ConfigurationError(
                    f"needs {self.source.n_bins - 1} differential bits, got {self.fixed_pattern!r}",
                    "session.fixed_pattern",
                )
            object.__setattr__(self, "fixed_pattern", bits)
        if self.attack is not None and not isinstance(self.attack, (IrAttackConfig, BsAttackConfig)):
            raise ConfigurationError(f"unknown attack descriptor {self.attack!r}", "attack")

    @property
    def duration(self) -> float:
        return self.n_pulses * self.source.period


def ideal_config(cfg: SessionConfig, lossless: bool = False) -> SessionConfig:
    """Return ``cfg`` with a perfect DLI, a noiseless detector and no modulator artefacts.

    With ``lossless`` the fibre, Bob's optics and the coupler are loss-free too.
    """
    if lossless:
        cfg = replace(
            cfg,
            channel=ChannelConfig(length_km=0.0, attenuation_db_per_km=0.0, insertion_loss_db=0.0),
            multiplex=replace(cfg.multiplex, coupler_loss_db=0.0),
        )
    return replace(
        cfg,
        dli_visibility=1.0,
        source=replace(cfg.source, extinction_ratio_db=math.inf, rise_time=0.0),
        spd=replace(
            cfg.spd,
            efficiency=1.0,
            dark_count_rate=0.0,
            afterpulse_prob=0.0,
            hold_off=0.0,
            jitter_sigma=0.0,
        ),
    )


def with_n_bins(cfg: SessionConfig, n_bins: int) -> SessionConfig:
    """Return ``cfg`` with N bins per pulse, stretching the timing only where N no longer fits.

    The port delay grows to (N+2) bin widths, the pulse period to one bin
    beyond both port images, and the gate to cover both images.
    """
    src = replace(cfg.source, n_bins=n_bins)
    mux, spd = cfg.multiplex, cfg.spd
    image = (n_bins + 1) * src.bin_width
    if mux.port_delay <= image:
        mux = replace(mux, port_delay=image + src.bin_width)
    if src.period <= image + mux.port_delay:
        src = replace(src, rep_rate=1.0 / (image + mux.port_delay + src.bin_width))
    needed_gate = min(src.period, mux.port_delay + image + src.bin_width)
    if spd.gate_delay == 0 and spd.gate_width < needed_gate:
        spd = replace(spd, gate_width=needed_gate)
    if (src.rep_rate, mux, spd) != (cfg.source.rep_rate, cfg.multiplex, cfg.spd):
        logger.warning(
            "N=%d: using port delay %.3e s, rep rate %.4e Hz, gate %.3e s",
            n_bins,
            mux.port_delay,
            src.rep_rate,
            spd.gate_width,
        )
    fixed = cfg.fixed_pattern if cfg.fixed_pattern and len(cfg.fixed_pattern) == n_bins - 1 else None
    return replace(cfg, source=src, multiplex=mux, spd=spd, fixed_pattern=fixed)


class ClickStatus(IntEnum):
    """Fate of one click during sifting."""

    SIFTED = 0
    EDGE = 1
    GUARD = 2
    UNASSIGNED = 3


@dataclass(frozen=True)
class DiscardLog:
    """Sifting accounting: clicks = sifted + edge + guard + unassigned."""

    unassigned: int = 0
    edge: int = 0
    guard: int = 0
    multi_click_pulses: int = 0

    @property
    def total(self) -> int:
        return self.unassigned + self.edge + self.guard


@dataclass(frozen=True, eq=False)
class SessionRecord:
    """Alice's side of a run plus Bob's timestamp stream.

    Attributes:
        config: Configuration the run was produced with.
        pattern_indices: Index (see states.all_patterns) of the pattern sent on each pulse.
        alice_bits: (n_pulses, N-1) differential key bits.
        times: Recorded click times in seconds, sorted.
        click_pulses: Pulse index derived from each timestamp.
        click_bins: Demultiplexed output bin of each click, -1 when unassigned.
        click_ports: Demultiplexed port of each click, -1 when unassigned.
        origin_codes: ClickOrigin code of each click.
    """

    config: SessionConfig
    pattern_indices: np.ndarray
    alice_bits: np.ndarray
    times: np.ndarray
    click_pulses: np.ndarray
    click_bins: np.ndarray
    click_ports: np.ndarray
    origin_codes: np.ndarray

    @property
    def n_pulses(self) -> int:
        return int(self.pattern_indices.size)

    @property
    def n_clicks(self) -> int:
        return int(self.times.size)

    def pattern(self, pulse: int) -> PhasePattern:
        """Return the phase pattern Alice sent on ``pulse``."""
        return PhasePattern.from_bits(self.alice_bits[pulse].tolist())

    @property
    def alice_patterns(self) -> list[PhasePattern]:
        return [self.pattern(i) for i in range(self.n_pulses)]

    @cached_property
    def timestamps(self) -> list[TimestampRecord]:
        records = []
        for t, p, k, port, o in zip(
            self.times, self.click_pulses, self.click_bins, self.click_ports, self.origin_codes
        ):
            assigned = k >= 0
            records.append(
                TimestampRecord(
                    float(t),
                    int(p),
                    port=int(port) if assigned else None,
                    bin_index=int(k) if assigned else None,
                    origin=ORIGINS_BY_CODE[o],
                )
            )
        return records

    @cached_property
    def discard_log(self) -> DiscardLog:
        return sift(self).discards


@dataclass(frozen=True, eq=False)
class SiftedKey:
    """Sifted bit pairs, one per kept click.

    Attributes:
        pulse_indices: Pulse of each pair.
        diff_indices: Difference index i in 1..N-1.
        bob_bits: Bob's bit (the click's port).
        alice_bits: Alice's bit for the same difference.
        discards: Accounting of the clicks that did not become bits.
        n_clicks: Clicks considered.
    """

    pulse_indices: np.ndarray
    diff_indices: np.ndarray
    bob_bits: np.ndarray
    alice_bits: np.ndarray
    discards: DiscardLog
    n_clicks: int

    def __len__(self) -> int:
        return int(self.bob_bits.size)

    @property
    def pairs(self) -> list[tuple[int, int, int, int]]:
        return list(
            zip(
                self.pulse_indices.tolist(),
                self.diff_indices.tolist(),
                self.bob_bits.tolist(),
                self.alice_bits.tolist(),
            )
        )

    def errors(self) -> int:
        return int(np.count_nonzero(self.bob_bits != self.alice_bits))

    def qber(self) -> float:
        """Return the bitwise mismatch fraction.

        Raises:
            UndefinedStatisticError: If the key is empty.
        """
        if len(self) == 0:
            raise UndefinedStatisticError("QBER of an empty sifted key")
        return self.errors() / len(self)


def run_session(cfg: SessionConfig) -> SessionRecord:
    """Simulate one run and return the record Bob's time tagger would produce.

    Each pulse gets a uniformly random differential pattern (or the fixed one)
    and a Poisson photon number. Photons are thinned by the channel, the
    coupler and, for a path source, the 1/N splitter; each survivor picks an
    output (bin, port) from the DLI distribution and a flat position inside
    the bin. Extinction-ratio leakage adds unmodulated photons between
    pulses. The merged arrivals then go through the gated detector.

    Args:
        cfg: Session configuration (validated on construction).

    Returns:
        SessionRecord, deterministic for a given cfg.
    """
    src, mux = cfg.source, cfg.multiplex
    n, n_bins = cfg.n_pulses, src.n_bins
    streams = session_streams(cfg.seed)
    rng_src, rng_ch = streams["source"], streams["channel"]

    bits_table = pattern_bits_table(n_bins)
    if cfg.fixed_pattern is not None:
        sent = np.full(n, pattern_index(cfg.fixed_pattern), dtype=np.int64)
    else:
        sent = rng_src.integers(0, bits_table.shape[0], n)
    alice_bits = bits_table[sent]
    counts = photon_counts(src.mean_photon_number, n, rng_src)

    channel = cfg.channel
    received = sent
    if isinstance(cfg.attack, BsAttackConfig):
        channel = bs_attack_apply(channel, cfg.attack, src).channel
    elif isinstance(cfg.attack, IrAttackConfig):
        counts, received = ir_attack_pulses(sent, counts, cfg.attack, n_bins, streams["attack"])

    survival = transmittance(channel) * mux.coupler_survival
    if src.spatial_paths:
        survival /= n_bins

    # Signal photons
    detected = rng_ch.binomial(counts, survival)
    photon_pulse = np.repeat(np.arange(n, dtype=np.int64), detected)
    table = distribution_table(n_bins, cfg.dli_visibility, src.bin_width)
    bins, ports = sample_detections(table, received[photon_pulse], rng_ch)
    position = rng_ch.random(photon_pulse.size)
    coin = rng_ch.integers(0, 2, photon_pulse.size)
    # Phase not yet settled at the start of an interference bin: outcome is a coin flip
    settling = (position * src.bin_width < src.rise_time) & (bins >= 2) & (bins <= n_bins)
    ports = np.where(settling, coin, ports)
    signal_t = (
        photon_pulse / src.rep_rate
        + (bins + position - 0.5) * src.bin_width
        + ports * mux.port_delay
    )

    # Extinction-ratio leakage between pulses
    leak_mu = leak_mean_photons(src) * survival
    if leak_mu > 0:
        leak_counts = rng_ch.poisson(leak_mu, n)
        leak_pulse = np.repeat(np.arange(n, dtype=np.int64), leak_counts)
        emission = src.pulse_duration + rng_ch.random(leak_pulse.size) * (src.period - src.pulse_duration)
        arm = rng_ch.integers(0, 2, leak_pulse.size)
        leak_port = rng_ch.integers(0, 2, leak_pulse.size)
        leak_t = (
            leak_pulse / src.rep_rate
            + src.bin_width / 2
            + emission
            + arm * src.bin_width
            + leak_port * mux.port_delay
        )
    else:
        leak_pulse = np.empty(0, dtype=np.int64)
        leak_t = np.empty(0, dtype=float)

    arrival_t = np.concatenate([signal_t, leak_t])
    arrival_p = np.concatenate([photon_pulse, leak_pulse])
    arrival_o = np.concatenate(
        [
            np.full(signal_t.size, ORIGIN_CODES[ClickOrigin.SIGNAL], dtype=np.int8),
            np.full(leak_t.size, ORIGIN_CODES[ClickOrigin.LEAK], dtype=np.int8),
        ]
    )
    order = np.argsort(arrival_t, kind="stable")

    stream = detect_stream(
        arrival_t[order],
        arrival_p[order],
        cfg.spd,
        cfg.duration,
        streams["detector"],
        origin_codes=arrival_o[order],
        gate_period=src.period,
    )
    pulses, click_bins, click_ports, assigned = demultiplex_many(stream.times, mux, src)

    logger.info(
        "session: %d pulses, %d signal + %d leak photons at the detector, %d clicks (%d unassigned)",
        n,
        signal_t.size,
        leak_t.size,
        len(stream),
        int(np.count_nonzero(~assigned)),
    )
    return SessionRecord(
        config=cfg,
        pattern_indices=sent,
        alice_bits=alice_bits,
        times=stream.times,
        click_pulses=pulses,
        click_bins=click_bins,
        click_ports=click_ports,
        origin_codes=stream.origin_codes,
    )


def guard_keep_mask(
    times: np.ndarray,
    policy: GuardBandPolicy,
    source: SourceConfig,
    multiplex: MultiplexConfig,
) -> np.ndarray:
    """Return True for timestamps outside every guard window.

    Unassigned timestamps are kept; they are accounted for separately.
    """
    times = np.asarray(times, dtype=float)
    if policy.guard_time == 0:
        return np.ones(times.size, dtype=bool)
    pulses, bins, ports, assigned = demultiplex_many(times, multiplex, source)
    centre = pulses / source.rep_rate + bins * source.bin_width + ports * multiplex.port_delay
    half_keep = source.bin_width / 2 - policy.guard_time / 2
    inside = np.abs(times - centre) <= half_keep + TIE_TOLERANCE * source.bin_width
    return inside | ~assigned


def temporal_filter(
    timestamps: Sequence[TimestampRecord],
    policy: GuardBandPolicy,
    source: SourceConfig,
    multiplex: MultiplexConfig | None = None,
) -> tuple[list[TimestampRecord], float]:
    """Drop timestamps that fall within g/2 of a bin boundary.

    Args:
        timestamps: Clicks to filter.
        policy: Guard band.
        source: Source timing (bin width, pulse period).
        multiplex: Port delay used to locate the bins of port 1.

    Returns:
        (surviving timestamps, fraction of the input discarded).
    """
    policy.check(source.bin_width)
    multiplex = multiplex or MultiplexConfig()
    if not timestamps:
        return [], 0.0
    keep = guard_keep_mask(np.array([r.time for r in timestamps]), policy, source, multiplex)
    survivors = [r for r, k in zip(timestamps, keep) if k]
    return survivors, 1.0 - len(survivors) / len(timestamps)


def _classify(record: SessionRecord, policy: GuardBandPolicy) -> tuple[np.ndarray, ...]:
    """Return per-click (status, pulses, bins, ports, alice bit or -1)."""
    cfg = record.config
    src = cfg.source
    pulses, bins, ports, assigned = demultiplex_many(record.times, cfg.multiplex, src)
    assigned &= (pulses >= 0) & (pulses < record.n_pulses)
    keep = guard_keep_mask(record.times, policy, src, cfg.multiplex)
    edge = (bins == 1) | (bins == src.n_bins + 1)

    status = np.full(record.n_clicks, ClickStatus.SIFTED, dtype=np.int8)
    status[assigned & keep & edge] = ClickStatus.EDGE
    status[assigned & ~keep] = ClickStatus.GUARD
    status[~assigned] = ClickStatus.UNASSIGNED

    alice = np.full(record.n_clicks, -1, dtype=np.int64)
    sifted = status == ClickStatus.SIFTED
    alice[sifted] = record.alice_bits[pulses[sifted], bins[sifted] - 2]
    return status, pulses, bins, ports, alice


def sift(record: SessionRecord, policy: GuardBandPolicy | None = None) -> SiftedKey:
    """Turn a timestamp stream into sifted bit pairs.

    Bob announces (pulse, difference index) for every click in an interference
    bin; the port he saw is his bit. Edge-bin, guard-band and unassigned
    clicks are counted and dropped.

    Args:
        record: Output of run_session.
        policy: Guard band; defaults to the one in the record's config.

    Returns:
        SiftedKey with exactly one pair per kept click.
    """
    policy = policy or record.config.guard
    status, pulses, bins, ports, alice = _classify(record, policy)
    sifted = status == ClickStatus.SIFTED
    key_pulses = pulses[sifted]

    multi = 0
    if key_pulses.size:
        _, per_pulse = np.unique(key_pulses, return_counts=True)
        multi = int(np.count_nonzero(per_pulse > 1))
    if multi:
        logger.info("sift: %d pulses contributed more than one sifted click", multi)

    discards = DiscardLog(
        unassigned=int(np.count_nonzero(status == ClickStatus.UNASSIGNED)),
        edge=int(np.count_nonzero(status == ClickStatus.EDGE)),
        guard=int(np.count_nonzero(status == ClickStatus.GUARD)),
        multi_click_pulses=multi,
    )
    logger.debug("sift: %d clicks -> %d bits, %s", record.n_clicks, int(sifted.sum()), discards)
    return SiftedKey(
        pulse_indices=key_pulses,
        diff_indices=bins[sifted] - 1,
        bob_bits=ports[sifted].astype(np.int64),
        alice_bits=alice[sifted],
        discards=discards,
        n_clicks=record.n_clicks,
    )


def key_window_origins(source: SourceConfig, multiplex: MultiplexConfig) -> tuple[float, float]:
    """Return (T0, T1): start of the first interference window of each port, relative to the pulse start."""
    t0 = 1.5 * source.bin_width
    return t0, t0 + multiplex.port_delay


def _difference_bits(pattern: Sequence[float]) -> list[int]:
    bits = []
    for phase in pattern:
        if phase == 0:
            bits.append(0)
        elif phase == math.pi:
            bits.append(1)
        else:
            raise ConfigurationError(f"phase difference {phase!r} is not 0 or pi", "pattern")
    return bits


def classify_counts(
    times: Sequence[float] | np.ndarray,
    pattern: Sequence[float],
    t0: float,
    t1: float,
    delta_t: float,
) -> tuple[int, int, int, int]:
    """Bucket clicks into C_pq = counts at port p while Alice's bit is q.

    Window i (0-based) of port p spans [T_p + i dT, T_p + (i+1) dT) and carries
    the i-th phase difference of ``pattern``.

    Args:
        times: Click times relative to the pulse start.
        pattern: Phase differences (0 or pi), one per interference window.
        t0: Port-0 key window origin.
        t1: Port-1 key window origin.
        delta_t: Bin width.

    Returns:
        (C00, C01, C10, C11).

    Raises:
        ConfigurationError: If the two ports' windows overlap.
    """
    bits = _difference_bits(pattern)
    span = len(bits) * delta_t
    if t1 < t0 + span:
        raise ConfigurationError(
            f"port-1 windows start at {t1:.3e} s, inside the port-0 windows ending at {t0 + span:.3e} s",
            "multiplex.port_delay",
        )
    times = np.asarray(times, dtype=float)
    counts = np.zeros((2, 2), dtype=np.int64)
    for port, origin in ((0, t0), (1, t1)):
        window = np.floor((times - origin) / delta_t).astype(np.int64)
        inside = (window >= 0) & (window < len(bits))
        keys = np.asarray(bits, dtype=np.int64)[window[inside]]
        counts[port] += np.bincount(keys, minlength=2)
    return int(counts[0, 0]), int(counts[0, 1]), int(counts[1, 0]), int(counts[1, 1])


def qber(c00: int, c01: int, c10: int, c11: int) -> float:
    """Return (C01 + C10) / (C00 + C01 + C10 + C11).

    Raises:
        DomainError: If a count is negative.
        UndefinedStatisticError: If all counts are zero.
    """
    if min(c00, c01, c10, c11) < 0:
        raise DomainError("counts must be non-negative")
    total = c00 + c01 + c10 + c11
    if total == 0:
        raise UndefinedStatisticError("QBER of zero counts")
    return (c01 + c10) / total


def fixed_pattern_counts(record: SessionRecord, policy: GuardBandPolicy | None = None) -> tuple[int, int, int, int]:
    """Apply classify_counts to a fixed-pattern session.

    Raises:
        ConfigurationError: If the session did not use a fixed pattern.
    """
    cfg = record.config
    if cfg.fixed_pattern is None:
        raise ConfigurationError("session did not use a fixed pattern", "session.fixed_pattern")
    policy = policy or cfg.guard
    src = cfg.source
    pulses = np.floor(record.times * src.rep_rate).astype(np.int64)
    keep = guard_keep_mask(record.times, policy, src, cfg.multiplex)
    keep &= (pulses >= 0) & (pulses < record.n_pulses)
    relative = record.times[keep] - pulses[keep] / src.rep_rate
    t0, t1 = key_window_origins(src, cfg.multiplex)
    phases = [math.pi * b for b in cfg.fixed_pattern]
    return classify_counts(relative, phases, t0, t1, src.bin_width)


@dataclass(frozen=True)
class ClickRow:
    """One line of the click export."""

    pulse_index: int
    time_ns: float
    bin_index: int | None
    port: int | None
    alice_bit: int | None
    bob_bit: int | None
    flags: str


def export_rows(record: SessionRecord, policy: GuardBandPolicy | None = None) -> list[ClickRow]:
    """Build one ClickRow per click; flags read ``<origin>|<status>``."""
    status, pulses, bins, ports, alice = _classify(record, policy or record.config.guard)
    rows = []
    for i in range(record.n_clicks):
        st = ClickStatus(int(status[i]))
        assigned = st != ClickStatus.UNASSIGNED
        sifted = st == ClickStatus.SIFTED
        rows.append(
            ClickRow(
                pulse_index=int(pulses[i]),
                time_ns=float(record.times[i]) * 1e9,
                bin_index=int(bins[i]) if assigned else None,
                port=int(ports[i]) if assigned else None,
                alice_bit=int(alice[i]) if sifted else None,
                bob_bit=int(ports[i]) if sifted else None,
                flags=f"{ORIGINS_BY_CODE[record.origin_codes[i]].value}|{st.name.lower()}",
            )
        )
    return rows


def session_summary(record: SessionRecord, key: SiftedKey) -> dict[str, float | int | None]:
    """Return the figures reported after a run."""
    cfg = record.config
    d = key.discards
    summary: dict[str, float | int | None] = {
        "n_pulses": record.n_pulses,
        "duration_s": cfg.duration,
        "clicks": record.n_clicks,
        "sifted_bits": len(key),
        "errors": key.errors(),
        "qber": key.qber() if len(key) else None,
        "sifted_rate_bps": len(key) / cfg.duration,
        "discarded_edge": d.edge,
        "discarded_guard": d.guard,
        "unassigned": d.unassigned,
        "multi_click_pulses": d.multi_click_pulses,
        "discard_fraction": d.guard / (d.guard + len(key) + d.edge) if (d.guard + len(key) + d.edge) else 0.0,
    }
    if cfg.fixed_pattern is not None:
        counts = fixed_pattern_counts(record)
        summary.update(zip(("c00", "c01", "c10", "c11"), counts))
        summary["window_qber"] = qber(*counts) if sum(counts) else None
    return summary
