"""
Physical-layer models: weak coherent source, fibre channel, gated single-photon
detector and the time-multiplexed single-detector readout.

Timing convention: pulse j starts at j / r_p. After Bob's DLI, output bin k of
port 0 is centred at j / r_p + k * bin_width and spans one bin width around
that centre; port 1 is the same picture delayed by the multiplex fibre delay.
The detector gate of pulse j opens at j / r_p + gate_delay for gate_width.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.stats import poisson

from scripts.qkd.errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

# Bins; a timestamp this close to a bin boundary counts as a tie (earlier bin wins)
TIE_TOLERANCE = 1e-9

# Afterpulse delays are truncated after this many gate periods
AFTERPULSE_MAX_GATES = 5


class ClickOrigin(str, Enum):
    """What physically produced a detector click."""

    SIGNAL = "signal"
    LEAK = "leak"
    DARK = "dark"
    AFTERPULSE = "afterpulse"


ORIGIN_CODES: dict[ClickOrigin, int] = {origin: i for i, origin in enumerate(ClickOrigin)}
ORIGINS_BY_CODE: tuple[ClickOrigin, ...] = tuple(ClickOrigin)


@dataclass(frozen=True)
class SourceConfig:
    """Weak coherent time-bin source.

    Attributes:
        mean_photon_number: Poisson mean mu per pulse.
        rep_rate: Pulse repetition rate r_p in pulses/s.
        n_bins: Time-bins per pulse N.
        bin_width: Bin duration in seconds (reciprocal of the DLI FSR).
        extinction_ratio_db: Intensity-modulator on/off ratio in dB.
        rise_time: Phase-modulator rise/fall time in seconds.
        spatial_paths: Use the beam-splitter path superposition source, which
            loses an extra factor N in the splitter.
    """

    mean_photon_number: float = 0.17
    rep_rate: float = 62.5e6
    n_bins: int = 3
    bin_width: float = 1e-9
    extinction_ratio_db: float = 17.0
    rise_time: float = 42e-12
    spatial_paths: bool = False

    def __post_init__(self) -> None:
        if not self.mean_photon_number > 0:
            raise ConfigurationError("must be > 0", "source.mean_photon_number")
        if not self.rep_rate > 0:
            raise ConfigurationError("must be > 0", "source.rep_rate")
        if self.n_bins < 2:
            raise ConfigurationError("must be >= 2", "source.n_bins")
        if not self.bin_width > 0:
            raise ConfigurationError("must be > 0", "source.bin_width")
        if self.extinction_ratio_db < 0:
            raise ConfigurationError("must be >= 0", "source.extinction_ratio_db")
        if not 0 <= self.rise_time < self.bin_width:
            raise ConfigurationError("must lie in [0, bin_width)", "source.rise_time")

    @property
    def period(self) -> float:
        return 1.0 / self.rep_rate

    @property
    def pulse_duration(self) -> float:
        return self.n_bins * self.bin_width


@dataclass(frozen=True)
class ChannelConfig:
    """Fibre link between Alice and Bob.

    Attributes:
        length_km: Fibre length L.
        attenuation_db_per_km: Fibre attenuation alpha.
        insertion_loss_db: Net insertion loss I_L of Bob's optics.
    """

    length_km: float = 30.0
    attenuation_db_per_km: float = 0.2
    insertion_loss_db: float = 5.0

    def __post_init__(self) -> None:
        if self.length_km < 0:
            raise ConfigurationError("must be >= 0", "channel.length_km")
        if self.attenuation_db_per_km < 0:
            raise ConfigurationError("must be >= 0", "channel.attenuation_db_per_km")
        if self.insertion_loss_db < 0:
            raise ConfigurationError("must be >= 0", "channel.insertion_loss_db")

    @property
    def total_loss_db(self) -> float:
        return self.attenuation_db_per_km * self.length_km + self.insertion_loss_db


@dataclass(frozen=True)
class SpdConfig:
    """Gated InGaAs single-photon detector.

    Attributes:
        efficiency: Detection efficiency eta.
        dark_count_rate: Dark counts per second of open gate.
        afterpulse_prob: Probability that a click triggers one afterpulse.
        hold_off: Dead time tau_H after every recorded click, in seconds.
        jitter_sigma: Gaussian timing jitter, in seconds.
        gate_width: Gate duration in seconds.
        gate_delay: Gate opening relative to the pulse start, in seconds.
        afterpulse_time_constant: Mean afterpulse delay past the hold-off.
    """

    efficiency: float = 0.1
    dark_count_rate: float = 750.0
    afterpulse_prob: float = 0.075
    hold_off: float = 10e-6
    jitter_sigma: float = 167e-12
    gate_width: float = 15e-9
    gate_delay: float = 0.0
    afterpulse_time_constant: float = 20e-9

    def __post_init__(self) -> None:
        if not 0 <= self.efficiency <= 1:
            raise ConfigurationError("must lie in [0, 1]", "detector.efficiency")
        if not 0 <= self.afterpulse_prob < 1:
            raise ConfigurationError("must lie in [0, 1)", "detector.afterpulse_prob")
        for name in (
            "dark_count_rate",
            "hold_off",
            "jitter_sigma",
            "gate_width",
            "gate_delay",
            "afterpulse_time_constant",
        ):
            if getattr(self, name) < 0:
                raise ConfigurationError("must be >= 0", f"detector.{name}")


@dataclass(frozen=True)
class MultiplexConfig:
    """Fibre delay plus 2x1 coupler merging both DLI ports onto one detector.

    Attributes:
        port_delay: Extra delay of port 1 in seconds.
        coupler_loss_db: Loss of the 2x1 combiner.
    """

    port_delay: float = 10e-9
    coupler_loss_db: float = 3.01

    def __post_init__(self) -> None:
        if not self.port_delay > 0:
            raise ConfigurationError("must be > 0", "multiplex.port_delay")
        if self.coupler_loss_db < 0:
            raise ConfigurationError("must be >= 0", "multiplex.coupler_loss_db")

    @property
    def coupler_survival(self) -> float:
        return 10.0 ** (-self.coupler_loss_db / 10.0)


@dataclass(frozen=True, slots=True)
class TimestampRecord:
    """One detector click.

    Attributes:
        time: Recorded (jittered) timestamp in seconds.
        pulse_index: Pulse the click is attributed to.
        port: Demultiplexed DLI port, None when unassigned.
        bin_index: Demultiplexed output bin (1..N+1), None when unassigned.
        origin: Physical cause, kept for diagnostics.
    """

    time: float
    pulse_index: int
    port: int | None = None
    bin_index: int | None = None
    origin: ClickOrigin = ClickOrigin.SIGNAL


@dataclass(frozen=True)
class ClickStream:
    """Columnar detector output, sorted by recorded time."""

    times: np.ndarray
    pulse_indices: np.ndarray
    origin_codes: np.ndarray

    def __len__(self) -> int:
        return int(self.times.size)

    def records(self) -> list[TimestampRecord]:
        return [
            TimestampRecord(float(t), int(p), origin=ORIGINS_BY_CODE[o])
            for t, p, o in zip(self.times, self.pulse_indices, self.origin_codes)
        ]


def check_timing(source: SourceConfig, multiplex: MultiplexConfig, spd: SpdConfig | None = None) -> None:
    """Validate that both port images of a pulse fit in one period without overlap.

    Raises:
        ConfigurationError: If the images overlap or spill into the next pulse.
    """
    image = (source.n_bins + 1) * source.bin_width
    if not multiplex.port_delay > image:
        raise ConfigurationError(
            f"port delay {multiplex.port_delay:.3e} s must exceed (N+1)*bin_width = {image:.3e} s",
            "multiplex.port_delay",
        )
    if not source.period > image + multiplex.port_delay:
        raise ConfigurationError(
            f"pulse period {source.period:.3e} s must exceed (N+1)*bin_width + port_delay "
            f"= {image + multiplex.port_delay:.3e} s",
            "source.rep_rate",
        )
    if spd is not None and spd.gate_width > source.period:
        raise ConfigurationError("gate is longer than the pulse period", "detector.gate_width")


def photon_count(mu: float, rng: np.random.Generator) -> int:
    """Draw the photon number of one weak coherent pulse."""
    if not mu > 0:
        raise DomainError(f"mean photon number must be > 0, got {mu}")
    return int(rng.poisson(mu))


def photon_counts(mu: float, n_pulses: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised photon_count for n_pulses pulses."""
    if not mu > 0:
        raise DomainError(f"mean photon number must be > 0, got {mu}")
    return rng.poisson(mu, n_pulses)


def multi_photon_fraction(mu: float) -> float:
    """Return P(k >= 2) / P(k >= 1) for a Poisson source of mean mu."""
    return float(poisson.sf(1, mu) / poisson.sf(0, mu))


def transmittance(channel: ChannelConfig) -> float:
    """Return T_L = 10^(-(alpha L + I_L) / 10)."""
    return 10.0 ** (-channel.total_loss_db / 10.0)


def leak_mean_photons(source: SourceConfig) -> float:
    """Mean photons emitted per period while the intensity modulator is off.

    The off-state intensity is 10^(-ER/10) of the on-state and lasts for the
    part of the period not covered by the N-bin wave packet.
    """
    off_time = source.period - source.pulse_duration
    if off_time <= 0:
        return 0.0
    ratio = 10.0 ** (-source.extinction_ratio_db / 10.0)
    return source.mean_photon_number * ratio * off_time / source.pulse_duration


def time_multiplex(
    bin_index: int,
    port: int,
    pulse_index: int,
    cfg: MultiplexConfig,
    source: SourceConfig,
) -> float:
    """Return the arrival time of the centre of (bin, port) for a pulse.

    The caller applies the coupler survival probability separately.
    """
    return pulse_index / source.rep_rate + bin_index * source.bin_width + port * cfg.port_delay


def _nearest_bin(x: np.ndarray) -> np.ndarray:
    # Exact half-way points resolve to the earlier bin
    return np.ceil(x - 0.5 - TIE_TOLERANCE).astype(np.int64)


def demultiplex_many(
    times: np.ndarray, cfg: MultiplexConfig, source: SourceConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised demultiplex.

    Returns:
        (pulse_indices, bins, ports, assigned) arrays; entries where
        ``assigned`` is False carry bin = port = -1.
    """
    times = np.asarray(times, dtype=float)
    pulses = np.floor(times * source.rep_rate).astype(np.int64)
    rel = times - pulses / source.rep_rate
    last_bin = source.n_bins + 1

    k0 = _nearest_bin(rel / source.bin_width)
    k1 = _nearest_bin((rel - cfg.port_delay) / source.bin_width)
    in0 = (k0 >= 1) & (k0 <= last_bin)
    in1 = (k1 >= 1) & (k1 <= last_bin) & ~in0

    bins = np.where(in0, k0, np.where(in1, k1, -1))
    ports = np.where(in0, 0, np.where(in1, 1, -1))
    assigned = in0 | in1
    return pulses, bins, ports, assigned


def demultiplex(t: float, cfg: MultiplexConfig, source: SourceConfig) -> tuple[int, int, int] | None:
    """Recover (pulse index, bin, port) from a timestamp.

    Returns:
        The triple, or None when the timestamp falls outside every window.
    """
    pulses, bins, ports, assigned = demultiplex_many(np.array([t]), cfg, source)
    if not assigned[0]:
        return None
    return int(pulses[0]), int(bins[0]), int(ports[0])


def _gate_index(t: np.ndarray | float, spd: SpdConfig, gate_period: float):
    return np.floor((np.asarray(t) - spd.gate_delay) / gate_period).astype(np.int64)


def _snap_into_gate(t: float, spd: SpdConfig, gate_period: float) -> float:
    phase = (t - spd.gate_delay) % gate_period
    if phase < spd.gate_width:
        return t
    return t + gate_period - phase


def detect_stream(
    times: np.ndarray,
    pulse_indices: np.ndarray,
    spd: SpdConfig,
    duration: float,
    rng: np.random.Generator,
    *,
    origin_codes: np.ndarray | None = None,
    gate_period: float | None = None,
) -> ClickStream:
    """Columnar detector model behind spd_detect.

    Arrivals outside their gate are lost, survivors are thinned by eta, dark
    counts are added inside the gates, then a single time-ordered pass applies
    the hold-off, the one-avalanche-per-gate rule and afterpulse generation.
    Jitter is added to the recorded clicks last.

    Args:
        times: True arrival times, sorted ascending.
        pulse_indices: Pulse index of each arrival.
        spd: Detector configuration.
        duration: Length of the run in seconds (dark counts are drawn over it).
        rng: Detector random stream.
        origin_codes: Optional ClickOrigin codes per arrival (default SIGNAL).
        gate_period: Gate repetition period; None for a free-running detector.

    Returns:
        ClickStream sorted by recorded time.

    Raises:
        DomainError: If the arrival times are not sorted.
    """
    times = np.asarray(times, dtype=float)
    pulse_indices = np.asarray(pulse_indices, dtype=np.int64)
    if times.size > 1 and np.any(np.diff(times) < 0):
        raise DomainError("arrivals must be sorted by time")
    if origin_codes is None:
        origin_codes = np.full(times.size, ORIGIN_CODES[ClickOrigin.SIGNAL], dtype=np.int8)
    gated = gate_period is not None

    survive = rng.random(times.size) < spd.efficiency
    if gated:
        phase = np.mod(times - spd.gate_delay, gate_period)
        survive &= phase < spd.gate_width
    cand_t = times[survive]
    cand_p = pulse_indices[survive]
    cand_o = np.asarray(origin_codes, dtype=np.int8)[survive]

    # Dark counts, uniform over the open gate time
    if gated:
        n_gates = int(math.ceil(duration / gate_period))
        n_dark = int(rng.poisson(spd.dark_count_rate * spd.gate_width * n_gates))
        gates = rng.integers(0, max(n_gates, 1), n_dark)
        dark_t = spd.gate_delay + gates * gate_period + rng.random(n_dark) * spd.gate_width
        dark_p = gates.astype(np.int64)
    else:
        n_dark = int(rng.poisson(spd.dark_count_rate * duration))
        dark_t = rng.random(n_dark) * duration
        dark_p = np.full(n_dark, -1, dtype=np.int64)
    if n_dark:
        cand_t = np.concatenate([cand_t, dark_t])
        cand_p = np.concatenate([cand_p, dark_p])
        cand_o = np.concatenate(
            [cand_o, np.full(n_dark, ORIGIN_CODES[ClickOrigin.DARK], dtype=np.int8)]
        )
        order = np.argsort(cand_t, kind="stable")
        cand_t, cand_p, cand_o = cand_t[order], cand_p[order], cand_o[order]

    if spd.hold_off == 0 and spd.afterpulse_prob == 0:
        if gated and cand_t.size:
            g = _gate_index(cand_t, spd, gate_period)
            first = np.concatenate([[True], g[1:] != g[:-1]])
            cand_t, cand_p, cand_o = cand_t[first], cand_p[first], cand_o[first]
        rec_t, rec_p, rec_o = cand_t, cand_p, cand_o
    else:
        rec_t, rec_p, rec_o = _merge_pass(cand_t, cand_p, cand_o, spd, rng, gate_period)

    if spd.jitter_sigma > 0 and rec_t.size:
        rec_t = rec_t + rng.normal(0.0, spd.jitter_sigma, rec_t.size)
        order = np.argsort(rec_t, kind="stable")
        rec_t, rec_p, rec_o = rec_t[order], rec_p[order], rec_o[order]

    logger.debug(
        "detector: %d arrivals, %d candidates (%d dark), %d recorded",
        times.size,
        cand_t.size,
        n_dark,
        rec_t.size,
    )
    return ClickStream(rec_t, rec_p, rec_o)


def _merge_pass(
    cand_t: np.ndarray,
    cand_p: np.ndarray,
    cand_o: np.ndarray,
    spd: SpdConfig,
    rng: np.random.Generator,
    gate_period: float | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sequential dead-time / afterpulse resolution over time-ordered candidates."""
    ap_code = ORIGIN_CODES[ClickOrigin.AFTERPULSE]
    gated = gate_period is not None
    cap = AFTERPULSE_MAX_GATES * (gate_period if gated else spd.afterpulse_time_constant)

    out_t: list[float] = []
    out_p: list[int] = []
    out_o: list[int] = []
    pending: list[tuple[float, int]] = []
    last_t = -math.inf
    last_gate: int | None = None
    i, n = 0, cand_t.size

    while i < n or pending:
        if pending and (i >= n or pending[0][0] <= cand_t[i]):
            t, pulse = heapq.heappop(pending)
            origin = ap_code
        else:
            t, pulse, origin = float(cand_t[i]), int(cand_p[i]), int(cand_o[i])
            i += 1

        if t < last_t + spd.hold_off:
            continue
        gate = int(_gate_index(t, spd, gate_period)) if gated else None
        if gated and gate == last_gate:
            continue

        out_t.append(t)
        out_p.append(pulse)
        out_o.append(origin)
        last_t, last_gate = t, gate

        if origin != ap_code and spd.afterpulse_prob > 0 and rng.random() < spd.afterpulse_prob:
            delay = 0.0
            if spd.afterpulse_time_constant > 0:
                delay = min(rng.exponential(spd.afterpulse_time_constant), cap)
            t_ap = t + spd.hold_off + delay
            if gated:
                t_ap = _snap_into_gate(t_ap, spd, gate_period)
                ap_pulse = int(_gate_index(t_ap, spd, gate_period))
                if ap_pulse == gate:
                    # Afterpulses fire in a later gate
                    t_ap += gate_period
                    ap_pulse += 1
            else:
                ap_pulse = -1
            heapq.heappush(pending, (t_ap, ap_pulse))

    return (
        np.asarray(out_t, dtype=float),
        np.asarray(out_p, dtype=np.int64),
        np.asarray(out_o, dtype=np.int8),
    )


def spd_detect(
    arrivals: Sequence[tuple[float, int]],
    spd: SpdConfig,
    duration: float,
    rng: np.random.Generator,
    *,
    gate_period: float | None = None,
) -> list[TimestampRecord]:
    """Run photon arrivals through the detector model.

    Args:
        arrivals: (true arrival time, pulse index) pairs sorted by time.
        spd: Detector configuration.
        duration: Run length in seconds.
        rng: Detector random stream.
        gate_period: Gate repetition period; None for a free-running detector.

    Returns:
        Recorded clicks sorted by time; port and bin are left unassigned.

    Raises:
        DomainError: If arrivals are not sorted.
    """
    if arrivals:
        times, pulses = zip(*arrivals)
    else:
        times, pulses = (), ()
    stream = detect_stream(
        np.asarray(times, dtype=float),
        np.asarray(pulses, dtype=np.int64),
        spd,
        duration,
        rng,
        gate_period=gate_period,
    )
    return stream.records()


@dataclass(frozen=True)
class GateContrast:
    """Count rates with the gate on and off the photon arrival time."""

    in_sync_rate: float
    out_of_sync_rate: float

    @property
    def ratio(self) -> float:
        return self.in_sync_rate / self.out_of_sync_rate if self.out_of_sync_rate else math.inf


def gate_contrast(
    source: SourceConfig,
    channel: ChannelConfig,
    spd: SpdConfig,
    n_pulses: int,
    rng: np.random.Generator,
    arrival_offset: float = 0.0,
) -> GateContrast:
    """Simulate the gate synchronisation check on attenuated pulses sent straight to the detector.

    In sync the gate is centred on ``arrival_offset``; out of sync it is moved
    half a period away so only dark counts remain.
    """
    period = source.period
    duration = n_pulses * period
    counts = rng.poisson(source.mean_photon_number * transmittance(channel), n_pulses)
    pulses = np.repeat(np.arange(n_pulses, dtype=np.int64), counts)
    times = pulses * period + arrival_offset

    in_sync = replace(spd, gate_delay=(arrival_offset - spd.gate_width / 2) % period)
    out_sync = replace(spd, gate_delay=(arrival_offset + period / 2 - spd.gate_width / 2) % period)

    on = detect_stream(times, pulses, in_sync, duration, rng, gate_period=period)
    off = detect_stream(times, pulses, out_sync, duration, rng, gate_period=period)
    logger.info("gate contrast: %d clicks in sync, %d out of sync", len(on), len(off))
    return GateContrast(len(on) / duration, len(off) / duration)
