"""
Single-photon amplitude model of N-bin superposition states.

A photon prepared by Alice is spread over N time-bins with a binary phase
(0 or pi) on each bin. Key bits live in the phase differences between
neighbouring bins. Bob's one-bin delay-line interferometer (DLI) interferes
every bin with its predecessor, so the photon leaves in one of N+1 output bins
and one of two ports:

    p(k, port 0/1) = (|a_k|^2 + |a_{k-1}|^2 +/- 2 V Re(a_k conj(a_{k-1}))) / 4

with a_0 = a_{N+1} = 0. Port 0 ("D1") is the constructive port for equal
phases. Bins 1 and N+1 see only one arm and carry no key information.

Usage:
    from scripts.qkd.states import PhasePattern, make_superposition, dli_transform

    state = make_superposition(3, PhasePattern((0.0, math.pi, 0.0)), 1e-9)
    dist = dli_transform(state, visibility=0.92)
    dist.probability(2, 1)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from scripts.qkd.errors import ConfigurationError, DomainError

# Allowed per-bin phases
PHASE_ALPHABET = (0.0, math.pi)

NORM_TOL = 1e-12


@dataclass(frozen=True)
class PhasePattern:
    """Absolute per-bin phases of one superposition state.

    Attributes:
        phases: One phase per bin, each exactly 0 or pi.
    """

    phases: tuple[float, ...]

    def __post_init__(self) -> None:
        phases = tuple(float(p) for p in self.phases)
        if len(phases) < 2:
            raise ConfigurationError(
                f"a phase pattern needs at least 2 bins, got {len(phases)}", "pattern"
            )
        for p in phases:
            if p not in PHASE_ALPHABET:
                raise ConfigurationError(
                    f"phase {p!r} is not in the {{0, pi}} alphabet", "pattern"
                )
        object.__setattr__(self, "phases", phases)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "PhasePattern":
        """Build the pattern with phase[0] = 0 that encodes ``bits`` differentially."""
        phases = [0.0]
        for b in bits:
            if b not in (0, 1):
                raise ConfigurationError(f"key bit {b!r} is not 0 or 1", "pattern")
            phases.append(phases[-1] if b == 0 else (math.pi if phases[-1] == 0.0 else 0.0))
        return cls(tuple(phases))

    @property
    def n_bins(self) -> int:
        return len(self.phases)

    @property
    def bits(self) -> list[int]:
        return differential_bits(self)


@dataclass(frozen=True, eq=False)
class TimeBinState:
    """Complex amplitudes of a single photon over N time-bins.

    Attributes:
        amplitudes: Read-only complex array of length N.
        bin_width: Duration of one bin in seconds.
    """

    amplitudes: np.ndarray
    bin_width: float

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 2:
            raise DomainError("a time-bin state needs a 1-D array of at least 2 amplitudes")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_bins(self) -> int:
        return int(self.amplitudes.size)

    def norm(self) -> float:
        """Return sum |a_i|^2."""
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm() - 1.0) <= tol


@dataclass(frozen=True, eq=False)
class DetectionDistribution:
    """Probability of each (output bin, DLI port) after interference.

    Attributes:
        probabilities: Array of shape (N+1, 2); row k-1 holds output bin k.
        bin_width: Duration of one bin in seconds.
    """

    probabilities: np.ndarray
    bin_width: float
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        probs = np.array(self.probabilities, dtype=float)
        if probs.ndim != 2 or probs.shape[1] != 2:
            raise DomainError(f"expected an (N+1, 2) probability array, got shape {probs.shape}")
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "_cdf", np.cumsum(probs.ravel()))

    @property
    def n_output_bins(self) -> int:
        return int(self.probabilities.shape[0])

    def probability(self, bin_index: int, port: int) -> float:
        """Return p(bin_index, port) with 1-based bin_index."""
        if not 1 <= bin_index <= self.n_output_bins or port not in (0, 1):
            raise DomainError(f"no output cell (bin={bin_index}, port={port})")
        return float(self.probabilities[bin_index - 1, port])

    def bin_mass(self, bin_index: int) -> float:
        """Return the total probability of one output bin over both ports."""
        return self.probability(bin_index, 0) + self.probability(bin_index, 1)

    def total(self) -> float:
        return float(self.probabilities.sum())

    def as_dict(self) -> dict[tuple[int, int], float]:
        """Return {(bin, port): probability} with 1-based bins."""
        return {
            (k + 1, port): float(self.probabilities[k, port])
            for k in range(self.n_output_bins)
            for port in (0, 1)
        }


def make_superposition(n_bins: int, pattern: PhasePattern, bin_width: float) -> TimeBinState:
    """Prepare the uniform N-bin superposition carrying ``pattern``.

    Args:
        n_bins: Number of time-bins N (>= 2).
        pattern: Per-bin phases; its length must equal n_bins.
        bin_width: Bin duration in seconds.

    Returns:
        State with amplitudes exp(i phase_j) / sqrt(N).

    Raises:
        ConfigurationError: If n_bins < 2, the lengths disagree or bin_width <= 0.
    """
    if n_bins < 2:
        raise ConfigurationError(f"n_bins must be >= 2, got {n_bins}", "source.n_bins")
    if pattern.n_bins != n_bins:
        raise ConfigurationError(
            f"pattern has {pattern.n_bins} phases but n_bins is {n_bins}", "pattern"
        )
    if not bin_width > 0:
        raise ConfigurationError(f"bin_width must be positive, got {bin_width}", "source.bin_width")
    amps = np.exp(1j * np.asarray(pattern.phases)) / math.sqrt(n_bins)
    return TimeBinState(amps, bin_width)


def dli_transform(state: TimeBinState, visibility: float) -> DetectionDistribution:
    """Propagate a state through the one-bin delay-line interferometer.

    Args:
        state: Normalised time-bin state.
        visibility: Interference visibility V in [0, 1].

    Returns:
        Distribution over N+1 output bins and both ports.

    Raises:
        DomainError: If the state is not normalised or V is out of range.
    """
    if not 0.0 <= visibility <= 1.0:
        raise DomainError(f"visibility must lie in [0, 1], got {visibility}")
    if not state.is_normalized():
        raise DomainError(f"state is not normalised (norm = {state.norm():.15g})")

    amps = state.amplitudes
    current = np.concatenate([amps, [0.0]])
    previous = np.concatenate([[0.0], amps])
    incoherent = np.abs(current) ** 2 + np.abs(previous) ** 2
    interference = 2.0 * visibility * np.real(current * np.conj(previous))
    probs = np.stack([incoherent + interference, incoherent - interference], axis=1) / 4.0
    # Rounding can leave -1e-17 on a dark port
    np.clip(probs, 0.0, None, out=probs)
    return DetectionDistribution(probs, state.bin_width)


def sample_detection(dist: DetectionDistribution, rng: np.random.Generator) -> tuple[int, int]:
    """Draw one (output bin, port) pair from ``dist``.

    Returns:
        (bin index starting at 1, port 0 or 1).
    """
    cdf = dist._cdf
    flat = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    flat = min(flat, cdf.size - 1)
    return flat // 2 + 1, flat % 2


def differential_bits(pattern: PhasePattern) -> list[int]:
    """Return the N-1 key bits: 0 where neighbouring phases agree, 1 otherwise."""
    phases = pattern.phases
    return [0 if phases[i + 1] == phases[i] else 1 for i in range(len(phases) - 1)]


def pattern_index(bits: Sequence[int]) -> int:
    """Return the index of a differential bit pattern (first bit most significant)."""
    index = 0
    for b in bits:
        index = (index << 1) | int(b)
    return index


def all_patterns(n_bins: int) -> list[PhasePattern]:
    """Enumerate the 2^(N-1) differential patterns, ordered by pattern_index."""
    if n_bins < 2:
        raise DomainError(f"n_bins must be >= 2, got {n_bins}")
    width = n_bins - 1
    return [
        PhasePattern.from_bits([(i >> (width - 1 - j)) & 1 for j in range(width)])
        for i in range(2**width)
    ]


def pattern_bits_table(n_bins: int) -> np.ndarray:
    """Return the (2^(N-1), N-1) uint8 table of differential bits by pattern index."""
    width = n_bins - 1
    idx = np.arange(2**width)[:, None]
    shifts = np.arange(width - 1, -1, -1)[None, :]
    return ((idx >> shifts) & 1).astype(np.uint8)


def distribution_table(n_bins: int, visibility: float, bin_width: float = 1.0) -> np.ndarray:
    """Return DLI output probabilities for every differential pattern.

    Returns:
        Array of shape (2^(N-1), N+1, 2), indexed like all_patterns().
    """
    return np.stack(
        [
            dli_transform(make_superposition(n_bins, p, bin_width), visibility).probabilities
            for p in all_patterns(n_bins)
        ]
    )


def sample_detections(
    table: np.ndarray, pattern_indices: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised sample_detection: one (bin, port) draw per entry of pattern_indices.

    Args:
        table: Output of distribution_table().
        pattern_indices: Integer array selecting the pattern of each photon.
        rng: Random stream.

    Returns:
        (bins starting at 1, ports) as int arrays shaped like pattern_indices.
    """
    flat_table = table.reshape(table.shape[0], -1)
    cdf = np.cumsum(flat_table, axis=1)
    u = rng.random(pattern_indices.size) * cdf[pattern_indices, -1]
    flat = (u[:, None] >= cdf[pattern_indices]).sum(axis=1)
    np.minimum(flat, flat_table.shape[1] - 1, out=flat)
    return flat // 2 + 1, flat % 2


def pattern_from_bits(bits: Sequence[int]) -> PhasePattern:
    """Return the pattern with phase[0] = 0 carrying the differential ``bits``."""
    return PhasePattern.from_bits(bits)
