"""
Eavesdropping models: intercept-resend (IR) and beam-splitting (BS).

An IR eavesdropper owns a perfect copy of Bob's DLI. A click in an edge bin
tells her nothing and she resends a random pattern; a click in interior bin k
reveals the (k-1)-th phase difference, which she keeps while randomising the
others. The closed-form error rate this induces on the sifted key is
(N-1)/(2N).

A BS eavesdropper taps a fraction of the channel. Her information is bounded
by the multi-photon fraction of the tapped flux; Bob only sees extra loss.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from scripts.qkd.devices import ChannelConfig, SourceConfig, multi_photon_fraction
from scripts.qkd.errors import ConfigurationError, DomainError
from scripts.qkd.states import (
    PhasePattern,
    TimeBinState,
    distribution_table,
    dli_transform,
    make_superposition,
    pattern_bits_table,
    sample_detection,
    sample_detections,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IrAttackConfig:
    """Intercept-resend attack.

    Attributes:
        intercept_fraction: Fraction f of non-empty pulses Eve measures.
        resend_mean_photon: Mean photon number of Eve's resent pulses when
            ``poisson_resend`` is set.
        poisson_resend: Resend a weak coherent pulse instead of exactly one photon.
    """

    intercept_fraction: float = 1.0
    resend_mean_photon: float = 1.0
    poisson_resend: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.intercept_fraction <= 1.0:
            raise ConfigurationError("must lie in [0, 1]", "attack.intercept_fraction")
        if not self.resend_mean_photon > 0:
            raise ConfigurationError("must be > 0", "attack.resend_mean_photon")


@dataclass(frozen=True)
class BsAttackConfig:
    """Beam-splitting attack tapping ``tap_ratio`` of the channel."""

    tap_ratio: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.tap_ratio < 1.0:
            raise ConfigurationError("must lie in [0, 1)", "attack.tap_ratio")


@dataclass(frozen=True)
class BsAttackResult:
    """Bob's channel under a BS attack and Eve's information bound.

    Attributes:
        channel: Channel with the tap folded into its insertion loss.
        multi_photon_fraction: P(k >= 2) / P(k >= 1) of the source.
        eve_info_rate: Upper bound on Eve's information, bits/s.
    """

    channel: ChannelConfig
    multi_photon_fraction: float
    eve_info_rate: float


def ir_intercept(state: TimeBinState, rng: np.random.Generator) -> tuple[TimeBinState, list[int | None]]:
    """Measure one photon with an ideal DLI and prepare the replacement state.

    Args:
        state: Normalised photon state sent by Alice.
        rng: Attack random stream.

    Returns:
        (resent state, Eve's knowledge): one entry per phase difference, the
        learned bit or None where she guessed.

    Raises:
        DomainError: If ``state`` is not normalised.
    """
    n_bins = state.n_bins
    bin_index, port = sample_detection(dli_transform(state, 1.0), rng)
    bits = [int(b) for b in rng.integers(0, 2, n_bins - 1)]
    knowledge: list[int | None] = [None] * (n_bins - 1)
    if 2 <= bin_index <= n_bins:
        bits[bin_index - 2] = port
        knowledge[bin_index - 2] = port
    resent = make_superposition(n_bins, PhasePattern.from_bits(bits), state.bin_width)
    return resent, knowledge


def ir_attack_pulses(
    pattern_indices: np.ndarray,
    counts: np.ndarray,
    cfg: IrAttackConfig,
    n_bins: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ir_intercept over a whole session.

    Eve measures a fraction of the non-empty pulses (one photon each) and
    replaces them by her own pulses.

    Returns:
        (photon counts reaching the channel, pattern index of the state each pulse now carries).
    """
    n = pattern_indices.size
    intercepted = (rng.random(n) < cfg.intercept_fraction) & (counts > 0)
    sel = np.flatnonzero(intercepted)

    bins, ports = sample_detections(distribution_table(n_bins, 1.0), pattern_indices[sel], rng)
    bits = rng.integers(0, 2, (sel.size, n_bins - 1))
    informed = np.flatnonzero((bins >= 2) & (bins <= n_bins))
    bits[informed, bins[informed] - 2] = ports[informed]
    weights = 1 << np.arange(n_bins - 2, -1, -1)

    received = pattern_indices.copy()
    received[sel] = bits @ weights
    new_counts = counts.copy()
    if cfg.poisson_resend:
        new_counts[sel] = rng.poisson(cfg.resend_mean_photon, sel.size)
    else:
        new_counts[sel] = 1
    logger.info(
        "intercept-resend: %d pulses intercepted, %d with a learned bit",
        sel.size,
        informed.size,
    )
    return new_counts, received


def ir_qber_exact(n_bins: int) -> float:
    """Return the QBER a full intercept-resend attack induces, (N-1) / (2N).

    Raises:
        DomainError: If n_bins < 2.
    """
    if n_bins < 2:
        raise DomainError(f"n_bins must be >= 2, got {n_bins}")
    return (n_bins - 1) / (2 * n_bins)


def ir_qber_enumerated(n_bins: int) -> float:
    """Compute the IR-induced QBER by summing over every Alice pattern, Eve outcome and resend.

    Independent of ir_qber_exact; both assume an ideal DLI on Eve's and Bob's side.
    """
    if n_bins < 2:
        raise DomainError(f"n_bins must be >= 2, got {n_bins}")
    table = distribution_table(n_bins, 1.0)
    bits = pattern_bits_table(n_bins).astype(np.int64)
    n_patterns = bits.shape[0]

    # Sifted outcomes of Bob for each resent pattern: (resent, difference, bob bit)
    bob = table[:, 1:n_bins, :]
    # Mismatch probability of each (alice, resent) pair
    wrong = np.where(
        np.arange(2)[None, None, :] != bits[:, :, None], 1.0, 0.0
    )  # (alice, difference, bob bit)
    err = np.einsum("rdq,adq->ar", bob, wrong)
    sifted = bob.sum(axis=(1, 2))

    total_err = total_sift = 0.0
    for a in range(n_patterns):
        for k in range(1, n_bins + 2):
            for port in (0, 1):
                pe = table[a, k - 1, port]
                if pe == 0:
                    continue
                if 2 <= k <= n_bins:
                    candidates = np.flatnonzero(bits[:, k - 2] == port)
                else:
                    candidates = np.arange(n_patterns)
                weight = pe / (n_patterns * candidates.size)
                total_err += weight * err[a, candidates].sum()
                total_sift += weight * sifted[candidates].sum()
    return float(total_err / total_sift)


def bs_attack_apply(channel: ChannelConfig, cfg: BsAttackConfig, source: SourceConfig) -> BsAttackResult:
    """Fold a beam-splitter tap into Bob's channel and bound Eve's information.

    Eve's rate is the multi-photon fraction of the tapped photon flux,
    r_p * mu * tap_ratio photons/s.
    """
    if cfg.tap_ratio == 0.0:
        return BsAttackResult(channel, multi_photon_fraction(source.mean_photon_number), 0.0)
    extra_db = -10.0 * math.log10(1.0 - cfg.tap_ratio)
    tapped = replace(channel, insertion_loss_db=channel.insertion_loss_db + extra_db)
    fraction = multi_photon_fraction(source.mean_photon_number)
    eve_rate = fraction * source.rep_rate * source.mean_photon_number * cfg.tap_ratio
    logger.info("beam-splitting: %.3f dB extra loss, Eve <= %.1f bits/s", extra_db, eve_rate)
    return BsAttackResult(tapped, fraction, eve_rate)
