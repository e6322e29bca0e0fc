"""
Closed-form rate and error models, calibration helpers and parameter sweeps.

The sifted-key rate follows the single-detector dead-time model

    R_sift = r_p mu eta T_L exp(-r_p mu eta T_L tau_H),  T_L = 10^(-(alpha L + I_L)/10)

where the insertion loss I_L also carries the coupler and the 1/N edge-bin
sifting loss. Secure rates use R_sec = R_sift (tau - f h(e)), clamped at 0.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np
from scipy.optimize import brentq, least_squares
from scipy.special import entr
from scipy.stats import norm

from scripts.qkd.attacks import BsAttackConfig, bs_attack_apply
from scripts.qkd.devices import ChannelConfig, SourceConfig, leak_mean_photons, transmittance
from scripts.qkd.errors import ConfigurationError, DomainError
from scripts.qkd.protocol import GuardBandPolicy, SessionConfig, run_session, sift, with_n_bins

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RateModelParams:
    """Inputs of the closed-form sifted-rate model."""

    rep_rate: float
    mean_photon_number: float
    efficiency: float
    attenuation_db_per_km: float
    length_km: float
    insertion_loss_db: float
    hold_off: float

    def __post_init__(self) -> None:
        for name in ("rep_rate", "mean_photon_number", "efficiency"):
            if not getattr(self, name) > 0:
                raise ConfigurationError("must be > 0", name)
        for name in ("attenuation_db_per_km", "length_km", "insertion_loss_db", "hold_off"):
            if getattr(self, name) < 0:
                raise ConfigurationError("must be >= 0", name)

    @property
    def transmittance(self) -> float:
        return db_to_transmittance(self.attenuation_db_per_km * self.length_km + self.insertion_loss_db)


def sifted_rate(p: RateModelParams) -> float:
    """Return the analytic sifted-key rate in bits/s."""
    flux = p.rep_rate * p.mean_photon_number * p.efficiency * p.transmittance
    return flux * math.exp(-flux * p.hold_off)


def binary_entropy(e: float) -> float:
    """Return h(e) = -e log2 e - (1-e) log2(1-e), with h(0) = h(1) = 0.

    Raises:
        DomainError: If e is outside [0, 1].
    """
    if not 0.0 <= e <= 1.0:
        raise DomainError(f"error rate must lie in [0, 1], got {e}")
    return float((entr(e) + entr(1.0 - e)) / math.log(2.0))


@dataclass(frozen=True)
class SecureRateParams:
    """Privacy-amplification shrinking factor tau and error-correction inefficiency f."""

    shrinking_factor: float = 1.0
    ec_inefficiency: float = 1.16

    def __post_init__(self) -> None:
        if not 0.0 <= self.shrinking_factor <= 1.0:
            raise ConfigurationError("must lie in [0, 1]", "secure.shrinking_factor")
        if self.ec_inefficiency < 1.0:
            raise ConfigurationError("must be >= 1", "secure.ec_inefficiency")


def secure_rate(sifted: float, e: float, sp: SecureRateParams) -> float:
    """Return R_sift * max(0, tau - f h(e))."""
    return sifted * max(0.0, sp.shrinking_factor - sp.ec_inefficiency * binary_entropy(e))


def secure_rate_threshold(sp: SecureRateParams) -> float:
    """Return the error rate in [0, 1/2] above which the secure rate is zero."""
    gap = lambda e: sp.shrinking_factor - sp.ec_inefficiency * binary_entropy(e)  # noqa: E731
    if gap(0.0) <= 0:
        return 0.0
    if gap(0.5) >= 0:
        return 0.5
    return float(brentq(gap, 0.0, 0.5, xtol=1e-12))


class ShrinkingModel(Protocol):
    """Source of the privacy-amplification factor tau for a given N and QBER."""

    def tau(self, n_bins: int, error_rate: float) -> float: ...


@dataclass(frozen=True)
class ConstantShrinking:
    value: float = 1.0

    def tau(self, n_bins: int, error_rate: float) -> float:
        return self.value


@dataclass(frozen=True)
class TabulatedShrinking:
    """Piecewise-linear tau(e) per number of bins.

    Attributes:
        table: {n_bins: ((e_0, e_1, ...), (tau_0, tau_1, ...))} with ascending e.
        default: Value used for N missing from the table.
    """

    table: Mapping[int, tuple[Sequence[float], Sequence[float]]] = field(default_factory=dict)
    default: float = 1.0

    def tau(self, n_bins: int, error_rate: float) -> float:
        if n_bins not in self.table:
            return self.default
        errors, taus = self.table[n_bins]
        return float(np.clip(np.interp(error_rate, errors, taus), 0.0, 1.0))


def secure_params_for(model: ShrinkingModel, n_bins: int, error_rate: float, ec_inefficiency: float) -> SecureRateParams:
    return SecureRateParams(model.tau(n_bins, error_rate), ec_inefficiency)


# ---------------------------------------------------------------------------
# Error budget
# ---------------------------------------------------------------------------

BUDGET_MECHANISMS = ("dark_count", "afterpulse", "extinction_ratio", "timing_jitter", "visibility", "rise_fall")


@dataclass(frozen=True)
class ErrorBudget:
    """QBER contribution of each error source, as (label, fraction) pairs."""

    contributions: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "contributions", tuple((str(k), float(v)) for k, v in self.contributions))
        for label, value in self.contributions:
            if not 0.0 <= value <= 0.5:
                raise DomainError(f"{label} contribution must lie in [0, 0.5], got {value}")

    @classmethod
    def from_mechanisms(
        cls,
        *,
        dark_count: float,
        afterpulse: float,
        extinction_ratio: float,
        timing_jitter: float,
        visibility: float,
        rise_fall: float,
    ) -> "ErrorBudget":
        """Build the six-entry budget; ``visibility`` is the DLI visibility V itself."""
        values = (dark_count, afterpulse, extinction_ratio, timing_jitter, visibility_error(visibility), rise_fall)
        return cls(tuple(zip(BUDGET_MECHANISMS, values)))

    def __getitem__(self, label: str) -> float:
        for key, value in self.contributions:
            if key == label:
                return value
        raise KeyError(label)

    def entries(self) -> list[tuple[str, float]]:
        return list(self.contributions)


def error_budget_total(budget: ErrorBudget) -> float:
    """Sum of the contributions (independent errors add)."""
    return sum(value for _, value in budget.contributions)


def visibility_error(visibility: float) -> float:
    """Return (1 - V) / 2, the error of an imperfect interferometer."""
    return (1.0 - visibility) / 2.0


# Reference budgets for 1 ns and 0.4 ns bins
REFERENCE_BUDGETS: dict[str, ErrorBudget] = {
    "1ns": ErrorBudget.from_mechanisms(
        dark_count=0.0033,
        afterpulse=0.015,
        extinction_ratio=0.016,
        timing_jitter=0.050,
        visibility=0.92,
        rise_fall=0.021,
    ),
    "0.4ns": ErrorBudget.from_mechanisms(
        dark_count=0.0033,
        afterpulse=0.015,
        extinction_ratio=0.016,
        timing_jitter=0.125,
        visibility=0.96,
        rise_fall=0.0525,
    ),
}


def _mean_cdf(a: float, s: float) -> float:
    # E[Phi((a - x) / s)] for x ~ U[0, 1)
    g = lambda z: z * norm.cdf(z) + norm.pdf(z)  # noqa: E731
    return s * (g(a / s) - g((a - 1.0) / s))


def jitter_qber(sigma: float, n_bins: int, bin_width: float, guard_time: float = 0.0) -> float:
    """Analytic QBER from Gaussian jitter moving clicks into neighbouring bins.

    Photons are spread uniformly over their source bin (edge bins carry half
    the weight of interior ones). A click that lands in a different interior
    bin is paired with an unrelated difference and is wrong half the time.
    Clicks inside the guard band are dropped.
    """
    if sigma < 0 or n_bins < 2 or not bin_width > 0:
        raise DomainError("need sigma >= 0, n_bins >= 2 and bin_width > 0")
    if sigma == 0:
        return 0.0
    s = sigma / bin_width
    h = guard_time / (2.0 * bin_width)
    masses = np.full(n_bins + 1, 1.0 / n_bins)
    masses[0] = masses[-1] = 1.0 / (2 * n_bins)

    def kept(d: int) -> float:
        # Probability a click from bin j lands in the kept part of bin j + d
        return _mean_cdf(d + 1.0 - h, s) - _mean_cdf(d + h, s)

    wrong = total = 0.0
    for k in range(2, n_bins + 1):
        for j in range(1, n_bins + 2):
            p = masses[j - 1] * kept(k - j)
            total += p
            if j != k:
                wrong += p
    return 0.5 * wrong / total


def calibrate_jitter_sigma(target_qber: float, n_bins: int, bin_width: float) -> float:
    """Return the jitter sigma whose jitter_qber equals ``target_qber``.

    Raises:
        DomainError: If the target is not reachable.
    """
    lo, hi = 1e-6 * bin_width, 2.0 * bin_width
    f = lambda s: jitter_qber(s, n_bins, bin_width) - target_qber  # noqa: E731
    if not f(lo) < 0 < f(hi):
        raise DomainError(f"jitter QBER {target_qber} is not reachable for N={n_bins}")
    return float(brentq(f, lo, hi, xtol=1e-9 * bin_width))


def _window_time(source: SourceConfig, guard_time: float) -> float:
    # Kept interference-window time per pulse, both ports
    return 2 * (source.n_bins - 1) * (source.bin_width - guard_time)


def _bob_transmittance(cfg: SessionConfig) -> float:
    channel = cfg.channel
    if isinstance(cfg.attack, BsAttackConfig):
        channel = bs_attack_apply(channel, cfg.attack, cfg.source).channel
    t = transmittance(channel) * cfg.multiplex.coupler_survival
    if cfg.source.spatial_paths:
        t /= cfg.source.n_bins
    return t


def model_error_budget(cfg: SessionConfig, guard_time: float | None = None) -> ErrorBudget:
    """Predict each mechanism's QBER contribution for a configuration.

    Noise clicks (dark counts, afterpulses, leakage) landing in a kept
    interference window are random bits; each contributes half its share of
    the sifted clicks. Jitter, visibility and rise time use their own models.
    """
    src, spd = cfg.source, cfg.spd
    g = cfg.guard.guard_time if guard_time is None else guard_time
    GuardBandPolicy(g).check(src.bin_width)
    t_bob = _bob_transmittance(cfg)

    p_click = -math.expm1(-src.mean_photon_number * spd.efficiency * t_bob)
    keep = 1.0 - g / src.bin_width
    signal = p_click * (src.n_bins - 1) / src.n_bins * keep
    window = _window_time(src, g)

    dark = spd.dark_count_rate * window
    afterpulse = 0.0
    if spd.gate_width > 0:
        afterpulse = spd.afterpulse_prob * (p_click + spd.dark_count_rate * spd.gate_width) * window / spd.gate_width
    leak = leak_mean_photons(src) * t_bob * spd.efficiency * window / src.period

    def share(noise: float) -> float:
        return 0.5 * noise / (signal + noise) if signal + noise > 0 else 0.0

    rise = 0.0
    if src.bin_width - g > 0:
        rise = 0.5 * max(0.0, src.rise_time - g / 2) / (src.bin_width - g)
    return ErrorBudget.from_mechanisms(
        dark_count=share(dark),
        afterpulse=share(afterpulse),
        extinction_ratio=share(leak),
        timing_jitter=jitter_qber(spd.jitter_sigma, src.n_bins, src.bin_width, g),
        visibility=cfg.dli_visibility,
        rise_fall=rise,
    )


def m_state_sift_fraction(n_bins: int, spatial: bool = False) -> float:
    """Fraction of Bob's detections that survive sifting: (N-1)/N, or (N-1)/N^2 with path splitting."""
    if n_bins < 2:
        raise DomainError(f"n_bins must be >= 2, got {n_bins}")
    fraction = (n_bins - 1) / n_bins
    return fraction / n_bins if spatial else fraction


def rate_params_from_config(cfg: SessionConfig) -> RateModelParams:
    """Map a session configuration onto the closed-form model.

    The coupler loss, the edge-bin sifting loss and the path splitter are
    folded into I_L.
    """
    src = cfg.source
    extra = cfg.multiplex.coupler_loss_db - 10.0 * math.log10(m_state_sift_fraction(src.n_bins, src.spatial_paths))
    channel = cfg.channel
    if isinstance(cfg.attack, BsAttackConfig):
        channel = bs_attack_apply(channel, cfg.attack, src).channel
    return RateModelParams(
        rep_rate=src.rep_rate,
        mean_photon_number=src.mean_photon_number,
        efficiency=cfg.spd.efficiency,
        attenuation_db_per_km=channel.attenuation_db_per_km,
        length_km=channel.length_km,
        insertion_loss_db=channel.insertion_loss_db + extra,
        hold_off=cfg.spd.hold_off,
    )


def deadtime_throughput(rate: float, hold_off: float, model: str = "exponential") -> float:
    """Return the recorded click rate for an incident click rate ``rate``.

    Args:
        rate: Incident detection rate R in clicks/s.
        hold_off: Dead time tau in seconds.
        model: "exponential" for R exp(-R tau), "nonparalyzable" for R / (1 + R tau).
    """
    if rate < 0 or hold_off < 0:
        raise DomainError("rate and hold_off must be >= 0")
    if model == "exponential":
        return rate * math.exp(-rate * hold_off)
    if model == "nonparalyzable":
        return rate / (1.0 + rate * hold_off)
    raise DomainError(f"unknown dead-time model {model!r}")


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LossFit:
    """Result of fit_insertion_loss."""

    insertion_loss_db: float
    attenuation_db_per_km: float
    params: RateModelParams
    residuals: tuple[float, ...]

    def predict(self, length_km: float) -> float:
        return sifted_rate(replace(self.params, length_km=length_km))


def fit_insertion_loss(
    points: Sequence[tuple[float, float]],
    base: RateModelParams,
    fit_attenuation: bool = False,
) -> LossFit:
    """Fit I_L (and optionally alpha) to measured (length_km, sifted bits/s) points.

    Residuals are log(model / measured), solved with scipy.optimize.least_squares.

    Raises:
        ConfigurationError: If there are no points, a rate is not positive or
            alpha is free with fewer than two points.
    """
    if not points:
        raise ConfigurationError("at least one (length, rate) point is required", "points")
    if any(rate <= 0 for _, rate in points):
        raise ConfigurationError("measured rates must be > 0", "points")
    if fit_attenuation and len(points) < 2:
        raise ConfigurationError("fitting alpha needs at least two distances", "points")

    lengths = np.array([p[0] for p in points], dtype=float)
    targets = np.log([p[1] for p in points])

    def model(x: np.ndarray) -> RateModelParams:
        alpha = x[1] if fit_attenuation else base.attenuation_db_per_km
        return replace(base, insertion_loss_db=float(x[0]), attenuation_db_per_km=float(alpha))

    def residuals(x: np.ndarray) -> np.ndarray:
        p = model(x)
        return np.array([math.log(sifted_rate(replace(p, length_km=float(L)))) for L in lengths]) - targets

    x0 = [base.insertion_loss_db] + ([base.attenuation_db_per_km] if fit_attenuation else [])
    result = least_squares(residuals, x0, bounds=(0.0, np.inf), xtol=1e-12, ftol=1e-12, gtol=1e-12)
    fitted = model(result.x)
    logger.info(
        "loss fit: I_L = %.4f dB, alpha = %.4f dB/km, max |log residual| = %.2e",
        fitted.insertion_loss_db,
        fitted.attenuation_db_per_km,
        float(np.max(np.abs(result.fun))),
    )
    return LossFit(
        insertion_loss_db=fitted.insertion_loss_db,
        attenuation_db_per_km=fitted.attenuation_db_per_km,
        params=fitted,
        residuals=tuple(float(r) for r in result.fun),
    )


def calibrate_gate_contrast(
    in_sync_rate: float,
    out_of_sync_rate: float,
    source: SourceConfig,
    channel: ChannelConfig,
    gate_width: float,
) -> tuple[float, float]:
    """Infer (efficiency, dark count rate) from gate-synchronisation count rates.

    Out of sync only dark counts remain: DCR * gate_width * r_p. In sync every
    gate additionally clicks with probability 1 - exp(-mu eta T).

    Raises:
        ConfigurationError: If the rates are inconsistent with the source.
    """
    if not in_sync_rate > out_of_sync_rate >= 0:
        raise ConfigurationError("in-sync rate must exceed the out-of-sync rate", "gate_contrast")
    if not gate_width > 0:
        raise ConfigurationError("must be > 0", "detector.gate_width")
    dcr = out_of_sync_rate / (gate_width * source.rep_rate)
    click_prob = (in_sync_rate - out_of_sync_rate) / source.rep_rate
    if click_prob >= 1:
        raise ConfigurationError("in-sync rate exceeds one click per gate", "gate_contrast")
    efficiency = -math.log1p(-click_prob) / (source.mean_photon_number * transmittance(channel))
    if efficiency > 1:
        raise ConfigurationError(f"implied efficiency {efficiency:.3f} exceeds 1", "gate_contrast")
    return efficiency, dcr


def gate_coverage(cfg: SessionConfig) -> float:
    """Fraction of the interference-window time of both ports that the detector gate covers."""
    src, spd = cfg.source, cfg.spd
    period = src.period
    starts = [1.5 * src.bin_width + port * cfg.multiplex.port_delay for port in (0, 1)]
    span = (src.n_bins - 1) * src.bin_width
    g0 = spd.gate_delay % period
    covered = 0.0
    for s in starts:
        for shift in (-period, 0.0, period):
            lo, hi = g0 + shift, g0 + shift + spd.gate_width
            covered += max(0.0, min(hi, s + span) - max(lo, s))
    return covered / (2 * span)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepAxis:
    """One sweepable parameter: output column, display scale and how to apply a value."""

    column: str
    scale: float
    apply: Callable[[SessionConfig, float], SessionConfig]


SWEEP_AXES: dict[str, SweepAxis] = {
    "distance": SweepAxis("distance_km", 1.0, lambda c, v: replace(c, channel=replace(c.channel, length_km=v))),
    "guard_time": SweepAxis("guard_time_ps", 1e12, lambda c, v: replace(c, guard=GuardBandPolicy(v))),
    "n_bins": SweepAxis("n_bins", 1.0, lambda c, v: with_n_bins(c, int(round(v)))),
    "mu": SweepAxis("mu", 1.0, lambda c, v: replace(c, source=replace(c.source, mean_photon_number=v))),
    "gate_delay": SweepAxis("gate_delay_ns", 1e9, lambda c, v: replace(c, spd=replace(c.spd, gate_delay=v))),
}

ANALYTIC_COLUMNS = ("sift_fraction", "sifted_rate_bps", "qber", "secure_rate_bps", "discard_fraction")
MC_COLUMNS = ("mc_sifted_bits", "mc_sifted_rate_bps", "mc_qber", "mc_discard_fraction")


def sweep_columns(axis: str, with_mc: bool) -> tuple[str, ...]:
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"unknown axis {axis!r}; choose from {sorted(SWEEP_AXES)}", "axis")
    return (SWEEP_AXES[axis].column, *ANALYTIC_COLUMNS, *(MC_COLUMNS if with_mc else ()))


@dataclass(frozen=True)
class SweepRequest:
    axis: str
    value: float
    base: SessionConfig
    shrinking: ShrinkingModel
    ec_inefficiency: float
    mc_pulses: int | None


def _sweep_row(req: SweepRequest) -> dict[str, float]:
    axis = SWEEP_AXES[req.axis]
    cfg = axis.apply(req.base, req.value)
    src = cfg.source
    guard = cfg.guard.guard_time
    discard = guard / src.bin_width

    rate = sifted_rate(rate_params_from_config(cfg)) * (1.0 - discard) * gate_coverage(cfg)
    e = min(0.5, error_budget_total(model_error_budget(cfg)))
    sp = secure_params_for(req.shrinking, src.n_bins, e, req.ec_inefficiency)
    row = {
        axis.column: int(round(req.value)) if req.axis == "n_bins" else req.value * axis.scale,
        "sift_fraction": m_state_sift_fraction(src.n_bins, src.spatial_paths),
        "sifted_rate_bps": rate,
        "qber": e,
        "secure_rate_bps": secure_rate(rate, e, sp),
        "discard_fraction": discard,
    }
    if req.mc_pulses is not None:
        record = run_session(replace(cfg, n_pulses=req.mc_pulses))
        key = sift(record)
        kept = len(key) + key.discards.edge + key.discards.guard
        row.update(
            mc_sifted_bits=len(key),
            mc_sifted_rate_bps=len(key) / cfg.duration,
            mc_qber=key.qber() if len(key) else math.nan,
            mc_discard_fraction=key.discards.guard / kept if kept else math.nan,
        )
    return row


def sweep(
    axis: str,
    values: Sequence[float],
    base: SessionConfig,
    shrinking: ShrinkingModel | None = None,
    ec_inefficiency: float = 1.16,
    mc_pulses: int | None = None,
    workers: int = 1,
) -> list[dict[str, float]]:
    """Evaluate the analytic model (and optionally Monte-Carlo) along one axis.

    Args:
        axis: One of SWEEP_AXES; values are in SI units (km for distance).
        values: Grid points, in order.
        base: Configuration every other parameter is taken from.
        shrinking: Privacy-amplification model, tau = 1 by default.
        ec_inefficiency: Error-correction inefficiency f.
        mc_pulses: Pulses per Monte-Carlo run; None for analytic only.
        workers: Worker processes for the Monte-Carlo runs.

    Returns:
        One dict per grid point with keys in sweep_columns(axis, mc) order.

    Raises:
        ConfigurationError: On an unknown axis or an empty range.
    """
    columns = sweep_columns(axis, mc_pulses is not None)
    if len(values) == 0:
        raise ConfigurationError("sweep range is empty", "range")
    requests = [
        SweepRequest(axis, float(v), base, shrinking or ConstantShrinking(), ec_inefficiency, mc_pulses)
        for v in values
    ]
    logger.info("sweep over %s: %d points, mc=%s, workers=%d", axis, len(requests), mc_pulses, workers)
    if workers > 1 and mc_pulses is not None:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, requests))
    else:
        rows = [_sweep_row(r) for r in requests]
    return [{c: row[c] for c in columns} for row in rows]


def db_to_transmittance(loss_db: float) -> float:
    return 10.0 ** (-loss_db / 10.0)


def transmittance_to_db(t: float) -> float:
    """Return the loss in dB of a transmittance in (0, 1]."""
    if not 0.0 < t <= 1.0:
        raise DomainError(f"transmittance must lie in (0, 1], got {t}")
    return -10.0 * math.log10(t)
