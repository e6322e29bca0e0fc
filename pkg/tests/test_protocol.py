"""Tests for sessions, sifting, guard bands and window counting in scripts/qkd/protocol.py."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from scripts.qkd.analytics import calibrate_jitter_sigma
from scripts.qkd.devices import (
    ChannelConfig,
    ClickOrigin,
    MultiplexConfig,
    ORIGIN_CODES,
    SourceConfig,
    SpdConfig,
    TimestampRecord,
    time_multiplex,
)
from scripts.qkd.errors import ConfigurationError, DomainError, UndefinedStatisticError
from scripts.qkd.protocol import (
    ClickStatus,
    GuardBandPolicy,
    SessionConfig,
    classify_counts,
    export_rows,
    fixed_pattern_counts,
    guard_keep_mask,
    ideal_config,
    key_window_origins,
    qber,
    run_session,
    session_summary,
    sift,
    temporal_filter,
    with_n_bins,
)

PI = math.pi
T0, T1 = 1.5e-9, 11.5e-9
DT = 1e-9


class TestSessionConfig:
    """Tests for SessionConfig validation."""

    def test_defaults_valid(self):
        cfg = SessionConfig()
        assert cfg.duration == pytest.approx(1_000_000 / 62.5e6)

    def test_rejects_zero_pulses(self):
        with pytest.raises(ConfigurationError) as exc:
            SessionConfig(n_pulses=0)
        assert exc.value.field == "session.n_pulses"

    def test_rejects_visibility_above_one(self):
        with pytest.raises(ConfigurationError) as exc:
            SessionConfig(dli_visibility=1.2)
        assert exc.value.field == "dli.visibility"

    def test_guard_of_half_a_bin_allowed(self):
        SessionConfig(guard=GuardBandPolicy(0.5e-9))

    def test_guard_wider_than_half_a_bin_rejected(self):
        with pytest.raises(ConfigurationError) as exc:
            SessionConfig(guard=GuardBandPolicy(0.6e-9))
        assert exc.value.field == "session.guard_time"

    def test_negative_guard_rejected(self):
        with pytest.raises(ConfigurationError):
            GuardBandPolicy(-1e-12)

    def test_fixed_pattern_length_checked(self):
        with pytest.raises(ConfigurationError) as exc:
            SessionConfig(fixed_pattern=(0, 1, 1))
        assert exc.value.field == "session.fixed_pattern"

    def test_timing_overlap_rejected_before_simulation(self):
        with pytest.raises(ConfigurationError):
            SessionConfig(multiplex=MultiplexConfig(port_delay=2e-9))


class TestIdealConfig:
    """Tests for ideal_config() and with_n_bins()."""

    def test_ideal_switches_off_noise(self):
        cfg = ideal_config(SessionConfig())
        assert cfg.dli_visibility == 1.0
        assert cfg.spd.dark_count_rate == 0.0
        assert cfg.spd.jitter_sigma == 0.0
        assert cfg.source.extinction_ratio_db == math.inf
        assert cfg.channel == SessionConfig().channel

    def test_lossless_removes_channel_and_coupler(self):
        cfg = ideal_config(SessionConfig(), lossless=True)
        assert cfg.channel.total_loss_db == 0.0
        assert cfg.multiplex.coupler_survival == 1.0

    def test_with_n_bins_keeps_timing_when_it_fits(self):
        cfg = with_n_bins(SessionConfig(), 4)
        assert cfg.source.n_bins == 4
        assert cfg.source.rep_rate == 62.5e6
        assert cfg.multiplex.port_delay == 10e-9

    def test_with_n_bins_stretches_timing(self):
        cfg = with_n_bins(SessionConfig(), 12)
        src, mux = cfg.source, cfg.multiplex
        assert mux.port_delay > 13 * src.bin_width
        assert src.period > 13 * src.bin_width + mux.port_delay
        assert cfg.spd.gate_width >= mux.port_delay + 13 * src.bin_width

    def test_with_n_bins_drops_mismatched_fixed_pattern(self):
        cfg = with_n_bins(SessionConfig(fixed_pattern=(0, 1)), 4)
        assert cfg.fixed_pattern is None


class TestRunSession:
    """Tests for run_session()."""

    def test_deterministic(self):
        cfg = SessionConfig(n_pulses=100_000, seed=11)
        a, b = run_session(cfg), run_session(cfg)
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.pattern_indices, b.pattern_indices)

    def test_seed_changes_output(self):
        a = run_session(SessionConfig(n_pulses=100_000, seed=1))
        b = run_session(SessionConfig(n_pulses=100_000, seed=2))
        assert not np.array_equal(a.pattern_indices, b.pattern_indices)

    def test_times_sorted(self):
        record = run_session(SessionConfig(n_pulses=100_000))
        assert np.all(np.diff(record.times) >= 0)

    @pytest.mark.parametrize("n_bins, bin_width", [(3, 1e-9), (4, 0.4e-9)])
    def test_ideal_system_has_zero_qber(self, ideal_session, n_bins, bin_width):
        cfg = ideal_session(n_pulses=200_000)
        cfg = replace(cfg, source=replace(cfg.source, n_bins=n_bins, bin_width=bin_width))
        key = sift(run_session(cfg))
        assert len(key) >= 10_000
        assert key.errors() == 0
        assert key.qber() == 0.0

    def test_vacuum_leaves_only_dark_counts(self):
        cfg = SessionConfig(
            source=SourceConfig(mean_photon_number=1e-9, extinction_ratio_db=math.inf),
            spd=SpdConfig(afterpulse_prob=0.0, dark_count_rate=1e5),
            n_pulses=200_000,
        )
        record = run_session(cfg)
        assert record.n_clicks > 0
        assert np.all(record.origin_codes == ORIGIN_CODES[ClickOrigin.DARK])

    def test_click_rate_without_noise(self):
        cfg = SessionConfig(
            source=SourceConfig(extinction_ratio_db=math.inf),
            channel=ChannelConfig(length_km=0.0, insertion_loss_db=0.0),
            spd=SpdConfig(efficiency=0.5, dark_count_rate=0.0, afterpulse_prob=0.0, hold_off=0.0, jitter_sigma=0.0),
            n_pulses=200_000,
        )
        record = run_session(cfg)
        survival = 0.5 * 10 ** (-3.01 / 10)
        p_click = -math.expm1(-0.17 * survival)
        expected = cfg.n_pulses * p_click
        assert abs(record.n_clicks - expected) < 4 * math.sqrt(expected)

    def test_alice_patterns_match_bits(self):
        record = run_session(SessionConfig(n_pulses=1_000))
        for i in (0, 10, 999):
            assert record.pattern(i).bits == record.alice_bits[i].tolist()
        assert len(record.alice_patterns) == 1_000

    def test_fixed_pattern_sent_on_every_pulse(self):
        record = run_session(SessionConfig(n_pulses=1_000, fixed_pattern=(1, 0)))
        assert np.all(record.alice_bits == np.array([1, 0]))

    def test_timestamps_view(self):
        record = run_session(SessionConfig(n_pulses=50_000))
        stamps = record.timestamps
        assert len(stamps) == record.n_clicks
        assert all(isinstance(s, TimestampRecord) for s in stamps)
        for s, k in zip(stamps, record.click_bins):
            assert (s.bin_index is None) == (k < 0)

    def test_full_noise_qber_within_budget(self):
        # All six mechanisms on, no dead time so the run collects enough bits
        cfg = SessionConfig(
            channel=ChannelConfig(length_km=0.0),
            spd=SpdConfig(efficiency=1.0, hold_off=0.0),
            n_pulses=1_000_000,
            seed=5,
        )
        key = sift(run_session(cfg))
        assert len(key) > 10_000
        assert 0.05 <= key.qber() <= 0.1453

    def test_thirty_km_defaults(self):
        cfg = SessionConfig(n_pulses=4_000_000, seed=42)
        key = sift(run_session(cfg))
        rate = len(key) / cfg.duration
        assert 16_800 <= rate <= 25_200
        assert 0.05 < key.qber() < 0.2


class TestSift:
    """Tests for sift() on hand-built records."""

    def test_interference_bin_agrees(self, record_builder, source, multiplex):
        cfg = SessionConfig(n_pulses=1)
        t = time_multiplex(2, 0, 0, multiplex, source)
        key = sift(record_builder(cfg, [(0, 0)], [(t, 2, 0)]))
        assert key.pairs == [(0, 1, 0, 0)]
        assert key.qber() == 0.0

    def test_second_difference(self, record_builder, source, multiplex):
        cfg = SessionConfig(n_pulses=1)
        t = time_multiplex(3, 1, 0, multiplex, source)
        key = sift(record_builder(cfg, [(0, 1)], [(t, 3, 1)]))
        assert key.pairs == [(0, 2, 1, 1)]

    def test_edge_bin_is_discarded(self, record_builder, source, multiplex):
        cfg = SessionConfig(n_pulses=1)
        t = time_multiplex(1, 0, 0, multiplex, source)
        key = sift(record_builder(cfg, [(0, 0)], [(t, 1, 0)]))
        assert len(key) == 0
        assert key.discards.edge == 1

    def test_unassigned_click_is_counted(self, record_builder):
        cfg = SessionConfig(n_pulses=1)
        key = sift(record_builder(cfg, [(0, 0)], [(7e-9, -1, -1)]))
        assert len(key) == 0
        assert key.discards.unassigned == 1

    def test_click_beyond_last_pulse_is_unassigned(self, record_builder, source, multiplex):
        cfg = SessionConfig(n_pulses=1)
        t = time_multiplex(2, 0, 1, multiplex, source)
        key = sift(record_builder(cfg, [(0, 0)], [(t, 2, 0)]))
        assert key.discards.unassigned == 1

    def test_wrong_port_is_an_error(self, record_builder, source, multiplex):
        cfg = SessionConfig(n_pulses=2)
        clicks = [
            (time_multiplex(2, 1, 0, multiplex, source), 2, 1),
            (time_multiplex(3, 0, 1, multiplex, source), 3, 0),
        ]
        key = sift(record_builder(cfg, [(0, 0), (0, 0)], clicks))
        assert key.errors() == 1
        assert key.qber() == 0.5

    def test_multi_click_pulse_logged(self, record_builder, source, multiplex):
        cfg = SessionConfig(n_pulses=1)
        clicks = [
            (time_multiplex(2, 0, 0, multiplex, source), 2, 0),
            (time_multiplex(3, 1, 0, multiplex, source), 3, 1),
        ]
        key = sift(record_builder(cfg, [(0, 1)], clicks))
        assert len(key) == 2
        assert key.discards.multi_click_pulses == 1

    def test_empty_key_qber_undefined(self, record_builder):
        key = sift(record_builder(SessionConfig(n_pulses=1), [(0, 0)], []))
        with pytest.raises(UndefinedStatisticError):
            key.qber()

    def test_accounting_is_conserved(self):
        cfg = SessionConfig(n_pulses=300_000, guard=GuardBandPolicy(200e-12))
        record = run_session(cfg)
        key = sift(record)
        d = key.discards
        assert record.n_clicks == len(key) + d.edge + d.guard + d.unassigned
        assert record.discard_log == d

    def test_one_pair_per_sifted_click(self):
        record = run_session(SessionConfig(n_pulses=200_000))
        key = sift(record)
        assert np.all((key.diff_indices >= 1) & (key.diff_indices <= 2))
        for pulse, diff, _, alice in key.pairs[:200]:
            assert alice == record.alice_bits[pulse, diff - 1]


class TestTemporalFilter:
    """Tests for temporal_filter() and guard_keep_mask()."""

    def test_zero_guard_is_identity(self, source, multiplex):
        stamps = [TimestampRecord(t * 1e-10, 0) for t in range(160)]
        kept, fraction = temporal_filter(stamps, GuardBandPolicy(0.0), source, multiplex)
        assert kept == stamps
        assert fraction == 0.0

    def test_half_bin_guard_on_uniform_timestamps(self, source, multiplex, rng):
        pulses = rng.integers(0, 10_000, 100_000)
        bins = rng.integers(1, source.n_bins + 2, pulses.size)
        ports = rng.integers(0, 2, pulses.size)
        offsets = rng.uniform(-0.5, 0.5, pulses.size) * source.bin_width
        times = np.sort(
            pulses / source.rep_rate + bins * source.bin_width + ports * multiplex.port_delay + offsets
        )
        stamps = [TimestampRecord(float(t), 0) for t in times]
        _, fraction = temporal_filter(stamps, GuardBandPolicy(0.5 * source.bin_width), source, multiplex)
        assert fraction == pytest.approx(0.5, abs=0.01)

    def test_guard_keeps_bin_centres(self, source, multiplex):
        centres = np.array([time_multiplex(k, p, 3, multiplex, source) for k in (1, 2, 3, 4) for p in (0, 1)])
        assert np.all(guard_keep_mask(centres, GuardBandPolicy(400e-12), source, multiplex))

    def test_guard_drops_near_boundary(self, source, multiplex):
        t = time_multiplex(2, 0, 0, multiplex, source) + 0.45e-9
        keep = guard_keep_mask(np.array([t]), GuardBandPolicy(200e-12), source, multiplex)
        assert not keep[0]

    def test_guard_keeps_unassigned(self, source, multiplex):
        assert guard_keep_mask(np.array([7e-9]), GuardBandPolicy(200e-12), source, multiplex)[0]

    def test_rejects_guard_over_half_bin(self, source):
        with pytest.raises(ConfigurationError):
            temporal_filter([], GuardBandPolicy(0.7e-9), source)

    def test_empty_input(self, source):
        assert temporal_filter([], GuardBandPolicy(1e-10), source) == ([], 0.0)


@pytest.fixture(scope="module")
def jitter_record():
    sigma = calibrate_jitter_sigma(0.05, 3, 1e-9)
    cfg = SessionConfig(
        source=SourceConfig(extinction_ratio_db=math.inf),
        channel=ChannelConfig(length_km=0.0, insertion_loss_db=0.0),
        spd=SpdConfig(efficiency=1.0, dark_count_rate=0.0, afterpulse_prob=0.0, hold_off=0.0, jitter_sigma=sigma),
        multiplex=MultiplexConfig(coupler_loss_db=0.0),
        n_pulses=500_000,
        seed=21,
    )
    return run_session(cfg)


def jitter_only_session(n_bins: int, bin_width: float, sigma: float = 167e-12) -> SessionConfig:
    base = ideal_config(SessionConfig(n_pulses=300_000, seed=33), lossless=True)
    base = replace(base, source=replace(base.source, bin_width=bin_width), spd=replace(base.spd, jitter_sigma=sigma))
    return with_n_bins(base, n_bins)


class TestJitterScaling:
    """Same detector jitter on wide and narrow bins."""

    def test_narrow_bins_raise_qber(self):
        wide = sift(run_session(jitter_only_session(3, 1e-9))).qber()
        narrow = sift(run_session(jitter_only_session(4, 0.4e-9))).qber()
        assert narrow > wide + 0.03


class TestGuardBand:
    """Guard-band behaviour on a jitter-limited session."""

    def test_baseline_qber(self, jitter_record):
        assert 0.09 <= sift(jitter_record).qber() <= 0.15

    def test_two_hundred_ps_guard(self, jitter_record):
        key = sift(jitter_record, GuardBandPolicy(200e-12))
        summary = session_summary(jitter_record, key)
        assert key.qber() <= 0.10
        assert summary["discard_fraction"] == pytest.approx(0.20, abs=0.05)

    def test_qber_non_increasing_in_guard(self, jitter_record):
        guards = [g * 1e-12 for g in range(0, 401, 50)]
        qbers = [sift(jitter_record, GuardBandPolicy(g)).qber() for g in guards]
        discards = [sift(jitter_record, GuardBandPolicy(g)).discards.guard for g in guards]
        for prev, cur in zip(qbers, qbers[1:]):
            assert cur <= prev + 0.005
        assert discards == sorted(discards)
        assert qbers[-1] < qbers[0]


class TestClassifyCounts:
    """Tests for classify_counts() and qber()."""

    def test_window_origins(self, source, multiplex):
        assert key_window_origins(source, multiplex) == pytest.approx((T0, T1))

    @pytest.mark.parametrize("pattern", [(0, 0), (0, PI), (PI, 0), (PI, PI)])
    def test_correct_port_fills_diagonal(self, pattern):
        # Each window gets clicks only at the port matching its bit
        times = []
        for i, phase in enumerate(pattern):
            origin = T0 if phase == 0 else T1
            times.extend([origin + i * DT + 0.5 * DT] * 10)
        c00, c01, c10, c11 = classify_counts(times, pattern, T0, T1, DT)
        assert c01 == 0 and c10 == 0
        assert c00 + c11 == 20
        assert qber(c00, c01, c10, c11) == 0.0

    def test_all_zero_pattern(self):
        times = np.linspace(T0, T0 + 2 * DT, 50, endpoint=False)
        assert classify_counts(times, (0, 0), T0, T1, DT) == (50, 0, 0, 0)

    def test_all_pi_pattern(self):
        times = np.linspace(T1, T1 + 2 * DT, 50, endpoint=False)
        assert classify_counts(times, (PI, PI), T0, T1, DT) == (0, 0, 0, 50)

    def test_errors_land_off_diagonal(self):
        times = [T1 + 0.5 * DT, T0 + 1.5 * DT]
        assert classify_counts(times, (0, PI), T0, T1, DT) == (0, 1, 1, 0)

    def test_clicks_outside_windows_ignored(self):
        times = [0.5 * DT, T0 + 2.5 * DT, T1 - 0.1 * DT, T1 + 3 * DT]
        assert classify_counts(times, (0, 0), T0, T1, DT) == (0, 0, 0, 0)

    def test_empty(self):
        assert classify_counts([], (0, PI), T0, T1, DT) == (0, 0, 0, 0)

    def test_overlapping_windows_rejected(self):
        with pytest.raises(ConfigurationError):
            classify_counts([], (0, 0), T0, T0 + DT, DT)

    def test_rejects_non_binary_phase(self):
        with pytest.raises(ConfigurationError):
            classify_counts([], (0, PI / 2), T0, T1, DT)

    @pytest.mark.parametrize(
        "counts, expected",
        [((100, 0, 0, 100), 0.0), ((0, 50, 50, 0), 1.0), ((440, 30, 30, 500), 0.06)],
    )
    def test_qber_examples(self, counts, expected):
        assert qber(*counts) == pytest.approx(expected)

    def test_qber_zero_total(self):
        with pytest.raises(UndefinedStatisticError):
            qber(0, 0, 0, 0)

    def test_qber_negative_count(self):
        with pytest.raises(DomainError):
            qber(1, -1, 0, 0)

    def test_window_counts_agree_with_sifting(self):
        cfg = SessionConfig(
            channel=ChannelConfig(length_km=0.0),
            spd=SpdConfig(efficiency=1.0, hold_off=0.0),
            n_pulses=300_000,
            fixed_pattern=(0, 1),
            guard=GuardBandPolicy(100e-12),
        )
        record = run_session(cfg)
        counts = fixed_pattern_counts(record)
        key = sift(record)
        assert sum(counts) == len(key)
        assert qber(*counts) == pytest.approx(key.qber(), abs=1e-12)

    def test_fixed_pattern_required(self):
        record = run_session(SessionConfig(n_pulses=1_000))
        with pytest.raises(ConfigurationError):
            fixed_pattern_counts(record)


class TestExport:
    """Tests for export_rows() and session_summary()."""

    def test_rows_follow_status(self):
        record = run_session(SessionConfig(n_pulses=100_000, guard=GuardBandPolicy(200e-12)))
        rows = export_rows(record)
        assert len(rows) == record.n_clicks
        statuses = {s.name.lower() for s in ClickStatus}
        origins = {o.value for o in ClickOrigin}
        for row in rows:
            origin, status = row.flags.split("|")
            assert origin in origins and status in statuses
            if status == "sifted":
                assert row.alice_bit is not None and row.bob_bit == row.port
            else:
                assert row.alice_bit is None and row.bob_bit is None
            if status == "unassigned":
                assert row.bin_index is None and row.port is None
        assert sum(r.flags.endswith("|sifted") for r in rows) == len(sift(record))

    def test_summary_fields(self):
        record = run_session(SessionConfig(n_pulses=200_000, fixed_pattern=(0, 0)))
        key = sift(record)
        summary = session_summary(record, key)
        assert summary["sifted_bits"] == len(key)
        assert summary["qber"] == pytest.approx(key.qber())
        assert summary["sifted_rate_bps"] == pytest.approx(len(key) / record.config.duration)
        assert summary["c00"] + summary["c01"] + summary["c10"] + summary["c11"] == len(key)
        assert summary["discard_fraction"] == 0.0
