"""Tests for the intercept-resend and beam-splitting models in scripts/qkd/attacks.py."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from scripts.qkd.attacks import (
    BsAttackConfig,
    IrAttackConfig,
    bs_attack_apply,
    ir_attack_pulses,
    ir_intercept,
    ir_qber_enumerated,
    ir_qber_exact,
)
from scripts.qkd.devices import ChannelConfig, SourceConfig, multi_photon_fraction
from scripts.qkd.errors import ConfigurationError, DomainError
from scripts.qkd.protocol import SessionConfig, ideal_config, run_session, sift, with_n_bins
from scripts.qkd.states import PhasePattern, TimeBinState, differential_bits, make_superposition

PI = math.pi


def resent_bits(state: TimeBinState) -> list[int]:
    phases = np.where(np.real(state.amplitudes) > 0, 0.0, PI)
    return differential_bits(PhasePattern(tuple(phases)))


def ir_session(n_bins: int, n_pulses: int, **attack) -> SessionConfig:
    base = SessionConfig(n_pulses=n_pulses, seed=7)
    cfg = ideal_config(with_n_bins(base, n_bins), lossless=True)
    return replace(cfg, attack=IrAttackConfig(**attack))


class TestAttackConfig:
    """Tests for attack descriptor validation."""

    @pytest.mark.parametrize("fraction", [-0.1, 1.5])
    def test_intercept_fraction_range(self, fraction):
        with pytest.raises(ConfigurationError) as exc:
            IrAttackConfig(intercept_fraction=fraction)
        assert exc.value.field == "attack.intercept_fraction"

    def test_tap_ratio_below_one(self):
        with pytest.raises(ConfigurationError):
            BsAttackConfig(tap_ratio=1.0)


class TestIrQber:
    """Tests for the closed-form and enumerated intercept-resend QBER."""

    @pytest.mark.parametrize("n_bins, expected", [(2, 0.25), (3, 1 / 3), (4, 0.375), (101, 100 / 202)])
    def test_exact(self, n_bins, expected):
        assert ir_qber_exact(n_bins) == pytest.approx(expected)

    def test_hundred_bins_rounds_to_0_495(self):
        assert ir_qber_exact(101) == pytest.approx(0.495, abs=5e-4)

    def test_exact_approaches_half(self):
        values = [ir_qber_exact(n) for n in (2, 4, 16, 256, 4096)]
        assert values == sorted(values)
        assert values[-1] < 0.5
        assert values[-1] == pytest.approx(0.5, abs=1e-3)

    def test_exact_rejects_one_bin(self):
        with pytest.raises(DomainError):
            ir_qber_exact(1)

    @pytest.mark.parametrize("n_bins", [2, 3, 4, 5, 6])
    def test_enumeration_matches_closed_form(self, n_bins):
        assert ir_qber_enumerated(n_bins) == pytest.approx(ir_qber_exact(n_bins), abs=1e-12)


class TestIrIntercept:
    """Tests for the single-photon intercept strategy."""

    def test_learned_difference_is_kept(self, rng):
        state = make_superposition(3, PhasePattern((0, 0, PI)), 1e-9)
        edge = 0
        for _ in range(2_000):
            resent, knowledge = ir_intercept(state, rng)
            assert resent.is_normalized()
            learned = [i for i, k in enumerate(knowledge) if k is not None]
            assert len(learned) <= 1
            for i in learned:
                # An ideal DLI never reveals a wrong difference
                assert knowledge[i] == [0, 1][i]
                assert resent_bits(resent)[i] == knowledge[i]
            if not learned:
                edge += 1
        # Edge bins carry 1/N of the mass
        assert edge / 2_000 == pytest.approx(1 / 3, abs=0.04)

    def test_other_difference_is_random(self, rng):
        state = make_superposition(3, PhasePattern((0, 0, PI)), 1e-9)
        second = []
        for _ in range(4_000):
            resent, knowledge = ir_intercept(state, rng)
            if knowledge[0] is not None:
                second.append(resent_bits(resent)[1])
        assert np.mean(second) == pytest.approx(0.5, abs=0.05)

    def test_vectorised_attack_only_touches_non_empty_pulses(self, rng):
        n = 10_000
        sent = rng.integers(0, 4, n)
        counts = rng.poisson(0.17, n)
        new_counts, received = ir_attack_pulses(sent, counts, IrAttackConfig(), 3, rng)
        empty = counts == 0
        assert np.all(new_counts[empty] == 0)
        assert np.all(received[empty] == sent[empty])
        assert np.all(new_counts[~empty] == 1)

    def test_zero_interception_changes_nothing(self, rng):
        n = 200_000
        sent = np.zeros(n, dtype=np.int64)
        counts = np.ones(n, dtype=np.int64)
        _, received = ir_attack_pulses(sent, counts, IrAttackConfig(intercept_fraction=0.0), 3, rng)
        assert np.array_equal(received, sent)

    def test_poisson_resend(self, rng):
        n = 100_000
        counts = np.ones(n, dtype=np.int64)
        cfg = IrAttackConfig(resend_mean_photon=0.5, poisson_resend=True)
        new_counts, _ = ir_attack_pulses(np.zeros(n, dtype=np.int64), counts, cfg, 3, rng)
        assert new_counts.mean() == pytest.approx(0.5, abs=0.01)


class TestIrMonteCarlo:
    """Intercept-resend attack run through full sessions."""

    @pytest.mark.parametrize("n_bins", [2, 3])
    def test_session_qber_matches_closed_form(self, n_bins):
        key = sift(run_session(ir_session(n_bins, 2_000_000)))
        assert len(key) >= 100_000
        assert key.qber() == pytest.approx(ir_qber_exact(n_bins), abs=0.005)

    def test_half_interception_halves_the_error(self):
        key = sift(run_session(ir_session(3, 1_000_000, intercept_fraction=0.5)))
        assert key.qber() == pytest.approx(0.5 * ir_qber_exact(3), abs=0.01)

    def test_attack_stream_does_not_disturb_alice(self):
        clean = run_session(ideal_config(SessionConfig(n_pulses=20_000, seed=7), lossless=True))
        attacked = run_session(ir_session(3, 20_000))
        np.testing.assert_array_equal(clean.pattern_indices, attacked.pattern_indices)


class TestBsAttack:
    """Tests for bs_attack_apply()."""

    def test_zero_tap_is_identity(self):
        channel = ChannelConfig()
        result = bs_attack_apply(channel, BsAttackConfig(0.0), SourceConfig())
        assert result.channel == channel
        assert result.eve_info_rate == 0.0

    def test_half_tap_adds_three_db(self):
        channel = ChannelConfig(length_km=30.0)
        result = bs_attack_apply(channel, BsAttackConfig(0.5), SourceConfig())
        extra = result.channel.total_loss_db - channel.total_loss_db
        assert extra == pytest.approx(3.0103, abs=1e-4)

    def test_eve_rate_uses_multi_photon_fraction(self):
        source = SourceConfig()
        result = bs_attack_apply(ChannelConfig(), BsAttackConfig(0.1), source)
        assert result.multi_photon_fraction == pytest.approx(0.082, abs=0.001)
        expected = multi_photon_fraction(0.17) * 62.5e6 * 0.17 * 0.1
        assert result.eve_info_rate == pytest.approx(expected)

    def test_session_sees_extra_loss(self):
        base = replace(SessionConfig(n_pulses=1_000_000), spd=replace(SessionConfig().spd, hold_off=0.0))
        clean = run_session(base)
        tapped = run_session(replace(base, attack=BsAttackConfig(0.5)))
        assert tapped.n_clicks < 0.7 * clean.n_clicks
