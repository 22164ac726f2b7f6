"""Gated and buffered Monte Carlo sessions."""

import math

import numpy as np
import pytest

from hybridkd.errors import ConfigError, DomainError
from hybridkd.physics import kljn_bit_rate, link_budget
from hybridkd.protocol import Protocol
from hybridkd.rates import normalized_rates, throughputs
from hybridkd.session import (
    SessionStats,
    TimingMode,
    estimate_per_pulse_yield,
    per_pulse_yield_moments,
    run_buffered_session,
    run_gated_session,
    spawn_seeds,
)


class TestTimingMode:
    def test_buffered_requires_geometry(self):
        with pytest.raises(ConfigError):
            TimingMode.buffered(buffer_capacity=100, burst_block=0)
        with pytest.raises(ConfigError):
            TimingMode.buffered(buffer_capacity=100, burst_block=200)

    def test_p3_rejected_in_buffered(self):
        with pytest.raises(ConfigError):
            TimingMode.buffered().check_protocol(Protocol.P3)
        TimingMode.gated().check_protocol(Protocol.P3)  # fine
        TimingMode.buffered().check_protocol(Protocol.P2)  # fine


class TestGatedSession:
    def test_deterministic(self, optical, line):
        a = run_gated_session(Protocol.P2, optical, line, 2.0, 2_000, seed=5)
        b = run_gated_session(Protocol.P2, optical, line, 2.0, 2_000, seed=5)
        assert a == b

    def test_rounds_precondition(self, optical, line):
        with pytest.raises(DomainError):
            run_gated_session(Protocol.P1, optical, line, 2.0, 0, seed=1)

    def test_bb84_wall_time_unthrottled(self, optical, line):
        stats = run_gated_session(Protocol.BB84, optical, line, 2.0, 1_000, seed=2)
        assert stats.wall_time_s == 1_000 / optical.f_qkd
        assert stats.kljn_bits == 0

    def test_hybrid_wall_time_uses_system_clock(self, optical, line):
        stats = run_gated_session(Protocol.P1, optical, line, 2.0, 1_000, seed=3)
        f_sys = min(optical.f_qkd, kljn_bit_rate(line, 2.0))
        assert stats.wall_time_s == 1_000 / f_sys

    def test_yield_converges_to_analytic(self, optical, line):
        n = 40_000
        stats = run_gated_session(Protocol.P2, optical, line, 2.0, n, seed=6)
        point = throughputs(optical, line, 2.0)
        mean, var = per_pulse_yield_moments(Protocol.P2, point.q_mu, point.gamma)
        observed = estimate_per_pulse_yield(stats, n)
        assert abs(observed - mean) < 3 * math.sqrt(var / n)

    def test_bit_count_invariant(self, optical, line):
        stats = run_gated_session(Protocol.P2, optical, line, 1.0, 5_000, seed=7)
        assert stats.qkd_bits + stats.kljn_bits <= 2 * stats.rounds_executed
        total = stats.rounds_executed
        # every round is counted exactly once as yielding/discarded/flagged
        yielding = total - stats.discarded_rounds - stats.flagged_rounds
        assert 0 <= yielding <= total

    def test_sampled_classification_produces_flags_and_errors(self, optical, line):
        stats = run_gated_session(
            Protocol.P2, optical, line, 2.0, 10_000, seed=8, ideal_classification=False
        )
        assert stats.flagged_rounds > 0
        assert stats.kljn_errors > 0  # mixed-up rounds disagree on the wire bit

    def test_no_flags_under_ideal_classification(self, optical, line):
        stats = run_gated_session(Protocol.P2, optical, line, 2.0, 10_000, seed=9)
        assert stats.flagged_rounds == 0
        assert stats.kljn_errors == 0


class TestYieldHelpers:
    def test_moments_match_normalized_rates(self, optical, line):
        budget = link_budget(optical, 2.0)
        r1, r23 = normalized_rates(budget)
        for proto, expect in (
            (Protocol.BB84, r1),
            (Protocol.P1, r1),
            (Protocol.P2, r23),
            (Protocol.P3, r23),
        ):
            mean, var = per_pulse_yield_moments(proto, budget.q_mu, budget.gamma)
            assert mean == pytest.approx(expect, rel=1e-12)
            assert var > 0.0

    def test_estimate_formula(self):
        stats = SessionStats(
            protocol="p1",
            timing="gated",
            distance_km=1.0,
            seed=0,
            rounds_executed=100,
            qkd_bits=10,
            kljn_bits=4,
            qkd_errors=0,
            kljn_errors=0,
            discarded_rounds=86,
            flagged_rounds=0,
            gamma=0.25,
            wall_time_s=1.0,
            effective_throughput_bps=11.5,
        )
        assert estimate_per_pulse_yield(stats, 100) == pytest.approx((10 * 0.75 + 4) / 100)
        with pytest.raises(DomainError):
            estimate_per_pulse_yield(stats, 0)

    def test_zero_activity_yields_zero(self, optical, line):
        # at an extreme distance the optical gain is dark-count level and
        # protocol I essentially never produces a bit in a short session
        stats = run_gated_session(Protocol.P1, optical, line, 500.0, 200, seed=10)
        assert estimate_per_pulse_yield(stats, 200) == 0.0


class TestBufferedSession:
    def run(self, protocol, optical, line, **kw):
        args = dict(
            distance_km=2.0,
            duration_s=1.3,
            seed=11,
            mode=TimingMode.buffered(buffer_capacity=100_000, burst_block=2_000),
        )
        args.update(kw)
        return run_buffered_session(protocol, optical, line, **args)

    def test_deterministic(self, optical, line):
        assert self.run(Protocol.P1, optical, line) == self.run(Protocol.P1, optical, line)

    def test_p3_and_bb84_rejected(self, optical, line):
        with pytest.raises(ConfigError):
            self.run(Protocol.P3, optical, line)
        with pytest.raises(ConfigError):
            self.run(Protocol.BB84, optical, line)

    def test_duration_must_fit_one_cycle(self, optical, line):
        with pytest.raises(ConfigError):
            self.run(Protocol.P1, optical, line, duration_s=1e-6)
        with pytest.raises(DomainError):
            self.run(Protocol.P1, optical, line, duration_s=0.0)

    def test_sawtooth_trace(self, optical, line):
        stats = self.run(Protocol.P2, optical, line)
        trace = stats.buffer_occupancy_trace
        r_kljn = kljn_bit_rate(line, 2.0)
        assert trace[0] == (0.0, 0)
        assert all(occ >= 0 for _, occ in trace)
        times = [t for t, _ in trace]
        assert all(a < b for a, b in zip(times, times[1:]))
        # rises at the wire rate, falls at the laser rate
        for (t0, o0), (t1, o1) in zip(trace, trace[1:]):
            slope = (o1 - o0) / (t1 - t0)
            if o1 > o0:
                assert slope == pytest.approx(r_kljn, rel=1e-9)
            else:
                assert slope == pytest.approx(-optical.f_qkd, rel=1e-9)

    def test_conservation(self, optical, line):
        stats = self.run(Protocol.P2, optical, line)
        # one buffered decision consumed per pulse; whole cycles only
        assert stats.rounds_executed == stats.kljn_bits_produced
        assert stats.kljn_bits <= stats.kljn_bits_produced

    def test_burst_rate_matches_model(self, optical, line):
        point = throughputs(optical, line, 2.0)
        p2 = self.run(Protocol.P2, optical, line)
        assert p2.burst_throughput_model_bps == point.t_burst_p2
        assert p2.burst_throughput_measured_bps == pytest.approx(point.t_burst_p2, rel=0.02)
        p1 = self.run(Protocol.P1, optical, line)
        assert p1.burst_throughput_model_bps == point.t_burst_p1
        # protocol I bursts are rare events (q_mu/2 per pulse); allow more slack
        assert p1.burst_throughput_measured_bps == pytest.approx(point.t_burst_p1, rel=0.25)

    def test_long_run_average_near_gated_bound(self, optical, line):
        point = throughputs(optical, line, 2.0)
        stats = self.run(Protocol.P2, optical, line)
        assert stats.cycles >= 100
        ratio = stats.effective_throughput_bps / point.t_p23
        assert 0.95 <= ratio <= 1.0 + 1e-9  # duty-cycle loss only, within 5%

    def test_sampled_classification_path(self, optical, line):
        stats = self.run(
            Protocol.P2,
            optical,
            line,
            duration_s=0.3,
            ideal_classification=True,
        )
        noisy = self.run(
            Protocol.P2,
            optical,
            line,
            duration_s=0.3,
            ideal_classification=False,
        )
        assert noisy.flagged_rounds > 0
        assert noisy.kljn_bits < stats.kljn_bits  # misclassification costs yield


class TestSeedSpawning:
    def test_children_are_deterministic_and_distinct(self):
        a = [np.random.default_rng(s).random() for s in spawn_seeds(1, 4)]
        b = [np.random.default_rng(s).random() for s in spawn_seeds(1, 4)]
        assert a == b
        assert len(set(a)) == 4
