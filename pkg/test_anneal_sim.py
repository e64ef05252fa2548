#!/usr/bin/env python3
"""
Tests for the stochastic anneal-loop simulator
"""

import sys

import numpy as np

from services.anneal_sim import (
    INVALID_TARGET,
    OVERSHOOT,
    STATUSES,
    SUCCESS,
    UNDERSHOOT_SATURATED,
    AnnealConfig,
    AnnealOutcome,
    AnnealSimulator,
)
from services.errors import FitError, MonotonicityError, ParameterError, ValidationError
from services.lattice import ChipState, LatticeBuilder, QubitRecord
from utils.helpers import make_rng

R0 = 10000.0


def _simulate_population(n=390, seed=7):
    shifts = AnnealSimulator.sample_planned_shifts(n, seed)
    config = AnnealConfig()
    return [
        AnnealSimulator.anneal_junction(R0, R0 * (1.0 + dr), config, qubit_id=i, rng=make_rng(seed, "population", i))
        for i, dr in enumerate(shifts)
    ]


def test_already_in_band():
    outcome = AnnealSimulator.anneal_junction(R0, R0 * 1.001, seed=1)
    assert outcome.status == SUCCESS
    assert outcome.exposures == 0


def test_downward_target_is_rejected():
    try:
        AnnealSimulator.anneal_junction(R0, 0.9 * R0, seed=1)
    except MonotonicityError:
        return
    raise AssertionError("downward target accepted")


def test_twenty_percent_shift_saturates():
    saturated = sum(
        AnnealSimulator.anneal_junction(R0, 1.2 * R0, seed=s).status == UNDERSHOOT_SATURATED for s in range(1000)
    )
    assert saturated > 990


def test_config_invariants():
    for kwargs in [dict(band_rel=0.0), dict(band_rel=0.02), dict(step_fraction=0.0), dict(saturation_mean_rel=0.0)]:
        try:
            AnnealConfig(**kwargs)
        except ValidationError:
            continue
        raise AssertionError(f"accepted {kwargs}")


def test_status_matches_deviation():
    config = AnnealConfig()
    for outcome in _simulate_population(200, seed=3):
        assert outcome.status in STATUSES
        if outcome.status == SUCCESS:
            assert abs(outcome.final_dev_rel) <= config.band_rel
        elif outcome.status == OVERSHOOT:
            assert outcome.final_dev_rel > config.band_rel
        else:
            assert outcome.final_dev_rel < -config.band_rel


def test_traces_never_decrease():
    for outcome in _simulate_population(100, seed=5):
        trace = np.array(outcome.trace)
        assert np.all(np.diff(trace) >= 0)
        assert trace[0] == outcome.r0
        assert trace[-1] == outcome.final_r
        assert len(trace) == outcome.exposures + 1


def test_noiseless_unsaturated_always_succeeds():
    config = AnnealConfig(step_sigma_rel=0.0, saturation=False)
    for dr in np.linspace(0.0, 0.3, 61):
        outcome = AnnealSimulator.anneal_junction(R0, R0 * (1.0 + dr), config, seed=0)
        assert outcome.status == SUCCESS, (dr, outcome)


def test_deterministic_per_seed():
    first = AnnealSimulator.anneal_junction(R0, 1.07 * R0, seed=42, qubit_id=3)
    second = AnnealSimulator.anneal_junction(R0, 1.07 * R0, seed=42, qubit_id=3)
    assert first == second


def test_anneal_chip_is_order_independent():
    chip = LatticeBuilder.build_preset("falcon")
    targets = {qid: R0 * (1.0 + 0.002 * qid) for qid in chip.ids}
    outcomes = AnnealSimulator.anneal_chip(chip, targets, seed=9)
    reversed_chip = ChipState(chip.name, tuple(reversed(chip.qubits)), chip.edges)
    again = {o.qubit_id: o for o in AnnealSimulator.anneal_chip(reversed_chip, targets, seed=9)}
    for outcome in outcomes:
        assert again[outcome.qubit_id] == outcome


def test_anneal_chip_edge_cases():
    empty = ChipState("empty", (), ())
    assert AnnealSimulator.anneal_chip(empty, {}, seed=1) == []

    chip = ChipState("pair", (QubitRecord(0, R0), QubitRecord(1, R0)), ((0, 1),))
    outcomes = AnnealSimulator.anneal_chip(chip, {0: R0 * 1.001, 1: R0}, seed=1)
    assert [o.status for o in outcomes] == [SUCCESS, SUCCESS]
    assert all(o.exposures == 0 for o in outcomes)

    outcomes = AnnealSimulator.anneal_chip(chip, {0: R0 * 0.8, 1: R0 * 1.05}, seed=1)
    assert outcomes[0].status == INVALID_TARGET
    assert outcomes[1].status != INVALID_TARGET


def test_chip_rms_deviation():
    chip = LatticeBuilder.build_preset("falcon")
    rng = make_rng(11, "targets")
    targets = {qid: R0 * (1.0 + rng.uniform(0.02, 0.12)) for qid in chip.ids}
    outcomes = AnnealSimulator.anneal_chip(chip, targets, seed=11)
    devs = [o.final_dev_rel for o in outcomes if o.status == SUCCESS]
    assert np.sqrt(np.mean(np.square(devs))) <= 0.003


def test_aggregate_success_statistics():
    outcomes = _simulate_population()
    stats = AnnealSimulator.success_stats(outcomes)
    assert stats.total == 390
    assert 0.85 <= stats.success_rate <= 0.93, stats.success_rate
    assert 0.0010 <= stats.rms_dev_success <= 0.0025, stats.rms_dev_success

    def rate(lo, hi):
        members = [o for o in outcomes if lo <= o.planned_dr_rel < hi]
        return sum(o.status == SUCCESS for o in members) / len(members)

    assert rate(0.10, np.inf) < rate(0.03, 0.08)
    high = [o for o in outcomes if o.planned_dr_rel >= 0.10]
    low = [o for o in outcomes if o.planned_dr_rel < 0.10]
    undershoot_high = sum(o.status == UNDERSHOOT_SATURATED for o in high) / len(high)
    undershoot_low = sum(o.status == UNDERSHOOT_SATURATED for o in low) / len(low)
    assert undershoot_high > undershoot_low


def test_overshoot_concentrates_at_small_shifts():
    config = AnnealConfig()
    rng = make_rng(21, "shifts")

    def overshoot_rate(lo, hi, n=1500):
        shifts = rng.uniform(lo, hi, n)
        outcomes = [
            AnnealSimulator.anneal_junction(R0, R0 * (1.0 + dr), config, qubit_id=i, rng=make_rng(21, lo, i))
            for i, dr in enumerate(shifts)
        ]
        return sum(o.status == OVERSHOOT for o in outcomes) / n

    small = overshoot_rate(0.0, 0.01)
    mid = overshoot_rate(0.03, 0.08)
    assert small > mid + 0.03, (small, mid)


def test_first_exposure_settings():
    config = AnnealConfig(step_sigma_rel=0.0, saturation=False)
    outcome = AnnealSimulator.anneal_junction(R0, R0 * 1.005, config, seed=0)
    assert outcome.exposures == 1
    assert abs(outcome.trace[1] - R0 * (1.0 + config.first_step_min_rel)) < 1e-9
    outcome = AnnealSimulator.anneal_junction(R0, R0 * 1.10, config, seed=0)
    assert abs(outcome.trace[1] - R0 - config.first_step_fraction * 0.10 * R0) < 1e-6
    for kwargs in [dict(first_step_fraction=0.0), dict(first_step_min_rel=-0.001), dict(first_step_noise_gain=-1.0)]:
        try:
            AnnealConfig(**kwargs)
        except ValidationError:
            continue
        raise AssertionError(f"accepted {kwargs}")


def test_success_bins_cover_outcomes():
    outcomes = _simulate_population(200, seed=13)
    stats = AnnealSimulator.success_stats(outcomes)
    assert sum(b["count"] for b in stats.bins) == len(outcomes)
    assert all(0.0 <= b["success_rate"] <= 1.0 for b in stats.bins)


def test_success_stats_edge_cases():
    try:
        AnnealSimulator.success_stats([])
    except ParameterError:
        pass
    else:
        raise AssertionError("empty outcomes accepted")

    perfect = [AnnealOutcome(i, R0, R0 * 1.05, R0 * 1.05, 3, SUCCESS, 0.0) for i in range(5)]
    stats = AnnealSimulator.success_stats(perfect)
    assert stats.success_rate == 1.0
    assert stats.overshoot == 0 and stats.undershoot == 0


def test_lognormal_refit_oracle():
    rng = np.random.default_rng(0)
    samples = rng.lognormal(-6.0, 0.5, 10000)
    fit = AnnealSimulator.lognormal_fit(samples)
    assert abs(fit.mu / -6.0 - 1.0) < 0.02
    assert abs(fit.sigma / 0.5 - 1.0) < 0.02
    assert fit.ks_statistic < fit.ks_critical(0.05)


def test_lognormal_fit_errors():
    for samples in ([1.0] * 50, [1.0, 2.0, 3.0], list(np.linspace(-1.0, 1.0, 20))):
        try:
            AnnealSimulator.lognormal_fit(samples)
        except FitError:
            continue
        raise AssertionError(f"fit accepted {samples[:3]}...")


def test_success_increments_look_lognormal():
    outcomes = _simulate_population()
    increments = [o.increment_ratio for o in outcomes if o.status == SUCCESS and o.exposures > 0]
    fit = AnnealSimulator.lognormal_fit(increments)
    assert fit.ks_statistic < fit.ks_critical(0.05)


def test_planned_shift_sampler():
    shifts = AnnealSimulator.sample_planned_shifts(5000, seed=1)
    assert np.all(shifts >= 0)
    assert abs(np.mean(shifts) - 0.073) < 0.003
    assert np.array_equal(shifts, AnnealSimulator.sample_planned_shifts(5000, seed=1))


def run_comprehensive_tests():
    """Run every test in this module and print a summary"""
    tests = [(name, fn) for name, fn in sorted(globals().items()) if name.startswith("test_") and callable(fn)]
    passed = 0
    for name, fn in tests:
        try:
            fn()
            print(f"✅ {name}")
            passed += 1
        except Exception as e:
            print(f"❌ {name}: {e!r}")
    print(f"\n📊 {passed}/{len(tests)} anneal tests passed")
    return passed == len(tests)


if __name__ == "__main__":
    sys.exit(0 if run_comprehensive_tests() else 1)
