#!/usr/bin/env python3
"""
Tests for Monte Carlo collision-free yield
"""

import sys

import networkx as nx
import numpy as np
from scipy import stats

from services.collision import CollisionBounds, CollisionDetector
from services.errors import ParameterError
from services.lattice import ChipState, LatticeBuilder, QubitRecord
from services.yield_mc import YieldEstimator


def _pair_chip():
    return ChipState("pair", (QubitRecord(0, 10000.0), QubitRecord(1, 10000.0)), ((0, 1),))


def _clean_falcon_targets():
    chip = LatticeBuilder.build_preset("falcon")
    colors = nx.bipartite.color(chip.graph())
    return chip, {qid: 5000.0 + 100.0 * colors[qid] for qid in chip.ids}


def test_single_qubit_always_yields():
    chip = ChipState("single", (QubitRecord(0, 10000.0),), ())
    estimate = YieldEstimator.yield_estimate(chip, {0: 5000.0}, 30.0, CollisionBounds(), 500, seed=1)
    assert estimate.yield_fraction == 1.0
    assert estimate.mean_collisions == 0.0


def test_type1_gaussian_oracle():
    bounds = CollisionBounds(enabled=(1,))
    trials = 20000
    estimate = YieldEstimator.yield_estimate(_pair_chip(), {0: 5000.0, 1: 5000.0}, 20.0, bounds, trials, seed=7)
    expected = 2.0 * stats.norm.cdf(-17.0 / (20.0 * np.sqrt(2.0)))
    assert abs(expected - 0.548) < 1e-3
    assert abs(estimate.yield_fraction - expected) < 3.0 * np.sqrt(expected * (1 - expected) / trials)


def test_zero_sigma_is_deterministic():
    estimate = YieldEstimator.yield_estimate(_pair_chip(), {0: 5000.0, 1: 5100.0}, 0.0, CollisionBounds(), 100, seed=3)
    assert estimate.yield_fraction == 1.0
    estimate = YieldEstimator.yield_estimate(_pair_chip(), {0: 5000.0, 1: 5000.0}, 0.0, CollisionBounds(), 100, seed=3)
    assert estimate.yield_fraction == 0.0
    assert estimate.collision_histogram == {1: 100}


def test_zero_sigma_matches_chip_scan():
    chip, targets = _clean_falcon_targets()
    curve = YieldEstimator.yield_curve(chip, targets, [0.0], CollisionBounds(), 200, seed=1)
    assert curve.yields == [1.0]
    assert CollisionDetector.chip_collisions(chip, targets, CollisionBounds()).is_clean


def test_missing_targets():
    try:
        YieldEstimator.yield_estimate(_pair_chip(), {0: 5000.0}, 1.0, CollisionBounds(), 10, seed=1)
    except ParameterError:
        return
    raise AssertionError("missing target accepted")


def test_invalid_arguments():
    for trials, sigma in [(0, 1.0), (10, -1.0)]:
        try:
            YieldEstimator.yield_estimate(_pair_chip(), {0: 5000.0, 1: 5100.0}, sigma, CollisionBounds(), trials, seed=1)
        except ParameterError:
            continue
        raise AssertionError(f"accepted trials={trials}, sigma={sigma}")


def test_grid_must_ascend():
    chip, targets = _clean_falcon_targets()
    for grid in ([], [5.0, 1.0], [1.0, 1.0]):
        try:
            YieldEstimator.yield_curve(chip, targets, grid, CollisionBounds(), 10, seed=1)
        except ParameterError:
            continue
        raise AssertionError(f"accepted grid {grid}")


def test_thread_count_does_not_change_results():
    chip, targets = _clean_falcon_targets()
    single = YieldEstimator.yield_curve(chip, targets, [0.0, 10.0, 20.0], CollisionBounds(), 3500, seed=11, threads=1)
    pooled = YieldEstimator.yield_curve(chip, targets, [0.0, 10.0, 20.0], CollisionBounds(), 3500, seed=11, threads=4)
    assert single == pooled


def test_curve_non_increasing_for_clean_targets():
    chip, targets = _clean_falcon_targets()
    curve = YieldEstimator.yield_curve(chip, targets, [0.0, 5.0, 10.0, 20.0, 30.0, 40.0], CollisionBounds(), 4000, seed=5)
    for (y0, c0), (y1, c1) in zip(zip(curve.yields, curve.ci_halfwidth), zip(curve.yields[1:], curve.ci_halfwidth[1:])):
        assert y1 <= y0 + c0 + c1
    assert curve.yields[0] == 1.0
    assert curve.yields[-1] < curve.yields[1]


def test_ci_within_binomial_bound():
    chip, targets = _clean_falcon_targets()
    curve = YieldEstimator.yield_curve(chip, targets, [10.0, 20.0], CollisionBounds(), 1000, seed=2)
    for y, ci in zip(curve.yields, curve.ci_halfwidth):
        assert 0.0 <= y <= 1.0
        assert ci <= 1.96 * 0.5 / np.sqrt(1000) + 1e-12


def test_mean_collisions_grow_with_multiplier():
    chip, targets = _clean_falcon_targets()
    single = YieldEstimator.yield_estimate(chip, targets, 20.0, CollisionBounds(multiplier=1.0), 2000, seed=4)
    double = YieldEstimator.yield_estimate(chip, targets, 20.0, CollisionBounds(multiplier=2.0), 2000, seed=4)
    assert double.mean_collisions >= single.mean_collisions


def test_planted_degeneracy_keeps_yield_low():
    chip, targets = _clean_falcon_targets()
    untuned = dict(targets)
    # six exact type-1 degeneracies on disjoint edges
    used = set()
    planted = 0
    for control, target in chip.edges:
        if control in used or target in used:
            continue
        untuned[target] = untuned[control]
        used.update((control, target))
        planted += 1
        if planted == 6:
            break
    assert planted == 6
    grid = [0.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0]
    curve = YieldEstimator.yield_curve(chip, untuned, grid, CollisionBounds(), 4000, seed=8)
    assert curve.yields[0] == 0.0
    assert all(y < 0.05 for y in curve.yields)


def test_improvement_ratio():
    chip, targets = _clean_falcon_targets()
    tuned = YieldEstimator.yield_curve(chip, targets, [5.0, 10.0], CollisionBounds(), 1000, seed=1)
    bad = dict(targets)
    c, t = chip.edges[0]
    bad[t] = bad[c]
    untuned = YieldEstimator.yield_curve(chip, bad, [5.0, 10.0], CollisionBounds(), 1000, seed=1)
    ratios = YieldEstimator.improvement_ratio(tuned, untuned)
    assert len(ratios) == 2
    assert all(r >= 1.0 for r in ratios)


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
    print(f"\n📊 {passed}/{len(tests)} yield tests passed")
    return passed == len(tests)


if __name__ == "__main__":
    sys.exit(0 if run_comprehensive_tests() else 1)
