#!/usr/bin/env python3
"""
Tests for the resistance-to-frequency power law
"""

import sys

import numpy as np

from services.errors import ParameterError, SingularFitError, ValidationError
from services.freq_model import FrequencyModel, PowerLawModel, ghz_to_mhz, mhz_to_ghz
from services.lattice import LatticeBuilder, QubitRecord, ChipState


def test_fit_recovers_exact_law():
    model = PowerLawModel(a=510000.0, p=-0.5)
    r = np.linspace(8000.0, 12000.0, 20)
    points = [(ri, FrequencyModel.predict_f01(model, ri)) for ri in r]
    fitted, stats = FrequencyModel.fit_power_law(points)
    assert abs(fitted.p - model.p) < 1e-9
    assert abs(fitted.a / model.a - 1.0) < 1e-8
    assert fitted.sigma_f < 1e-6
    assert len(stats.residuals) == 20


def test_fit_on_noisy_data():
    rng = np.random.default_rng(11)
    model = PowerLawModel(a=510000.0, p=-0.5)
    r = rng.uniform(8000.0, 12000.0, 200)
    f = np.array([FrequencyModel.predict_f01(model, ri) for ri in r]) + rng.normal(0.0, 10.0, r.size)
    fitted, stats = FrequencyModel.fit_power_law(list(zip(r, f)))
    assert abs(fitted.p + 0.5) < 0.05
    assert 7.0 < fitted.sigma_f < 13.0
    assert abs(np.mean([v for _, v in stats.residuals])) < 2.0


def test_fit_equal_resistances_is_singular():
    try:
        FrequencyModel.fit_power_law([(10000.0, 5000.0), (10000.0, 5010.0), (10000.0, 4990.0)])
    except SingularFitError:
        return
    raise AssertionError("equal resistances accepted")


def test_fit_needs_two_points():
    try:
        FrequencyModel.fit_power_law([(10000.0, 5000.0)])
    except ParameterError:
        return
    raise AssertionError("single point accepted")


def test_pinned_exponent_fits_prefactor_only():
    points = [(9000.0, 5300.0), (10000.0, 5050.0), (11000.0, 4800.0)]
    fitted, _ = FrequencyModel.fit_power_law(points, pin_exponent=-0.5)
    assert fitted.p == -0.5
    # equal resistances are fine once p is pinned
    fitted, _ = FrequencyModel.fit_power_law([(10000.0, 5000.0), (10000.0, 5010.0)], pin_exponent=-0.5)
    assert abs(fitted.a - 5005.0 * 100.0) < 1.0


def test_model_invariants():
    for kwargs in [dict(a=-1.0, p=-0.5), dict(a=1.0, p=0.5), dict(a=1.0, p=-0.5, sigma_f=-1.0)]:
        try:
            PowerLawModel(**kwargs)
        except ValidationError:
            continue
        raise AssertionError(f"accepted {kwargs}")


def test_predict_and_invert():
    model = PowerLawModel(a=510000.0, p=-0.5)
    assert abs(FrequencyModel.predict_f01(model, 10000.0) - 5100.0) < 1e-9
    for f in [4500.0, 5000.0, 5200.0]:
        assert abs(FrequencyModel.predict_f01(model, FrequencyModel.predict_rn(model, f)) - f) < 1e-6


def test_prediction_rejects_non_positive_inputs():
    model = PowerLawModel(a=510000.0, p=-0.5)
    for call, value in [(FrequencyModel.predict_f01, 0.0), (FrequencyModel.predict_rn, -5.0)]:
        try:
            call(model, value)
        except ParameterError:
            continue
        raise AssertionError(f"{call.__name__} accepted {value}")


def test_frequency_sensitivity_identity():
    model = PowerLawModel(a=1.0e6, p=-0.55)
    r_n = FrequencyModel.predict_rn(model, 4840.0)
    sigma = FrequencyModel.freq_sensitivity(model, r_n, 0.0017)
    assert abs(sigma - 4.5254) < 1e-3
    # within 15% of the measured 4.7 MHz
    assert abs(sigma / 4.7 - 1.0) < 0.15

    eps = 0.0017
    central = 0.5 * abs(
        FrequencyModel.predict_f01(model, r_n * (1 + eps)) - FrequencyModel.predict_f01(model, r_n * (1 - eps))
    )
    assert abs(central / sigma - 1.0) < 1e-3


def test_sensitivity_rejects_negative_spread():
    try:
        FrequencyModel.freq_sensitivity(PowerLawModel(a=1.0e6, p=-0.5), 10000.0, -0.01)
    except ParameterError:
        return
    raise AssertionError("negative spread accepted")


def test_unit_conversions():
    assert abs(ghz_to_mhz(5.1) - 5100.0) < 1e-9
    assert abs(mhz_to_ghz(5100.0) - 5.1) < 1e-12
    assert ghz_to_mhz(None) is None


def test_fit_chip_splits_tuned_and_untuned():
    model = PowerLawModel(a=510000.0, p=-0.5)
    rng = np.random.default_rng(3)
    qubits = []
    for qid in range(40):
        r = 10000.0 * (1 + 0.03 * rng.standard_normal())
        tuned = qid % 2 == 0
        noise = 2.0 if tuned else 20.0
        qubits.append(
            QubitRecord(id=qid, r_n=r, f01=FrequencyModel.predict_f01(model, r) + noise * rng.standard_normal(), tuned=tuned)
        )
    _, stats = FrequencyModel.fit_chip(ChipState("mixed", tuple(qubits), ()))
    assert set(stats.groups) == {"tuned", "untuned"}
    assert stats.groups["tuned"] < stats.groups["untuned"]


def test_synthesized_chip_matches_reference_law():
    model = PowerLawModel(a=510000.0, p=-0.5, sigma_f=5.0)
    chip = FrequencyModel.synthesize_measurements(LatticeBuilder.build_preset("hummingbird"), model, 0.04, seed=7)
    again = FrequencyModel.synthesize_measurements(LatticeBuilder.build_preset("hummingbird"), model, 0.04, seed=7)
    assert chip == again
    fitted, _ = FrequencyModel.fit_chip(chip)
    assert abs(fitted.p + 0.5) < 0.1
    assert 2.0 < fitted.sigma_f < 9.0


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
    print(f"\n📊 {passed}/{len(tests)} frequency-model tests passed")
    return passed == len(tests)


if __name__ == "__main__":
    sys.exit(0 if run_comprehensive_tests() else 1)
