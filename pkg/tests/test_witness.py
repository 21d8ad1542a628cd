import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nisim.interferometer import PRESETS, generalized_ghz_beamline, preset_hasegawa, rate_function
from nisim.witness import (
    OPTIMAL_CHSH,
    VIOLATES_CLASSICAL,
    VIOLATES_QUANTUM,
    WITHIN,
    WitnessError,
    calibrate_phase_offset,
    chsh,
    classify,
    context_expectation,
    fit_fringe,
    linear_witness,
    mermin,
    mermin_reduction_check,
    shifted,
)

angles = st.floats(-2 * math.pi, 2 * math.pi)


def cosine_counts(offset=0.0):
    return lambda a: 1 + math.cos(sum(a) + offset)


def test_context_examples():
    fn = cosine_counts()
    assert context_expectation(fn, (0, 0)) == pytest.approx(1)
    assert context_expectation(fn, (-math.pi / 4, 0)) == pytest.approx(math.sqrt(2) / 2)
    assert context_expectation(fn, (math.pi / 2,) * 3) == pytest.approx(0, abs=1e-12)


@given(st.lists(angles, min_size=2, max_size=5))
def test_context_estimator_is_cosine_of_sum(a):
    assert context_expectation(cosine_counts(), a) == pytest.approx(math.cos(sum(a)), abs=1e-10)


def test_context_needs_counts():
    with pytest.raises(WitnessError):
        context_expectation(lambda a: 0.0, (0, 0))
    with pytest.raises(WitnessError):
        context_expectation(cosine_counts(), (0,))


def test_chsh_examples():
    assert chsh(cosine_counts()).value == pytest.approx(2 * math.sqrt(2), abs=1e-9)
    zero = chsh(cosine_counts(), 0, 0, 0, 0)
    assert zero.value == pytest.approx(2)
    assert zero.classification == WITHIN
    v = 0.78
    scaled = chsh(lambda a: 1 + v * math.cos(sum(a)), visibility=v)
    assert scaled.value == pytest.approx(2 * math.sqrt(2) * v, abs=1e-12)
    assert scaled.classical_bound == pytest.approx(1.56)
    assert round(scaled.value, 2) == 2.21


def test_mermin_examples():
    assert mermin(cosine_counts()).value == pytest.approx(4, abs=1e-9)
    res = mermin(lambda a: 1 + 0.78 * math.cos(sum(a)), visibility=0.78)
    assert res.value == pytest.approx(3.12, abs=1e-12)
    assert res.classification == VIOLATES_CLASSICAL
    assert len(res.contexts) == 4


@given(angles)
def test_chsh_invariant_under_compensating_shift(theta):
    fn = cosine_counts()
    a1, a2, c1, c2 = OPTIMAL_CHSH
    s1 = chsh(fn, a1 + theta, a2 + theta, c1 - theta, c2 - theta).value
    assert s1 == pytest.approx(chsh(fn).value, abs=1e-9)


@given(st.floats(0, 1))
def test_visibility_scales_witness_linearly(v):
    fn = lambda a: 0.5 * (1 + v * math.cos(sum(a)))  # noqa: E731
    assert chsh(fn).value == pytest.approx(2 * math.sqrt(2) * v, abs=1e-9)
    assert mermin(fn).value == pytest.approx(4 * v, abs=1e-9)


def test_classify():
    assert classify(1.9, 2, 2.83) == WITHIN
    assert classify(2.5, 2, 2.83) == VIOLATES_CLASSICAL
    assert classify(2.1, 2, 2.83, uncertainty=0.2) == WITHIN
    assert classify(3.0, 2, 2.83) == VIOLATES_QUANTUM
    assert classify(-2.5, 2, 2.83) == VIOLATES_CLASSICAL


def test_record_field_order():
    rec = chsh(cosine_counts()).to_record()
    assert list(rec) == ["kind", "value", "uncertainty", "classical_bound", "quantum_bound", "classification"]


def test_linear_witness_custom():
    res = linear_witness(cosine_counts(), [(2.0, (0, 0))], 1.0, 2.0, "double")
    assert res.value == pytest.approx(2)


def test_presets_give_ideal_witnesses():
    assert chsh(rate_function(PRESETS["mwp"]())).value == pytest.approx(2 * math.sqrt(2), abs=1e-9)
    assert chsh(rate_function(PRESETS["rf2"]())).value == pytest.approx(2 * math.sqrt(2), abs=1e-9)
    assert mermin(rate_function(PRESETS["rf3"]())).value == pytest.approx(4, abs=1e-9)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_generalized_estimator(n, rng):
    fn = rate_function(generalized_ghz_beamline(n))
    for _ in range(4):
        a = rng.uniform(-math.pi, math.pi, n)
        assert context_expectation(fn, a) == pytest.approx(math.cos(a.sum()), abs=1e-10)


def test_fit_fringe_synthetic():
    phases = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    fit = fit_fringe(phases, 1 + np.cos(phases - 0.3))
    assert fit.offset == pytest.approx(-0.3, abs=1e-12)
    assert fit.contrast == pytest.approx(1)


@pytest.mark.parametrize("name", ["mwp", "rf3", "rf2"])
def test_main_presets_have_no_offset(name):
    bl = PRESETS[name]()
    fn = rate_function(bl)
    n = len(bl.slot_names)
    assert abs(calibrate_phase_offset(fn, n - 1, n)) < 1e-8


def test_hasegawa_calibration():
    fn = rate_function(preset_hasegawa())
    assert abs(mermin(fn).value) < 1e-9
    offset = calibrate_phase_offset(fn, 2, 3)
    assert offset == pytest.approx(math.pi / 2, abs=1e-8)
    assert mermin(shifted(fn, 2, offset)).value == pytest.approx(4, abs=1e-9)
    # attributing the offset to another axis works just as well
    assert mermin(shifted(fn, 0, calibrate_phase_offset(fn, 0, 3))).value == pytest.approx(4, abs=1e-9)


def test_calibration_rejects_flat_fringe():
    with pytest.raises(WitnessError, match="no fringe"):
        calibrate_phase_offset(lambda a: 0.5, 0, 2)
    with pytest.raises(ValueError):
        calibrate_phase_offset(cosine_counts(), 3, 3)


def test_reduction_exact():
    report = mermin_reduction_check([2.0, 1.0, 0.5, 0.0])
    assert report.exact
    assert all(r.difference < 1e-12 for r in report.rows)
    assert report.rows[-1].chsh == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    assert "exact agreement" in report.summary()


def test_reduction_requires_zero_endpoint():
    with pytest.raises(ValueError):
        mermin_reduction_check([1.0, 0.5])
