import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nisim.interferometer import preset_mwp, preset_rf2, preset_rf3, product_grid, rate_function, scan
from nisim.noise import (
    ShotConfig,
    ShotNoiseCounts,
    VisibilityModel,
    apply_visibility,
    draw,
    sample_counts,
    visibility_scaled,
    witness_uncertainty,
)


def test_visibility_examples():
    assert apply_visibility(0.3, 1.0) == pytest.approx(0.3)
    assert apply_visibility(1.0, 0.78) == pytest.approx(0.89)
    assert apply_visibility(0.0, 0.0) == 0.5 == apply_visibility(1.0, 0.0)
    with pytest.raises(ValueError):
        VisibilityModel(1.2)
    with pytest.raises(ValueError):
        apply_visibility(0.5, -0.1)


@given(st.floats(0, 1), st.floats(0, 1))
def test_visibility_keeps_rates_in_range(rate, v):
    assert 0 <= apply_visibility(rate, v) <= 1


def test_shot_config_validation():
    with pytest.raises(ValueError):
        ShotConfig(0)
    with pytest.raises(ValueError):
        ShotConfig(10, sampler="gaussian")
    with pytest.raises(ValueError):
        ShotConfig(10, seed=-1)


def test_draw_examples():
    cfg = ShotConfig(1e6, seed=3)
    n = draw(1e6, cfg, 0, 0)
    assert abs(n - 1e6) < 5 * math.sqrt(1e6)
    assert all(draw(0.0, cfg, 0, k) == 0 for k in range(20))
    assert draw(123.4, cfg, 7, 2) == draw(123.4, cfg, 7, 2)
    assert draw(123.4, ShotConfig(1, sampler="deterministic")) == 123


@given(st.integers(0, 2**32), st.integers(0, 100))
def test_draws_reproducible_for_fixed_seed(seed, key):
    cfg = ShotConfig(1e4, seed=seed)
    assert draw(5e3, cfg, key) == draw(5e3, cfg, key)


def test_sample_counts_metadata_and_determinism():
    table = scan(preset_mwp(), product_grid({"alpha": np.linspace(0, 6, 5), "chi": [0]}))
    cfg = ShotConfig(1e4, seed=11)
    a = sample_counts(table, cfg, v=0.78)
    b = sample_counts(table, cfg, v=0.78)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().startswith("# seed=11 n0=10000.0 v=0.78\n")
    assert sample_counts(table, cfg, repetition=1).counts != a.counts


def test_shot_noise_mean_matches_rate():
    fn = lambda a: 0.25  # noqa: E731
    sampler = ShotNoiseCounts(fn, ShotConfig(1e4, seed=1))
    draws = [sampler.realization(k)([0.0, 0.0]) for k in range(400)]
    assert np.mean(draws) == pytest.approx(2500, rel=5 * 0.02 / math.sqrt(400))


def test_realization_reuses_draw_for_same_setting():
    sampler = ShotNoiseCounts(rate_function(preset_mwp()), ShotConfig(1e3, seed=2))
    fn = sampler.realization(0)
    assert fn([0.1, 0.2]) == fn([0.1 + 2 * math.pi, 0.2])


def test_witness_uncertainty_chsh_limit():
    v = 0.78
    fn = visibility_scaled(rate_function(preset_rf2()), v)
    mean, std = witness_uncertainty(ShotNoiseCounts(fn, ShotConfig(1e8, seed=5)), "chsh", 20, visibility=v)
    assert mean == pytest.approx(2 * math.sqrt(2) * v, abs=5 * std + 1e-6)
    assert std < 1e-3


def test_witness_uncertainty_mermin_seeded():
    fn = visibility_scaled(rate_function(preset_rf3()), 0.78)
    args = dict(visibility=0.78)
    r1 = witness_uncertainty(ShotNoiseCounts(fn, ShotConfig(1e6, seed=9)), "mermin", 30, **args)
    r2 = witness_uncertainty(ShotNoiseCounts(fn, ShotConfig(1e6, seed=9)), "mermin", 30, **args)
    assert r1 == r2
    assert abs(r1[0] - 3.12) < 3 * r1[1]
    with pytest.raises(ValueError):
        witness_uncertainty(ShotNoiseCounts(fn, ShotConfig(1e6)), "mermin", 5)
    with pytest.raises(ValueError):
        witness_uncertainty(ShotNoiseCounts(fn, ShotConfig(1e6)), "bell", 10)
