import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import proj_plus
from nisim import elements as el
from nisim.interferometer import (
    PRESET_OFFSETS,
    PRESETS,
    Analyzer,
    Beamline,
    CountTable,
    Fixed,
    PhaseSlot,
    SettingsError,
    generalized_ghz_beamline,
    preset_hasegawa,
    preset_mwp,
    preset_rf2,
    preset_rf3,
    product_grid,
    rate_function,
    run,
    scan,
)
from nisim.qstate import basis_state, expectation, superpose

angles = st.floats(-2 * math.pi, 2 * math.pi)


def ideal(total, offset=0.0):
    return 0.5 * (1 + math.cos(total + offset))


def test_rate_examples():
    assert run(preset_mwp(), {"alpha": 0, "chi": 0}).relative_rate == pytest.approx(1)
    assert run(preset_mwp(), {"alpha": math.pi, "chi": 0}).relative_rate == pytest.approx(0, abs=1e-12)
    rf3 = run(preset_rf3(), {"alpha": math.pi / 4, "chi": math.pi / 4, "gamma": 0})
    assert rf3.relative_rate == pytest.approx(0.5)
    has = run(preset_hasegawa(), {"alpha": 0, "chi": 0, "gamma": 0})
    assert has.relative_rate == pytest.approx(0.5)
    assert has.post_selection_prob == pytest.approx(0.5)


@pytest.mark.parametrize("name", list(PRESETS))
@given(data=st.data())
def test_rate_law_all_presets(name, data):
    bl = PRESETS[name]()
    s = {k: data.draw(angles, label=k) for k in bl.slot_names}
    assert run(bl, s).relative_rate == pytest.approx(ideal(sum(s.values()), PRESET_OFFSETS[name]), abs=1e-10)


@given(angles, angles, st.floats(-3, 3))
def test_rate_law_independent_of_larmor_phase(a, c, phi):
    assert run(preset_mwp(phi), {"alpha": a, "chi": c}).relative_rate == pytest.approx(ideal(a + c), abs=1e-10)
    assert run(preset_rf2(phi), {"alpha": a, "chi": c}).relative_rate == pytest.approx(ideal(a + c), abs=1e-10)


@given(angles, angles)
def test_two_mode_projector_proportionality(a, c):
    space = el.mwp_space()
    bell = superpose([(1, basis_state(space, ["up", "c"])), (1, basis_state(space, ["dn", "d"]))])
    op = (el.projector_plus(space, "spin", a) @ el.projector_plus(space, "path", c)).with_tags("projector")
    rate = run(preset_mwp(), {"alpha": a, "chi": c}).relative_rate
    assert expectation(op, bell) == pytest.approx(rate / 2, abs=1e-10)


@pytest.mark.parametrize("n", range(2, 7))
def test_generalized_ghz_rate_law(n, rng):
    bl = generalized_ghz_beamline(n)
    assert bl.slot_names == tuple(f"phi{l}" for l in range(n))
    for _ in range(10):
        phis = rng.uniform(-math.pi, math.pi, n)
        r = run(bl, dict(zip(bl.slot_names, phis))).relative_rate
        assert r == pytest.approx(ideal(phis.sum()), abs=1e-10)


def test_generalized_ghz_examples():
    assert run(generalized_ghz_beamline(3), {f"phi{l}": 0 for l in range(3)}).relative_rate == pytest.approx(1)
    r = run(generalized_ghz_beamline(4), {f"phi{l}": math.pi / 4 for l in range(4)}).relative_rate
    assert r == pytest.approx(0, abs=1e-12)
    with pytest.raises(ValueError):
        generalized_ghz_beamline(7)
    with pytest.raises(ValueError):
        generalized_ghz_beamline(1)


def test_unbound_and_unknown_slots():
    with pytest.raises(SettingsError, match="unbound slot gamma"):
        run(preset_rf3(), {"alpha": 0, "chi": 0})
    with pytest.raises(SettingsError, match="delta"):
        run(preset_mwp(), {"alpha": 0, "chi": 0, "delta": 1})


def test_beamline_validation():
    space = el.mwp_space()
    psi = basis_state(space, ["up", "a"])
    with pytest.raises(ValueError, match="duplicate"):
        Beamline(space, psi, (PhaseSlot("alpha", "spin"), PhaseSlot("alpha", "path")))
    with pytest.raises(ValueError):
        Beamline(space, psi, (Fixed(el.dc_flipper(el.rf2_space())),))
    with pytest.raises(el.ShapeError):
        Beamline(space, psi, (PhaseSlot("x", "energy"),))


def test_analyzer_angle_shifts_fringe():
    bl = preset_mwp()
    tilted = Beamline(bl.space, bl.input, bl.stages, Analyzer("spin", 0.5))
    assert run(tilted, {"alpha": 0.5, "chi": 0}).relative_rate == pytest.approx(1)


def test_rate_function_defaults_and_order():
    fn = rate_function(preset_rf3(), ("gamma", "alpha"))
    assert fn([math.pi, 0]) == pytest.approx(0, abs=1e-12)
    fixed = rate_function(preset_rf3(), ("alpha", "chi"), {"gamma": math.pi})
    assert fixed([0, 0]) == pytest.approx(0, abs=1e-12)


def test_scan_examples():
    bl = preset_mwp()
    table = scan(bl, product_grid({"alpha": [0, math.pi / 2, math.pi, 3 * math.pi / 2], "chi": [0]}))
    assert np.allclose(table.rates, [1, 0.5, 0, 0.5], atol=1e-12)
    assert len(scan(bl, [{"alpha": 0.1, "chi": 0.2}])) == 1
    mermin_grid = product_grid({"alpha": [0, math.pi], "chi": [0, math.pi], "gamma": [0, math.pi]})
    assert len(scan(preset_rf3(), mermin_grid)) == 8
    with pytest.raises(ValueError):
        scan(bl, [])


def test_scan_threaded_matches_serial():
    grid = product_grid({"alpha": np.linspace(0, 6, 7), "chi": [0.1, 0.9], "gamma": [0.3]})
    a = scan(preset_rf3(), grid)
    b = scan(preset_rf3(), grid, max_workers=4)
    assert a.rates == b.rates and a.settings == b.settings


def test_columns_canonical_order():
    assert preset_hasegawa().columns == ("alpha", "chi", "gamma")


def test_count_table_csv_round_trip():
    grid = product_grid({"alpha": [0, 1.25], "chi": [0.5]})
    table = scan(preset_mwp(), grid)
    table.counts = [10, 3]
    table.metadata = {"seed": 4}
    back = CountTable.from_csv(table.to_csv())
    assert back.columns == table.columns
    assert back.rates == table.rates
    assert back.counts == [10, 3]
    assert back.metadata == {"seed": "4"}


def test_hasegawa_stage_states():
    """Spot-check intermediate states against the hand derivation."""
    space = el.crystal_space()
    chi = 0.6
    from nisim.qstate import apply, project

    psi = basis_state(space, ["up", "II", "E0"])
    psi = apply(el.crystal_beamsplitter(space), psi)
    psi = apply(el.path_flipper_entangler(space), psi)
    psi = apply(el.phase_shifter(space, "path", chi, ("I", "II")), psi)
    psi3, prob = project(el.blade_projection(space), psi)
    assert prob == pytest.approx(0.5)
    expected = superpose(
        [(1, basis_state(space, ["up", "I", "E0"])), (np.exp(1j * (chi + math.pi / 2)), basis_state(space, ["dn", "I", "E2"]))]
    )
    # blade projection leaves an overall sign/phase; compare up to it
    assert psi3.fidelity(expected) == pytest.approx(1)


def test_projector_oracle_for_local_analyzer():
    assert np.allclose(el.projector_plus(el.make_space([el.spin_space_spec()]), "spin", 0.2).matrix, proj_plus(0.2))
