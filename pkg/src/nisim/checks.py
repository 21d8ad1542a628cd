"""Fast self-checks of the simulator invariants, run by ``nisim check``."""
from __future__ import annotations

import math
from typing import Callable, Iterator

import numpy as np

from . import elements as el
from .dsl import load, preset_path
from .interferometer import PRESET_OFFSETS, PRESETS, generalized_ghz_beamline, rate_function, run
from .qstate import is_unitary
from .witness import calibrate_phase_offset, chsh, context_expectation, mermin, mermin_reduction_check, shifted

Check = tuple[str, Callable[[], float], float]


def _rate_law_error() -> float:
    rng = np.random.default_rng(2024)
    worst = 0.0
    for name, make in PRESETS.items():
        bl = make()
        for _ in range(20):
            s = {k: float(rng.uniform(-2 * math.pi, 2 * math.pi)) for k in bl.slot_names}
            ideal = 0.5 * (1 + math.cos(sum(s.values()) + PRESET_OFFSETS[name]))
            worst = max(worst, abs(run(bl, s).relative_rate - ideal))
    return worst


def _unitarity_error() -> float:
    ops = [
        el.entangler(el.EntanglerConfig("mwp", 0.4)),
        el.entangler(el.EntanglerConfig("rf3", 0.4)),
        el.entangler(el.EntanglerConfig("rf2", 0.4)),
        el.path_flipper_entangler(el.crystal_space()),
        el.energy_recombiner(el.crystal_space()),
    ]
    return max(float(np.max(np.abs(u.matrix.conj().T @ u.matrix - np.eye(len(u.matrix))))) for u in ops)


def _ghz_estimator_error() -> float:
    rng = np.random.default_rng(7)
    worst = 0.0
    for n in (2, 3, 4, 5):
        fn = rate_function(generalized_ghz_beamline(n))
        for _ in range(5):
            angles = rng.uniform(-math.pi, math.pi, n)
            worst = max(worst, abs(context_expectation(fn, angles) - math.cos(angles.sum())))
    return worst


def _hasegawa_calibrated_mermin() -> float:
    fn = rate_function(PRESETS["hasegawa"]())
    offset = calibrate_phase_offset(fn, 2, 3)
    return abs(mermin(shifted(fn, 2, offset)).value - 4)


def _dsl_equivalence() -> float:
    worst = 0.0
    grid = np.linspace(-math.pi, math.pi, 3)
    for name, make in PRESETS.items():
        a, b = make(), load(preset_path(name))
        for x in grid:
            s = {k: float(x) * (i + 1) for i, k in enumerate(a.slot_names)}
            worst = max(worst, abs(run(a, s).relative_rate - run(b, s).relative_rate))
    return worst


CHECKS: list[Check] = [
    ("entanglers are unitary", _unitarity_error, 1e-10),
    ("count-rate law 1/2[1+cos(sum+offset)]", _rate_law_error, 1e-10),
    ("CHSH = 2 sqrt 2 on the MWP preset", lambda: abs(chsh(rate_function(PRESETS["mwp"]())).value - 2 * math.sqrt(2)), 1e-9),
    ("Mermin = 4 on the RF3 preset", lambda: abs(mermin(rate_function(PRESETS["rf3"]())).value - 4), 1e-9),
    ("n-mode context estimator", _ghz_estimator_error, 1e-10),
    ("calibrated Hasegawa Mermin = 4", _hasegawa_calibrated_mermin, 1e-9),
    ("delta -> 0 reduces to two-mode CHSH", lambda: max(r.difference for r in mermin_reduction_check([1.0, 0.0]).rows), 1e-12),
    ("preset files match programmatic presets", _dsl_equivalence, 1e-10),
]


def run_checks() -> Iterator[tuple[str, bool, float]]:
    for name, fn, tol in CHECKS:
        err = fn()
        yield name, err < tol, err
