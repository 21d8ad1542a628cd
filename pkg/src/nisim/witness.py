"""Context expectations and CHSH / Mermin witnesses from count functions.

A count function maps one angle per mode to a (relative or absolute) count.
The estimator for a context is the signed ratio over the 2^n settings shifted
by multiples of pi:

    E = sum_mu (-1)^{|mu|} N(angles + mu pi) / sum_mu N(angles + mu pi)
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .elements import normalize_angle

CountFn = Callable[[Sequence[float]], float]

SQRT2 = math.sqrt(2.0)
X_ANGLE = 0.0
Y_ANGLE = math.pi / 2
# (sign, angles) for M = E[xxx] - E[xyy] - E[yxy] - E[yyx]
MERMIN_TERMS = (
    (+1, (X_ANGLE, X_ANGLE, X_ANGLE)),
    (-1, (X_ANGLE, Y_ANGLE, Y_ANGLE)),
    (-1, (Y_ANGLE, X_ANGLE, Y_ANGLE)),
    (-1, (Y_ANGLE, Y_ANGLE, X_ANGLE)),
)
# alpha1 + chi1 = -pi/4, alpha2 - alpha1 = chi2 - chi1 = pi/2
OPTIMAL_CHSH = (-math.pi / 4, math.pi / 4, 0.0, math.pi / 2)

WITHIN = "within-classical"
VIOLATES_CLASSICAL = "violates-classical"
VIOLATES_QUANTUM = "violates-quantum"
BOUND_TOL = 1e-9
REDUCTION_TOL = 1e-12


class WitnessError(ValueError):
    pass


def context_expectation(count_fn: CountFn, angles: Sequence[float]) -> float:
    angles = [float(a) for a in angles]
    if len(angles) < 2:
        raise WitnessError("a context needs at least two modes")
    num = den = scale = 0.0
    for mu in itertools.product((0, 1), repeat=len(angles)):
        n = float(count_fn([a + m * math.pi for a, m in zip(angles, mu)]))
        sign = -1.0 if sum(mu) % 2 else 1.0
        num += sign * n
        den += n
        scale += abs(n)
    if scale == 0.0 or abs(den) < 1e-12 * scale:
        raise WitnessError(f"no counts to normalize the context at angles {angles}")
    return num / den


@dataclass(frozen=True)
class WitnessResult:
    kind: str
    value: float
    classical_bound: float
    quantum_bound: float
    classification: str
    uncertainty: float | None = None
    contexts: tuple[tuple[tuple[float, ...], float], ...] = field(default=(), compare=False)

    FIELDS = ("kind", "value", "uncertainty", "classical_bound", "quantum_bound", "classification")

    def to_record(self) -> dict[str, object]:
        return {f: getattr(self, f) for f in self.FIELDS}


def classify(value: float, classical_bound: float, quantum_bound: float, uncertainty: float | None = None) -> str:
    """Classify |value| against the bounds, giving the benefit of the doubt within one uncertainty."""
    margin = abs(value) - (uncertainty or 0.0)
    if margin > quantum_bound + BOUND_TOL:
        return VIOLATES_QUANTUM
    if margin > classical_bound + BOUND_TOL:
        return VIOLATES_CLASSICAL
    return WITHIN


def linear_witness(
    count_fn: CountFn,
    terms: Sequence[tuple[float, Sequence[float]]],
    classical_bound: float,
    quantum_bound: float,
    kind: str = "custom",
    uncertainty: float | None = None,
) -> WitnessResult:
    """sum_k c_k E(context_k) with bound classification."""
    contexts = []
    value = 0.0
    for coeff, angles in terms:
        e = context_expectation(count_fn, angles)
        contexts.append((tuple(float(a) for a in angles), e))
        value += coeff * e
    return WitnessResult(
        kind,
        value,
        classical_bound,
        quantum_bound,
        classify(value, classical_bound, quantum_bound, uncertainty),
        uncertainty,
        tuple(contexts),
    )


def chsh_terms(alpha1: float, alpha2: float, chi1: float, chi2: float) -> list[tuple[float, tuple[float, float]]]:
    return [(1, (alpha1, chi1)), (1, (alpha1, chi2)), (1, (alpha2, chi1)), (-1, (alpha2, chi2))]


def chsh(
    count_fn: CountFn,
    alpha1: float = OPTIMAL_CHSH[0],
    alpha2: float = OPTIMAL_CHSH[1],
    chi1: float = OPTIMAL_CHSH[2],
    chi2: float = OPTIMAL_CHSH[3],
    visibility: float = 1.0,
    uncertainty: float | None = None,
) -> WitnessResult:
    """S = E(a1,c1) + E(a1,c2) + E(a2,c1) - E(a2,c2)."""
    return linear_witness(
        count_fn,
        chsh_terms(alpha1, alpha2, chi1, chi2),
        2 * visibility,
        2 * SQRT2 * visibility,
        "CHSH",
        uncertainty,
    )


def mermin(count_fn: CountFn, visibility: float = 1.0, uncertainty: float | None = None) -> WitnessResult:
    return linear_witness(count_fn, MERMIN_TERMS, 2 * visibility, 4 * visibility, "Mermin", uncertainty)


def shifted(count_fn: CountFn, axis: int, offset: float) -> CountFn:
    """Count function whose ``axis`` angle is measured relative to ``offset``."""

    def fn(angles: Sequence[float]) -> float:
        a = list(angles)
        a[axis] = a[axis] - offset
        return count_fn(a)

    return fn


@dataclass(frozen=True)
class FringeFit:
    offset: float
    contrast: float
    amplitude: float


def fit_fringe(phases: Sequence[float], counts: Sequence[float]) -> FringeFit:
    """Least-squares N = A [1 + v cos(phi + offset)]."""
    phases = np.asarray(phases, dtype=float)
    counts = np.asarray(counts, dtype=float)
    design = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    (a, b, c), *_ = np.linalg.lstsq(design, counts, rcond=None)
    if a <= 0:
        raise WitnessError("fringe fit found no positive mean count")
    return FringeFit(normalize_angle(math.atan2(-c, b)), math.hypot(b, c) / a, float(a))


def calibrate_phase_offset(count_fn: CountFn, axis: int, n_modes: int, points: int = 16) -> float:
    """Offset of the interferogram along ``axis`` with every other angle at 0."""
    if not 0 <= axis < n_modes:
        raise ValueError(f"axis {axis} outside 0..{n_modes - 1}")
    phases = [2 * math.pi * k / points for k in range(points)]
    counts = []
    for p in phases:
        angles = [0.0] * n_modes
        angles[axis] = p
        counts.append(count_fn(angles))
    fit = fit_fringe(phases, counts)
    if fit.contrast < 0.05:
        raise WitnessError(f"no fringe along axis {axis} (contrast {fit.contrast:.3g})")
    return fit.offset


@dataclass(frozen=True)
class ReductionRow:
    delta: float
    chsh: float
    reference: float
    difference: float
    marginals_match: bool


@dataclass(frozen=True)
class ReductionReport:
    rows: tuple[ReductionRow, ...]

    @property
    def exact(self) -> bool:
        return all(r.difference < REDUCTION_TOL and r.marginals_match for r in self.rows)

    def summary(self) -> str:
        lines = ["delta      S(gamma=0)          S(two-mode)         |diff|"]
        for r in self.rows:
            lines.append(f"{r.delta:<10.4g} {r.chsh:<19.15f} {r.reference:<19.15f} {r.difference:.3g}")
        lines.append("exact agreement" if self.exact else "agreement NOT exact")
        return "\n".join(lines)


def mermin_reduction_check(delta_sequence: Sequence[float], phi: float = 0.0) -> ReductionReport:
    """Compare the RF interferometer at each energy splitting with the two-mode CHSH value.

    The energy phase is frozen at 0; at delta == 0 the energy labels merge.
    """
    from .interferometer import preset_rf2, preset_rf3, rate_function

    deltas = [float(d) for d in delta_sequence]
    if not deltas or deltas[-1] != 0.0:
        raise ValueError("delta_sequence must end at 0")
    ref_fn = rate_function(preset_rf2(phi), ("alpha", "chi"))
    reference = chsh(ref_fn)
    rows = []
    for d in deltas:
        fn = rate_function(preset_rf3(phi, delta=d), ("alpha", "chi"), {"gamma": 0.0} if d != 0 else None)
        res = chsh(fn)
        marg = all(
            abs(e - e_ref) < REDUCTION_TOL for (_, e), (_, e_ref) in zip(res.contexts, reference.contexts)
        )
        rows.append(ReductionRow(d, res.value, reference.value, abs(res.value - reference.value), marg))
    return ReductionReport(tuple(rows))
