"""Beamlines: an input state, a pipeline of stages, and a spin analyzer."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from . import elements as el
from .qstate import (
    ElementOperator,
    ProductSpace,
    StateVector,
    SubsystemSpec,
    apply,
    expectation,
    make_space,
    product_state,
    project,
)

RATE_TOL = 1e-12


class SettingsError(ValueError):
    """Phase settings do not match the beamline's slots."""


# Column order used for count tables; other slot names follow in pipeline order.
CANONICAL_SLOTS = ("alpha", "chi", "gamma")


@dataclass(frozen=True, eq=False)
class Fixed:
    op: ElementOperator
    name: str = ""


@dataclass(frozen=True)
class PhaseSlot:
    """A phase shifter whose angle is bound at run time."""

    name: str
    subsystem: str
    pair: tuple[str, str] | None = None


@dataclass(frozen=True, eq=False)
class Projection:
    """Post-selection: apply ``op`` and renormalize, recording the survival probability."""

    op: ElementOperator
    name: str = ""


Stage = Union[Fixed, PhaseSlot, Projection]


@dataclass(frozen=True)
class Analyzer:
    subsystem: str = "spin"
    angle: float = 0.0
    pair: tuple[str, str] | None = None


@dataclass(frozen=True, eq=False)
class Beamline:
    space: ProductSpace
    input: StateVector
    stages: tuple[Stage, ...]
    analyzer: Analyzer = Analyzer()
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "stages", tuple(self.stages))
        if self.input.space != self.space:
            raise ValueError("input state lives on a different space")
        seen: set[str] = set()
        n_proj = 0
        for st in self.stages:
            if isinstance(st, (Fixed, Projection)):
                if st.op.space != self.space:
                    raise ValueError(f"stage {st.name or type(st).__name__} lives on a different space")
                n_proj += isinstance(st, Projection)
            elif isinstance(st, PhaseSlot):
                if st.name in seen:
                    raise ValueError(f"duplicate slot name {st.name!r}")
                seen.add(st.name)
                # validates subsystem and pair
                el.phase_shifter(self.space, st.subsystem, 0.0, st.pair)
            else:
                raise TypeError(f"unknown stage {st!r}")
        if n_proj > 1:
            raise ValueError("at most one projection stage besides the analyzer is allowed")
        el.projector_plus(self.space, self.analyzer.subsystem, self.analyzer.angle, self.analyzer.pair)

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(st.name for st in self.stages if isinstance(st, PhaseSlot))

    @property
    def columns(self) -> tuple[str, ...]:
        names = self.slot_names
        known = [n for n in CANONICAL_SLOTS if n in names]
        return tuple(known + [n for n in names if n not in known])


@dataclass(frozen=True, eq=False)
class RateResult:
    relative_rate: float
    final_state: StateVector
    post_selection_prob: float = 1.0


def run(beamline: Beamline, settings: Mapping[str, float]) -> RateResult:
    """Propagate the input through every stage and read the analyzer.

    The relative rate is ``<psi_f| P_analyzer |psi_f>``, i.e. N / N_max with the
    maximum fixed analytically at 1.
    """
    slots = beamline.slot_names
    missing = [s for s in slots if s not in settings]
    if missing:
        raise SettingsError(f"unbound slot {missing[0]}" if len(missing) == 1 else f"unbound slots {', '.join(missing)}")
    extra = [k for k in settings if k not in slots]
    if extra:
        raise SettingsError(f"settings name unknown slot(s) {', '.join(extra)}")
    psi = beamline.input
    prob = 1.0
    for st in beamline.stages:
        if isinstance(st, Fixed):
            psi = apply(st.op, psi)
        elif isinstance(st, PhaseSlot):
            psi = apply(el.phase_shifter(beamline.space, st.subsystem, float(settings[st.name]), st.pair), psi)
        else:
            psi, p = project(st.op, psi)
            prob *= p
    an = beamline.analyzer
    rate = float(expectation(el.projector_plus(beamline.space, an.subsystem, an.angle, an.pair), psi))
    if rate < -RATE_TOL or rate > 1 + RATE_TOL:
        raise ArithmeticError(f"relative rate {rate!r} outside [0, 1]")
    return RateResult(min(max(rate, 0.0), 1.0), psi, prob)


def rate_function(beamline: Beamline, names: Sequence[str] | None = None, fixed: Mapping[str, float] | None = None):
    """Adapt a beamline into ``f(angles) -> relative rate`` over the slots ``names``.

    Slots not in ``names`` are held at the values in ``fixed`` (default 0).
    """
    names = tuple(names) if names is not None else beamline.columns
    fixed = dict(fixed or {})
    for n in beamline.slot_names:
        if n not in names:
            fixed.setdefault(n, 0.0)

    def count(angles: Sequence[float]) -> float:
        if len(angles) != len(names):
            raise ValueError(f"expected {len(names)} angles for slots {names}")
        settings = dict(fixed)
        settings.update(zip(names, (float(a) for a in angles)))
        return run(beamline, settings).relative_rate

    count.slots = names  # type: ignore[attr-defined]
    return count


# -- count tables -------------------------------------------------------------


def _fmt_angle(x: float) -> str:
    return f"{x:.12g}"


@dataclass
class CountTable:
    """Rows of phase settings with their relative rates and, once sampled, integer counts."""

    columns: tuple[str, ...]
    settings: list[tuple[float, ...]]
    rates: list[float]
    counts: list[int] | None = None
    metadata: dict[str, object] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rates)

    def rows(self) -> list[dict[str, float]]:
        out = []
        for i, s in enumerate(self.settings):
            row: dict[str, float] = {c: float(_fmt_angle(a)) for c, a in zip(self.columns, s)}
            row["rate"] = self.rates[i]
            if self.counts is not None:
                row["counts"] = self.counts[i]
            out.append(row)
        return out

    def to_csv(self, degrees: bool = False) -> str:
        buf = io.StringIO()
        if self.metadata:
            buf.write("# " + " ".join(f"{k}={v}" for k, v in self.metadata.items()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        header = list(self.columns) + ["rate"] + (["counts"] if self.counts is not None else [])
        w.writerow(header)
        for i, s in enumerate(self.settings):
            angles = [math.degrees(a) if degrees else a for a in s]
            row = [_fmt_angle(a) for a in angles] + [repr(float(self.rates[i]))]
            if self.counts is not None:
                row.append(str(int(self.counts[i])))
            w.writerow(row)
        return buf.getvalue()

    def to_json(self, degrees: bool = False) -> str:
        rows = []
        for i, s in enumerate(self.settings):
            row: dict[str, object] = {
                c: float(_fmt_angle(math.degrees(a) if degrees else a)) for c, a in zip(self.columns, s)
            }
            row["rate"] = float(self.rates[i])
            if self.counts is not None:
                row["counts"] = int(self.counts[i])
            rows.append(row)
        doc = {"columns": list(self.columns), "metadata": self.metadata, "rows": rows}
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> CountTable:
        lines = text.splitlines()
        metadata: dict[str, object] = {}
        while lines and lines[0].startswith("#"):
            for item in lines.pop(0)[1:].split():
                k, _, v = item.partition("=")
                metadata[k] = v
        reader = csv.reader(lines)
        header = next(reader)
        has_counts = header[-1] == "counts"
        ncol = len(header) - (2 if has_counts else 1)
        settings, rates, counts = [], [], []
        for row in reader:
            settings.append(tuple(float(x) for x in row[:ncol]))
            rates.append(float(row[ncol]))
            if has_counts:
                counts.append(int(row[ncol + 1]))
        return cls(tuple(header[:ncol]), settings, rates, counts if has_counts else None, metadata)


def scan(
    beamline: Beamline, grid: Iterable[Mapping[str, float]], max_workers: int | None = None
) -> CountTable:
    """Run every setting in ``grid``; output order is grid order."""
    grid = [dict(g) for g in grid]
    if not grid:
        raise ValueError("scan grid is empty")
    cols = beamline.columns
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            results = list(pool.map(lambda g: run(beamline, g), grid))
    else:
        results = [run(beamline, g) for g in grid]
    settings = [tuple(float(g[c]) for c in cols) for g in grid]
    return CountTable(cols, settings, [r.relative_rate for r in results])


def product_grid(axes: Mapping[str, Sequence[float]]) -> list[dict[str, float]]:
    """Cartesian grid, first axis slowest."""
    names = list(axes)
    return [dict(zip(names, combo)) for combo in itertools.product(*(axes[n] for n in names))]


# -- presets ------------------------------------------------------------------


def _plus_x() -> np.ndarray:
    return np.array([1, 1], dtype=complex) / math.sqrt(2)


def preset_mwp(phi: float = 0.0, redefined: bool = True) -> Beamline:
    space = el.mwp_space()
    u = el.mwp_entangler(el.EntanglerConfig("mwp", phi, use_redefined_basis=redefined), space)
    return Beamline(
        space,
        product_state(space, {"spin": _plus_x(), "path": "a"}),
        (
            Fixed(u, "mwp_entangler"),
            PhaseSlot("alpha", "spin"),
            PhaseSlot("chi", "path", ("c", "d")),
            Fixed(u.dagger(), "mwp_disentangler"),
        ),
        Analyzer("spin", 0.0),
        name="mwp",
    )


def preset_rf3(phi: float = 0.0, delta: float = 1.0, redefined: bool = True) -> Beamline:
    """Three-mode RF interferometer; ``delta == 0`` merges the energy labels (two-mode limit)."""
    if delta == 0:
        bl = preset_rf2(phi, redefined)
        return Beamline(bl.space, bl.input, bl.stages, bl.analyzer, name="rf3[delta=0]")
    space = el.rf3_space()
    u = el.rf3_entangler(el.EntanglerConfig("rf3", phi, delta, redefined), space)
    return Beamline(
        space,
        product_state(space, {"spin": _plus_x(), "path": "0", "energy": "E0"}),
        (
            Fixed(u, "rf3_entangler"),
            PhaseSlot("alpha", "spin"),
            PhaseSlot("chi", "path", ("1", "2")),
            PhaseSlot("gamma", "energy", ("E-", "E+")),
            Fixed(u.dagger(), "rf3_disentangler"),
        ),
        Analyzer("spin", 0.0),
        name="rf3",
    )


def preset_rf2(phi: float = 0.0, redefined: bool = True) -> Beamline:
    space = el.rf2_space()
    u = el.rf2_entangler(el.EntanglerConfig("rf2", phi, 0.0, redefined), space)
    return Beamline(
        space,
        product_state(space, {"spin": _plus_x(), "path": "0"}),
        (
            Fixed(u, "rf2_entangler"),
            PhaseSlot("alpha", "spin"),
            PhaseSlot("chi", "path", ("1", "2")),
            Fixed(u.dagger(), "rf2_disentangler"),
        ),
        Analyzer("spin", 0.0),
        name="rf2",
    )


def preset_hasegawa() -> Beamline:
    """Perfect-crystal interferometer with a single path-II RF flipper."""
    space = el.crystal_space()
    return Beamline(
        space,
        product_state(space, {"spin": "up", "path": "II", "energy": "E0"}),
        (
            Fixed(el.crystal_beamsplitter(space), "crystal_beamsplitter"),
            Fixed(el.path_flipper_entangler(space), "path_flipper_entangler"),
            PhaseSlot("chi", "path", ("I", "II")),
            Projection(el.blade_projection(space), "blade_projection"),
            PhaseSlot("gamma", "energy", ("E0", "E2")),
            Fixed(el.energy_recombiner(space), "energy_recombiner"),
            Fixed(el.dc_flipper(space), "dc_flipper"),
            PhaseSlot("alpha", "spin"),
        ),
        Analyzer("spin", 0.0),
        name="hasegawa",
    )


PRESETS = {
    "mwp": preset_mwp,
    "rf3": preset_rf3,
    "rf2": preset_rf2,
    "hasegawa": preset_hasegawa,
}

# Offset in the ideal count law 1 + cos(sum of angles + offset).
PRESET_OFFSETS = {"mwp": 0.0, "rf3": 0.0, "rf2": 0.0, "hasegawa": math.pi / 2}

MAX_GHZ_MODES = 6


def ghz_space(n: int) -> ProductSpace:
    return make_space([SubsystemSpec.of("spin" if l == 0 else f"mode{l}", ("up", "dn")) for l in range(n)])


def fanout_entangler(space: ProductSpace) -> ElementOperator:
    """|x, 0, ..., 0> -> |x, x, ..., x>: copies mode 0 into every other mode (bitwise XOR)."""
    n = len(space.subsystems)
    dim = space.total_dim
    m = np.zeros((dim, dim), dtype=complex)
    for idx in range(dim):
        bits = [(idx >> (n - 1 - k)) & 1 for k in range(n)]
        out = [bits[0]] + [b ^ bits[0] for b in bits[1:]]
        m[int("".join(map(str, out)), 2), idx] = 1
    return ElementOperator(space, m, frozenset({"unitary"}))


def generalized_ghz_beamline(n: int) -> Beamline:
    """n two-level modes: GHZ preparation, phases phi0..phi{n-1}, disentangler, spin analyzer.

    The disentangler leaves the auxiliary modes in |up ... up>, a fixed choice
    standing in for the unspecified auxiliary state.
    """
    if not 2 <= n <= MAX_GHZ_MODES:
        raise ValueError(f"n must be in [2, {MAX_GHZ_MODES}], got {n}")
    space = ghz_space(n)
    u = fanout_entangler(space)
    factors: dict[str, object] = {s.label: "up" for s in space.subsystems}
    factors["spin"] = _plus_x()
    stages: list[Stage] = [Fixed(u, "ghz_entangler")]
    stages += [PhaseSlot(f"phi{l}", space.labels[l]) for l in range(n)]
    stages.append(Fixed(u.dagger(), "ghz_disentangler"))
    return Beamline(space, product_state(space, factors), tuple(stages), Analyzer("spin", 0.0), name=f"ghz{n}")
