"""Device operators: Pauli-plane observables, projectors, entanglers, phase shifters.

Hamiltonian-based entanglers are built as ``exp(-i H pi/2)`` followed by the
Larmor rotation ``exp(i phi sigma_z)``. With ``use_redefined_basis`` the output
path states absorb the transition phases so that the entangler maps the
product input onto a Bell/GHZ state with real amplitudes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qstate import (
    HERMITIAN,
    PROJECTOR,
    UNITARY,
    SIGMA_X,
    SIGMA_Y,
    ElementOperator,
    ProductSpace,
    SubsystemSpec,
    embed_op,
    exp_i,
    make_space,
)

HALF_PI = math.pi / 2

# Named basis states of the standard subsystems.
SPIN_NAMES = ("up", "dn")
RF_PATH_NAMES = ("0", "1", "2")
RF_ENERGY_NAMES = ("E-", "E0", "E+")
CRYSTAL_PATH_NAMES = ("I", "II")
CRYSTAL_ENERGY_NAMES = ("E0", "E1", "E2")

# Default two-state sub-basis used by Pauli-plane operators on 3-dim subsystems.
_EFFECTIVE_PAIRS = {
    RF_PATH_NAMES: ("1", "2"),
    RF_ENERGY_NAMES: ("E-", "E+"),
    CRYSTAL_ENERGY_NAMES: ("E0", "E2"),
}

ENTANGLER_KINDS = ("mwp", "rf3", "rf2", "crystal_rf")


class ShapeError(ValueError):
    """The operator does not fit the given product space."""


def normalize_angle(angle: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.remainder(float(angle), 2 * math.pi)
    return math.pi if a == -math.pi else a


def spin_space_spec() -> SubsystemSpec:
    return SubsystemSpec.of("spin", SPIN_NAMES)


def mwp_space() -> ProductSpace:
    """spin x path, with the input paths a/b aliased onto the output paths c/d."""
    return make_space([spin_space_spec(), SubsystemSpec.of("path", ("c", "d"), {"a": 0, "b": 1})])


def rf3_space() -> ProductSpace:
    return make_space(
        [spin_space_spec(), SubsystemSpec.of("path", RF_PATH_NAMES), SubsystemSpec.of("energy", RF_ENERGY_NAMES)]
    )


def rf2_space() -> ProductSpace:
    return make_space([spin_space_spec(), SubsystemSpec.of("path", RF_PATH_NAMES)])


def crystal_space() -> ProductSpace:
    return make_space(
        [
            spin_space_spec(),
            SubsystemSpec.of("path", CRYSTAL_PATH_NAMES),
            SubsystemSpec.of("energy", CRYSTAL_ENERGY_NAMES),
        ]
    )


@dataclass(frozen=True)
class EntanglerConfig:
    """Settings of one entangler device.

    ``delta`` stands in for the RF energy splitting: only whether it is zero
    matters (zero merges the energy labels, which turns rf3 into rf2).
    """

    kind: str
    larmor_phi: float = 0.0
    delta: float | None = None
    use_redefined_basis: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ENTANGLER_KINDS:
            raise ValueError(f"unknown entangler kind {self.kind!r}")
        if not math.isfinite(self.larmor_phi):
            raise ValueError("larmor_phi must be finite")
        if self.delta is None:
            object.__setattr__(self, "delta", 0.0 if self.kind == "rf2" else 1.0)
        if self.kind == "rf2" and self.delta != 0:
            raise ValueError("rf2 requires delta=0")


def _check_shape(space: ProductSpace, expected: Sequence[tuple[str, int]], what: str) -> None:
    got = tuple(zip(space.labels, space.dims))
    if got != tuple(expected):
        want = ", ".join(f"{l}:{d}" for l, d in expected)
        have = ", ".join(f"{l}:{d}" for l, d in got)
        raise ShapeError(f"{what} needs space [{want}], got [{have}]")


def _require(space: ProductSpace, label: str, dim: int | None, what: str) -> SubsystemSpec:
    try:
        sub = space.subsystem(label)
    except KeyError:
        raise ShapeError(f"{what} needs a {label!r} subsystem") from None
    if dim is not None and sub.dim != dim:
        raise ShapeError(f"{what} needs {label}:{dim}, got {label}:{sub.dim}")
    return sub


def _pair_indices(sub: SubsystemSpec, pair: Sequence[str] | None) -> tuple[int, int]:
    if pair is None:
        if sub.dim == 2:
            return 0, 1
        if sub.basis_names in _EFFECTIVE_PAIRS:
            pair = _EFFECTIVE_PAIRS[sub.basis_names]
        else:
            raise ShapeError(
                f"subsystem {sub.label!r} has dim {sub.dim}; name the two-state sub-basis with pair=..."
            )
    if len(pair) != 2:
        raise ValueError("pair must name exactly two basis states")
    i, j = sub.index(pair[0]), sub.index(pair[1])
    if i == j:
        raise ValueError(f"pair states must be distinct, got {pair[0]!r} twice")
    return i, j


def sigma_plane(
    space: ProductSpace, subsystem: str, angle: float, pair: Sequence[str] | None = None
) -> ElementOperator:
    """cos(angle) sigma_x + sin(angle) sigma_y on a two-state (sub-)basis.

    On a 3-dim subsystem the operator vanishes outside the pair, so it is
    hermitian but not unitary there.
    """
    sub = _require(space, subsystem, None, "sigma_plane")
    i, j = _pair_indices(sub, pair)
    local2 = math.cos(angle) * SIGMA_X + math.sin(angle) * SIGMA_Y
    local = np.zeros((sub.dim, sub.dim), dtype=complex)
    local[np.ix_([i, j], [i, j])] = local2
    tags = {HERMITIAN, UNITARY} if sub.dim == 2 else {HERMITIAN}
    return embed_op(space, subsystem, local, tags)


def projector_plus(
    space: ProductSpace, subsystem: str, angle: float, pair: Sequence[str] | None = None
) -> ElementOperator:
    """|+,angle><+,angle| with |+,angle> = (|first> + e^{i angle}|second>)/sqrt 2."""
    sub = _require(space, subsystem, None, "projector_plus")
    i, j = _pair_indices(sub, pair)
    v = np.zeros(sub.dim, dtype=complex)
    v[i] = 1 / math.sqrt(2)
    v[j] = np.exp(1j * angle) / math.sqrt(2)
    return embed_op(space, subsystem, np.outer(v, v.conj()), {HERMITIAN, PROJECTOR})


def phase_shifter(
    space: ProductSpace, subsystem: str, angle: float, pair: Sequence[str] | None = None
) -> ElementOperator:
    """Relative phase e^{i angle} on the second state of ``pair``; identity elsewhere."""
    sub = _require(space, subsystem, None, "phase_shifter")
    _, j = _pair_indices(sub, pair)
    diag = np.ones(sub.dim, dtype=complex)
    diag[j] = np.exp(1j * angle)
    return embed_op(space, subsystem, np.diag(diag), {UNITARY})


def larmor(space: ProductSpace, phi: float) -> ElementOperator:
    """exp(i phi sigma_z) on the spin."""
    _require(space, "spin", 2, "larmor")
    return embed_op(space, "spin", np.diag([np.exp(1j * phi), np.exp(-1j * phi)]), {UNITARY})


def dc_flipper(space: ProductSpace) -> ElementOperator:
    _require(space, "spin", 2, "dc_flipper")
    return embed_op(space, "spin", SIGMA_X, {UNITARY, HERMITIAN})


def mwp_beamsplitter(
    space: ProductSpace, t_up: float, r_up: float, t_dn: float, r_dn: float
) -> ElementOperator:
    _check_shape(space, [("spin", 2), ("path", 2)], "mwp_beamsplitter")
    for t, r, s in ((t_up, r_up, "up"), (t_dn, r_dn, "dn")):
        if abs(t * t + r * r - 1) > 1e-10:
            raise ValueError(f"t_{s}^2 + r_{s}^2 must equal 1, got {t * t + r * r!r}")
    up = np.array([[t_up, 1j * r_up], [1j * r_up, t_up]])
    dn = np.array([[t_dn, 1j * r_dn], [1j * r_dn, t_dn]])
    m = np.zeros((4, 4), dtype=complex)
    m[:2, :2] = up
    m[2:, 2:] = dn
    return ElementOperator(space, m, frozenset({UNITARY}))


def _redefine(op: ElementOperator, subsystem: str, phases: Sequence[complex]) -> ElementOperator:
    """Matrix of ``op`` in the basis where |k> -> phases[k] |k> on ``subsystem``."""
    change = embed_op(op.space, subsystem, np.diag(np.asarray(phases, dtype=complex)), {UNITARY})
    return change.dagger() @ op @ change


def mwp_entangler(config: EntanglerConfig, space: ProductSpace | None = None) -> ElementOperator:
    space = space or mwp_space()
    _check_shape(space, [("spin", 2), ("path", 2)], "mwp_entangler")
    if config.kind != "mwp":
        raise ValueError(f"mwp_entangler got a {config.kind!r} config")
    phi = config.larmor_phi
    u = larmor(space, phi) @ mwp_beamsplitter(space, 1.0, 0.0, 0.0, 1.0)
    if config.use_redefined_basis:
        u = _redefine(u, "path", [1.0, 1j * np.exp(-2j * phi)])
    return u


def rf3_hamiltonian(space: ProductSpace) -> ElementOperator:
    """(|up 1><up 0| + |dn 0><dn 2|) x T + h.c. with T = |E0><E+| + |E-><E0|."""
    _check_shape(space, [("spin", 2), ("path", 3), ("energy", 3)], "rf3 hamiltonian")
    return _rf_hamiltonian(space, energy=True)


def rf2_hamiltonian(space: ProductSpace) -> ElementOperator:
    """|up 1><up 0| + |dn 2><dn 0| + h.c."""
    _check_shape(space, [("spin", 2), ("path", 3)], "rf2 hamiltonian")
    return _rf_hamiltonian(space, energy=False)


def _ket_bra(dim: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((dim, dim), dtype=complex)
    m[i, j] = 1
    return m


def _rf_hamiltonian(space: ProductSpace, energy: bool) -> ElementOperator:
    p_up, p_dn = _ket_bra(2, 0, 0), _ket_bra(2, 1, 1)
    up_path = _ket_bra(3, 1, 0)  # |1><0|
    dn_path = _ket_bra(3, 0, 2)  # |0><2|
    if energy:
        # energy order E-, E0, E+
        t = _ket_bra(3, 1, 2) + _ket_bra(3, 0, 1)
    else:
        # merged energy labels: T collapses to the scalar 1
        t = np.ones((1, 1))
    half = np.kron(np.kron(p_up, up_path) + np.kron(p_dn, dn_path), t)
    h = half + half.conj().T
    return ElementOperator(space, h, frozenset({HERMITIAN}))


def _rf_entangler(config: EntanglerConfig, space: ProductSpace, energy: bool) -> ElementOperator:
    h = _rf_hamiltonian(space, energy)
    phi = config.larmor_phi
    u = larmor(space, phi) @ exp_i(h, HALF_PI)
    if config.use_redefined_basis:
        u = _redefine(u, "path", [1.0, -1j * np.exp(1j * phi), -1j * np.exp(-1j * phi)])
    return u


def rf3_entangler(config: EntanglerConfig, space: ProductSpace | None = None) -> ElementOperator:
    """Spin-path-energy entangler; with delta == 0 the energy labels merge and this is rf2."""
    if config.kind not in ("rf3", "rf2"):
        raise ValueError(f"rf3_entangler got a {config.kind!r} config")
    if config.delta == 0:
        space = space or rf2_space()
        _check_shape(space, [("spin", 2), ("path", 3)], "rf3_entangler with delta=0")
        return _rf_entangler(config, space, energy=False)
    space = space or rf3_space()
    _check_shape(space, [("spin", 2), ("path", 3), ("energy", 3)], "rf3_entangler")
    return _rf_entangler(config, space, energy=True)


def rf2_entangler(config: EntanglerConfig, space: ProductSpace | None = None) -> ElementOperator:
    if config.delta != 0:
        raise ValueError("rf2 requires delta=0")
    space = space or rf2_space()
    _check_shape(space, [("spin", 2), ("path", 3)], "rf2_entangler")
    return _rf_entangler(config, space, energy=False)


def entangler(config: EntanglerConfig, space: ProductSpace | None = None) -> ElementOperator:
    if config.kind == "mwp":
        return mwp_entangler(config, space)
    if config.kind == "rf3":
        return rf3_entangler(config, space)
    if config.kind == "rf2":
        return rf2_entangler(config, space)
    return path_flipper_entangler(space or crystal_space())


def crystal_beamsplitter(space: ProductSpace) -> ElementOperator:
    """(|I><I| + |I><II| + |II><I| - |II><II|)/sqrt 2 on a two-path subsystem."""
    _require(space, "path", 2, "crystal_beamsplitter")
    h = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    return embed_op(space, "path", h, {UNITARY, HERMITIAN})


def blade_projection(space: ProductSpace) -> ElementOperator:
    """|I><I| U_BS^dagger: recombination at the last blade, keeping path I.

    Not an orthogonal projector; it is used as a post-selection stage.
    """
    keep = embed_op(space, "path", _ket_bra(2, 0, 0), {HERMITIAN, PROJECTOR})
    return ElementOperator(space, keep.matrix @ crystal_beamsplitter(space).dagger().matrix)


def path_flipper_hamiltonian(space: ProductSpace) -> ElementOperator:
    """H_I = |dn II E2><up II E0| + h.c. (spin flip on path II only)."""
    _check_shape(space, [("spin", 2), ("path", 2), ("energy", 3)], "path-II RF flipper")
    half = np.kron(np.kron(_ket_bra(2, 1, 0), _ket_bra(2, 1, 1)), _ket_bra(3, 2, 0))
    return ElementOperator(space, half + half.conj().T, frozenset({HERMITIAN}))


def recombiner_hamiltonian(space: ProductSpace) -> ElementOperator:
    """H_II = |dn><up| x |I><I| x T + h.c. with T = |E1><E0| + |E2><E1|."""
    _check_shape(space, [("spin", 2), ("path", 2), ("energy", 3)], "energy recombiner")
    t = _ket_bra(3, 1, 0) + _ket_bra(3, 2, 1)
    half = np.kron(np.kron(_ket_bra(2, 1, 0), _ket_bra(2, 0, 0)), t)
    return ElementOperator(space, half + half.conj().T, frozenset({HERMITIAN}))


def path_flipper_entangler(space: ProductSpace) -> ElementOperator:
    return exp_i(path_flipper_hamiltonian(space), HALF_PI)


def energy_recombiner(space: ProductSpace) -> ElementOperator:
    return exp_i(recombiner_hamiltonian(space), HALF_PI)
