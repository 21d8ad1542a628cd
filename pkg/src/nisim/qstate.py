"""Dense state vectors and operators on tensor products of small qudits.

Basis ordering is row-major with the first listed subsystem varying slowest,
i.e. ``index = ((i0 * d1) + i1) * d2 + i2 ...``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

ALGEBRA_TOL = 1e-10
SERIES_TOL = 1e-12
ZERO_NORM_TOL = 1e-12

UNITARY = "unitary"
HERMITIAN = "hermitian"
PROJECTOR = "projector"
_KNOWN_TAGS = frozenset({UNITARY, HERMITIAN, PROJECTOR})

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class ZeroProbabilityError(ValueError):
    """A projection removed (numerically) all of the state's norm."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SubsystemSpec:
    """One tensor factor: a label, its dimension and names for its basis states.

    ``aliases`` maps extra names onto basis indices, e.g. the MWP input path
    ``a`` shares index 0 with the output path ``c``.
    """

    label: str
    dim: int
    basis_names: tuple[str, ...]
    aliases: tuple[tuple[str, int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "basis_names", tuple(self.basis_names))
        object.__setattr__(self, "aliases", tuple((str(k), int(v)) for k, v in self.aliases))
        if not self.label:
            raise ValueError("subsystem label must be non-empty")
        if self.dim < 2:
            raise ValueError(f"subsystem {self.label!r}: dim must be >= 2, got {self.dim}")
        if len(self.basis_names) != self.dim:
            raise ValueError(
                f"subsystem {self.label!r}: expected {self.dim} basis names, got {len(self.basis_names)}"
            )
        if len(set(self.basis_names)) != self.dim:
            raise ValueError(f"subsystem {self.label!r}: basis names must be distinct")
        for name, idx in self.aliases:
            if not 0 <= idx < self.dim:
                raise ValueError(f"subsystem {self.label!r}: alias {name!r} points outside the basis")
            if name in self.basis_names and self.basis_names.index(name) != idx:
                raise ValueError(f"subsystem {self.label!r}: alias {name!r} shadows a basis name")

    @classmethod
    def of(cls, label: str, names: Sequence[str], aliases: Mapping[str, int] | None = None) -> SubsystemSpec:
        return cls(label, len(names), tuple(names), tuple((aliases or {}).items()))

    def index(self, name: str) -> int:
        if name in self.basis_names:
            return self.basis_names.index(name)
        for alias, idx in self.aliases:
            if alias == name:
                return idx
        raise KeyError(f"unknown basis state {name!r} for subsystem {self.label!r} (known: {', '.join(self.basis_names)})")


@dataclass(frozen=True)
class ProductSpace:
    subsystems: tuple[SubsystemSpec, ...]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems)

    def position(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown subsystem {label!r} (known: {', '.join(self.labels)})") from None

    def subsystem(self, label: str) -> SubsystemSpec:
        return self.subsystems[self.position(label)]

    def index(self, labels: Sequence[str] | Mapping[str, str]) -> int:
        """Flat basis index for one basis name per subsystem."""
        if isinstance(labels, Mapping):
            missing = [l for l in self.labels if l not in labels]
            if missing:
                raise KeyError(f"no basis state given for subsystem(s) {', '.join(missing)}")
            labels = [labels[l] for l in self.labels]
        if len(labels) != len(self.subsystems):
            raise ValueError(f"expected {len(self.subsystems)} basis labels, got {len(labels)}")
        idx = 0
        for sub, name in zip(self.subsystems, labels):
            idx = idx * sub.dim + sub.index(name)
        return idx

    def identity(self) -> ElementOperator:
        return ElementOperator(self, np.eye(self.total_dim), frozenset({UNITARY, HERMITIAN, PROJECTOR}))


def make_space(subsystems: Iterable[SubsystemSpec]) -> ProductSpace:
    subs = tuple(subsystems)
    if not subs:
        raise ValueError("a product space needs at least one subsystem")
    labels = [s.label for s in subs]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate subsystem labels in {labels}")
    for s in subs:
        if s.dim < 2:
            raise ValueError(f"subsystem {s.label!r}: dim must be >= 2")
    return ProductSpace(subs)


@dataclass(frozen=True, eq=False)
class StateVector:
    space: ProductSpace
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.shape != (self.space.total_dim,):
            raise ValueError(f"expected {self.space.total_dim} amplitudes, got {amps.shape[0]}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > ALGEBRA_TOL:
            raise ValueError(f"state vector is not normalized (norm {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    def overlap(self, other: StateVector) -> complex:
        """<self|other>."""
        _same_space(self.space, other.space)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: StateVector) -> float:
        return abs(self.overlap(other)) ** 2


def basis_state(space: ProductSpace, labels: Sequence[str] | Mapping[str, str]) -> StateVector:
    amps = np.zeros(space.total_dim, dtype=complex)
    amps[space.index(labels)] = 1.0
    return StateVector(space, amps)


def superpose(terms: Iterable[tuple[complex, StateVector]]) -> StateVector:
    """Normalized linear combination of states on one space."""
    terms = list(terms)
    if not terms:
        raise ValueError("superpose needs at least one term")
    space = terms[0][1].space
    total = np.zeros(space.total_dim, dtype=complex)
    for coeff, psi in terms:
        _same_space(space, psi.space)
        total += complex(coeff) * psi.amplitudes
    norm = np.linalg.norm(total)
    if norm < ZERO_NORM_TOL:
        raise ValueError("superposition cancels to the zero vector")
    return StateVector(space, total / norm)


def product_state(space: ProductSpace, factors: Mapping[str, np.ndarray | str]) -> StateVector:
    """Tensor product of per-subsystem local vectors (or basis names)."""
    vec = np.ones(1, dtype=complex)
    for sub in space.subsystems:
        if sub.label not in factors:
            raise KeyError(f"no local state given for subsystem {sub.label!r}")
        local = factors[sub.label]
        if isinstance(local, str):
            v = np.zeros(sub.dim, dtype=complex)
            v[sub.index(local)] = 1.0
        else:
            v = np.asarray(local, dtype=complex)
            if v.shape != (sub.dim,):
                raise ValueError(f"local state for {sub.label!r} must have length {sub.dim}")
        vec = np.kron(vec, v)
    norm = np.linalg.norm(vec)
    if norm < ZERO_NORM_TOL:
        raise ValueError("product state is the zero vector")
    return StateVector(space, vec / norm)


@dataclass(frozen=True, eq=False)
class ElementOperator:
    """A square matrix on a product space, with tags that are checked on construction."""

    space: ProductSpace
    matrix: np.ndarray
    tags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        m = _frozen(self.matrix)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"operator must be {n}x{n}, got {m.shape}")
        tags = frozenset(self.tags)
        unknown = tags - _KNOWN_TAGS
        if unknown:
            raise ValueError(f"unknown operator tags {sorted(unknown)}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "tags", tags)
        if UNITARY in tags and not is_unitary(m):
            raise ValueError("operator tagged unitary fails U^dagger U = 1")
        if HERMITIAN in tags and not is_hermitian(m):
            raise ValueError("operator tagged hermitian fails H = H^dagger")
        if PROJECTOR in tags and not is_projector(m):
            raise ValueError("operator tagged projector fails P^2 = P = P^dagger")

    @property
    def is_unitary(self) -> bool:
        return UNITARY in self.tags

    def dagger(self) -> ElementOperator:
        return ElementOperator(self.space, self.matrix.conj().T, self.tags)

    def __matmul__(self, other: ElementOperator) -> ElementOperator:
        _same_space(self.space, other.space)
        tags = frozenset({UNITARY}) if self.is_unitary and other.is_unitary else frozenset()
        return ElementOperator(self.space, self.matrix @ other.matrix, tags)

    def with_tags(self, *tags: str) -> ElementOperator:
        return ElementOperator(self.space, self.matrix, frozenset(tags))


def is_unitary(m: np.ndarray, tol: float = ALGEBRA_TOL) -> bool:
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])), initial=0.0) < tol)


def is_hermitian(m: np.ndarray, tol: float = ALGEBRA_TOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) < tol)


def is_projector(m: np.ndarray, tol: float = ALGEBRA_TOL) -> bool:
    return is_hermitian(m, tol) and bool(np.max(np.abs(m @ m - m), initial=0.0) < tol)


def _same_space(a: ProductSpace, b: ProductSpace) -> None:
    if a != b:
        raise ValueError(f"space mismatch: {a.labels} vs {b.labels}")


def embed_op(
    space: ProductSpace,
    target: str | Sequence[str],
    local_matrix: np.ndarray,
    tags: Iterable[str] = (),
) -> ElementOperator:
    """Lift ``local_matrix`` acting on ``target`` subsystem(s) to the full space.

    Targets may be listed in any order and need not be adjacent; the local
    matrix is interpreted in the product basis of the targets in the order given.
    """
    targets = [target] if isinstance(target, str) else list(target)
    if not targets:
        raise ValueError("embed_op needs at least one target subsystem")
    pos = [space.position(t) for t in targets]
    if len(set(pos)) != len(pos):
        raise ValueError(f"repeated target subsystem in {targets}")
    dims = space.dims
    d_t = math.prod(dims[p] for p in pos)
    local = np.asarray(local_matrix, dtype=complex)
    if local.shape != (d_t, d_t):
        raise ValueError(f"local matrix must be {d_t}x{d_t} for targets {targets}, got {local.shape}")
    rest = [i for i in range(len(dims)) if i not in pos]
    perm = pos + rest
    d_rest = math.prod(dims[i] for i in rest)
    full = np.kron(local, np.eye(d_rest))
    permuted_dims = [dims[i] for i in perm]
    n = len(dims)
    tensor = full.reshape(permuted_dims + permuted_dims)
    inv = list(np.argsort(perm))
    tensor = tensor.transpose(inv + [n + i for i in inv])
    return ElementOperator(space, tensor.reshape(space.total_dim, space.total_dim), frozenset(tags))


def apply(op: ElementOperator, psi: StateVector) -> StateVector:
    """Act with ``op`` on ``psi``; projector-tagged operators renormalize."""
    _same_space(op.space, psi.space)
    out = op.matrix @ psi.amplitudes
    norm = float(np.linalg.norm(out))
    if PROJECTOR in op.tags:
        if norm**2 < ZERO_NORM_TOL:
            raise ZeroProbabilityError("projection onto a subspace orthogonal to the state")
        return StateVector(psi.space, out / norm)
    if abs(norm - 1.0) > ALGEBRA_TOL:
        raise ValueError(f"operator is not norm preserving on this state (norm {norm!r}); tag projections as projector")
    return StateVector(psi.space, out)


def project(op: ElementOperator, psi: StateVector) -> tuple[StateVector, float]:
    """Post-select with a (possibly non-orthogonal) contraction; returns the state and its probability."""
    _same_space(op.space, psi.space)
    out = op.matrix @ psi.amplitudes
    prob = float(np.vdot(out, out).real)
    if prob < ZERO_NORM_TOL:
        raise ZeroProbabilityError("post-selection has zero probability for this state")
    return StateVector(psi.space, out / math.sqrt(prob)), prob


def expectation(op: ElementOperator, psi: StateVector) -> complex | float:
    """<psi|op|psi>; real for hermitian-tagged operators."""
    _same_space(op.space, psi.space)
    val = complex(np.vdot(psi.amplitudes, op.matrix @ psi.amplitudes))
    if HERMITIAN in op.tags or PROJECTOR in op.tags:
        if abs(val.imag) > ALGEBRA_TOL:
            raise ValueError(f"hermitian expectation has imaginary part {val.imag!r}")
        return val.real
    return val


def exp_i(H: ElementOperator, t: float) -> ElementOperator:
    """exp(-i H t) by scaling and squaring a truncated Taylor series."""
    if HERMITIAN not in H.tags:
        raise ValueError("exp_i requires an operator tagged hermitian")
    n = H.space.total_dim
    a = -1j * float(t) * H.matrix
    norm = float(np.linalg.norm(a, 1))
    squarings = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    a = a / 2**squarings
    result = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    k = 0
    # ||a|| <= 1/2, so the tail after a term of size eps is below 2 * eps
    while True:
        k += 1
        term = term @ a / k
        result = result + term
        if np.linalg.norm(term, 1) < SERIES_TOL * 1e-4:
            break
    for _ in range(squarings):
        result = result @ result
    return ElementOperator(H.space, result, frozenset({UNITARY}))
