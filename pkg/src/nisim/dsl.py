"""Parser and lowering for ``.nbl`` beamline descriptions.

A document is a sequence of directives, one per line::

    space spin:2[up,dn] path:3[0,1,2] energy:3[E-,E0,E+]
    input spin=+x path=0 energy=E0
    element rf3_entangler phi=0
    slot alpha spin
    slot chi path pair=1,2
    slot gamma energy pair=E-,E+
    element rf3_disentangler phi=0
    analyze spin 0

``#`` starts a comment. Basis lists are optional (spin defaults to ``up,dn``,
other subsystems to ``0..d-1``); an entry ``c/a`` names a basis state ``c``
that may also be referred to as ``a``. Angles accept reals and pi expressions.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import elements as el
from .angles import parse_angle
from .interferometer import Analyzer, Beamline, Fixed, PhaseSlot, Projection, Stage
from .qstate import ProductSpace, SubsystemSpec, make_space, product_state

DIRECTIVES = ("space", "input", "element", "slot", "analyze")

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_SUBSYSTEM = re.compile(r"^(?P<label>[A-Za-z_][A-Za-z0-9_]*):(?P<dim>\d+)(?:\[(?P<names>[^\[\]]*)\])?$")
_KEYWORD = re.compile(r"^(?P<key>[A-Za-z_][A-Za-z0-9_]*)=(?P<value>\S*)$")


class DslError(ValueError):
    """A parse or lowering error at a 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Directive:
    name: str
    args: tuple[str, ...] = ()
    kwargs: tuple[tuple[str, str], ...] = ()
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)
    arg_columns: tuple[int, ...] = field(default=(), compare=False)
    kwarg_columns: tuple[int, ...] = field(default=(), compare=False)

    def render(self) -> str:
        return " ".join([self.name, *self.args, *(f"{k}={v}" for k, v in self.kwargs)])

    def kwarg(self, key: str) -> str | None:
        for k, v in self.kwargs:
            if k == key:
                return v
        return None

    def kwarg_column(self, key: str) -> int:
        for (k, _), col in zip(self.kwargs, self.kwarg_columns):
            if k == key:
                return col
        return self.column


@dataclass(frozen=True)
class BeamlineDoc:
    directives: tuple[Directive, ...]
    source: str = field(default="", compare=False)

    def render(self) -> str:
        return "".join(d.render() + "\n" for d in self.directives)

    def of_kind(self, name: str) -> list[Directive]:
        return [d for d in self.directives if d.name == name]


def _tokens(line: str) -> list[tuple[str, int]]:
    return [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]


def parse(text: str) -> BeamlineDoc:
    """Parse ``.nbl`` text into directives, checking syntax and document structure."""
    directives: list[Directive] = []
    slot_names: dict[str, int] = {}
    lines = text.replace("\r\n", "\n").split("\n")
    for lineno, raw in enumerate(lines, start=1):
        body = raw.split("#", 1)[0]
        toks = _tokens(body)
        if not toks:
            continue
        (name, col), rest = toks[0], toks[1:]
        if name not in DIRECTIVES:
            raise DslError(f"unknown directive {name!r} (expected one of {', '.join(DIRECTIVES)})", lineno, col)
        args, arg_cols, kwargs, kw_cols = [], [], [], []
        for tok, tcol in rest:
            m = _KEYWORD.match(tok)
            if m:
                if any(k == m["key"] for k, _ in kwargs):
                    raise DslError(f"repeated keyword {m['key']!r}", lineno, tcol)
                if not m["value"]:
                    raise DslError(f"keyword {m['key']!r} has no value", lineno, tcol)
                kwargs.append((m["key"], m["value"]))
                kw_cols.append(tcol)
            else:
                if kwargs:
                    raise DslError(f"positional argument {tok!r} after keyword arguments", lineno, tcol)
                args.append(tok)
                arg_cols.append(tcol)
        d = Directive(name, tuple(args), tuple(kwargs), lineno, col, tuple(arg_cols), tuple(kw_cols))
        _check_directive(d, directives, slot_names)
        directives.append(d)
    end_line = len(lines)
    for required in ("space", "input", "analyze"):
        if not any(d.name == required for d in directives):
            raise DslError(f"missing {required!r} directive", end_line, 1)
    return BeamlineDoc(tuple(directives), text)


def _check_directive(d: Directive, previous: list[Directive], slot_names: dict[str, int]) -> None:
    seen = {p.name for p in previous}
    if "analyze" in seen:
        raise DslError("'analyze' must be the last directive", d.line, d.column)
    if d.name != "space" and "space" not in seen:
        raise DslError(f"{d.name!r} before the 'space' directive", d.line, d.column)
    if d.name == "space":
        if "space" in seen:
            raise DslError("duplicate 'space' directive", d.line, d.column)
        if not d.args or d.kwargs:
            raise DslError("'space' takes one or more label:dim[names] entries", d.line, d.column)
        labels = set()
        for tok, col in zip(d.args, d.arg_columns):
            m = _SUBSYSTEM.match(tok)
            if not m:
                raise DslError(f"bad subsystem {tok!r}: expected label:dim or label:dim[name,...]", d.line, col)
            dim = int(m["dim"])
            if dim < 2:
                raise DslError(f"subsystem {m['label']!r} needs dim >= 2", d.line, col)
            if m["label"] in labels:
                raise DslError(f"duplicate subsystem {m['label']!r}", d.line, col)
            labels.add(m["label"])
            if m["names"] is not None:
                names = [n.split("/")[0] for n in m["names"].split(",")]
                if len(names) != dim or any(not n for n in names):
                    raise DslError(f"subsystem {m['label']!r} needs {dim} basis names", d.line, col)
                if len(set(names)) != dim:
                    raise DslError(f"subsystem {m['label']!r} has repeated basis names", d.line, col)
    elif d.name == "input":
        if "input" in seen:
            raise DslError("duplicate 'input' directive", d.line, d.column)
        if d.args or not d.kwargs:
            raise DslError("'input' takes label=state entries", d.line, d.column)
    elif d.name == "element":
        if len(d.args) != 1 or not _IDENT.match(d.args[0]):
            raise DslError("'element' takes one kind name followed by key=value arguments", d.line, d.column)
    elif d.name == "slot":
        if len(d.args) != 2 or not all(_IDENT.match(a) for a in d.args):
            raise DslError("'slot' takes a slot name and a subsystem label", d.line, d.column)
        for (k, v), col in zip(d.kwargs, d.kwarg_columns):
            if k != "pair":
                raise DslError(f"unknown slot keyword {k!r}", d.line, col)
            if len(v.split(",")) != 2:
                raise DslError("pair= takes two basis names separated by a comma", d.line, col)
        name = d.args[0]
        if name in slot_names:
            raise DslError(f"duplicate slot name {name!r} (first defined on line {slot_names[name]})", d.line, d.arg_columns[0])
        slot_names[name] = d.line
    elif d.name == "analyze":
        if len(d.args) != 2 or d.kwargs:
            raise DslError("'analyze' takes a subsystem label and an angle", d.line, d.column)
        try:
            parse_angle(d.args[1])
        except ValueError as exc:
            raise DslError(str(exc), d.line, d.arg_columns[1]) from None


# -- lowering -----------------------------------------------------------------


def _space(d: Directive) -> ProductSpace:
    subs = []
    for tok in d.args:
        m = _SUBSYSTEM.match(tok)
        assert m is not None
        label, dim = m["label"], int(m["dim"])
        if m["names"] is None:
            names = list(el.SPIN_NAMES) if label == "spin" and dim == 2 else [str(k) for k in range(dim)]
            aliases: dict[str, int] = {}
        else:
            names, aliases = [], {}
            for k, entry in enumerate(m["names"].split(",")):
                primary, *alts = entry.split("/")
                names.append(primary)
                aliases.update({a: k for a in alts})
        subs.append(SubsystemSpec.of(label, names, aliases))
    return make_space(subs)


def _flag(value: str) -> bool:
    if value.lower() in ("true", "yes", "1"):
        return True
    if value.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true or false, got {value!r}")


def _real(value: str) -> float:
    x = float(value)
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {value!r}")
    return x


_CONVERTERS: dict[str, Callable[[str], object]] = {
    "phi": parse_angle,
    "angle": parse_angle,
    "delta": _real,
    "redefined": _flag,
    "t_up": _real,
    "r_up": _real,
    "t_dn": _real,
    "r_dn": _real,
    "subsystem": str,
    "pair": lambda v: tuple(v.split(",")),
}


def _entangler_builder(kind: str, adjoint: bool):
    def build(space: ProductSpace, phi: float = 0.0, delta: float | None = None, redefined: bool = True):
        cfg = el.EntanglerConfig(kind, phi, delta, redefined)
        u = {"mwp": el.mwp_entangler, "rf3": el.rf3_entangler, "rf2": el.rf2_entangler}[kind](cfg, space)
        return Fixed(u.dagger() if adjoint else u, f"{kind}_{'disentangler' if adjoint else 'entangler'}")

    return build


def _mwp_bs(space, t_up=1.0, r_up=0.0, t_dn=0.0, r_dn=1.0):
    return Fixed(el.mwp_beamsplitter(space, t_up, r_up, t_dn, r_dn), "mwp_beamsplitter")


def _phase(space, subsystem="spin", angle=0.0, pair=None):
    return Fixed(el.phase_shifter(space, subsystem, angle, pair), f"phase[{subsystem}]")


ELEMENT_KINDS: dict[str, tuple[Callable[..., Stage], tuple[str, ...]]] = {
    "mwp_entangler": (_entangler_builder("mwp", False), ("phi", "redefined")),
    "mwp_disentangler": (_entangler_builder("mwp", True), ("phi", "redefined")),
    "rf3_entangler": (_entangler_builder("rf3", False), ("phi", "delta", "redefined")),
    "rf3_disentangler": (_entangler_builder("rf3", True), ("phi", "delta", "redefined")),
    "rf2_entangler": (_entangler_builder("rf2", False), ("phi", "delta", "redefined")),
    "rf2_disentangler": (_entangler_builder("rf2", True), ("phi", "delta", "redefined")),
    "mwp_beamsplitter": (_mwp_bs, ("t_up", "r_up", "t_dn", "r_dn")),
    "larmor": (lambda space, phi=0.0: Fixed(el.larmor(space, phi), "larmor"), ("phi",)),
    "phase": (_phase, ("subsystem", "angle", "pair")),
    "dc_flipper": (lambda space: Fixed(el.dc_flipper(space), "dc_flipper"), ()),
    "crystal_beamsplitter": (lambda space: Fixed(el.crystal_beamsplitter(space), "crystal_beamsplitter"), ()),
    "blade_projection": (lambda space: Projection(el.blade_projection(space), "blade_projection"), ()),
    "path_flipper_entangler": (
        lambda space: Fixed(el.path_flipper_entangler(space), "path_flipper_entangler"),
        (),
    ),
    "energy_recombiner": (
        lambda space: Fixed(el.energy_recombiner(space), "energy_recombiner"),
        (),
    ),
}


def _input_state(space: ProductSpace, d: Directive):
    factors: dict[str, object] = {}
    for (label, value), col in zip(d.kwargs, d.kwarg_columns):
        try:
            sub = space.subsystem(label)
        except KeyError as exc:
            raise DslError(exc.args[0], d.line, col) from None
        if value == "+x":
            v = np.zeros(sub.dim, dtype=complex)
            v[:2] = 1 / math.sqrt(2)
            factors[label] = v
        else:
            try:
                sub.index(value)
            except KeyError as exc:
                raise DslError(exc.args[0], d.line, col) from None
            factors[label] = value
    missing = [l for l in space.labels if l not in factors]
    if missing:
        raise DslError(f"input gives no state for subsystem(s) {', '.join(missing)}", d.line, d.column)
    return product_state(space, factors)


def _element(space: ProductSpace, d: Directive) -> Stage:
    kind = d.args[0]
    if kind not in ELEMENT_KINDS:
        raise DslError(f"unknown element kind {kind!r}", d.line, d.arg_columns[0])
    builder, allowed = ELEMENT_KINDS[kind]
    kwargs = {}
    for (k, v), col in zip(d.kwargs, d.kwarg_columns):
        if k not in allowed:
            raise DslError(f"element {kind!r} takes no argument {k!r}", d.line, col)
        try:
            kwargs[k] = _CONVERTERS[k](v)
        except ValueError as exc:
            raise DslError(f"{k}: {exc}", d.line, col) from None
    try:
        return builder(space, **kwargs)
    except (ValueError, KeyError) as exc:
        msg = str(exc.args[0] if exc.args else exc)
        # point at the offending keyword when the message names one
        cols = [c for (k, _), c in zip(d.kwargs, d.kwarg_columns) if re.search(rf"\b{k}\b", msg)]
        raise DslError(msg, d.line, cols[0] if cols else d.arg_columns[0]) from None


def lower(doc: BeamlineDoc) -> Beamline:
    """Build a beamline, reporting semantic errors at their source position."""
    space_d = doc.of_kind("space")[0]
    space = _space(space_d)
    psi = None
    stages: list[Stage] = []
    analyzer = Analyzer()
    for d in doc.directives:
        if d.name == "input":
            psi = _input_state(space, d)
        elif d.name == "element":
            stages.append(_element(space, d))
        elif d.name == "slot":
            name, label = d.args
            pair_text = d.kwarg("pair")
            pair = tuple(pair_text.split(",")) if pair_text else None
            try:
                el.phase_shifter(space, label, 0.0, pair)
            except (ValueError, KeyError) as exc:
                col = d.kwarg_column("pair") if pair_text and label in space.labels else d.arg_columns[1]
                raise DslError(exc.args[0], d.line, col) from None
            stages.append(PhaseSlot(name, label, pair))  # type: ignore[arg-type]
        elif d.name == "analyze":
            label = d.args[0]
            if label not in space.labels:
                raise DslError(f"unknown subsystem {label!r}", d.line, d.arg_columns[0])
            analyzer = Analyzer(label, parse_angle(d.args[1]))
    assert psi is not None
    try:
        return Beamline(space, psi, tuple(stages), analyzer)
    except ValueError as exc:
        raise DslError(str(exc), space_d.line, space_d.column) from None


def load(path: str | Path) -> Beamline:
    return lower(parse(Path(path).read_text(encoding="utf-8")))


def preset_path(name: str) -> Path:
    """Location of a shipped preset file, e.g. ``preset_path("rf3")``."""
    p = resources.files("nisim") / "presets" / f"{name}.nbl"
    return Path(str(p))
