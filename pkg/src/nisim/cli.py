"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Sequence

from .angles import parse_angle
from .dsl import DslError, load
from .interferometer import (
    PRESETS,
    Beamline,
    generalized_ghz_beamline,
    product_grid,
    rate_function,
    scan,
)
from .noise import ShotConfig, ShotNoiseCounts, sample_counts, visibility_scaled, witness_uncertainty
from .witness import OPTIMAL_CHSH, WitnessResult, calibrate_phase_offset, chsh, classify, mermin, shifted

SEED_ENV = "NISIM_SEED"
TABLE1_VISIBILITY = 0.78
# Measured values as published: (value, stat, sys)
TABLE1_MEASURED = {"S": (2.16, 0.01, 0.02), "M": (3.052, 0.007, 0.017)}


class ConfigError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# -- argument helpers ---------------------------------------------------------


def parse_grid(spec: str, degrees: bool = False) -> dict[str, list[float]]:
    """``name=start:stop:count`` (stop exclusive) or ``name=value``, comma separated."""
    axes: dict[str, list[float]] = {}
    conv = (lambda t: math.radians(parse_angle(t))) if degrees else parse_angle
    for item in spec.split(","):
        item = item.strip()
        name, sep, value = item.partition("=")
        if not sep or not name or not value:
            raise ConfigError(f"--grid: bad entry {item!r}, expected name=start:stop:count or name=value")
        if name in axes:
            raise ConfigError(f"--grid: axis {name!r} given twice")
        parts = value.split(":")
        try:
            if len(parts) == 1:
                axes[name] = [conv(parts[0])]
            elif len(parts) == 3:
                start, stop, count = conv(parts[0]), conv(parts[1]), int(parts[2])
                if count < 1:
                    raise ConfigError(f"--grid: axis {name!r} needs a positive count")
                axes[name] = [start + (stop - start) * k / count for k in range(count)]
            else:
                raise ConfigError(f"--grid: bad range {value!r} for axis {name!r}")
        except ValueError as exc:
            raise ConfigError(f"--grid: {exc}") from None
    return axes


def _beamline(args: argparse.Namespace) -> Beamline:
    if args.beamline:
        path = Path(args.beamline)
        if not path.exists():
            raise ConfigError(f"--beamline: no such file {str(path)!r}")
        try:
            return load(path)
        except DslError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if args.preset == "ghz":
        try:
            return generalized_ghz_beamline(args.modes)
        except ValueError as exc:
            raise ConfigError(f"--modes: {exc}") from None
    return PRESETS[args.preset]()


def _check_visibility(v: float) -> float:
    if not 0.0 <= v <= 1.0:
        raise ConfigError(f"--visibility must lie in [0, 1], got {v}")
    return v


def _emit(text: str, output: str | None) -> None:
    sys.stdout.write(text)
    if output:
        Path(output).write_text(text, encoding="utf-8")


def _record_text(record: dict[str, object], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(record, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(record.keys())
    w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in record.values()])
    return buf.getvalue()


# -- subcommands --------------------------------------------------------------


def _grid_for(bl: Beamline, args: argparse.Namespace) -> list[dict[str, float]]:
    axes = parse_grid(args.grid, args.degrees)
    unknown = [a for a in axes if a not in bl.slot_names]
    if unknown:
        raise ConfigError(f"--grid: unknown slot(s) {', '.join(unknown)}; beamline slots are {', '.join(bl.slot_names)}")
    missing = [s for s in bl.slot_names if s not in axes]
    if missing:
        raise ConfigError(f"--grid: no values for slot(s) {', '.join(missing)}")
    return product_grid(axes)


def cmd_scan(args: argparse.Namespace) -> int:
    bl = _beamline(args)
    table = scan(bl, _grid_for(bl, args), max_workers=args.workers)
    text = table.to_json(args.degrees) if args.format == "json" else table.to_csv(args.degrees)
    _emit(text, args.output)
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    bl = _beamline(args)
    v = _check_visibility(args.visibility)
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        cfg = ShotConfig(args.shots, seed, args.sampler)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    table = scan(bl, _grid_for(bl, args), max_workers=args.workers)
    table.rates = [v * r + (1 - v) / 2 for r in table.rates]
    sampled = sample_counts(table, cfg, v)
    text = sampled.to_json(args.degrees) if args.format == "json" else sampled.to_csv(args.degrees)
    _emit(text, args.output)
    return 0


def _parse_settings(text: str | None) -> tuple[float, float, float, float]:
    if text is None:
        return OPTIMAL_CHSH
    parts = text.split(",")
    if len(parts) != 4:
        raise ConfigError("--settings takes alpha1,alpha2,chi1,chi2")
    try:
        return tuple(parse_angle(p) for p in parts)  # type: ignore[return-value]
    except ValueError as exc:
        raise ConfigError(f"--settings: {exc}") from None


def cmd_witness(args: argparse.Namespace) -> int:
    bl = _beamline(args)
    v = _check_visibility(args.visibility)
    n_modes = 2 if args.kind == "chsh" else 3
    cols = bl.columns
    if len(cols) < n_modes:
        raise ConfigError(f"{args.kind} needs {n_modes} phase slots; beamline has {', '.join(cols) or 'none'}")
    if args.settings is not None and args.kind != "chsh":
        raise ConfigError("--settings applies to chsh only")
    names = cols[:n_modes]
    fn = rate_function(bl, names)

    record_extra: dict[str, object] = {}
    axis_name = args.calibrate_axis or names[-1]
    if axis_name not in names:
        raise ConfigError(f"--calibrate-axis must be one of {', '.join(names)}")
    axis = names.index(axis_name)
    offset = calibrate_phase_offset(fn, axis, n_modes)
    if args.calibrate:
        fn = shifted(fn, axis, offset)
        record_extra["calibration_axis"] = axis_name
        record_extra["calibration_offset"] = offset
    elif abs(offset) > 1e-6:
        print(
            f"warning: interferogram along {axis_name} has phase offset {offset:.6g} rad; "
            "witness values will be degraded, pass --calibrate",
            file=sys.stderr,
        )
    if v != 1.0:
        fn = visibility_scaled(fn, v)

    kwargs: dict[str, object] = {"visibility": v}
    if args.kind == "chsh":
        a1, a2, c1, c2 = _parse_settings(args.settings)
        kwargs.update(alpha1=a1, alpha2=a2, chi1=c1, chi2=c2)
    witness = chsh if args.kind == "chsh" else mermin

    if args.shots is not None:
        seed = args.seed if args.seed is not None else _default_seed()
        try:
            cfg = ShotConfig(args.shots, seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if args.repetitions < 10:
            raise ConfigError("--repetitions must be at least 10")
        mean, std = witness_uncertainty(ShotNoiseCounts(fn, cfg), args.kind, args.repetitions, **kwargs)
        ideal = witness(fn, **kwargs)
        result = WitnessResult(
            ideal.kind,
            mean,
            ideal.classical_bound,
            ideal.quantum_bound,
            classify(mean, ideal.classical_bound, ideal.quantum_bound, std),
            std,
        )
        record_extra.update(seed=seed, n0=float(args.shots), repetitions=args.repetitions)
    else:
        result = witness(fn, **kwargs)
    record = result.to_record()
    record.update(record_extra)
    _emit(_record_text(record, args.format), args.output)
    return 0


def table1_rows(v: float = TABLE1_VISIBILITY) -> list[dict[str, object]]:
    """Simulated witnesses next to the published measurements."""
    s = chsh(visibility_scaled(rate_function(PRESETS["rf2"]()), v), visibility=v)
    m = mermin(visibility_scaled(rate_function(PRESETS["rf3"]()), v), visibility=v)
    rows = []
    for label, res, ideal in (("S", s, 2 * math.sqrt(2)), ("M", m, 4.0)):
        meas, stat, sys_err = TABLE1_MEASURED[label]
        rows.append(
            {
                "witness": label,
                "ideal": ideal,
                "visibility_scaled": res.value,
                "classical_bound": res.classical_bound,
                "quantum_bound": res.quantum_bound,
                "published": meas,
                "published_stat": stat,
                "published_sys": sys_err,
                "classification": res.classification,
            }
        )
    return rows


def cmd_reproduce_table1(args: argparse.Namespace) -> int:
    v = _check_visibility(args.visibility)
    rows = table1_rows(v)
    note = (
        "measured values sit below the visibility-scaled ideals; the gap reflects "
        "apparatus imperfections that a single visibility factor does not model"
    )
    if args.format == "json":
        text = json.dumps({"visibility": v, "rows": rows, "note": note}, indent=2) + "\n"
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(x) if isinstance(x, float) else x for k, x in r.items()})
        text = buf.getvalue()
    else:
        lines = [
            f"visibility (Pol x A) = {v}",
            f"{'witness':<8}{'ideal':>10}{'scaled':>10}{'classical':>11}{'quantum':>10}   published",
        ]
        for r in rows:
            lines.append(
                f"{r['witness']:<8}{r['ideal']:>10.4f}{r['visibility_scaled']:>10.3g}"
                f"{r['classical_bound']:>11.3g}{r['quantum_bound']:>10.3g}   "
                f"{r['published']} +- {r['published_stat']} (stat) +- {r['published_sys']} (sys)"
            )
        lines.append(f"note: {note}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    from .checks import run_checks

    ok = True
    for name, passed, err in run_checks():
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}  (max error {err:.3g})")
    return 0 if ok else 1


# -- parser -------------------------------------------------------------------


def _add_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=[*PRESETS, "ghz"], help="built-in beamline")
    src.add_argument("--beamline", metavar="PATH", help=".nbl beamline description")
    p.add_argument("--modes", type=int, default=3, help="number of modes for --preset ghz (2-6)")


def _add_output(p: argparse.ArgumentParser, formats: Sequence[str] = ("csv", "json")) -> None:
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--output", "-o", metavar="PATH", help="also write the result to PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nisim", description="Multimode-entangled neutron interferometry simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="relative count rates over a phase grid")
    _add_source(p)
    p.add_argument("--grid", required=True, help="e.g. alpha=0:2pi:16,chi=0")
    p.add_argument("--degrees", action="store_true", help="grid input and output angles in degrees")
    p.add_argument("--workers", type=int, default=None)
    _add_output(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("sample", help="Poisson-sampled counts over a phase grid")
    _add_source(p)
    p.add_argument("--grid", required=True)
    p.add_argument("--shots", type=float, required=True, metavar="N0", help="expected counts at fringe maximum")
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--visibility", type=float, default=1.0)
    p.add_argument("--sampler", choices=("poisson", "deterministic"), default="poisson")
    p.add_argument("--degrees", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    _add_output(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("witness", help="CHSH or Mermin witness from simulated counts")
    p.add_argument("kind", choices=("chsh", "mermin"))
    _add_source(p)
    p.add_argument("--visibility", type=float, default=1.0)
    p.add_argument("--shots", type=float, default=None, metavar="N0")
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--repetitions", type=int, default=20, help="Monte Carlo repetitions with --shots")
    p.add_argument("--settings", default=None, help="chsh angles alpha1,alpha2,chi1,chi2 (use --settings=... if the first is negative)")
    p.add_argument("--calibrate", action="store_true", help="fit and remove the interferogram phase offset")
    p.add_argument("--calibrate-axis", default=None, help="slot to attribute the offset to (default: last)")
    _add_output(p)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("reproduce-table1", help="simulated witnesses next to the published measurements")
    p.add_argument("--visibility", type=float, default=TABLE1_VISIBILITY)
    _add_output(p, ("text", "csv", "json"))
    p.set_defaults(func=cmd_reproduce_table1)

    p = sub.add_parser("check", help="run the invariant self-checks")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"nisim {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"nisim {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
