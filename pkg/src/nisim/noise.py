"""Visibility loss and Poisson counting statistics.

Random draws use numpy's PCG64 seeded through ``SeedSequence`` with the
entropy ``(seed, repetition, row)``, so every row of every repetition has its
own reproducible stream regardless of evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .interferometer import CountTable
from .witness import CountFn, chsh, mermin

SAMPLERS = ("poisson", "deterministic")


@dataclass(frozen=True)
class VisibilityModel:
    """Single contrast factor v = Pol x A applied to the final fringe."""

    v: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.v <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.v}")

    def __call__(self, rate: float) -> float:
        return apply_visibility(rate, self.v)


def apply_visibility(rate: float, v: float) -> float:
    """1/2 (1 + cos) -> 1/2 (1 + v cos), i.e. v * rate + (1 - v) / 2."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {v}")
    return v * rate + (1.0 - v) / 2.0


def visibility_scaled(count_fn: CountFn, v: float) -> CountFn:
    VisibilityModel(v)
    return lambda angles: apply_visibility(count_fn(angles), v)


@dataclass(frozen=True)
class ShotConfig:
    n0: float
    seed: int = 0
    sampler: str = "poisson"

    def __post_init__(self) -> None:
        if not self.n0 > 0:
            raise ValueError(f"n0 must be positive, got {self.n0}")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *keys])))


def draw(mean: float, cfg: ShotConfig, *keys: int) -> int:
    if mean < 0:
        raise ValueError(f"negative mean count {mean}")
    if cfg.sampler == "deterministic":
        return int(round(mean))
    if mean == 0:
        return 0
    return int(_rng(cfg.seed, *keys).poisson(mean))


def sample_counts(table: CountTable, cfg: ShotConfig, v: float = 1.0, repetition: int = 0) -> CountTable:
    """Counts with mean ``n0 * rate`` per row; ``v`` is recorded in the metadata header."""
    counts = []
    for i, rate in enumerate(table.rates):
        if not -1e-12 <= rate <= 1 + 1e-12:
            raise ValueError(f"row {i}: rate {rate} outside [0, 1]")
        counts.append(draw(cfg.n0 * min(max(rate, 0.0), 1.0), cfg, repetition, i))
    meta = {"seed": int(cfg.seed), "n0": _fmt_real(cfg.n0), "v": _fmt_real(v)}
    return CountTable(table.columns, list(table.settings), list(table.rates), counts, meta)


def _fmt_real(x: float) -> str:
    return repr(float(x))


class ShotNoiseCounts:
    """Poisson realizations of a rate function at exposure ``n0``.

    ``realization(k)`` returns a count function; each distinct setting queried
    in that realization gets one draw, reused if the setting is asked again.
    """

    def __init__(self, rate_fn: CountFn, cfg: ShotConfig):
        self.rate_fn = rate_fn
        self.cfg = cfg
        self._rates: dict[tuple[float, ...], float] = {}

    def _rate(self, key: tuple[float, ...], angles: Sequence[float]) -> float:
        if key not in self._rates:
            self._rates[key] = min(max(self.rate_fn(angles), 0.0), 1.0)
        return self._rates[key]

    def realization(self, k: int) -> CountFn:
        cache: dict[tuple[float, ...], int] = {}

        def fn(angles: Sequence[float]) -> float:
            key = tuple(round(math.remainder(float(a), 2 * math.pi), 12) for a in angles)
            if key not in cache:
                cache[key] = draw(self.cfg.n0 * self._rate(key, angles), self.cfg, k, len(cache))
            return float(cache[key])

        return fn


WITNESSES: dict[str, Callable[..., object]] = {"chsh": chsh, "mermin": mermin}


def witness_uncertainty(
    sampled: ShotNoiseCounts, witness_kind: str, repetitions: int, **witness_args
) -> tuple[float, float]:
    """Mean and sample standard deviation of a witness over independent realizations."""
    if repetitions < 10:
        raise ValueError("witness_uncertainty needs at least 10 repetitions")
    try:
        witness = WITNESSES[witness_kind.lower()]
    except KeyError:
        raise ValueError(f"unknown witness kind {witness_kind!r}") from None
    values = np.array([witness(sampled.realization(k), **witness_args).value for k in range(repetitions)])
    return float(values.mean()), float(values.std(ddof=1))
