"""Angle literals: plain reals or multiples of pi (``pi``, ``-pi/4``, ``3pi/2``, ``0.5*pi``)."""
from __future__ import annotations

import math
import re

_PI_RE = re.compile(
    r"^(?P<sign>[+-]?)(?P<coef>\d+(?:\.\d*)?|\.\d+)?\s*\*?\s*pi(?:\s*/\s*(?P<den>\d+(?:\.\d*)?|\.\d+))?$"
)


def parse_angle(text: str) -> float:
    s = text.strip()
    m = _PI_RE.match(s)
    if m:
        value = float(m["coef"]) * math.pi if m["coef"] else math.pi
        if m["den"]:
            den = float(m["den"])
            if den == 0:
                raise ValueError(f"division by zero in angle {text!r}")
            value /= den
        return -value if m["sign"] == "-" else value
    try:
        value = float(s)
    except ValueError:
        raise ValueError(f"bad angle {text!r}: expected a number or a pi expression like -pi/4") from None
    if not math.isfinite(value):
        raise ValueError(f"angle must be finite, got {text!r}")
    return value
