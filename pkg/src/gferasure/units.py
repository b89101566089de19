"""Unit handling.

Configs store linear frequencies in MHz and times in microseconds. The one
place where a factor of 2*pi enters is :func:`angular`, which turns MHz into
rad/us for Hamiltonians and Lindbladians.
"""

from __future__ import annotations

import math
import re

TWO_PI = 2.0 * math.pi

_FREQ = {"hz": 1e-6, "khz": 1e-3, "mhz": 1.0, "ghz": 1e3}
_TIME = {"ps": 1e-6, "ns": 1e-3, "us": 1.0, "µs": 1.0, "ms": 1e3, "s": 1e6}
_PLAIN = {"": 1.0, "%": 0.01}

_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zA-Zµ%]*)\s*$")


class UnitError(ValueError):
    pass


def angular(mhz: float) -> float:
    """Linear frequency in MHz to angular frequency in rad/us."""
    return TWO_PI * mhz


def linear(rad_per_us: float) -> float:
    return rad_per_us / TWO_PI


def parse_quantity(value, kind: str) -> float:
    """Parse ``"5.182 GHz"`` or ``"80 ns"`` into MHz / us.

    ``kind`` is one of ``"freq"``, ``"time"``, ``"plain"``. Bare numbers are
    accepted and taken to be in the canonical unit already.
    """
    if isinstance(value, bool):
        raise UnitError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise UnitError(f"expected a number or quantity string, got {value!r}")
    m = _QTY.match(value)
    if not m:
        raise UnitError(f"cannot parse quantity {value!r}")
    num, unit = float(m.group(1)), m.group(2).lower()
    table = {"freq": _FREQ, "time": _TIME, "plain": _PLAIN}[kind]
    if unit == "" and kind != "plain":
        return num
    if unit not in table:
        raise UnitError(f"unit {m.group(2)!r} not valid for a {kind} quantity ({value!r})")
    return num * table[unit]


def format_quantity(value: float, kind: str) -> str | float:
    unit = {"freq": "MHz", "time": "us"}.get(kind)
    if unit is None:
        return float(value)
    return f"{value!r} {unit}"


def ns_grid(us: float) -> int:
    """Round a time in us to an integer number of nanoseconds."""
    ns = us * 1e3
    r = round(ns)
    if abs(ns - r) > 1e-6:
        raise UnitError(f"time {us} us is not on the 1 ns grid")
    return int(r)
