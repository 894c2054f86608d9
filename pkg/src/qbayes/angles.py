"""Angle and grid literal parsing for command-line values.

Angles:
* plain floats (``0.6283``)
* multiples of pi (``pi``, ``0.2pi``, ``2*pi``, ``-pi``)
* fractions of pi (``pi/5``, ``2pi/3``)

Grids:
* inclusive ranges ``5..10`` (step 1) or ``5..10:2``; endpoints and step may be angles
* comma lists ``20,40,60,80``
* a single value
"""

from __future__ import annotations

import math
import re

from .errors import InvalidArgumentError

__all__ = ["parse_angle", "parse_grid", "parse_int_grid", "parse_point"]

_NUMBER = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_ANGLE_RE = re.compile(
    rf"^(?P<sign>[+-]?)\s*(?P<coef>{_NUMBER})?\s*(?P<star>\*)?\s*(?P<pi>pi|π)?"
    rf"\s*(?:/\s*(?P<div>{_NUMBER}))?$",
    re.IGNORECASE,
)
_RANGE_RE = re.compile(r"^(?P<start>.+?)\.\.(?P<stop>[^:]+)(?::(?P<step>.+))?$")


def parse_angle(value: str | float) -> float:
    """Parse an angle literal in radians."""
    if isinstance(value, (int, float)):
        result = float(value)
    else:
        text = value.strip()
        m = _ANGLE_RE.match(text)
        if not text or m is None or (m["coef"] is None and m["pi"] is None):
            raise InvalidArgumentError(f"Invalid angle '{value}'")
        if m["star"] and not (m["coef"] and m["pi"]):
            raise InvalidArgumentError(f"Invalid angle '{value}'")
        result = float(m["coef"]) if m["coef"] is not None else 1.0
        if m["pi"]:
            result *= math.pi
        if m["div"] is not None:
            divisor = float(m["div"])
            if divisor == 0:
                raise InvalidArgumentError(f"Division by zero in angle '{value}'")
            result /= divisor
        if m["sign"] == "-":
            result = -result
    if not math.isfinite(result):
        raise InvalidArgumentError(f"Angle must be finite, got '{value}'")
    return result


def parse_grid(value: str) -> list[float]:
    """Parse a sweep grid into an ordered list of values."""
    text = value.strip()
    if not text:
        raise InvalidArgumentError("Grid is empty")
    m = _RANGE_RE.match(text)
    if m is None:
        return [parse_angle(part) for part in text.split(",")]
    start, stop = parse_angle(m["start"]), parse_angle(m["stop"])
    step = parse_angle(m["step"]) if m["step"] else 1.0
    if step <= 0:
        raise InvalidArgumentError(f"Grid step must be positive, got {step}")
    if stop < start:
        raise InvalidArgumentError(f"Grid range {text} is decreasing")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def parse_int_grid(value: str) -> list[int]:
    values = parse_grid(value)
    if any(v != int(v) for v in values):
        raise InvalidArgumentError(f"Grid '{value}' must contain integers")
    return [int(v) for v in values]


def parse_point(value: str) -> tuple[float, ...]:
    """``"4.272566,5.08938"`` -> ``(4.272566, 5.08938)``; coordinates may be angles."""
    parts = [p for p in value.split(",") if p.strip()]
    if not parts:
        raise InvalidArgumentError(f"Invalid point '{value}'")
    return tuple(parse_angle(p) for p in parts)
