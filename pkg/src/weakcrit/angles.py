"""Tiny angle-expression grammar: rationals of pi plus a decimal offset.

Accepted forms (whitespace-insensitive):

    0.3            plain radians
    pi             3.14159...
    pi/7           rational of pi
    2*pi/3         coefficient and divisor
    -1.5*pi/1998   signed fractional coefficient
    pi/2+0.1       offset after the pi term
    pi-0.05

Protocol parameters are all pi-rational in practice; parsing them exactly
avoids decimal transcription drift in configs.
"""

from __future__ import annotations

import math
import re

from .errors import ConfigError

_NUM = r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?"
_PI_FORM = re.compile(
    rf"^\s*([+-]?)\s*(?:({_NUM})\s*\*\s*)?pi\s*"
    rf"(?:/\s*({_NUM}))?\s*(?:([+-])\s*({_NUM}))?\s*$"
)


def parse_angle(text) -> float:
    """Parse an angle in radians from a number or a pi-expression string."""
    if isinstance(text, (int, float)):
        return float(text)
    if not isinstance(text, str):
        raise ConfigError(f"cannot parse angle from {type(text).__name__}")
    s = text.strip()
    match = _PI_FORM.match(s)
    if match:
        sign, coef, div, off_sign, off = match.groups()
        value = math.pi
        if coef is not None:
            value *= float(coef)
        if div is not None:
            divisor = float(div)
            if divisor == 0.0:
                raise ConfigError(f"division by zero in angle {text!r}")
            value /= divisor
        if sign == "-":
            value = -value
        if off is not None:
            value += float(off) if off_sign == "+" else -float(off)
        return value
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot parse angle {text!r}") from None
