"""Exact conversion of probability literals."""
from __future__ import annotations

import numbers
import re
from fractions import Fraction

MAX_DECIMALS = 12

_RATIO = re.compile(r"^\s*([+-]?\d+)\s*/\s*(\d+)\s*$")
_DECIMAL = re.compile(r"^\s*([+-]?)(\d*)(?:\.(\d*))?\s*$")


def parse_probability(text: str) -> Fraction:
    """Parse ``"p/q"`` or a decimal literal into an exact rational.

    Decimal literals may carry at most ``MAX_DECIMALS`` fractional digits.
    """
    m = _RATIO.match(text)
    if m:
        den = int(m.group(2))
        if den == 0:
            raise ValueError(f"zero denominator in {text!r}")
        return Fraction(int(m.group(1)), den)
    m = _DECIMAL.match(text)
    if m and (m.group(2) or m.group(3)):
        sign, whole, frac = m.group(1), m.group(2) or "0", m.group(3) or ""
        if len(frac) > MAX_DECIMALS:
            raise ValueError(f"{text!r} has more than {MAX_DECIMALS} fractional digits")
        value = Fraction(int(whole + frac), 10 ** len(frac))
        return -value if sign == "-" else value
    raise ValueError(f"not a probability literal: {text!r}")


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        if type(value.numerator) is int and type(value.denominator) is int:
            return value
        # numpy integers inside a Fraction overflow in later products
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, numbers.Integral):
        return Fraction(int(value))
    if isinstance(value, str):
        return parse_probability(value)
    if isinstance(value, float):
        # shortest decimal repr, so 0.1 stays 1/10
        return Fraction(repr(value))
    raise TypeError(f"cannot convert {type(value).__name__} to a probability")


def format_fraction(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"
