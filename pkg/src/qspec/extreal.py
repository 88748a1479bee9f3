"""Exact extended non-negative rationals: the value domain of all distances.

Every distance in this library is a non-negative rational or the
distinguished value infinity.  Arithmetic is total: x + INF = INF,
min/max are defined everywhere.  No floats enter any computation; they
only appear when rendering results.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Union

__all__ = ["ExtReal", "INF", "ZERO", "Rat", "parse_rational"]

Rat = Union[int, Fraction]

_DECIMAL_RE = re.compile(r"^-?(\d+)(\.\d+)?$")
_FRACTION_RE = re.compile(r"^-?\d+/\d+$")


def parse_rational(text: str) -> Fraction:
    """Parse a decimal string or 'p/q' into an exact Fraction.

    Scientific notation is rejected on purpose: the file formats demand
    plain decimal strings so that parsing is exact and unambiguous.
    """
    text = text.strip()
    if _FRACTION_RE.match(text):
        return Fraction(text)
    m = _DECIMAL_RE.match(text)
    if not m:
        raise ValueError(f"not a plain decimal or p/q rational: {text!r}")
    return Fraction(text)


class ExtReal:
    """A non-negative rational or infinity, with total arithmetic."""

    __slots__ = ("num",)

    def __init__(self, value: Union[Rat, "ExtReal", None] = 0):
        if isinstance(value, ExtReal):
            self.num = value.num
        elif value is None:
            self.num = None  # infinity
        else:
            self.num = Fraction(value)

    # -- constructors -------------------------------------------------

    @staticmethod
    def infinity() -> "ExtReal":
        return INF

    @property
    def is_inf(self) -> bool:
        return self.num is None

    @property
    def is_finite(self) -> bool:
        return self.num is not None

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other: "ExtReal") -> "ExtReal":
        other = _coerce(other)
        if self.num is None or other.num is None:
            return INF
        return ExtReal(self.num + other.num)

    __radd__ = __add__

    def __mul__(self, other: Union[Rat, "ExtReal"]) -> "ExtReal":
        other = _coerce(other)
        if self.num is None or other.num is None:
            # 0 * inf = 0 keeps discount-by-zero sane.
            if (self.num is not None and self.num == 0) or (
                other.num is not None and other.num == 0
            ):
                return ZERO
            return INF
        return ExtReal(self.num * other.num)

    __rmul__ = __mul__

    def __sub__(self, other: "ExtReal") -> "ExtReal":
        """Truncated difference, used only for radii and diagnostics."""
        other = _coerce(other)
        if self.num is None:
            return ZERO if other.num is None else INF
        if other.num is None:
            return ZERO
        d = self.num - other.num
        return ExtReal(d if d > 0 else 0)

    def abs_diff(self, other: "ExtReal") -> "ExtReal":
        other = _coerce(other)
        if self.num is None and other.num is None:
            return ZERO
        if self.num is None or other.num is None:
            return INF
        return ExtReal(abs(self.num - other.num))

    # -- order --------------------------------------------------------

    def __le__(self, other: "ExtReal") -> bool:
        other = _coerce(other)
        if other.num is None:
            return True
        if self.num is None:
            return False
        return self.num <= other.num

    def __lt__(self, other: "ExtReal") -> bool:
        other = _coerce(other)
        return self <= other and self != other

    def __ge__(self, other: "ExtReal") -> bool:
        return _coerce(other) <= self

    def __gt__(self, other: "ExtReal") -> bool:
        return _coerce(other) < self

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = ExtReal(other)
        if not isinstance(other, ExtReal):
            return NotImplemented
        return self.num == other.num

    def __hash__(self) -> int:
        return hash(self.num)

    # -- rendering ----------------------------------------------------

    def __float__(self) -> float:
        return float("inf") if self.num is None else float(self.num)

    def __repr__(self) -> str:
        return "inf" if self.num is None else str(self.num)

    def render(self) -> str:
        """Deterministic print form: exact fraction plus 6-digit decimal."""
        if self.num is None:
            return "inf"
        approx = f"{float(self.num):.6f}"
        return f"{self.num} ({approx})"


def _coerce(x: Union[Rat, ExtReal]) -> ExtReal:
    return x if isinstance(x, ExtReal) else ExtReal(x)


def emax(*xs: ExtReal) -> ExtReal:
    out = ZERO
    for x in xs:
        if out <= x:
            out = x
    return out


def emin(*xs: ExtReal) -> ExtReal:
    out = INF
    for x in xs:
        if x <= out:
            out = x
    return out


INF = ExtReal.__new__(ExtReal)
INF.num = None
ZERO = ExtReal(0)
