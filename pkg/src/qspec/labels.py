"""Structured label theories: refinement order, conjunction, synchronization.

A LabelTheory packages everything the specification algebra needs to
know about labels: the refinement order, which labels are
implementations, the partial conjunction (greatest lower bound),
synchronization, its adjoint quotient when available, and the uniform
composition bound.  The discrete theory recovers plain action alphabets;
the interval theory carries (action, [lo, hi]) labels with exact
rational endpoints (None encodes an unbounded end).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, List, Optional, Tuple

from .extreal import INF, ZERO, ExtReal
from .lattice import interval_label_distance

__all__ = ["LabelTheory", "discrete_theory", "interval_theory", "Interval"]

Interval = Tuple[Optional[Fraction], Optional[Fraction]]

SYNC_MODES = ("csp", "add", "max", "intersect")


def _iv(label) -> Interval:
    lo, hi = label[1]
    return (None if lo is None else Fraction(lo), None if hi is None else Fraction(hi))


def _le(x: Optional[Fraction], y: Optional[Fraction], low_end: bool) -> bool:
    # comparisons against an open end: None is -inf at the low end, +inf high
    if low_end:
        if x is None:
            return True
        return y is not None and x <= y
    if x is None:
        return True
    return y is not None and x <= y


@dataclass(frozen=True)
class LabelTheory:
    kind: str  # "discrete" | "interval"
    actions: Tuple[str, ...]
    sync_mode: str = "csp"
    compose_bound: str = "sum"  # P: "sum" | "max"

    def __post_init__(self):
        if self.kind not in ("discrete", "interval"):
            raise ValueError(self.kind)
        if self.sync_mode not in SYNC_MODES:
            raise ValueError(self.sync_mode)

    # -- order ----------------------------------------------------------

    def refines(self, a, b) -> bool:
        if self.kind == "discrete":
            return a == b
        if a[0] != b[0]:
            return False
        (al, ah), (bl, bh) = _iv(a), _iv(b)
        lo_ok = bl is None or (al is not None and bl <= al)
        hi_ok = bh is None or (ah is not None and ah <= bh)
        return lo_ok and hi_ok

    def is_implementation(self, a) -> bool:
        if self.kind == "discrete":
            return True
        lo, hi = _iv(a)
        return lo is not None and lo == hi

    def implementations_of(self, a) -> List:
        """Finite enumeration; integer points of bounded intervals."""
        if self.kind == "discrete":
            return [a]
        lo, hi = _iv(a)
        if lo is None or hi is None:
            raise ValueError(f"unbounded interval has no finite enumeration: {a}")
        if lo == hi:
            return [(a[0], (lo, lo))]
        import math

        start = math.ceil(lo)
        out = []
        x = Fraction(start)
        while x <= hi:
            if x >= lo:
                out.append((a[0], (x, x)))
            x += 1
        if not out:
            # a nonempty interval without integer points still has its ends
            out = [(a[0], (lo, lo))]
        return out

    # -- distance ---------------------------------------------------------

    def distance(self, a, b) -> ExtReal:
        if self.kind == "discrete":
            return ZERO if a == b else INF
        if a[0] != b[0]:
            return INF
        return interval_label_distance(_interval_or_inf(a), _interval_or_inf(b))

    # -- conjunction ------------------------------------------------------

    def conj(self, a, b):
        if self.kind == "discrete":
            return a if a == b else None
        if a[0] != b[0]:
            return None
        (al, ah), (bl, bh) = _iv(a), _iv(b)
        lo = al if bl is None else bl if al is None else max(al, bl)
        hi = ah if bh is None else bh if ah is None else min(ah, bh)
        if lo is not None and hi is not None and lo > hi:
            return None
        return (a[0], (lo, hi))

    # -- synchronization and its adjoint ----------------------------------

    def sync(self, a, b):
        if self.kind == "discrete":
            return a if a == b else None
        if a[0] != b[0]:
            return None
        (al, ah), (bl, bh) = _iv(a), _iv(b)
        if self.sync_mode == "csp" or self.sync_mode == "intersect":
            return self.conj(a, b)
        if self.sync_mode == "add":
            lo = None if al is None or bl is None else al + bl
            hi = None if ah is None or bh is None else ah + bh
            return (a[0], (lo, hi))
        if self.sync_mode == "max":
            lo = None if al is None or bl is None else max(al, bl)
            hi = None if ah is None or bh is None else max(ah, bh)
            return (a[0], (lo, hi))
        return None

    def quot(self, ell, k):
        """Adjoint of sync: the largest m with sync(k, m) below ell."""
        if self.kind == "discrete":
            return ell if ell == k else None
        if ell[0] != k[0]:
            return None
        (ll, lh), (kl, kh) = _iv(ell), _iv(k)
        if self.sync_mode == "add":
            if ll is None or lh is None or kl is None or kh is None:
                return None
            lo, hi = ll - kl, lh - kh
            if lo > hi:
                return None
            return (ell[0], (lo, hi))
        if self.sync_mode in ("csp", "intersect"):
            # six cases of the interval quotient under intersection
            if kl is None or kh is None or ll is None or lh is None:
                return None
            l, r, lp, rp = kl, kh, ll, lh
            if l < lp <= r <= rp:
                return (ell[0], (lp, None))
            if l < lp and lp <= rp < r:
                return (ell[0], (lp, rp))
            if l <= r < lp:
                return None
            if lp <= l <= r <= rp:
                return (ell[0], (Fraction(0), None))
            if lp <= l <= rp < r:
                return (ell[0], (Fraction(0), rp))
            return None  # rp < l: disjoint below
        return None

    def bound_P(self, x: ExtReal, y: ExtReal) -> ExtReal:
        if self.compose_bound == "sum":
            return x + y
        return max(x, y)

    # -- sampling (tests) --------------------------------------------------

    def sample_labels(self, rng, n: int, span: int = 4) -> List:
        out = []
        for _ in range(n):
            act = rng.choice(list(self.actions))
            if self.kind == "discrete":
                out.append(act)
            else:
                lo = Fraction(rng.randint(0, span))
                hi = lo + Fraction(rng.randint(0, span))
                out.append((act, (lo, hi)))
        return out


def _interval_or_inf(a) -> Tuple[object, object]:
    lo, hi = _iv(a)
    return (lo, hi)


def discrete_theory(actions: Iterable[str], compose_bound: str = "sum") -> LabelTheory:
    return LabelTheory("discrete", tuple(sorted(actions)), "csp", compose_bound)


def interval_theory(
    actions: Iterable[str], sync_mode: str = "add", compose_bound: str = "sum"
) -> LabelTheory:
    return LabelTheory("interval", tuple(sorted(actions)), sync_mode, compose_bound)
