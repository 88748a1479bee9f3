"""Quantale-valued lattice values and recursively specified trace distances.

A trace distance is described by a small algebra: a lattice of values
(scalars, fixed-length averaging windows, or lead-indexed functions), a
one-step iterator F combining a label pair with a lattice value, and an
eval morphism back to extended reals.  One such specification exists per
metric kind; every distance computation in the library is parameterized
by it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Optional, Tuple

from .extreal import INF, ZERO, ExtReal

__all__ = [
    "LatticeValue",
    "Scalar",
    "Seq",
    "LeadFun",
    "TraceDistanceSpec",
    "build_trace_distance",
    "lift_trace_distance",
    "label_distance",
    "interval_label_distance",
    "KINDS",
]

KINDS = ("pointwise", "accumulating", "maxlead", "limavg", "discrete")


class LatticeValue:
    """Base class; all values are immutable and hashable."""

    __slots__ = ()


@dataclass(frozen=True)
class Scalar(LatticeValue):
    value: ExtReal

    def __repr__(self) -> str:
        return f"Scalar({self.value!r})"


@dataclass(frozen=True)
class Seq(LatticeValue):
    """Averaging window for the limit-average metric, indexed 0..horizon-1."""

    entries: Tuple[ExtReal, ...]

    def __repr__(self) -> str:
        return f"Seq({list(self.entries)!r})"


@dataclass(frozen=True)
class LeadFun(LatticeValue):
    """Finite-support mapping lead -> value with an explicit default.

    Supports grow lazily during fixed-point iteration; leads whose
    absolute value exceeds the caller's divergence bound are truncated to
    infinity by the distance engines, never here.
    """

    entries: Tuple[Tuple[Fraction, ExtReal], ...]
    default: ExtReal

    def at(self, lead: Fraction) -> ExtReal:
        for k, v in self.entries:
            if k == lead:
                return v
        return self.default

    @staticmethod
    def from_dict(d: Dict[Fraction, ExtReal], default: ExtReal) -> "LeadFun":
        items = tuple(sorted(((k, v) for k, v in d.items() if v != default)))
        return LeadFun(items, default)

    def __repr__(self) -> str:
        return f"LeadFun({dict(self.entries)!r}, default={self.default!r})"


LabelDistance = Callable[[object, object], ExtReal]


@dataclass(frozen=True)
class TraceDistanceSpec:
    """One metric of the spectrum: lattice, iterator F and eval morphism."""

    kind: str
    lam: Fraction
    label_distance: LabelDistance
    horizon: Optional[int] = None
    # Set for kinds with a contraction certificate (lam < 1 scalar kinds
    # and the discounted maximum-lead); None means no contraction bound.
    contraction: Optional[Fraction] = field(default=None)

    # -- lattice structure ---------------------------------------------

    def bottom(self) -> LatticeValue:
        if self.kind == "limavg":
            return Seq((ZERO,) * self.horizon)
        if self.kind == "maxlead":
            return LeadFun((), ZERO)
        return Scalar(ZERO)

    def top(self) -> LatticeValue:
        if self.kind == "limavg":
            return Seq((INF,) * self.horizon)
        if self.kind == "maxlead":
            return LeadFun((), INF)
        return Scalar(INF)

    def le(self, a: LatticeValue, b: LatticeValue) -> bool:
        if isinstance(a, Scalar):
            return a.value <= b.value
        if isinstance(a, Seq):
            return all(x <= y for x, y in zip(a.entries, b.entries))
        keys = {k for k, _ in a.entries} | {k for k, _ in b.entries}
        if not (a.default <= b.default):
            return False
        return all(a.at(k) <= b.at(k) for k in keys)

    def join(self, a: LatticeValue, b: LatticeValue) -> LatticeValue:
        if isinstance(a, Scalar):
            return a if b.value <= a.value else b
        if isinstance(a, Seq):
            return Seq(tuple(max(x, y) for x, y in zip(a.entries, b.entries)))
        keys = {k for k, _ in a.entries} | {k for k, _ in b.entries}
        out = {k: max(a.at(k), b.at(k)) for k in keys}
        return LeadFun.from_dict(out, max(a.default, b.default))

    def meet(self, a: LatticeValue, b: LatticeValue) -> LatticeValue:
        if isinstance(a, Scalar):
            return a if a.value <= b.value else b
        if isinstance(a, Seq):
            return Seq(tuple(min(x, y) for x, y in zip(a.entries, b.entries)))
        keys = {k for k, _ in a.entries} | {k for k, _ in b.entries}
        out = {k: min(a.at(k), b.at(k)) for k in keys}
        return LeadFun.from_dict(out, min(a.default, b.default))

    def add(self, a: LatticeValue, b: LatticeValue) -> LatticeValue:
        if isinstance(a, Scalar):
            return Scalar(a.value + b.value)
        if isinstance(a, Seq):
            return Seq(tuple(x + y for x, y in zip(a.entries, b.entries)))
        keys = {k for k, _ in a.entries} | {k for k, _ in b.entries}
        out = {k: a.at(k) + b.at(k) for k in keys}
        return LeadFun.from_dict(out, a.default + b.default)

    def sup_dist(self, a: LatticeValue, b: LatticeValue) -> ExtReal:
        """Sup-norm distance between values, used for convergence radii."""
        if isinstance(a, Scalar):
            return a.value.abs_diff(b.value)
        if isinstance(a, Seq):
            out = ZERO
            for x, y in zip(a.entries, b.entries):
                out = max(out, x.abs_diff(y))
            return out
        keys = {k for k, _ in a.entries} | {k for k, _ in b.entries}
        out = a.default.abs_diff(b.default)
        for k in keys:
            out = max(out, a.at(k).abs_diff(b.at(k)))
        return out

    # -- the distance iterator ------------------------------------------

    def F(self, a: object, b: object, alpha: LatticeValue) -> LatticeValue:
        d = self.label_distance(a, b)
        if self.kind == "accumulating":
            return Scalar(d + self.lam * alpha.value)
        if self.kind == "pointwise":
            return Scalar(max(d, self.lam * alpha.value))
        if self.kind == "discrete":
            return alpha if d == ZERO else Scalar(INF)
        if self.kind == "limavg":
            entries = []
            for j in range(self.horizon):
                if j == 0:
                    entries.append(d)
                else:
                    prev = alpha.entries[j - 1]
                    entries.append(
                        d * Fraction(1, j + 1) + prev * Fraction(j, j + 1)
                    )
            return Seq(tuple(entries))
        if self.kind == "maxlead":
            # F(x, y, h)(delta) = max(|delta + x - y|, lam * h(delta + x - y)).
            # Representable with finite support only when h defaults to
            # infinity; the distance engines maintain exactly that shape.
            if d.is_inf:
                return self.top()
            if not alpha.default.is_inf:
                raise ValueError(
                    "maxlead F needs values with infinite default; "
                    "use the engines' lead-tracking evaluation instead"
                )
            diff = _lead_of(a) - _lead_of(b)
            out: Dict[Fraction, ExtReal] = {}
            for k, v in alpha.entries:
                out[k - diff] = max(ExtReal(abs(k)), self.lam * v)
            return LeadFun.from_dict(out, INF)
        raise ValueError(f"unknown kind {self.kind}")

    def F_at(self, a: object, b: object, alpha: LatticeValue, lead: Fraction) -> ExtReal:
        """Point evaluation of F for lead-indexed values, total in alpha."""
        if self.kind != "maxlead":
            return self.eval(self.F(a, b, alpha))
        if self.label_distance(a, b).is_inf:
            return INF
        shifted = lead + _lead_of(a) - _lead_of(b)
        return max(ExtReal(abs(shifted)), self.lam * alpha.at(shifted))

    def eval(self, alpha: LatticeValue) -> ExtReal:
        if isinstance(alpha, Scalar):
            return alpha.value
        if isinstance(alpha, Seq):
            out = INF
            for x in alpha.entries:
                out = min(out, x)
            return out
        return alpha.at(Fraction(0))


def _lead_of(label: object) -> Fraction:
    """Numeric content of a label for lead accumulation."""
    if isinstance(label, tuple) and len(label) == 2:
        return Fraction(label[1])
    return Fraction(label)  # type: ignore[arg-type]


def build_trace_distance(
    kind: str,
    lam: Fraction = Fraction(1),
    label_distance: Optional[LabelDistance] = None,
    horizon: Optional[int] = None,
) -> TraceDistanceSpec:
    """Assemble the TraceDistanceSpec for one of the five metric kinds."""
    if kind not in KINDS:
        raise ValueError(f"unsupported kind {kind!r}")
    lam = Fraction(lam)
    if not 0 < lam <= 1:
        raise ValueError("lambda must be in (0, 1]")
    if kind == "limavg":
        if horizon is None or horizon < 1:
            raise ValueError("limavg requires a positive horizon")
    elif horizon is not None and kind != "limavg":
        horizon = None
    if label_distance is None:
        label_distance = default_label_distance
    contraction = None
    if kind in ("accumulating", "pointwise", "maxlead") and lam < 1:
        contraction = lam
    return TraceDistanceSpec(
        kind=kind,
        lam=lam,
        label_distance=label_distance,
        horizon=horizon,
        contraction=contraction,
    )


def default_label_distance(a: object, b: object) -> ExtReal:
    """|x - y| on matching actions; infinity across distinct actions.

    Accepts bare numbers, (action, weight) pairs and (action, interval)
    pairs; intervals use the asymmetric Hausdorff lift.
    """
    if isinstance(a, tuple) and isinstance(b, tuple):
        if a[0] != b[0]:
            return INF
        return interval_label_distance(a[1], b[1])
    if isinstance(a, tuple) or isinstance(b, tuple):
        return INF
    return ExtReal(abs(Fraction(a) - Fraction(b)))  # type: ignore[arg-type]


def interval_label_distance(x: object, y: object) -> ExtReal:
    """Hausdorff distance from interval/point x to interval/point y."""
    x1, x2 = _as_interval(x)
    y1, y2 = _as_interval(y)
    cands = [ZERO]
    if y1 is not None:
        cands.append(INF if x1 is None else ExtReal(max(y1 - x1, 0)))
    if y2 is not None:
        cands.append(INF if x2 is None else ExtReal(max(x2 - y2, 0)))
    return max(cands)


def _as_interval(x: object) -> Tuple[Optional[Fraction], Optional[Fraction]]:
    if isinstance(x, tuple):
        lo, hi = x
        lo = None if lo is None else Fraction(lo)
        hi = None if hi is None else Fraction(hi)
        return lo, hi
    v = Fraction(x)  # type: ignore[arg-type]
    return v, v


def label_distance(theory_or_spec: object, a: object, b: object) -> ExtReal:
    """Asymmetric label distance under a theory or a trace-distance spec."""
    dist = getattr(theory_or_spec, "distance", None)
    if dist is not None:
        return dist(a, b)
    ld = getattr(theory_or_spec, "label_distance", None)
    if ld is not None:
        return ld(a, b)
    return default_label_distance(a, b)


def lift_trace_distance(spec: TraceDistanceSpec, sigma, tau) -> ExtReal:
    """eval of the right-fold of F over paired symbols of two finite traces."""
    sa = list(getattr(sigma, "symbols", sigma))
    sb = list(getattr(tau, "symbols", tau))
    if len(sa) != len(sb):
        return INF
    if spec.kind == "maxlead":
        # Forward pass: sup_i lam^i |lead_i| with plain running leads.
        out, lead, disc = ZERO, Fraction(0), Fraction(1)
        for a, b in zip(sa, sb):
            if spec.label_distance(a, b).is_inf:
                return INF
            lead += _lead_of(a) - _lead_of(b)
            out = max(out, ExtReal(disc * abs(lead)))
            disc *= spec.lam
        return out
    acc = spec.bottom()
    for a, b in zip(reversed(sa), reversed(sb)):
        acc = spec.F(a, b, acc)
    return spec.eval(acc)
