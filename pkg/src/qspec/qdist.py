"""Quantitative layer over the specification algebra.

Refinement distances between DMTS/NAA specifications, the thorough
bound through bounded implementation enumeration, widening and
relaxation, the powerset determinization, quantitative HML, and the
report evaluating the quantitative laws of the operations.

Scalar metrics (pointwise, accumulating, discrete) are supported here;
nu-calculus queries route through the DMTS shape, to which they are
syntactically identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .extreal import INF, ZERO, ExtReal
from .labels import LabelTheory
from .lattice import TraceDistanceSpec, build_trace_distance
from .spectrum import DistanceResult, RelationFamily
from .specs import (
    Dmts,
    HAnd,
    HBox,
    HDia,
    HFalse,
    HOr,
    HTrue,
    HmlFormula,
    Naa,
    NuExpression,
    _theory_or_discrete,
    implementations_up_to,
    refine_check,
)

__all__ = [
    "qspec_trace_distance",
    "refinement_distance",
    "thorough_distance_bound",
    "widen",
    "relaxation_check",
    "extended_impl_check",
    "determinize_wmts",
    "qhml_eval",
    "q_ops_properties",
    "tree_distance",
]

_SCALAR = ("accumulating", "pointwise", "discrete")


def qspec_trace_distance(
    kind: str, lam: Fraction, theory: LabelTheory
) -> TraceDistanceSpec:
    """Trace-distance specification whose label distance is the theory's."""
    return build_trace_distance(kind, lam, theory.distance)


def _f_scalar(spec: TraceDistanceSpec, d: ExtReal, alpha: ExtReal) -> ExtReal:
    if spec.kind == "accumulating":
        return d + ExtReal(spec.lam) * alpha
    if spec.kind == "pointwise":
        return max(d, ExtReal(spec.lam) * alpha)
    if spec.kind == "discrete":
        return alpha if d == ZERO else INF
    raise ValueError(f"refinement distances support scalar metrics, not {spec.kind}")


class _MdTables:
    """Kleene iteration for the lifted refinement distance."""

    def __init__(self, s1, s2, spec, theory, tolerance, max_sweeps=100_000):
        self.spec = spec
        self.th = theory
        self.tolerance = tolerance
        if isinstance(s1, NuExpression):
            s1 = s1.to_dmts()
        if isinstance(s2, NuExpression):
            s2 = s2.to_dmts()
        if type(s1) is not type(s2):
            raise TypeError("refinement distance needs matching formalisms")
        self.s1, self.s2 = s1, s2
        self.naa = isinstance(s1, Naa)
        self.pairs = [(x, y) for x in sorted(s1.states) for y in sorted(s2.states)]
        self.dmax = self._dmax()
        self.val: Dict[Tuple[str, str], ExtReal] = {p: ZERO for p in self.pairs}
        self.radius = ZERO
        self.family_radius = ZERO
        self.exact = False
        self._iterate(max_sweeps)

    def _labels(self, s) -> Set[object]:
        if isinstance(s, Naa):
            return {a for _q, ms in s.tran for m in ms for a, _t in m}
        return {a for _q, a, _t in s.may}

    def _dmax(self) -> ExtReal:
        best = ZERO
        for a in self._labels(self.s1):
            for b in self._labels(self.s2) | self._labels(self.s1):
                d = self.th.distance(a, b)
                if d.is_finite:
                    best = max(best, d)
        return best

    def _cell(self, x: str, y: str) -> ExtReal:
        spec, th, val = self.spec, self.th, self.val
        if self.naa:
            out = ZERO
            for m1 in self.s1.tran_of(x):
                best = INF
                for m2 in self.s2.tran_of(y):
                    fwd = ZERO
                    for (a1, t1) in m1:
                        b = INF
                        for (a2, t2) in m2:
                            b = min(
                                b, _f_scalar(spec, th.distance(a1, a2), val[(t1, t2)])
                            )
                        fwd = max(fwd, b)
                    rev = ZERO
                    for (a2, t2) in m2:
                        b = INF
                        for (a1, t1) in m1:
                            b = min(
                                b, _f_scalar(spec, th.distance(a1, a2), val[(t1, t2)])
                            )
                        rev = max(rev, b)
                    best = min(best, max(fwd, rev))
                out = max(out, best)
            return out
        mayv = ZERO
        for (a1, t1) in self.s1.mays_from(x):
            b = INF
            for (a2, t2) in self.s2.mays_from(y):
                b = min(b, _f_scalar(spec, th.distance(a1, a2), val[(t1, t2)]))
            mayv = max(mayv, b)
        mustv = ZERO
        for n2 in self.s2.musts_from(y):
            b = INF
            for n1 in self.s1.musts_from(x):
                inner = ZERO
                for (a1, t1) in n1:
                    bb = INF
                    for (a2, t2) in n2:
                        bb = min(
                            bb, _f_scalar(spec, th.distance(a1, a2), val[(t1, t2)])
                        )
                    inner = max(inner, bb)
                b = min(b, inner)
            mustv = max(mustv, b)
        return max(mayv, mustv)

    def _iterate(self, max_sweeps: int):
        spec = self.spec
        lam = spec.lam
        npairs = max(len(self.pairs), 1)
        cutoff = ExtReal(2 * npairs) * self.dmax
        if spec.kind == "discrete":
            limit = npairs + 2
        elif lam >= 1:
            limit = int(float(cutoff)) + 3 if cutoff.is_finite else npairs + 2
        else:
            limit = max_sweeps
        sweeps = 0
        while True:
            delta = ZERO
            for p in self.pairs:
                new = self._cell(*p)
                delta = max(delta, new.abs_diff(self.val[p]))
                self.val[p] = new
            sweeps += 1
            if delta == ZERO:
                self.exact = True
                return
            if lam < 1 and spec.kind != "discrete":
                rad = ExtReal(lam / (1 - lam)) * delta
                if rad <= self.tolerance:
                    self.radius = rad
                    self.family_radius = ExtReal(Fraction(1) / (1 - lam)) * delta
                    return
            if sweeps > limit:
                if spec.kind == "accumulating" and lam >= 1:
                    for p in self.pairs:
                        if not self.val[p] <= cutoff:
                            self.val[p] = INF
                    self.exact = True
                    return
                raise RuntimeError("refinement distance iteration diverged")

    def result(self) -> DistanceResult:
        init1 = sorted(self.s1.initial)
        init2 = sorted(self.s2.initial)
        lo = ZERO
        for i1 in init1:
            b = INF
            for i2 in init2:
                b = min(b, self.val[(i1, i2)])
            lo = max(lo, b)
        witness = self._family()
        if self.exact:
            return DistanceResult(lo, lo, lo, True, witness)
        hi = lo + self.radius if lo.is_finite else INF
        mid = DistanceResult.bracket(lo, hi, True)
        return DistanceResult(mid.value, lo, hi, True, witness)

    def _family(self) -> RelationFamily:
        levels: Dict[ExtReal, Set[Tuple[str, str]]] = {}
        for p, v in self.val.items():
            hi = v + self.family_radius if v.is_finite else INF
            levels.setdefault(hi, set()).add(p)
        entries = tuple(
            (lvl, frozenset(prs))
            for lvl, prs in sorted(
                levels.items(), key=lambda kv: (kv[0].is_inf, kv[0].num or 0)
            )
        )
        return RelationFamily(entries)


def refinement_distance(
    s1,
    s2,
    spec: TraceDistanceSpec,
    theory: Optional[LabelTheory] = None,
    tolerance: ExtReal = ExtReal(Fraction(1, 10**9)),
) -> DistanceResult:
    """Lifted modal refinement distance (least fixed point, certified)."""
    if spec.kind not in _SCALAR:
        raise ValueError("refinement distances support scalar metrics only")
    if isinstance(s1, NuExpression):
        s1 = s1.to_dmts()
    if isinstance(s2, NuExpression):
        s2 = s2.to_dmts()
    if type(s1) is not type(s2):
        from .specs import dmts_to_naa

        s1 = dmts_to_naa(s1) if isinstance(s1, Dmts) else s1
        s2 = dmts_to_naa(s2) if isinstance(s2, Dmts) else s2
    th = theory if theory is not None else _theory_or_discrete(s1, None)
    return _MdTables(s1, s2, spec, th, tolerance).result()


def tree_distance(t1: FrozenSet, t2: FrozenSet, spec, theory) -> ExtReal:
    """Symmetric implementation distance between enumeration trees."""
    def go(a: FrozenSet, b: FrozenSet) -> ExtReal:
        fwd = ZERO
        for (m, ca) in a:
            best = INF
            for (n, cb) in b:
                best = min(best, _f_scalar(spec, theory.distance(m, n), go(ca, cb)))
            fwd = max(fwd, best)
        rev = ZERO
        for (n, cb) in b:
            best = INF
            for (m, ca) in a:
                best = min(best, _f_scalar(spec, theory.distance(m, n), go(ca, cb)))
            rev = max(rev, best)
        return max(fwd, rev)

    return go(t1, t2)


def thorough_distance_bound(
    s1,
    s2,
    spec: TraceDistanceSpec,
    theory: Optional[LabelTheory] = None,
    depth: int = 3,
    tolerance: ExtReal = ExtReal(Fraction(1, 10**6)),
) -> DistanceResult:
    """Bounded thorough distance: enumeration lower bound below the
    modal refinement distance as upper bound."""
    base = s1.to_dmts() if isinstance(s1, NuExpression) else s1
    th = theory if theory is not None else _theory_or_discrete(base, None)
    i1 = implementations_up_to(s1, depth, th)
    i2 = implementations_up_to(s2, depth, th)
    lo = ZERO
    for t1 in i1:
        best = INF
        for t2 in i2:
            best = min(best, tree_distance(t1, t2, spec, th))
        lo = max(lo, best)
    md = refinement_distance(s1, s2, spec, th, tolerance)
    return DistanceResult(lo, lo, md.upper, md.certified, md.witness)


def widen(s: Dmts, delta: Fraction) -> Dmts:
    """Enlarge every interval label by +-delta."""
    delta = Fraction(delta)
    if delta < 0:
        raise ValueError("delta must be non-negative")

    def wl(label):
        if not isinstance(label, tuple):
            return label
        act, (lo, hi) = label
        return (
            act,
            (None if lo is None else lo - delta, None if hi is None else hi + delta),
        )

    return Dmts(
        s.states,
        s.initial,
        frozenset((x, wl(a), y) for x, a, y in s.may),
        frozenset((x, frozenset((wl(a), y) for a, y in n)) for x, n in s.must),
    )


def relaxation_check(
    s,
    s_prime,
    epsilon: ExtReal,
    spec: TraceDistanceSpec,
    theory: Optional[LabelTheory] = None,
) -> bool:
    """S' is an epsilon-relaxation of S: S refines S' and S' is within
    epsilon of S."""
    base = s.to_dmts() if isinstance(s, NuExpression) else s
    th = theory if theory is not None else _theory_or_discrete(base, None)
    if not refine_check(s, s_prime, th)[0]:
        return False
    d = refinement_distance(s_prime, s, spec, th)
    return d.lower <= epsilon


def extended_impl_check(
    impl,
    s,
    alpha: ExtReal,
    spec: TraceDistanceSpec,
    theory: Optional[LabelTheory] = None,
) -> bool:
    """Membership in the alpha-relaxed implementation semantics."""
    base = s.to_dmts() if isinstance(s, NuExpression) else s
    th = theory if theory is not None else _theory_or_discrete(base, None)
    if alpha == ZERO:
        return refine_check(impl, s, th)[0]
    d = refinement_distance(impl, s, spec, th)
    return d.value <= alpha


def determinize_wmts(s: Dmts, theory: Optional[LabelTheory] = None) -> Dmts:
    """The powerset over-approximation with per-action interval hulls.

    Sound for refinement (S refines the result; any deterministic D
    refined by S also refines it Boolean-wise) but quantitatively not a
    closest hull, which is the point of the counterexample tests.
    """
    if not s.is_mts():
        raise ValueError("determinization needs MTS-shaped input")
    th = theory if theory is not None else _theory_or_discrete(s, None)

    def action_of(label):
        return label[0] if isinstance(label, tuple) else label

    def hull(labels: List[object]) -> object:
        if not isinstance(labels[0], tuple):
            return labels[0]
        act = labels[0][0]
        los = [l[1][0] for l in labels]
        his = [l[1][1] for l in labels]
        lo = None if any(x is None for x in los) else min(los)
        hi = None if any(x is None for x in his) else max(his)
        return (act, (lo, hi))

    root = frozenset(s.initial)
    frontier = [root]
    seen: Set[FrozenSet] = set()
    may: Set[Tuple[str, object, str]] = set()
    must: Set[Tuple[str, FrozenSet]] = set()

    def name(t: FrozenSet) -> str:
        return "{" + ",".join(sorted(t)) + "}"

    while frontier:
        t = frontier.pop()
        if t in seen:
            continue
        seen.add(t)
        acts = sorted({action_of(a) for q in t for a, _x in s.mays_from(q)})
        for act in acts:
            labels = []
            tgt = set()
            for q in t:
                for (a, x) in s.mays_from(q):
                    if action_of(a) == act:
                        labels.append(a)
                        tgt.add(x)
            lab = hull(labels)
            tgt_f = frozenset(tgt)
            may.add((name(t), lab, name(tgt_f)))
            all_must = all(
                any(
                    action_of(next(iter(n))[0]) == act
                    and next(iter(n))[1] in tgt
                    for n in s.musts_from(q)
                    if n
                )
                for q in t
            )
            if all_must and t:
                must.add((name(t), frozenset({(lab, name(tgt_f))})))
            if tgt_f not in seen:
                frontier.append(tgt_f)
    states = {name(t) for t in seen}
    return Dmts(frozenset(states), frozenset({name(root)}), frozenset(may), frozenset(must))


def qhml_eval(
    s: Dmts,
    phi: HmlFormula,
    spec: TraceDistanceSpec,
    theory: Optional[LabelTheory] = None,
) -> Dict[str, ExtReal]:
    """Quantitative HML over MTS-shaped specifications, per state.

    Diamonds take the infimum over must transitions, boxes the supremum
    over may transitions, both guarded by a finite label distance.
    """
    th = theory if theory is not None else _theory_or_discrete(s, None)
    if spec.kind not in _SCALAR:
        raise ValueError("qhml supports scalar metrics only")

    def ev(phi: HmlFormula, q: str, memo) -> ExtReal:
        key = (id(phi), q)
        if key in memo:
            return memo[key]
        if isinstance(phi, HTrue):
            out = ZERO
        elif isinstance(phi, HFalse):
            out = INF
        elif isinstance(phi, HAnd):
            out = max(ev(phi.left, q, memo), ev(phi.right, q, memo))
        elif isinstance(phi, HOr):
            out = min(ev(phi.left, q, memo), ev(phi.right, q, memo))
        elif isinstance(phi, HDia):
            out = INF
            for n in s.musts_from(q):
                for (k, t) in n:
                    d = th.distance(k, phi.label)
                    if d.is_inf:
                        continue
                    out = min(out, _f_scalar(spec, d, ev(phi.target, t, memo)))
        elif isinstance(phi, HBox):
            out = ZERO
            for (k, t) in s.mays_from(q):
                d = th.distance(k, phi.label)
                if d.is_inf:
                    continue
                out = max(out, _f_scalar(spec, d, ev(phi.body, t, memo)))
        else:
            raise TypeError(type(phi).__name__)
        memo[key] = out
        return out

    memo: Dict = {}
    return {q: ev(phi, q, memo) for q in sorted(s.states)}


def q_ops_properties(
    s1,
    s2,
    s3,
    s4=None,
    spec: Optional[TraceDistanceSpec] = None,
    theory: Optional[LabelTheory] = None,
    tolerance: ExtReal = ExtReal(Fraction(1, 10**6)),
) -> Dict[str, object]:
    """Evaluate the quantitative laws of the operations on a tuple.

    Checks the exact disjunction law, the conjunction soundness
    inequality, the uniform composition bound, and (where the quotient
    is defined) its exactness.
    """
    from .specs import compose, conjoin, disjoin, quotient, BudgetError

    base = s1.to_dmts() if isinstance(s1, NuExpression) else s1
    th = theory if theory is not None else _theory_or_discrete(base, None)
    spec = spec or qspec_trace_distance("accumulating", Fraction(9, 10), th)
    tol2 = tolerance + tolerance
    report: Dict[str, object] = {}

    def md(a, b):
        return refinement_distance(a, b, spec, th, tolerance)

    dis = disjoin(s1, s2)
    lhs = md(dis, s3)
    r1, r2 = md(s1, s3), md(s2, s3)
    want = max(r1.value, r2.value)
    report["disjunction_exact"] = lhs.value.abs_diff(want) <= tol2
    report["disjunction"] = (lhs.value, want)

    conj = conjoin(s2, s3, th)
    lhs2 = md(s1, conj)
    bound = max(md(s1, s2).lower, md(s1, s3).lower)
    report["conjunction_sound"] = (
        bound <= lhs2.upper or not lhs2.value.is_finite
    )
    report["conjunction"] = (lhs2.value, bound)

    if s4 is not None:
        comp_l = compose(s1, s2, th)
        comp_r = compose(s3, s4, th)
        lhs3 = md(comp_l, comp_r)
        p = th.bound_P(md(s1, s3).value, md(s2, s4).value)
        report["composition_bounded"] = lhs3.lower <= p + tol2
        report["composition"] = (lhs3.value, p)

    try:
        q = quotient(s3, s1, th)
        lhs4 = md(compose(s1, s2, th), s3)
        rhs4 = md(s2, q)
        report["quotient_exact"] = (
            lhs4.value.abs_diff(rhs4.value) <= tol2
            or (lhs4.value.is_inf and rhs4.value.is_inf)
        )
        report["quotient"] = (lhs4.value, rhs4.value)
    except BudgetError:
        report["quotient_exact"] = None
    return report
