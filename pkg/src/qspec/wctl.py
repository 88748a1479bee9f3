"""Quantitative WCTL over weighted Kripke structures.

Formula values live in the extended non-negative rationals: 0 is exact
satisfaction, infinity a propositional mismatch, anything between a
distance from satisfaction.  Path operators are evaluated as the least
fixed point of their one-step unrolding, which the discount factor
makes a contraction; results carry certified brackets obtained by
running the iteration from below and from above.

A note on the until operator: the paper-printed clause compares the
*value* of the left operand with the annotation c.  Evaluated verbatim,
that clause contradicts the chapter's own worked example (the printer),
whose printed numbers require comparing transition weights with c and
using the left operand as a guard.  This module implements the
guard-plus-weight reading; see the decisions ledger of the build for
the analysis.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Tuple

from .extreal import INF, ZERO, ExtReal, parse_rational
from .spectrum import DistanceResult
from .systems import KripkeStructure, ParseError

__all__ = [
    "WctlFormula",
    "Atom",
    "NegAtom",
    "WAnd",
    "WOr",
    "Exists",
    "Forall",
    "PathX",
    "PathF",
    "PathG",
    "PathU",
    "parse_wctl",
    "eval_wctl",
    "characteristic_formula",
    "kripke_bisim_distance",
]


class WctlFormula:
    __slots__ = ()


@dataclass(frozen=True)
class Atom(WctlFormula):
    name: str


@dataclass(frozen=True)
class NegAtom(WctlFormula):
    name: str


@dataclass(frozen=True)
class WAnd(WctlFormula):
    left: WctlFormula
    right: WctlFormula


@dataclass(frozen=True)
class WOr(WctlFormula):
    left: WctlFormula
    right: WctlFormula


class PathFormula:
    __slots__ = ()


@dataclass(frozen=True)
class Exists(WctlFormula):
    path: "PathFormula"


@dataclass(frozen=True)
class Forall(WctlFormula):
    path: "PathFormula"


@dataclass(frozen=True)
class PathX(PathFormula):
    bound: Fraction
    body: WctlFormula


@dataclass(frozen=True)
class PathF(PathFormula):
    bound: Fraction
    body: WctlFormula


@dataclass(frozen=True)
class PathG(PathFormula):
    bound: Fraction
    body: WctlFormula


@dataclass(frozen=True)
class PathU(PathFormula):
    bound: Fraction
    left: WctlFormula
    right: WctlFormula


# ---------------------------------------------------------------------------
# parsing:  A (!Suspended U[10] Ready),  E X[2] p,  p & q | r
# ---------------------------------------------------------------------------


def parse_wctl(text: str) -> WctlFormula:
    toks = _tokens(text)
    pos = [0]

    def peek():
        return toks[pos[0]] if pos[0] < len(toks) else None

    def eat(kind=None):
        tok = peek()
        if tok is None or (kind and tok[0] != kind):
            raise ParseError(f"unexpected token {tok!r}", text)
        pos[0] += 1
        return tok

    def state_atom() -> WctlFormula:
        tok = peek()
        if tok is None:
            raise ParseError("unexpected end of formula", text)
        kind, val = tok
        if kind == "lpar":
            eat()
            f = state_or()
            eat("rpar")
            return f
        if kind == "not":
            eat()
            inner = peek()
            if inner is None or inner[0] != "name":
                raise ParseError("negation is only defined on atoms", text)
            eat()
            return NegAtom(inner[1])
        if kind == "quant":
            eat()
            p = path_formula()
            return Exists(p) if val == "E" else Forall(p)
        if kind == "name":
            eat()
            return Atom(val)
        raise ParseError(f"unexpected token {tok!r}", text)

    def path_formula() -> PathFormula:
        tok = peek()
        if tok and tok[0] == "op":
            eat()
            op, c = tok[1]
            body = state_atom()
            if op == "X":
                return PathX(c, body)
            if op == "F":
                return PathF(c, body)
            if op == "G":
                return PathG(c, body)
            raise ParseError("U is infix", text)
        if tok and tok[0] == "lpar":
            eat()
            left = state_or()
            utok = eat("op")
            op, c = utok[1]
            if op != "U":
                raise ParseError(f"expected U, got {op}", text)
            right = state_or()
            eat("rpar")
            return PathU(c, left, right)
        left = state_or()
        utok = eat("op")
        op, c = utok[1]
        if op != "U":
            raise ParseError(f"expected U, got {op}", text)
        right = state_or()
        return PathU(c, left, right)

    def state_and() -> WctlFormula:
        f = state_atom()
        while peek() and peek()[0] == "and":
            eat()
            f = WAnd(f, state_atom())
        return f

    def state_or() -> WctlFormula:
        f = state_and()
        while peek() and peek()[0] == "or":
            eat()
            f = WOr(f, state_and())
        return f

    out = state_or()
    if pos[0] != len(toks):
        raise ParseError("trailing tokens", text)
    return out


def _tokens(text: str):
    toks = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "(":
            toks.append(("lpar", None)); i += 1
        elif c == ")":
            toks.append(("rpar", None)); i += 1
        elif c == "&":
            toks.append(("and", None)); i += 1
        elif c == "|":
            toks.append(("or", None)); i += 1
        elif c == "!":
            toks.append(("not", None)); i += 1
        elif c in "EA" and (i + 1 == len(text) or not (text[i + 1].isalnum() or text[i + 1] == "_")):
            toks.append(("quant", c)); i += 1
        elif c in "XFGU" and i + 1 < len(text) and text[i + 1] == "[":
            j = text.index("]", i)
            bound = parse_rational(text[i + 2 : j])
            if bound < 0:
                raise ParseError("subscripts must be non-negative", text)
            toks.append(("op", (c, bound))); i = j + 1
        elif c in "XFG" and (i + 1 == len(text) or not (text[i + 1].isalnum() or text[i + 1] == "_")):
            toks.append(("op", (c, Fraction(0)))); i += 1
        else:
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] in "_./"):
                j += 1
            if j == i:
                raise ParseError(f"bad character {c!r}", text)
            toks.append(("name", text[i:j])); i = j
    return toks


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _comb(pointwise: bool, lam: Fraction, step: ExtReal, tail: ExtReal) -> ExtReal:
    if pointwise:
        return max(step, ExtReal(lam) * tail)
    return step + ExtReal(lam) * tail


def _bound_B(m: KripkeStructure, phi: WctlFormula) -> ExtReal:
    consts = set()

    def walk(f):
        if isinstance(f, (Exists, Forall)):
            p = f.path
            consts.add(p.bound)
            if isinstance(p, PathU):
                walk(p.left)
                walk(p.right)
            else:
                walk(p.body)
        elif isinstance(f, (WAnd, WOr)):
            walk(f.left)
            walk(f.right)

    walk(phi)
    best = Fraction(1)
    for (_s, w, _t) in m.transitions:
        for c in consts or {Fraction(0)}:
            best = max(best, abs(w - c))
    return ExtReal(best)


def eval_wctl(
    m: KripkeStructure,
    s: str,
    phi: WctlFormula,
    semantics: str = "accumulating",
    lam: Fraction = Fraction(9, 10),
    epsilon: ExtReal = ExtReal(Fraction(1, 1000)),
) -> DistanceResult:
    """Formula value at a state, within epsilon, with a certified bracket."""
    if semantics not in ("accumulating", "pointwise"):
        raise ValueError("semantics must be accumulating or pointwise")
    lam = Fraction(lam)
    if not 0 < lam < 1:
        raise ValueError("lambda must be in (0, 1)")
    if not epsilon > ZERO:
        raise ValueError("epsilon must be positive")
    pw = semantics == "pointwise"
    b = _bound_B(m, phi)
    cap = b if pw else b * ExtReal(Fraction(1) / (1 - lam))
    # horizon: lam^k * cap <= eps
    k = 1
    p = lam
    while ExtReal(p) * cap > epsilon and k < 10_000:
        k += 1
        p *= lam
    memo_lo: Dict[Tuple[int, str], ExtReal] = {}
    memo_hi: Dict[Tuple[int, str], ExtReal] = {}

    def sval(f: WctlFormula, q: str, hi: bool) -> ExtReal:
        memo = memo_hi if hi else memo_lo
        key = (id(f), q)
        if key in memo:
            return memo[key]
        if isinstance(f, Atom):
            out = ZERO if f.name in m.label_of(q) else INF
        elif isinstance(f, NegAtom):
            if f.name not in m.props:
                raise ParseError(f"unknown proposition {f.name!r}")
            out = ZERO if f.name not in m.label_of(q) else INF
        elif isinstance(f, WAnd):
            out = max(sval(f.left, q, hi), sval(f.right, q, hi))
        elif isinstance(f, WOr):
            out = min(sval(f.left, q, hi), sval(f.right, q, hi))
        elif isinstance(f, (Exists, Forall)):
            out = path_val(f.path, isinstance(f, Exists), q, hi)
        else:
            raise TypeError(type(f).__name__)
        if isinstance(f, Atom) and f.name not in m.props:
            raise ParseError(f"unknown proposition {f.name!r}")
        memo[key] = out
        return out

    def quant(exists: bool, vals) -> ExtReal:
        vals = list(vals)
        if not vals:
            return INF if exists else ZERO
        return min(vals) if exists else max(vals)

    def path_val(p: PathFormula, exists: bool, q0: str, hi: bool) -> ExtReal:
        if isinstance(p, PathX):
            return quant(
                exists,
                (
                    _comb(pw, lam, ExtReal(abs(w - p.bound)), sval(p.body, t, hi))
                    for (w, t) in m.moves(q0)
                ),
            )
        # value iteration over all states, from below or from above
        states = sorted(m.states)
        start = cap if hi else ZERO
        v = {q: start for q in states}
        if isinstance(p, PathU):
            stop = {q: sval(p.right, q, hi) for q in states}
            guard = {q: sval(p.left, q, hi) for q in states}
        elif isinstance(p, PathF):
            stop = {q: sval(p.body, q, hi) for q in states}
            guard = {q: ZERO for q in states}
        else:  # PathG
            stop = {q: sval(p.body, q, hi) for q in states}
            guard = {q: ZERO for q in states}
        for _ in range(k):
            nv = {}
            for q in states:
                steps = quant(
                    exists,
                    (
                        _comb(
                            pw,
                            lam,
                            _u_step(pw, guard[q], ExtReal(abs(w - p.bound))),
                            v[t],
                        )
                        for (w, t) in m.moves(q)
                    ),
                )
                if isinstance(p, PathG):
                    nv[q] = max(stop[q], steps)
                else:
                    nv[q] = min(stop[q], steps)
            v = nv
        return v[q0]

    lo = sval(phi, s, False)
    hi = sval(phi, s, True)
    return DistanceResult.bracket(lo, hi, certified=True)


def _u_step(pw: bool, guard: ExtReal, wdist: ExtReal) -> ExtReal:
    # the guard reading of the until clause: a violated left operand
    # poisons the step, otherwise its value accumulates with the weight
    if pw:
        return max(guard, wdist)
    return guard + wdist


def characteristic_formula(m: KripkeStructure, s: str, n: int) -> WctlFormula:
    """Formula of the n-th unfolding: zero at s, bisim-close elsewhere."""
    if n < 0:
        raise ValueError("n must be >= 0")
    props = sorted(m.props)

    def base(q: str) -> WctlFormula:
        lab = m.label_of(q)
        parts = [Atom(p) if p in lab else NegAtom(p) for p in props]
        out = parts[0] if parts else Atom("__none__")
        for p in parts[1:]:
            out = WAnd(out, p)
        return out

    def build(q: str, d: int) -> WctlFormula:
        if d == 0:
            return base(q)
        parts: list = []
        moves = m.moves(q)
        for (w, t) in moves:
            parts.append(Exists(PathX(w, build(t, d - 1))))
        for w in sorted({w for (w, _t) in moves}):
            succs = [t for (ww, t) in moves if ww == w]
            disj = build(succs[0], d - 1)
            for t in succs[1:]:
                disj = WOr(disj, build(t, d - 1))
            parts.append(Forall(PathX(w, disj)))
        parts.append(base(q))
        out = parts[0]
        for p in parts[1:]:
            out = WAnd(out, p)
        return out

    return build(s, n)


def kripke_bisim_distance(
    m: KripkeStructure,
    s: str,
    t: str,
    semantics: str = "accumulating",
    lam: Fraction = Fraction(9, 10),
    tolerance: ExtReal = ExtReal(Fraction(1, 10**9)),
) -> DistanceResult:
    """Least fixed point of the symmetric transfer equations, with the
    proposition guard forcing infinity on label mismatch."""
    pw = semantics == "pointwise"
    lam = Fraction(lam)
    states = sorted(m.states)
    pairs = [(x, y) for x in states for y in states]
    val: Dict[Tuple[str, str], ExtReal] = {p: ZERO for p in pairs}

    def cell(x: str, y: str) -> ExtReal:
        if m.label_of(x) != m.label_of(y):
            return INF
        out = ZERO
        for flip in (False, True):
            a, b = (y, x) if flip else (x, y)
            for (w1, t1) in m.moves(a):
                best = INF
                for (w2, t2) in m.moves(b):
                    pr = (t2, t1) if flip else (t1, t2)
                    best = min(
                        best, _comb(pw, lam, ExtReal(abs(w1 - w2)), val[pr])
                    )
                out = max(out, best)
        return out

    for sweep in range(100_000):
        delta = ZERO
        for p in pairs:
            new = cell(*p)
            delta = max(delta, new.abs_diff(val[p]))
            val[p] = new
        if delta == ZERO:
            return DistanceResult.exact(val[(s, t)])
        rad = ExtReal(lam / (1 - lam)) * delta
        if rad <= tolerance:
            lo = val[(s, t)]
            hi = lo + rad if lo.is_finite else INF
            return DistanceResult.bracket(lo, hi, certified=True)
    raise RuntimeError("bisimulation distance iteration diverged")
