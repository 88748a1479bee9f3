"""DMTS, acceptance automata, the modal nu-calculus and hybrid formulas.

The four formalisms are structurally equivalent; six translations move
between them.  All algebra (disjunction, conjunction, composition,
quotient, pruning) is implemented once over a LabelTheory, so the
discrete theory recovers the classical constructions and the interval
theory the weighted ones.

Normal-form nu-expressions share their representation with DMTS
(diamonds are disjunctive musts, boxes are may edges), which makes the
two syntactic translations literal field swaps and exact inverses.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .extreal import parse_rational
from .labels import LabelTheory, discrete_theory
from .systems import ParseError

__all__ = [
    "Dmts",
    "Naa",
    "NuExpression",
    "HybridExpression",
    "HmlFormula",
    "refine_check",
    "translate",
    "dmts_to_naa",
    "naa_to_dmts",
    "dmts_to_nu",
    "nu_to_dmts",
    "naa_to_hybrid",
    "hybrid_to_naa",
    "dmts_to_hybrid",
    "tree_to_dmts",
    "BudgetError",
    "normalize_nu",
    "parse_hml",
    "disjoin",
    "conjoin",
    "compose",
    "quotient",
    "quotient_mts",
    "prune",
    "implementations_up_to",
    "parse_spec",
    "serialize_spec",
    "state_budget",
    "LIGHTNING",
]

LIGHTNING = "!inconsistent"

MustSet = FrozenSet[Tuple[object, str]]


def state_budget() -> int:
    return int(os.environ.get("QSPEC_STATE_BUDGET", "4096"))


def _lkey(label) -> tuple:
    if isinstance(label, tuple):
        act, (lo, hi) = label
        return (
            1,
            act,
            lo is None,
            lo if lo is not None else 0,
            hi is None,
            hi if hi is not None else 0,
        )
    return (0, str(label), False, 0, False, 0)


def _mkey(m: MustSet) -> tuple:
    return tuple(sorted((( _lkey(a), t) for a, t in m)))


# ---------------------------------------------------------------------------
# the formalisms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dmts:
    states: FrozenSet[str]
    initial: FrozenSet[str]
    may: FrozenSet[Tuple[str, object, str]]
    must: FrozenSet[Tuple[str, MustSet]]

    def __post_init__(self):
        for s, a, t in self.may:
            if s not in self.states or t not in self.states:
                raise ValueError(f"unknown state in may {s}->{t}")
        for s, n in self.must:
            if s not in self.states:
                raise ValueError(f"unknown state {s} in must")
            for _a, t in n:
                if t not in self.states:
                    raise ValueError(f"unknown state {t} in must branch")
        if not self.initial <= self.states:
            raise ValueError("initial states must be declared")

    def validate(self, theory: LabelTheory) -> None:
        """Every disjunctive-must branch needs a covering may transition."""
        for s, n in self.must:
            for a, t in n:
                if not any(
                    src == s and tgt == t and theory.refines(a, b)
                    for src, b, tgt in self.may
                ):
                    raise ValueError(f"must branch {s} -{a}-> {t} lacks a may")

    def mays_from(self, s: str) -> List[Tuple[object, str]]:
        return sorted(
            ((a, t) for src, a, t in self.may if src == s),
            key=lambda p: (_lkey(p[0]), p[1]),
        )

    def musts_from(self, s: str) -> List[MustSet]:
        return sorted((n for src, n in self.must if src == s), key=_mkey)

    def is_mts(self) -> bool:
        return len(self.initial) == 1 and all(len(n) == 1 for _s, n in self.must)

    def is_implementation(self, theory: LabelTheory) -> bool:
        if len(self.initial) != 1:
            return False
        musts = {(s, next(iter(n))) for s, n in self.must if len(n) == 1}
        if any(len(n) != 1 for _s, n in self.must):
            return False
        mays = {(s, (a, t)) for s, a, t in self.may}
        return musts == mays and all(
            theory.is_implementation(a) for _s, (a, _t) in mays
        )


@dataclass(frozen=True)
class Naa:
    states: FrozenSet[str]
    initial: FrozenSet[str]
    tran: Tuple[Tuple[str, FrozenSet[MustSet]], ...]

    def __post_init__(self):
        covered = {s for s, _ in self.tran}
        if covered != set(self.states):
            raise ValueError("tran must cover exactly the declared states")
        if not self.initial <= self.states:
            raise ValueError("initial states must be declared")

    @staticmethod
    def make(states, initial, tran: Dict[str, Iterable[Iterable[Tuple[object, str]]]]):
        states = frozenset(states)
        body = []
        for s in sorted(states):
            ms = frozenset(frozenset(m) for m in tran.get(s, []))
            body.append((s, ms))
        return Naa(states, frozenset(initial), tuple(body))

    def tran_of(self, s: str) -> FrozenSet[MustSet]:
        for q, ms in self.tran:
            if q == s:
                return ms
        raise KeyError(s)

    def tran_dict(self) -> Dict[str, FrozenSet[MustSet]]:
        return dict(self.tran)


@dataclass(frozen=True)
class NuExpression:
    """Normal-form nu-calculus expression.

    diamond plays the role of disjunctive musts and box of may edges;
    the declaration of a variable x is the conjunction of one diamond
    disjunction per requirement with one box disjunction per label.
    """

    vars: FrozenSet[str]
    initial: FrozenSet[str]
    diamond: FrozenSet[Tuple[str, MustSet]]
    box: FrozenSet[Tuple[str, object, str]]

    def to_dmts(self) -> Dmts:
        return Dmts(self.vars, self.initial, self.box, self.diamond)

    @staticmethod
    def from_dmts(d: Dmts) -> "NuExpression":
        return NuExpression(d.states, d.initial, d.must, d.may)


# -- hybrid modal logic ------------------------------------------------------


class HmlFormula:
    __slots__ = ()


@dataclass(frozen=True)
class HTrue(HmlFormula):
    pass


@dataclass(frozen=True)
class HFalse(HmlFormula):
    pass


@dataclass(frozen=True)
class HVar(HmlFormula):
    name: str


@dataclass(frozen=True)
class HDia(HmlFormula):
    label: object
    target: "HmlFormula"


@dataclass(frozen=True)
class HBox(HmlFormula):
    label: object
    body: "HmlFormula"


@dataclass(frozen=True)
class HNeg(HmlFormula):
    body: HmlFormula


@dataclass(frozen=True)
class HAnd(HmlFormula):
    left: HmlFormula
    right: HmlFormula


@dataclass(frozen=True)
class HOr(HmlFormula):
    left: HmlFormula
    right: HmlFormula


@dataclass(frozen=True)
class HybridExpression:
    vars: FrozenSet[str]
    initial: FrozenSet[str]
    formulas: Tuple[Tuple[str, HmlFormula], ...]
    enumeration_bound: int = 16

    def formula_of(self, x: str) -> HmlFormula:
        for v, f in self.formulas:
            if v == x:
                return f
        raise KeyError(x)

    def semantics(self, x: str, labels: Sequence[object]) -> FrozenSet[MustSet]:
        """All transition sets satisfying the formula of x."""
        atoms = [(a, v) for a in labels for v in sorted(self.vars)]
        if len(atoms) > self.enumeration_bound:
            raise ValueError(
                f"hybrid enumeration over {len(atoms)} atoms exceeds the bound"
            )
        out = []
        for bits in itertools.product((False, True), repeat=len(atoms)):
            m = frozenset(at for at, b in zip(atoms, bits) if b)
            if _hml_holds(self.formula_of(x), m):
                out.append(m)
        return frozenset(out)


def _hml_holds(phi: HmlFormula, m: MustSet) -> bool:
    if isinstance(phi, HTrue):
        return True
    if isinstance(phi, HFalse):
        return False
    if isinstance(phi, HDia):
        tgt = phi.target
        if not isinstance(tgt, HVar):
            raise ValueError("hybrid diamonds must target a variable")
        return (phi.label, tgt.name) in m
    if isinstance(phi, HNeg):
        return not _hml_holds(phi.body, m)
    if isinstance(phi, HAnd):
        return _hml_holds(phi.left, m) and _hml_holds(phi.right, m)
    if isinstance(phi, HOr):
        return _hml_holds(phi.left, m) or _hml_holds(phi.right, m)
    raise ValueError(f"not a hybrid formula: {phi}")


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------


def _theory_or_discrete(spec, theory: Optional[LabelTheory]) -> LabelTheory:
    if theory is not None:
        return theory
    labels: Set[object] = set()
    if isinstance(spec, Dmts):
        labels = {a for _s, a, _t in spec.may}
    elif isinstance(spec, Naa):
        labels = {a for _s, ms in spec.tran for m in ms for a, _t in m}
    acts = {a[0] if isinstance(a, tuple) else a for a in labels}
    kind = "interval" if any(isinstance(a, tuple) for a in labels) else "discrete"
    if kind == "interval":
        from .labels import interval_theory

        return interval_theory(acts or {"a"})
    return discrete_theory(acts or {"a"})


def refine_check(s1, s2, theory: Optional[LabelTheory] = None):
    """Greatest-fixed-point modal refinement; returns (holds, relation)."""
    if isinstance(s1, NuExpression) and isinstance(s2, NuExpression):
        return refine_check(s1.to_dmts(), s2.to_dmts(), theory)
    if isinstance(s1, HybridExpression) and isinstance(s2, HybridExpression):
        th = theory if theory is not None else discrete_theory({"a"})
        return refine_check(
            translate(s1, "naa", th), translate(s2, "naa", th), th
        )
    if isinstance(s1, Dmts) and isinstance(s2, Dmts):
        return _refine_dmts(s1, s2, _theory_or_discrete(s1, theory))
    if isinstance(s1, Naa) and isinstance(s2, Naa):
        return _refine_naa(s1, s2, _theory_or_discrete(s1, theory))
    raise TypeError("refine_check needs two specifications of the same formalism")


def _refine_dmts(d1: Dmts, d2: Dmts, th: LabelTheory):
    rel = {(x, y) for x in d1.states for y in d2.states}

    def ok(x, y):
        for a1, t1 in d1.mays_from(x):
            if not any(
                th.refines(a1, a2) and (t1, t2) in rel for a2, t2 in d2.mays_from(y)
            ):
                return False
        for n2 in d2.musts_from(y):
            found = False
            for n1 in d1.musts_from(x):
                if all(
                    any(
                        th.refines(a1, a2) and (t1, t2) in rel for (a2, t2) in n2
                    )
                    for (a1, t1) in n1
                ):
                    found = True
                    break
            if not found:
                return False
        return True

    changed = True
    while changed:
        changed = False
        for pr in sorted(rel):
            if not ok(*pr):
                rel.discard(pr)
                changed = True
    holds = all(any((i1, i2) in rel for i2 in d2.initial) for i1 in d1.initial)
    return holds, (frozenset(rel) if holds else None)


def _match_sets(m1: MustSet, m2: MustSet, th: LabelTheory, rel) -> bool:
    fwd = all(
        any(th.refines(a1, a2) and (t1, t2) in rel for (a2, t2) in m2)
        for (a1, t1) in m1
    )
    if not fwd:
        return False
    return all(
        any(th.refines(a1, a2) and (t1, t2) in rel for (a1, t1) in m1)
        for (a2, t2) in m2
    )


def _refine_naa(a1: Naa, a2: Naa, th: LabelTheory):
    rel = {(x, y) for x in a1.states for y in a2.states}

    def ok(x, y):
        for m1 in a1.tran_of(x):
            if not any(_match_sets(m1, m2, th, rel) for m2 in a2.tran_of(y)):
                return False
        return True

    changed = True
    while changed:
        changed = False
        for pr in sorted(rel):
            if not ok(*pr):
                rel.discard(pr)
                changed = True
    holds = all(any((i1, i2) in rel for i2 in a2.initial) for i1 in a1.initial)
    return holds, (frozenset(rel) if holds else None)


# ---------------------------------------------------------------------------
# translations
# ---------------------------------------------------------------------------


def dmts_to_nu(d: Dmts) -> NuExpression:
    return NuExpression.from_dmts(d)


def nu_to_dmts(n: NuExpression) -> Dmts:
    return n.to_dmts()


def dmts_to_naa(d: Dmts, budget: Optional[int] = None) -> Naa:
    budget = budget or state_budget()
    tran: Dict[str, List] = {}
    for s in sorted(d.states):
        mays = d.mays_from(s)
        musts = d.musts_from(s)
        if len(mays) > 20:
            raise ValueError("may-degree too large for the NAA translation")
        out = []
        for bits in itertools.product((False, True), repeat=len(mays)):
            m = frozenset(p for p, b in zip(mays, bits) if b)
            if all(n & m for n in musts):
                out.append(m)
            if len(out) > budget:
                raise ValueError("NAA translation exceeded the state budget")
        tran[s] = out
    return Naa.make(d.states, d.initial, tran)


def _mname(m: MustSet) -> str:
    if m == LIGHTNING:
        return LIGHTNING
    return "{" + ",".join(f"{_fmt_label(a)}>{t}" for a, t in sorted(m, key=lambda p: (_lkey(p[0]), p[1]))) + "}"


def naa_to_dmts(a: Naa) -> Dmts:
    """The intricate direction, with the inconsistent catch-all state."""
    msets = {m for _s, ms in a.tran for m in ms}
    names = {m: _mname(m) for m in msets}
    states = set(names.values()) | {LIGHTNING}
    initial = {names[m] for s0 in a.initial for m in a.tran_of(s0)}
    if any(not a.tran_of(s0) for s0 in a.initial):
        initial.add(LIGHTNING)
    must: Set[Tuple[str, MustSet]] = {(LIGHTNING, frozenset())}
    may: Set[Tuple[str, object, str]] = set()
    for m in msets:
        src = names[m]
        for (lab, t) in m:
            ts = a.tran_of(t)
            if ts:
                n = frozenset((lab, names[mp]) for mp in ts)
            else:
                n = frozenset({(lab, LIGHTNING)})
            must.add((src, n))
            for lab2, tgt in n:
                may.add((src, lab2, tgt))
    return Dmts(frozenset(states), frozenset(initial), frozenset(may), frozenset(must))


def naa_to_hybrid(a: Naa, theory: LabelTheory) -> HybridExpression:
    if theory.kind != "discrete":
        raise ValueError("hybrid formulas require a discrete theory")
    labels = list(theory.actions)
    formulas = []
    for s in sorted(a.states):
        disjuncts: List[HmlFormula] = []
        for m in sorted(a.tran_of(s), key=_mkey):
            conj: List[HmlFormula] = []
            for (lab, t) in sorted(m, key=lambda p: (_lkey(p[0]), p[1])):
                conj.append(HDia(lab, HVar(t)))
            for lab in labels:
                for t in sorted(a.states):
                    if (lab, t) not in m:
                        conj.append(HNeg(HDia(lab, HVar(t))))
            disjuncts.append(_conj(conj))
        formulas.append((s, _disj(disjuncts)))
    return HybridExpression(a.states, a.initial, tuple(formulas))


def hybrid_to_naa(e: HybridExpression, theory: LabelTheory) -> Naa:
    if theory.kind != "discrete":
        raise ValueError("hybrid formulas require a discrete theory")
    labels = list(theory.actions)
    tran = {x: list(e.semantics(x, labels)) for x in e.vars}
    return Naa.make(e.vars, e.initial, tran)


def dmts_to_hybrid(d: Dmts, theory: LabelTheory) -> HybridExpression:
    """Direct quadratic translation; equals naa_to_hybrid(dmts_to_naa(.))
    in semantics but avoids the exponential detour."""
    if theory.kind != "discrete":
        raise ValueError("hybrid formulas require a discrete theory")
    formulas = []
    for s in sorted(d.states):
        conj: List[HmlFormula] = []
        for n in d.musts_from(s):
            conj.append(_disj([HDia(a, HVar(t)) for (a, t) in sorted(n, key=lambda p: (_lkey(p[0]), p[1]))]))
        mays = set(d.mays_from(s))
        for a in theory.actions:
            for t in sorted(d.states):
                if (a, t) not in mays:
                    conj.append(HNeg(HDia(a, HVar(t))))
        formulas.append((s, _conj(conj)))
    return HybridExpression(d.states, d.initial, tuple(formulas))


def _conj(parts: List[HmlFormula]) -> HmlFormula:
    if not parts:
        return HTrue()
    out = parts[0]
    for p in parts[1:]:
        out = HAnd(out, p)
    return out


def _disj(parts: List[HmlFormula]) -> HmlFormula:
    if not parts:
        return HFalse()
    out = parts[0]
    for p in parts[1:]:
        out = HOr(out, p)
    return out


_FORMALISMS = ("dmts", "naa", "nu", "hybrid")


def _formalism_of(spec) -> str:
    if isinstance(spec, Dmts):
        return "dmts"
    if isinstance(spec, Naa):
        return "naa"
    if isinstance(spec, NuExpression):
        return "nu"
    if isinstance(spec, HybridExpression):
        return "hybrid"
    raise TypeError(type(spec).__name__)


def translate(spec, target: str, theory: Optional[LabelTheory] = None):
    """Translate between the four structurally equivalent formalisms."""
    if target not in _FORMALISMS:
        raise ValueError(f"target must be one of {_FORMALISMS}")
    src = _formalism_of(spec)
    th = theory if theory is not None else _theory_or_discrete(
        spec if isinstance(spec, (Dmts, Naa)) else Dmts(frozenset(), frozenset(), frozenset(), frozenset()),
        None,
    )
    if src == target:
        return spec
    if src == "nu":
        return translate(nu_to_dmts(spec), target, th)
    if src == "hybrid":
        return translate(hybrid_to_naa(spec, th), target, th)
    if src == "dmts":
        if target == "nu":
            return dmts_to_nu(spec)
        if target == "naa":
            return dmts_to_naa(spec)
        return dmts_to_hybrid(spec, th)
    # src == naa
    if target == "dmts":
        return naa_to_dmts(spec)
    if target == "hybrid":
        return naa_to_hybrid(spec, th)
    return dmts_to_nu(naa_to_dmts(spec))


# ---------------------------------------------------------------------------
# nu-calculus normalization
# ---------------------------------------------------------------------------


def parse_hml(text: str):
    """Tiny HML(X) parser: tt, ff, X, <a> phi, [a] phi, &, |, parentheses.

    Interval labels are written <a:[0,3]> or [a:[0,3]].
    """
    toks = _hml_tokens(text)
    pos = [0]

    def peek():
        return toks[pos[0]] if pos[0] < len(toks) else None

    def eat(kind=None):
        tok = peek()
        if tok is None or (kind is not None and tok[0] != kind):
            raise ParseError(f"unexpected token {tok!r} in formula", text)
        pos[0] += 1
        return tok

    def atom():
        tok = peek()
        if tok is None:
            raise ParseError("unexpected end of formula", text)
        kind, val = tok
        if kind == "lpar":
            eat()
            f = disj()
            eat("rpar")
            return f
        if kind == "dia":
            eat()
            return HDia(val, atom())
        if kind == "box":
            eat()
            return HBox(val, atom())
        if kind == "not":
            eat()
            return HNeg(atom())
        if kind == "name":
            eat()
            if val == "tt":
                return HTrue()
            if val == "ff":
                return HFalse()
            return HVar(val)
        raise ParseError(f"unexpected token {tok!r}", text)

    def conj():
        f = atom()
        while peek() and peek()[0] == "and":
            eat()
            f = HAnd(f, atom())
        return f

    def disj():
        f = conj()
        while peek() and peek()[0] == "or":
            eat()
            f = HOr(f, conj())
        return f

    out = disj()
    if pos[0] != len(toks):
        raise ParseError("trailing tokens in formula", text)
    return out


def _hml_tokens(text: str):
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
        elif c == "<":
            j = text.index(">", i)
            toks.append(("dia", _parse_label_text(text[i + 1 : j]))); i = j + 1
        elif c == "[":
            j = text.index("]", i)
            body = text[i + 1 : j]
            if ":" in body:  # interval labels carry their own brackets
                j = text.index("]", text.index("]", i) + 1)
                body = text[i + 1 : j]
            toks.append(("box", _parse_label_text(body))); i = j + 1
        else:
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] in "_.'"):
                j += 1
            if j == i:
                raise ParseError(f"bad character {c!r} in formula", text)
            toks.append(("name", text[i:j])); i = j
    return toks


def _parse_label_text(body: str):
    body = body.strip()
    if ":" not in body:
        return body
    act, iv = body.split(":", 1)
    iv = iv.strip()
    if not (iv.startswith("[") and iv.endswith("]")):
        raise ParseError(f"bad interval in label {body!r}")
    lo, hi = iv[1:-1].split(",")
    lo, hi = lo.strip(), hi.strip()
    flo = None if lo in ("-inf", "") else parse_rational(lo)
    fhi = None if hi in ("inf", "") else parse_rational(hi)
    return (act.strip(), (flo, fhi))


def normalize_nu(
    declarations: Dict[str, HmlFormula],
    initial: Iterable[str],
    theory: Optional[LabelTheory] = None,
    actions: Optional[Iterable[object]] = None,
):
    """Bring a raw nu-calculus declaration into strong normal form.

    Returns (NuExpression, warnings).  The declaration may use the full
    HML(X) grammar; boxes and diamonds over the same labels are merged,
    disjunctions split variables, and fresh variables name the modal
    subformulas.  The semantic side condition (diamond targets refine
    some box disjunct) is checked with Boolean refinement and reported
    as a warning when it fails; the offending diamond target is then
    added to the box disjunction, which keeps the result a well-formed
    DMTS shape without changing its implementation semantics whenever
    the side condition of the normal-form lemma holds.
    """
    warnings: List[str] = []
    if actions is None:
        acts: Set[object] = set()
        for phi in declarations.values():
            acts |= _labels_of(phi)
        actions = sorted(acts, key=_lkey)
    actions = list(actions)

    fresh_decls: Dict[str, HmlFormula] = dict(declarations)
    dnf_cache: Dict[str, List[Dict]] = {}
    var_names: Dict[str, List[str]] = {}
    counter = [0]

    def fresh_name(base: str) -> str:
        counter[0] += 1
        return f"{base}~{counter[0]}"

    def declared_disjunct_vars(x: str, stack: Tuple[str, ...]) -> List[str]:
        if x in var_names:
            return var_names[x]
        if x in stack:
            raise ValueError(f"unguarded recursion through {x}")
        disjs = _dnf(fresh_decls[x], stack + (x,))
        names = []
        for i, _d in enumerate(disjs):
            names.append(x if len(disjs) == 1 else f"{x}#{i+1}")
        var_names[x] = names
        dnf_cache[x] = disjs
        return names

    def _dnf(phi: HmlFormula, stack: Tuple[str, ...]) -> List[Dict]:
        """List of conjuncts: {dias: [(label, phi)], boxes: {label: [phi]}, ff}."""
        if isinstance(phi, HTrue):
            return [{"dias": [], "boxes": {}}]
        if isinstance(phi, HFalse):
            return []
        if isinstance(phi, HVar):
            if phi.name not in fresh_decls:
                raise ValueError(f"undeclared variable {phi.name}")
            if phi.name in stack:
                raise ValueError(f"unguarded recursion through {phi.name}")
            return _dnf(fresh_decls[phi.name], stack + (phi.name,))
        if isinstance(phi, HOr):
            return _dnf(phi.left, stack) + _dnf(phi.right, stack)
        if isinstance(phi, HAnd):
            out = []
            for c1 in _dnf(phi.left, stack):
                for c2 in _dnf(phi.right, stack):
                    boxes: Dict[object, List] = {
                        k: list(v) for k, v in c1["boxes"].items()
                    }
                    for k, v in c2["boxes"].items():
                        boxes.setdefault(k, []).extend(v)
                    out.append(
                        {"dias": c1["dias"] + c2["dias"], "boxes": boxes}
                    )
            return out
        if isinstance(phi, HDia):
            return [{"dias": [(phi.label, phi.target)], "boxes": {}}]
        if isinstance(phi, HBox):
            return [{"dias": [], "boxes": {phi.label: [phi.body]}}]
        if isinstance(phi, HNeg):
            raise ValueError("negation is not part of the nu-calculus grammar")
        raise TypeError(type(phi).__name__)

    def subformula_vars(phi: HmlFormula) -> List[str]:
        """Variables denoting the disjuncts of phi, declaring fresh ones."""
        if isinstance(phi, HVar):
            return declared_disjunct_vars(phi.name, ())
        if isinstance(phi, HTrue):
            return [TT_VAR]
        if isinstance(phi, HFalse):
            return []
        name = fresh_name("v")
        fresh_decls[name] = phi
        return declared_disjunct_vars(name, ())

    TT_VAR = "tt~"
    fresh_decls[TT_VAR] = HTrue()
    var_names[TT_VAR] = [TT_VAR]
    dnf_cache[TT_VAR] = [{"dias": [], "boxes": {}}]

    for x in list(declarations):
        declared_disjunct_vars(x, ())

    diamond: Set[Tuple[str, MustSet]] = set()
    box: Set[Tuple[str, object, str]] = set()
    extensions: List[Tuple[str, object, str, Tuple[str, ...]]] = []
    done: Set[str] = set()
    while True:
        todo = [x for x in var_names if x not in done]
        if not todo:
            break
        for x in todo:
            done.add(x)
            for name, d in zip(var_names[x], dnf_cache[x]):
                box_map: Dict[object, List[str]] = {}
                for lab, bodies in d["boxes"].items():
                    body = bodies[0]
                    for b in bodies[1:]:
                        body = HAnd(body, b)
                    box_map[lab] = list(subformula_vars(body))
                for lab in actions:
                    box_map.setdefault(lab, [TT_VAR])
                for lab, tgt_phi in d["dias"]:
                    tvars = subformula_vars(tgt_phi)
                    if not tvars:  # <a>ff is ff: the disjunct is inconsistent
                        diamond.add((name, frozenset()))
                        continue
                    diamond.add((name, frozenset((lab, v) for v in tvars)))
                    for v in tvars:
                        if v not in box_map[lab]:
                            extensions.append((name, lab, v, tuple(box_map[lab])))
                            box_map[lab].append(v)
                for lab, tgts in box_map.items():
                    for v in tgts:
                        box.add((name, lab, v))

    all_vars = {v for vs in var_names.values() for v in vs}
    init = {v for x in initial for v in var_names.get(x, [])}
    diamond = {(s, n) for (s, n) in diamond if s in all_vars}
    box = {
        (s, a, t) for (s, a, t) in box if s in all_vars and t in all_vars
    }
    nu = NuExpression(
        frozenset(all_vars), frozenset(init), frozenset(diamond), frozenset(box)
    )
    # Side condition of the normal form: each diamond target must (up to
    # thorough refinement, here approximated modally) refine some box
    # disjunct it was merged into.
    d = nu.to_dmts()
    th = theory if theory is not None else _theory_or_discrete(d, None)
    for (name, lab, v, pre) in extensions:
        ok = False
        for y in pre:
            sub_v = Dmts(d.states, frozenset({v}), d.may, d.must)
            sub_y = Dmts(d.states, frozenset({y}), d.may, d.must)
            if refine_check(sub_v, sub_y, th)[0]:
                ok = True
                break
        if not ok:
            warnings.append(
                f"normal-form side condition unverified: diamond target {v} "
                f"under {lab} at {name} does not modally refine any box disjunct"
            )
    return nu, warnings


def _labels_of(phi: HmlFormula) -> Set[object]:
    if isinstance(phi, (HTrue, HFalse, HVar)):
        return set()
    if isinstance(phi, HDia):
        return {phi.label} | _labels_of(phi.target)
    if isinstance(phi, HBox):
        return {phi.label} | _labels_of(phi.body)
    if isinstance(phi, HNeg):
        return _labels_of(phi.body)
    return _labels_of(phi.left) | _labels_of(phi.right)


# ---------------------------------------------------------------------------
# the specification algebra
# ---------------------------------------------------------------------------


def _rename_dmts(d: Dmts, pre: str) -> Dmts:
    return Dmts(
        frozenset(pre + s for s in d.states),
        frozenset(pre + s for s in d.initial),
        frozenset((pre + s, a, pre + t) for s, a, t in d.may),
        frozenset(
            (pre + s, frozenset((a, pre + t) for a, t in n)) for s, n in d.must
        ),
    )


def _rename_naa(a: Naa, pre: str) -> Naa:
    return Naa.make(
        {pre + s for s in a.states},
        {pre + s for s in a.initial},
        {
            pre + s: [{(lab, pre + t) for lab, t in m} for m in ms]
            for s, ms in a.tran
        },
    )


def disjoin(s1, s2):
    """Disjunction: disjoint union with both initial-state sets."""
    f1, f2 = _formalism_of(s1), _formalism_of(s2)
    if f1 != f2:
        raise TypeError("disjoin needs two specifications of the same formalism")
    if f1 == "nu":
        return NuExpression.from_dmts(disjoin(s1.to_dmts(), s2.to_dmts()))
    if f1 == "hybrid":
        raise TypeError("disjoin hybrid expressions via their NAA translations")
    if f1 == "naa":
        a, b = _rename_naa(s1, "l."), _rename_naa(s2, "r.")
        return Naa.make(
            a.states | b.states,
            a.initial | b.initial,
            {**{s: [set(m) for m in ms] for s, ms in a.tran},
             **{s: [set(m) for m in ms] for s, ms in b.tran}},
        )
    a, b = _rename_dmts(s1, "l."), _rename_dmts(s2, "r.")
    return Dmts(
        a.states | b.states,
        a.initial | b.initial,
        a.may | b.may,
        a.must | b.must,
    )


def _pair(s1: str, s2: str) -> str:
    return f"{s1}*{s2}"


def conjoin(s1, s2, theory: Optional[LabelTheory] = None):
    """Conjunction: label-meet product with the three must/may rules,
    followed by pruning.  A fully pruned (empty-initial) result is
    returned, not raised."""
    f1, f2 = _formalism_of(s1), _formalism_of(s2)
    if f1 != f2:
        raise TypeError("conjoin needs two specifications of the same formalism")
    if f1 == "nu":
        return NuExpression.from_dmts(conjoin(s1.to_dmts(), s2.to_dmts(), theory))
    if f1 == "hybrid":
        th = theory if theory is not None else discrete_theory({"a"})
        return naa_to_hybrid(
            conjoin(hybrid_to_naa(s1, th), hybrid_to_naa(s2, th), th), th
        )
    if f1 == "naa":
        return prune(_conjoin_naa(s1, s2, _theory_or_discrete(s1, theory)))
    th = _theory_or_discrete(s1, theory)
    d1, d2 = s1, s2
    states = {_pair(x, y) for x in d1.states for y in d2.states}
    initial = {_pair(x, y) for x in d1.initial for y in d2.initial}
    may: Set[Tuple[str, object, str]] = set()
    must: Set[Tuple[str, MustSet]] = set()
    for x in d1.states:
        for y in d2.states:
            s = _pair(x, y)
            for a1, t1 in d1.mays_from(x):
                for a2, t2 in d2.mays_from(y):
                    c = th.conj(a1, a2)
                    if c is not None:
                        may.add((s, c, _pair(t1, t2)))
            for n1 in d1.musts_from(x):
                branches = set()
                for (a1, t1) in n1:
                    for a2, t2 in d2.mays_from(y):
                        c = th.conj(a1, a2)
                        if c is not None:
                            branches.add((c, _pair(t1, t2)))
                must.add((s, frozenset(branches)))
            for n2 in d2.musts_from(y):
                branches = set()
                for (a2, t2) in n2:
                    for a1, t1 in d1.mays_from(x):
                        c = th.conj(a1, a2)
                        if c is not None:
                            branches.add((c, _pair(t1, t2)))
                must.add((s, frozenset(branches)))
    out = Dmts(frozenset(states), frozenset(initial), frozenset(may), frozenset(must))
    return prune(out)


def _conjoin_naa(a1: Naa, a2: Naa, th: LabelTheory) -> Naa:
    """Product transition constraints through the projections."""
    states = {_pair(x, y) for x in a1.states for y in a2.states}
    initial = {_pair(x, y) for x in a1.initial for y in a2.initial}
    tran: Dict[str, List] = {}
    for x in sorted(a1.states):
        for y in sorted(a2.states):
            s = _pair(x, y)
            out = []
            # enumerate joint sets M over pairs of branches with defined meet
            atoms = []
            for (lab1, t1) in sorted(
                {p for m in a1.tran_of(x) for p in m}, key=lambda p: (_lkey(p[0]), p[1])
            ):
                for (lab2, t2) in sorted(
                    {p for m in a2.tran_of(y) for p in m},
                    key=lambda p: (_lkey(p[0]), p[1]),
                ):
                    c = th.conj(lab1, lab2)
                    if c is not None:
                        atoms.append(((lab1, t1), (lab2, t2), c))
            if len(atoms) > 16:
                raise ValueError("NAA conjunction atom budget exceeded")
            for bits in itertools.product((False, True), repeat=len(atoms)):
                chosen = [a for a, b in zip(atoms, bits) if b]
                m1 = frozenset(a[0] for a in chosen)
                m2 = frozenset(a[1] for a in chosen)
                if m1 in a1.tran_of(x) and m2 in a2.tran_of(y):
                    m = frozenset((c, _pair(t1, t2)) for ((l1, t1), (l2, t2), c) in chosen)
                    out.append(m)
            tran[s] = out
    return Naa.make(states, initial, tran)


def compose(s1, s2, theory: Optional[LabelTheory] = None) -> Naa:
    """Structural composition; inputs are translated to NAA first."""
    th = theory
    a1 = s1 if isinstance(s1, Naa) else translate(s1, "naa", th)
    a2 = s2 if isinstance(s2, Naa) else translate(s2, "naa", th)
    th = _theory_or_discrete(a1, th)
    states = {_pair(x, y) for x in a1.states for y in a2.states}
    initial = {_pair(x, y) for x in a1.initial for y in a2.initial}
    tran: Dict[str, List] = {}
    for x in sorted(a1.states):
        for y in sorted(a2.states):
            out = []
            for m1 in a1.tran_of(x):
                for m2 in a2.tran_of(y):
                    m = set()
                    for (lab1, t1) in m1:
                        for (lab2, t2) in m2:
                            c = th.sync(lab1, lab2)
                            if c is not None:
                                m.add((c, _pair(t1, t2)))
                    out.append(frozenset(m))
            tran[_pair(x, y)] = out
    return Naa.make(states, initial, tran)


def _split_disjoint(a: Naa) -> Naa:
    """Make every state's transition constraints pairwise disjoint by
    duplicating target states per constraint index."""
    need = any(
        m1 & m2
        for _s, ms in a.tran
        for m1 in ms
        for m2 in ms
        if m1 is not m2 and m1 != m2
    )
    if not need:
        return a
    idx: Dict[str, List[MustSet]] = {
        s: sorted(ms, key=_mkey) for s, ms in a.tran
    }
    max_copies = max((len(ms) for ms in idx.values()), default=1)
    states = {f"{s}^{j}" for s in a.states for j in range(max_copies)}
    tran: Dict[str, List] = {}
    for s in a.states:
        ms = idx[s]
        body = [
            frozenset((lab, f"{t}^{j}") for (lab, t) in m)
            for j, m in enumerate(ms)
        ]
        for j in range(max_copies):
            tran[f"{s}^{j}"] = list(body)
    initial = {f"{s}^0" for s in a.initial}
    return Naa.make(states, initial, tran)


def _set_name(pairs: FrozenSet[Tuple[str, str]]) -> str:
    if not pairs:
        return "{}"
    return "{" + ",".join(f"{n}/{d}" for n, d in sorted(pairs)) + "}"


def quotient(
    s3, s1, theory: Optional[LabelTheory] = None, budget: Optional[int] = None
) -> Naa:
    """The most permissive X with s1 || X refining s3 (powerset states).

    The denominator's transition constraints are made pairwise disjoint
    by state splitting first.
    """
    budget = budget or state_budget()
    num = s3 if isinstance(s3, Naa) else translate(s3, "naa", theory)
    den = s1 if isinstance(s1, Naa) else translate(s1, "naa", theory)
    th = _theory_or_discrete(num, theory)
    den = _split_disjoint(den)

    if th.kind == "discrete":
        cand_labels = sorted(set(th.actions), key=_lkey)
    else:
        cands = set()
        num_labels = {a for _s, ms in num.tran for m in ms for a, _t in m}
        den_labels = {a for _s, ms in den.tran for m in ms for a, _t in m}
        for ell in num_labels:
            for k in den_labels:
                q = th.quot(ell, k)
                if q is not None:
                    cands.add(q)
        for act in {a[0] if isinstance(a, tuple) else a for a in num_labels}:
            cands.add((act, (None, None)))
        cand_labels = sorted(cands, key=_lkey)

    den_pairs: Dict[str, List[Tuple[object, str]]] = {
        s: sorted({p for m in ms for p in m}, key=lambda p: (_lkey(p[0]), p[1]))
        for s, ms in den.tran
    }
    num_pairs: Dict[str, List[Tuple[object, str]]] = {
        s: sorted({p for m in ms for p in m}, key=lambda p: (_lkey(p[0]), p[1]))
        for s, ms in num.tran
    }

    def permissible(pairs, a2) -> bool:
        for (n, d) in pairs:
            for (a1, _t1) in den_pairs[d]:
                c = th.sync(a1, a2)
                if c is None:
                    continue
                if not any(th.refines(c, a3) for (a3, _t3) in num_pairs[n]):
                    return False
        return True

    def post_for(pairs, a2):
        """Assignments of a successor pair to every reachable denominator
        move compatible with a2; yields (label-used, mapping)."""
        domain = []
        options = []
        for (n, d) in sorted(pairs):
            for (a1, t1) in den_pairs[d]:
                c = th.sync(a1, a2)
                if c is None:
                    continue
                opts = [
                    (a3, t3)
                    for (a3, t3) in num_pairs[n]
                    if th.refines(c, a3)
                ]
                if not opts:
                    return None
                domain.append((n, d, a1, t1))
                options.append(opts)
        assignments = []
        for combo in itertools.product(*options) if domain else [()]:
            mapping = {}
            for (n, d, a1, t1), (a3, t3) in zip(domain, combo):
                mapping[(n, d, a1, t1)] = t3
            assignments.append(mapping)
        return domain, assignments

    tran: Dict[FrozenSet, List] = {}
    init_states = []
    den_inits = sorted(den.initial)
    for combo in itertools.product(sorted(num.initial), repeat=len(den_inits)):
        init_states.append(frozenset(zip(combo, den_inits)))
    frontier = list(init_states)
    seen: Set[FrozenSet] = set()
    while frontier:
        s = frontier.pop()
        if s in seen:
            continue
        seen.add(s)
        if len(seen) > budget:
            raise BudgetError("quotient state budget exceeded")
        if not s:
            tran[s] = [
                frozenset(ms)
                for r in range(len(cand_labels) + 1)
                for ms in itertools.combinations(
                    [(a, frozenset()) for a in cand_labels], r
                )
            ]
            continue
        # post elements keep the full assignment (indexed by the
        # denominator move they answer); merging happens only afterwards
        post: List[Tuple[object, FrozenSet]] = []
        for a2 in cand_labels:
            if not permissible(s, a2):
                continue
            pf = post_for(s, a2)
            if pf is None:
                continue
            domain, assignments = pf
            for mapping in assignments:
                assign = frozenset(mapping.items())
                post.append((a2, assign))
        post = sorted(set(post), key=lambda p: (_lkey(p[0]), sorted(map(repr, p[1]))))
        if len(post) > 14:
            raise BudgetError("quotient post-set budget exceeded")
        out = []
        for bits in itertools.product((False, True), repeat=len(post)):
            n_sel = [p for p, b in zip(post, bits) if b]
            if _quotient_admissible(n_sel, s, den, num, th):
                out.append(n_sel)
        body = []
        succs = set()
        for n_sel in out:
            m = set()
            for (a2, assign) in n_sel:
                tgt = frozenset((t3, key[3]) for key, t3 in assign)
                m.add((a2, tgt))
                succs.add(tgt)
            body.append(m)
        tran[s] = body
        for tgt in succs:
            if tgt not in seen:
                frontier.append(tgt)
    naming = {s: _set_name(s) for s in tran}
    return Naa.make(
        {naming[s] for s in tran},
        {naming[s] for s in init_states},
        {
            naming[s]: [
                {(a, _set_name(t)) for (a, t) in m} for m in ms
            ]
            for s, ms in tran.items()
        },
    )


class BudgetError(RuntimeError):
    pass


def _quotient_admissible(n_sel, s, den: Naa, num: Naa, th: LabelTheory) -> bool:
    """N over indexed post elements is admissible when, for every pair
    n/d in the state and every denominator constraint M1, the projected
    set matches some numerator constraint elementwise."""
    for (n, d) in sorted(s):
        for m1 in den.tran_of(d):
            projected = set()
            for (a2, assign) in n_sel:
                for key, t3 in assign:
                    kn, kd, a1, t1 = key
                    if kn != n or kd != d or (a1, t1) not in m1:
                        continue
                    c = th.sync(a1, a2)
                    if c is None:
                        continue
                    projected.add((c, t3))
            ok = False
            for m3 in num.tran_of(n):
                fwd = all(
                    any(th.refines(b, a3) and t3 == u3 for (a3, u3) in m3)
                    for (b, t3) in projected
                )
                rev = all(
                    any(th.refines(b, a3) and t3 == u3 for (b, t3) in projected)
                    for (a3, u3) in m3
                )
                if fwd and rev:
                    ok = True
                    break
            if not ok:
                return False
    return True


# ---------------------------------------------------------------------------
# pruning, MTS quotient, bounded implementations
# ---------------------------------------------------------------------------


def prune(spec):
    """Iteratively remove inconsistent states.

    DMTS: a state with an empty disjunctive must is inconsistent; its
    incoming may edges and must branches are stripped, which may cascade.
    NAA: a state with an empty set of transition constraints.
    """
    if isinstance(spec, NuExpression):
        return NuExpression.from_dmts(prune(spec.to_dmts()))
    if isinstance(spec, Naa):
        alive = set(spec.states)
        tran = {s: {frozenset(m) for m in ms} for s, ms in spec.tran}
        changed = True
        while changed:
            changed = False
            for s in sorted(alive):
                if not tran[s]:
                    alive.discard(s)
                    changed = True
                    for q in alive:
                        tran[q] = {
                            m for m in tran[q] if all(t in alive for _a, t in m)
                        }
        return Naa.make(
            alive, spec.initial & alive, {s: list(tran[s]) for s in alive}
        )
    d: Dmts = spec
    alive = set(d.states)
    must = {(s, n) for s, n in d.must}
    may = set(d.may)
    while True:
        bad = {s for s, n in must if not n and s in alive}
        if not bad:
            break
        alive -= bad
        may = {(s, a, t) for (s, a, t) in may if s in alive and t in alive}
        new_must = set()
        for s, n in must:
            if s not in alive:
                continue
            n2 = frozenset((a, t) for (a, t) in n if t in alive)
            new_must.add((s, n2))
        must = new_must
    return Dmts(
        frozenset(alive),
        d.initial & frozenset(alive),
        frozenset(may),
        frozenset(must),
    )


def quotient_mts(
    m3: Dmts, m1: Dmts, theory: Optional[LabelTheory] = None,
    budget: Optional[int] = None,
) -> Dmts:
    """Quotient of MTS-shaped specifications; the result is a DMTS.

    States are sets of numerator/denominator pairs; the empty set is the
    universal state.  Pruning removes states whose must obligations
    became unsatisfiable.
    """
    budget = budget or state_budget()
    if not (m3.is_mts() and m1.is_mts()):
        raise ValueError("quotient_mts needs MTS-shaped operands")
    th = _theory_or_discrete(m3, theory)

    if th.kind == "discrete":
        cands = sorted(
            {a for _s, a, _t in m3.may} | {a for _s, a, _t in m1.may}, key=_lkey
        )
    else:
        cands = set()
        for _s, ell, _t in m3.may:
            for _q, k, _u in m1.may:
                q = th.quot(ell, k)
                if q is not None:
                    cands.add(q)
        for _s, ell, _t in m3.may:
            cands.add((ell[0], (None, None)))
        cands = sorted(cands, key=_lkey)

    def num_mays(n):
        return m3.mays_from(n)

    def den_mays(d):
        return m1.mays_from(d)

    def den_musts(d):
        return [next(iter(n)) for n in m1.musts_from(d) if n]

    def num_musts(n):
        return [next(iter(nn)) for nn in m3.musts_from(n) if nn]

    root = frozenset({(next(iter(m3.initial)), next(iter(m1.initial)))})
    seen: Set[FrozenSet] = set()
    frontier = [root]
    may: Set[Tuple[str, object, str]] = set()
    must: Set[Tuple[str, MustSet]] = set()
    states: Set[str] = set()
    while frontier:
        s = frontier.pop()
        if s in seen:
            continue
        seen.add(s)
        if len(seen) > budget:
            raise BudgetError("quotient state budget exceeded")
        name = _set_name(s)
        states.add(name)
        if not s:
            for a in cands:
                may.add((name, a, name))
            continue
        for a in cands:
            # permissible: no denominator move can force an uncovered sync
            ok = True
            for (n, d) in s:
                for (k, _td) in den_mays(d):
                    c = th.sync(k, a)
                    if c is None:
                        continue
                    if not any(th.refines(c, ell) for (ell, _tn) in num_mays(n)):
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            domain = []
            options = []
            for (n, d) in sorted(s):
                for (k, td) in den_mays(d):
                    c = th.sync(k, a)
                    if c is None:
                        continue
                    opts = [
                        (ell, tn)
                        for (ell, tn) in num_mays(n)
                        if th.refines(c, ell)
                    ]
                    domain.append((n, d, k, td))
                    options.append(opts)
            posts = []
            for combo in itertools.product(*options) if domain else [()]:
                tgt = frozenset(
                    (tn, key[3]) for key, (_ell, tn) in zip(domain, combo)
                )
                posts.append((tgt, dict(zip(domain, combo))))
            for tgt, _assign in posts:
                may.add((name, a, _set_name(tgt)))
                if tgt not in seen:
                    frontier.append(tgt)
            # numerator musts induce disjunctive musts over the posts
            for (n, d) in sorted(s):
                for (ellm, tnm) in num_musts(n):
                    branch = set()
                    for tgt, assign in posts:
                        hit = False
                        for key, (_ell, tn) in assign.items():
                            kn, kd, kk, ktd = key
                            if kn != n or kd != d or tn != tnm:
                                continue
                            c = th.sync(kk, a)
                            if c is None or not th.refines(c, ellm):
                                continue
                            if any(
                                kk2 == kk and td2 == ktd
                                for (kk2, td2) in den_musts(d)
                            ):
                                hit = True
                                break
                        if hit:
                            branch.add((a, _set_name(tgt)))
                    must.add((name, frozenset(branch)))
    out = Dmts(
        frozenset(states),
        frozenset({_set_name(root)}),
        frozenset(may),
        frozenset(must),
    )
    return prune(out)


def implementations_up_to(
    spec,
    depth: int,
    theory: Optional[LabelTheory] = None,
    budget: int = 40_000,
):
    """All depth-bounded unfolded implementations, as canonical trees.

    A tree is a frozenset of (implementation label, subtree); the empty
    frozenset is the depth cut.  Comparing such sets realizes bounded
    thorough refinement up to isomorphism.
    """
    a = spec if isinstance(spec, Naa) else translate(spec, "naa", theory)
    th = _theory_or_discrete(a, theory)
    memo: Dict[Tuple[str, int], FrozenSet] = {}
    count = [0]

    def trees(s: str, d: int) -> FrozenSet:
        key = (s, d)
        if key in memo:
            return memo[key]
        if d == 0:
            memo[key] = frozenset({frozenset()})
            return memo[key]
        out: Set[FrozenSet] = set()
        for m in a.tran_of(s):
            per_branch = []
            feasible = True
            for (lab, t) in sorted(m, key=lambda p: (_lkey(p[0]), p[1])):
                subs = trees(t, d - 1)
                opts = [
                    (il, tr)
                    for il in th.implementations_of(lab)
                    for tr in subs
                ]
                if not opts:
                    feasible = False
                    break
                per_branch.append(opts)
            if not feasible:
                continue
            choice_sets = []
            for opts in per_branch:
                subsets = []
                for r in range(1, min(len(opts), 2) + 1):
                    subsets.extend(itertools.combinations(opts, r))
                choice_sets.append(subsets)
            for combo in itertools.product(*choice_sets) if per_branch else [()]:
                tr = frozenset(x for chosen in combo for x in chosen)
                out.add(tr)
                count[0] += 1
                if count[0] > budget:
                    raise BudgetError("implementation enumeration budget exceeded")
        memo[key] = frozenset(out)
        return memo[key]

    result: Set[FrozenSet] = set()
    for s0 in a.initial:
        result |= trees(s0, depth)
    return frozenset(result)


def tree_to_dmts(tree: FrozenSet, prefix: str = "i") -> Dmts:
    """Canonical DMTS implementation for an enumeration tree."""
    states: Dict[FrozenSet, str] = {}
    may: Set[Tuple[str, object, str]] = set()
    must: Set[Tuple[str, MustSet]] = set()

    def walk(t: FrozenSet) -> str:
        if t in states:
            return states[t]
        name = f"{prefix}{len(states)}"
        states[t] = name
        for (lab, sub) in sorted(t, key=lambda p: (_lkey(p[0]), repr(p[1]))):
            child = walk(sub)
            may.add((name, lab, child))
            must.add((name, frozenset({(lab, child)})))
        return name

    root = walk(tree)
    return Dmts(
        frozenset(states.values()), frozenset({root}), frozenset(may), frozenset(must)
    )


# ---------------------------------------------------------------------------
# documents
# ---------------------------------------------------------------------------


def _fmt_label(label) -> str:
    if isinstance(label, tuple):
        act, (lo, hi) = label
        ls = "-inf" if lo is None else str(lo)
        hs = "inf" if hi is None else str(hi)
        return f"{act}[{ls},{hs}]"
    return str(label)


def _label_to_json(label):
    if isinstance(label, tuple):
        act, (lo, hi) = label
        return {
            "action": act,
            "interval": [
                None if lo is None else str(lo),
                None if hi is None else str(hi),
            ],
        }
    return {"action": label}


def _label_from_json(doc) -> object:
    act = doc.get("action")
    if act is None:
        raise ParseError("label needs an 'action'")
    if "interval" in doc:
        lo, hi = doc["interval"]
        flo = None if lo in (None, "-inf") else _rat(lo)
        fhi = None if hi in (None, "inf") else _rat(hi)
        if flo is not None and fhi is not None and flo > fhi:
            raise ParseError(f"empty interval on label {act}")
        return (act, (flo, fhi))
    if "weight" in doc:
        w = _rat(doc["weight"])
        return (act, (w, w))
    return act


def _rat(raw) -> Fraction:
    if isinstance(raw, int):
        return Fraction(raw)
    if not isinstance(raw, str) or "e" in raw.lower():
        raise ParseError(f"numbers must be plain decimal strings: {raw!r}")
    return parse_rational(raw)


def parse_spec(text: str):
    """Parse a specification document of type dmts, naa, nu or hybrid."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"syntax error: {exc.msg}", f"line {exc.lineno}") from None
    kind = doc.get("type")
    states = doc.get("states", doc.get("vars", []))
    initial = doc.get("initial", [])
    sset = frozenset(states)
    if not frozenset(initial) <= sset:
        raise ParseError("unknown state among the initial states")
    if kind == "dmts":
        may = set()
        for i, e in enumerate(doc.get("may", [])):
            if e.get("src") not in sset or e.get("tgt") not in sset:
                raise ParseError("unknown state", f"may[{i}]")
            may.add((e["src"], _label_from_json(e.get("label", {})), e["tgt"]))
        must = set()
        for i, e in enumerate(doc.get("must", [])):
            if e.get("src") not in sset:
                raise ParseError("unknown state", f"must[{i}]")
            branches = set()
            for b in e.get("branches", []):
                if b.get("tgt") not in sset:
                    raise ParseError("unknown state", f"must[{i}]")
                branches.add((_label_from_json(b.get("label", {})), b["tgt"]))
            must.add((e["src"], frozenset(branches)))
        return Dmts(sset, frozenset(initial), frozenset(may), frozenset(must))
    if kind == "naa":
        tran = {}
        for s, ms in doc.get("tran", {}).items():
            if s not in sset:
                raise ParseError(f"unknown state {s!r} in tran")
            body = []
            for m in ms:
                body.append(
                    {
                        (_label_from_json(b.get("label", {})), b["tgt"])
                        for b in m
                    }
                )
            tran[s] = body
        return Naa.make(sset, frozenset(initial), tran)
    if kind == "nu":
        diamond = set()
        for e in doc.get("diamond", []):
            branches = frozenset(
                (_label_from_json(b.get("label", {})), b["tgt"])
                for b in e.get("branches", [])
            )
            diamond.add((e["src"], branches))
        box = {
            (e["src"], _label_from_json(e.get("label", {})), e["tgt"])
            for e in doc.get("box", [])
        }
        return NuExpression(sset, frozenset(initial), frozenset(diamond), frozenset(box))
    if kind == "hybrid":
        formulas = tuple(
            sorted((x, parse_hml(f)) for x, f in doc.get("formulas", {}).items())
        )
        return HybridExpression(sset, frozenset(initial), formulas)
    raise ParseError(f"unknown specification type {kind!r}")


def serialize_spec(spec) -> str:
    if isinstance(spec, Dmts):
        doc = {
            "type": "dmts",
            "states": sorted(spec.states),
            "initial": sorted(spec.initial),
            "may": [
                {"src": s, "label": _label_to_json(a), "tgt": t}
                for s, a, t in sorted(spec.may, key=lambda e: (e[0], _lkey(e[1]), e[2]))
            ],
            "must": [
                {
                    "src": s,
                    "branches": [
                        {"label": _label_to_json(a), "tgt": t}
                        for a, t in sorted(n, key=lambda p: (_lkey(p[0]), p[1]))
                    ],
                }
                for s, n in sorted(spec.must, key=lambda e: (e[0], _mkey(e[1])))
            ],
        }
    elif isinstance(spec, Naa):
        doc = {
            "type": "naa",
            "states": sorted(spec.states),
            "initial": sorted(spec.initial),
            "tran": {
                s: [
                    [
                        {"label": _label_to_json(a), "tgt": t}
                        for a, t in sorted(m, key=lambda p: (_lkey(p[0]), p[1]))
                    ]
                    for m in sorted(ms, key=_mkey)
                ]
                for s, ms in spec.tran
            },
        }
    elif isinstance(spec, NuExpression):
        doc = {
            "type": "nu",
            "vars": sorted(spec.vars),
            "initial": sorted(spec.initial),
            "diamond": [
                {
                    "src": s,
                    "branches": [
                        {"label": _label_to_json(a), "tgt": t}
                        for a, t in sorted(n, key=lambda p: (_lkey(p[0]), p[1]))
                    ],
                }
                for s, n in sorted(spec.diamond, key=lambda e: (e[0], _mkey(e[1])))
            ],
            "box": [
                {"src": s, "label": _label_to_json(a), "tgt": t}
                for s, a, t in sorted(spec.box, key=lambda e: (e[0], _lkey(e[1]), e[2]))
            ],
        }
    else:
        raise TypeError(f"cannot serialize {type(spec).__name__}")
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
