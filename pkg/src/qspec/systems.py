"""Finite weighted transition systems, weighted Kripke structures, traces.

Labels of a WeightedSystem are (action, weight) pairs with exact
rational weights.  The JSON document formats keep weights as decimal
strings so round-tripping is exact; canonical serialization sorts states
and transitions, which makes golden tests and diffs deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .extreal import parse_rational

__all__ = [
    "WeightedSystem",
    "KripkeStructure",
    "Trace",
    "ParseError",
    "parse_system",
    "serialize_system",
    "disjoint_union",
    "traces_up_to",
]

Label = Tuple[str, Fraction]
Transition = Tuple[str, Label, str]


class ParseError(ValueError):
    """Raised on malformed system documents; carries a location string."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{message}" + (f" (at {where})" if where else ""))
        self.where = where


@dataclass(frozen=True)
class Trace:
    symbols: Tuple[Label, ...]
    # A trace is maximal if its last state had no outgoing transitions
    # before the exploration depth was exhausted.
    maximal: bool = False

    def __len__(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True)
class WeightedSystem:
    states: FrozenSet[str]
    initial: Optional[str]
    transitions: FrozenSet[Transition]

    def __post_init__(self):
        for src, _label, tgt in self.transitions:
            if src not in self.states or tgt not in self.states:
                raise ParseError(f"unknown state in transition {src}->{tgt}")

    @staticmethod
    def make(
        states: Iterable[str],
        initial: Optional[str],
        transitions: Iterable[Tuple[str, str, Fraction, str]],
    ) -> "WeightedSystem":
        """Convenience constructor from (src, action, weight, tgt) rows."""
        trans = frozenset(
            (src, (act, Fraction(w)), tgt) for src, act, w, tgt in transitions
        )
        return WeightedSystem(frozenset(states), initial, trans)

    def moves(self, s: str) -> List[Tuple[Label, str]]:
        return sorted(
            ((lbl, tgt) for src, lbl, tgt in self.transitions if src == s),
            key=lambda m: (m[0][0], m[0][1], m[1]),
        )

    def actions(self) -> Set[str]:
        return {lbl[0] for _, lbl, _ in self.transitions}


@dataclass(frozen=True)
class KripkeStructure:
    states: FrozenSet[str]
    initial: Optional[str]
    props: FrozenSet[str]
    labeling: Tuple[Tuple[str, FrozenSet[str]], ...]
    transitions: FrozenSet[Tuple[str, Fraction, str]]

    def __post_init__(self):
        labeled = {s for s, _ in self.labeling}
        if labeled != set(self.states):
            raise ParseError("labeling must cover exactly the declared states")
        for s, ps in self.labeling:
            if not set(ps) <= set(self.props):
                raise ParseError(f"undeclared proposition at state {s}")
        for src, w, tgt in self.transitions:
            if src not in self.states or tgt not in self.states:
                raise ParseError(f"unknown state in transition {src}->{tgt}")
            if w < 0:
                raise ParseError(f"negative weight on {src}->{tgt}")

    @staticmethod
    def make(
        states: Iterable[str],
        initial: Optional[str],
        props: Iterable[str],
        labeling: Dict[str, Iterable[str]],
        transitions: Iterable[Tuple[str, Fraction, str]],
    ) -> "KripkeStructure":
        lab = tuple(
            sorted((s, frozenset(ps)) for s, ps in labeling.items())
        )
        return KripkeStructure(
            frozenset(states),
            initial,
            frozenset(props),
            lab,
            frozenset((s, Fraction(w), t) for s, w, t in transitions),
        )

    def label_of(self, s: str) -> FrozenSet[str]:
        for q, ps in self.labeling:
            if q == s:
                return ps
        raise KeyError(s)

    def moves(self, s: str) -> List[Tuple[Fraction, str]]:
        return sorted(
            ((w, tgt) for src, w, tgt in self.transitions if src == s),
        )


def _weight_from(doc: dict, where: str) -> Fraction:
    raw = doc.get("weight", "0")
    if isinstance(raw, int):
        raw = str(raw)
    if not isinstance(raw, str):
        raise ParseError("weights must be decimal strings", where)
    if "e" in raw.lower():
        raise ParseError("scientific notation rejected", where)
    try:
        w = parse_rational(raw)
    except ValueError as exc:
        raise ParseError(str(exc), where) from None
    if w < 0:
        raise ParseError("negative weight", where)
    return w


def parse_system(text: str):
    """Parse a JSON document into a WeightedSystem or KripkeStructure."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"syntax error: {exc.msg}", f"line {exc.lineno}") from None
    if not isinstance(doc, dict) or "type" not in doc:
        raise ParseError("document must be an object with a 'type' field")
    kind = doc["type"]
    states = doc.get("states", [])
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        raise ParseError("'states' must be a list of strings")
    state_set = frozenset(states)
    initial = doc.get("initial")
    if initial is not None and initial not in state_set:
        raise ParseError(f"unknown state {initial!r}", "initial")

    if kind == "wts":
        trans = set()
        for i, t in enumerate(doc.get("transitions", [])):
            where = f"transitions[{i}]"
            src, tgt = t.get("src"), t.get("tgt")
            if src not in state_set:
                raise ParseError(f"unknown state {src!r}", where)
            if tgt not in state_set:
                raise ParseError(f"unknown state {tgt!r}", where)
            lbl = t.get("label", {})
            action = lbl.get("action", "")
            trans.add((src, (action, _weight_from(lbl, where)), tgt))
        return WeightedSystem(state_set, initial, frozenset(trans))

    if kind == "wks":
        props = doc.get("props", [])
        labeling = {
            s: ps for s, ps in doc.get("labeling", {}).items()
        }
        for s in states:
            labeling.setdefault(s, [])
        trans = set()
        for i, t in enumerate(doc.get("transitions", [])):
            where = f"transitions[{i}]"
            src, tgt = t.get("src"), t.get("tgt")
            if src not in state_set:
                raise ParseError(f"unknown state {src!r}", where)
            if tgt not in state_set:
                raise ParseError(f"unknown state {tgt!r}", where)
            trans.add((src, _weight_from(t, where), tgt))
        return KripkeStructure.make(states, initial, props, labeling, trans)

    raise ParseError(f"unknown document type {kind!r}")


def _frac_str(w: Fraction) -> str:
    if w.denominator == 1:
        return str(w.numerator)
    return f"{w.numerator}/{w.denominator}"


def serialize_system(system) -> str:
    """Canonical JSON form: sorted states and transitions, exact weights."""
    if isinstance(system, WeightedSystem):
        doc = {
            "type": "wts",
            "states": sorted(system.states),
            "initial": system.initial,
            "transitions": [
                {
                    "src": src,
                    "label": {"action": lbl[0], "weight": _frac_str(lbl[1])},
                    "tgt": tgt,
                }
                for src, lbl, tgt in sorted(
                    system.transitions, key=lambda t: (t[0], t[1][0], t[1][1], t[2])
                )
            ],
        }
    elif isinstance(system, KripkeStructure):
        doc = {
            "type": "wks",
            "states": sorted(system.states),
            "initial": system.initial,
            "props": sorted(system.props),
            "labeling": {s: sorted(ps) for s, ps in sorted(system.labeling)},
            "transitions": [
                {"src": src, "weight": _frac_str(w), "tgt": tgt}
                for src, w, tgt in sorted(system.transitions)
            ],
        }
    else:
        raise TypeError(f"cannot serialize {type(system).__name__}")
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def disjoint_union(a: WeightedSystem, b: WeightedSystem) -> WeightedSystem:
    """Renamed-apart union with 'l.'/'r.' state-name prefixes."""
    states = {f"l.{s}" for s in a.states} | {f"r.{s}" for s in b.states}
    trans = {(f"l.{s}", lbl, f"l.{t}") for s, lbl, t in a.transitions}
    trans |= {(f"r.{s}", lbl, f"r.{t}") for s, lbl, t in b.transitions}
    initial = f"l.{a.initial}" if a.initial is not None else None
    return WeightedSystem(frozenset(states), initial, frozenset(trans))


def traces_up_to(a: WeightedSystem, s: str, depth: int) -> Set[Trace]:
    """All label sequences of length <= depth realizable from s.

    Dead ends before the depth bound mark their trace as maximal.
    """
    if s not in a.states:
        raise KeyError(s)
    if depth < 0:
        raise ValueError("depth must be >= 0")
    out: Set[Trace] = set()
    stack: List[Tuple[str, Tuple[Label, ...]]] = [(s, ())]
    while stack:
        state, prefix = stack.pop()
        moves = a.moves(state)
        out.add(Trace(prefix, maximal=not moves))
        if len(prefix) == depth:
            continue
        for lbl, tgt in moves:
            stack.append((tgt, prefix + (lbl,)))
    return out
