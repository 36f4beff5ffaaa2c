"""Exhaustive refinement check: every JML transition of the translated
specification must be a transition of the source event (and likewise for
initialisation).  Verdicts are computed by literal subset containment of
the two enumerated relations, so a PASS is re-checkable by brute force.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Optional

from . import ebast as eb
from . import jmlast as jml
from .ebast import Machine
from .semantics import (
    Budget, ResourceLimitError, State, Universe, eb_event_rel_variants,
    eb_init_states, fmt_value, guard_holds, jml_initially_states,
    jml_method_rel,
)
from .translate import TranslationUnit, translate_machine

PASS = "PASS"
FAIL = "FAIL"
RESOURCE_LIMIT = "RESOURCE_LIMIT"

MUTATIONS = ("drop_old", "widen_ensures_true", "shrink_assignable",
             "negate_guard_link")


class MutationError(Exception):
    pass


@dataclass(frozen=True)
class Counterexample:
    event: str
    pre: Optional[State]  # None for initialisation (state sets, not pairs)
    post: State
    jml_side: str
    eb_side: str

    def __str__(self) -> str:
        if self.pre is None:
            return (f"{self.event}: state {self.post!r}\n"
                    f"  jml: {self.jml_side}\n  eb:  {self.eb_side}")
        return (f"{self.event}: {self.pre!r} -> {self.post!r}\n"
                f"  jml: {self.jml_side}\n  eb:  {self.eb_side}")


@dataclass(frozen=True)
class Verdict:
    name: str
    status: str
    checked_pairs: int
    jml_size: Optional[int] = None
    eb_size: Optional[int] = None
    witnesses: tuple[Counterexample, ...] = ()
    bisimulation: Optional[bool] = None      # informational: eb side also contained?
    stutter_sensitive: Optional[bool] = None  # does inv on the stutter branch flip the verdict?
    detail: str = ""


@dataclass(frozen=True)
class Report:
    machine: str
    universe: Universe
    verdicts: tuple[Verdict, ...]
    elapsed: float

    @property
    def status(self) -> str:
        statuses = {v.status for v in self.verdicts}
        if RESOURCE_LIMIT in statuses:
            return RESOURCE_LIMIT
        if FAIL in statuses:
            return FAIL
        return PASS

    def to_text(self) -> str:
        lines = [f"machine {self.machine}", self._universe_line()]
        for v in self.verdicts:
            lines.append("")
            lines.append(f"{v.name}: {v.status}")
            if v.jml_size is not None:
                lines.append(f"  jml transitions: {v.jml_size}   "
                             f"eb transitions: {v.eb_size}   "
                             f"checked: {v.checked_pairs}")
            if v.bisimulation is not None:
                lines.append(f"  bisimulation (informational): "
                             f"{'yes' if v.bisimulation else 'no'}")
            if v.stutter_sensitive:
                lines.append("  note: adding the invariant to the stuttering "
                             "branch changes this verdict")
            if v.detail:
                lines.append(f"  {v.detail}")
            for w in v.witnesses:
                lines.append("  witness " + str(w).replace("\n", "\n  "))
        lines.append("")
        lines.append(f"overall: {self.status} ({self.elapsed:.2f}s)")
        return "\n".join(lines) + "\n"

    def _universe_line(self) -> str:
        carriers = " ".join(
            f"{n}={s}" for n, s in sorted(self.universe.carriers.items()))
        extra = f" {carriers}" if carriers else ""
        return (f"universe: int [{self.universe.int_lo}, {self.universe.int_hi}]"
                f"{extra} ceiling={self.universe.ceiling}")

    def to_tree(self) -> dict:
        def state_dict(s: Optional[State]):
            if s is None:
                return None
            return {k: fmt_value(v) for k, v in sorted(s.items())}

        return {
            "machine": self.machine,
            "universe": {
                "int_lo": self.universe.int_lo,
                "int_hi": self.universe.int_hi,
                "carriers": dict(sorted(self.universe.carriers.items())),
                "ceiling": self.universe.ceiling,
            },
            "verdicts": [
                {
                    "name": v.name,
                    "status": v.status,
                    "checked_pairs": v.checked_pairs,
                    "jml_size": v.jml_size,
                    "eb_size": v.eb_size,
                    "bisimulation": v.bisimulation,
                    "stutter_sensitive": v.stutter_sensitive,
                    "detail": v.detail,
                    "witnesses": [
                        {
                            "event": w.event,
                            "pre": state_dict(w.pre),
                            "post": state_dict(w.post),
                            "jml_side": w.jml_side,
                            "eb_side": w.eb_side,
                        }
                        for w in v.witnesses
                    ],
                }
                for v in self.verdicts
            ],
            "overall": self.status,
            "elapsed": self.elapsed,
        }


def _machine_invariant(machine: Machine) -> eb.Predicate:
    preds = [p for _lbl, p in machine.invariants]
    if not preds:
        return eb.BTrue()
    out = preds[0]
    for p in preds[1:]:
        out = eb.And(out, p)
    return out


def universe_for(machine: Machine, universe: Universe) -> Universe:
    """A copy of ``universe`` covering every carrier set of the machine."""
    return universe.with_carriers(machine.carrier_sets)


def _pair_sort_key(pair):
    a, b = pair
    return (a.sort_key(), b.sort_key())


def check_event(event: eb.Event, machine: Machine, universe: Universe,
                unit: Optional[TranslationUnit] = None,
                witness_cap: int = 5) -> Verdict:
    """PASS iff the translated event's JML relation is contained in the
    Event-B relation of the source event; FAIL collects witness pairs."""
    unit = unit if unit is not None else translate_machine(machine)
    u = universe_for(machine, universe)
    guard_spec, run_spec = unit.method_pair(event.name)
    inv_eb = _machine_invariant(machine)
    budget = Budget(u.ceiling)
    try:
        jml_rel = jml_method_rel(run_spec, unit.result.class_invariant,
                                 guard_spec, machine.variables, u, budget)
        eb_literal, eb_strict = eb_event_rel_variants(
            event, inv_eb, machine.variables, u, budget)
    except ResourceLimitError as exc:
        return Verdict(name=event.name, status=RESOURCE_LIMIT,
                       checked_pairs=exc.count, detail=str(exc))

    missing = sorted(jml_rel - eb_literal, key=_pair_sort_key)
    pass_literal = not missing
    pass_strict = jml_rel <= eb_strict
    witnesses = tuple(
        _explain_pair(event, pair, guard_spec, u) for pair in missing[:witness_cap])
    return Verdict(
        name=event.name,
        status=PASS if pass_literal else FAIL,
        checked_pairs=budget.spent,
        jml_size=len(jml_rel),
        eb_size=len(eb_literal),
        witnesses=witnesses,
        bisimulation=eb_literal <= jml_rel,
        stutter_sensitive=pass_literal != pass_strict,
    )


def _explain_pair(event, pair, guard_spec, u) -> Counterexample:
    a, b = pair
    g = guard_holds(guard_spec, a, u)
    if g:
        jml_side = (f"guard_{event.name}() is true at the pre-state; the normal "
                    f"case's ensures and frame accept this pair")
        eb_side = ("the guard is satisfiable, so stuttering is not available, "
                   "and no action valuation produces this post-state")
    else:
        jml_side = (f"guard_{event.name}() is false at the pre-state; the "
                    f"exceptional case accepts this pair")
        eb_side = "with the guard unsatisfiable only the pair (a, a) is allowed"
    return Counterexample(event.name, a, b, jml_side, eb_side)


def check_init(machine: Machine, universe: Universe,
               unit: Optional[TranslationUnit] = None,
               witness_cap: int = 5) -> Verdict:
    """PASS iff every state satisfying initially-and-invariant is an
    invariant-respecting result of the source initialisation."""
    unit = unit if unit is not None else translate_machine(machine)
    u = universe_for(machine, universe)
    inv_eb = _machine_invariant(machine)
    budget = Budget(u.ceiling)
    try:
        jml_states = jml_initially_states(
            unit.result.initially, unit.result.class_invariant,
            machine.variables, u, budget)
        eb_states = eb_init_states(
            machine.initialisation, inv_eb, machine.variables, u, budget)
    except ResourceLimitError as exc:
        return Verdict(name="initialisation", status=RESOURCE_LIMIT,
                       checked_pairs=exc.count, detail=str(exc))

    missing = sorted(jml_states - eb_states, key=lambda s: s.sort_key())
    witnesses = tuple(
        Counterexample(
            "initialisation", None, s,
            "satisfies the initially clause and the class invariant",
            "not a result of the Event-B initialisation")
        for s in missing[:witness_cap])
    return Verdict(
        name="initialisation",
        status=PASS if not missing else FAIL,
        checked_pairs=budget.spent,
        jml_size=len(jml_states),
        eb_size=len(eb_states),
        witnesses=witnesses,
        bisimulation=eb_states <= jml_states,
    )


def check_machine(machine: Machine, universe: Universe,
                  unit: Optional[TranslationUnit] = None,
                  witness_cap: int = 5) -> Report:
    """Aggregate verdicts for the initialisation and every event.

    A resource limit on one event is recorded in its verdict and does not
    stop the remaining checks.
    """
    started = time.perf_counter()
    unit = unit if unit is not None else translate_machine(machine)
    u = universe_for(machine, universe)
    verdicts = [check_init(machine, u, unit, witness_cap)]
    for event in machine.events:
        verdicts.append(check_event(event, machine, u, unit, witness_cap))
    elapsed = time.perf_counter() - started
    return Report(machine=machine.name, universe=u,
                  verdicts=tuple(verdicts), elapsed=elapsed)


# --- mutation hooks (negative tests for the checker itself) -----------------

def _contains_old(node) -> bool:
    if isinstance(node, (jml.JmlOld, jml.JmlOldExpr)):
        return True
    if isinstance(node, (jml.JmlAnd, jml.JmlOr)):
        return _contains_old(node.left) or _contains_old(node.right)
    if isinstance(node, (jml.JmlNot, jml.JmlParen)):
        return _contains_old(node.operand)
    if isinstance(node, jml.JmlExists):
        return _contains_old(node.body)
    if isinstance(node, jml.JmlCmp):
        return _contains_old(node.left) or _contains_old(node.right)
    if isinstance(node, jml.JmlBoolCall):
        return _contains_old(node.call)
    if isinstance(node, jml.JmlMethodCall):
        return _contains_old(node.recv) or any(_contains_old(a) for a in node.args)
    if isinstance(node, jml.JmlCross):
        return _contains_old(node.left) or _contains_old(node.right)
    if isinstance(node, jml.JmlNewSet):
        return any(_contains_old(i) for i in node.items)
    if isinstance(node, jml.JmlNewRelation):
        return any(_contains_old(a) or _contains_old(b) for a, b in node.pairs)
    if isinstance(node, jml.JmlNewPair):
        return _contains_old(node.left) or _contains_old(node.right)
    if isinstance(node, jml.JmlArith):
        return _contains_old(node.left) or _contains_old(node.right)
    return False


def _drop_old(p: jml.JmlPredicate) -> tuple[jml.JmlPredicate, bool]:
    """Replace every pre-state-dependent conjunct with true.

    Walking the conjunction spine (through quantifiers and grouping), any
    element whose subtree mentions \\old loses its constraint entirely;
    post-state-only conjuncts are kept.
    """
    if isinstance(p, jml.JmlAnd):
        left, c1 = _drop_old(p.left)
        right, c2 = _drop_old(p.right)
        return jml.JmlAnd(left, right), c1 or c2
    if isinstance(p, jml.JmlExists):
        body, c = _drop_old(p.body)
        return jml.JmlExists(p.var, p.ty, body), c
    if isinstance(p, jml.JmlParen):
        body, c = _drop_old(p.operand)
        return jml.JmlParen(body), c
    if _contains_old(p):
        return jml.JmlTrue(), True
    return p, False


def mutate_translation(unit: TranslationUnit, mutation: str) -> TranslationUnit:
    """A syntactically valid but semantically altered translation.

    Used to confirm the checker can fail: widening an ensures clause or
    dropping pre-state constraints must be caught, while shrinking an
    assignable set only shrinks the JML relation and must still pass.
    """
    if mutation not in MUTATIONS:
        raise MutationError(f"unknown mutation '{mutation}' "
                            f"(expected one of {', '.join(MUTATIONS)})")
    changed = False
    methods = []
    for m in unit.result.methods:
        if m.kind != "run":
            methods.append(m)
            continue
        if mutation == "widen_ensures_true":
            if not isinstance(m.normal.ensures, jml.JmlTrue):
                m = replace(m, normal=replace(m.normal, ensures=jml.JmlTrue()))
                changed = True
        elif mutation == "shrink_assignable":
            if not isinstance(m.normal.assignable, jml.AssignNothing):
                m = replace(m, normal=replace(
                    m.normal, assignable=jml.AssignNothing()))
                changed = True
        elif mutation == "drop_old":
            ensures, did = _drop_old(m.normal.ensures)
            if did:
                m = replace(m, normal=replace(m.normal, ensures=ensures))
                changed = True
        elif mutation == "negate_guard_link":
            if m.exceptional is not None:
                m = replace(
                    m,
                    normal=replace(m.normal, requires=m.exceptional.requires),
                    exceptional=replace(m.exceptional, requires=m.normal.requires),
                )
                changed = True
        methods.append(m)
    if not changed:
        raise MutationError(
            f"mutation '{mutation}' does not apply to this translation "
            f"(nothing to alter)")
    mutated_class = replace(unit.result, methods=tuple(methods))
    return TranslationUnit(
        source=unit.source,
        result=mutated_class,
        trace=unit.trace + ((mutation, "mutation"),),
    )
