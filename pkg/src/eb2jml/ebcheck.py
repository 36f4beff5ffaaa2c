"""Static well-formedness: scoping, typing, and structural rules.

Variables and event parameters may be declared with explicit type
annotations; missing types are filled in deterministically from typing
invariants (``v : INT``, ``v <: PERSON``, ``r : s <-> t``) and typing
guards.  Everything else is checked against the resolved types.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .ebast import (
    And, BecomesEqual, BinOp, BTrue, CarrierType, Cmp,
    EmptySet, Event, Expr, EbType, IntLit, IntSet, IntType, Machine, Not,
    Or, Predicate, Ref, RelSpace, RelType, SetEnum, SetType, Span, UnOp,
    free_identifiers,
)


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: Optional[Span] = None

    def __str__(self) -> str:
        if self.span is not None:
            return f"{self.span.line}:{self.span.column}: {self.message}"
        return self.message


class TypeProblem(Exception):
    def __init__(self, message: str, span: Optional[Span] = None):
        super().__init__(message)
        self.message = message
        self.span = span


# Internal-only types used while checking; they never appear in machines.

@dataclass(frozen=True)
class PairType(EbType):
    left: Optional[EbType]
    right: Optional[EbType]


@dataclass(frozen=True)
class RelSpaceType(EbType):
    rel: RelType


def _is_setlike(t) -> bool:
    return t is None or isinstance(t, (SetType, RelType))


def unify(a: Optional[EbType], b: Optional[EbType], span=None) -> Optional[EbType]:
    """Merge two partial types, treating None as a hole."""
    if a is None:
        return b
    if b is None:
        return a
    if isinstance(a, IntType) and isinstance(b, IntType):
        return a
    if isinstance(a, CarrierType) and isinstance(b, CarrierType):
        if a.set_name == b.set_name:
            return a
    if isinstance(a, SetType) and isinstance(b, SetType):
        return _make_set(unify(a.elem, b.elem, span))
    if isinstance(a, RelType) and isinstance(b, RelType):
        return RelType(unify(a.dom, b.dom, span), unify(a.ran, b.ran, span))
    # the empty set unifies with relations too
    if isinstance(a, SetType) and a.elem is None and isinstance(b, RelType):
        return b
    if isinstance(b, SetType) and b.elem is None and isinstance(a, RelType):
        return a
    if isinstance(a, SetType) and isinstance(a.elem, PairType) and isinstance(b, RelType):
        return unify(_make_set(a.elem), b, span)
    if isinstance(b, SetType) and isinstance(b.elem, PairType) and isinstance(a, RelType):
        return unify(a, _make_set(b.elem), span)
    if isinstance(a, PairType) and isinstance(b, PairType):
        return PairType(unify(a.left, b.left, span), unify(a.right, b.right, span))
    raise TypeProblem(f"type mismatch: {type_name(a)} vs {type_name(b)}", span)


def _make_set(elem: Optional[EbType]) -> EbType:
    if isinstance(elem, PairType):
        _reject_relation_element(elem.left)
        _reject_relation_element(elem.right)
        return RelType(elem.left, elem.right)
    return SetType(elem)


def _reject_relation_element(t: Optional[EbType]) -> None:
    if isinstance(t, (RelType, PairType)):
        raise TypeProblem("relations of relations are not supported")


def type_name(t: Optional[EbType]) -> str:
    if t is None:
        return "?"
    if isinstance(t, IntType):
        return "INT"
    if isinstance(t, CarrierType):
        return t.set_name
    if isinstance(t, SetType):
        return f"pow({type_name(t.elem)})"
    if isinstance(t, RelType):
        return f"rel({type_name(t.dom)}, {type_name(t.ran)})"
    if isinstance(t, PairType):
        return f"{type_name(t.left)} |-> {type_name(t.right)}"
    if isinstance(t, RelSpaceType):
        return type_name(t.rel)
    return repr(t)


def expr_type(e: Expr, env: dict[str, EbType]) -> Optional[EbType]:
    """Type of an expression under ``env`` (identifier key -> type)."""
    if isinstance(e, IntLit):
        return IntType()
    if isinstance(e, Ref):
        key = e.ident.key
        if key not in env:
            raise TypeProblem(f"undeclared identifier '{key}'", e.span)
        return env[key]
    if isinstance(e, EmptySet):
        return SetType(None)
    if isinstance(e, IntSet):
        return SetType(IntType())
    if isinstance(e, SetEnum):
        elem: Optional[EbType] = None
        for item in e.items:
            elem = unify(elem, expr_type(item, env), e.span)
        return _make_set(elem)
    if isinstance(e, UnOp):
        t = unify(expr_type(e.operand, env), RelType(None, None), e.span)
        assert isinstance(t, RelType)
        return _make_set(t.dom if e.op == "dom" else t.ran)
    if isinstance(e, RelSpace):
        lt = unify(expr_type(e.left, env), SetType(None), e.span)
        rt = unify(expr_type(e.right, env), SetType(None), e.span)
        dom = lt.elem if isinstance(lt, SetType) else None
        ran = rt.elem if isinstance(rt, SetType) else None
        if isinstance(lt, RelType) or isinstance(rt, RelType):
            raise TypeProblem("relations of relations are not supported", e.span)
        return RelSpaceType(RelType(dom, ran))
    if isinstance(e, BinOp):
        return _binop_type(e, env)
    raise TypeProblem(f"cannot type {type(e).__name__}", getattr(e, "span", None))


def _binop_type(e: BinOp, env) -> Optional[EbType]:
    op = e.op
    if op in ("add", "sub", "mul"):
        unify(expr_type(e.left, env), IntType(), e.span)
        unify(expr_type(e.right, env), IntType(), e.span)
        return IntType()
    if op == "maplet":
        lt = expr_type(e.left, env)
        rt = expr_type(e.right, env)
        _reject_relation_element(lt)
        _reject_relation_element(rt)
        return PairType(lt, rt)
    lt = expr_type(e.left, env)
    rt = expr_type(e.right, env)
    if isinstance(lt, RelSpaceType) or isinstance(rt, RelSpaceType):
        raise TypeProblem("relation arrows are only allowed as a membership right-hand side", e.span)
    if op in ("union", "inter", "diff"):
        if not (_is_setlike(lt) and _is_setlike(rt)):
            raise TypeProblem(f"'{op}' needs set operands", e.span)
        merged = unify(unify(lt, rt, e.span), SetType(None), e.span)
        return merged
    if op in ("domsub", "domres"):
        rel = unify(rt, RelType(None, None), e.span)
        assert isinstance(rel, RelType)
        unify(lt, SetType(rel.dom), e.span)
        return rel
    if op == "cross":
        ls = unify(lt, SetType(None), e.span)
        rs = unify(rt, SetType(None), e.span)
        dom = ls.elem if isinstance(ls, SetType) else None
        ran = rs.elem if isinstance(rs, SetType) else None
        if isinstance(ls, RelType) or isinstance(rs, RelType):
            raise TypeProblem("relations of relations are not supported", e.span)
        return RelType(dom, ran)
    if op == "image":
        rel = unify(lt, RelType(None, None), e.span)
        assert isinstance(rel, RelType)
        unify(rt, SetType(rel.dom), e.span)
        return _make_set(rel.ran)
    if op == "apply":
        rel = unify(lt, RelType(None, None), e.span)
        assert isinstance(rel, RelType)
        unify(rt, rel.dom, e.span)
        return rel.ran
    raise TypeProblem(f"unknown operator '{op}'", e.span)


def check_predicate(p: Predicate, env: dict[str, EbType]) -> None:
    """Type-check a predicate; raises TypeProblem on the first error."""
    if isinstance(p, BTrue):
        return
    if isinstance(p, (And, Or)):
        check_predicate(p.left, env)
        check_predicate(p.right, env)
        return
    if isinstance(p, Not):
        check_predicate(p.operand, env)
        return
    if isinstance(p, Cmp):
        if p.op == "in":
            rt = expr_type(p.right, env)
            lt = expr_type(p.left, env)
            if isinstance(rt, RelSpaceType):
                unify(lt, rt.rel, p.span)
            elif isinstance(rt, SetType):
                unify(lt, rt.elem, p.span)
            elif isinstance(rt, RelType):
                unify(lt, PairType(rt.dom, rt.ran), p.span)
            else:
                raise TypeProblem("membership needs a set on the right", p.span)
            return
        lt = expr_type(p.left, env)
        rt = expr_type(p.right, env)
        if isinstance(lt, RelSpaceType) or isinstance(rt, RelSpaceType):
            raise TypeProblem("relation arrows are only allowed as a membership right-hand side", p.span)
        if p.op in ("eq", "neq"):
            unify(lt, rt, p.span)
        elif p.op == "subset":
            if not (_is_setlike(lt) and _is_setlike(rt)):
                raise TypeProblem("subset needs set operands", p.span)
            unify(unify(lt, rt, p.span), SetType(None), p.span)
        elif p.op in ("lt", "le"):
            unify(lt, IntType(), p.span)
            unify(rt, IntType(), p.span)
        else:
            raise TypeProblem(f"unknown comparison '{p.op}'", p.span)
        return
    raise TypeProblem(f"cannot check {type(p).__name__}", getattr(p, "span", None))


# --- type resolution ---------------------------------------------------

def _type_from_typing_pred(op: str, rhs: Expr, env) -> Optional[EbType]:
    try:
        rt = expr_type(rhs, env)
    except TypeProblem:
        return None
    if op == "in":
        if isinstance(rt, RelSpaceType):
            return rt.rel
        if isinstance(rt, SetType) and rt.elem is not None:
            return rt.elem
        if isinstance(rt, RelType) and rt.dom is not None and rt.ran is not None:
            return PairType(rt.dom, rt.ran)
        return None
    if op == "subset":
        if isinstance(rt, RelSpaceType):
            return None
        if isinstance(rt, RelType):
            return rt
        if isinstance(rt, SetType) and rt.elem is not None:
            return rt
    return None


def _complete(t: Optional[EbType]) -> bool:
    if t is None or isinstance(t, (RelSpaceType, PairType)):
        return False
    if isinstance(t, SetType):
        return _complete(t.elem)
    if isinstance(t, RelType):
        return _complete(t.dom) and _complete(t.ran)
    return True


def _validate_annotation(t: EbType, carriers: set[str], diags, span) -> None:
    if isinstance(t, CarrierType):
        if t.set_name not in carriers:
            diags.append(Diagnostic(f"unknown carrier set '{t.set_name}'", span))
    elif isinstance(t, SetType):
        if t.elem is not None:
            _validate_annotation(t.elem, carriers, diags, span)
    elif isinstance(t, RelType):
        for side in (t.dom, t.ran):
            if isinstance(side, RelType):
                diags.append(Diagnostic("relations of relations are not supported", span))
            elif side is not None:
                _validate_annotation(side, carriers, diags, span)


def resolve_types(machine: Machine) -> tuple[Machine, list[Diagnostic]]:
    """Fill in missing variable/parameter types; returns the typed machine.

    Inference is a fixpoint over typing invariants (for variables) and
    typing guards (for parameters): the first predicate of the shape
    ``x : T`` or ``x <: T`` whose right-hand side is already typable
    determines the type of ``x``.
    """
    diags: list[Diagnostic] = []
    carriers = set(machine.carrier_sets)
    env: dict[str, EbType] = {
        c: SetType(CarrierType(c)) for c in machine.carrier_sets
    }

    var_types: dict[str, Optional[EbType]] = {}
    for ident, ty in machine.variables:
        if ty is not None:
            _validate_annotation(ty, carriers, diags, ident.span)
        var_types[ident.name] = ty
    env.update({n: t for n, t in var_types.items() if t is not None})

    changed = True
    while changed:
        changed = False
        for _lbl, p in machine.invariants:
            if not (isinstance(p, Cmp) and p.op in ("in", "subset")):
                continue
            if not (isinstance(p.left, Ref) and not p.left.ident.primed):
                continue
            name = p.left.ident.name
            if var_types.get(name) is not None or name not in var_types:
                continue
            t = _type_from_typing_pred(p.op, p.right, env)
            if t is not None and _complete(t):
                var_types[name] = t
                env[name] = t
                changed = True

    for ident, ty in machine.variables:
        if var_types[ident.name] is None:
            diags.append(Diagnostic(
                f"cannot determine the type of variable '{ident.name}' "
                f"(annotate it or add a typing invariant)", ident.span))

    new_vars = tuple(
        (ident, var_types[ident.name]) for ident, _ in machine.variables
    )

    new_events = []
    for ev in machine.events:
        param_types: dict[str, Optional[EbType]] = {}
        for ident, ty in ev.params:
            if ty is not None:
                _validate_annotation(ty, carriers, diags, ident.span)
            param_types[ident.name] = ty
        ev_env = dict(env)
        ev_env.update({n: t for n, t in param_types.items() if t is not None})
        changed = True
        while changed:
            changed = False
            for _lbl, p in ev.guards:
                if not (isinstance(p, Cmp) and p.op in ("in", "subset")):
                    continue
                if not (isinstance(p.left, Ref) and not p.left.ident.primed):
                    continue
                name = p.left.ident.name
                if name not in param_types or param_types[name] is not None:
                    continue
                t = _type_from_typing_pred(p.op, p.right, ev_env)
                if t is not None and _complete(t):
                    param_types[name] = t
                    ev_env[name] = t
                    changed = True
        for ident, ty in ev.params:
            if param_types[ident.name] is None:
                diags.append(Diagnostic(
                    f"cannot determine the type of parameter '{ident.name}' "
                    f"of event '{ev.name}'", ident.span))
        new_events.append(replace(
            ev,
            params=tuple((ident, param_types[ident.name]) for ident, _ in ev.params),
        ))

    typed = replace(machine, variables=new_vars, events=tuple(new_events))
    return typed, diags


def base_type_env(machine: Machine) -> dict[str, EbType]:
    """Carrier sets plus machine variables; machine must be fully typed."""
    env: dict[str, EbType] = {
        c: SetType(CarrierType(c)) for c in machine.carrier_sets
    }
    for ident, ty in machine.variables:
        if ty is None:
            raise ValueError(f"variable '{ident.name}' has no resolved type")
        env[ident.name] = ty
    return env


# --- well-formedness ---------------------------------------------------

def well_formedness_check(machine: Machine) -> list[Diagnostic]:
    """Every violation of the machine rules, ordered by source position."""
    collected: list[tuple[int, Diagnostic]] = []
    seq = 0

    def emit(message: str, span=None) -> None:
        nonlocal seq
        collected.append((seq, Diagnostic(message, span)))
        seq += 1

    typed, diags = resolve_types(machine)
    for d in diags:
        emit(d.message, d.span)

    _check_unique(
        [(c, machine.span) for c in machine.carrier_sets], "carrier set", emit)
    _check_unique(
        [(v.name, v.span) for v, _ in machine.variables], "variable", emit)
    for v, _ in machine.variables:
        if v.name in machine.carrier_sets:
            emit(f"'{v.name}' is both a variable and a carrier set", v.span)
    _check_unique(
        [(lbl, p.span) for lbl, p in machine.invariants], "invariant label", emit)
    _check_unique(
        [(e.name, e.span) for e in machine.events], "event", emit)

    try:
        env = base_type_env(typed)
    except ValueError:
        # unresolved types were already reported; skip dependent checks
        return _finish(collected)

    var_names = set(typed.variable_names())

    for lbl, p in typed.invariants:
        _check_no_primes(p, f"invariant {lbl}", emit)
        _check_special_positions(p, emit)
        _typing(p, env, emit)

    _check_unique(
        [(a.label, a.span) for a in typed.initialisation],
        "initialisation label", emit)
    assigned: dict[str, int] = {}
    for act in typed.initialisation:
        assigned[act.target.name] = assigned.get(act.target.name, 0) + 1
        if act.target.name not in var_names:
            emit(f"initialisation assigns '{act.target.name}', which is not a machine variable",
                 act.span)
            continue
        _check_init_action(act, typed, env, emit)
    for name in typed.variable_names():
        n = assigned.get(name, 0)
        if n == 0:
            emit(f"initialisation does not assign variable '{name}'", typed.span)
        elif n > 1:
            emit(f"initialisation assigns variable '{name}' more than once", typed.span)

    for ev in typed.events:
        _check_event(ev, typed, env, var_names, emit)

    return _finish(collected)


def _finish(collected) -> list[Diagnostic]:
    def key(item):
        seq, d = item
        pos = d.span.begin if d.span is not None else 1 << 60
        return (pos, seq)

    return [d for _, d in sorted(collected, key=key)]


def _check_unique(named, what, emit) -> None:
    seen = set()
    for name, span in named:
        if name in seen:
            emit(f"duplicate {what} '{name}'", span)
        seen.add(name)


def _check_no_primes(p: Predicate, where: str, emit) -> None:
    for ident in sorted(free_identifiers(p), key=lambda i: i.key):
        if ident.primed:
            emit(f"primed identifier '{ident.key}' is not allowed in {where}",
                 getattr(p, "span", None))


def _check_special_positions(node, emit, membership_rhs=False) -> None:
    # INT and relation arrows may appear only directly under ':'
    if isinstance(node, (IntSet, RelSpace)) and not membership_rhs:
        what = "INT" if isinstance(node, IntSet) else "a relation arrow"
        emit(f"{what} is only allowed as a membership right-hand side", node.span)
    if isinstance(node, RelSpace):
        _check_special_positions(node.left, emit)
        _check_special_positions(node.right, emit)
    elif isinstance(node, SetEnum):
        for item in node.items:
            _check_special_positions(item, emit)
    elif isinstance(node, BinOp):
        _check_special_positions(node.left, emit)
        _check_special_positions(node.right, emit)
    elif isinstance(node, UnOp):
        _check_special_positions(node.operand, emit)
    elif isinstance(node, Cmp):
        _check_special_positions(node.left, emit)
        _check_special_positions(node.right, emit, membership_rhs=(node.op == "in"))
    elif isinstance(node, (And, Or)):
        _check_special_positions(node.left, emit)
        _check_special_positions(node.right, emit)
    elif isinstance(node, Not):
        _check_special_positions(node.operand, emit)


def _typing(p: Predicate, env, emit) -> None:
    try:
        check_predicate(p, env)
    except TypeProblem as exc:
        emit(exc.message, exc.span)


def _check_init_action(act, machine, env, emit) -> None:
    var_names = set(machine.variable_names())
    target_ty = env[act.target.name]
    if isinstance(act, BecomesEqual):
        for ident in sorted(free_identifiers(act.rhs), key=lambda i: i.key):
            if ident.primed:
                emit(f"primed identifier '{ident.key}' is not allowed in a deterministic action",
                     act.span)
            elif ident.name in var_names:
                emit(f"initialisation of '{act.target.name}' reads variable '{ident.name}' "
                     f"(there is no pre-state)", act.span)
        try:
            unify(expr_type(act.rhs, env), target_ty, act.span)
        except TypeProblem as exc:
            emit(exc.message, exc.span or act.span)
    else:
        prime = act.target.name + "'"
        for ident in sorted(free_identifiers(act.predicate), key=lambda i: i.key):
            if ident.primed and ident.key != prime:
                emit(f"'{ident.key}' cannot appear here; only '{prime}' may be primed",
                     act.span)
            elif not ident.primed and ident.name in var_names:
                emit(f"initialisation of '{act.target.name}' reads variable '{ident.name}' "
                     f"(there is no pre-state)", act.span)
        bap_env = dict(env)
        bap_env[prime] = target_ty
        _typing(act.predicate, bap_env, emit)
    _check_special_positions_action(act, emit)


def _check_special_positions_action(act, emit) -> None:
    if isinstance(act, BecomesEqual):
        _check_special_positions(act.rhs, emit)
    else:
        _check_special_positions(act.predicate, emit)


def _check_event(ev: Event, machine, env, var_names, emit) -> None:
    _check_unique([(p.name, p.span) for p, _ in ev.params], "parameter", emit)
    for p, _ in ev.params:
        if p.name in var_names or p.name in machine.carrier_sets:
            emit(f"parameter '{p.name}' of event '{ev.name}' shadows a "
                 f"variable or carrier set", p.span)
    ev_env = dict(env)
    for p, ty in ev.params:
        if ty is None:
            return  # already reported by resolve_types
        ev_env[p.name] = ty

    _check_unique([(lbl, g.span) for lbl, g in ev.guards], "guard label", emit)
    for lbl, g in ev.guards:
        _check_no_primes(g, f"guard {lbl} of event '{ev.name}'", emit)
        _check_special_positions(g, emit)
        _typing(g, ev_env, emit)

    _check_unique([(a.label, a.span) for a in ev.actions], "action label", emit)
    seen_targets = set()
    for act in ev.actions:
        if act.target.name in seen_targets:
            emit(f"event '{ev.name}' assigns '{act.target.name}' twice "
                 f"(simultaneous actions must have distinct targets)", act.span)
        seen_targets.add(act.target.name)
        if act.target.name not in var_names:
            emit(f"event '{ev.name}' assigns '{act.target.name}', which is not "
                 f"a machine variable", act.span)
            continue
        target_ty = env[act.target.name]
        if isinstance(act, BecomesEqual):
            for ident in sorted(free_identifiers(act.rhs), key=lambda i: i.key):
                if ident.primed:
                    emit(f"primed identifier '{ident.key}' is not allowed in a "
                         f"deterministic action", act.span)
            try:
                unify(expr_type(act.rhs, ev_env), target_ty, act.span)
            except TypeProblem as exc:
                emit(exc.message, exc.span or act.span)
        else:
            prime = act.target.name + "'"
            for ident in sorted(free_identifiers(act.predicate), key=lambda i: i.key):
                if ident.primed and ident.key != prime:
                    emit(f"'{ident.key}' cannot appear here; only '{prime}' may "
                         f"be primed", act.span)
            bap_env = dict(ev_env)
            bap_env[prime] = target_ty
            _typing(act.predicate, bap_env, emit)
        _check_special_positions_action(act, emit)
