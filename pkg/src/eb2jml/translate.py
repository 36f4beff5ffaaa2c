"""Translation of Event-B machines to JML-annotated abstract class specs.

Each event becomes a pure boolean ``guard_<event>`` method plus a void
``run_<event>`` method with two specification cases: one for the guard
holding (framed by the assigned variables, post-state pinned by the
translated actions evaluated over pre-state values) and one for the guard
failing (no modification allowed).  Machine invariants become the class
invariant and the initialisation becomes the ``initially`` clause.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import ebast as eb
from . import jmlast as jml
from .ebast import Machine, Span
from .ebcheck import (
    RelSpaceType, TypeProblem, base_type_env, expr_type,
    resolve_types, unify,
)


class TranslationError(Exception):
    def __init__(self, message: str, span: Optional[Span] = None):
        if span is not None:
            message = f"{span.line}:{span.column}: {message}"
        super().__init__(message)
        self.span = span


@dataclass(frozen=True)
class TranslationUnit:
    source: Machine
    result: jml.JmlClass
    trace: tuple[tuple[str, str], ...]  # (source label, produced fragment)

    def method_pair(self, event_name: str) -> tuple[jml.JmlMethodSpec, jml.JmlMethodSpec]:
        guard = run = None
        for m in self.result.methods:
            if m.name == f"guard_{event_name}":
                guard = m
            elif m.name == f"run_{event_name}":
                run = m
        if guard is None or run is None:
            raise KeyError(event_name)
        return guard, run


def jml_type_of(t: eb.EbType) -> jml.JmlType:
    """Carrier elements and integers map to Integer; sets and relations nest."""
    if isinstance(t, (eb.IntType, eb.CarrierType)):
        return jml.JInt()
    if isinstance(t, eb.SetType):
        if t.elem is None:
            raise TranslationError("element type of a set is not determined")
        return jml.JSet(jml_type_of(t.elem))
    if isinstance(t, eb.RelType):
        if t.dom is None or t.ran is None:
            raise TranslationError("element types of a relation are not determined")
        return jml.JRel(jml_type_of(t.dom), jml_type_of(t.ran))
    raise TranslationError(f"untranslatable type {t!r}")


def _is_primitive(t) -> bool:
    return isinstance(t, (eb.IntType, eb.CarrierType))


def _conj(parts: list[jml.JmlPredicate]) -> jml.JmlPredicate:
    """Left-associated conjunction; nested chains are spliced in flat."""
    flat: list[jml.JmlPredicate] = []

    def splice(p: jml.JmlPredicate) -> None:
        if isinstance(p, jml.JmlAnd):
            splice(p.left)
            splice(p.right)
        else:
            flat.append(p)

    for part in parts:
        splice(part)
    if not flat:
        return jml.JmlTrue()
    out = flat[0]
    for p in flat[1:]:
        out = jml.JmlAnd(out, p)
    return out


def _typed(e: eb.Expr, env, hint=None):
    try:
        t = expr_type(e, env)
        if hint is not None:
            t = unify(t, hint)
        return t
    except TypeProblem as exc:
        raise TranslationError(exc.message, exc.span or getattr(e, "span", None))


def _tr_expr(e: eb.Expr, env, hint=None) -> jml.JmlExpr:
    if isinstance(e, eb.IntLit):
        return jml.JmlIntLit(e.value)
    if isinstance(e, eb.Ref):
        return jml.JmlVar(e.ident.key)
    if isinstance(e, eb.EmptySet):
        t = hint
        if isinstance(t, eb.RelType) and t.dom is not None and t.ran is not None:
            return jml.JmlNewRelation(jml_type_of(t.dom), jml_type_of(t.ran))
        if isinstance(t, eb.SetType) and t.elem is not None:
            return jml.JmlNewSet(jml_type_of(t.elem))
        raise TranslationError("cannot determine the type of {} here", e.span)
    if isinstance(e, eb.SetEnum):
        t = _typed(e, env, hint)
        if isinstance(t, eb.RelType):
            pairs = []
            for item in e.items:
                if not (isinstance(item, eb.BinOp) and item.op == "maplet"):
                    raise TranslationError(
                        "a relation enumeration must list maplets", item.span)
                pairs.append((_tr_expr(item.left, env, t.dom),
                              _tr_expr(item.right, env, t.ran)))
            return jml.JmlNewRelation(
                jml_type_of(t.dom), jml_type_of(t.ran), tuple(pairs))
        if isinstance(t, eb.SetType) and t.elem is not None:
            return jml.JmlNewSet(
                jml_type_of(t.elem),
                tuple(_tr_expr(i, env, t.elem) for i in e.items))
        raise TranslationError("cannot determine the element type of this set", e.span)
    if isinstance(e, eb.UnOp):
        recv = _tr_expr(e.operand, env)
        return jml.JmlMethodCall(recv, "domain" if e.op == "dom" else "range")
    if isinstance(e, eb.BinOp):
        return _tr_binop(e, env, hint)
    if isinstance(e, eb.IntSet):
        raise TranslationError("INT is only allowed as a membership right-hand side", e.span)
    if isinstance(e, eb.RelSpace):
        raise TranslationError(
            "a relation arrow is only allowed as a membership right-hand side", e.span)
    raise TranslationError(f"untranslatable expression {type(e).__name__}",
                           getattr(e, "span", None))


_METHOD_OF = {"union": "union", "inter": "intersection", "diff": "difference"}


def _tr_binop(e: eb.BinOp, env, hint) -> jml.JmlExpr:
    op = e.op
    if op in _METHOD_OF:
        t = _typed(e, env, hint)
        return jml.JmlMethodCall(
            _tr_expr(e.left, env, t), _METHOD_OF[op], (_tr_expr(e.right, env, t),))
    if op in ("domsub", "domres"):
        t = _typed(e, env, hint)
        assert isinstance(t, eb.RelType)
        method = "domainSubtraction" if op == "domsub" else "domainRestriction"
        return jml.JmlMethodCall(
            _tr_expr(e.right, env, t), method,
            (_tr_expr(e.left, env, eb.SetType(t.dom)),))
    if op == "cross":
        t = _typed(e, env, hint)
        assert isinstance(t, eb.RelType)
        return jml.JmlCross(_tr_expr(e.left, env, eb.SetType(t.dom)),
                            _tr_expr(e.right, env, eb.SetType(t.ran)))
    if op == "image":
        rel_t = _typed(e.left, env)
        return jml.JmlMethodCall(
            _tr_expr(e.left, env), "image",
            (_tr_expr(e.right, env,
                      eb.SetType(rel_t.dom) if isinstance(rel_t, eb.RelType) else None),))
    if op == "apply":
        return jml.JmlMethodCall(
            _tr_expr(e.left, env), "apply", (_tr_expr(e.right, env),))
    if op == "maplet":
        lt = _typed(e.left, env)
        rt = _typed(e.right, env)
        return jml.JmlNewPair(jml_type_of(lt), jml_type_of(rt),
                              _tr_expr(e.left, env), _tr_expr(e.right, env))
    if op in ("add", "sub", "mul"):
        sym = {"add": "+", "sub": "-", "mul": "*"}[op]
        return jml.JmlArith(sym, _tr_expr(e.left, env), _tr_expr(e.right, env))
    raise TranslationError(f"untranslatable operator '{op}'", e.span)


def _tr_relspace_membership(left: eb.Expr, rs: eb.RelSpace, env) -> jml.JmlPredicate:
    rel_t = _typed(rs, env)
    assert isinstance(rel_t, RelSpaceType)
    member = _tr_expr(left, env, rel_t.rel)
    dom_of = jml.JmlMethodCall(member, "domain")
    ran_of = jml.JmlMethodCall(member, "range")
    s = _tr_expr(rs.left, env)
    t = _tr_expr(rs.right, env)
    parts: list[jml.JmlPredicate] = []
    if rs.arrow in ("-->", "-->>"):
        parts.append(jml.JmlBoolCall(jml.JmlMethodCall(member, "isaFunction")))
    if rs.arrow == "<->":
        parts.append(jml.JmlBoolCall(jml.JmlMethodCall(dom_of, "isSubset", (s,))))
        parts.append(jml.JmlBoolCall(jml.JmlMethodCall(ran_of, "isSubset", (t,))))
    else:
        parts.append(jml.JmlBoolCall(jml.JmlMethodCall(dom_of, "equals", (s,))))
        ran_method = "isSubset" if rs.arrow == "-->" else "equals"
        parts.append(jml.JmlBoolCall(jml.JmlMethodCall(ran_of, ran_method, (t,))))
    return _conj(parts)


def _tr_pred(p: eb.Predicate, env) -> jml.JmlPredicate:
    if isinstance(p, eb.BTrue):
        return jml.JmlTrue()
    if isinstance(p, eb.And):
        return jml.JmlAnd(_tr_pred(p.left, env), _tr_pred(p.right, env))
    if isinstance(p, eb.Or):
        return jml.JmlOr(_tr_pred(p.left, env), _tr_pred(p.right, env))
    if isinstance(p, eb.Not):
        return jml.JmlNot(_tr_pred(p.operand, env))
    if isinstance(p, eb.Cmp):
        return _tr_cmp(p, env)
    raise TranslationError(f"untranslatable predicate {type(p).__name__}",
                           getattr(p, "span", None))


def _tr_cmp(p: eb.Cmp, env) -> jml.JmlPredicate:
    if p.op == "in":
        if isinstance(p.right, eb.IntSet):
            return jml.JmlTrue()
        if isinstance(p.right, eb.RelSpace):
            return _tr_relspace_membership(p.left, p.right, env)
        rt = _typed(p.right, env, eb.SetType(_typed(p.left, env)))
        return jml.JmlBoolCall(jml.JmlMethodCall(
            _tr_expr(p.right, env, rt), "has", (_tr_expr(p.left, env),)))
    if p.op == "subset":
        t = _typed(p.left, env, _typed(p.right, env))
        return jml.JmlBoolCall(jml.JmlMethodCall(
            _tr_expr(p.left, env, t), "isSubset", (_tr_expr(p.right, env, t),)))
    if p.op in ("lt", "le"):
        sym = "<" if p.op == "lt" else "<="
        return jml.JmlCmp(sym, _tr_expr(p.left, env), _tr_expr(p.right, env))
    # eq / neq: value equality for primitives, .equals for sets and relations
    t = _typed(p.left, env, _typed(p.right, env))
    left = _tr_expr(p.left, env, t)
    right = _tr_expr(p.right, env, t)
    if _is_primitive(t):
        return jml.JmlCmp("==" if p.op == "eq" else "!=", left, right)
    equals = jml.JmlBoolCall(jml.JmlMethodCall(left, "equals", (right,)))
    return equals if p.op == "eq" else jml.JmlNot(equals)


def translate_predicate(p: eb.Predicate, env, mode: str = "post") -> jml.JmlPredicate:
    """Translate a predicate; ``mode="pre"`` wraps the result in \\old."""
    body = _tr_pred(p, env)
    if mode == "pre":
        return jml.JmlOld(body)
    if mode != "post":
        raise ValueError(f"unknown mode {mode!r}")
    return body


def translate_action(a: eb.Action, env) -> jml.JmlPredicate:
    target = a.target.name
    t = env[target]
    if isinstance(a, eb.BecomesEqual):
        old_rhs = jml.JmlOldExpr(_tr_expr(a.rhs, env, t))
        if _is_primitive(t):
            return jml.JmlCmp("==", jml.JmlVar(target), old_rhs)
        return jml.JmlBoolCall(jml.JmlMethodCall(
            jml.JmlVar(target), "equals", (old_rhs,)))
    prime = target + "'"
    bap_env = dict(env)
    bap_env[prime] = t
    body = _tr_pred(a.predicate, bap_env)
    return jml.JmlExists(
        prime, jml_type_of(t),
        jml.JmlAnd(jml.JmlOld(body),
                   jml.JmlBecomes(target, prime, _is_primitive(t))))


def translate_actions(actions, env) -> jml.JmlPredicate:
    """Simultaneous actions are translated individually and conjoined."""
    return _conj([translate_action(a, env) for a in actions])


def _nest_exists(params, body: jml.JmlPredicate) -> jml.JmlPredicate:
    for ident, ty in reversed(params):
        body = jml.JmlExists(ident.name, jml_type_of(ty), body)
    return body


def translate_event(e: eb.Event, env) -> tuple[jml.JmlMethodSpec, jml.JmlMethodSpec]:
    """An event becomes the (guard_<e>, run_<e>) method pair."""
    ev_env = dict(env)
    for ident, ty in e.params:
        if ty is None:
            raise TranslationError(
                f"parameter '{ident.name}' of event '{e.name}' has no type", ident.span)
        ev_env[ident.name] = ty

    guard_pred = _conj([_tr_pred(g, ev_env) for _lbl, g in e.guards])
    guard_body = jml.JmlParen(guard_pred) if isinstance(guard_pred, jml.JmlAnd) \
        else guard_pred
    guard_spec = jml.JmlMethodSpec(
        name=f"guard_{e.name}",
        kind="guard",
        normal=jml.SpecCase(jml.JmlTrue(), jml.AssignNothing(),
                            _nest_exists(e.params, guard_body)),
    )

    parts: list[jml.JmlPredicate] = [jml.JmlOld(guard_pred)]
    if e.actions:
        parts.extend(translate_action(a, ev_env) for a in e.actions)
    else:
        parts.append(jml.JmlTrue())
    ensures = _nest_exists(e.params, _conj(parts))

    mod = eb.mod_list(e.actions)
    assignable = (jml.AssignVars(tuple(v.name for v in mod))
                  if mod else jml.AssignNothing())
    run_spec = jml.JmlMethodSpec(
        name=f"run_{e.name}",
        kind="run",
        normal=jml.SpecCase(jml.JmlGuardCall(f"guard_{e.name}"), assignable, ensures),
        exceptional=jml.SpecCase(
            jml.JmlNot(jml.JmlGuardCall(f"guard_{e.name}")),
            jml.AssignNothing(), jml.JmlTrue()),
    )
    return guard_spec, run_spec


def translate_invariants(invariants, env) -> jml.JmlPredicate:
    return _conj([_tr_pred(p, env) for _lbl, p in invariants])


def translate_initialisation(actions, env, variable_names) -> jml.JmlPredicate:
    """Post-state-only conjunction; the initialisation has no pre-state."""
    var_names = set(variable_names)
    parts: list[jml.JmlPredicate] = []
    for a in actions:
        node = a.rhs if isinstance(a, eb.BecomesEqual) else a.predicate
        own_prime = a.target.name + "'"
        for ident in sorted(eb.free_identifiers(node), key=lambda i: i.key):
            if not ident.primed and ident.name in var_names:
                raise TranslationError(
                    f"initialisation of '{a.target.name}' reads variable "
                    f"'{ident.name}' (there is no pre-state)", a.span)
            if ident.primed and ident.key != own_prime:
                raise TranslationError(
                    f"'{ident.key}' cannot appear in the initialisation of "
                    f"'{a.target.name}'", a.span)
        t = env[a.target.name]
        if isinstance(a, eb.BecomesEqual):
            if isinstance(a.rhs, eb.EmptySet):
                parts.append(jml.JmlBoolCall(
                    jml.JmlMethodCall(jml.JmlVar(a.target.name), "isEmpty")))
            elif _is_primitive(t):
                parts.append(jml.JmlCmp(
                    "==", jml.JmlVar(a.target.name), _tr_expr(a.rhs, env, t)))
            else:
                parts.append(jml.JmlBoolCall(jml.JmlMethodCall(
                    jml.JmlVar(a.target.name), "equals", (_tr_expr(a.rhs, env, t),))))
        else:
            bap_env = dict(env)
            bap_env[own_prime] = t
            parts.append(jml.JmlExists(
                own_prime, jml_type_of(t),
                jml.JmlAnd(_tr_pred(a.predicate, bap_env),
                           jml.JmlBecomes(a.target.name, own_prime, _is_primitive(t)))))
    return _conj(parts)


def translate_machine(machine: Machine) -> TranslationUnit:
    """Translate a whole machine into a single abstract JML class."""
    typed, _diags = resolve_types(machine)
    for ident, ty in typed.variables:
        if ty is None:
            raise TranslationError(
                f"variable '{ident.name}' has no resolved type", ident.span)
    env = base_type_env(typed)

    trace: list[tuple[str, str]] = []
    carriers = tuple(sorted(typed.carrier_sets))
    for c in carriers:
        trace.append((c, f"model field {c}"))
    fields = tuple(sorted(
        ((ident.name, jml_type_of(ty)) for ident, ty in typed.variables),
        key=lambda f: f[0]))
    for name, _ty in fields:
        trace.append((name, f"model field {name}"))

    invariant = translate_invariants(typed.invariants, env)
    for lbl, _p in typed.invariants:
        trace.append((lbl, "class invariant"))
    initially = translate_initialisation(
        typed.initialisation, env, typed.variable_names())
    for a in typed.initialisation:
        trace.append((a.label, "initially"))

    methods: list[jml.JmlMethodSpec] = []
    for ev in typed.events:
        guard_spec, run_spec = translate_event(ev, env)
        methods.extend((guard_spec, run_spec))
        for lbl, _g in ev.guards:
            trace.append((f"{ev.name}/{lbl}", guard_spec.name))
        for a in ev.actions:
            trace.append((f"{ev.name}/{a.label}", run_spec.name))

    result = jml.JmlClass(
        name=typed.name,
        carriers=carriers,
        model_fields=fields,
        class_invariant=invariant,
        initially=initially,
        methods=tuple(methods),
    )
    return TranslationUnit(source=typed, result=result, trace=tuple(trace))
