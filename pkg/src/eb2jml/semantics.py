"""Executable finite-universe semantics for machines and their translations.

States map variable names to exact values (integers, finite sets, pairs,
finite relations).  Event and method semantics are state-transition
relations computed by exhaustive enumeration over a configurable finite
universe; all arithmetic is exact, there are no tolerances.

Evaluation can fail (function application at a non-functional point,
unbound identifiers); a guard or predicate whose evaluation fails counts
as unsatisfied for that valuation and the failure is logged.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from . import ebast as eb
from . import jmlast as jml

log = logging.getLogger(__name__)

Value = Union[int, bool, frozenset, tuple]


class EvalError(Exception):
    pass


class ResourceLimitError(Exception):
    def __init__(self, count: int, ceiling: int):
        super().__init__(
            f"enumeration needs {count} work units, exceeding the ceiling of {ceiling}")
        self.count = count
        self.ceiling = ceiling


class Budget:
    """Work meter for relation construction; aborts when the ceiling is hit."""

    __slots__ = ("limit", "spent")

    def __init__(self, limit: int):
        self.limit = limit
        self.spent = 0

    def charge(self, n: int = 1) -> None:
        self.spent += n
        if self.spent > self.limit:
            raise ResourceLimitError(self.spent, self.limit)


def fmt_value(v: Value) -> str:
    if isinstance(v, frozenset):
        return "{" + ", ".join(sorted(fmt_value(x) for x in v)) + "}"
    if isinstance(v, tuple):
        return f"({fmt_value(v[0])} |-> {fmt_value(v[1])})"
    return str(v)


class State(Mapping):
    """An immutable, hashable assignment of values to variable names."""

    __slots__ = ("_d", "_hash")

    def __init__(self, mapping=()):
        d = dict(mapping)
        self._d = d
        self._hash = hash(frozenset(d.items()))

    def __getitem__(self, key):
        return self._d[key]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __eq__(self, other):
        if isinstance(other, State):
            return self._d == other._d
        return NotImplemented

    def __hash__(self):
        return self._hash

    def override(self, changes: Mapping) -> "State":
        d = dict(self._d)
        d.update(changes)
        return State(d)

    def sort_key(self):
        return tuple((k, fmt_value(v)) for k, v in sorted(self._d.items()))

    def __repr__(self):
        inner = ", ".join(f"{k}={fmt_value(v)}" for k, v in sorted(self._d.items()))
        return f"State({inner})"


DEFAULT_CEILING = 10 ** 6
DEFAULT_CARRIER_SIZE = 2


@dataclass
class Universe:
    """Finite value bounds: an integer range plus carrier-set cardinalities."""

    int_lo: int = 0
    int_hi: int = 2
    carriers: dict[str, int] = field(default_factory=dict)
    max_set_card: Optional[int] = None
    ceiling: int = DEFAULT_CEILING
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.int_lo > self.int_hi:
            raise ValueError("empty integer range")
        if self.ceiling < 1:
            raise ValueError("ceiling must be at least 1")
        for name, size in self.carriers.items():
            if size < 1:
                raise ValueError(f"carrier set '{name}' needs cardinality >= 1")

    def with_carriers(self, names: Iterable[str]) -> "Universe":
        """A copy whose carrier table covers ``names`` (defaulting sizes)."""
        carriers = dict(self.carriers)
        for name in names:
            carriers.setdefault(name, DEFAULT_CARRIER_SIZE)
        return Universe(self.int_lo, self.int_hi, carriers,
                        self.max_set_card, self.ceiling)

    def ints(self) -> tuple[int, ...]:
        return tuple(range(self.int_lo, self.int_hi + 1))

    def carrier_elems(self, name: str) -> tuple[int, ...]:
        if name not in self.carriers:
            raise EvalError(f"carrier set '{name}' has no configured cardinality")
        return tuple(range(1, self.carriers[name] + 1))

    def all_ints(self) -> tuple[int, ...]:
        """Every atomic value: the integer range plus all carrier elements."""
        out = set(self.ints())
        for name in self.carriers:
            out.update(self.carrier_elems(name))
        return tuple(sorted(out))

    def _subsets(self, base: tuple[Value, ...]) -> tuple[frozenset, ...]:
        if 2 ** len(base) > self.ceiling:
            raise ResourceLimitError(2 ** len(base), self.ceiling)
        subsets = []
        for mask in range(2 ** len(base)):
            picked = frozenset(
                base[i] for i in range(len(base)) if mask >> i & 1)
            if self.max_set_card is not None and len(picked) > self.max_set_card:
                continue
            subsets.append(picked)
        return tuple(subsets)

    def values_of_type(self, t: eb.EbType) -> tuple[Value, ...]:
        key = ("eb", t)
        if key not in self._cache:
            self._cache[key] = self._compute_eb(t)
        return self._cache[key]

    def _compute_eb(self, t: eb.EbType) -> tuple[Value, ...]:
        if isinstance(t, eb.IntType):
            return self.ints()
        if isinstance(t, eb.CarrierType):
            return self.carrier_elems(t.set_name)
        if isinstance(t, eb.SetType):
            if t.elem is None:
                raise EvalError("set type with undetermined element type")
            return self._subsets(self.values_of_type(t.elem))
        if isinstance(t, eb.RelType):
            if t.dom is None or t.ran is None:
                raise EvalError("relation type with undetermined element types")
            pairs = tuple(itertools.product(
                self.values_of_type(t.dom), self.values_of_type(t.ran)))
            return self._subsets(pairs)
        raise EvalError(f"cannot enumerate values of {t!r}")

    def values_of_jml_type(self, t: jml.JmlType) -> tuple[Value, ...]:
        key = ("jml", t)
        if key not in self._cache:
            self._cache[key] = self._compute_jml(t)
        return self._cache[key]

    def _compute_jml(self, t: jml.JmlType) -> tuple[Value, ...]:
        if isinstance(t, jml.JInt):
            return self.all_ints()
        if isinstance(t, jml.JSet):
            return self._subsets(self.values_of_jml_type(t.elem))
        if isinstance(t, jml.JRel):
            pairs = tuple(itertools.product(
                self.values_of_jml_type(t.dom), self.values_of_jml_type(t.ran)))
            return self._subsets(pairs)
        raise EvalError(f"cannot enumerate values of {t!r}")


def enumerate_states(variables, u: Universe) -> tuple[State, ...]:
    """All type-respecting total assignments to the machine variables."""
    names = []
    domains = []
    total = 1
    for ident, ty in variables:
        if ty is None:
            raise EvalError(f"variable '{ident.name}' has no resolved type")
        vals = u.values_of_type(ty)
        names.append(ident.name)
        domains.append(vals)
        total *= len(vals)
    if total > u.ceiling:
        raise ResourceLimitError(total, u.ceiling)
    return tuple(
        State(zip(names, combo)) for combo in itertools.product(*domains))


# --- Event-B evaluation ---------------------------------------------------

def _as_set(v: Value, what: str) -> frozenset:
    if not isinstance(v, frozenset):
        raise EvalError(f"{what} needs a set value, got {fmt_value(v)}")
    return v


def _as_rel(v: Value, what: str) -> frozenset:
    s = _as_set(v, what)
    for item in s:
        if not (isinstance(item, tuple) and len(item) == 2):
            raise EvalError(f"{what} needs a relation value")
    return s


def _as_int(v: Value, what: str) -> int:
    if not isinstance(v, int) or isinstance(v, bool):
        raise EvalError(f"{what} needs an integer value, got {fmt_value(v)}")
    return v


def eval_eb_expr(e: eb.Expr, state: Mapping, env: Mapping, u: Universe) -> Value:
    if isinstance(e, eb.IntLit):
        return e.value
    if isinstance(e, eb.Ref):
        key = e.ident.key
        if key in env:
            return env[key]
        if key in state:
            return state[key]
        if not e.ident.primed and key in u.carriers:
            return frozenset(u.carrier_elems(key))
        raise EvalError(f"unbound identifier '{key}'")
    if isinstance(e, eb.EmptySet):
        return frozenset()
    if isinstance(e, eb.IntSet):
        return frozenset(u.all_ints())
    if isinstance(e, eb.SetEnum):
        return frozenset(eval_eb_expr(i, state, env, u) for i in e.items)
    if isinstance(e, eb.UnOp):
        r = _as_rel(eval_eb_expr(e.operand, state, env, u), e.op)
        if e.op == "dom":
            return frozenset(x for x, _y in r)
        return frozenset(y for _x, y in r)
    if isinstance(e, eb.BinOp):
        return _eval_eb_binop(e, state, env, u)
    raise EvalError(f"cannot evaluate {type(e).__name__}")


def _eval_eb_binop(e: eb.BinOp, state, env, u) -> Value:
    op = e.op
    left = eval_eb_expr(e.left, state, env, u)
    right = eval_eb_expr(e.right, state, env, u)
    if op == "union":
        return _as_set(left, "union") | _as_set(right, "union")
    if op == "inter":
        return _as_set(left, "intersection") & _as_set(right, "intersection")
    if op == "diff":
        return _as_set(left, "difference") - _as_set(right, "difference")
    if op == "domsub":
        s = _as_set(left, "domain subtraction")
        return frozenset(p for p in _as_rel(right, "domain subtraction")
                         if p[0] not in s)
    if op == "domres":
        s = _as_set(left, "domain restriction")
        return frozenset(p for p in _as_rel(right, "domain restriction")
                         if p[0] in s)
    if op == "cross":
        return frozenset(itertools.product(
            _as_set(left, "cartesian product"), _as_set(right, "cartesian product")))
    if op == "maplet":
        return (left, right)
    if op == "image":
        s = _as_set(right, "image")
        return frozenset(y for x, y in _as_rel(left, "image") if x in s)
    if op == "apply":
        matches = {y for x, y in _as_rel(left, "application") if x == right}
        if len(matches) != 1:
            raise EvalError(f"apply undefined at {fmt_value(right)}")
        return next(iter(matches))
    if op == "add":
        return _as_int(left, "+") + _as_int(right, "+")
    if op == "sub":
        return _as_int(left, "-") - _as_int(right, "-")
    if op == "mul":
        return _as_int(left, "*") * _as_int(right, "*")
    raise EvalError(f"cannot evaluate operator '{op}'")


def _functional(r: frozenset) -> bool:
    return len({x for x, _y in r}) == len(r)


def eb_pred_holds(p: eb.Predicate, state: Mapping, env: Mapping, u: Universe) -> bool:
    """Exact truth value of a predicate; raises EvalError when undefined."""
    if isinstance(p, eb.BTrue):
        return True
    if isinstance(p, eb.And):
        return eb_pred_holds(p.left, state, env, u) and \
            eb_pred_holds(p.right, state, env, u)
    if isinstance(p, eb.Or):
        return eb_pred_holds(p.left, state, env, u) or \
            eb_pred_holds(p.right, state, env, u)
    if isinstance(p, eb.Not):
        return not eb_pred_holds(p.operand, state, env, u)
    if isinstance(p, eb.Cmp):
        if p.op == "in" and isinstance(p.right, eb.RelSpace):
            return _relspace_holds(p.left, p.right, state, env, u)
        left = eval_eb_expr(p.left, state, env, u)
        right = eval_eb_expr(p.right, state, env, u)
        if p.op == "eq":
            return left == right
        if p.op == "neq":
            return left != right
        if p.op == "in":
            return left in _as_set(right, "membership")
        if p.op == "subset":
            return _as_set(left, "subset") <= _as_set(right, "subset")
        if p.op == "lt":
            return _as_int(left, "<") < _as_int(right, "<")
        if p.op == "le":
            return _as_int(left, "<=") <= _as_int(right, "<=")
    raise EvalError(f"cannot evaluate {type(p).__name__}")


def _relspace_holds(member: eb.Expr, rs: eb.RelSpace, state, env, u) -> bool:
    r = _as_rel(eval_eb_expr(member, state, env, u), "relation membership")
    s = _as_set(eval_eb_expr(rs.left, state, env, u), "relation membership")
    t = _as_set(eval_eb_expr(rs.right, state, env, u), "relation membership")
    dom = frozenset(x for x, _y in r)
    ran = frozenset(y for _x, y in r)
    if rs.arrow == "<->":
        return dom <= s and ran <= t
    if rs.arrow == "-->":
        return _functional(r) and dom == s and ran <= t
    if rs.arrow == "-->>":
        return _functional(r) and dom == s and ran == t
    if rs.arrow == "<<->>":
        return dom == s and ran == t
    raise EvalError(f"unknown relation arrow '{rs.arrow}'")


# --- Event-B transition relations ------------------------------------------

def _param_valuations(params, u: Universe):
    names = [ident.name for ident, _ty in params]
    domains = [u.values_of_type(ty) for _ident, ty in params]
    for combo in itertools.product(*domains):
        yield dict(zip(names, combo))


def _guards_hold(guards, state, env, u) -> bool:
    try:
        return all(eb_pred_holds(g, state, env, u) for _lbl, g in guards)
    except EvalError as exc:
        log.debug("guard evaluation failed (%s); treated as unsatisfied", exc)
        return False


def _action_assignments(actions, state, env, var_types, u: Universe, budget: Budget):
    """All simultaneous result assignments for the actions at one valuation."""
    per_action: list[list[tuple[str, Value]]] = []
    for act in actions:
        target = act.target.name
        if isinstance(act, eb.BecomesEqual):
            try:
                val = eval_eb_expr(act.rhs, state, env, u)
            except EvalError as exc:
                log.debug("action %s failed (%s); no transition", act.label, exc)
                return
            per_action.append([(target, val)])
        else:
            prime = target + "'"
            choices = []
            for y in u.values_of_type(var_types[target]):
                budget.charge()
                bap_env = dict(env)
                bap_env[prime] = y
                try:
                    if eb_pred_holds(act.predicate, state, bap_env, u):
                        choices.append((target, y))
                except EvalError as exc:
                    log.debug("action %s failed at %s (%s)",
                              act.label, fmt_value(y), exc)
            if not choices:
                return
            per_action.append(choices)
    for combo in itertools.product(*per_action):
        yield dict(combo)


def _invariant_checker(invariant, u: Universe):
    cache: dict[State, bool] = {}

    def holds(s: State) -> bool:
        if s not in cache:
            try:
                cache[s] = eb_pred_holds(invariant, s, {}, u)
            except EvalError as exc:
                log.debug("invariant evaluation failed (%s); treated as false", exc)
                cache[s] = False
        return cache[s]

    return holds


def _eb_event_parts(event, invariant, variables, u, budget):
    var_types = {ident.name: ty for ident, ty in variables}
    allowed = {ident.name: frozenset(u.values_of_type(ty))
               for ident, ty in variables}
    states = enumerate_states(variables, u)
    inv_holds = _invariant_checker(invariant, u)
    core: set[tuple[State, State]] = set()
    stutter: set[tuple[State, State]] = set()
    for a in states:
        sat_envs = []
        for env in _param_valuations(event.params, u):
            budget.charge()
            if _guards_hold(event.guards, a, env, u):
                sat_envs.append(env)
        if not sat_envs:
            # the guard is unsatisfiable at a: only the stuttering pair
            stutter.add((a, a))
            continue
        if not inv_holds(a):
            continue
        for env in sat_envs:
            for assignment in _action_assignments(
                    event.actions, a, env, var_types, u, budget):
                budget.charge()
                if any(val not in allowed[name] for name, val in assignment.items()):
                    continue  # the transition leaves the bounded universe
                b = a.override(assignment)
                if inv_holds(b):
                    core.add((a, b))
    return frozenset(core), frozenset(stutter), inv_holds


def eb_event_rel(event, invariant, variables, u: Universe, *,
                 stutter_requires_inv: bool = False,
                 budget: Optional[Budget] = None) -> frozenset:
    """The transition relation of an event under the machine invariant.

    A pair (a, b) is included when the invariant holds at a and b, some
    parameter valuation satisfies every guard at a, and some after-value
    choice satisfies every action, with b equal to a overridden by the
    assigned values; or, when no parameter valuation satisfies the guards
    at a, the stuttering pair (a, a).  The stuttering branch carries no
    invariant conjunct; ``stutter_requires_inv=True`` computes the variant
    that adds one (used for sensitivity reporting).
    """
    budget = budget if budget is not None else Budget(u.ceiling)
    core, stutter, inv_holds = _eb_event_parts(event, invariant, variables, u, budget)
    if stutter_requires_inv:
        stutter = frozenset(p for p in stutter if inv_holds(p[0]))
    return core | stutter


def eb_event_rel_variants(event, invariant, variables, u: Universe,
                          budget: Optional[Budget] = None) -> tuple[frozenset, frozenset]:
    """(literal, invariant-constrained-stutter) relations in one pass."""
    budget = budget if budget is not None else Budget(u.ceiling)
    core, stutter, inv_holds = _eb_event_parts(event, invariant, variables, u, budget)
    strict = frozenset(p for p in stutter if inv_holds(p[0]))
    return core | stutter, core | strict


def eb_assg_rel(actions, invariant, variables, u: Universe,
                budget: Optional[Budget] = None) -> frozenset:
    """Unguarded simultaneous-substitution relation (no stuttering branch)."""
    budget = budget if budget is not None else Budget(u.ceiling)
    ev = eb.Event(name="_assg", params=(), guards=(), actions=tuple(actions))
    core, _stutter, _inv = _eb_event_parts(ev, invariant, variables, u, budget)
    return core


def eb_init_states(init_actions, invariant, variables, u: Universe,
                   budget: Optional[Budget] = None) -> frozenset:
    """Post-states reachable by the initialisation, filtered by the invariant."""
    budget = budget if budget is not None else Budget(u.ceiling)
    var_types = {ident.name: ty for ident, ty in variables}
    allowed = {ident.name: frozenset(u.values_of_type(ty))
               for ident, ty in variables}
    inv_holds = _invariant_checker(invariant, u)
    empty = State()
    out = set()
    for assignment in _action_assignments(
            init_actions, empty, {}, var_types, u, budget):
        budget.charge()
        if any(val not in allowed[name] for name, val in assignment.items()):
            continue
        b = State(assignment)
        if inv_holds(b):
            out.add(b)
    return frozenset(out)


# --- JML evaluation --------------------------------------------------------

def eval_jml_expr(e: jml.JmlExpr, pre: Mapping, state: Mapping, env: Mapping,
                  u: Universe, cache: Optional[dict] = None) -> Value:
    """Evaluate with lookups in ``state``; \\old subterms switch to ``pre``."""
    if isinstance(e, jml.JmlIntLit):
        return e.value
    if isinstance(e, jml.JmlVar):
        if e.name in env:
            return env[e.name]
        if e.name in state:
            return state[e.name]
        if e.name in u.carriers:
            return frozenset(u.carrier_elems(e.name))
        raise EvalError(f"unbound identifier '{e.name}'")
    if isinstance(e, jml.JmlOldExpr):
        if cache is not None:
            key = (id(e), pre, frozenset(env.items()))
            if key not in cache:
                cache[key] = eval_jml_expr(e.expr, pre, pre, env, u, cache)
            return cache[key]
        return eval_jml_expr(e.expr, pre, pre, env, u, cache)
    if isinstance(e, jml.JmlMethodCall):
        return _eval_jml_call(e, pre, state, env, u, cache)
    if isinstance(e, jml.JmlCross):
        left = _as_set(eval_jml_expr(e.left, pre, state, env, u, cache), "cross")
        right = _as_set(eval_jml_expr(e.right, pre, state, env, u, cache), "cross")
        return frozenset(itertools.product(left, right))
    if isinstance(e, jml.JmlNewSet):
        return frozenset(
            eval_jml_expr(i, pre, state, env, u, cache) for i in e.items)
    if isinstance(e, jml.JmlNewRelation):
        return frozenset(
            (eval_jml_expr(a, pre, state, env, u, cache),
             eval_jml_expr(b, pre, state, env, u, cache)) for a, b in e.pairs)
    if isinstance(e, jml.JmlNewPair):
        return (eval_jml_expr(e.left, pre, state, env, u, cache),
                eval_jml_expr(e.right, pre, state, env, u, cache))
    if isinstance(e, jml.JmlArith):
        left = _as_int(eval_jml_expr(e.left, pre, state, env, u, cache), e.op)
        right = _as_int(eval_jml_expr(e.right, pre, state, env, u, cache), e.op)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        return left * right
    raise EvalError(f"cannot evaluate {type(e).__name__}")


def _eval_jml_call(e: jml.JmlMethodCall, pre, state, env, u, cache) -> Value:
    recv = eval_jml_expr(e.recv, pre, state, env, u, cache)
    args = [eval_jml_expr(a, pre, state, env, u, cache) for a in e.args]
    m = e.method
    if m == "has":
        return args[0] in _as_set(recv, "has")
    if m == "isSubset":
        return _as_set(recv, "isSubset") <= _as_set(args[0], "isSubset")
    if m == "equals":
        return recv == args[0]
    if m == "isEmpty":
        return len(_as_set(recv, "isEmpty")) == 0
    if m == "isaFunction":
        return _functional(_as_rel(recv, "isaFunction"))
    if m == "union":
        return _as_set(recv, "union") | _as_set(args[0], "union")
    if m == "intersection":
        return _as_set(recv, "intersection") & _as_set(args[0], "intersection")
    if m == "difference":
        return _as_set(recv, "difference") - _as_set(args[0], "difference")
    if m == "domainSubtraction":
        s = _as_set(args[0], "domainSubtraction")
        return frozenset(p for p in _as_rel(recv, "domainSubtraction")
                         if p[0] not in s)
    if m == "domainRestriction":
        s = _as_set(args[0], "domainRestriction")
        return frozenset(p for p in _as_rel(recv, "domainRestriction")
                         if p[0] in s)
    if m == "image":
        s = _as_set(args[0], "image")
        return frozenset(y for x, y in _as_rel(recv, "image") if x in s)
    if m == "apply":
        matches = {y for x, y in _as_rel(recv, "apply") if x == args[0]}
        if len(matches) != 1:
            raise EvalError(f"apply undefined at {fmt_value(args[0])}")
        return next(iter(matches))
    if m == "domain":
        return frozenset(x for x, _y in _as_rel(recv, "domain"))
    if m == "range":
        return frozenset(y for _x, y in _as_rel(recv, "range"))
    raise EvalError(f"unknown method '{m}'")


def jml_pred_holds(p: jml.JmlPredicate, pre: State, post: State, env: Mapping,
                   u: Universe, cache: Optional[dict] = None) -> bool:
    """Truth of a JML predicate over a (pre, post) state pair."""
    return _jml_holds(p, pre, post, env, u, cache)


def _jml_holds(p, pre, state, env, u, cache) -> bool:
    if isinstance(p, jml.JmlTrue):
        return True
    if isinstance(p, jml.JmlFalse):
        return False
    if isinstance(p, jml.JmlAnd):
        return _jml_holds(p.left, pre, state, env, u, cache) and \
            _jml_holds(p.right, pre, state, env, u, cache)
    if isinstance(p, jml.JmlOr):
        return _jml_holds(p.left, pre, state, env, u, cache) or \
            _jml_holds(p.right, pre, state, env, u, cache)
    if isinstance(p, jml.JmlNot):
        return not _jml_holds(p.operand, pre, state, env, u, cache)
    if isinstance(p, jml.JmlParen):
        return _jml_holds(p.operand, pre, state, env, u, cache)
    if isinstance(p, jml.JmlOld):
        if cache is not None:
            key = (id(p), pre, frozenset(env.items()))
            if key not in cache:
                cache[key] = _jml_holds(p.operand, pre, pre, env, u, cache)
            return cache[key]
        return _jml_holds(p.operand, pre, pre, env, u, cache)
    if isinstance(p, jml.JmlExists):
        for y in u.values_of_jml_type(p.ty):
            inner = dict(env)
            inner[p.var] = y
            try:
                if _jml_holds(p.body, pre, state, inner, u, cache):
                    return True
            except EvalError as exc:
                log.debug("witness %s failed (%s)", fmt_value(y), exc)
        return False
    if isinstance(p, jml.JmlBecomes):
        if p.var not in state:
            raise EvalError(f"unbound identifier '{p.var}'")
        if p.primed not in env:
            raise EvalError(f"unbound after-value '{p.primed}'")
        return state[p.var] == env[p.primed]
    if isinstance(p, jml.JmlCmp):
        left = eval_jml_expr(p.left, pre, state, env, u, cache)
        right = eval_jml_expr(p.right, pre, state, env, u, cache)
        if p.op == "==":
            return left == right
        if p.op == "!=":
            return left != right
        if p.op == "<":
            return _as_int(left, "<") < _as_int(right, "<")
        if p.op == "<=":
            return _as_int(left, "<=") <= _as_int(right, "<=")
        raise EvalError(f"unknown comparison '{p.op}'")
    if isinstance(p, jml.JmlBoolCall):
        v = eval_jml_expr(p.call, pre, state, env, u, cache)
        if not isinstance(v, bool):
            raise EvalError(f"method '{p.call.method}' is not boolean-valued")
        return v
    if isinstance(p, jml.JmlGuardCall):
        raise EvalError(
            f"guard method call '{p.method}()' must be inlined before evaluation")
    raise EvalError(f"cannot evaluate {type(p).__name__}")


def eval_expr(e, pre, post, env, u: Universe) -> Value:
    """Evaluate either language's expression over (pre, post) states."""
    if isinstance(e, eb.Expr):
        return eval_eb_expr(e, pre, env or {}, u)
    target = post if post is not None else pre
    return eval_jml_expr(e, pre, target, env or {}, u)


# --- JML transition relations ----------------------------------------------

def inline_guard_calls(p: jml.JmlPredicate,
                       guard_spec: jml.JmlMethodSpec) -> jml.JmlPredicate:
    """Replace calls of the guard method by its ensures right-hand side.

    The guard method is pure and its postcondition is an iff, so inlining
    the quantified guard predicate is exact.
    """
    if isinstance(p, jml.JmlGuardCall):
        if p.method == guard_spec.name:
            return guard_spec.normal.ensures
        return p
    if isinstance(p, jml.JmlNot):
        return jml.JmlNot(inline_guard_calls(p.operand, guard_spec))
    if isinstance(p, jml.JmlParen):
        return jml.JmlParen(inline_guard_calls(p.operand, guard_spec))
    if isinstance(p, jml.JmlOld):
        return jml.JmlOld(inline_guard_calls(p.operand, guard_spec))
    if isinstance(p, jml.JmlAnd):
        return jml.JmlAnd(inline_guard_calls(p.left, guard_spec),
                          inline_guard_calls(p.right, guard_spec))
    if isinstance(p, jml.JmlOr):
        return jml.JmlOr(inline_guard_calls(p.left, guard_spec),
                         inline_guard_calls(p.right, guard_spec))
    if isinstance(p, jml.JmlExists):
        return jml.JmlExists(p.var, p.ty,
                             inline_guard_calls(p.body, guard_spec))
    return p


def _frame_names(assignable, var_names: tuple[str, ...]) -> tuple[str, ...]:
    if isinstance(assignable, jml.AssignNothing):
        return ()
    if isinstance(assignable, jml.AssignEverything):
        return var_names
    return tuple(n for n in assignable.names if n in var_names)


def _agree_outside(a: State, b: State, frame, var_names) -> bool:
    frame_set = set(frame)
    return all(a[v] == b[v] for v in var_names if v not in frame_set)


def _jml_invariant_checker(invariant, u, cache):
    memo: dict[State, bool] = {}

    def holds(s: State) -> bool:
        if s not in memo:
            try:
                memo[s] = _jml_holds(invariant, s, s, {}, u, cache)
            except EvalError as exc:
                log.debug("class invariant failed (%s); treated as false", exc)
                memo[s] = False
        return memo[s]

    return holds


def jml_method_rel(run_spec: jml.JmlMethodSpec, invariant: jml.JmlPredicate,
                   guard_spec: jml.JmlMethodSpec, variables, u: Universe,
                   budget: Optional[Budget] = None) -> frozenset:
    """The transition relation admitted by a translated run method.

    A pair (a, b) is in the relation when the class invariant holds at both
    states and, for each specification case whose requires clause holds in
    the pre-state, the ensures clause holds over (a, b) and b agrees with a
    outside the case's assignable set.  Guard-method calls in requires
    clauses are resolved by inlining the guard predicate.
    """
    budget = budget if budget is not None else Budget(u.ceiling)
    cache: dict = {}
    cases = [(inline_guard_calls(run_spec.normal.requires, guard_spec),
              run_spec.normal)]
    if run_spec.exceptional is not None:
        cases.append((inline_guard_calls(run_spec.exceptional.requires, guard_spec),
                      run_spec.exceptional))

    states = enumerate_states(variables, u)
    var_names = tuple(ident.name for ident, _ty in variables)
    domains = {ident.name: u.values_of_type(ty) for ident, ty in variables}
    inv_holds = _jml_invariant_checker(invariant, u, cache)

    rel: set[tuple[State, State]] = set()
    for a in states:
        if not inv_holds(a):
            continue
        active = []
        for req, case in cases:
            try:
                if _jml_holds(req, a, a, {}, u, cache):
                    active.append(case)
            except EvalError as exc:
                log.debug("requires evaluation failed (%s); case inactive", exc)
        candidates = _candidates(a, active, states, var_names, domains)
        for b in candidates:
            budget.charge()
            if not inv_holds(b):
                continue
            ok = True
            for case in active:
                frame = _frame_names(case.assignable, var_names)
                if not _agree_outside(a, b, frame, var_names):
                    ok = False
                    break
                try:
                    if not _jml_holds(case.ensures, a, b, {}, u, cache):
                        ok = False
                        break
                except EvalError as exc:
                    log.debug("ensures evaluation failed (%s)", exc)
                    ok = False
                    break
            if ok:
                rel.add((a, b))
    return frozenset(rel)


def _candidates(a: State, active, states, var_names, domains):
    """Post-state candidates: all states reachable within the tightest frame."""
    if not active:
        return states
    frames = [_frame_names(case.assignable, var_names) for case in active]
    tight = min(frames, key=len)
    if not tight:
        return (a,)
    if len(tight) == len(var_names):
        return states
    changing = [(name, domains[name]) for name in tight]
    names = [name for name, _d in changing]
    return tuple(
        a.override(dict(zip(names, combo)))
        for combo in itertools.product(*(d for _n, d in changing)))


def jml_initially_states(initially: jml.JmlPredicate, invariant: jml.JmlPredicate,
                         variables, u: Universe,
                         budget: Optional[Budget] = None) -> frozenset:
    """States satisfying the initially clause and the class invariant."""
    budget = budget if budget is not None else Budget(u.ceiling)
    cache: dict = {}
    out = set()
    for b in enumerate_states(variables, u):
        budget.charge()
        try:
            if _jml_holds(initially, b, b, {}, u, cache) and \
                    _jml_holds(invariant, b, b, {}, u, cache):
                out.add(b)
        except EvalError as exc:
            log.debug("initially evaluation failed at %r (%s)", b, exc)
    return frozenset(out)


def guard_holds(guard_spec: jml.JmlMethodSpec, state: State, u: Universe) -> bool:
    """Whether the translated guard is satisfied in a state (pre = post)."""
    try:
        return _jml_holds(guard_spec.normal.ensures, state, state, {}, u, {})
    except EvalError:
        return False
