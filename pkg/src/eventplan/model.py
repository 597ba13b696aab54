"""Domain ontology, states, grounding and execution semantics.

A state is a closed-world set of ground facts.  Facts are plain tuples
``(predicate, arg1, ..., argN)``.  Predicates declared functional are
single-valued on all arguments but the last, so ``(location pkg x)`` and
``(location pkg y)`` can never coexist: adding one replaces the other.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence, Union

from .errors import (
    ArityError,
    DomainError,
    FunctionalConflict,
    NotApplicable,
    SemanticError,
    TypeMismatch,
    UnknownPredicate,
)

ROOT_TYPE = "object"
NUMBER_TYPE = "number"

Fact = tuple
Var = tuple


@dataclass(frozen=True)
class Decrement:
    """The numeric term ``(- ?var amount)``."""

    var: str
    amount: int

    def __str__(self):
        return f"(- {self.var} {self.amount})"


Term = Union[str, int, Decrement]


def is_variable(term) -> bool:
    return isinstance(term, str) and term.startswith("?")


@dataclass(frozen=True)
class Literal:
    pred: str
    args: tuple = ()
    positive: bool = True
    loc: tuple | None = field(default=None, compare=False, repr=False)

    @property
    def fact(self) -> Fact:
        return (self.pred, *self.args)

    @property
    def is_ground(self) -> bool:
        return not any(is_variable(a) or isinstance(a, Decrement) for a in self.args)

    def negate(self) -> "Literal":
        return Literal(self.pred, self.args, not self.positive, self.loc)

    def substitute(self, binding: Mapping[str, object], floor: int = 0) -> "Literal":
        return Literal(self.pred, tuple(_subst(a, binding, floor) for a in self.args),
                       self.positive, self.loc)

    def variables(self) -> set:
        out = set()
        for a in self.args:
            if is_variable(a):
                out.add(a)
            elif isinstance(a, Decrement):
                out.add(a.var)
        return out

    def __str__(self):
        atom = "(" + " ".join([self.pred, *map(str, self.args)]) + ")"
        return atom if self.positive else f"(not {atom})"


def _subst(term, binding, floor):
    if isinstance(term, Decrement):
        if term.var not in binding:
            return term
        value = binding[term.var]
        if not isinstance(value, int):
            raise TypeMismatch(f"{term} needs an integer binding, got {value!r}")
        result = value - term.amount
        if result < floor:
            raise DomainError(f"{term} evaluates to {result}, below floor {floor}")
        return result
    if is_variable(term):
        return binding.get(term, term)
    return term


def fact_literal(fact: Fact, positive: bool = True) -> Literal:
    return Literal(fact[0], tuple(fact[1:]), positive)


@dataclass(frozen=True)
class ForallEffect:
    """``(forall (?v - type) (when <condition> <literals>))`` inside an add or delete list."""

    var: str
    type: str
    condition: tuple = ()
    literals: tuple = ()
    loc: tuple | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Effects:
    adds: tuple = ()
    dels: tuple = ()

    def __bool__(self):
        return bool(self.adds or self.dels)

    def literals(self):
        for item in (*self.adds, *self.dels):
            if isinstance(item, ForallEffect):
                yield from item.literals
                yield from item.condition
            else:
                yield item


@dataclass(frozen=True)
class Parameter:
    name: str
    type: str


@dataclass(frozen=True)
class OperatorSchema:
    name: str
    params: tuple = ()
    pre: tuple = ()
    duration: int = 0
    effects: Effects = Effects()
    initial: Effects = Effects()
    final: Effects = Effects()
    loc: tuple | None = field(default=None, compare=False, repr=False)

    def effect_sets(self):
        return (self.effects,) if self.duration == 0 else (self.initial, self.final)


@dataclass(frozen=True)
class EventSchema:
    name: str
    params: tuple = ()
    pre: tuple = ()
    effects: Effects = Effects()
    probability: float = 1.0
    duration: int = 0
    loc: tuple | None = field(default=None, compare=False, repr=False)

    def effect_sets(self):
        return (self.effects,)


@dataclass(frozen=True)
class Predicate:
    name: str
    arg_types: tuple = ()
    functional: bool = False

    @property
    def key_len(self) -> int:
        return len(self.arg_types) - 1 if self.functional else len(self.arg_types)


class TypeHierarchy:
    """Types with (possibly several) parents, rooted at ``object``."""

    def __init__(self, parents: Mapping[str, Sequence[str]] | None = None):
        self.parents = {ROOT_TYPE: ()}
        for name, ps in (parents or {}).items():
            if name == ROOT_TYPE:
                continue
            self.parents[name] = tuple(ps) or (ROOT_TYPE,)
        self._check()

    def _check(self):
        for name, ps in self.parents.items():
            for p in ps:
                if p not in self.parents:
                    raise SemanticError(f"type {name!r} has unknown parent {p!r}")
        for name in self.parents:
            if name in self.ancestors(name, strict=True):
                raise SemanticError(f"type {name!r} is its own ancestor")

    @property
    def types(self) -> set:
        return set(self.parents) | {NUMBER_TYPE}

    def ancestors(self, name: str, strict: bool = False) -> set:
        seen, stack = set(), list(self.parents.get(name, ()))
        while stack:
            t = stack.pop()
            if t in seen:
                continue
            seen.add(t)
            if t == name:
                break
            stack.extend(self.parents.get(t, ()))
        if not strict:
            seen.add(name)
        return seen

    def is_subtype(self, sub: str, sup: str) -> bool:
        if sub == NUMBER_TYPE or sup == NUMBER_TYPE:
            return sub == sup
        return sup in self.ancestors(sub)

    def __contains__(self, name):
        return name in self.parents or name == NUMBER_TYPE

    def __eq__(self, other):
        return isinstance(other, TypeHierarchy) and self.parents == other.parents

    def __repr__(self):
        return f"TypeHierarchy({self.parents!r})"


@dataclass(eq=True)
class Domain:
    name: str
    types: TypeHierarchy
    predicates: dict
    operators: dict
    events: dict
    floor: int = 0

    __hash__ = object.__hash__

    @property
    def static_predicates(self) -> frozenset:
        """Predicates that no operator or event ever changes."""
        touched = set()
        for schema in (*self.operators.values(), *self.events.values()):
            for eff in schema.effect_sets():
                for item in (*eff.adds, *eff.dels):
                    if isinstance(item, ForallEffect):
                        touched.update(l.pred for l in item.literals)
                    else:
                        touched.add(item.pred)
        return frozenset(p for p in self.predicates if p not in touched)

    def var_of(self, fact: Fact) -> Var:
        pred = self.predicates.get(fact[0])
        if pred is None:
            raise UnknownPredicate(fact[0])
        return fact[:-1] if pred.functional else fact

    def is_functional(self, pred: str) -> bool:
        p = self.predicates.get(pred)
        if p is None:
            raise UnknownPredicate(pred)
        return p.functional


@dataclass(eq=True)
class Problem:
    name: str
    domain_name: str
    objects: dict
    init: tuple
    goal: tuple

    __hash__ = object.__hash__

    def type_of(self, obj) -> str:
        if isinstance(obj, int) and not isinstance(obj, bool):
            return NUMBER_TYPE
        try:
            return self.objects[obj]
        except KeyError:
            raise TypeMismatch(f"undeclared object {obj!r}") from None


@dataclass(frozen=True)
class State:
    """Closed-world set of ground facts.  ``failed`` marks the terminal null state."""

    facts: frozenset = frozenset()
    failed: bool = False

    def __contains__(self, fact):
        return fact in self.facts

    def value(self, var: Var, functional: bool):
        if self.failed:
            return FAILED
        if not functional:
            return var in self.facts
        n = len(var)
        for f in self.facts:
            if len(f) == n + 1 and f[:n] == var:
                return f[-1]
        return None

    def with_value(self, var: Var, value, functional: bool) -> "State":
        if functional:
            facts = {f for f in self.facts if not (len(f) == len(var) + 1 and f[:len(var)] == var)}
            if value is not None:
                facts.add((*var, value))
        else:
            facts = set(self.facts)
            (facts.add if value else facts.discard)(var)
        return State(frozenset(facts), self.failed)

    def fail(self) -> "State":
        return State(self.facts, True)

    def sorted_facts(self):
        return sorted(self.facts, key=lambda f: tuple(map(str, f)))


class _Failed:
    """The null value carried by every feature once the plan has failed."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "FAILED"

    def __reduce__(self):
        return (_Failed, ())


FAILED = _Failed()


@dataclass(frozen=True)
class GroundEffects:
    """Ground effect set.  Conditional items are ``(condition_literals, fact)``."""

    adds: tuple = ()
    dels: tuple = ()
    cond_adds: tuple = ()
    cond_dels: tuple = ()

    def __bool__(self):
        return bool(self.adds or self.dels or self.cond_adds or self.cond_dels)

    def written_facts(self):
        yield from self.adds
        yield from self.dels
        for _, f in self.cond_adds:
            yield f
        for _, f in self.cond_dels:
            yield f

    def condition_literals(self):
        for cond, _ in (*self.cond_adds, *self.cond_dels):
            yield from cond


@dataclass(frozen=True)
class GroundStep:
    name: str
    args: tuple
    duration: int = field(default=0, compare=False)
    pre: tuple = field(default=(), compare=False)
    effects: GroundEffects = field(default=GroundEffects(), compare=False)
    initial: GroundEffects = field(default=GroundEffects(), compare=False)
    final: GroundEffects = field(default=GroundEffects(), compare=False)

    @property
    def key(self):
        return (self.name, self.args)

    def effect_sets(self):
        return (self.effects,) if self.duration == 0 else (self.initial, self.final)

    def __str__(self):
        return "(" + " ".join([self.name, *map(str, self.args)]) + ")"


@dataclass(frozen=True)
class GroundEvent:
    name: str
    args: tuple
    probability: float = field(default=1.0, compare=False)
    pre: tuple = field(default=(), compare=False)
    effects: GroundEffects = field(default=GroundEffects(), compare=False)

    @property
    def key(self):
        return (self.name, self.args)

    def effect_sets(self):
        return (self.effects,)

    def __str__(self):
        return "(" + " ".join([self.name, *map(str, self.args)]) + ")"


def canonical_key(item):
    return (item.name, tuple(map(str, item.args)))


# --------------------------------------------------------------------------
# grounding


def _check_binding(schema, binding, domain: Domain, problem: Problem):
    names = [p.name for p in schema.params]
    missing = [n for n in names if n not in binding]
    extra = [n for n in binding if n not in names]
    if missing or extra:
        raise ArityError(f"{schema.name}: binding mismatch (missing {missing}, unexpected {extra})")
    for p in schema.params:
        value = binding[p.name]
        vtype = problem.type_of(value)
        if not domain.types.is_subtype(vtype, p.type):
            raise TypeMismatch(f"{schema.name}: {value} is a {vtype}, not a {p.type}")


def _objects_of_type(problem: Problem, domain: Domain, type_name: str):
    return sorted(o for o, t in problem.objects.items() if domain.types.is_subtype(t, type_name))


def _ground_effects(eff: Effects, binding, domain, problem) -> GroundEffects:
    floor = domain.floor
    adds, dels, cadds, cdels = [], [], [], []
    for target, ctarget, items in ((adds, cadds, eff.adds), (dels, cdels, eff.dels)):
        for item in items:
            if isinstance(item, ForallEffect):
                for obj in _objects_of_type(problem, domain, item.type):
                    b = {**binding, item.var: obj}
                    cond = tuple(l.substitute(b, floor) for l in item.condition)
                    for lit in item.literals:
                        ctarget.append((cond, lit.substitute(b, floor).fact))
            else:
                target.append(item.substitute(binding, floor).fact)
    return GroundEffects(tuple(adds), tuple(dels), tuple(cadds), tuple(cdels))


def ground(schema, binding: Mapping[str, object], domain: Domain, problem: Problem):
    """Instantiate an operator or event schema with a complete, type-correct binding."""
    _check_binding(schema, binding, domain, problem)
    binding = dict(binding)
    floor = domain.floor
    args = tuple(binding[p.name] for p in schema.params)
    pre = tuple(l.substitute(binding, floor) for l in schema.pre)
    if isinstance(schema, EventSchema):
        return GroundEvent(schema.name, args, schema.probability, pre,
                           _ground_effects(schema.effects, binding, domain, problem))
    return GroundStep(
        schema.name, args, schema.duration, pre,
        _ground_effects(schema.effects, binding, domain, problem),
        _ground_effects(schema.initial, binding, domain, problem),
        _ground_effects(schema.final, binding, domain, problem),
    )


def _number_range(domain: Domain, problem: Problem):
    ints = [a for lit in problem.init for a in lit.args if isinstance(a, int)]
    hi = max(ints, default=domain.floor)
    return list(range(domain.floor, hi + 1))


def _candidates(param: Parameter, domain, problem, numbers):
    if param.type == NUMBER_TYPE:
        return numbers
    return _objects_of_type(problem, domain, param.type)


def _enumerate(schema, domain, problem, static_facts, statics):
    numbers = _number_range(domain, problem)
    pools = [_candidates(p, domain, problem, numbers) for p in schema.params]
    out = []
    for combo in itertools.product(*pools):
        binding = dict(zip((p.name for p in schema.params), combo))
        try:
            g = ground(schema, binding, domain, problem)
        except DomainError:
            continue
        if all((l.fact in static_facts) == l.positive for l in g.pre if l.pred in statics):
            out.append(g)
    return out


class Grounding:
    """Every static-consistent ground step and event of a (domain, problem) pair."""

    def __init__(self, domain: Domain, problem: Problem):
        self.domain = domain
        self.problem = problem
        self.statics = domain.static_predicates
        init = frozenset(l.fact for l in problem.init)
        self.static_facts = frozenset(f for f in init if f[0] in self.statics)
        self.steps = []
        for name in sorted(domain.operators):
            self.steps.extend(_enumerate(domain.operators[name], domain, problem,
                                         self.static_facts, self.statics))
        self.events = []
        for name in sorted(domain.events):
            self.events.extend(_enumerate(domain.events[name], domain, problem,
                                          self.static_facts, self.statics))
        self.events.sort(key=canonical_key)
        self.steps.sort(key=canonical_key)
        self.step_index = {s.key: s for s in self.steps}

    def dynamic_pre(self, item):
        return tuple(l for l in item.pre if l.pred not in self.statics)


@lru_cache(maxsize=32)
def grounding(domain: Domain, problem: Problem) -> Grounding:
    return Grounding(domain, problem)


def initial_state(problem: Problem) -> State:
    return State(frozenset(l.fact for l in problem.init))


# --------------------------------------------------------------------------
# evaluation and application


def _lit_holds(facts, lit: Literal) -> bool:
    return (lit.fact in facts) == lit.positive


def holds(state: State, formula: Iterable[Literal] | Literal, domain: Domain | None = None) -> bool:
    """Closed-world truth of a ground conjunction (or a single literal)."""
    if isinstance(formula, Literal):
        formula = (formula,)
    if domain is not None:
        for lit in formula:
            if lit.pred not in domain.predicates:
                raise UnknownPredicate(lit.pred)
    if state.failed:
        return False
    facts = state.facts
    return all(_lit_holds(facts, l) for l in formula)


def violated(state: State, formula: Iterable[Literal]) -> tuple:
    return tuple(l for l in formula if not _lit_holds(state.facts, l))


def applicable(state: State, step) -> bool:
    if state.failed:
        return False
    return holds(state, step.pre)


def apply_effects(state: State, eff: GroundEffects, domain: Domain) -> State:
    """Deletes first, then adds; quantified items are matched against the pre-effect state."""
    pre = state.facts
    dels = list(eff.dels) + [f for cond, f in eff.cond_dels if all(_lit_holds(pre, l) for l in cond)]
    adds = list(eff.adds) + [f for cond, f in eff.cond_adds if all(_lit_holds(pre, l) for l in cond)]
    facts = set(pre)
    facts.difference_update(dels)
    assigned = {}
    for f in adds:
        pred = domain.predicates.get(f[0])
        if pred is None:
            raise UnknownPredicate(f[0])
        if pred.functional:
            var = f[:-1]
            if assigned.get(var, f) != f:
                raise FunctionalConflict(f"{var} assigned both {assigned[var][-1]} and {f[-1]}")
            assigned[var] = f
            n = len(var)
            facts = {g for g in facts if not (len(g) == n + 1 and g[:n] == var)}
        facts.add(f)
    return State(frozenset(facts), state.failed)


def apply_initial(state: State, step: GroundStep, domain: Domain) -> State:
    if not applicable(state, step):
        raise NotApplicable(str(step))
    return apply_effects(state, step.effect_sets()[0], domain)


def apply_final(state: State, step: GroundStep, domain: Domain) -> State:
    if step.duration == 0:
        return state
    return apply_effects(state, step.final, domain)


def apply_atomic(state: State, step: GroundStep, domain: Domain) -> State:
    """Apply a step as one atomic action: initial then final effects, no ticks between."""
    return apply_final(apply_initial(state, step, domain), step, domain)


def apply_event(state: State, event: GroundEvent, domain: Domain) -> State:
    return apply_effects(state, event.effects, domain)


def enabled_events(state: State, domain: Domain, problem: Problem) -> list:
    """Ground events whose preconditions hold, in canonical (name, args) order."""
    if state.failed:
        return []
    return [e for e in grounding(domain, problem).events if holds(state, e.pre)]
