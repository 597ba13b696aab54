"""Deterministic goal-regression planner for the event-free problem.

Search is iterative deepening on plan length over regressed goal sets,
pruned with the h_max relaxed-reachability bound, trying relevant ground
operators in lexicographic order.  Durative operators are regressed as
atomic actions.  Every candidate is re-checked by forward execution before
it is returned.
"""
from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .errors import NoPlanFound, Unsolvable
from .model import (
    Domain,
    GroundStep,
    Literal,
    Problem,
    State,
    apply_effects,
    canonical_key,
    grounding,
    holds,
    initial_state,
    violated,
)
from .timeline import Guard, Plan, as_path, force_condition

INF = float("inf")


@dataclass(frozen=True)
class PlannerLimits:
    max_length: int = 20
    max_nodes: int = 2_000_000
    deadline: float | None = None

    def __post_init__(self):
        if self.max_length < 1 or self.max_nodes < 1:
            raise ValueError("planner limits must be positive")
        if self.deadline is not None and self.deadline <= 0:
            raise ValueError("deadline must be positive")


def extra_for(step: GroundStep, extra: Mapping | None) -> tuple:
    """Extra precondition literals for ``step``, keyed by operator name or ``(name, args)``."""
    if not extra:
        return ()
    return tuple(extra.get(step.name, ())) + tuple(extra.get(step.key, ()))


class _Op:
    """Atomic (composed) view of a ground step used for regression."""

    __slots__ = ("step", "pre", "adds", "dels", "cadds", "cdels", "assigns")

    def __init__(self, step: GroundStep, domain: Domain, statics, extra):
        self.step = step
        self.pre = tuple(l for l in (*step.pre, *extra_for(step, extra)))
        adds, dels = set(), set()
        cadds, cdels = [], []
        for eff in step.effect_sets():
            adds -= set(eff.dels)
            dels -= set(eff.adds)
            adds |= set(eff.adds)
            dels |= set(eff.dels)
            cadds.extend(eff.cond_adds)
            cdels.extend(eff.cond_dels)
        self.adds, self.dels = frozenset(adds), frozenset(dels - adds)
        self.cadds, self.cdels = tuple(cadds), tuple(cdels)
        self.assigns = {}
        for f in adds:
            if domain.predicates[f[0]].functional:
                self.assigns[f[:-1]] = f


class _Search:
    def __init__(self, domain: Domain, problem: Problem, start: State, goal, limits: PlannerLimits,
                 extra: Mapping | None):
        self.domain = domain
        self.problem = problem
        self.start = start
        self.limits = limits
        self.extra = extra
        g = grounding(domain, problem)
        self.statics = g.statics
        self.static_facts = g.static_facts
        self.ops = [_Op(s, domain, g.statics, extra) for s in g.steps]
        self.ops = [o for o in self.ops if self._static_ok(o.pre)]
        self.achievers = defaultdict(list)
        for o in self.ops:
            keys = set(o.adds) | {f for _, f in o.cadds}
            keys |= {("-",) + f for f in o.dels} | {("-",) + f for _, f in o.cdels}
            keys |= {("=",) + v for v in o.assigns}
            for k in keys:
                self.achievers[k].append(o)
        self.levels = self._relaxed_levels()
        self.goal = self._normalize(tuple(goal))
        self.nodes = 0
        self.t0 = time.monotonic()

    def _static_ok(self, lits) -> bool:
        return all((l.fact in self.static_facts) == l.positive for l in lits if l.pred in self.statics)

    def _functional(self, fact) -> bool:
        return self.domain.predicates[fact[0]].functional

    def _normalize(self, lits):
        if not self._static_ok(lits):
            return None
        out = frozenset(l for l in lits if l.pred not in self.statics)
        return out if self._consistent(out) else None

    def _consistent(self, goal) -> bool:
        values = {}
        pos = set()
        for l in goal:
            if l.positive:
                pos.add(l.fact)
                if self._functional(l.fact):
                    var = l.fact[:-1]
                    if values.setdefault(var, l.fact) != l.fact:
                        return False
        return not any((not l.positive) and l.fact in pos for l in goal)

    def _relaxed_levels(self):
        level = {f: 0 for f in self.start.facts}
        frontier = True
        k = 0
        while frontier:
            k += 1
            new = {}
            for o in self.ops:
                if all(l.fact in level for l in o.pre if l.positive and l.pred not in self.statics):
                    for f in o.adds:
                        if f not in level:
                            new.setdefault(f, k)
                    for cond, f in o.cadds:
                        if f not in level and all(c.fact in level for c in cond if c.positive):
                            new.setdefault(f, k)
            frontier = bool(new)
            level.update(new)
        return level

    def h(self, goal) -> float:
        best = 0
        for l in goal:
            if l.positive:
                v = self.levels.get(l.fact)
                if v is None:
                    return INF
                best = max(best, v)
        return best

    def satisfied(self, goal) -> bool:
        return holds(self.start, goal)

    def regress(self, goal, op: _Op):
        relevant = False
        new = set()
        for g in goal:
            f = g.fact
            if g.positive:
                if f in op.adds:
                    relevant = True
                    continue
                if self._functional(f):
                    other = op.assigns.get(f[:-1])
                    if other is not None and other != f:
                        return None
                if f in op.dels:
                    return None
                conds = [c for c, h in op.cadds if h == f]
                if conds:
                    relevant = True
                    new.update(conds[0])
                    continue
                for c, h in op.cdels:
                    if h == f and not self._forbid(c, new):
                        return None
                if self._functional(f):
                    for c, h in op.cadds:
                        if h[:-1] == f[:-1] and h != f and not self._forbid(c, new):
                            return None
                new.add(g)
            else:
                if f in op.adds:
                    return None
                if f in op.dels:
                    relevant = True
                    continue
                if self._functional(f) and f[:-1] in op.assigns:
                    relevant = True
                    continue
                conds = [c for c, h in op.cdels if h == f]
                if conds:
                    relevant = True
                    new.update(conds[0])
                    continue
                for c, h in op.cadds:
                    if h == f and not self._forbid(c, new):
                        return None
                new.add(g)
        if not relevant:
            return None
        new.update(op.pre)
        return self._normalize(tuple(new))

    @staticmethod
    def _forbid(cond, new) -> bool:
        if len(cond) != 1:
            return False
        new.add(cond[0].negate())
        return True

    def candidates(self, goal):
        seen = {}
        for g in goal:
            if g.positive:
                keys = [g.fact]
            else:
                keys = [("-",) + g.fact]
                if self._functional(g.fact):
                    keys.append(("=",) + g.fact[:-1])
            for k in keys:
                for o in self.achievers.get(k, ()):
                    seen[o.step.key] = o
        return sorted(seen.values(), key=lambda o: canonical_key(o.step))

    def _tick(self):
        self.nodes += 1
        if self.nodes > self.limits.max_nodes:
            raise NoPlanFound(f"node limit {self.limits.max_nodes} exhausted")
        if self.limits.deadline is not None and time.monotonic() - self.t0 > self.limits.deadline:
            raise NoPlanFound("deadline exceeded")

    def plans(self) -> Iterator[tuple]:
        if self.goal is None or self.h(self.goal) == INF:
            raise Unsolvable("goal unreachable in the relaxed problem")
        emitted = set()
        if self.satisfied(self.goal):
            emitted.add(())
            yield ()
        for bound in range(max(1, int(self.h(self.goal))), self.limits.max_length + 1):
            self.failed = {}
            for suffix in self._dfs(self.goal, bound, (), [self.goal]):
                plan = tuple(reversed(suffix))
                if len(plan) == bound and plan not in emitted and self._verify(plan):
                    emitted.add(plan)
                    yield plan

    def _dfs(self, goal, budget, suffix, ancestors):
        self._tick()
        if self.satisfied(goal):
            yield suffix
            return
        if budget == 0 or self.h(goal) > budget:
            return
        if self.failed.get(goal, -1) >= budget:
            return
        found = False
        for op in self.candidates(goal):
            sub = self.regress(goal, op)
            if sub is None or any(sub >= a for a in ancestors):
                continue
            ancestors.append(sub)
            for plan in self._dfs(sub, budget - 1, suffix + (op.step,), ancestors):
                found = True
                yield plan
            ancestors.pop()
        if not found:
            self.failed[goal] = max(self.failed.get(goal, -1), budget)

    def _verify(self, steps) -> bool:
        state = self.start
        for s in steps:
            if not holds(state, s.pre) or not holds(state, extra_for(s, self.extra)):
                return False
            for eff in s.effect_sets():
                state = apply_effects(state, eff, self.domain)
        return holds(state, self.problem.goal if self.goal_override is None else self.goal_override)

    goal_override = None


def iter_plans(domain: Domain, problem: Problem, state: State | None = None, goal=None,
               limits: PlannerLimits | None = None, extra_preconditions: Mapping | None = None
               ) -> Iterator[Plan]:
    """Successive distinct linear plans, shortest first, in deterministic order."""
    start = initial_state(problem) if state is None else state
    goal = tuple(problem.goal if goal is None else goal)
    search = _Search(domain, problem, start, goal, limits or PlannerLimits(), extra_preconditions)
    search.goal_override = goal
    for steps in search.plans():
        yield Plan(tuple(steps))


def plan(domain: Domain, problem: Problem, limits: PlannerLimits | None = None) -> Plan:
    """A shortest event-free plan for ``problem``."""
    for p in iter_plans(domain, problem, limits=limits):
        return p
    raise NoPlanFound("no plan within the length bound")


def replan(domain: Domain, problem: Problem, state: State, goal=None,
           limits: PlannerLimits | None = None, extra_preconditions: Mapping | None = None) -> Plan:
    """Plan from ``state``; ``extra_preconditions`` adds literals to named operators or ground steps."""
    try:
        for p in iter_plans(domain, problem, state, goal, limits, extra_preconditions):
            return p
    except Unsolvable as exc:
        raise NoPlanFound(str(exc)) from exc
    raise NoPlanFound("no plan within the length bound")


@dataclass(frozen=True)
class Validation:
    ok: bool
    index: int | None = None
    item: object = None
    violated: tuple = ()

    def __bool__(self):
        return self.ok


def validate_path(path, domain: Domain, problem: Problem, start: State | None = None,
                  goal=None, extra_preconditions: Mapping | None = None,
                  force_guards: bool = False) -> Validation:
    path = as_path(path)
    state = initial_state(problem) if start is None else start
    goal = problem.goal if goal is None else goal
    for idx, item in enumerate(path.items):
        if isinstance(item, Guard):
            if holds(state, item.condition) != item.expected:
                if not force_guards:
                    return Validation(False, idx, item, item.condition)
                state = force_condition(state, item.condition, item.expected, domain)
            continue
        pre = (*item.pre, *extra_for(item, extra_preconditions))
        if not holds(state, pre):
            return Validation(False, idx, item, violated(state, pre))
        for eff in item.effect_sets():
            state = apply_effects(state, eff, domain)
    if not holds(state, goal):
        return Validation(False, len(path.items), None, violated(state, goal))
    return Validation(True)


def validate_plan(domain: Domain, problem: Problem, plan: Plan, all_paths: bool = False) -> Validation:
    """Event-free check of ``plan``.

    By default follows the branch sides the simulated state selects.  With
    ``all_paths`` every path is checked, forcing each branch condition to the
    side the path takes.
    """
    if all_paths:
        for path in plan.paths():
            v = validate_path(path, domain, problem, force_guards=True)
            if not v:
                return v
        return Validation(True)
    state = initial_state(problem)
    seg, offset = plan, 0
    while True:
        for i, step in enumerate(seg.steps):
            if not holds(state, step.pre):
                return Validation(False, offset + i, step, violated(state, step.pre))
            for eff in step.effect_sets():
                state = apply_effects(state, eff, domain)
        offset += len(seg.steps)
        if seg.branch is None:
            break
        seg = seg.branch.then if holds(state, seg.branch.condition) else seg.branch.orelse
    if not holds(state, problem.goal):
        return Validation(False, offset, None, violated(state, problem.goal))
    return Validation(True)
