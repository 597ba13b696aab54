"""Plan trees, the (time, stage) schedule and the nominal tick trajectory.

A :class:`Plan` is a segment of ground steps optionally ending in a
:class:`Branch`.  Branch convention: ``condition`` describes the alternate,
event-produced situation; ``then`` continues from it and ``orelse`` is the
original continuation.  Linearising a plan yields one path per leaf, where
each branch point becomes a :class:`Guard` item recording which side was
taken.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .errors import InvalidPlan, PositionOutOfRange
from .model import (
    Domain,
    GroundStep,
    Literal,
    Problem,
    State,
    apply_effects,
    fact_literal,
    holds,
    initial_state,
    violated,
)


@dataclass(frozen=True)
class Branch:
    condition: tuple
    then: "Plan"
    orelse: "Plan"


@dataclass(frozen=True)
class Plan:
    steps: tuple = ()
    branch: Branch | None = None

    @property
    def is_linear(self) -> bool:
        return self.branch is None

    def segment(self, address: Sequence[bool]) -> "Plan":
        seg = self
        for took_then in address:
            if seg.branch is None:
                raise PositionOutOfRange(f"no branch at {tuple(address)}")
            seg = seg.branch.then if took_then else seg.branch.orelse
        return seg

    def replace_segment(self, address: Sequence[bool], new: "Plan") -> "Plan":
        if not address:
            return new
        if self.branch is None:
            raise PositionOutOfRange(f"no branch at {tuple(address)}")
        head, rest = address[0], address[1:]
        b = self.branch
        if head:
            b = Branch(b.condition, b.then.replace_segment(rest, new), b.orelse)
        else:
            b = Branch(b.condition, b.then, b.orelse.replace_segment(rest, new))
        return Plan(self.steps, b)

    def paths(self) -> list:
        """Every root-to-leaf path, ``then`` sides first."""
        out = []
        self._collect((), (), (), out)
        return out

    def _collect(self, address, items, origins, out):
        items = items + self.steps
        origins = origins + tuple((address, i) for i in range(len(self.steps)))
        if self.branch is None:
            out.append(LinearPath(items, origins))
            return
        at = (address, len(self.steps))
        for took in (True, False):
            sub = self.branch.then if took else self.branch.orelse
            sub._collect(address + (took,), items + (Guard(self.branch.condition, took),),
                         origins + (at,), out)

    def all_steps(self):
        yield from self.steps
        if self.branch is not None:
            yield from self.branch.then.all_steps()
            yield from self.branch.orelse.all_steps()

    def count_branches(self) -> int:
        if self.branch is None:
            return 0
        return 1 + self.branch.then.count_branches() + self.branch.orelse.count_branches()


@dataclass(frozen=True)
class Guard:
    """Branch point on a linear path: the path continues only if the condition's truth equals ``expected``."""

    condition: tuple
    expected: bool

    def __str__(self):
        cond = " ".join(map(str, self.condition)) or "true"
        return f"[{'if' if self.expected else 'unless'} {cond}]"


@dataclass(frozen=True)
class LinearPath:
    items: tuple
    origins: tuple = field(default=(), compare=False)

    @property
    def steps(self):
        return tuple(i for i in self.items if isinstance(i, GroundStep))

    @property
    def guards(self):
        return tuple(i for i in self.items if isinstance(i, Guard))

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)


def linear(steps: Sequence[GroundStep]) -> Plan:
    return Plan(tuple(steps))


def as_path(plan_or_path) -> LinearPath:
    if isinstance(plan_or_path, LinearPath):
        return plan_or_path
    if isinstance(plan_or_path, Plan):
        if not plan_or_path.is_linear:
            raise InvalidPlan("expected a linear plan")
        return plan_or_path.paths()[0]
    return LinearPath(tuple(plan_or_path),
                      tuple(((), i) for i in range(len(plan_or_path))))


# --------------------------------------------------------------------------
# schedule


@dataclass(frozen=True)
class ScheduledStep:
    step: GroundStep
    time: int
    stage: int
    index: int
    end_time: int
    end_stage: int

    @property
    def ticks(self) -> range:
        return range(self.time, self.end_time) if self.step.duration else range(0)


@dataclass(frozen=True)
class Schedule:
    entries: tuple
    total_duration: int
    end: tuple = (0, 0)
    guard_coords: tuple = ()

    def step_spanning(self, tick: int):
        for e in self.entries:
            if tick in e.ticks:
                return e
        return None


def schedule(path) -> Schedule:
    """Assign (time, stage) coordinates: durative steps advance time and reset stage."""
    path = as_path(path)
    t = s = 0
    entries, guards = [], []
    for idx, item in enumerate(path.items):
        if isinstance(item, Guard):
            guards.append((idx, t, s))
            continue
        t0, s0 = t, s
        if item.duration:
            t, s = t + item.duration, 0
        else:
            s += 1
        entries.append(ScheduledStep(item, t0, s0, idx, t, s))
    return Schedule(tuple(entries), t, (t, s), tuple(guards))


# --------------------------------------------------------------------------
# nominal (event-free) execution


def force_condition(state: State, condition: Sequence[Literal], expected: bool, domain: Domain) -> State:
    """Smallest edit of ``state`` making the condition's truth equal ``expected``."""
    if holds(state, condition) == expected:
        return state
    if expected:
        for lit in condition:
            if holds(state, lit):
                continue
            functional = domain.is_functional(lit.pred)
            var = domain.var_of(lit.fact)
            if lit.positive:
                state = state.with_value(var, lit.fact[-1] if functional else True, functional)
            else:
                state = state.with_value(var, None if functional else False, functional)
        return state
    lit = condition[0]
    functional = domain.is_functional(lit.pred)
    var = domain.var_of(lit.fact)
    if lit.positive:
        return state.with_value(var, None if functional else False, functional)
    return state.with_value(var, lit.fact[-1] if functional else True, functional)


@dataclass
class NominalRun:
    """Event-free execution of a linear path.

    ``before[i]`` is the state when item ``i`` is reached; ``ticks[t]`` the state
    at the start of tick ``t`` (after the spanning step's initial effects).
    """

    before: list
    ticks: list
    final: State
    ok: bool
    failed_at: int | None = None
    violated: tuple = ()


def nominal_run(path, domain: Domain, problem: Problem, start: State | None = None,
                force_guards: bool = True) -> NominalRun:
    path = as_path(path)
    state = initial_state(problem) if start is None else start
    before, ticks = [], []
    for idx, item in enumerate(path.items):
        before.append(state)
        if isinstance(item, Guard):
            if holds(state, item.condition) != item.expected:
                if not force_guards:
                    return NominalRun(before, ticks, state, False, idx, item.condition)
                state = force_condition(state, item.condition, item.expected, domain)
                before[-1] = state
            continue
        if not holds(state, item.pre):
            return NominalRun(before, ticks, state, False, idx, violated(state, item.pre))
        state = apply_effects(state, item.effect_sets()[0], domain)
        if item.duration:
            ticks.extend([state] * item.duration)
            state = apply_effects(state, item.final, domain)
    ok = holds(state, problem.goal)
    return NominalRun(before, ticks, state, ok, None if ok else len(path.items),
                      () if ok else violated(state, problem.goal))


@dataclass(frozen=True)
class TickTrajectory:
    states: tuple
    final: State

    def __len__(self):
        return len(self.states)

    def __getitem__(self, t):
        return self.states[t]


def expand_ticks(path, domain: Domain, problem: Problem) -> TickTrajectory:
    """Nominal state at the start of every tick, including durative steps' intermediate states."""
    run = nominal_run(path, domain, problem)
    if run.failed_at is not None and run.failed_at < len(as_path(path).items):
        raise InvalidPlan(f"item {run.failed_at} not applicable: "
                          + ", ".join(map(str, run.violated)))
    return TickTrajectory(tuple(run.ticks), run.final)


# --------------------------------------------------------------------------
# editing


def attach_branch(plan: Plan, position, condition: Sequence[Literal], alternate: Plan) -> Plan:
    """Insert a branch before ``position``: ``then`` is ``alternate``, ``else`` the original rest.

    ``position`` is a step index in the root segment or ``(address, index)``
    where ``address`` is the sequence of branch sides leading to a segment.
    """
    if isinstance(position, int):
        address, index = (), position
    else:
        address, index = tuple(position[0]), position[1]
    seg = plan.segment(address)
    if not 0 <= index <= len(seg.steps):
        raise PositionOutOfRange(f"index {index} outside 0..{len(seg.steps)}")
    rest = Plan(seg.steps[index:], seg.branch)
    new = Plan(seg.steps[:index], Branch(tuple(condition), alternate, rest))
    return plan.replace_segment(address, new)


TRUE = ()


def condition_from_facts(facts) -> tuple:
    return tuple(fact_literal(f) for f in facts)
