"""Sampled plan execution with random external events.

One PCG64 stream is seeded from the master seed and every trial reads its
own fixed-width window of it, so any single trial can be rerun in isolation
(the generator jumps straight to the window) and results never depend on how
trials are split across workers.  Within a window the uniforms are laid out
as one block of ``len(events)`` numbers per tick: event ``e`` fires at tick
``t`` when it is enabled in the tick-start state and ``u[t, e] < p``.
"""
from __future__ import annotations

import csv
import io
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .inference import Failure
from .model import Domain, Problem, State, apply_effects, grounding, holds, initial_state, violated
from .timeline import Plan, schedule

THREADS_ENV = "EVENTPLAN_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# --------------------------------------------------------------------------
# trace records


@dataclass(frozen=True)
class StepChecked:
    step: object

    def text(self):
        return f"checking step {self.step}"


@dataclass(frozen=True)
class EffectApplied:
    kind: str
    fact: tuple
    depth: int = 1

    def text(self):
        verb = "adding" if self.kind == "add" else "deleting"
        return "  " * self.depth + f"{verb} (" + " ".join(map(str, self.fact)) + ")"


@dataclass(frozen=True)
class StepBegun:
    step: object

    def text(self):
        return "  step begun."


@dataclass(frozen=True)
class EventOccurred:
    event: object
    tick: int

    def text(self):
        return f"  ** event {self.event.name} takes place at tick {self.tick}."


@dataclass(frozen=True)
class StepCompleted:
    step: object

    def text(self):
        return "  step completed."


@dataclass(frozen=True)
class StepNotApplicable:
    step: object
    failed: tuple

    def text(self):
        lines = [f"  precondition {l} is false" for l in self.failed]
        return "\n".join(lines + ["  *** step was not applicable"])


@dataclass(frozen=True)
class BranchTaken:
    condition: tuple
    truth: bool

    def text(self):
        cond = " ".join(map(str, self.condition))
        return f"branch on {cond}: {'true' if self.truth else 'false'}"


@dataclass(frozen=True)
class GoalResult:
    achieved: bool
    failed: tuple = ()

    def text(self):
        if self.achieved:
            return "goal achieved"
        return "goal not achieved: " + " ".join(map(str, self.failed))


@dataclass(frozen=True)
class FailureType:
    """Statistics key: failed step, its false preconditions and the events that falsified them."""

    step: str
    violated: tuple
    cause: tuple

    def __str__(self):
        return f"{self.step}: {' '.join(self.violated)} <- {' '.join(self.cause)}"


def failure_type_of(outcome: Failure) -> FailureType:
    """Key an oracle :class:`Failure` the way trial statistics do."""
    step = "goal" if outcome.step is None else str(outcome.step)
    causes = tuple("none" if c is None else c.name for _, c in outcome.causes)
    return FailureType(step, tuple(map(str, outcome.violated)), causes)


@dataclass
class Trace:
    records: list
    outcome: object
    fired: list
    states: list
    final: State

    @property
    def success(self) -> bool:
        return self.outcome is None

    def text(self) -> str:
        return "\n".join(r.text() for r in self.records) + "\n"


# --------------------------------------------------------------------------
# execution core


class _Executor:
    """Deterministic execution given a firing rule; caches per-state work."""

    def __init__(self, plan: Plan, domain: Domain, problem: Problem):
        self.plan = plan
        self.domain = domain
        self.problem = problem
        g = grounding(domain, problem)
        self.events = list(g.events)
        self.event_index = {e.key: i for i, e in enumerate(self.events)}
        self.ticks = max((schedule(p).total_duration for p in plan.paths()), default=0)
        self._enabled = {}
        self._apply = {}
        self._holds = {}
        self._failures = {}
        self.start = initial_state(problem)

    def enabled(self, state):
        out = self._enabled.get(state)
        if out is None:
            out = self._enabled[state] = tuple(
                (i, e) for i, e in enumerate(self.events) if holds(state, e.pre))
        return out

    def apply(self, state, eff):
        key = (state, id(eff))
        out = self._apply.get(key)
        if out is None:
            out = self._apply[key] = apply_effects(state, eff, self.domain)
        return out

    def holds(self, state, key, formula):
        k = (state, key)
        out = self._holds.get(k)
        if out is None:
            out = self._holds[k] = holds(state, formula)
        return out

    def run(self, fires, record: bool = False):
        """Execute once; ``fires(tick, index, event)`` decides enabled events."""
        dom = self.domain
        state = self.start
        causes = {}
        recs, fired, states = [], [], [state]
        tick = 0
        seg = self.plan
        while True:
            for step in seg.steps:
                if record:
                    recs.append(StepChecked(step))
                if not self.holds(state, ("pre", step.key), step.pre):
                    bad = violated(state, step.pre)
                    if record:
                        recs.append(StepNotApplicable(step, bad))
                    return self._failure(str(step), bad, causes), recs, fired, states, state
                effs = step.effect_sets()
                state = self._effect(state, effs[0], causes, recs if record else None, 1)
                states.append(state)
                if step.duration:
                    if record:
                        recs.append(StepBegun(step))
                    for _ in range(step.duration):
                        start = state
                        for i, ev in self.enabled(start):
                            if fires(tick, i, ev):
                                fired.append((tick, ev))
                                if record:
                                    recs.append(EventOccurred(ev, tick))
                                before = state
                                state = self._effect(state, ev.effects, None, recs if record else None, 2)
                                for f in ev.effects.written_facts():
                                    var = dom.var_of(f)
                                    fn = dom.is_functional(var[0])
                                    if state.value(var, fn) != before.value(var, fn):
                                        causes[var] = ev.name
                                states.append(state)
                        tick += 1
                    state = self._effect(state, step.final, causes, recs if record else None, 1)
                    states.append(state)
                    if record:
                        recs.append(StepCompleted(step))
            if seg.branch is None:
                break
            truth = self.holds(state, ("branch", id(seg.branch)), seg.branch.condition)
            if record:
                recs.append(BranchTaken(seg.branch.condition, truth))
            seg = seg.branch.then if truth else seg.branch.orelse
        if holds(state, self.problem.goal):
            if record:
                recs.append(GoalResult(True))
            return None, recs, fired, states, state
        bad = violated(state, self.problem.goal)
        if record:
            recs.append(GoalResult(False, bad))
        return self._failure("goal", bad, causes), recs, fired, states, state

    def _effect(self, state, eff, causes, recs, depth):
        new = self.apply(state, eff)
        if causes is not None:
            for f in eff.written_facts():
                causes.pop(self.domain.var_of(f), None)
        if recs is not None:
            for f in sorted(state.facts - new.facts, key=str):
                recs.append(EffectApplied("delete", f, depth))
            for f in sorted(new.facts - state.facts, key=str):
                recs.append(EffectApplied("add", f, depth))
        return new

    def _failure(self, step, bad, causes):
        cause = tuple(causes.get(self.domain.var_of(l.fact), "none") for l in bad)
        key = (step, bad, cause)
        out = self._failures.get(key)
        if out is None:
            out = self._failures[key] = FailureType(step, tuple(map(str, bad)), cause)
        return out

    @property
    def width(self) -> int:
        return max(1, self.ticks * len(self.events))

    def uniforms(self, seed: int, trial: int, count: int = 1):
        """Uniform windows of trials ``trial .. trial + count - 1``, one row each."""
        bg = np.random.PCG64(np.random.SeedSequence(seed))
        bg.advance(trial * self.width)
        u = np.random.Generator(bg).random((count, self.width))
        return u[0] if count == 1 else u

    def sample(self, seed: int, trial: int, record: bool = False):
        u = self.uniforms(seed, trial).tolist()
        n = len(self.events)
        return self.run(lambda t, i, ev: u[t * n + i] < ev.probability, record)

    # fast path: same semantics as ``run`` over interned integer states

    def _sid(self, state) -> int:
        sid = self._ids.get(state)
        if sid is None:
            sid = self._ids[state] = len(self._states)
            self._states.append(state)
        return sid

    def _compile(self):
        self._ids, self._states = {}, []
        self._pre, self._trans, self._en, self._chg = {}, {}, {}, {}
        self._s0 = self._sid(self.start)

    def _step_to(self, sid, eff):
        key = (sid, id(eff))
        out = self._trans.get(key)
        if out is None:
            out = self._trans[key] = self._sid(apply_effects(self._states[sid], eff, self.domain))
        return out

    def _enabled_ids(self, sid):
        out = self._en.get(sid)
        if out is None:
            out = self._en[sid] = tuple(
                (i, ev.probability, ev) for i, ev in self.enabled(self._states[sid]))
        return out

    def _event_to(self, sid, i, ev):
        key = (sid, -1 - i)
        out = self._trans.get(key)
        if out is None:
            before = self._states[sid]
            after = apply_effects(before, ev.effects, self.domain)
            changed = []
            for f in ev.effects.written_facts():
                var = self.domain.var_of(f)
                fn = self.domain.is_functional(var[0])
                if after.value(var, fn) != before.value(var, fn) and var not in changed:
                    changed.append(var)
            out = self._trans[key] = self._sid(after)
            self._chg[key] = tuple(changed)
        return out, self._chg[key]

    def outcome(self, u) -> FailureType | None:
        """Trial outcome only (``None`` for success), without recording a trace."""
        if not hasattr(self, "_ids"):
            self._compile()
        n = len(self.events)
        sid = self._s0
        causes = {}
        tick = 0
        seg = self.plan
        dom = self.domain
        while True:
            for step in seg.steps:
                key = (sid, step.key)
                ok = self._pre.get(key)
                if ok is None:
                    ok = self._pre[key] = holds(self._states[sid], step.pre)
                if not ok:
                    return self._failure(str(step), violated(self._states[sid], step.pre), causes)
                effs = step.effect_sets()
                if causes:
                    for f in effs[0].written_facts():
                        causes.pop(dom.var_of(f), None)
                sid = self._step_to(sid, effs[0])
                if step.duration:
                    for _ in range(step.duration):
                        base = tick * n
                        for i, p, ev in self._enabled_ids(sid):
                            if u[base + i] < p:
                                sid, changed = self._event_to(sid, i, ev)
                                for var in changed:
                                    causes[var] = ev.name
                        tick += 1
                    if causes:
                        for f in step.final.written_facts():
                            causes.pop(dom.var_of(f), None)
                    sid = self._step_to(sid, step.final)
            if seg.branch is None:
                break
            seg = seg.branch.then if holds(self._states[sid], seg.branch.condition) else seg.branch.orelse
        state = self._states[sid]
        if holds(state, self.problem.goal):
            return None
        return self._failure("goal", violated(state, self.problem.goal), causes)


def simulate_once(plan: Plan, problem: Problem, domain: Domain, seed: int = 0, trial: int = 0) -> Trace:
    """One sampled execution with a full trace."""
    ex = _Executor(plan, domain, problem)
    outcome, recs, fired, states, final = ex.sample(seed, trial, record=True)
    return Trace(recs, outcome, fired, states, final)


def replay(plan: Plan, problem: Problem, domain: Domain, fired) -> Trace:
    """Deterministic execution firing exactly the recorded ``(tick, event)`` pairs."""
    ex = _Executor(plan, domain, problem)
    chosen = {(t, e.key) for t, e in fired}
    outcome, recs, fired2, states, final = ex.run(lambda t, i, ev: (t, ev.key) in chosen, True)
    return Trace(recs, outcome, fired2, states, final)


# --------------------------------------------------------------------------
# statistics


@dataclass
class TrialStats:
    trials: int
    successes: int
    counts: dict = field(default_factory=dict)

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials

    def rate(self, key) -> float:
        return self.counts.get(key, 0) / self.trials

    def stderr(self, rate: float) -> float:
        """``sqrt(r (1 - r) / N)``; zero for a single trial."""
        if self.trials <= 1:
            return 0.0
        return math.sqrt(rate * (1.0 - rate) / self.trials)

    @property
    def failure_rates(self) -> dict:
        return {k: c / self.trials for k, c in sorted(self.counts.items(), key=lambda kv: str(kv[0]))}

    def rate_where(self, step_prefix: str) -> float:
        return sum(c for k, c in self.counts.items() if k.step.startswith(step_prefix)) / self.trials

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "success": {"rate": self.success_rate, "stderr": self.stderr(self.success_rate)},
            "failures": [
                {"step": k.step, "violated": list(k.violated), "cause": list(k.cause),
                 "rate": r, "stderr": self.stderr(r)}
                for k, r in self.failure_rates.items()
            ],
        }


def _outcomes(ex: _Executor, seed: int, start: int, stop: int, chunk: int = 4096) -> list:
    out = []
    for lo in range(start, stop, chunk):
        hi = min(stop, lo + chunk)
        out.extend(ex.outcome(row) for row in ex.uniforms(seed, lo, hi - lo).reshape(hi - lo, -1).tolist())
    return out


def trial_outcomes(plan: Plan, problem: Problem, domain: Domain, n: int, seed: int = 0,
                   threads: int | None = None) -> list:
    """Outcome of each trial in index order (``None`` for success)."""
    if n < 1:
        raise ValueError("need at least one trial")
    threads = threads or default_threads()
    if threads == 1 or n < 2 * threads:
        return _outcomes(_Executor(plan, domain, problem), seed, 0, n)
    bounds = [n * k // threads for k in range(threads + 1)]
    # one executor per worker: the caches are not shared between threads
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(lambda k: _outcomes(_Executor(plan, domain, problem), seed,
                                             bounds[k], bounds[k + 1]), range(threads))
        out = []
        for part in parts:
            out.extend(part)
    return out


def run_trials(plan: Plan, problem: Problem, domain: Domain, n: int, seed: int = 0,
               threads: int | None = None) -> TrialStats:
    outcomes = trial_outcomes(plan, problem, domain, n, seed, threads)
    counts = Counter(o for o in outcomes if o is not None)
    return TrialStats(n, n - sum(counts.values()), dict(counts))


@dataclass
class ConvergenceSeries:
    keys: list
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trials", "success", *map(str, self.keys)])
        for row in self.rows:
            w.writerow([row[0], *(f"{x:.6f}" for x in row[1:])])
        return buf.getvalue()


def convergence_series(plan: Plan, problem: Problem, domain: Domain, n: int, stride: int,
                       seed: int = 0, threads: int | None = None) -> ConvergenceSeries:
    """Cumulative success and per-failure rates after every ``stride`` trials."""
    if stride < 1:
        raise ValueError("stride must be at least 1")
    outcomes = trial_outcomes(plan, problem, domain, n, seed, threads)
    keys = sorted({o for o in outcomes if o is not None}, key=str)
    col = {k: i for i, k in enumerate(keys)}
    counts = [0] * len(keys)
    succ = 0
    rows = []
    for i, o in enumerate(outcomes, 1):
        if o is None:
            succ += 1
        else:
            counts[col[o]] += 1
        if i % stride == 0:
            rows.append((i, succ / i, *(c / i for c in counts)))
    return ConvergenceSeries(keys, rows)
