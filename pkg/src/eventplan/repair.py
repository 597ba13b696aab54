"""Plan repair: conditional branches, protection and rescheduling, and the loop that drives them."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .beliefnet import build_stage1, persistence_links
from .errors import NetTooLarge, NoPlanFound, RepairFailed, TreeTooLarge, Unsolvable
from .failures import FailureMode, analyze_plan
from .inference import enumerate_outcomes
from .model import Domain, Literal, Problem, apply_effects, canonical_key, holds
from .parser import literal_to_json, plan_to_json
from .planner import PlannerLimits, extra_for, iter_plans, replan
from .timeline import LinearPath, Plan, as_path, attach_branch, force_condition, nominal_run, schedule

THRESHOLD_MET = "ThresholdMet"
BUDGET_EXHAUSTED = "BudgetExhausted"
NO_REPAIR_IMPROVES = "NoRepairImproves"
# success probabilities are sums of products; allow for rounding against the threshold
TOL = 1e-12


def _path_state(plan: Plan, failure: FailureMode, domain: Domain, problem: Problem):
    path = plan.paths()[failure.path_index]
    run = nominal_run(path, domain, problem, force_guards=True)
    if failure.item_index < len(run.before):
        return path, run.before[failure.item_index]
    return path, run.final


def repair_branch(plan: Plan, failure: FailureMode, domain: Domain, problem: Problem,
                  limits: PlannerLimits | None = None) -> Plan:
    """Branch before the threatened step on the event-produced situation, replanning for it."""
    path, state = _path_state(plan, failure, domain, problem)
    cond = failure.condition
    alternate = force_condition(state, cond, True, domain)
    try:
        sub = replan(domain, problem, alternate, limits=limits)
    except NoPlanFound as exc:
        raise RepairFailed(f"no plan from the state where {' '.join(map(str, cond))}: {exc}") from exc
    return attach_branch(plan, failure.position, cond, sub)


def protect_candidates(failure: FailureMode, event=None) -> list:
    """``(event, literal)`` pairs protection may negate, terminal event first.

    Literals equal to the threatened precondition are skipped: the plan
    itself needs them true at that point.
    """
    events = list(reversed(failure.chain)) if event is None else [event]
    out = []
    for ev in events:
        for lit in ev.pre:
            if lit.fact == failure.literal.fact and lit.positive == failure.literal.positive:
                continue
            out.append((ev, lit))
    return out


def _spanning(path: LinearPath, ticks) -> list:
    sched = schedule(path)
    out = []
    for t in ticks:
        e = sched.step_spanning(t)
        if e is not None and e not in out:
            out.append(e)
    return out


def repair_protect(plan: Plan, failure: FailureMode, event=None, domain: Domain = None,
                   problem: Problem = None, literal: Literal | None = None,
                   limits: PlannerLimits | None = None) -> Plan:
    """Require the negation of one of the event's preconditions while the exposed step runs.

    The segment holding that step is replanned from its start with the
    extra precondition.  Candidates are tried in order; the first that
    replans and validates is returned.
    """
    if event is not None and all(e.key != event.key for e in failure.chain):
        raise ValueError(f"{event} is not part of the failure's chain")
    if literal is not None:
        if literal.fact == failure.literal.fact and literal.positive == failure.literal.positive:
            raise RepairFailed(f"{literal} is required by the plan at that point")
        candidates = [(event or failure.terminal, literal)]
    else:
        candidates = protect_candidates(failure, event)
    if not candidates:
        raise RepairFailed("no precondition to negate")
    path = plan.paths()[failure.path_index]
    entries = _spanning(path, range(*failure.interval))
    if not entries:
        raise RepairFailed("no durative step spans the exposure")
    address = path.origins[entries[0].index][0]
    entries = [e for e in entries if path.origins[e.index][0] == address]
    first = next(k for k, o in enumerate(path.origins)
                 if o[0] == address and not hasattr(path.items[k], "expected"))
    run = nominal_run(path, domain, problem, force_guards=True)
    start = run.before[first]
    errors = []
    for ev, lit in candidates:
        if ev.probability == 0:
            continue
        neg = lit.negate()
        extra = {e.step.key: (neg,) for e in entries}
        try:
            seg = replan(domain, problem, start, limits=limits, extra_preconditions=extra)
        except NoPlanFound as exc:
            errors.append(f"{neg}: {exc}")
            continue
        return plan.replace_segment(address, seg)
    raise RepairFailed("protection failed: " + "; ".join(errors) if errors else "protection failed")


def exposure(path, var, domain: Domain, problem: Problem) -> int:
    """Ticks over which ``var`` is carried unattended by persistence links."""
    net = build_stage1(path, domain, problem)
    return sum(len(l.ticks) for l in persistence_links(net) if l.var == var)


def _orderings(steps, state, domain: Domain, problem: Problem, limit: int):
    """Applicable orderings of ``steps`` reaching the goal, in depth-first order."""
    n = len(steps)
    seen = 0

    def rec(state, used, prefix):
        nonlocal seen
        if len(prefix) == n:
            if holds(state, problem.goal):
                seen += 1
                yield tuple(prefix)
            return
        tried = set()
        for i in range(n):
            if used & (1 << i) or steps[i].key in tried or seen >= limit:
                continue
            tried.add(steps[i].key)
            s = steps[i]
            if not holds(state, s.pre):
                continue
            nxt = state
            for eff in s.effect_sets():
                nxt = apply_effects(nxt, eff, domain)
            prefix.append(s)
            yield from rec(nxt, used | (1 << i), prefix)
            prefix.pop()

    yield from rec(state, 0, [])


def repair_reschedule(plan: Plan, failure: FailureMode, domain: Domain = None,
                      problem: Problem = None, limit: int = 20000) -> Plan:
    """Reorder the threatened segment to shorten the failure variable's exposure.

    Only leaf segments are reordered.  Returns ``plan`` itself unless some
    valid ordering is strictly better.
    """
    path = plan.paths()[failure.path_index]
    address = failure.position[0]
    seg = plan.segment(address)
    if seg.branch is not None or len(seg.steps) < 2:
        return plan
    prefix = [it for it, o in zip(path.items, path.origins) if o[0] != address or hasattr(it, "expected")]
    prefix = prefix[:len(path.items) - len(seg.steps)]
    run = nominal_run(LinearPath(tuple(prefix)), domain, problem, force_guards=True)
    start = run.final

    def cost(order):
        return exposure(LinearPath(tuple(prefix) + tuple(order)), failure.var, domain, problem)

    best, best_cost = seg.steps, cost(seg.steps)
    for order in _orderings(list(seg.steps), start, domain, problem, limit):
        c = cost(order)
        if c < best_cost:
            best, best_cost = order, c
    if best == seg.steps:
        return plan
    return plan.replace_segment(address, Plan(tuple(best)))


# --------------------------------------------------------------------------
# the loop


@dataclass
class RepairAttempt:
    iteration: int
    failure: str
    method: str
    accepted: bool
    before: float
    after: float | None = None
    detail: str = ""

    def to_json(self):
        return {"iteration": self.iteration, "failure": self.failure, "method": self.method,
                "accepted": self.accepted, "before": self.before, "after": self.after,
                "detail": self.detail}


@dataclass
class RepairReport:
    plan: Plan
    probability: float
    reason: str
    threshold: float
    initial_plan: Plan | None = None
    initial_probability: float = 0.0
    log: list = field(default_factory=list)

    @property
    def accepted(self) -> list:
        return [a for a in self.log if a.accepted]

    def to_json(self) -> dict:
        return {
            "termination": self.reason,
            "threshold": self.threshold,
            "probability": self.probability,
            "initial_probability": self.initial_probability,
            "initial_plan": plan_to_json(self.initial_plan) if self.initial_plan else None,
            "iterations": [a.to_json() for a in self.log],
            "plan": plan_to_json(self.plan),
        }


def success_of(plan: Plan, domain: Domain, problem: Problem) -> float:
    return enumerate_outcomes(plan, problem, domain).success


def _candidates(plan, failure, domain, problem, limits):
    yield "branch", "", lambda: repair_branch(plan, failure, domain, problem, limits)
    for ev, lit in protect_candidates(failure):
        yield ("protect", f"negate {lit} of {ev}",
               lambda ev=ev, lit=lit: repair_protect(plan, failure, ev, domain, problem, lit, limits))
    yield "reschedule", "", lambda: repair_reschedule(plan, failure, domain, problem)


def solve(domain: Domain, problem: Problem, threshold: float = 0.9, budget: int = 20,
          max_chain: int | None = 3, limits: PlannerLimits | None = None,
          initial_plans: int = 3) -> RepairReport:
    """Plan, then repair the most probable failure until the threshold or the budget is reached.

    A candidate is accepted only when the exact success probability strictly
    increases.  When no repair helps, the next initial plan is tried; the
    best plan seen is reported.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    if budget < 0:
        raise ValueError("budget must be non-negative")
    try:
        starts = list(itertools.islice(iter_plans(domain, problem, limits=limits), initial_plans))
    except (Unsolvable, NoPlanFound) as exc:
        raise Unsolvable(str(exc)) from exc
    if not starts:
        raise Unsolvable("no initial plan")
    attempts = 0
    log: list = []
    best = None
    iteration = 0
    for initial in starts:
        plan, prob = initial, success_of(initial, domain, problem)
        reason = None
        while reason is None:
            if prob >= threshold - TOL:
                reason = THRESHOLD_MET
                break
            if attempts >= budget:
                reason = BUDGET_EXHAUSTED
                break
            iteration += 1
            try:
                failures = analyze_plan(plan, domain, problem, max_chain).failures
            except (NetTooLarge, TreeTooLarge) as exc:
                # the repaired plan outgrew exact analysis; keep what we have
                log.append(RepairAttempt(iteration, "", "analyze", False, prob, None, str(exc)))
                failures = []
            improved = False
            for failure in failures:
                for method, detail, make in _candidates(plan, failure, domain, problem, limits):
                    if attempts >= budget:
                        break
                    attempts += 1
                    try:
                        cand = make()
                    except RepairFailed as exc:
                        log.append(RepairAttempt(iteration, failure.describe(), method, False, prob,
                                                 None, f"{detail}{'; ' if detail else ''}{exc}"))
                        continue
                    if cand == plan:
                        log.append(RepairAttempt(iteration, failure.describe(), method, False, prob,
                                                 prob, f"{detail}{'; ' if detail else ''}no change"))
                        continue
                    try:
                        after = success_of(cand, domain, problem)
                    except TreeTooLarge as exc:
                        log.append(RepairAttempt(iteration, failure.describe(), method, False, prob,
                                                 None, f"{detail}{'; ' if detail else ''}{exc}"))
                        continue
                    ok = after > prob + 1e-12
                    log.append(RepairAttempt(iteration, failure.describe(), method, ok, prob, after, detail))
                    if ok:
                        plan, prob, improved = cand, after, True
                        break
                if improved or attempts >= budget:
                    break
            if not improved:
                reason = BUDGET_EXHAUSTED if attempts >= budget else NO_REPAIR_IMPROVES
        if best is None or prob > best[1]:
            best = (plan, prob, reason, initial)
        if reason in (THRESHOLD_MET, BUDGET_EXHAUSTED):
            break
    plan, prob, reason, initial = best
    if prob >= threshold - TOL:
        reason = THRESHOLD_MET
    first = starts[0]
    return RepairReport(plan, prob, reason, threshold, first, success_of(first, domain, problem), log)
