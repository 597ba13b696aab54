"""Exact probabilities: belief-net evaluation and the execution-tree oracle.

Net evaluation sweeps the nodes in time order keeping a distribution over
the values of the nodes that are still needed downstream.  Only event nodes
are random, so each frontier entry splits at most in two per event and
identical entries merge as soon as a node stops being referenced.

The oracle in :func:`enumerate_outcomes` shares nothing with the net code:
it branches on every event occurrence at every tick of the concrete
execution and aggregates the terminal outcomes.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

from .beliefnet import BeliefNet, build_net
from .errors import NetTooLarge, TreeTooLarge
from .model import (
    FAILED,
    Domain,
    GroundEvent,
    Problem,
    State,
    apply_effects,
    enabled_events,
    holds,
    initial_state,
    violated,
)
from .timeline import Plan

MAX_EVENT_NODES = 40
MAX_SUPPORT = 1 << 22


def _schedule(net: BeliefNet, nodes) -> list:
    """Sweep order over ``nodes`` with persistence folds split per tick.

    A persistence node folds its event parents into the carried value.  Doing
    the fold one tick at a time (right after that tick's events) lets event
    values leave the frontier immediately instead of waiting for the node
    that finally reads the variable.  Items are ``(id, parents, fold)`` where
    ``fold`` is the ``(var, events)`` of a stage and ``None`` for real nodes;
    stage ids are negative.
    """
    keyed = []
    next_id = -1
    for n in nodes:
        node = net.nodes[n]
        ps = net.parents[n]
        if node.kind == "feature" and node.role == "persist" and len(ps) > 1:
            prev = ps[0]
            groups = {}
            for e in ps[1:]:
                groups.setdefault(net.nodes[e].tick, []).append(e)
            for tick in sorted(groups):
                evs = tuple(groups[tick])
                after = max(net.nodes[e].sort_key for e in evs)
                keyed.append(((*after, 1), (next_id, (prev, *evs), (node.var, evs))))
                prev = next_id
                next_id -= 1
            ps = (prev,)
        keyed.append(((*node.sort_key, 0), (n, ps, None)))
    keyed.sort(key=lambda kv: kv[0])
    return [item for _, item in keyed]


def joint(net: BeliefNet, keep=(), evidence: Mapping | None = None, track_var=None,
          max_events: int = MAX_EVENT_NODES, goal: bool = True) -> dict:
    """Joint distribution of the ``keep`` nodes and (unless ``goal`` is false) the goal node.

    ``evidence`` pins nodes to fixed values (an intervention: the pinned
    node ignores its parents).  With ``track_var`` every feature node of that
    variable carries ``(value, origin)`` where ``origin`` is the id of the
    last event node that changed it, or ``None``.  Without the goal only the
    ancestors of ``keep`` are swept.
    """
    n_events = len(net.events)
    if n_events > max_events:
        raise NetTooLarge(f"{n_events} event nodes exceed the bound of {max_events}")
    evidence = dict(evidence or {})
    keep = tuple(keep)
    targets = keep + ((net.goal,) if goal else ())
    needed = set(targets)
    for k in targets:
        needed |= net.ancestors(k)
    seq = _schedule(net, needed)
    last = {}
    for i, (n, ps, _) in enumerate(seq):
        last.setdefault(n, -1)
        for q in ps:
            last[q] = i
    pinned = set(targets)
    tracked = {n.id for n in net.nodes if track_var is not None and n.kind == "feature"
               and n.var == track_var}
    tracked |= {n for n, _, fold in seq if fold is not None and fold[0] == track_var}
    live: list[int] = []
    frontier = {(): 1.0}
    for i, (n, ps, fold) in enumerate(seq):
        slots = [live.index(q) for q in ps]
        unwrap = [q in tracked for q in ps]
        is_tracked = n in tracked
        node = None if fold else net.nodes[n]
        out = defaultdict(float)
        for assign, pr in frontier.items():
            raw = [assign[j] for j in slots]
            vals = [r[0] if u else r for r, u in zip(raw, unwrap)]
            if n in evidence:
                v = evidence[n]
                out[assign + (((v, None) if is_tracked else v),)] += pr
                continue
            if fold is not None:
                var, evs = fold
                cur = vals[0]
                origin = raw[0][1] if is_tracked else None
                if cur is not FAILED:
                    for eid, fired in zip(evs, vals[1:]):
                        if fired:
                            nxt = net.event_effect(net.nodes[eid].item, var, cur)
                            if nxt != cur:
                                origin = eid
                            cur = nxt
                out[assign + (((cur, origin) if is_tracked else cur),)] += pr
                continue
            if node.kind == "event":
                p = node.item.probability if net.compute(n, vals) else 0.0
                if p > 0:
                    out[assign + (True,)] += pr * p
                if p < 1:
                    out[assign + (False,)] += pr * (1 - p)
                continue
            if node.role == "persist":
                # the folds already applied the events
                v = raw[0]
            else:
                v = net.compute(n, vals)
                if is_tracked:
                    v = (v, None)
            out[assign + (v,)] += pr
        live.append(n)
        frontier = out
        dead = [j for j, m in enumerate(live) if m not in pinned and last[m] <= i]
        if dead:
            keep_idx = [j for j in range(len(live)) if j not in dead]
            live = [live[j] for j in keep_idx]
            merged = defaultdict(float)
            for assign, pr in frontier.items():
                merged[tuple(assign[j] for j in keep_idx)] += pr
            frontier = merged
    want = [live.index(k) for k in targets]
    result = defaultdict(float)
    for assign, pr in frontier.items():
        result[tuple(assign[j] for j in want)] += pr
    return dict(result)


def evaluate_net(net: BeliefNet, evidence: Mapping | None = None,
                 max_events: int = MAX_EVENT_NODES) -> float:
    """Probability that the goal node is true."""
    dist = joint(net, evidence=evidence, max_events=max_events)
    return sum(p for (g,), p in dist.items() if g)


def node_marginal(net: BeliefNet, nid: int, evidence: Mapping | None = None) -> dict:
    out = defaultdict(float)
    for (v, _), p in joint(net, keep=(nid,), evidence=evidence).items():
        out[v] += p
    return dict(out)


def event_marginal(net: BeliefNet, node) -> float:
    """Probability that an event node fires; ``node`` is an id or ``(event, tick)``."""
    if not isinstance(node, int):
        event, tick = node
        key = event.key if isinstance(event, GroundEvent) else event
        nid = net.events.get((key, tick))
        if nid is None:
            return 0.0
        node = nid
    if net.nodes[node].kind != "event":
        raise ValueError(f"node {node} is not an event node")
    return node_marginal(net, node).get(True, 0.0)


def net_success(plan: Plan, domain: Domain, problem: Problem, max_chain: int | None = 3) -> float:
    """Success summed over the nets of every path of a (possibly branched) plan."""
    return sum(evaluate_net(build_net(path, domain, problem, max_chain)) for path in plan.paths())


# --------------------------------------------------------------------------
# execution-tree oracle


@dataclass(frozen=True)
class Success:
    def __str__(self):
        return "success"


SUCCESS = Success()


@dataclass(frozen=True)
class Failure:
    """A step (``None`` for the goal test) whose preconditions did not hold.

    ``causes`` pairs each violated literal with the last event that changed
    its variable, or ``None`` when no event touched it.
    """

    step: object
    violated: tuple
    causes: tuple
    position: tuple = field(default=((), 0))

    @property
    def is_goal(self) -> bool:
        return self.step is None

    def __str__(self):
        where = "goal" if self.step is None else str(self.step)
        lits = " ".join(map(str, self.violated))
        why = ", ".join("none" if c is None else str(c) for _, c in self.causes)
        return f"{where}: {lits} <- {why}"


@dataclass
class OutcomeDistribution:
    probabilities: dict

    @property
    def success(self) -> float:
        return self.probabilities.get(SUCCESS, 0.0)

    @property
    def failures(self) -> dict:
        return {o: p for o, p in self.probabilities.items() if isinstance(o, Failure)}

    def total(self) -> float:
        return sum(self.probabilities.values())

    def failure_mass(self, step_name: str | None = None, args: tuple | None = None) -> float:
        out = 0.0
        for o, p in self.failures.items():
            if step_name is None and o.step is None:
                out += p
            elif o.step is not None and o.step.name == step_name and (args is None or o.step.args == args):
                out += p
        return out

    def by_cause(self) -> dict:
        out = defaultdict(float)
        for o, p in self.failures.items():
            names = tuple(sorted({c.name for _, c in o.causes if c is not None}))
            out[(None if o.step is None else o.step.key, names)] += p
        return dict(out)

    def __iter__(self):
        return iter(self.probabilities.items())


class _Oracle:
    def __init__(self, domain: Domain, problem: Problem, max_support: int):
        self.domain = domain
        self.problem = problem
        self.max_support = max_support
        self._enabled = {}
        self._branches = {}
        self._applied = {}
        self.outcomes = defaultdict(float)

    def enabled(self, state: State):
        out = self._enabled.get(state)
        if out is None:
            out = self._enabled[state] = tuple(enabled_events(state, self.domain, self.problem))
        return out

    def _check(self, dist):
        if len(dist) > self.max_support:
            raise TreeTooLarge(f"outcome support exceeds {self.max_support}")

    def _write(self, state, eff, causes):
        new = apply_effects(state, eff, self.domain)
        touched = {self.domain.var_of(f) for f in eff.written_facts()}
        return new, frozenset(kv for kv in causes if kv[0] not in touched)

    def tick(self, dist):
        out = defaultdict(float)
        for (state, causes), pr in dist.items():
            for outcome, q in self._tick_branches(state, causes):
                out[outcome] += pr * q
        self._check(out)
        return out

    def _tick_branches(self, state, causes):
        key = (state, causes)
        hit = self._branches.get(key)
        if hit is not None:
            return hit
        # enabledness is fixed by the tick-start state; the events are then
        # applied one at a time, merging identical partial results as we go
        res = {(state, causes): 1.0}
        for ev in self.enabled(state):
            p = ev.probability
            nxt = defaultdict(float)
            for (s, c), q in res.items():
                if p < 1.0:
                    nxt[(s, c)] += q * (1.0 - p)
                if p > 0.0:
                    nxt[self._fire(s, c, ev)] += q * p
            res = nxt
        hit = self._branches[key] = tuple(res.items())
        return hit

    def _apply_event(self, state, ev):
        hit = self._applied.get((state, ev))
        if hit is None:
            nxt = apply_effects(state, ev.effects, self.domain)
            changed = []
            for f in ev.effects.written_facts():
                var = self.domain.var_of(f)
                functional = self.domain.is_functional(var[0])
                if nxt.value(var, functional) != state.value(var, functional):
                    changed.append(var)
            hit = self._applied[(state, ev)] = (nxt, tuple(changed))
        return hit

    def _fire(self, state, causes, ev):
        nxt, changed = self._apply_event(state, ev)
        if not changed:
            return nxt, causes
        c = dict(causes)
        for var in changed:
            c[var] = ev
        return nxt, frozenset(c.items())

    def run(self, seg: Plan, address: tuple, dist):
        for i, step in enumerate(seg.steps):
            nxt = defaultdict(float)
            for (state, causes), pr in dist.items():
                if not holds(state, step.pre):
                    self._fail(step, state, causes, pr, (address, i), step.pre)
                    continue
                nxt[self._write(state, step.effect_sets()[0], causes)] += pr
            dist = nxt
            for _ in range(step.duration):
                dist = self.tick(dist)
            if step.duration:
                fin = defaultdict(float)
                for (state, causes), pr in dist.items():
                    fin[self._write(state, step.final, causes)] += pr
                dist = fin
        if seg.branch is None:
            for (state, causes), pr in dist.items():
                if holds(state, self.problem.goal):
                    self.outcomes[SUCCESS] += pr
                else:
                    self._fail(None, state, causes, pr, (address, len(seg.steps)), self.problem.goal)
            return
        then, orelse = defaultdict(float), defaultdict(float)
        for key, pr in dist.items():
            (then if holds(key[0], seg.branch.condition) else orelse)[key] += pr
        if then:
            self.run(seg.branch.then, address + (True,), then)
        if orelse:
            self.run(seg.branch.orelse, address + (False,), orelse)

    def _fail(self, step, state, causes, pr, position, formula):
        bad = violated(state, formula)
        cmap = dict(causes)
        cs = tuple((l, cmap.get(self.domain.var_of(l.fact))) for l in bad)
        self.outcomes[Failure(step, bad, cs, position)] += pr


def enumerate_outcomes(plan: Plan, problem: Problem, domain: Domain, start: State | None = None,
                       max_support: int = MAX_SUPPORT) -> OutcomeDistribution:
    """Exact outcome distribution by branching on every event at every tick."""
    oracle = _Oracle(domain, problem, max_support)
    state = initial_state(problem) if start is None else start
    # causes are frozensets of (variable, last event): order-free and hash-cached
    oracle.run(plan, (), {(state, frozenset()): 1.0})
    return OutcomeDistribution(dict(oracle.outcomes))


def success_probability(plan: Plan, domain: Domain, problem: Problem) -> float:
    return enumerate_outcomes(plan, problem, domain).success
