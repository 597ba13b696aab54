"""Compile a linear plan path into a belief net and grow it with event nodes.

Feature nodes are keyed by ``(var, instant)``.  An instant refines the
(time, stage) coordinate with a phase so that the states inside a durative
step get their own slots::

    (T, 0, 0)   end of tick T-1, after its events, before final effects
    (T, 1, S)   coordinate (T, S): the state seen by the step scheduled there
    (t, 2, 0)   start of tick t, after the spanning step's initial effects

Events of tick ``t`` happen between ``(t, 2, 0)`` and ``(t + 1, 0, 0)``.

Node kinds: ``feature`` (roles ``init``, ``effect``, ``persist``), ``action``,
``guard`` (a branch check on a conditional-plan path), ``event`` and the
single ``goal`` node.  Everything is deterministic given the event nodes.
"""
from __future__ import annotations

import copy
import itertools
from collections import defaultdict
from dataclasses import dataclass
from graphlib import TopologicalSorter

from .errors import InvalidPlan
from .model import (
    FAILED,
    NUMBER_TYPE,
    Domain,
    GroundEffects,
    Literal,
    Problem,
    State,
    apply_effects,
    canonical_key,
    grounding,
    initial_state,
)
from .timeline import Guard, as_path, nominal_run, schedule

BOUNDARY, COORD, TICK = 0, 1, 2
INIT_INSTANT = (0, COORD, 0)


def coord_instant(time: int, stage: int) -> tuple:
    return (time, COORD, stage)


def tick_instant(tick: int) -> tuple:
    return (tick, TICK, 0)


def instant_label(instant) -> str:
    t, phase, s = instant
    if phase == COORD:
        return f"{t}.{s}"
    return f"{t}+" if phase == TICK else f"{t}-"


def var_label(var) -> str:
    return "(" + " ".join(map(str, var)) + ")"


@dataclass(frozen=True)
class NetNode:
    id: int
    kind: str
    var: tuple | None = None
    instant: tuple | None = None
    role: str | None = None
    item: object = None
    index: int | None = None
    tick: int | None = None
    functional: bool = False
    literals: tuple = ()
    static_ok: bool = True
    effects: GroundEffects | None = None
    state_vars: tuple = ()
    value: object = None

    @property
    def sort_key(self):
        if self.kind == "feature":
            return (*self.instant, 0, self.id)
        if self.kind in ("action", "guard"):
            return (*self.instant, 1, self.index)
        if self.kind == "event":
            return (self.tick, 3, 0, 0, self.id)
        return (float("inf"), 0, 0, 0, 0)

    @property
    def label(self) -> str:
        if self.kind == "feature":
            return f"{var_label(self.var)}, {instant_label(self.instant)}"
        if self.kind == "event":
            return f"{self.item}, tick {self.tick}"
        if self.kind == "goal":
            return "goal"
        if self.kind == "guard":
            return f"{self.item}, {instant_label(self.instant)}"
        return f"{self.item}, {instant_label(self.instant)}"


def literal_holds(lit: Literal, value, functional: bool) -> bool:
    """Truth of ``lit`` given the value of its variable."""
    if value is FAILED:
        return False
    if functional:
        return (value == lit.fact[-1]) == lit.positive
    return bool(value) == lit.positive


def _mini_state(pairs, domain: Domain, extra=()) -> State:
    facts = set(extra)
    for var, value in pairs:
        if value is FAILED or value is None or value is False:
            continue
        facts.add(var if value is True else (*var, value))
    return State(frozenset(facts))


class BeliefNet:
    """Nodes, parent lists and enough context to evaluate them."""

    def __init__(self, path, domain: Domain, problem: Problem):
        self.path = as_path(path)
        self.domain = domain
        self.problem = problem
        self.nodes: list[NetNode] = []
        self.parents: dict[int, tuple] = {}
        self.features: dict[tuple, int] = {}
        self.events: dict[tuple, int] = {}
        self.by_var: dict[tuple, list] = defaultdict(list)
        self.goal: int | None = None
        self.stage = 1
        self.rounds = 0
        self.fixpoint = True
        self.max_chain = 0
        self._init = initial_state(problem)
        g = grounding(domain, problem)
        self.statics = g.statics
        self.static_facts = g.static_facts
        self._effect_cache = {}
        self._writers = defaultdict(list)
        for ev in g.events:
            for var in sorted({domain.var_of(f) for f in ev.effects.written_facts()}, key=str):
                self._writers[var].append(ev)

    # ------------------------------------------------------------ structure

    def copy(self) -> "BeliefNet":
        new = copy.copy(self)
        new.nodes = list(self.nodes)
        new.parents = dict(self.parents)
        new.features = dict(self.features)
        new.events = dict(self.events)
        new.by_var = defaultdict(list, {k: list(v) for k, v in self.by_var.items()})
        return new

    def _add(self, **kw) -> int:
        node = NetNode(id=len(self.nodes), **kw)
        self.nodes.append(node)
        self.parents[node.id] = ()
        if node.kind == "feature":
            self.features[(node.var, node.instant)] = node.id
            self.by_var[node.var].append(node.id)
        elif node.kind == "event":
            self.events[(node.item.key, node.tick)] = node.id
        return node.id

    def is_static(self, lit: Literal) -> bool:
        return lit.pred in self.statics

    def split_literals(self, lits):
        """``(dynamic literals, truth of the static ones)``."""
        dyn = tuple(l for l in lits if not self.is_static(l))
        ok = all((l.fact in self.static_facts) == l.positive for l in lits if self.is_static(l))
        return dyn, ok

    def var_of(self, lit: Literal):
        return self.domain.var_of(lit.fact)

    def ensure_feature(self, var, instant) -> int:
        nid = self.features.get((var, instant))
        if nid is not None:
            return nid
        functional = self.domain.is_functional(var[0])
        if instant == INIT_INSTANT:
            return self._add(kind="feature", var=var, instant=instant, role="init",
                             functional=functional, value=self._init.value(var, functional))
        return self._add(kind="feature", var=var, instant=instant, role="persist",
                         functional=functional)

    def feature(self, var, instant) -> int:
        return self.features[(var, instant)]

    def _resolve(self) -> dict:
        """Predecessor of every persistence node; adds missing init nodes."""
        preds = {}
        for var in list(self.by_var):
            ids = sorted(self.by_var[var], key=lambda i: self.nodes[i].instant)
            if self.nodes[ids[0]].role == "persist":
                self.ensure_feature(var, INIT_INSTANT)
                ids = sorted(self.by_var[var], key=lambda i: self.nodes[i].instant)
            self.by_var[var] = ids
            for prev, cur in zip(ids, ids[1:]):
                if self.nodes[cur].role == "persist":
                    preds[cur] = prev
        return preds

    @staticmethod
    def span(a, b) -> range:
        """Ticks whose events fall between instants ``a`` and ``b``."""
        # tick t sits between (t, TICK, 0) and (t + 1, BOUNDARY, 0); every
        # instant at time t precedes the first and follows the second
        return range(a[0], max(a[0], b[0]))

    def writers(self, var) -> list:
        return self._writers.get(var, [])

    # --------------------------------------------------------------- wiring

    def wire(self):
        preds = self._resolve()
        events_at = defaultdict(list)
        for (key, tick), nid in self.events.items():
            events_at[tick].append(nid)
        for nid in list(range(len(self.nodes))):
            node = self.nodes[nid]
            if node.kind != "feature" or node.role != "persist":
                continue
            pred = self.nodes[preds[nid]]
            evs = []
            for t in self.span(pred.instant, node.instant):
                for eid in sorted(events_at.get(t, ()), key=lambda e: canonical_key(self.nodes[e].item)):
                    ev = self.nodes[eid].item
                    if any(self.domain.var_of(f) == node.var for f in ev.effects.written_facts()):
                        evs.append(eid)
            self.parents[nid] = (preds[nid], *evs)
        self._check_acyclic()

    def _check_acyclic(self):
        ts = TopologicalSorter({n: self.parents[n] for n in range(len(self.nodes))})
        tuple(ts.static_order())
        for n in range(len(self.nodes)):
            key = self.nodes[n].sort_key
            for p in self.parents[n]:
                if not self.nodes[p].sort_key < key:
                    raise InvalidPlan(f"edge {p}->{n} breaks time order")

    def order(self) -> list:
        return sorted(range(len(self.nodes)), key=lambda n: self.nodes[n].sort_key)

    def children(self) -> dict:
        out = defaultdict(list)
        for n, ps in self.parents.items():
            for p in ps:
                out[p].append(n)
        return out

    def edges(self) -> list:
        return [(p, n) for n in range(len(self.nodes)) for p in self.parents[n]]

    def nodes_of(self, kind: str) -> list:
        return [n for n in self.nodes if n.kind == kind]

    def action_nodes(self) -> list:
        return self.nodes_of("action")

    def event_nodes(self) -> list:
        return self.nodes_of("event")

    def ancestors(self, nid: int) -> set:
        seen, stack = set(), [nid]
        while stack:
            for p in self.parents[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def literal_parents(self, nid: int) -> list:
        """``(literal, feature node)`` pairs read by an action, guard, event or goal node."""
        node = self.nodes[nid]
        ps = self.parents[nid]
        return list(zip(node.literals, ps[len(ps) - len(node.literals):]))

    # ------------------------------------------------------------ semantics

    def event_effect(self, event, var, value):
        return _event_effect(self, event, var, value)

    def compute(self, nid: int, vals):
        """Value of node ``nid`` given parent values; events return their enabledness."""
        node = self.nodes[nid]
        kind = node.kind
        if kind == "feature":
            if node.role == "init":
                return node.value
            if node.role == "persist":
                v = vals[0]
                if v is FAILED:
                    return FAILED
                for eid, fired in zip(self.parents[nid][1:], vals[1:]):
                    if fired:
                        v = self.event_effect(self.nodes[eid].item, node.var, v)
                return v
            if not vals[0]:
                return FAILED
            # static facts ride along so conditions over them evaluate correctly
            state = _mini_state(zip(node.state_vars, vals[1:]), self.domain, self.static_facts)
            return apply_effects(state, node.effects, self.domain).value(node.var, node.functional)
        if not node.static_ok:
            return False
        k = len(vals) - len(node.literals)
        if not all(vals[:k]):
            return False
        funcs = self._functional_flags(nid)
        truth = all(literal_holds(l, v, f) for l, v, f in zip(node.literals, vals[k:], funcs))
        if kind == "guard":
            return truth == node.item.expected
        return truth

    def _functional_flags(self, nid):
        return tuple(self.domain.is_functional(l.pred) for l in self.nodes[nid].literals)

    def value_domain(self, nid: int) -> tuple:
        node = self.nodes[nid]
        if node.kind != "feature":
            return (False, True)
        if node.role == "init":
            return (node.value,)
        if not node.functional:
            return (False, True, FAILED)
        return (*_functional_values(self.domain, self.problem, node.var[0]), None, FAILED)

    def table(self, nid: int) -> dict:
        """Conditional table: parent assignment -> {value: probability}."""
        node = self.nodes[nid]
        doms = [self.value_domain(p) for p in self.parents[nid]]
        out = {}
        for combo in itertools.product(*doms):
            v = self.compute(nid, combo)
            if node.kind == "event":
                p = node.item.probability if v else 0.0
                out[combo] = {True: p, False: 1.0 - p} if 0 < p < 1 else {bool(p): 1.0}
            else:
                out[combo] = {v: 1.0}
        return out

    def is_deterministic(self) -> bool:
        return all(prob in (0.0, 1.0)
                   for n in range(len(self.nodes))
                   for dist in self.table(n).values()
                   for prob in dist.values())

    # -------------------------------------------------------------- summary

    def summary(self) -> dict:
        kinds = defaultdict(int)
        for n in self.nodes:
            kinds[n.kind] += 1
        return {"stage": self.stage, "rounds": self.rounds, "fixpoint": self.fixpoint,
                "nodes": dict(kinds), "edges": len(self.edges())}


def _event_effect(net, event, var, value):
    key = (event.key, var, value)
    out = net._effect_cache.get(key, _MISSING)
    if out is _MISSING:
        functional = net.domain.is_functional(var[0])
        state = _mini_state([(var, value)], net.domain)
        out = apply_effects(state, event.effects, net.domain).value(var, functional)
        net._effect_cache[key] = out
    return out


_MISSING = object()


def _functional_values(domain: Domain, problem: Problem, pred: str) -> tuple:
    last = domain.predicates[pred].arg_types[-1]
    if last == NUMBER_TYPE:
        ints = [a for lit in problem.init for a in lit.args if isinstance(a, int)]
        return tuple(range(domain.floor, max(ints, default=domain.floor) + 1))
    return tuple(o for o, t in sorted(problem.objects.items()) if domain.types.is_subtype(t, last))


# --------------------------------------------------------------------------
# Stage 1


def _effect_instants(entry):
    t, s, d = entry.time, entry.stage, entry.step.duration
    if d == 0:
        return [(entry.step.effects, coord_instant(t, s), coord_instant(t, s + 1))]
    return [(entry.step.initial, coord_instant(t, s), tick_instant(t)),
            (entry.step.final, (t + d, BOUNDARY, 0), coord_instant(t + d, 0))]


def _needs_prior(eff: GroundEffects, var, domain: Domain) -> bool:
    functional = domain.is_functional(var[0])
    def of(facts):
        return [f for f in facts if domain.var_of(f) == var]
    if of(eff.adds):
        return False
    if not functional and of(eff.dels) and not any(domain.var_of(f) == var for _, f in eff.cond_adds):
        return False
    return True


def build_stage1(path, domain: Domain, problem: Problem) -> BeliefNet:
    """Deterministic skeleton: actions, their precondition and effect features, the goal."""
    path = as_path(path)
    run = nominal_run(path, domain, problem, force_guards=True)
    if run.failed_at is not None and run.failed_at < len(path.items):
        raise InvalidPlan(f"item {run.failed_at} is not applicable: "
                          + ", ".join(map(str, run.violated)))
    net = BeliefNet(path, domain, problem)
    sched = schedule(path)
    coords = {e.index: e for e in sched.entries}
    guard_coords = {idx: (t, s) for idx, t, s in sched.guard_coords}
    seq: list[int] = []
    for idx, item in enumerate(path.items):
        if isinstance(item, Guard):
            inst = coord_instant(*guard_coords[idx])
            dyn, ok = net.split_literals(item.condition)
            feats = [net.ensure_feature(net.var_of(l), inst) for l in dyn]
            gid = net._add(kind="guard", instant=inst, item=item, index=idx, literals=dyn, static_ok=ok)
            net.parents[gid] = tuple(feats)
            seq.append(gid)
            continue
        entry = coords[idx]
        inst = coord_instant(entry.time, entry.stage)
        dyn, ok = net.split_literals(item.pre)
        feats = [net.ensure_feature(net.var_of(l), inst) for l in dyn]
        aid = net._add(kind="action", instant=inst, item=item, index=idx, literals=dyn, static_ok=ok)
        net.parents[aid] = (*seq, *feats)
        seq = [aid]
        for eff, pre_inst, post_inst in _effect_instants(entry):
            written = {domain.var_of(f) for f in eff.written_facts()}
            for var in sorted(written, key=str):
                state_vars = []
                if _needs_prior(eff, var, domain):
                    state_vars.append(var)
                for cond, fact in (*eff.cond_adds, *eff.cond_dels):
                    if domain.var_of(fact) != var:
                        continue
                    for lit in cond:
                        if not net.is_static(lit) and net.var_of(lit) not in state_vars:
                            state_vars.append(net.var_of(lit))
                feats = [net.ensure_feature(v, pre_inst) for v in state_vars]
                if (var, post_inst) in net.features:
                    raise InvalidPlan(f"{var_label(var)} written twice at {instant_label(post_inst)}")
                nid = net._add(kind="feature", var=var, instant=post_inst, role="effect",
                               functional=domain.is_functional(var[0]), item=item, effects=eff,
                               state_vars=tuple(state_vars))
                net.parents[nid] = (aid, *feats)
    end = coord_instant(*sched.end)
    dyn, ok = net.split_literals(problem.goal)
    feats = [net.ensure_feature(net.var_of(l), end) for l in dyn]
    net.goal = net._add(kind="goal", instant=end, literals=dyn, static_ok=ok)
    net.parents[net.goal] = (*seq, *feats)
    net.wire()
    return net


# --------------------------------------------------------------------------
# Stage 2


class _Abstract:
    """Per-variable sets of possible values (non-relational)."""

    def __init__(self, net: BeliefNet):
        self.net = net
        self.sets: dict = {}

    def get(self, var) -> frozenset:
        s = self.sets.get(var)
        if s is None:
            f = self.net.domain.is_functional(var[0])
            s = frozenset([self.net._init.value(var, f)])
        return s

    def possibly(self, lit: Literal) -> bool:
        if self.net.is_static(lit):
            return (lit.fact in self.net.static_facts) == lit.positive
        f = self.net.domain.is_functional(lit.pred)
        return any(literal_holds(lit, v, f) for v in self.get(self.net.var_of(lit)))

    def surely(self, lit: Literal) -> bool:
        if self.net.is_static(lit):
            return (lit.fact in self.net.static_facts) == lit.positive
        f = self.net.domain.is_functional(lit.pred)
        return all(literal_holds(lit, v, f) for v in self.get(self.net.var_of(lit)))

    def refine(self, lit: Literal):
        if self.net.is_static(lit):
            return
        var = self.net.var_of(lit)
        f = self.net.domain.is_functional(lit.pred)
        keep = frozenset(v for v in self.get(var) if literal_holds(lit, v, f))
        if not keep:
            if f:
                keep = frozenset([lit.fact[-1]]) if lit.positive else frozenset([None])
            else:
                keep = frozenset([lit.positive])
        self.sets[var] = keep

    def apply(self, eff: GroundEffects):
        domain = self.net.domain
        updates = {}
        for var in {domain.var_of(f) for f in eff.written_facts()}:
            conds = [(c, fact, adds) for items, adds in ((eff.cond_adds, True), (eff.cond_dels, False))
                     for c, fact in items if domain.var_of(fact) == var]
            conds = [x for x in conds if all(self.possibly(l) for l in x[0])]
            forced = [x for x in conds if all(self.surely(l) for l in x[0])]
            optional = [x for x in conds if x not in forced]
            f = domain.is_functional(var[0])
            out = set()
            for r in range(len(optional) + 1):
                for chosen in itertools.combinations(optional, r):
                    fire = forced + list(chosen)
                    g = GroundEffects(
                        tuple(x for x in eff.adds if domain.var_of(x) == var)
                        + tuple(fact for _, fact, a in fire if a),
                        tuple(x for x in eff.dels if domain.var_of(x) == var)
                        + tuple(fact for _, fact, a in fire if not a))
                    for v in self.get(var):
                        out.add(apply_effects(_mini_state([(var, v)], domain), g, domain).value(var, f))
            updates[var] = frozenset(out)
        self.sets.update(updates)

    def fire(self, event):
        for var in {self.net.domain.var_of(f) for f in event.effects.written_facts()}:
            cur = self.get(var)
            self.sets[var] = cur | {self.net.event_effect(event, var, v) for v in cur}


def _tick_states(net: BeliefNet) -> dict:
    """Abstract tick-start states, letting every ground event fire wherever it might be enabled.

    Using all events (not only those already in the net) keeps the sets a
    sound over-approximation, so an event that enables another is found
    whichever order the rounds meet them in.
    """
    events = grounding(net.domain, net.problem).events
    absn = _Abstract(net)
    out = {}
    t = 0
    for item in net.path.items:
        if isinstance(item, Guard):
            if item.expected:
                for lit in item.condition:
                    absn.refine(lit)
            elif len(item.condition) == 1:
                absn.refine(item.condition[0].negate())
            continue
        absn.apply(item.effect_sets()[0])
        for tick in range(t, t + item.duration):
            snap = _Abstract(net)
            snap.sets = dict(absn.sets)
            out[tick] = snap
            for ev in events:
                if all(snap.possibly(l) for l in ev.pre):
                    absn.fire(ev)
        if item.duration:
            absn.apply(item.final)
            t += item.duration
    return out


def _augment(net: BeliefNet) -> bool:
    preds = net._resolve()
    ticks = _tick_states(net)
    added = False
    for nid in sorted(preds, key=lambda n: net.nodes[n].sort_key):
        node = net.nodes[nid]
        pred = net.nodes[preds[nid]]
        for t in net.span(pred.instant, node.instant):
            for ev in net.writers(node.var):
                if (ev.key, t) in net.events:
                    continue
                if not all(ticks[t].possibly(l) for l in ev.pre):
                    continue
                dyn, ok = net.split_literals(ev.pre)
                feats = [net.ensure_feature(net.var_of(l), tick_instant(t)) for l in dyn]
                eid = net._add(kind="event", item=ev, tick=t, literals=dyn, static_ok=ok)
                net.parents[eid] = tuple(feats)
                added = True
    return added


def build_stage2(net: BeliefNet, domain: Domain | None = None, max_chain: int | None = 3) -> BeliefNet:
    """Add event nodes over persistence links until nothing new appears or ``max_chain`` rounds ran.

    ``max_chain=None`` runs to the fixpoint.
    """
    if max_chain is not None and max_chain < 1:
        raise ValueError("max_chain must be at least 1")
    if domain is not None and domain is not net.domain and domain != net.domain:
        raise ValueError("net was built for a different domain")
    out = net.copy()
    rounds = 0
    while max_chain is None or rounds < max_chain:
        if not _augment(out):
            out.fixpoint = True
            break
        rounds += 1
    else:
        probe = out.copy()
        out.fixpoint = not _augment(probe)
    out.rounds = net.rounds + rounds if net.stage == 2 else rounds
    out.stage = 2
    out.max_chain = max(max_chain or rounds, net.max_chain)
    out.wire()
    return out


def build_net(path, domain: Domain, problem: Problem, max_chain: int | None = 3) -> BeliefNet:
    return build_stage2(build_stage1(path, domain, problem), domain, max_chain)


@dataclass(frozen=True)
class PersistenceLink:
    source: int
    target: int
    var: tuple
    ticks: range

    def __iter__(self):
        return iter((self.source, self.target, self.ticks))


def persistence_links(net: BeliefNet) -> list:
    """Feature-to-feature carry-overs with the ticks they span."""
    out = []
    for node in net.nodes:
        if node.kind == "feature" and node.role == "persist":
            src = net.parents[node.id][0]
            out.append(PersistenceLink(src, node.id, node.var,
                                       net.span(net.nodes[src].instant, node.instant)))
    return out


def export_dot(net: BeliefNet, name: str = "plan") -> str:
    """Graphviz text: actions shaded, events dashed, features labelled ``var, T.S``."""
    lines = [f'digraph "{name}" {{', "  rankdir=LR;"]
    for node in net.nodes:
        label = node.label.replace('"', r"\"")
        if node.kind == "event":
            label = f"{label}, p={node.item.probability:g}"
            attrs = f'label="{label}", style=dashed'
        elif node.kind in ("action", "guard"):
            attrs = f'label="{label}", shape=box, style=filled, fillcolor=gray80'
        elif node.kind == "goal":
            attrs = f'label="{label}", shape=doublecircle'
        else:
            attrs = f'label="{label}"'
        lines.append(f"  n{node.id} [{attrs}];")
    for p, n in net.edges():
        lines.append(f"  n{p} -> n{n};")
    lines.append("}")
    return "\n".join(lines) + "\n"
