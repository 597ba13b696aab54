"""Failure modes read off a belief net, plus two Markov-chain closed forms."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .beliefnet import BeliefNet, build_net, literal_holds
from .errors import DomainError
from .inference import enumerate_outcomes, joint
from .model import FAILED, Domain, GroundEvent, Literal, Problem, canonical_key, fact_literal
from .timeline import Plan


@dataclass(frozen=True)
class FailureMode:
    """An event sequence that can falsify ``literal`` when ``step`` (or the goal test) reads it.

    ``probability`` is conditioned on the path's branch checks passing, so a
    one-event mode carries its event's marginal.  ``path_mass`` is the joint
    mass of the same worlds restricted to those where the step is actually
    reached, which is what the execution oracle counts.
    """

    step: object
    literal: Literal
    terminal: GroundEvent
    chain: tuple
    interval: tuple
    probability: float
    path_mass: float = 0.0
    path_index: int = 0
    item_index: int = 0
    position: tuple = ((), 0)
    node: int = -1
    terminal_nodes: tuple = ()
    value: object = None
    var: tuple = ()
    _functional: bool = field(default=True, repr=False, compare=False)

    @property
    def violated(self) -> tuple:
        return (self.literal,)

    @property
    def is_goal(self) -> bool:
        return self.step is None

    @property
    def condition(self) -> tuple:
        """Literals describing the event-produced situation at the threatened point."""
        if self._functional:
            var = self.literal.fact[:-1]
            if self.value is None:
                return (fact_literal(self.literal.fact, False),)
            return (fact_literal((*var, self.value)),)
        return (self.literal.negate(),)

    @property
    def ticks(self) -> int:
        return self.interval[1] - self.interval[0]

    def describe(self) -> str:
        where = "goal" if self.step is None else str(self.step)
        chain = " -> ".join(map(str, self.chain))
        return (f"{where} needs {self.literal}; threatened by {chain} "
                f"over ticks {self.interval[0]}..{self.interval[1] - 1} (p = {self.probability:.6g})")


def _chain(net: BeliefNet, events: list, terminal_key) -> tuple:
    first = {}
    for eid in events:
        node = net.nodes[eid]
        first.setdefault(node.item.key, (node.tick, canonical_key(node.item), node.item))
    ordered = [v[2] for k, v in sorted(first.items(), key=lambda kv: kv[1][:2]) if k != terminal_key]
    return tuple(ordered) + (first[terminal_key][2],)


def find_failures(net: BeliefNet, plan: Plan | None = None, max_chain: int | None = None,
                  path_index: int = 0) -> list:
    """Failure modes of one path net, one-event chains first.

    A mode groups the worlds where the literal read by a step is false at
    that point, has not been nulled by an earlier failure, and was last
    changed by a given ground event.
    """
    max_chain = max_chain or net.max_chain or None
    path = net.path
    guards = [n.id for n in net.nodes if n.kind == "guard"]
    targets = [n.id for n in net.nodes if n.kind == "action"] + [net.goal]
    out = []
    for tid in targets:
        tnode = net.nodes[tid]
        # the step is reached when the previous action ran and pending checks passed
        reach = tuple(q for q in net.parents[tid] if net.nodes[q].kind in ("action", "guard"))
        for lit, fid in net.literal_parents(tid):
            anc = [a for a in net.ancestors(fid) if net.nodes[a].kind == "event"]
            if not anc:
                continue
            fnode = net.nodes[fid]
            dist = joint(net, keep=(fid, *guards, *reach), track_var=fnode.var, goal=False)
            passing = 0.0
            groups = defaultdict(float)
            reached = defaultdict(float)
            values = defaultdict(lambda: defaultdict(float))
            for key, p in dist.items():
                (value, origin) = key[0]
                gvals, rvals = key[1:1 + len(guards)], key[1 + len(guards):]
                if not all(gvals):
                    continue
                passing += p
                if value is FAILED or origin is None or literal_holds(lit, value, fnode.functional):
                    continue
                ekey = net.nodes[origin].item.key
                groups[ekey] += p
                if all(rvals):
                    reached[ekey] += p
                values[ekey][value] += p
            for ekey, mass in groups.items():
                if mass <= 0:
                    continue
                term = [a for a in anc if net.nodes[a].item.key == ekey]
                ticks = sorted(net.nodes[a].tick for a in term)
                chain = _chain(net, anc, ekey)
                if max_chain is not None:
                    chain = chain[-max_chain:]
                index = tnode.index if tnode.kind == "action" else len(path.items)
                if index < len(path.origins):
                    position = path.origins[index]
                elif path.origins:
                    address, i = path.origins[-1]
                    position = (address, i + 1)
                else:
                    position = ((), 0)
                value = max(values[ekey].items(), key=lambda kv: kv[1])[0]
                out.append(FailureMode(
                    step=tnode.item if tnode.kind == "action" else None,
                    literal=lit,
                    terminal=net.nodes[term[0]].item,
                    chain=chain,
                    interval=(ticks[0], ticks[-1] + 1),
                    probability=mass / passing if passing > 0 else 0.0,
                    path_mass=reached[ekey],
                    path_index=path_index,
                    item_index=index,
                    position=position,
                    node=fid,
                    terminal_nodes=tuple(sorted(term, key=lambda a: net.nodes[a].tick)),
                    value=value,
                    var=fnode.var,
                    _functional=fnode.functional,
                ))
    out.sort(key=lambda m: len(m.chain))
    return out


def rank_failures(modes) -> list:
    """Most probable first; ties go to the earliest exposure."""
    return sorted(modes, key=lambda m: (-m.probability, m.interval[0]))


@dataclass
class Analysis:
    success: float
    nets: list
    failures: list
    outcomes: object = None


def analyze_plan(plan: Plan, domain: Domain, problem: Problem, max_chain: int | None = 3) -> Analysis:
    """Oracle success, one Stage-2 net per path and the ranked failure modes of all paths."""
    nets, modes = [], []
    for i, path in enumerate(plan.paths()):
        net = build_net(path, domain, problem, max_chain)
        nets.append(net)
        modes.extend(find_failures(net, plan, max_chain, path_index=i))
    outcomes = enumerate_outcomes(plan, problem, domain)
    return Analysis(outcomes.success, nets, rank_failures(modes), outcomes)


# --------------------------------------------------------------------------
# closed forms


def _check(p: float, n: int):
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability {p} outside [0, 1]")
    if n < 0 or int(n) != n:
        raise DomainError(f"tick count {n} must be a non-negative integer")


def two_state_flip(p: float, n: int) -> float:
    """Chance a two-state chain that flips with probability ``p`` per tick ends displaced after ``n`` ticks."""
    _check(p, n)
    return (1.0 - (1.0 - 2.0 * p) ** n) / 2.0


def persistence_survival(p: float, n: int) -> float:
    """Chance a fact survives ``n`` ticks of an always-enabled destroyer with per-tick probability ``p``."""
    _check(p, n)
    return (1.0 - p) ** n
