import dataclasses

import pytest

import micro
from eventplan.beliefnet import build_net
from eventplan.errors import NetTooLarge, TreeTooLarge
from eventplan.inference import (
    enumerate_outcomes,
    evaluate_net,
    event_marginal,
    joint,
    net_success,
    node_marginal,
)
from eventplan.model import FAILED, Literal
from eventplan.parser import parse_domain, parse_plan, parse_problem
from eventplan.planner import replan
from eventplan.timeline import attach_branch, force_condition, nominal_run

# The seattle taxi is a two-state chain flipping with p = 0.2 per tick, so
# after t ticks it is back at the post office with probability
# (1 + 0.6**t) / 2.  It is exposed for the six ticks before its drive.
P_AT_PO = [(1 + 0.6 ** t) / 2 for t in range(7)]
P_TAXI = 1 - P_AT_PO[6]                  # 0.476672
P_SUCCESS = (1 - P_TAXI) * 0.9           # 0.4709952
P_LOSS = (1 - P_TAXI) * 0.1              # 0.0523328


@pytest.fixture(scope="module")
def net(initial_plan, domain, problem):
    return build_net(initial_plan.paths()[0], domain, problem, max_chain=3)


def test_hand_derived_constants():
    assert P_TAXI == pytest.approx(0.476672, abs=1e-12)
    assert P_SUCCESS == pytest.approx(0.4709952, abs=1e-12)
    assert P_LOSS == pytest.approx(0.0523328, abs=1e-12)


def test_net_success(net):
    assert evaluate_net(net) == pytest.approx(P_SUCCESS, abs=1e-12)


def test_event_marginals(net, domain):
    there = ("taxi-moves", ("seattle-taxi", "seattle-po", "seattle-airport"))
    back = ("taxi-moves", ("seattle-taxi", "seattle-airport", "seattle-po"))
    for t in range(6):
        assert event_marginal(net, (there, t)) == pytest.approx(P_AT_PO[t] * 0.2, abs=1e-12)
    for t in range(1, 6):
        assert event_marginal(net, (back, t)) == pytest.approx((1 - P_AT_PO[t]) * 0.2, abs=1e-12)
    loss = ("lose-package-from-airport", ("package1", "seattle-airport"))
    assert event_marginal(net, (loss, 6)) == pytest.approx(0.1, abs=1e-12)
    assert event_marginal(net, (loss, 5)) == 0.0
    with pytest.raises(ValueError):
        event_marginal(net, net.goal)


def test_taxi_location_marginal(net):
    fid = net.feature(("location", "seattle-taxi"), (6, 1, 1))
    dist = node_marginal(net, fid)
    assert dist["seattle-po"] == pytest.approx(P_AT_PO[6], abs=1e-12)
    assert dist["seattle-airport"] == pytest.approx(P_TAXI, abs=1e-12)


def test_oracle_outcomes(initial_plan, domain, problem):
    out = enumerate_outcomes(initial_plan, problem, domain)
    assert out.success == pytest.approx(P_SUCCESS, abs=1e-12)
    assert out.failure_mass("drive", ("seattle-taxi", "seattle-po", "seattle-airport")) == \
        pytest.approx(P_TAXI, abs=1e-12)
    assert out.failure_mass("load-taxi") == pytest.approx(P_LOSS, abs=1e-12)
    assert out.total() == pytest.approx(1.0, abs=1e-12)
    causes = {k: v for k, v in out.by_cause().items()}
    assert sum(causes.values()) == pytest.approx(P_TAXI + P_LOSS, abs=1e-12)
    assert {names for _, names in causes} == {("taxi-moves",), ("lose-package-from-airport",)}


def test_pinned_precondition_forces_goal_false(net):
    # a failed precondition nulls the rest of the plan
    for action in net.action_nodes():
        for lit, fid in net.literal_parents(action.id):
            node = net.nodes[fid]
            bad = None if node.functional else (not lit.positive)
            assert evaluate_net(net, evidence={fid: bad}) == 0.0
            assert evaluate_net(net, evidence={fid: FAILED}) == 0.0


def test_joint_tracks_origins(net):
    fid = net.feature(("location", "seattle-taxi"), (6, 1, 1))
    dist = joint(net, keep=(fid,), track_var=("location", "seattle-taxi"))
    origins = {net.nodes[o].item.args[2] for (v, o), _ in dist if o is not None}
    assert origins == {"seattle-po", "seattle-airport"}
    assert sum(p for ((v, o), _), p in dist.items() if o is None) == pytest.approx(0.8 ** 6)


def test_size_guards(net, initial_plan, domain, problem):
    with pytest.raises(NetTooLarge):
        joint(net, max_events=5)
    with pytest.raises(TreeTooLarge):
        enumerate_outcomes(initial_plan, problem, domain, max_support=2)


def test_branched_plan_net_matches_oracle(initial_plan, domain, problem):
    cond = (Literal("location", ("seattle-taxi", "seattle-airport")),)
    state = nominal_run(initial_plan.paths()[0], domain, problem).before[6]
    alt = replan(domain, problem, force_condition(state, cond, True, domain))
    branched = attach_branch(initial_plan, 6, cond, alt)
    exact = enumerate_outcomes(branched, problem, domain).success
    assert net_success(branched, domain, problem, None) == pytest.approx(exact, abs=1e-12)
    # the displaced side loads at once; the other side still drives and risks the loss
    assert exact == pytest.approx(P_TAXI + 0.9 * (1 - P_TAXI), abs=1e-12)
    assert exact == pytest.approx(1 - P_LOSS, abs=1e-12)


@pytest.mark.parametrize("seed", range(20, 40))
def test_micro_net_and_oracle_match_reference(seed):
    m = micro.generate(seed)
    d, p = parse_domain(m.domain_text()), parse_problem(m.problem_text())
    plan = parse_plan(m.plan_text(), d, p)
    ref = m.outcome_distribution()
    out = enumerate_outcomes(plan, p, d)
    assert out.success == pytest.approx(ref.get("success", 0.0), abs=1e-12)
    by_index = {}
    for f, mass in out.failures.items():
        key = "goal" if f.step is None else f.position[1]
        by_index[key] = by_index.get(key, 0.0) + mass
    for key in set(by_index) | (set(ref) - {"success"}):
        assert by_index.get(key, 0.0) == pytest.approx(ref.get(key, 0.0), abs=1e-12)
    assert evaluate_net(build_net(plan.paths()[0], d, p, None)) == pytest.approx(ref["success"], abs=1e-9)


def test_removing_an_event_never_hurts(initial_plan, domain, problem):
    base = evaluate_net(build_net(initial_plan.paths()[0], domain, problem, 3))
    for name in domain.events:
        fewer = dataclasses.replace(domain, events={k: v for k, v in domain.events.items() if k != name})
        assert evaluate_net(build_net(initial_plan.paths()[0], fewer, problem, 3)) >= base - 1e-12
    calm = dataclasses.replace(domain, events={})
    assert evaluate_net(build_net(initial_plan.paths()[0], calm, problem, 3)) == 1.0
