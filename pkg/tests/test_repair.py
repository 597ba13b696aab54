import json

import pytest

import micro
from eventplan.errors import RepairFailed, Unsolvable
from eventplan.failures import analyze_plan
from eventplan.parser import parse_domain, parse_plan, parse_problem
from eventplan.repair import (
    BUDGET_EXHAUSTED,
    NO_REPAIR_IMPROVES,
    THRESHOLD_MET,
    exposure,
    protect_candidates,
    repair_branch,
    repair_protect,
    repair_reschedule,
    solve,
    success_of,
)

# hand-derived, see test_inference: the taxi is displaced at its drive with
# P_TAXI and the unattended package is lost with 0.1 afterwards
P_TAXI = 1 - (1 + 0.6 ** 6) / 2
P_LOSS = (1 - P_TAXI) * 0.1

CHORES = """(domain chores
  (:types tool - object)
  (:predicates (have ?t - tool) (waited) (done))
  (:operator wait :params () :duration 3 :pre (and) :final-add ((waited)))
  (:operator use :params (?t - tool) :duration 0 :pre (have ?t) :add ((done)))
  (:event drop :params (?t - tool) :probability 0.3 :pre (have ?t) :del ((have ?t))))"""
CHORES_PROBLEM = """(problem p (:domain chores) (:objects hammer - tool)
  (:init (have hammer)) (:goal (and (waited) (done))))"""


@pytest.fixture(scope="module")
def modes(initial_plan, domain, problem):
    return analyze_plan(initial_plan, domain, problem).failures


@pytest.fixture(scope="module")
def chores():
    d, p = parse_domain(CHORES), parse_problem(CHORES_PROBLEM)
    return d, p, parse_plan("(plan (wait) (use hammer))", d, p)


def test_branch_repair(modes, initial_plan, domain, problem):
    taxi = modes[0]
    branched = repair_branch(initial_plan, taxi, domain, problem)
    assert branched.branch is not None
    # displaced worlds load at once; the rest still risk the loss
    assert success_of(branched, domain, problem) == pytest.approx(1 - P_LOSS, abs=1e-12)
    assert success_of(branched, domain, problem) == pytest.approx(0.9476672, abs=1e-12)
    # the input plan is untouched
    assert initial_plan.branch is None


def test_branch_on_dead_end_fails(modes, initial_plan, domain, problem):
    # once the package is lost nothing reaches the goal
    with pytest.raises(RepairFailed):
        repair_branch(initial_plan, modes[1], domain, problem)


def test_protect_repair(modes, initial_plan, domain, problem):
    loss = modes[1]
    cands = protect_candidates(loss)
    assert [str(l) for _, l in cands] == ["(not (protected package1))"]
    fixed = repair_protect(initial_plan, loss, None, domain, problem)
    names = [s.name for s in fixed.steps]
    assert names.index("open-locker") < names.index("store") < names.index("unstore")
    # instantaneous steps leave the taxi exposure as it was
    assert success_of(fixed, domain, problem) == pytest.approx(1 - P_TAXI, abs=1e-12)


def test_protect_refuses_required_literal(modes, initial_plan, domain, problem):
    taxi = modes[0]
    with pytest.raises(RepairFailed):
        repair_protect(initial_plan, taxi, taxi.terminal, domain, problem, literal=taxi.literal)
    assert all(l != taxi.literal for _, l in protect_candidates(taxi))


def test_protect_rejects_foreign_event(modes, initial_plan, domain, problem):
    taxi, loss = modes
    with pytest.raises(ValueError):
        repair_protect(initial_plan, taxi, loss.terminal, domain, problem)


def test_reschedule_identity_on_fixture(modes, initial_plan, domain, problem):
    for mode in modes:
        assert repair_reschedule(initial_plan, mode, domain, problem) is initial_plan


def test_reschedule_shortens_exposure(chores):
    d, p, plan = chores
    assert success_of(plan, d, p) == pytest.approx(0.7 ** 3, abs=1e-12)
    mode = analyze_plan(plan, d, p).failures[0]
    assert exposure(plan.paths()[0], mode.var, d, p) == 3
    better = repair_reschedule(plan, mode, d, p)
    assert [s.name for s in better.steps] == ["use", "wait"]
    assert exposure(better.paths()[0], mode.var, d, p) == 0
    assert success_of(better, d, p) == pytest.approx(1.0, abs=1e-12)


def test_solve_meets_threshold(domain, problem, initial_plan):
    report = solve(domain, problem, threshold=0.95)
    assert report.reason == THRESHOLD_MET
    assert report.probability == pytest.approx(1.0, abs=1e-9)
    assert report.initial_plan == initial_plan
    assert report.initial_probability == pytest.approx(0.4709952, abs=1e-12)
    methods = [a.method for a in report.accepted]
    assert methods == ["branch", "protect"]
    befores = [a.before for a in report.accepted] + [report.probability]
    assert all(a < b for a, b in zip(befores, befores[1:]))
    # the finished plan has no failure modes left
    assert analyze_plan(report.plan, domain, problem).failures == []


def test_solve_low_threshold_returns_initial(domain, problem, initial_plan):
    report = solve(domain, problem, threshold=0.4)
    assert report.reason == THRESHOLD_MET and report.plan == initial_plan and report.log == []


def test_solve_budget(domain, problem):
    report = solve(domain, problem, threshold=0.95, budget=1)
    assert report.reason == BUDGET_EXHAUSTED
    assert len(report.log) == 1
    assert report.probability == pytest.approx(1 - P_LOSS, abs=1e-12)


def test_solve_no_repair_improves():
    m = micro.generate(18)
    d, p = parse_domain(m.domain_text()), parse_problem(m.problem_text())
    report = solve(d, p, threshold=1.0)
    assert report.reason == NO_REPAIR_IMPROVES
    assert not report.accepted
    assert report.probability == pytest.approx(m.outcome_distribution()["success"], abs=1e-12)


def test_solve_uses_reschedule(chores):
    d, p, _ = chores
    report = solve(d, p, threshold=0.99)
    assert report.reason == THRESHOLD_MET
    assert [a.method for a in report.accepted] == ["reschedule"]


def test_solve_arguments(domain, problem):
    with pytest.raises(ValueError):
        solve(domain, problem, threshold=1.5)
    with pytest.raises(ValueError):
        solve(domain, problem, budget=-1)
    impossible = parse_problem(CHORES_PROBLEM.replace("(:init (have hammer))", "(:init)"))
    with pytest.raises(Unsolvable):
        solve(parse_domain(CHORES), impossible)


def test_report_json(domain, problem):
    report = solve(domain, problem, threshold=0.95)
    doc = json.loads(json.dumps(report.to_json()))
    assert doc["termination"] == THRESHOLD_MET
    assert doc["threshold"] == 0.95
    assert len(doc["iterations"]) == len(report.log)
    assert {"iteration", "failure", "method", "accepted", "before", "after", "detail"} <= set(doc["iterations"][0])
    assert doc["plan"] != doc["initial_plan"]


@pytest.mark.parametrize("seed", [0, 10, 13])
def test_solve_never_worsens(seed):
    m = micro.generate(seed)
    d, p = parse_domain(m.domain_text()), parse_problem(m.problem_text())
    report = solve(d, p, threshold=1.0, budget=6)
    assert report.probability >= report.initial_probability - 1e-12
    assert report.reason in (THRESHOLD_MET, BUDGET_EXHAUSTED, NO_REPAIR_IMPROVES)
    for a in report.log:
        if a.accepted:
            assert a.after > a.before
