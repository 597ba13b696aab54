import itertools
from collections import defaultdict

import pytest
from hypothesis import given, strategies as st

import micro
from eventplan.beliefnet import build_net
from eventplan.errors import DomainError
from eventplan.failures import (
    analyze_plan,
    find_failures,
    persistence_survival,
    rank_failures,
    two_state_flip,
)
from eventplan.inference import enumerate_outcomes
from eventplan.parser import parse_domain, parse_plan, parse_problem


def brute_flip(p, n):
    """Sum over every flip sequence of length n with an odd number of flips."""
    total = 0.0
    for seq in itertools.product((0, 1), repeat=n):
        k = sum(seq)
        if k % 2:
            total += p ** k * (1 - p) ** (n - k)
    return total


@pytest.fixture(scope="module")
def analysis(initial_plan, domain, problem):
    return analyze_plan(initial_plan, domain, problem, max_chain=3)


def test_fixture_failure_modes(analysis):
    assert analysis.success == pytest.approx(0.4709952, abs=1e-12)
    taxi, loss = analysis.failures
    assert taxi.probability == pytest.approx(0.476672, abs=1e-12)
    assert str(taxi.step) == "(drive seattle-taxi seattle-po seattle-airport)"
    assert str(taxi.literal) == "(location seattle-taxi seattle-po)"
    assert [str(e) for e in taxi.chain] == ["(taxi-moves seattle-taxi seattle-airport seattle-po)",
                                           "(taxi-moves seattle-taxi seattle-po seattle-airport)"]
    assert taxi.interval == (0, 6) and taxi.ticks == 6
    assert [str(l) for l in taxi.condition] == ["(location seattle-taxi seattle-airport)"]
    assert loss.probability == pytest.approx(0.1, abs=1e-12)
    assert str(loss.terminal) == "(lose-package-from-airport package1 seattle-airport)"
    assert len(loss.chain) == 1 and loss.interval == (6, 7)
    assert [str(l) for l in loss.condition] == ["(location package1 lost)"]
    assert not taxi.is_goal
    assert "threatened by" in taxi.describe()


def test_single_event_mode_matches_closed_form(analysis):
    taxi = analysis.failures[0]
    assert taxi.probability == pytest.approx(two_state_flip(0.2, taxi.ticks), abs=1e-12)


def test_failure_mass_matches_oracle(analysis):
    # the loss mode is conditional on reaching the load; the oracle mass is joint
    loss = analysis.failures[1]
    assert loss.path_mass == pytest.approx(analysis.outcomes.failure_mass("load-taxi"), abs=1e-12)


def test_rank_and_chain_order(analysis, initial_plan, domain, problem):
    net = analysis.nets[0]
    raw = find_failures(net, initial_plan)
    assert [len(m.chain) for m in raw] == sorted(len(m.chain) for m in raw)
    ranked = rank_failures(raw)
    assert [m.probability for m in ranked] == sorted((m.probability for m in raw), reverse=True)
    short = find_failures(net, initial_plan, max_chain=1)
    assert all(len(m.chain) == 1 for m in short)


@pytest.mark.parametrize("p", [0.0, 0.05, 0.2, 0.5, 0.73, 1.0])
@pytest.mark.parametrize("n", [0, 1, 2, 5, 9, 12])
def test_two_state_flip_brute_force(p, n):
    assert two_state_flip(p, n) == pytest.approx(brute_flip(p, n), abs=1e-12)


@given(st.floats(0, 1), st.integers(0, 60))
def test_closed_forms_are_probabilities(p, n):
    assert -1e-15 <= two_state_flip(p, n) <= 1 + 1e-15
    assert 0.0 <= persistence_survival(p, n) <= 1.0


def test_persistence_survival():
    assert persistence_survival(0.1, 1) == pytest.approx(0.9)
    assert persistence_survival(0.1, 3) == pytest.approx(sum(
        0.9 ** 3 for seq in itertools.product((0,), repeat=3)))
    with pytest.raises(DomainError):
        persistence_survival(1.5, 2)
    with pytest.raises(DomainError):
        two_state_flip(0.2, -1)
    with pytest.raises(DomainError):
        two_state_flip(0.2, 2.5)


@pytest.mark.parametrize("seed", range(40, 52))
def test_micro_modes_bracket_oracle_failures(seed):
    m = micro.generate(seed)
    d, p = parse_domain(m.domain_text()), parse_problem(m.problem_text())
    plan = parse_plan(m.plan_text(), d, p)
    modes = find_failures(build_net(plan.paths()[0], d, p, None), plan)
    per_lit = defaultdict(float)
    for mode in modes:
        key = "goal" if mode.step is None else mode.item_index
        per_lit[(key, mode.literal)] += mode.path_mass
    ref = m.outcome_distribution()
    for key in {k for k, _ in per_lit} | (set(ref) - {"success"}):
        masses = [v for (k, _), v in per_lit.items() if k == key]
        observed = ref.get(key, 0.0)
        # each literal's modes cover disjoint worlds inside the step's failure
        assert max(masses, default=0.0) <= observed + 1e-9
        assert observed <= sum(masses) + 1e-9


def test_outcomes_enumerated_once(analysis, initial_plan, domain, problem):
    assert analysis.outcomes.success == enumerate_outcomes(initial_plan, problem, domain).success
