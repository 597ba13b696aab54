import pytest
from hypothesis import given, settings, strategies as st

from eventplan.errors import DomainSyntaxError, LocatedError, SemanticError, UnknownOperator
from eventplan.fixtures import read_data
from eventplan.model import grounding
from eventplan.parser import (
    dumps,
    parse_domain,
    parse_plan,
    parse_problem,
    plan_from_json,
    plan_to_json,
    read_sexprs,
    serialize_domain,
    serialize_plan,
    serialize_problem,
    validate,
)
from eventplan.timeline import Branch, Plan

DOMAIN = read_data("logistics.evd")
PROBLEM = read_data("logistics.evp")


def test_fixture_shape(domain, problem):
    assert sorted(domain.operators) == ["drive", "fly", "load-airplane", "load-taxi", "open-locker",
                                        "store", "unload-airplane", "unload-taxi", "unstore"]
    assert {n: e.probability for n, e in domain.events.items()} == {
        "lose-package-from-airport": 0.1, "lose-package-from-post-office": 0.05, "taxi-moves": 0.2}
    assert domain.operators["fly"].duration == 5
    assert domain.operators["drive"].duration == 1
    assert domain.is_functional("location") and not domain.is_functional("protected")
    assert validate(domain, problem) == []
    assert [str(l) for l in problem.goal] == ["(location package1 seattle-po)"]


def test_comments_and_positions():
    forms = read_sexprs("; note\n(a (b c)\n  d)")
    assert len(forms) == 1
    assert forms[0].loc == (2, 1)
    assert forms[0][1].loc == (2, 4)


@pytest.mark.parametrize("edit, exc, where", [
    (("(:functional location have-money)", "(:functional location have-money"), DomainSyntaxError, None),
    ((":probability 0.05", ":probability 1.7"), SemanticError, (99, 18)),
    ((":probability 0.1", ":probability 0"), SemanticError, (91, 18)),
    (("?taxi - taxi ?loc - place)", "?taxi - cab ?loc - place)"), SemanticError, None),
    (("(location ?package ?loc) (location ?taxi ?loc))", "(location ?package) (location ?taxi ?loc))"),
     SemanticError, (21, 15)),
])
def test_domain_errors_are_located(edit, exc, where):
    with pytest.raises(exc) as info:
        parse_domain(DOMAIN.replace(*edit, 1))
    assert isinstance(info.value, LocatedError)
    assert info.value.line is not None
    if where:
        assert (info.value.line, info.value.col) == where


@pytest.mark.parametrize("edit, fragment", [
    (("(location package1 pgh-po)", "(location package1 pgh-po) (location package1 lost)"),
     "functional conflict"),
    (("(location package1 seattle-po)", "(location package2 seattle-po)"), "undeclared object package2"),
    (("(:domain logistics)", "(:domain other)"), "not logistics"),
    (("(same-city pgh-po pgh-airport)", "(same-city package1 pgh-airport)"), "not a place"),
])
def test_problem_diagnostics(domain, edit, fragment):
    diags = validate(domain, parse_problem(PROBLEM.replace(*edit, 1)))
    assert len(diags) == 1
    assert fragment in diags[0].message
    assert diags[0].line is not None


def test_plan_errors(domain, problem):
    with pytest.raises(UnknownOperator) as info:
        parse_plan("(plan (teleport package1))", domain, problem)
    assert (info.value.line, info.value.col) == (1, 7)
    with pytest.raises(DomainSyntaxError):
        parse_plan("(plan (fly airplane1 pgh-airport))", domain, problem)
    with pytest.raises(DomainSyntaxError):
        parse_plan("(plan (branch (and) (then) (else)) (drive pgh-taxi pgh-po pgh-airport))", domain, problem)


def test_bundled_plan_file(initial_plan):
    assert [str(s) for s in initial_plan.steps] == [
        "(load-taxi package1 pgh-taxi pgh-po)",
        "(drive pgh-taxi pgh-po pgh-airport)",
        "(unload-taxi package1 pgh-taxi pgh-airport)",
        "(load-airplane package1 airplane1 pgh-airport)",
        "(fly airplane1 pgh-airport seattle-airport)",
        "(unload-airplane package1 airplane1 seattle-airport)",
        "(drive seattle-taxi seattle-po seattle-airport)",
        "(load-taxi package1 seattle-taxi seattle-airport)",
        "(drive seattle-taxi seattle-airport seattle-po)",
        "(unload-taxi package1 seattle-taxi seattle-po)",
    ]


def test_domain_and_problem_round_trip(domain, problem):
    assert parse_domain(serialize_domain(domain)) == domain
    assert parse_problem(serialize_problem(problem)) == problem


def _plans(steps, conds):
    leaf = st.builds(lambda xs: Plan(tuple(xs)), st.lists(st.sampled_from(steps), max_size=3))
    return st.recursive(
        leaf,
        lambda inner: st.builds(
            lambda xs, c, t, e: Plan(tuple(xs), Branch(c, t, e)),
            st.lists(st.sampled_from(steps), max_size=3), st.sampled_from(conds), inner, inner),
        max_leaves=4)


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_plan_text_and_json_round_trip(domain, problem, data):
    g = grounding(domain, problem)
    steps = g.steps[:12]
    conds = [tuple(problem.goal), tuple(problem.init[:2]), tuple(l.negate() for l in problem.init[:1])]
    plan = data.draw(_plans(steps, conds))
    assert parse_plan(serialize_plan(plan), domain, problem) == plan
    assert plan_from_json(plan_to_json(plan), domain, problem) == plan
    assert dumps(plan_to_json(plan)) == dumps(plan_to_json(plan_from_json(plan_to_json(plan), domain, problem)))
