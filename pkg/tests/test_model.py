import pytest
from hypothesis import given, strategies as st

from eventplan.errors import ArityError, FunctionalConflict, NotApplicable, SemanticError, TypeMismatch
from eventplan.model import (
    FAILED,
    GroundEffects,
    Literal,
    State,
    TypeHierarchy,
    apply_atomic,
    apply_effects,
    enabled_events,
    fact_literal,
    ground,
    grounding,
    holds,
    initial_state,
    violated,
)


def test_functional_add_replaces_old_value(domain):
    s = State(frozenset({("location", "p", "a"), ("protected", "p")}))
    s2 = apply_effects(s, GroundEffects(adds=(("location", "p", "b"),)), domain)
    assert s2.facts == {("location", "p", "b"), ("protected", "p")}
    assert s2.value(("location", "p"), True) == "b"


def test_deletes_before_adds(domain):
    s = State(frozenset({("protected", "p")}))
    eff = GroundEffects(adds=(("protected", "p"),), dels=(("protected", "p"),))
    assert ("protected", "p") in apply_effects(s, eff, domain)


def test_conflicting_functional_adds_raise(domain):
    eff = GroundEffects(adds=(("location", "p", "a"), ("location", "p", "b")))
    with pytest.raises(FunctionalConflict):
        apply_effects(State(), eff, domain)


def test_conditional_effects_read_the_pre_state(domain):
    s = State(frozenset({("location", "p", "l")}))
    eff = GroundEffects(
        cond_adds=(((fact_literal(("location", "p", "l")),), ("location", "p", "a")),),
        cond_dels=(((fact_literal(("location", "p", "l")),), ("location", "p", "l")),),
    )
    assert apply_effects(s, eff, domain).facts == {("location", "p", "a")}


def test_failed_state_values_and_holds():
    s = State(frozenset({("f", "a")})).fail()
    assert s.value(("f", "a"), False) is FAILED
    assert not holds(s, ())
    assert repr(FAILED) == "FAILED"


def test_closed_world_truth():
    s = State(frozenset({("f", "a")}))
    assert holds(s, [Literal("f", ("a",)), Literal("f", ("b",), False)])
    assert violated(s, [Literal("f", ("b",)), Literal("f", ("a",), False)]) == (
        Literal("f", ("b",)), Literal("f", ("a",), False))


def test_type_hierarchy_multiple_parents():
    th = TypeHierarchy({"location": ["object"], "vehicle": ["object", "location"], "taxi": ["vehicle"]})
    assert th.is_subtype("taxi", "location")
    assert th.is_subtype("taxi", "object")
    assert not th.is_subtype("location", "taxi")
    with pytest.raises(SemanticError):
        TypeHierarchy({"a": ["b"], "b": ["a"]})


def test_grounding_counts(domain, problem):
    g = grounding(domain, problem)
    names = [e.name for e in g.events]
    # two taxis, each with four same-city (from, to) pairs
    assert names.count("taxi-moves") == 8
    assert names.count("lose-package-from-airport") == 2
    assert names.count("lose-package-from-post-office") == 2
    # funds 0 would leave -1, below the floor
    assert sorted(s.args[1] for s in g.steps if s.name == "open-locker") == [1, 2, 3]
    assert [e.key for e in g.events] == sorted(e.key for e in g.events)


def test_ground_checks_types_and_arity(domain, problem):
    drive = domain.operators["drive"]
    with pytest.raises(TypeMismatch):
        ground(drive, {"?taxi": "package1", "?source": "pgh-po", "?dest": "pgh-airport"}, domain, problem)
    with pytest.raises(ArityError):
        ground(drive, {"?taxi": "pgh-taxi"}, domain, problem)


def test_open_locker_decrements_money(domain, problem):
    step = ground(domain.operators["open-locker"], {"?locker": "locker1", "?funds": 3}, domain, problem)
    s = apply_atomic(initial_state(problem), step, domain)
    assert s.value(("have-money",), True) == 2
    assert ("have-key", "locker1") in s
    with pytest.raises(NotApplicable):
        apply_atomic(s, step, domain)


def test_unstore_quantified_effect_moves_only_stored_packages(domain, problem):
    g = grounding(domain, problem).step_index
    s = State(frozenset({("location", "package1", "locker1"), ("location", "locker1", "seattle-airport"),
                         ("have-key", "locker1")}))
    s2 = apply_atomic(s, g[("unstore", ("locker1", "seattle-airport"))], domain)
    assert s2.value(("location", "package1"), True) == "seattle-airport"
    assert ("have-key", "locker1") not in s2
    empty = State(frozenset({("location", "locker1", "seattle-airport"), ("have-key", "locker1")}))
    s3 = apply_atomic(empty, g[("unstore", ("locker1", "seattle-airport"))], domain)
    assert s3.value(("location", "package1"), True) is None


def test_enabled_events_in_initial_state(domain, problem):
    names = {(e.name, e.args) for e in enabled_events(initial_state(problem), domain, problem)}
    assert names == {
        ("taxi-moves", ("pgh-taxi", "pgh-po", "pgh-airport")),
        ("taxi-moves", ("seattle-taxi", "seattle-po", "seattle-airport")),
        ("lose-package-from-post-office", ("package1", "pgh-po")),
    }


LOCS = ["a", "b", "c"]


@given(st.lists(st.tuples(st.sampled_from(["add", "del"]), st.sampled_from(["package1", "locker1"]),
                          st.sampled_from(LOCS)), max_size=6))
def test_functional_invariant_survives_any_effect_list(domain, effects):
    # at most one add per variable, otherwise the conflict is an error by design
    adds, dels, seen = [], [], set()
    for kind, obj, loc in effects:
        if kind == "add":
            if obj in seen:
                continue
            seen.add(obj)
            adds.append(("location", obj, loc))
        else:
            dels.append(("location", obj, loc))
    s = State(frozenset({("location", "package1", "a"), ("location", "locker1", "b")}))
    out = apply_effects(s, GroundEffects(tuple(adds), tuple(dels)), domain)
    for obj in ("package1", "locker1"):
        assert sum(1 for f in out.facts if f[:2] == ("location", obj)) <= 1
    for f in adds:
        assert f in out.facts
