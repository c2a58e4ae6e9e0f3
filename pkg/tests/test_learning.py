import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from metagarden.garden import GardenWorld
from metagarden.learning import (ADJ, NEG_INF, ExampleStore, FoilConfig, HornClause, RepairLog,
                                 RuleLearner, clause_direction, compile_effects, direction_effect,
                                 foil, foil_gain, harvest_examples, repair_operator)
from metagarden.logic import Atom
from metagarden.pddl import parse_domain, render_domain

from conftest import ALL_DIRECTIONS, partial_model, spray_record, synthetic_records

NORTH_CLAUSE = "spray(pos1,time2) :- spray(pos0,time1), adj_time(time2,time1), adj_north(pos0,pos1)"


def _store(flawed, missing, episodes, seed=0):
    model = partial_model(flawed, missing)
    store = ExampleStore()
    for recs in synthetic_records(seed, episodes):
        harvest_examples(recs, model, store)
    return store


# -- harvesting ------------------------------------------------------------------

def test_harvest_three_plant_spray(flawed, three_plant_world):
    rec, _ = spray_record(three_plant_world, (3, 2))
    pos, neg, bg = harvest_examples([rec], flawed)
    assert pos == [("pos3-3", 1)]
    assert neg == [("pos2-5", 1)]
    assert bg["spray"] == {("pos3-2", 0)}
    assert ("pos3-2", "pos3-3") in bg["adj_north"]
    assert bg["adj_time"] == {(1, 0)}


def test_harvest_converged_model_has_no_positives(truth):
    for recs in synthetic_records(5, 6):
        pos, _, _ = harvest_examples(recs, truth)
        assert pos == []


def test_harvest_two_sprays_disjoint_times(flawed, three_plant_world):
    r1, w = spray_record(three_plant_world, (2, 4))
    r2, _ = spray_record(GardenWorld(w.agent, w.plants, 1), (6, 6))
    store = ExampleStore()
    harvest_examples([r1, r2], flawed, store)
    assert sorted(store.sprays) == [("pos2-4", 0), ("pos6-6", 1)]
    times = {e.time for e in store.examples}
    assert times == {1, 2}


def test_harvest_episodes_get_fresh_times(flawed, three_plant_world):
    store = ExampleStore()
    rec, _ = spray_record(three_plant_world, (3, 2))
    harvest_examples([rec], flawed, store)
    harvest_examples([rec], flawed, store)
    assert [t for _, t in store.sprays] == [0, 3]
    assert store.positives() == [("pos3-3", 1), ("pos3-3", 4)]


def test_store_round_trip(flawed, tmp_path):
    store = _store(flawed, ["north"], 3)
    path = tmp_path / "examples.txt"
    store.save(path)
    again = ExampleStore.load(path.read_text())
    assert again.examples == store.examples and again.sprays == store.sprays
    assert again.dump() == store.dump()
    text = store.dump()
    assert text.splitlines()[0].startswith("pos(") and "adj_time(" in text and "adj_north(" in text


# -- gain ------------------------------------------------------------------------

def test_gain_examples():
    assert foil_gain(4, 4, 4, 0, 4) == 4.0
    assert foil_gain(3, 5, 3, 5, 3) == 0.0
    assert foil_gain(4, 4, 0, 2, 0) == NEG_INF


@given(st.integers(1, 50), st.integers(0, 50), st.integers(1, 50), st.integers(0, 50), st.integers(0, 50))
def test_gain_sign(p0, n0, p1, n1, t):
    g = foil_gain(p0, n0, p1, n1, t)
    if n1 * p0 <= n0 * p1:
        assert g >= -1e-9
    else:
        assert g <= 1e-9
    assert math.isclose(foil_gain(p0, n0, p0, n0, t), 0.0, abs_tol=1e-12)


# -- induction -------------------------------------------------------------------

def test_foil_no_positives():
    r = foil("spray", [], [("pos2-2", 1)], {})
    assert r.clauses == [] and r.complete


def test_foil_north_only(flawed):
    store = _store(flawed, ["north"], 20)
    r = foil("spray", store.positives(), store.negatives(), store.background())
    assert [str(c) for c in r] == [NORTH_CLAUSE]
    assert r.complete


def test_foil_deterministic(flawed):
    store = _store(flawed, ["east", "sw"], 8, seed=3)
    args = (store.positives(), store.negatives(), store.background())
    assert [str(c) for c in foil("spray", *args)] == [str(c) for c in foil("spray", *args)]


def test_foil_body_cap_discards_inconsistent():
    # contradictory evidence: same cell and time both positive and negative
    bg = {"spray": {("pos3-2", 0)}, "adj_time": {(1, 0)}, "adj_north": {("pos3-2", "pos3-3")}}
    r = foil("spray", [("pos3-3", 1)], [("pos3-3", 1)], bg, FoilConfig(max_body=2))
    assert r.clauses == [] and r.uncovered == [("pos3-3", 1)]
    assert not r.complete


def test_foil_config_validation():
    with pytest.raises(ValueError):
        FoilConfig(max_body=0)


# -- compiling and repair ------------------------------------------------------------

def _clause(pred):
    return HornClause(Atom("spray", ("pos1", "time2")),
                      (Atom("spray", ("pos0", "time1")), Atom("adj_time", ("time2", "time1")),
                       Atom(pred, ("pos0", "pos1"))))


def test_compile_north_clause_is_verbatim_effect():
    (e,) = compile_effects([_clause("adj_north")])
    assert e == direction_effect("north")
    text = render_domain(repair_operator(parse_domain(_tiny()), "spray", [e]))
    assert "(forall (?pos - mapgrid)" in text and "(when" in text and "(adj_north ?to ?pos)" in text


def _tiny():
    return """(define (domain g)
      (:requirements :strips :typing :conditional-effects :universal-effects)
      (:types mapgrid)
      (:predicates (agent-at ?p - mapgrid) (native-at ?p - mapgrid) (invasive-at ?p - mapgrid)
        (adj_north ?a - mapgrid ?b - mapgrid))
      (:action spray :parameters (?to - mapgrid) :precondition (agent-at ?to)
        :effect (and (not (native-at ?to)))))"""


def test_compile_eight_in_canonical_order():
    effects = compile_effects([_clause(p) for p in reversed(ADJ)])
    assert [e.condition[0].atom.predicate for e in effects] == sorted(ADJ)


def test_compile_dedups_and_skips(caplog):
    odd = HornClause(Atom("spray", ("pos1", "time2")), (Atom("adj_north", ("pos0", "pos1")),))
    effects = compile_effects([_clause("adj_west"), _clause("adj_west"), odd])
    assert effects == [direction_effect("west")]
    assert "skipping" in caplog.text
    assert compile_effects([]) == []


def test_reversed_adjacency_direction():
    c = HornClause(Atom("spray", ("pos1", "time2")),
                   (Atom("spray", ("pos0", "time1")), Atom("adj_south", ("pos1", "pos0"))))
    assert clause_direction(c) == "north"


def test_repair_north(flawed):
    d = repair_operator(flawed, "spray", [direction_effect("north")])
    assert len(d.schema("spray").cond_effects) == 1
    assert d.schema("move") == flawed.schema("move")
    assert d.schema("spray").precondition == flawed.schema("spray").precondition
    assert d.schema("spray").effects == flawed.schema("spray").effects


def test_repair_idempotent_and_monotone(flawed):
    log = RepairLog()
    once = repair_operator(flawed, "spray", [direction_effect("north")], log)
    twice = repair_operator(once, "spray", [direction_effect("north")], log)
    assert once == twice and len(log.entries) == 1
    more = repair_operator(once, "spray", [direction_effect("se")])
    assert set(once.schema("spray").cond_effects) <= set(more.schema("spray").cond_effects)


def test_repair_unknown_op(flawed):
    with pytest.raises(KeyError):
        repair_operator(flawed, "water", [])


def test_repair_log_saves(flawed, tmp_path):
    log = RepairLog()
    repair_operator(flawed, "spray", [direction_effect("north")], log)
    (path,) = log.save(tmp_path)
    assert path.name == "repair-001.pddl"
    body = path.read_text().split("\n", 1)[1]
    assert parse_domain(body).schema("spray").cond_effects == (direction_effect("north"),)


# -- the learner ---------------------------------------------------------------------

def test_learner_repairs_from_one_spray(flawed, three_plant_world):
    rec, _ = spray_record(three_plant_world, (3, 2))
    learner = RuleLearner()
    d = learner.learn("spray", flawed, [rec])
    assert d.schema("spray").cond_effects == (direction_effect("north"),)
    assert len(learner.log.entries) == 1


def test_learner_no_positives(flawed, three_plant_world):
    rec, _ = spray_record(three_plant_world, (6, 6))
    assert RuleLearner().learn("spray", flawed, [rec]) is None


def test_learner_converges_to_fixpoint(flawed, truth):
    learner = RuleLearner()
    d = flawed
    sizes = []
    for recs in synthetic_records(11, 20):
        nxt = learner.learn("spray", d, recs)
        d = nxt if nxt is not None else d
        sizes.append(len(d.schema("spray").cond_effects))
    # rebuilding from the base operator may shrink the model early on,
    # but once complete it stays complete
    first = sizes.index(8)
    assert sizes[first:] == [8] * (len(sizes) - first)
    assert d == truth
    assert learner.learn("spray", d, synthetic_records(12, 1)[0]) in (d, None)


def test_all_directions_listed():
    assert sorted(f"adj_{d}" for d in ALL_DIRECTIONS) == sorted(ADJ)
