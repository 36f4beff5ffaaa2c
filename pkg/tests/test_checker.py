import json
from dataclasses import replace

import pytest

from eb2jml import translate_machine
from eb2jml.checker import (
    FAIL, PASS, RESOURCE_LIMIT, MutationError, check_event, check_init,
    check_machine, mutate_translation, universe_for,
)
from eb2jml.jmlast import JmlTrue
from eb2jml.semantics import (
    Universe, eb_event_rel, jml_method_rel,
)

U01 = Universe(int_lo=0, int_hi=1)


def test_check_event_counter_passes(counter):
    v = check_event(counter.event("incr"), counter, U01)
    assert v.status == PASS
    assert v.witnesses == ()
    assert v.jml_size == 2 and v.eb_size == 2


def test_widen_ensures_true_fails_with_replayable_witness(counter):
    unit = translate_machine(counter)
    mutated = mutate_translation(unit, "widen_ensures_true")
    v = check_event(counter.event("incr"), counter, U01, mutated)
    assert v.status == FAIL
    assert v.witnesses
    w = v.witnesses[0]
    assert dict(w.pre) == {"v": 0} and dict(w.post) == {"v": 0}
    # replay: the pair really is in the mutated JML relation and
    # really is absent from the Event-B relation
    guard, run = mutated.method_pair("incr")
    jml_rel = jml_method_rel(run, mutated.result.class_invariant, guard,
                             counter.variables, U01)
    eb_rel = eb_event_rel(counter.event("incr"), _inv(counter),
                          counter.variables, U01)
    for w in v.witnesses:
        assert (w.pre, w.post) in jml_rel
        assert (w.pre, w.post) not in eb_rel


def _inv(machine):
    from eb2jml.checker import _machine_invariant
    return _machine_invariant(machine)


def test_drop_old_fails(counter):
    unit = translate_machine(counter)
    mutated = mutate_translation(unit, "drop_old")
    v = check_event(counter.event("incr"), counter, U01, mutated)
    assert v.status == FAIL
    guard, run = mutated.method_pair("incr")
    jml_rel = jml_method_rel(run, mutated.result.class_invariant, guard,
                             counter.variables, U01)
    eb_rel = eb_event_rel(counter.event("incr"), _inv(counter),
                          counter.variables, U01)
    for w in v.witnesses:
        assert (w.pre, w.post) in jml_rel and (w.pre, w.post) not in eb_rel


def test_shrink_assignable_still_passes(counter):
    unit = translate_machine(counter)
    mutated = mutate_translation(unit, "shrink_assignable")
    v = check_event(counter.event("incr"), counter, U01, mutated)
    assert v.status == PASS


def test_negate_guard_link_fails(counter):
    unit = translate_machine(counter)
    mutated = mutate_translation(unit, "negate_guard_link")
    v = check_event(counter.event("incr"), counter, U01, mutated)
    assert v.status == FAIL


def test_drop_old_on_swap_fails_when_values_differ(swap):
    unit = translate_machine(swap)
    mutated = mutate_translation(unit, "drop_old")
    wide = Universe(int_lo=0, int_hi=2)
    assert check_event(swap.event("exchange"), swap, wide, mutated).status == FAIL
    # over a one-point range pre and post never differ, so it still passes
    point = Universe(int_lo=0, int_hi=0)
    assert check_event(swap.event("exchange"), swap, point, mutated).status == PASS


def test_mutation_inapplicable(counter):
    bare = replace(counter, events=())
    unit = translate_machine(bare)
    with pytest.raises(MutationError):
        mutate_translation(unit, "widen_ensures_true")
    with pytest.raises(MutationError):
        mutate_translation(unit, "unknown_mutation")
    unit2 = translate_machine(counter)
    once = mutate_translation(unit2, "widen_ensures_true")
    with pytest.raises(MutationError):
        mutate_translation(once, "widen_ensures_true")


def test_check_init_passes(counter):
    v = check_init(counter, U01)
    assert v.status == PASS
    assert v.jml_size == 1 and v.eb_size == 1


def test_check_init_widened_initially_fails(counter):
    unit = translate_machine(counter)
    widened = replace(unit, result=replace(unit.result, initially=JmlTrue()))
    v = check_init(counter, U01, widened)
    assert v.status == FAIL
    assert [dict(w.post) for w in v.witnesses] == [{"v": 1}]
    assert all(w.pre is None for w in v.witnesses)


def test_check_init_contradictory_invariant_vacuous():
    from eb2jml.parser import parse_machine
    text = """
machine absurd
  variables v
  invariants
    inv1: v : INT
    inv2: v < v
  events
    initialisation
      begin
        act1: v := 0
      end
end
"""
    m = parse_machine(text)
    v = check_init(m, U01)
    assert v.status == PASS
    assert v.jml_size == 0 and v.eb_size == 0


def test_check_machine_aggregates(counter):
    report = check_machine(counter, U01)
    assert [v.name for v in report.verdicts] == ["initialisation", "incr"]
    assert report.status == PASS
    assert report.elapsed >= 0


def test_check_machine_names_the_failing_event(social_abstract):
    u = Universe(int_lo=0, int_hi=2, carriers={"PERSON": 2, "CONTENTS": 2})
    unit = translate_machine(social_abstract)
    # widen only edit_owned's normal ensures
    methods = tuple(
        replace(m, normal=replace(m.normal, ensures=JmlTrue()))
        if m.name == "run_edit_owned" else m
        for m in unit.result.methods)
    broken = replace(unit, result=replace(unit.result, methods=methods))
    report = check_machine(social_abstract, u, broken)
    by_name = {v.name: v.status for v in report.verdicts}
    assert by_name["edit_owned"] == FAIL
    assert by_name["create_account"] == PASS
    assert by_name["initialisation"] == PASS
    assert report.status == FAIL


def test_resource_limit_is_not_fatal_to_other_events(social_abstract):
    u = Universe(int_lo=0, int_hi=2, carriers={"PERSON": 2, "CONTENTS": 2},
                 ceiling=10)
    report = check_machine(social_abstract, u)
    assert all(v.status == RESOURCE_LIMIT for v in report.verdicts)
    assert len(report.verdicts) == 3
    assert report.status == RESOURCE_LIMIT
    assert all("ceiling" in v.detail for v in report.verdicts)


def test_verdicts_are_deterministic(counter):
    a = check_machine(counter, U01)
    b = check_machine(counter, U01)
    assert a.verdicts == b.verdicts


def test_report_renderings_agree_on_status(counter):
    report = check_machine(counter, U01)
    text = report.to_text()
    tree = report.to_tree()
    assert f"overall: {report.status}" in text
    assert tree["overall"] == report.status
    json.dumps(tree)  # machine-readable form is JSON-serialisable


def test_universe_for_fills_missing_carriers(social_abstract):
    u = universe_for(social_abstract, Universe(int_lo=0, int_hi=1))
    assert u.carriers == {"PERSON": 2, "CONTENTS": 2}


def test_flagship_bisimulation_flag_and_sensitivity(counter):
    v = check_event(counter.event("incr"), counter, U01)
    assert v.bisimulation is True
    assert v.stutter_sensitive is False


def test_pass_means_literal_containment(counter, swap):
    # re-check a PASS verdict by an independent double loop over all pairs
    for machine in (counter, swap):
        unit = translate_machine(machine)
        for event in machine.events:
            assert check_event(event, machine, U01, unit).status == PASS
            guard, run = unit.method_pair(event.name)
            jml_rel = jml_method_rel(run, unit.result.class_invariant, guard,
                                     machine.variables, U01)
            eb_rel = eb_event_rel(event, _inv(machine), machine.variables, U01)
            for a, b in jml_rel:
                assert (a, b) in eb_rel
