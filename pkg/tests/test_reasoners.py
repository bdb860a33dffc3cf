from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ethical_arbiter.core import EthOption, Proposition, ValidationError, Violation
from ethical_arbiter.reasoners import (
    GOAL_PROGRESS,
    HUMAN_SAFETY,
    ROBOT_SAFETY,
    AssessmentContext,
    CueRule,
    ReasonerKind,
    ReasonerSpec,
    Signal,
    build_reasoners,
    consequence_evidence,
    cue_assess,
    parse_annotation_table,
    rescale_distance,
    static_annotate,
)
from ethical_arbiter.world import Action, GridWorld, Move, simulate

from conftest import corridor


def test_empty_world_stay_at_goal_is_maximally_safe():
    w = GridWorld(3, 3, (1, 1), (1, 1))
    ev = consequence_evidence(w, EthOption("stay", Action.stay(2)), 2, 5)
    assert ev.scores[GOAL_PROGRESS] == 5
    assert ev.scores[HUMAN_SAFETY] == 5
    assert ev.violations == ()


def test_harmed_human_in_corridor():
    w = GridWorld(5, 2, robot=(4, 1), goal=(4, 1), humans=corridor(height=1).humans,
                  danger=frozenset({(3, 0)}))
    ev = consequence_evidence(w, EthOption("stay", Action.stay(4)), 4, 5)
    assert simulate(w, Action.stay(4), 4).per_human["h1"].harmed
    assert Proposition("harmed", ("h1",)) in ev.propositions
    assert ev.scores[HUMAN_SAFETY] == -5
    assert ev.violations == (Violation(HUMAN_SAFETY, 5),)
    assert Proposition("severity", ("severeHuman",)) in ev.propositions


@pytest.mark.parametrize("d,cap,expected", [(0, 5, -5), (5, 5, 5), (9, 5, 5), (1, 5, -3), (3, 4, 2)])
def test_rescale_distance(d, cap, expected):
    assert rescale_distance(d, cap) == expected


@given(st.integers(0, 30), st.integers(0, 30), st.integers(1, 12))
def test_rescale_monotone(a, b, cap):
    lo, hi = sorted((a, b))
    assert rescale_distance(lo, cap) <= rescale_distance(hi, cap)
    assert -5 <= rescale_distance(hi, cap) <= 5


def test_consequence_needs_an_action():
    with pytest.raises(ValidationError):
        consequence_evidence(GridWorld(2, 2, (0, 0), (0, 0)), EthOption("x", "walk"), 2, 5)


def test_cue_assess_empty_signals():
    rule = CueRule("voiceLevel", "0.7", "raised_voice({subject})", suggest="verbal_intervention")
    assert cue_assess([], [rule]) == (frozenset(), [])


def test_cue_raised_voice_suggests_intervention():
    rule = CueRule("voiceLevel", "0.7", "raised_voice({subject})", suggest="verbal_intervention")
    props, sugg = cue_assess([Signal("voiceLevel", "caregiver", "0.9")], [rule])
    assert props == {Proposition("raised_voice", ("caregiver",))}
    assert [o.id for o in sugg] == ["verbal_intervention.caregiver"]
    assert sugg[0].provenance.value == "arbiterRequested"


def test_cue_below_threshold_is_silent():
    rule = CueRule("voiceLevel", Fraction(7, 10), "raised_voice({subject})")
    assert cue_assess([Signal("voiceLevel", "caregiver", "0.69")], [rule]) == (frozenset(), [])


def test_cue_two_subjects_one_rule():
    rule = CueRule("voiceLevel", "0.5", "raised_voice({subject})", suggest="calm")
    sigs = [Signal("voiceLevel", "a", 1), Signal("voiceLevel", "b", 1), Signal("voiceLevel", "a", 2)]
    props, sugg = cue_assess(sigs, [rule])
    assert props == {Proposition("raised_voice", ("a",)), Proposition("raised_voice", ("b",))}
    assert [o.id for o in sugg] == ["calm.a", "calm.b"]


def test_cue_rule_must_emit_declared_predicate():
    rule = CueRule("voiceLevel", "0.5", "shouting({subject})")
    with pytest.raises(ValidationError):
        cue_assess([], [rule], declared=["raised_voice"])


rules = st.lists(
    st.builds(
        CueRule,
        st.sampled_from(["voice", "gesture"]),
        st.integers(0, 4),
        st.sampled_from(["loud({subject})", "agitated({subject})", "alarm"]),
    ),
    max_size=4,
)
signals = st.lists(
    st.builds(Signal, st.sampled_from(["voice", "gesture"]), st.sampled_from(["a", "b"]), st.integers(0, 5)),
    max_size=4,
)


@settings(max_examples=80)
@given(signals, rules, rules)
def test_cue_assess_monotone_in_rules(sigs, base, extra):
    before, _ = cue_assess(sigs, base)
    after, _ = cue_assess(sigs, base + extra)
    assert before <= after


def test_static_annotation_lookup():
    table = parse_annotation_table({
        "p1": [["collide_people", 3]],
        "p2": [{"principle": "collide_people", "severity": 3}, ["rules_of_air", 1]],
    })
    assert static_annotate(EthOption("p0"), table).violations == ()
    assert static_annotate(EthOption("p1"), table).violations == (Violation("collide_people", 3),)
    assert static_annotate(EthOption("p2"), table).violations == (
        Violation("collide_people", 3), Violation("rules_of_air", 1),
    )
    assert static_annotate(EthOption("p2"), table) == static_annotate(EthOption("p2"), table)


def test_reasoner_names_unique():
    spec = ReasonerSpec("a", ReasonerKind.STATIC_ANNOTATION)
    with pytest.raises(ValidationError):
        build_reasoners([spec, spec])


def test_reasoner_cannot_score_uncovered_features():
    spec = ReasonerSpec("s", ReasonerKind.STATIC_ANNOTATION, frozenset({"privacy"}),
                        {"scores": {"o": {"harm": 1}}})
    (r,) = build_reasoners([spec])
    with pytest.raises(ValidationError):
        r.assess(EthOption("o"), AssessmentContext())


def test_consequence_reasoner_scores_stay_in_range():
    spec = ReasonerSpec("c", ReasonerKind.CONSEQUENCE_SIM, frozenset({HUMAN_SAFETY, ROBOT_SAFETY, GOAL_PROGRESS}))
    (r,) = build_reasoners([spec])
    w = corridor()
    for m in Move:
        ev = r.assess(EthOption("o", Action((m,))), AssessmentContext(w, 4))
        assert all(-5 <= v <= 5 for v in ev.scores.to_dict().values())


def test_interventions_move_like_stay(demo_corridor):
    from ethical_arbiter.core import EthOption
    from ethical_arbiter.reasoners import consequence_evidence, movement
    from ethical_arbiter.world import Action

    comfort = EthOption("comfort.h1", {"intervention": "comfort", "subject": "h1"})
    assert movement(comfort, 4) == Action.stay(4)
    stay = EthOption("stay", Action.stay(4))
    a, b = consequence_evidence(demo_corridor, comfort, 4), consequence_evidence(demo_corridor, stay, 4)
    assert a.scores == b.scores and a.propositions == b.propositions
    with pytest.raises(ValidationError):
        movement(EthOption("x", "teleport"), 4)
