from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ethical_arbiter.core import (
    EthicalFeature,
    EthOption,
    EvidenceSet,
    FeatureRegistry,
    FeatureScores,
    Polarity,
    Proposition,
    ValidationError,
    Violation,
    check_unique_ids,
    delta_vector,
    merge_evidence,
    parse_proposition,
    to_fraction,
)

NAMES = ["harm", "autonomy", "privacy", "good"]
score_maps = st.dictionaries(st.sampled_from(NAMES), st.integers(-5, 5), max_size=4)


def test_delta_vector_examples():
    assert delta_vector(FeatureScores({"privacy": 3}), FeatureScores({"privacy": 0})).to_dict() == {"privacy": 3}
    x = FeatureScores({"harm": 2, "good": -4})
    assert all(v == 0 for v in delta_vector(x, x).to_dict().values())
    d = delta_vector(FeatureScores({"harm": 2}), FeatureScores({"autonomy": 1}))
    assert d.to_dict() == {"harm": 2, "autonomy": -1}


@given(score_maps, score_maps)
def test_delta_antisymmetric(a, b):
    fa, fb = FeatureScores(a), FeatureScores(b)
    assert delta_vector(fa, fb) == -delta_vector(fb, fa)


@given(score_maps)
def test_delta_of_self_is_zero(a):
    assert set(delta_vector(FeatureScores(a), FeatureScores(a)).to_dict().values()) <= {0}


@pytest.mark.parametrize("bad", [6, -6, 2.5, True])
def test_scores_outside_scale_rejected(bad):
    with pytest.raises(ValidationError):
        FeatureScores({"harm": bad})


def test_missing_feature_reads_as_zero():
    assert FeatureScores({"harm": 2})["privacy"] == 0


def test_registry_bound_is_configurable():
    reg = FeatureRegistry([EthicalFeature("harm")], bound=3)
    assert reg.bound == 3
    with pytest.raises(ValidationError):
        reg["nope"]
    with pytest.raises(ValidationError):
        reg.register(EthicalFeature("harm"))
    assert FeatureRegistry.from_dict(reg.to_dict()).to_dict() == reg.to_dict()


def test_merge_singleton_is_identity():
    e = EvidenceSet("o1", FeatureScores({"harm": 1}), {Proposition("p")}, (Violation("harm", 2),))
    assert merge_evidence([e]) is e


def test_merge_disjoint_features_unions_maps():
    a = EvidenceSet("o1", FeatureScores({"harm": 1}))
    b = EvidenceSet("o1", FeatureScores({"good": -2}))
    m = merge_evidence([a, b])
    assert m.scores.to_dict() == {"good": -2, "harm": 1}
    assert not m.has_proposition("score_conflict")


def test_merge_conflict_takes_worse_value():
    reg = FeatureRegistry([EthicalFeature("harm", Polarity.HIGHER_IS_WORSE)])
    m = merge_evidence(
        [EvidenceSet("o1", FeatureScores({"harm": 1})), EvidenceSet("o1", FeatureScores({"harm": 3}))], reg
    )
    assert m.scores["harm"] == 3
    assert Proposition("score_conflict", ("harm",)) in m.propositions
    # without a registry the feature counts as higher-is-better, so the lower score is worse
    m2 = merge_evidence(
        [EvidenceSet("o1", FeatureScores({"harm": 1})), EvidenceSet("o1", FeatureScores({"harm": 3}))]
    )
    assert m2.scores["harm"] == 1


def test_merge_rejects_mixed_options():
    with pytest.raises(ValidationError):
        merge_evidence([EvidenceSet("a"), EvidenceSet("b")])
    with pytest.raises(ValidationError):
        merge_evidence([])


evidence_parts = st.lists(
    st.builds(
        lambda s, props, vs: EvidenceSet("o", FeatureScores(s), props, vs),
        score_maps,
        st.frozensets(st.builds(Proposition, st.sampled_from(["harmed", "seen"]), st.tuples(st.sampled_from(["h1", "h2"])))),
        st.lists(st.builds(Violation, st.sampled_from(NAMES), st.integers(1, 3)), max_size=3).map(tuple),
    ),
    min_size=1,
    max_size=4,
)


@settings(max_examples=60)
@given(evidence_parts)
def test_merge_is_order_insensitive(parts):
    reg = FeatureRegistry([EthicalFeature("harm", Polarity.HIGHER_IS_WORSE), EthicalFeature("good")])
    if len(parts) == 1:
        return
    results = {merge_evidence(list(p), reg) for p in itertools.permutations(parts)}
    assert len(results) == 1


@settings(max_examples=60)
@given(evidence_parts)
def test_merge_matches_worse_wins_oracle(parts):
    merged = merge_evidence(parts)
    for name in NAMES:
        values = [p.scores.scores[name] for p in parts if name in p.scores.scores]
        if values:
            assert merged.scores[name] == min(values)
            conflicted = Proposition("score_conflict", (name,)) in merged.propositions
            assert conflicted == (len(parts) > 1 and len(set(values)) > 1)


def test_proposition_parsing_and_certainty():
    p = parse_proposition("harmed(h1, h2)")
    assert p.predicate == "harmed" and p.arguments == ("h1", "h2")
    assert parse_proposition("alarm").arguments == ()
    assert Proposition("x", (), 0.5).certainty == Fraction(1, 2)
    with pytest.raises(ValidationError):
        Proposition("x", (), 2)
    with pytest.raises(ValidationError):
        parse_proposition("1bad")
    assert Proposition.from_dict(Proposition("x", ("a",), "1/3").to_dict()).certainty == Fraction(1, 3)


def test_floats_convert_through_their_decimal_form():
    assert to_fraction(0.1) == Fraction(1, 10)


def test_violation_needs_positive_severity():
    with pytest.raises(ValidationError):
        Violation("harm", 0)


def test_option_ids_validated_and_unique():
    with pytest.raises(ValidationError):
        EthOption("has space")
    with pytest.raises(ValidationError):
        check_unique_ids([EthOption("a"), EthOption("a")])


def test_evidence_roundtrips_through_dict():
    e = EvidenceSet("o1", FeatureScores({"harm": -2}), {Proposition("harmed", ("h1",))}, (Violation("harm", 3),))
    assert EvidenceSet.from_dict(e.to_dict()) == e
