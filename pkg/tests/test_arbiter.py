from __future__ import annotations

import functools
import itertools
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from ethical_arbiter.arbiter import (
    ConfigurationError,
    ConstraintSet,
    EthicalPolicy,
    Preference,
    Principle,
    Region,
    StrategyConfig,
    Verdict,
    Weights,
    arbitrate,
    collateral_select,
    policy_rank,
    principle_compare,
    principle_select,
    principle_tournament,
    run_arbitration,
    veto_filter,
    weighted_select,
)
from ethical_arbiter.core import (
    EthOption,
    EvidenceSet,
    FeatureScores,
    Proposition,
    Provenance,
    ValidationError,
    Violation,
)
from ethical_arbiter.reasoners import ReasonerKind, ReasonerSpec, consequence_spec
from ethical_arbiter.world import Action, HumanOutcome, Outcome, RobotOutcome, simulate


def ev(oid, scores=None, props=(), violations=()):
    return EvidenceSet(oid, FeatureScores(scores or {}), frozenset(props), tuple(violations))


# ------------------------------------------------------------------ vetoes


def test_empty_constraints_permit_everything():
    opts = [(EthOption("a"), ev("a")), (EthOption("b"), ev("b", props=[Proposition("harmed", ("h1",))]))]
    permitted, vetoes = veto_filter(opts, ConstraintSet())
    assert [o.id for o, _ in permitted] == ["a", "b"] and vetoes == {}


def test_prohibition_matches_any_argument():
    opts = [(EthOption("a"), ev("a", props=[Proposition("harmed", ("h1",))]))]
    permitted, vetoes = veto_filter(opts, ConstraintSet(("harmed(*)",)))
    assert permitted == [] and vetoes["a"].startswith("prohibition:harmed")


def test_unfulfilled_obligation_vetoes():
    opts = [(EthOption("a"), ev("a", props=[Proposition("notified", ("nurse",))]))]
    _, vetoes = veto_filter(opts, ConstraintSet((), ("notified(overseer)",)))
    assert vetoes == {"a": "obligation:notified(overseer)"}


def test_veto_reason_is_first_failing_constraint():
    e = ev("a", props=[Proposition("harmed", ("h1",)), Proposition("late")])
    _, vetoes = veto_filter([(EthOption("a"), e)], ConstraintSet(("late", "harmed(*)")))
    assert vetoes["a"] == "prohibition:late"


def test_bare_pattern_matches_any_arity():
    e = ev("a", props=[Proposition("severity", ("none",))])
    _, vetoes = veto_filter([(EthOption("a"), e)], ConstraintSet(("severity",)))
    assert "a" in vetoes


def test_constraints_must_use_declared_predicates():
    with pytest.raises(ConfigurationError):
        ConstraintSet(("teleported(*)",)).check_declared(["harmed"])


# -------------------------------------------------------------- collateral


def test_collateral_examples():
    assert collateral_select(["a"], {"a": 4}, {"a": 3}, 3) == "a"
    assert collateral_select(["A", "B"], {"A": 4, "B": 5}, {"A": 2, "B": 1}, 3) == "B"
    assert collateral_select(["A", "B"], {"A": 1, "B": 2}, {"A": 0, "B": 0}, 3) is None


def test_collateral_tie_breaks():
    assert collateral_select(["b", "a"], {"a": 4, "b": 5}, {"a": 1, "b": 1}, 0) == "b"
    assert collateral_select(["b", "a"], {"a": 4, "b": 4}, {"a": 1, "b": 1}, 0) == "a"
    with pytest.raises(ValidationError):
        collateral_select(["a"], {}, {"a": 1}, 0)


# --------------------------------------------------------------- principles


PRIVACY_FIRST = Principle(
    ("privacy", "patient_safety"),
    (Region(("privacy > 2", "patient_safety < -1"), "first"),),
)


def test_privacy_example_prefers_first():
    a = ev("a", {"privacy": 4, "patient_safety": -1})
    b = ev("b", {"privacy": 1, "patient_safety": 1})
    assert principle_compare(a, b, PRIVACY_FIRST) is Preference.PREFER_FIRST
    assert principle_compare(b, a, PRIVACY_FIRST) is Preference.INDIFFERENT


def test_equal_options_are_indifferent():
    a = ev("a", {"privacy": 2})
    assert principle_compare(a, a, PRIVACY_FIRST) is Preference.INDIFFERENT


def test_first_declared_region_wins_on_overlap():
    p = Principle(("x",), (Region(("x > 0",), "second"), Region(("x > 1",), "first")))
    assert principle_compare(ev("a", {"x": 3}), ev("b"), p) is Preference.PREFER_SECOND


def test_region_features_must_be_listed():
    with pytest.raises(ValidationError):
        Principle(("x",), (Region(("y > 0",), "first"),))
    with pytest.raises(ValidationError):
        Region(("x > 0", "x < 3"), "first")
    with pytest.raises(ValidationError):
        Principle(("x",), (Region(("x > 11",), "first"),))


def test_condition_accepts_unicode_relations():
    r = Region(("x ≥ 1", "y ≤ -1"), "first")
    assert str(r) == "x >= 1 and y <= -1 => prefer first"


def test_singleton_select():
    assert principle_select([(EthOption("z"), ev("z"))], PRIVACY_FIRST) == "z"


def test_dominant_option_wins():
    p = Principle(("x",), (Region(("x >= 2",), "first"), Region(("x <= -2",), "second")))
    opts = [(EthOption(i), ev(i, {"x": s})) for i, s in [("A", 4), ("B", 0), ("C", 1)]]
    assert principle_select(opts, p) == "A"


def _find_cycle_principle():
    """Brute-force search for a principle of at most four regions ordering A > B > C > A."""
    scores = {"A": {"x": 2, "y": 0}, "B": {"x": 0, "y": 2}, "C": {"x": 1, "y": 1}}
    evs = {k: ev(k, v) for k, v in scores.items()}
    conds = [f"x {r} {t}" for r in (">", "<") for t in (-1, 0, 1)]
    regions = [Region((c,), pref) for c in conds for pref in ("first", "second")]
    combos = itertools.chain.from_iterable(itertools.permutations(regions, k) for k in range(1, 5))
    for combo in combos:
        p = Principle(("x", "y"), combo)
        if all(
            principle_compare(evs[x], evs[y], p) is Preference.PREFER_FIRST
            and principle_compare(evs[y], evs[x], p) is Preference.PREFER_SECOND
            for x, y in (("A", "B"), ("B", "C"), ("C", "A"))
        ):
            return p, evs
    return None, evs


def test_rock_paper_scissors_goes_to_smallest_id():
    p, evs = _find_cycle_principle()
    assert p is not None
    opts = [(EthOption(k), evs[k]) for k in ("C", "B", "A")]
    winner, scores, _ = principle_tournament(opts, p)
    assert scores == {"A": 0, "B": 0, "C": 0}
    assert winner == "A"


feature_names = ("f0", "f1", "f2")
conditions = st.builds(
    lambda f, r, t: f"{f} {r} {t}",
    st.sampled_from(feature_names),
    st.sampled_from(["<", "<=", ">", ">=", "="]),
    st.integers(-4, 4),
)
regions = st.builds(
    lambda cs, pref: Region(tuple({c.split()[0]: c for c in cs}.values()), pref),
    st.lists(conditions, min_size=1, max_size=3),
    st.sampled_from(["first", "second"]),
)
principles = st.builds(lambda rs: Principle(feature_names, tuple(rs)), st.lists(regions, min_size=1, max_size=5))
evidence_lists = st.lists(
    st.fixed_dictionaries({f: st.integers(-5, 5) for f in feature_names}), min_size=1, max_size=6
).map(lambda ss: [(EthOption(f"o{i}"), ev(f"o{i}", s)) for i, s in enumerate(ss)])


@settings(max_examples=150)
@given(principles, evidence_lists)
def test_tournament_matches_pairwise_oracle(p, opts):
    copeland = {o.id: 0 for o, _ in opts}
    for (oa, ea), (ob, eb) in itertools.combinations(opts, 2):
        pref = principle_compare(ea, eb, p)
        if pref is Preference.PREFER_FIRST:
            copeland[oa.id] += 1
            copeland[ob.id] -= 1
        elif pref is Preference.PREFER_SECOND:
            copeland[oa.id] -= 1
            copeland[ob.id] += 1
    best = max(copeland.values())
    winner, scores, comparisons = principle_tournament(opts, p)
    assert scores == copeland
    assert winner == min(k for k, v in copeland.items() if v == best)
    assert len(comparisons) == len(opts) * (len(opts) - 1) // 2


@settings(max_examples=150)
@given(principles, evidence_lists)
def test_flipped_principle_mirrors_swapped_comparison(p, opts):
    (_, a), (_, b) = opts[0], opts[-1]
    assert principle_compare(b, a, p.flipped()) is principle_compare(a, b, p).mirrored()


@settings(max_examples=300, suppress_health_check=[HealthCheck.filter_too_much, HealthCheck.too_slow])
@given(principles, evidence_lists, st.data())
def test_copeland_winner_survives_duplicated_indifferent_option(p, opts, data):
    winner, scores, _ = principle_tournament(opts, p)
    others = sorted((v for k, v in scores.items() if k != winner), reverse=True)
    assume(not others or scores[winner] - others[0] >= 2)
    _, dup = opts[data.draw(st.integers(0, len(opts) - 1))]
    copy = EvidenceSet("zz_copy", dup.scores)
    assume(all(principle_compare(copy, e, p) is Preference.INDIFFERENT for _, e in opts))
    assume(all(principle_compare(e, copy, p) is Preference.INDIFFERENT for _, e in opts))
    assert principle_tournament(opts + [(EthOption("zz_copy"), copy)], p)[0] == winner


# ------------------------------------------------------------------- policy


def test_violation_free_plans_ordered_by_id():
    pol = EthicalPolicy(("collide_people",))
    plans = [(EthOption(i), ev(i)) for i in ("p3", "p1", "p2")]
    assert policy_rank(plans, pol) == ["p1", "p2", "p3"]


def test_policy_order_dominates_severity():
    pol = EthicalPolicy(("collide_people", "rules_of_air"))
    plans = [
        (EthOption("p1"), ev("p1", violations=[Violation("rules_of_air", 2)])),
        (EthOption("p2"), ev("p2", violations=[Violation("collide_people", 1)])),
    ]
    assert policy_rank(plans, pol) == ["p1", "p2"]


def test_lower_severity_ranks_first():
    pol = EthicalPolicy(("collide_people",))
    plans = [
        (EthOption("p1"), ev("p1", violations=[Violation("collide_people", 3)])),
        (EthOption("p2"), ev("p2", violations=[Violation("collide_people", 1)])),
    ]
    assert policy_rank(plans, pol) == ["p2", "p1"]


def test_unranked_principle_is_a_configuration_error():
    with pytest.raises(ConfigurationError, match="noise"):
        policy_rank([(EthOption("p"), ev("p", violations=[Violation("noise", 1)]))], EthicalPolicy(("harm",)))


def test_policy_validation():
    with pytest.raises(ValidationError):
        EthicalPolicy(())
    with pytest.raises(ValidationError):
        EthicalPolicy(("a", "a"))


PRINCIPLE_NAMES = ("a", "b", "c")
plans_strategy = st.lists(
    st.lists(st.builds(Violation, st.sampled_from(PRINCIPLE_NAMES), st.integers(1, 3)), max_size=4),
    min_size=1,
    max_size=5,
).map(lambda vss: [(EthOption(f"p{i}"), ev(f"p{i}", violations=vs)) for i, vs in enumerate(vss)])


def _oracle_cmp(x, y):
    for name in PRINCIPLE_NAMES:
        sx = [v.severity for v in x[1].violations if v.principle == name]
        sy = [v.severity for v in y[1].violations if v.principle == name]
        for kx, ky in ((max(sx, default=0), max(sy, default=0)), (len(sx), len(sy))):
            if kx != ky:
                return -1 if kx < ky else 1
    return -1 if x[0].id < y[0].id else (x[0].id > y[0].id)


@settings(max_examples=200)
@given(plans_strategy)
def test_policy_rank_matches_comparison_sort(plans):
    expected = [o.id for o, _ in sorted(plans, key=functools.cmp_to_key(_oracle_cmp))]
    assert policy_rank(plans, EthicalPolicy(PRINCIPLE_NAMES)) == expected


@settings(max_examples=200)
@given(plans_strategy)
def test_chosen_plan_is_never_beaten(plans):
    spec = ReasonerSpec("ann", ReasonerKind.STATIC_ANNOTATION, params={
        "table": {o.id: [[v.principle, v.severity] for v in e.violations] for o, e in plans}
    })
    d = arbitrate([o for o, _ in plans], [spec], StrategyConfig("policy", policy=EthicalPolicy(PRINCIPLE_NAMES)))
    chosen = next(p for p in plans if p[0].id == d.chosen)
    assert all(_oracle_cmp(chosen, other) <= 0 for other in plans)


# ----------------------------------------------------------------- weighted


def outcome(human_dist, robot_dist, goal_dist, harmed=None):
    per = {"h1": HumanOutcome(human_dist, human_dist == 0 if harmed is None else harmed)}
    return Outcome(per, RobotOutcome(robot_dist, robot_dist == 0, False), goal_dist, 4)


def test_weights_invariants():
    with pytest.raises(ValidationError):
        Weights(0, 1, 5)
    with pytest.raises(ValidationError):
        Weights(0, 0, 0)
    with pytest.raises(ValidationError):
        Weights(-1, 0, 0)
    assert Weights(0, 1, 5, human_priority=False).goal == 5
    assert Weights("1/2", 0.25, 1).robot == Fraction(1, 4)


def test_weighted_single_option():
    assert weighted_select([(EthOption("a"), outcome(1, 1, 1))], Weights()) == "a"


@pytest.mark.parametrize("worse_by,expected", [(0, "intercept"), (19, "intercept"), (20, "intercept"), (21, "stay")])
def test_intercept_beats_stay_up_to_goal_cost(worse_by, expected):
    # human term: 10 * 2 = 20 in favour of the intercept; ties go to the smaller id
    stay = (EthOption("stay"), outcome(0, 3, 1))
    intercept = (EthOption("intercept"), outcome(2, 3, 1 + worse_by))
    assert weighted_select([stay, intercept], Weights(10, 1, 1)) == expected


def test_weighted_tie_to_smallest_id():
    opts = [(EthOption("b"), outcome(2, 2, 9)), (EthOption("a"), outcome(2, 2, 0))]
    assert weighted_select(opts, Weights(10, 1, 0)) == "a"


outcomes = st.builds(outcome, st.integers(0, 8), st.integers(0, 8), st.integers(0, 8))


@given(
    st.lists(outcomes, min_size=1, max_size=6),
    st.tuples(st.integers(0, 10), st.integers(0, 10), st.integers(1, 10)),
    st.fractions(min_value=Fraction(1, 100), max_value=100),
)
def test_weighted_argmax_invariant_under_scaling(outs, w, k):
    weights = Weights(*w, human_priority=False)
    opts = [(EthOption(f"o{i}"), o) for i, o in enumerate(outs)]
    assert weighted_select(opts, weights) == weighted_select(opts, weights.scaled(k))


# ----------------------------------------------------------------- pipeline


def static(table=None, scores=None, props=None):
    return ReasonerSpec("s", ReasonerKind.STATIC_ANNOTATION,
                        params={"table": table or {}, "scores": scores or {}, "propositions": props or {}})


def test_one_harmless_option_chosen():
    d = arbitrate([EthOption("a")], [static()], StrategyConfig("policy", policy=EthicalPolicy(("x",))))
    assert d.verdict is Verdict.CHOSEN and d.chosen == "a" and not d.request_issued


def test_all_vetoed():
    strat = StrategyConfig("policy", constraints=ConstraintSet(("bad",)), policy=EthicalPolicy(("x",)))
    d = arbitrate([EthOption("a"), EthOption("b")], [static(props={"a": ["bad"], "b": ["bad(1)"]})], strat)
    assert d.verdict is Verdict.ALL_VETOED and d.chosen is None
    assert set(d.vetoes) == {"a", "b"}


def test_unknown_strategy_and_missing_inputs():
    with pytest.raises(ConfigurationError):
        StrategyConfig("astrology")
    with pytest.raises(ValidationError):
        arbitrate([], [static()], StrategyConfig("weighted"))


def test_corridor_requests_an_intercept(demo_corridor):
    stay = EthOption("stay", Action.stay(6))
    assert simulate(demo_corridor, stay.payload, 6).any_human_harmed
    strat = StrategyConfig("weighted", weights=Weights(10, 1, 1))
    without = arbitrate([stay], [consequence_spec()], strat, world=demo_corridor, horizon=6, budget=0)
    assert without.verdict is Verdict.INSUFFICIENTLY_ETHICAL and without.chosen is None
    run = run_arbitration([stay], [consequence_spec()], strat, world=demo_corridor, horizon=6, budget=1)
    d = run.decision
    assert d.verdict is Verdict.CHOSEN and d.request_issued
    chosen = next(o for o in run.options if o.id == d.chosen)
    assert chosen.provenance is Provenance.ARBITER_REQUESTED
    assert not simulate(demo_corridor, chosen.payload, 6).any_human_harmed


def test_arbitrate_deterministic(demo_corridor):
    from ethical_arbiter.world import sample_options

    opts = [EthOption(f"c{i}", a) for i, a in enumerate(sample_options(demo_corridor, 5, 3, 6))]
    strat = StrategyConfig("weighted")
    runs = [arbitrate(opts, [consequence_spec()], strat, world=demo_corridor, horizon=6, seed=3, budget=2)
            for _ in range(2)]
    assert runs[0] == runs[1]


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.frozensets(st.sampled_from(["p", "q", "r(a)", "r(b)"])), min_size=1, max_size=5),
    st.lists(st.sampled_from(["p", "q", "r(*)", "r(a)"]), max_size=2),
    st.lists(st.sampled_from(["p", "q", "r(*)", "r(b)"]), max_size=2),
    st.sampled_from(["policy", "principle", "constraint"]),
)
def test_chosen_option_never_vetoed(props, prohibitions, obligations, name):
    ids = [f"o{i}" for i in range(len(props))]
    spec = static(props={i: sorted(ps) for i, ps in zip(ids, props)}, scores={i: {"f0": k % 3} for k, i in enumerate(ids)})
    strat = StrategyConfig(
        name, constraints=ConstraintSet(tuple(prohibitions), tuple(obligations)),
        principle=Principle(("f0",), (Region(("f0 > 0",), "first"),)), policy=EthicalPolicy(("x",)),
        mission_feature="f0", collateral_feature="f0", insufficiency="none",
    )
    d = arbitrate([EthOption(i) for i in ids], [spec], strat)
    if d.chosen is not None:
        evs = dict(zip(ids, props))
        assert d.chosen not in d.vetoes
        assert not any(p.split("(")[0] in {x.split("(")[0] for x in evs[d.chosen]} and
                       (p.endswith("(*)") or "(" not in p or p in evs[d.chosen]) for p in prohibitions)


def test_all_vetoed_with_budget_requests_options(demo_corridor):
    stay = EthOption("stay", Action.stay(6))
    strat = StrategyConfig("weighted", constraints=ConstraintSet(("harmed(*)",)))
    d0 = arbitrate([stay], [consequence_spec()], strat, world=demo_corridor, horizon=6, budget=0)
    assert d0.verdict is Verdict.ALL_VETOED and not d0.request_issued
    run = run_arbitration([stay], [consequence_spec()], strat, world=demo_corridor, horizon=6, budget=1)
    assert run.decision.verdict is Verdict.CHOSEN and run.decision.request_issued
    assert "stay" in run.decision.vetoes
    chosen = next(o for o in run.options if o.id == run.decision.chosen)
    assert chosen.provenance is Provenance.ARBITER_REQUESTED
