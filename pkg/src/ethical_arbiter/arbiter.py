"""The ethical arbiter: four declarative arbitration strategies and the pipeline
that gathers evidence, applies a strategy and, when the best option is not good
enough, asks for more options.

Every strategy breaks ties on the option id so that decisions are
reproducible.
"""

from __future__ import annotations

import enum
import functools
import re
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import (
    EthOption,
    EvidenceSet,
    FeatureRegistry,
    Polarity,
    Proposition,
    Provenance,
    ValidationError,
    check_identifier,
    check_unique_ids,
    delta_vector,
    merge_evidence,
    parse_proposition,
    to_fraction,
)
from .reasoners import (
    DEFAULT_DISTANCE_CAP,
    GOAL_PROGRESS,
    HUMAN_SAFETY,
    AssessmentContext,
    ReasonerSpec,
    build_reasoners,
    movement,
)
from .world import Action, GridWorld, Outcome, generate_intercepts, sample_options, simulate


class ConfigurationError(ValidationError):
    pass


# ---------------------------------------------------------------- constraints


@dataclass(frozen=True)
class Pattern:
    """A proposition pattern. ``*`` matches any argument; no argument list matches any arity."""

    predicate: str
    arguments: tuple[str, ...] | None = None

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        prop = parse_proposition(text)
        return cls(prop.predicate, prop.arguments if "(" in text else None)

    def matches(self, prop: Proposition) -> bool:
        if prop.predicate != self.predicate:
            return False
        if self.arguments is None:
            return True
        return len(prop.arguments) == len(self.arguments) and all(
            p == "*" or p == a for p, a in zip(self.arguments, prop.arguments)
        )

    def __str__(self) -> str:
        if self.arguments is None:
            return self.predicate
        return f"{self.predicate}({','.join(self.arguments)})"


@dataclass(frozen=True)
class ConstraintSet:
    prohibitions: tuple[Pattern, ...] = ()
    obligations: tuple[Pattern, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "prohibitions", tuple(_pattern(p) for p in self.prohibitions))
        object.__setattr__(self, "obligations", tuple(_pattern(p) for p in self.obligations))

    def check_declared(self, predicates: Iterable[str]) -> None:
        known = set(predicates)
        for p in self.prohibitions + self.obligations:
            if p.predicate not in known:
                raise ConfigurationError(f"constraint uses undeclared predicate: {p.predicate}")

    def is_empty(self) -> bool:
        return not self.prohibitions and not self.obligations

    def to_dict(self) -> dict:
        return {
            "prohibitions": [str(p) for p in self.prohibitions],
            "obligations": [str(p) for p in self.obligations],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ConstraintSet":
        return cls(tuple(d.get("prohibitions", ())), tuple(d.get("obligations", ())))


def _pattern(p: Pattern | str) -> Pattern:
    return p if isinstance(p, Pattern) else Pattern.parse(p)


def veto_reason(evidence: EvidenceSet, constraints: ConstraintSet) -> str | None:
    for pat in constraints.prohibitions:
        if any(pat.matches(p) for p in evidence.propositions):
            return f"prohibition:{pat}"
    for pat in constraints.obligations:
        if not any(pat.matches(p) for p in evidence.propositions):
            return f"obligation:{pat}"
    return None


def veto_filter(
    options: Sequence[tuple[EthOption, EvidenceSet]], constraints: ConstraintSet
) -> tuple[list[tuple[EthOption, EvidenceSet]], dict[str, str]]:
    """Split options into permitted ones and vetoes keyed by option id.

    An option is vetoed when a prohibition matches one of its propositions or
    an obligation matches none of them; the reason names the first failing
    constraint, prohibitions before obligations.
    """
    permitted, vetoes = [], {}
    for option, ev in options:
        reason = veto_reason(ev, constraints)
        if reason is None:
            permitted.append((option, ev))
        else:
            vetoes[option.id] = reason
    return permitted, vetoes


def collateral_select(
    permitted: Sequence[str],
    mission_score: Mapping[str, int],
    collateral_score: Mapping[str, int],
    tau: int,
) -> str | None:
    """Least collateral among options whose mission score reaches ``tau``.

    Ties go to the higher mission score, then the smaller id.
    """
    for oid in permitted:
        if oid not in mission_score or oid not in collateral_score:
            raise ValidationError(f"missing mission/collateral score for option {oid}")
    eligible = [oid for oid in permitted if mission_score[oid] >= tau]
    if not eligible:
        return None
    return min(eligible, key=lambda oid: (collateral_score[oid], -mission_score[oid], oid))


# ----------------------------------------------------------------- principles


class Preference(str, enum.Enum):
    PREFER_FIRST = "preferFirst"
    PREFER_SECOND = "preferSecond"
    INDIFFERENT = "indifferent"

    def mirrored(self) -> "Preference":
        if self is Preference.PREFER_FIRST:
            return Preference.PREFER_SECOND
        if self is Preference.PREFER_SECOND:
            return Preference.PREFER_FIRST
        return self


_RELATIONS: dict[str, Callable[[int, int], bool]] = {
    "<": lambda x, t: x < t,
    "<=": lambda x, t: x <= t,
    ">": lambda x, t: x > t,
    ">=": lambda x, t: x >= t,
    "=": lambda x, t: x == t,
}
_MIRROR = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "="}
_ALIASES = {"≤": "<=", "≥": ">=", "==": "="}
_COND = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_.\-]*)\s*(<=|>=|==|<|>|=|≤|≥)\s*(-?\d+)\s*$")


@dataclass(frozen=True)
class Condition:
    feature: str
    relation: str
    threshold: int

    def __post_init__(self):
        rel = _ALIASES.get(self.relation, self.relation)
        if rel not in _RELATIONS:
            raise ValidationError(f"unknown relation: {self.relation!r}")
        object.__setattr__(self, "relation", rel)
        if isinstance(self.threshold, bool) or not isinstance(self.threshold, int):
            raise ValidationError(f"threshold must be an integer: {self.threshold!r}")

    @classmethod
    def parse(cls, text: str) -> "Condition":
        m = _COND.match(text)
        if not m:
            raise ValidationError(f"cannot parse condition: {text!r}")
        return cls(m.group(1), m.group(2), int(m.group(3)))

    def holds(self, delta: Mapping[str, int] | Any) -> bool:
        return _RELATIONS[self.relation](delta[self.feature], self.threshold)

    def mirrored(self) -> "Condition":
        return Condition(self.feature, _MIRROR[self.relation], -self.threshold)

    def __str__(self) -> str:
        return f"{self.feature} {self.relation} {self.threshold}"


@dataclass(frozen=True)
class Region:
    conditions: tuple[Condition, ...]
    preferred: str

    def __post_init__(self):
        conds = tuple(c if isinstance(c, Condition) else Condition.parse(c) for c in self.conditions)
        object.__setattr__(self, "conditions", conds)
        if self.preferred not in ("first", "second"):
            raise ValidationError(f"region preferred must be 'first' or 'second': {self.preferred!r}")
        names = [c.feature for c in conds]
        if len(set(names)) != len(names):
            raise ValidationError(f"feature repeated within a region: {names}")

    def holds(self, delta) -> bool:
        return all(c.holds(delta) for c in self.conditions)

    @property
    def preference(self) -> Preference:
        return Preference.PREFER_FIRST if self.preferred == "first" else Preference.PREFER_SECOND

    def flipped(self) -> "Region":
        return Region(
            tuple(c.mirrored() for c in self.conditions),
            "second" if self.preferred == "first" else "first",
        )

    def __str__(self) -> str:
        body = " and ".join(str(c) for c in self.conditions) or "true"
        return f"{body} => prefer {self.preferred}"

    def to_dict(self) -> dict:
        return {"when": [str(c) for c in self.conditions], "prefer": self.preferred}


@dataclass(frozen=True)
class Principle:
    """Ordered inequality regions over the feature-difference space.

    The first region whose conditions all hold on ``first - second`` decides
    which option is preferred.
    """

    features: tuple[str, ...]
    regions: tuple[Region, ...]
    name: str = "principle"
    delta_bound: int = 10

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "regions", tuple(self.regions))
        if len(set(self.features)) != len(self.features):
            raise ValidationError(f"duplicate features in principle {self.name}")
        if not self.regions:
            raise ValidationError(f"principle {self.name} has no regions")
        allowed = set(self.features)
        for i, r in enumerate(self.regions):
            for c in r.conditions:
                if c.feature not in allowed:
                    raise ValidationError(
                        f"region {i} of principle {self.name} uses unlisted feature {c.feature}"
                    )
                if abs(c.threshold) > self.delta_bound:
                    raise ValidationError(
                        f"region {i} threshold {c.threshold} outside +/-{self.delta_bound}"
                    )

    def match(self, delta) -> tuple[Preference, int | None]:
        for i, region in enumerate(self.regions):
            if region.holds(delta):
                return region.preference, i
        return Preference.INDIFFERENT, None

    def flipped(self) -> "Principle":
        return Principle(self.features, tuple(r.flipped() for r in self.regions), self.name, self.delta_bound)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "features": list(self.features),
            "regions": [r.to_dict() for r in self.regions],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Principle":
        regions = tuple(Region(tuple(r.get("when", ())), r["prefer"]) for r in d["regions"])
        return cls(tuple(d["features"]), regions, d.get("name", "principle"))


def principle_compare(a: EvidenceSet, b: EvidenceSet, p: Principle) -> Preference:
    return p.match(delta_vector(a.scores, b.scores))[0]


_NP_RELATIONS = {
    "<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal, "=": np.equal,
}


def _pair_regions(p: Principle, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First-matching region index (or -1) for every pair i < j of score vectors."""
    first, second = np.triu_indices(len(vectors), 1)
    deltas = vectors[first] - vectors[second]
    region = np.full(len(first), -1, dtype=np.int64)
    open_ = np.ones(len(first), dtype=bool)
    column = {f: k for k, f in enumerate(p.features)}
    for i, r in enumerate(p.regions):
        hit = open_.copy()
        for c in r.conditions:
            hit &= _NP_RELATIONS[c.relation](deltas[:, column[c.feature]], c.threshold)
        region[hit] = i
        open_ &= ~hit
    return first, second, region


def principle_tournament(
    options: Sequence[tuple[EthOption, EvidenceSet]], p: Principle
) -> tuple[str, dict[str, int], list[dict]]:
    """Round-robin of pairwise comparisons; returns winner, Copeland scores and the comparisons.

    All pairs are matched against the regions at once; each comparison is
    equivalent to :func:`principle_compare` on that pair.
    """
    if not options:
        raise ValidationError("principle_select needs at least one option")
    ids = [o.id for o, _ in options]
    vectors = np.array(
        [[ev.scores[f] for f in p.features] for _, ev in options], dtype=np.int64
    ).reshape(len(options), len(p.features))
    first, second, region = _pair_regions(p, vectors)
    sign = np.zeros(len(region), dtype=np.int64)
    prefers_first = np.array([r.preferred == "first" for r in p.regions] + [False])
    matched = region >= 0
    sign[matched] = np.where(prefers_first[region[matched]], 1, -1)
    totals = np.zeros(len(options), dtype=np.int64)
    np.add.at(totals, first, sign)
    np.add.at(totals, second, -sign)
    scores = {oid: int(t) for oid, t in zip(ids, totals)}
    results = {1: Preference.PREFER_FIRST.value, -1: Preference.PREFER_SECOND.value,
               0: Preference.INDIFFERENT.value}
    comparisons = [
        {"first": ids[i], "second": ids[j], "region": r if r >= 0 else None, "result": results[g]}
        for i, j, r, g in zip(first.tolist(), second.tolist(), region.tolist(), sign.tolist())
    ]
    winner = min(scores, key=lambda oid: (-scores[oid], oid))
    return winner, scores, comparisons


def principle_select(options: Sequence[tuple[EthOption, EvidenceSet]], p: Principle) -> str:
    return principle_tournament(options, p)[0]


# ------------------------------------------------------------------- policies


@dataclass(frozen=True)
class EthicalPolicy:
    ordered_principles: tuple[str, ...]
    context: str = "default"

    def __post_init__(self):
        object.__setattr__(self, "ordered_principles", tuple(self.ordered_principles))
        if not self.ordered_principles:
            raise ValidationError("an ethical policy needs at least one principle")
        if len(set(self.ordered_principles)) != len(self.ordered_principles):
            raise ValidationError("duplicate principle in ethical policy")
        for name in self.ordered_principles:
            check_identifier(name, "principle name")

    def to_dict(self) -> dict:
        return {"principles": list(self.ordered_principles), "context": self.context}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EthicalPolicy":
        return cls(tuple(d["principles"]), d.get("context", "default"))


def policy_key(ev: EvidenceSet, policy: EthicalPolicy) -> tuple[tuple[int, int], ...]:
    """Per principle, most important first: (worst severity, violation count)."""
    names = policy.ordered_principles
    stats: dict[str, tuple[int, int]] = {}
    for v in ev.violations:
        seen = stats.get(v.principle)
        if seen is None:
            if v.principle not in names:
                raise ConfigurationError(
                    f"option {ev.option_id} violates {v.principle!r}, which the policy does not rank"
                )
            stats[v.principle] = (v.severity, 1)
        else:
            stats[v.principle] = (max(seen[0], v.severity), seen[1] + 1)
    return tuple(stats.get(n, (0, 0)) for n in names)


def policy_rank(plans: Sequence[tuple[EthOption, EvidenceSet]], policy: EthicalPolicy) -> list[str]:
    """Best plan first, ordered lexicographically by the policy's principles."""
    keyed = [(policy_key(ev, policy), o.id) for o, ev in plans]
    return [oid for _, oid in sorted(keyed)]


# ---------------------------------------------------------------- weighted sum


@dataclass(frozen=True)
class Weights:
    """Weights for human safety, robot safety and goal distance.

    Human safety must weigh at least as much as robot safety unless
    ``human_priority`` is switched off (only useful for negative controls).
    """

    human: Fraction = Fraction(10)
    robot: Fraction = Fraction(1)
    goal: Fraction = Fraction(1)
    human_priority: bool = True

    def __post_init__(self):
        for name in ("human", "robot", "goal"):
            value = to_fraction(getattr(self, name))
            if value < 0:
                raise ValidationError(f"weight {name} must be non-negative")
            object.__setattr__(self, name, value)
        if self.human == self.robot == self.goal == 0:
            raise ValidationError("weights must not all be zero")
        if self.human_priority and self.human < self.robot:
            raise ValidationError("human weight must be >= robot weight")

    def scaled(self, k: Fraction | int) -> "Weights":
        return Weights(self.human * k, self.robot * k, self.goal * k, self.human_priority)

    def to_dict(self) -> dict:
        d = {"human": str(self.human), "robot": str(self.robot), "goal": str(self.goal)}
        if not self.human_priority:
            d["human_priority"] = False
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Weights":
        return cls(d.get("human", 10), d.get("robot", 1), d.get("goal", 1), d.get("human_priority", True))


def weighted_terms(outcome: Outcome, w: Weights, cap: int = DEFAULT_DISTANCE_CAP) -> dict[str, Fraction]:
    human = outcome.min_human_danger_distance(cap)
    robot = min(outcome.robot.min_danger_distance, cap)
    goal = outcome.final_goal_distance
    return {
        "human": w.human * human,
        "robot": w.robot * robot,
        "goal": -w.goal * goal,
    }


def weighted_select(
    options: Sequence[tuple[EthOption, Outcome]], w: Weights, cap: int = DEFAULT_DISTANCE_CAP
) -> str:
    """Highest weighted score wins; ties go to the smallest id."""
    if not options:
        raise ValidationError("weighted_select needs at least one option")
    best = min(options, key=lambda item: (-sum(weighted_terms(item[1], w, cap).values()), item[0].id))
    return best[0].id


# ------------------------------------------------------------------- pipeline

STRATEGIES = ("constraint", "principle", "policy", "weighted")


def _human_harm(ev: EvidenceSet) -> bool:
    return any(v.principle == HUMAN_SAFETY for v in ev.violations) or ev.has_proposition("harmed")


INSUFFICIENCY_PREDICATES: dict[str, Callable[[EvidenceSet], bool] | None] = {
    "human_harm": _human_harm,
    "none": None,
}


@dataclass(frozen=True)
class StrategyConfig:
    name: str
    constraints: ConstraintSet | None = None
    principle: Principle | None = None
    policy: EthicalPolicy | None = None
    weights: Weights | None = None
    mission_feature: str = GOAL_PROGRESS
    collateral_feature: str = HUMAN_SAFETY
    tau: int = -5
    distance_cap: int = DEFAULT_DISTANCE_CAP
    insufficiency: str = "human_harm"
    extra_samples: int = 4

    def __post_init__(self):
        if self.name not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy: {self.name!r} (expected one of {STRATEGIES})")
        if self.name == "principle" and self.principle is None:
            raise ConfigurationError("principle strategy needs a principle")
        if self.name == "policy" and self.policy is None:
            raise ConfigurationError("policy strategy needs an ethical policy")
        if self.name == "weighted" and self.weights is None:
            object.__setattr__(self, "weights", Weights())
        if self.insufficiency not in INSUFFICIENCY_PREDICATES:
            raise ConfigurationError(f"unknown insufficiency predicate: {self.insufficiency!r}")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name}
        if self.constraints is not None:
            d["constraints"] = self.constraints.to_dict()
        if self.principle is not None:
            d["principle"] = self.principle.to_dict()
        if self.policy is not None:
            d["policy"] = self.policy.to_dict()
        if self.weights is not None:
            d["weights"] = self.weights.to_dict()
        d.update(
            mission_feature=self.mission_feature,
            collateral_feature=self.collateral_feature,
            tau=self.tau,
            distance_cap=self.distance_cap,
            insufficiency=self.insufficiency,
            extra_samples=self.extra_samples,
        )
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "StrategyConfig":
        return cls(
            name=d["name"],
            constraints=ConstraintSet.from_dict(d["constraints"]) if d.get("constraints") is not None else None,
            principle=Principle.from_dict(d["principle"]) if d.get("principle") is not None else None,
            policy=EthicalPolicy.from_dict(d["policy"]) if d.get("policy") is not None else None,
            weights=Weights.from_dict(d["weights"]) if d.get("weights") is not None else None,
            mission_feature=d.get("mission_feature", GOAL_PROGRESS),
            collateral_feature=d.get("collateral_feature", HUMAN_SAFETY),
            tau=d.get("tau", -5),
            distance_cap=d.get("distance_cap", DEFAULT_DISTANCE_CAP),
            insufficiency=d.get("insufficiency", "human_harm"),
            extra_samples=d.get("extra_samples", 4),
        )


class Verdict(str, enum.Enum):
    CHOSEN = "chosen"
    ALL_VETOED = "allVetoed"
    INSUFFICIENTLY_ETHICAL = "insufficientlyEthical"


@dataclass(frozen=True)
class Decision:
    """What the arbiter reports back to the underlying system.

    ``candidate`` is the strategy's pick in the final round, which differs
    from ``chosen`` only when that pick was judged insufficiently ethical.
    """

    chosen: str | None
    verdict: Verdict
    vetoes: Mapping[str, str] = field(default_factory=dict)
    request_issued: bool = False
    candidate: str | None = None
    record_ref: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "verdict", Verdict(self.verdict))
        object.__setattr__(self, "vetoes", dict(sorted(self.vetoes.items())))
        if (self.verdict is Verdict.CHOSEN) != (self.chosen is not None):
            raise ValidationError("a chosen option is present exactly when verdict is 'chosen'")

    def to_dict(self) -> dict:
        return {
            "chosen": self.chosen,
            "verdict": self.verdict.value,
            "vetoes": dict(self.vetoes),
            "request_issued": self.request_issued,
            "candidate": self.candidate,
            "record_ref": self.record_ref,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Decision":
        return cls(
            d["chosen"], d["verdict"], d.get("vetoes", {}), d.get("request_issued", False),
            d.get("candidate"), d.get("record_ref", ""),
        )


OptionGenerator = Callable[[GridWorld | None, int, int, Sequence[EthOption]], list[EthOption]]


def default_generator(
    world: GridWorld | None, horizon: int, extra_samples: int, reasoners: Sequence = ()
) -> OptionGenerator:
    """Intercepts for every human, fresh seeded samples, and reasoner suggestions."""

    def generate(_world, round_no: int, seed: int, existing: Sequence[EthOption]) -> list[EthOption]:
        payloads: list[Any] = []
        suggested: list[EthOption] = []
        if world is not None:
            for h in world.humans:
                payloads.extend(generate_intercepts(world, h.id, horizon))
            if extra_samples > 0:
                payloads.extend(sample_options(world, extra_samples + 1, seed + round_no, horizon, partial=True)[1:])
        ctx = AssessmentContext(world, horizon)
        for r in reasoners:
            suggested.extend(r.suggestions(ctx))
        seen_payloads = [o.payload for o in existing]
        seen_ids = {o.id for o in existing}
        out: list[EthOption] = []
        for p in payloads:
            if isinstance(p, Action):
                p = p.padded(horizon)
            if p in seen_payloads:
                continue
            seen_payloads.append(p)
            oid = f"req{round_no}.{len(out)}"
            out.append(EthOption(oid, p, Provenance.ARBITER_REQUESTED))
            seen_ids.add(oid)
        for o in suggested:
            if o.id not in seen_ids and o.payload not in seen_payloads:
                seen_ids.add(o.id)
                seen_payloads.append(o.payload)
                out.append(o)
        return out

    return generate


def _gather(
    options: Sequence[EthOption], reasoners: Sequence, ctx: AssessmentContext,
    registry: FeatureRegistry | None,
) -> dict[str, EvidenceSet]:
    out = {}
    for o in options:
        parts = [r.assess(o, ctx) for r in reasoners] or [EvidenceSet(o.id)]
        out[o.id] = merge_evidence(parts, registry)
    return out


def _outcomes(
    options: Sequence[EthOption], world: GridWorld | None, horizon: int
) -> dict[str, Outcome]:
    if world is None:
        raise ConfigurationError("weighted strategy needs a world to simulate")
    out = {}
    for o in options:
        try:
            action = movement(o, horizon)
        except ValidationError:
            raise ConfigurationError(f"weighted strategy: option {o.id} payload is not an Action") from None
        out[o.id] = simulate(world, action, horizon)
    return out


def _feature_for_collateral(name: str, registry: FeatureRegistry | None) -> Polarity:
    if registry is not None and name in registry:
        return registry[name].polarity
    return Polarity.HIGHER_IS_BETTER


def apply_strategy(
    permitted: Sequence[tuple[EthOption, EvidenceSet]],
    strategy: StrategyConfig,
    *,
    world: GridWorld | None = None,
    horizon: int = 4,
    registry: FeatureRegistry | None = None,
) -> tuple[str | None, list[dict]]:
    """Pick among permitted options with the configured strategy; returns the pick and trace steps."""
    steps: list[dict] = []
    ids = [o.id for o, _ in permitted]
    if strategy.name == "constraint":
        mission = {o.id: ev.scores[strategy.mission_feature] for o, ev in permitted}
        polarity = _feature_for_collateral(strategy.collateral_feature, registry)
        sign = -1 if polarity is Polarity.HIGHER_IS_BETTER else 1
        collateral = {o.id: sign * ev.scores[strategy.collateral_feature] for o, ev in permitted}
        pick = collateral_select(ids, mission, collateral, strategy.tau)
        steps.append(
            {
                "kind": "collateral",
                "tau": strategy.tau,
                "mission": mission,
                "collateral": collateral,
                "result": pick,
            }
        )
        return pick, steps
    if strategy.name == "principle":
        winner, scores, comparisons = principle_tournament(permitted, strategy.principle)
        for c in comparisons:
            steps.append({"kind": "compare", **c})
        steps.append({"kind": "copeland", "scores": scores, "result": winner})
        return winner, steps
    if strategy.name == "policy":
        keys = {o.id: policy_key(ev, strategy.policy) for o, ev in permitted}
        ranking = sorted(keys, key=lambda oid: (keys[oid], oid))
        for a, b in zip(ranking, ranking[1:]):
            deciding = next(
                (
                    name
                    for name, ka, kb in zip(strategy.policy.ordered_principles, keys[a], keys[b])
                    if ka != kb
                ),
                None,
            )
            steps.append(
                {
                    "kind": "policy",
                    "better": a,
                    "worse": b,
                    "deciding_principle": deciding,
                    "better_key": keys[a],
                    "worse_key": keys[b],
                }
            )
        steps.append({"kind": "ranking", "order": ranking, "result": ranking[0]})
        return ranking[0], steps
    outcomes = _outcomes([o for o, _ in permitted], world, horizon)
    pairs = [(o, outcomes[o.id]) for o, _ in permitted]
    for o, out in pairs:
        terms = weighted_terms(out, strategy.weights, strategy.distance_cap)
        steps.append(
            {
                "kind": "weighted",
                "option": o.id,
                "terms": {k: str(v) for k, v in terms.items()},
                "score": str(sum(terms.values())),
            }
        )
    pick = weighted_select(pairs, strategy.weights, strategy.distance_cap)
    return pick, steps


def _tie_note(steps: list[dict], pick: str | None) -> bool:
    """True when the pick shares its deciding score with another option."""
    if pick is None or not steps:
        return False
    last = steps[-1]
    if last["kind"] == "copeland":
        s = last["scores"]
        return sum(1 for v in s.values() if v == s[pick]) > 1
    if last["kind"] == "ranking":
        return False
    weighted = [st for st in steps if st["kind"] == "weighted"]
    if weighted:
        best = next(st["score"] for st in weighted if st["option"] == pick)
        return sum(1 for st in weighted if Fraction(st["score"]) == Fraction(best)) > 1
    return False


@dataclass
class ArbitrationRun:
    """Everything an arbitration saw and did; the raw material of a decision record."""

    arguments: dict
    options: list[EthOption]
    evidence: dict[str, EvidenceSet]
    steps: list[dict]
    decision: Decision
    latency_micros: int

    @functools.cached_property
    def inputs(self) -> dict:
        """The arbitration's inputs as a plain document (enough to run it again)."""
        from .trace import serialize_option

        a = self.arguments
        return {
            "options": [serialize_option(o) for o in a["options"]],
            "reasoners": [r.to_dict() for r in a["reasoners"]],
            "strategy": a["strategy"].to_dict(),
            "world": a["world"].to_document() if a["world"] is not None else None,
            "horizon": a["horizon"],
            "seed": a["seed"],
            "budget": a["budget"],
            "registry": a["registry"].to_dict() if a["registry"] is not None else None,
        }


def run_arbitration(
    options: Sequence[EthOption],
    reasoners: Sequence[ReasonerSpec],
    strategy: StrategyConfig,
    *,
    world: GridWorld | None = None,
    horizon: int = 4,
    seed: int = 0,
    budget: int = 0,
    registry: FeatureRegistry | None = None,
    generator: OptionGenerator | None = None,
) -> ArbitrationRun:
    started = time.perf_counter_ns()
    if budget < 0:
        raise ValidationError("budget must be >= 0")
    if not isinstance(strategy, StrategyConfig):
        raise ConfigurationError(f"unknown strategy: {strategy!r}")
    options = list(options)
    check_unique_ids(options)
    built = build_reasoners(reasoners, registry)
    ctx = AssessmentContext(world, horizon)
    if generator is None and (world is not None or any(r.suggestions(ctx) for r in built)):
        generator = default_generator(world, horizon, strategy.extra_samples, built)
    if not options and generator is None:
        raise ValidationError("no options offered and no option generator available")

    arguments = dict(
        options=list(options), reasoners=list(reasoners), strategy=strategy, world=world,
        horizon=horizon, seed=seed, budget=budget, registry=registry,
    )
    steps: list[dict] = []
    if not options:
        options = generator(world, 0, seed, [])
        steps.append({"kind": "request", "round": 0, "added": [o.id for o in options]})
    evidence = _gather(options, built, ctx, registry)
    insufficient = INSUFFICIENCY_PREDICATES[strategy.insufficiency]
    request_issued = False
    round_no = 0
    vetoes: dict[str, str] = {}
    while True:
        pairs = [(o, evidence[o.id]) for o in options]
        if strategy.constraints is not None and not strategy.constraints.is_empty():
            permitted, vetoes = veto_filter(pairs, strategy.constraints)
            for o, _ in pairs:
                steps.append(
                    {"kind": "veto", "option": o.id, "reason": vetoes.get(o.id), "vetoed": o.id in vetoes}
                )
        else:
            permitted, vetoes = pairs, {}
        if not permitted:
            pick, verdict = None, Verdict.ALL_VETOED
            steps.append({"kind": "all_vetoed", "count": len(vetoes)})
        else:
            pick, strategy_steps = apply_strategy(
                permitted, strategy, world=world, horizon=horizon, registry=registry
            )
            steps.extend(strategy_steps)
            bad = pick is None or (insufficient is not None and insufficient(evidence[pick]))
            if not bad:
                steps.append({"kind": "choice", "chosen": pick, "tie_break": _tie_note(strategy_steps, pick)})
                decision = Decision(pick, Verdict.CHOSEN, vetoes, request_issued, pick)
                break
            verdict = Verdict.INSUFFICIENTLY_ETHICAL
            steps.append({"kind": "insufficient", "candidate": pick, "predicate": strategy.insufficiency})
        if round_no >= budget or generator is None:
            decision = Decision(None, verdict, vetoes, request_issued, pick)
            break
        round_no += 1
        request_issued = True
        new = [o for o in generator(world, round_no, seed, options) if o.id not in evidence]
        steps.append({"kind": "request", "round": round_no, "added": [o.id for o in new]})
        if not new:
            decision = Decision(None, verdict, vetoes, request_issued, pick)
            break
        options = options + new
        evidence.update(_gather(new, built, ctx, registry))
    latency = (time.perf_counter_ns() - started) // 1000
    return ArbitrationRun(arguments, options, evidence, steps, decision, latency)


def arbitrate(
    options: Sequence[EthOption],
    reasoners: Sequence[ReasonerSpec],
    strategy: StrategyConfig,
    *,
    world: GridWorld | None = None,
    horizon: int = 4,
    seed: int = 0,
    budget: int = 0,
    registry: FeatureRegistry | None = None,
    generator: OptionGenerator | None = None,
    log=None,
) -> Decision:
    """Gather evidence, filter, select and, if needed, request more options.

    When ``log`` (a :class:`~ethical_arbiter.trace.BlackBoxLog`) is given the
    decision record is appended to it and ``record_ref`` names that record.
    """
    from .trace import record

    run = run_arbitration(
        options, reasoners, strategy, world=world, horizon=horizon, seed=seed,
        budget=budget, registry=registry, generator=generator,
    )
    rec = record(run, log)
    return rec.decision
