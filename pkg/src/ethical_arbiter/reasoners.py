"""Evidential reasoners: turn raw situation data about an option into evidence.

Three kinds ship here. A consequence reasoner simulates the grid world, a
cue reasoner fires declarative rules over pre-symbolised signals, and a
static reasoner looks options up in an annotation table. Each is a pure
function of its configuration and the option it is asked about.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .core import (
    SCORE_BOUND,
    Beneficiary,
    EthicalFeature,
    EthOption,
    EvidenceSet,
    FeatureRegistry,
    FeatureScores,
    Polarity,
    Proposition,
    Provenance,
    ValidationError,
    Violation,
    check_identifier,
    parse_proposition,
    to_fraction,
)
from .world import Action, GridWorld, classify_severity, simulate

HUMAN_SAFETY = "human_safety"
ROBOT_SAFETY = "robot_safety"
GOAL_PROGRESS = "goal_progress"
HUMAN_HARM_SEVERITY = 5
DEFAULT_DISTANCE_CAP = 5


def default_registry() -> FeatureRegistry:
    """Features produced by the consequence reasoner."""
    return FeatureRegistry(
        [
            EthicalFeature(HUMAN_SAFETY, Polarity.HIGHER_IS_BETTER, Beneficiary.HUMAN),
            EthicalFeature(ROBOT_SAFETY, Polarity.HIGHER_IS_BETTER, Beneficiary.ROBOT),
            EthicalFeature(GOAL_PROGRESS, Polarity.HIGHER_IS_BETTER, Beneficiary.MISSION),
        ]
    )


class ReasonerKind(str, enum.Enum):
    CONSEQUENCE_SIM = "consequenceSim"
    CUE_RULES = "cueRules"
    STATIC_ANNOTATION = "staticAnnotation"


@dataclass(frozen=True)
class ReasonerSpec:
    name: str
    kind: ReasonerKind
    features_covered: frozenset[str] = frozenset()
    params: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        check_identifier(self.name, "reasoner name")
        object.__setattr__(self, "kind", ReasonerKind(self.kind))
        object.__setattr__(self, "features_covered", frozenset(self.features_covered))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "features_covered": sorted(self.features_covered),
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReasonerSpec":
        return cls(d["name"], d["kind"], frozenset(d.get("features_covered", ())), d.get("params", {}))


def rescale_distance(distance: int, cap: int, bound: int = SCORE_BOUND) -> int:
    """Map a cell distance onto the score scale: 0 -> -bound, cap or more -> +bound."""
    if cap < 1:
        raise ValidationError(f"distance cap must be >= 1, got {cap}")
    d = max(0, min(distance, cap))
    return -bound + (2 * bound * d) // cap


def movement(option: EthOption, horizon: int) -> Action:
    """The robot motion an option implies.

    Interventions suggested by cue rules are carried out in place, so they
    move like Stay.
    """
    p = option.payload
    if isinstance(p, Action):
        return p
    if isinstance(p, Mapping) and "intervention" in p:
        return Action.stay(horizon)
    raise ValidationError(f"option {option.id}: payload is not an Action")


def consequence_evidence(
    world: GridWorld, option: EthOption, horizon: int, distance_cap: int = DEFAULT_DISTANCE_CAP
) -> EvidenceSet:
    action = movement(option, horizon)
    if distance_cap < 1:
        raise ValidationError(f"distance cap must be >= 1, got {distance_cap}")
    outcome = simulate(world, action, horizon)
    scores = {
        HUMAN_SAFETY: rescale_distance(outcome.min_human_danger_distance(distance_cap), distance_cap),
        ROBOT_SAFETY: rescale_distance(outcome.robot.min_danger_distance, distance_cap),
        GOAL_PROGRESS: -rescale_distance(outcome.final_goal_distance, distance_cap),
    }
    severity = classify_severity(outcome)
    props = {Proposition("harmed", (hid,)) for hid, h in outcome.per_human.items() if h.harmed}
    props.add(Proposition("severity", (severity.value.value,)))
    if outcome.robot.collided_with_human:
        props.add(Proposition("collided_with_human", ("robot",)))
    violations = (Violation(HUMAN_SAFETY, HUMAN_HARM_SEVERITY),) if outcome.any_human_harmed else ()
    return EvidenceSet(option.id, FeatureScores(scores), frozenset(props), violations)


@dataclass(frozen=True)
class Signal:
    kind: str
    subject: str
    intensity: Fraction

    def __post_init__(self):
        check_identifier(self.kind, "signal kind")
        check_identifier(self.subject, "signal subject")
        value = to_fraction(self.intensity)
        if value < 0:
            raise ValidationError(f"signal intensity must be >= 0: {self.intensity}")
        object.__setattr__(self, "intensity", value)

    @classmethod
    def from_dict(cls, d: Mapping) -> "Signal":
        return cls(d["kind"], d["subject"], d["intensity"])


@dataclass(frozen=True)
class CueRule:
    """Fires when a signal of ``kind`` (optionally for one subject) reaches ``threshold``.

    ``emit`` is a proposition template in which ``{subject}`` is replaced by
    the matching signal's subject. ``suggest`` names an intervention; it
    becomes an option with id ``<suggest>.<subject>``.
    """

    kind: str
    threshold: Fraction
    emit: str
    subject: str = "*"
    suggest: str | None = None

    def __post_init__(self):
        check_identifier(self.kind, "signal kind")
        value = to_fraction(self.threshold)
        if value < 0:
            raise ValidationError(f"cue threshold must be >= 0: {self.threshold}")
        object.__setattr__(self, "threshold", value)
        if self.suggest is not None:
            check_identifier(self.suggest, "intervention name")
        self.instantiate("x")

    @property
    def predicate(self) -> str:
        return parse_proposition(self.emit.replace("{subject}", "x")).predicate

    def matches(self, signal: Signal) -> bool:
        return (
            signal.kind == self.kind
            and self.subject in ("*", signal.subject)
            and signal.intensity >= self.threshold
        )

    def instantiate(self, subject: str) -> tuple[Proposition, EthOption | None]:
        prop = parse_proposition(self.emit.replace("{subject}", subject))
        option = None
        if self.suggest:
            option = EthOption(
                f"{self.suggest}.{subject}",
                {"intervention": self.suggest, "subject": subject},
                Provenance.ARBITER_REQUESTED,
            )
        return prop, option

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "subject": self.subject, "threshold": str(self.threshold), "emit": self.emit}
        if self.suggest:
            d["suggest"] = self.suggest
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "CueRule":
        return cls(d["kind"], d["threshold"], d["emit"], d.get("subject", "*"), d.get("suggest"))


def cue_assess(
    signals: Sequence[Signal], rules: Sequence[CueRule], declared: Iterable[str] | None = None
) -> tuple[frozenset[Proposition], list[EthOption]]:
    """Fire every rule against every signal.

    Suggestions come out in rule declaration order, then signal order, with
    duplicates dropped.
    """
    if declared is not None:
        known = set(declared)
        for r in rules:
            if r.predicate not in known:
                raise ValidationError(f"cue rule emits undeclared predicate: {r.predicate}")
    props: set[Proposition] = set()
    suggestions: list[EthOption] = []
    seen: set[str] = set()
    for rule in rules:
        for sig in signals:
            if not rule.matches(sig):
                continue
            prop, option = rule.instantiate(sig.subject)
            props.add(prop)
            if option is not None and option.id not in seen:
                seen.add(option.id)
                suggestions.append(option)
    return frozenset(props), suggestions


AnnotationTable = Mapping[str, Sequence[Violation]]


def static_annotate(option: EthOption, table: AnnotationTable) -> EvidenceSet:
    return EvidenceSet(option.id, violations=tuple(table.get(option.id, ())))


# violations are immutable, so identical table entries can share one object
_violation = functools.lru_cache(maxsize=4096)(Violation)


def parse_annotation_table(doc: Mapping[str, Sequence]) -> dict[str, tuple[Violation, ...]]:
    """Accepts ``{option: [[principle, severity], ...]}`` or the dict form of each violation."""
    table = {}
    for option_id, entries in doc.items():
        vs = []
        for e in entries:
            if isinstance(e, dict):
                vs.append(_violation(e["principle"], e["severity"]))
            else:
                vs.append(_violation(e[0], e[1]))
        table[str(option_id)] = tuple(vs)
    return table


@dataclass(frozen=True)
class AssessmentContext:
    """What a reasoner may look at besides the option itself."""

    world: GridWorld | None = None
    horizon: int = 4


class Reasoner:
    """Base class; subclasses implement :meth:`assess`."""

    def __init__(self, spec: ReasonerSpec, registry: FeatureRegistry | None = None):
        self.spec = spec
        if registry is not None:
            registry.check_names(sorted(spec.features_covered))

    @property
    def name(self) -> str:
        return self.spec.name

    def assess(self, option: EthOption, ctx: AssessmentContext) -> EvidenceSet:
        raise NotImplementedError

    def suggestions(self, ctx: AssessmentContext) -> list[EthOption]:
        return []

    def _restrict(self, ev: EvidenceSet) -> EvidenceSet:
        # a reasoner only speaks for the features it covers
        if not self.spec.features_covered:
            return ev
        extra = set(ev.scores) - self.spec.features_covered
        if extra:
            raise ValidationError(
                f"reasoner {self.name} produced scores for uncovered features {sorted(extra)}"
            )
        return ev


class ConsequenceReasoner(Reasoner):
    def __init__(self, spec: ReasonerSpec, registry: FeatureRegistry | None = None):
        super().__init__(spec, registry)
        self.distance_cap = int(spec.params.get("distance_cap", DEFAULT_DISTANCE_CAP))
        self.horizon = spec.params.get("horizon")

    def assess(self, option: EthOption, ctx: AssessmentContext) -> EvidenceSet:
        if ctx.world is None:
            raise ValidationError(f"reasoner {self.name} needs a world")
        horizon = int(self.horizon or ctx.horizon)
        return self._restrict(consequence_evidence(ctx.world, option, horizon, self.distance_cap))


class CueReasoner(Reasoner):
    """Attaches the situation assessment to every option and offers interventions."""

    def __init__(self, spec: ReasonerSpec, registry: FeatureRegistry | None = None):
        super().__init__(spec, registry)
        self.signals = [Signal.from_dict(s) for s in spec.params.get("signals", [])]
        self.rules = [CueRule.from_dict(r) for r in spec.params.get("rules", [])]
        declared = spec.params.get("predicates")
        self._props, self._suggestions = cue_assess(self.signals, self.rules, declared)

    def assess(self, option: EthOption, ctx: AssessmentContext) -> EvidenceSet:
        return EvidenceSet(option.id, propositions=self._props)

    def suggestions(self, ctx: AssessmentContext) -> list[EthOption]:
        return list(self._suggestions)


class StaticReasoner(Reasoner):
    """Annotation-table lookup, optionally with per-option scores and propositions."""

    def __init__(self, spec: ReasonerSpec, registry: FeatureRegistry | None = None):
        super().__init__(spec, registry)
        self.table = parse_annotation_table(spec.params.get("table", {}))
        self.scores = {k: dict(v) for k, v in spec.params.get("scores", {}).items()}
        self.propositions = {
            k: frozenset(parse_proposition(p) for p in v)
            for k, v in spec.params.get("propositions", {}).items()
        }

    def assess(self, option: EthOption, ctx: AssessmentContext) -> EvidenceSet:
        ev = static_annotate(option, self.table)
        if option.id in self.scores or option.id in self.propositions:
            ev = EvidenceSet(
                option.id,
                FeatureScores(self.scores.get(option.id, {})),
                self.propositions.get(option.id, frozenset()),
                ev.violations,
            )
        return self._restrict(ev)


_KINDS = {
    ReasonerKind.CONSEQUENCE_SIM: ConsequenceReasoner,
    ReasonerKind.CUE_RULES: CueReasoner,
    ReasonerKind.STATIC_ANNOTATION: StaticReasoner,
}


def build_reasoners(
    specs: Sequence[ReasonerSpec], registry: FeatureRegistry | None = None
) -> list[Reasoner]:
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValidationError(f"reasoner names must be unique: {names}")
    return [_KINDS[s.kind](s, registry) for s in specs]


def consequence_spec(
    name: str = "consequence", distance_cap: int = DEFAULT_DISTANCE_CAP, horizon: int | None = None
) -> ReasonerSpec:
    params: dict[str, Any] = {"distance_cap": distance_cap}
    if horizon is not None:
        params["horizon"] = horizon
    return ReasonerSpec(
        name,
        ReasonerKind.CONSEQUENCE_SIM,
        frozenset({HUMAN_SAFETY, ROBOT_SAFETY, GOAL_PROGRESS}),
        params,
    )
