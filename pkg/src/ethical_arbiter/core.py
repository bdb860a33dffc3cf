"""Shared vocabulary: ethical features, scores, propositions, evidence and options.

All values here are immutable. Score maps are wrapped in read-only mappings
so evidence can be shared between reasoners and the arbiter without copying.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Any, Iterable, Mapping

SCORE_BOUND = 5


class ValidationError(ValueError):
    """Raised when a value violates a domain invariant."""


class Polarity(str, enum.Enum):
    HIGHER_IS_BETTER = "higherIsBetter"
    HIGHER_IS_WORSE = "higherIsWorse"


class Beneficiary(str, enum.Enum):
    HUMAN = "human"
    ROBOT = "robot"
    MISSION = "mission"


class Provenance(str, enum.Enum):
    CONTROLLER = "controller"
    ARBITER_REQUESTED = "arbiterRequested"


_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


_SEEN_IDENTS: set[str] = set()


def check_identifier(value: str, what: str = "identifier") -> str:
    if isinstance(value, str) and value in _SEEN_IDENTS:
        return value
    if not isinstance(value, str) or not _IDENT.match(value):
        raise ValidationError(f"invalid {what}: {value!r}")
    if len(_SEEN_IDENTS) < 100_000:
        _SEEN_IDENTS.add(value)
    return value


@dataclass(frozen=True)
class EthicalFeature:
    name: str
    polarity: Polarity = Polarity.HIGHER_IS_BETTER
    beneficiary: Beneficiary = Beneficiary.HUMAN

    def __post_init__(self):
        check_identifier(self.name, "feature name")
        object.__setattr__(self, "polarity", Polarity(self.polarity))
        object.__setattr__(self, "beneficiary", Beneficiary(self.beneficiary))

    def worse(self, a: int, b: int) -> int:
        """Return whichever of two scores is worse under this feature's polarity."""
        if self.polarity is Polarity.HIGHER_IS_BETTER:
            return min(a, b)
        return max(a, b)


class FeatureRegistry:
    """Named ethical features plus the score bound they share."""

    def __init__(self, features: Iterable[EthicalFeature] = (), bound: int = SCORE_BOUND):
        if bound < 1:
            raise ValidationError("score bound must be >= 1")
        self.bound = bound
        self._features: dict[str, EthicalFeature] = {}
        for f in features:
            self.register(f)

    def register(self, feature: EthicalFeature) -> None:
        if feature.name in self._features:
            raise ValidationError(f"duplicate feature: {feature.name}")
        self._features[feature.name] = feature

    def __contains__(self, name: object) -> bool:
        return name in self._features

    def __getitem__(self, name: str) -> EthicalFeature:
        try:
            return self._features[name]
        except KeyError:
            raise ValidationError(f"unregistered feature: {name}") from None

    def __iter__(self):
        return iter(self._features.values())

    def __len__(self) -> int:
        return len(self._features)

    @property
    def names(self) -> list[str]:
        return list(self._features)

    def check_names(self, names: Iterable[str]) -> None:
        for name in names:
            if name not in self._features:
                raise ValidationError(f"unregistered feature: {name}")

    def to_dict(self) -> dict:
        return {
            "bound": self.bound,
            "features": [
                {"name": f.name, "polarity": f.polarity.value, "beneficiary": f.beneficiary.value}
                for f in self._features.values()
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FeatureRegistry":
        return cls(
            (EthicalFeature(**f) for f in doc.get("features", [])),
            bound=doc.get("bound", SCORE_BOUND),
        )


def _frozen_int_map(values: Mapping[str, int], bound: int, what: str) -> Mapping[str, int]:
    out = {}
    for name, v in values.items():
        check_identifier(name, "feature name")
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValidationError(f"{what} for {name} must be an integer, got {v!r}")
        if not -bound <= v <= bound:
            raise ValidationError(f"{what} for {name} out of [-{bound}, {bound}]: {v}")
        out[name] = v
    return MappingProxyType(dict(sorted(out.items())))


@dataclass(frozen=True)
class FeatureScores:
    scores: Mapping[str, int] = field(default_factory=dict)
    bound: int = field(default=SCORE_BOUND, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scores", _frozen_int_map(self.scores, self.bound, "score"))

    def __hash__(self) -> int:
        return hash(tuple(self.scores.items()))

    def __getitem__(self, name: str) -> int:
        return self.scores.get(name, 0)

    def get(self, name: str, default: int = 0) -> int:
        return self.scores.get(name, default)

    def __iter__(self):
        return iter(self.scores)

    def __len__(self) -> int:
        return len(self.scores)

    def to_dict(self) -> dict[str, int]:
        return dict(self.scores)


@dataclass(frozen=True)
class DeltaVector:
    deltas: Mapping[str, int] = field(default_factory=dict)
    bound: int = field(default=2 * SCORE_BOUND, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "deltas", _frozen_int_map(self.deltas, self.bound, "delta"))

    def __hash__(self) -> int:
        return hash(tuple(self.deltas.items()))

    def __getitem__(self, name: str) -> int:
        return self.deltas.get(name, 0)

    def __neg__(self) -> "DeltaVector":
        return DeltaVector({k: -v for k, v in self.deltas.items()}, self.bound)

    def to_dict(self) -> dict[str, int]:
        return dict(self.deltas)


def delta_vector(
    a: FeatureScores, b: FeatureScores, registry: FeatureRegistry | None = None
) -> DeltaVector:
    """Per-feature difference ``a - b``; a feature missing from one side counts as 0."""
    names = set(a.scores) | set(b.scores)
    if registry is not None:
        registry.check_names(sorted(names))
    bound = max(a.bound, b.bound)
    return DeltaVector({n: a[n] - b[n] for n in names}, bound=2 * bound)


def to_fraction(value: Any) -> Fraction:
    """Exact rational from an int, decimal string, Fraction or float (via its repr)."""
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, float):
        value = repr(value)
    return Fraction(value)


def _certainty(value: Any) -> Fraction:
    try:
        c = to_fraction(value)
    except (TypeError, ValueError):
        raise ValidationError(f"invalid certainty: {value!r}") from None
    if not 0 <= c <= 1:
        raise ValidationError(f"certainty out of [0, 1]: {value!r}")
    return c


@dataclass(frozen=True, order=True)
class Proposition:
    predicate: str
    arguments: tuple[str, ...] = ()
    certainty: Fraction = Fraction(1)

    def __post_init__(self):
        check_identifier(self.predicate, "predicate")
        args = tuple(self.arguments)
        for a in args:
            if not isinstance(a, str) or not a:
                raise ValidationError(f"invalid argument {a!r} in {self.predicate}")
        object.__setattr__(self, "arguments", args)
        object.__setattr__(self, "certainty", _certainty(self.certainty))

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(self.arguments)})"

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"predicate": self.predicate, "arguments": list(self.arguments)}
        if self.certainty != 1:
            d["certainty"] = str(self.certainty)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Proposition":
        return cls(d["predicate"], tuple(d.get("arguments", ())), d.get("certainty", 1))


@dataclass(frozen=True, order=True)
class Violation:
    principle: str
    severity: int = 1

    def __post_init__(self):
        check_identifier(self.principle, "principle name")
        if isinstance(self.severity, bool) or not isinstance(self.severity, int) or self.severity < 1:
            raise ValidationError(f"violation severity must be an integer >= 1: {self.severity!r}")

    def to_dict(self) -> dict:
        return {"principle": self.principle, "severity": self.severity}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Violation":
        return cls(d["principle"], d["severity"])


EMPTY_SCORES = FeatureScores()


@dataclass(frozen=True)
class EvidenceSet:
    option_id: str
    scores: FeatureScores = EMPTY_SCORES
    propositions: frozenset[Proposition] = frozenset()
    violations: tuple[Violation, ...] = ()

    def __post_init__(self):
        check_identifier(self.option_id, "option id")
        if not isinstance(self.scores, FeatureScores):
            object.__setattr__(self, "scores", FeatureScores(self.scores))
        object.__setattr__(self, "propositions", frozenset(self.propositions))
        object.__setattr__(self, "violations", tuple(self.violations))

    def has_proposition(self, predicate: str) -> bool:
        return any(p.predicate == predicate for p in self.propositions)

    def to_dict(self) -> dict:
        return {
            "option_id": self.option_id,
            "scores": self.scores.to_dict(),
            "propositions": [p.to_dict() for p in sorted(self.propositions)],
            "violations": [v.to_dict() for v in self.violations],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvidenceSet":
        return cls(
            d["option_id"],
            FeatureScores(d.get("scores", {})),
            frozenset(Proposition.from_dict(p) for p in d.get("propositions", ())),
            tuple(Violation.from_dict(v) for v in d.get("violations", ())),
        )


def merge_evidence(
    parts: list[EvidenceSet], registry: FeatureRegistry | None = None
) -> EvidenceSet:
    """Combine the outputs of several reasoners for one option.

    Conflicting scores on the same feature resolve to the worse value under
    the feature's polarity and leave a ``score_conflict(feature)`` marker.
    Features missing from the registry are treated as higher-is-better.
    """
    if not parts:
        raise ValidationError("merge_evidence needs at least one evidence set")
    ids = {p.option_id for p in parts}
    if len(ids) != 1:
        raise ValidationError(f"cannot merge evidence for different options: {sorted(ids)}")
    if len(parts) == 1:
        return parts[0]

    scores: dict[str, int] = {}
    conflicts: set[str] = set()
    for part in parts:
        for name, value in part.scores.scores.items():
            if name not in scores:
                scores[name] = value
            elif scores[name] != value:
                feature = registry[name] if registry is not None and name in registry else EthicalFeature(name)
                scores[name] = feature.worse(scores[name], value)
                conflicts.add(name)
    props = set().union(*(p.propositions for p in parts))
    props.update(Proposition("score_conflict", (name,)) for name in conflicts)
    violations = sorted(v for p in parts for v in p.violations)
    bound = max(p.scores.bound for p in parts)
    return EvidenceSet(parts[0].option_id, FeatureScores(scores, bound), frozenset(props), tuple(violations))


@dataclass(frozen=True)
class EthOption:
    id: str
    payload: Any = None
    provenance: Provenance = Provenance.CONTROLLER

    def __post_init__(self):
        check_identifier(self.id, "option id")
        object.__setattr__(self, "provenance", Provenance(self.provenance))


def check_unique_ids(options: Iterable[EthOption]) -> None:
    seen: set[str] = set()
    for o in options:
        if o.id in seen:
            raise ValidationError(f"duplicate option id: {o.id}")
        seen.add(o.id)


_PROP_TEXT = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_.\-]*)\s*(?:\((.*)\))?\s*$")


def parse_proposition(text: str, certainty: Any = 1) -> Proposition:
    """Parse ``pred(a,b)`` or a bare ``pred`` into a Proposition."""
    m = _PROP_TEXT.match(text) if isinstance(text, str) else None
    if not m:
        raise ValidationError(f"cannot parse proposition: {text!r}")
    args = tuple(a.strip() for a in m.group(2).split(",")) if m.group(2) else ()
    return Proposition(m.group(1), args, certainty)
