"""Bounded explicit-state checking of arbitration properties over scenario families.

A family is a finite, lexicographically enumerated set of scenarios. ``check``
runs the arbiter on every scenario, tests one property against an
independent oracle and stops at the first violation.
"""

from __future__ import annotations

import enum
import functools
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from .arbiter import (
    ConstraintSet,
    Decision,
    Pattern,
    Principle,
    StrategyConfig,
    Verdict as ArbiterVerdict,
    run_arbitration,
)
from .config import ConfigError, validate_document
from .core import EthOption, EvidenceSet, ValidationError
from .reasoners import ReasonerKind, ReasonerSpec, consequence_spec
from .trace import DecisionRecord, ReplayMismatch, record, replay
from .world import (
    MOVE_ORDER,
    Action,
    GridWorld,
    Human,
    generate_intercepts,
    sample_options,
    simulate,
)

DEFAULT_CAP = 10**7


class PropertyId(str, enum.Enum):
    P1 = "P1_policyConformance"
    P2 = "P2_vetoSoundness"
    P3 = "P3_humanPriority"
    P4 = "P4_replayFidelity"

    @classmethod
    def parse(cls, text: str) -> "PropertyId":
        for p in cls:
            if text in (p.value, p.name, p.value.split("_", 1)[1]):
                return p
        raise ConfigError(f"unknown property: {text!r}", field="property")


class FamilyTooLarge(ValidationError):
    def __init__(self, count: int, cap: int):
        self.count = count
        super().__init__(f"family has {count} scenarios, over the cap of {cap}")


class PropertyMismatch(ConfigError):
    pass


@dataclass(frozen=True)
class Scenario:
    index: int
    world: GridWorld | None
    horizon: int
    options: tuple[EthOption, ...]
    reasoners: tuple[ReasonerSpec, ...]
    document: Mapping[str, Any]


FAMILY_SCHEMA = {
    "type": "object",
    "required": ["kind", "strategy"],
    "properties": {
        "kind": {"enum": ["grid", "corridor", "annotation"]},
        "name": {"type": "string"},
        "widths": {"$ref": "#/$defs/range"},
        "heights": {"$ref": "#/$defs/range"},
        "horizons": {"$ref": "#/$defs/range"},
        "humans": {"$ref": "#/$defs/range"},
        "robot": {"$ref": "#/$defs/placement"},
        "goal": {"$ref": "#/$defs/placement"},
        "danger": {"$ref": "#/$defs/placement"},
        "danger_offsets": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "options": {
            "type": "object",
            "properties": {
                "generator": {"enum": ["samples", "exhaustive"]},
                "n": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "max_length": {"type": "integer", "minimum": 1},
                "intercepts": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "plans": {"$ref": "#/$defs/range"},
        "principles": {"$ref": "#/$defs/range"},
        "max_severity": {"type": "integer", "minimum": 1},
        "max_violations_per_principle": {"type": "integer", "minimum": 1},
        "strategy": {"type": "object", "required": ["name"]},
        "distance_cap": {"type": "integer", "minimum": 1},
        "budget": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer"},
        "cap": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
    "$defs": {
        "range": {
            "type": "array",
            "items": {"type": "integer", "minimum": 0},
            "minItems": 2,
            "maxItems": 2,
        },
        "placement": {
            "oneOf": [
                {"enum": ["all", "robot", "none"]},
                {"type": "array", "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}},
            ]
        },
    },
}


@dataclass(frozen=True)
class ScenarioFamily:
    """A finite scenario family.

    ``grid`` enumerates every placement of robot, goal, danger cell and
    humans (start and target) on each grid size. ``corridor`` puts one human
    on the middle row walking toward a danger cell and enumerates robot
    starts. ``annotation`` enumerates annotation tables for plan ranking,
    up to relabelling of plans.
    """

    kind: str
    strategy: Mapping[str, Any]
    widths: tuple[int, int] = (3, 3)
    heights: tuple[int, int] = (3, 3)
    horizons: tuple[int, int] = (4, 4)
    humans: tuple[int, int] = (0, 0)
    robot: Any = "all"
    goal: Any = "all"
    danger: Any = "none"
    danger_offsets: tuple[int, ...] = ()
    options: Mapping[str, Any] = field(default_factory=dict)
    plans: tuple[int, int] = (1, 3)
    principles: tuple[int, int] = (1, 2)
    max_severity: int = 2
    max_violations_per_principle: int = 1
    distance_cap: int = 5
    budget: int = 0
    seed: int = 0
    cap: int = DEFAULT_CAP
    name: str = "family"

    @classmethod
    def from_dict(cls, d: Mapping, path: str | None = None) -> "ScenarioFamily":
        validate_document(d, FAMILY_SCHEMA, "scenario family", path)
        kw = dict(d)
        for key in ("widths", "heights", "horizons", "humans", "plans", "principles"):
            if key in kw:
                kw[key] = tuple(kw[key])
        for key in ("robot", "goal", "danger"):
            if isinstance(kw.get(key), list):
                kw[key] = tuple(tuple(c) for c in kw[key])
        if "danger_offsets" in kw:
            kw["danger_offsets"] = tuple(kw["danger_offsets"])
        fam = cls(**kw)
        fam.strategy_config()
        return fam

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "strategy": dict(self.strategy),
            "name": self.name,
            "cap": self.cap,
            "budget": self.budget,
            "seed": self.seed,
        }
        if self.kind == "annotation":
            d.update(
                plans=list(self.plans),
                principles=list(self.principles),
                max_severity=self.max_severity,
                max_violations_per_principle=self.max_violations_per_principle,
            )
            return d
        d.update(
            widths=list(self.widths),
            heights=list(self.heights),
            horizons=list(self.horizons),
            options=dict(self.options),
            distance_cap=self.distance_cap,
        )
        for key in ("robot", "goal", "danger"):
            v = getattr(self, key)
            d[key] = v if isinstance(v, str) else [list(c) for c in v]
        if self.kind == "grid":
            d["humans"] = list(self.humans)
        if self.danger_offsets:
            d["danger_offsets"] = list(self.danger_offsets)
        return d

    def strategy_config(self, principles: Sequence[str] | None = None) -> StrategyConfig:
        """Strategy for this family; annotation families rank their own principle names."""
        key = tuple(principles) if principles else None
        cache = self.__dict__.setdefault("_strategy_cache", {})
        if key not in cache:
            cache[key] = self._build_strategy(principles)
        return cache[key]

    def _build_strategy(self, principles: Sequence[str] | None) -> StrategyConfig:
        doc = dict(self.strategy)
        if self.kind == "annotation" and doc.get("name") == "policy":
            doc["policy"] = {**doc.get("policy", {}), "principles": list(principles or ["v0"])}
        try:
            return StrategyConfig.from_dict(doc)
        except (ValidationError, KeyError) as exc:
            raise ConfigError(f"invalid strategy: {exc}", field="strategy") from None


def _span(r: tuple[int, int]) -> range:
    lo, hi = r
    if hi < lo:
        raise ConfigError(f"empty range {list(r)}")
    return range(lo, hi + 1)


def _cells(w: int, h: int) -> list[tuple[int, int]]:
    return [(x, y) for x in range(w) for y in range(h)]


def _placements(spec: Any, w: int, h: int) -> list[tuple[int, int]]:
    if spec == "all":
        return _cells(w, h)
    return [tuple(c) for c in spec if 0 <= c[0] < w and 0 <= c[1] < h]


def _severity_choices(max_severity: int, max_count: int) -> list[tuple[int, ...]]:
    """Possible violation severities of one plan under one principle (sorted tuples)."""
    out: list[tuple[int, ...]] = []
    for count in range(max_count + 1):
        out.extend(itertools.combinations_with_replacement(range(1, max_severity + 1), count))
    return out


def count_scenarios(family: ScenarioFamily) -> int:
    """Number of scenarios ``enumerate_family`` will produce, computed without enumerating."""
    if family.kind == "annotation":
        per = len(_severity_choices(family.max_severity, family.max_violations_per_principle))
        total = 0
        for k in _span(family.principles):
            if k < 1:
                continue
            m = per**k
            for n in _span(family.plans):
                if n >= 1:
                    total += math.comb(m + n - 1, n)
        return total
    n_h = len(_span(family.horizons))
    total = 0
    for w in _span(family.widths):
        for h in _span(family.heights):
            total += _grid_count(family, w, h) * n_h
    return total


def _grid_count(family: ScenarioFamily, w: int, h: int) -> int:
    if family.kind == "corridor":
        return sum(1 for _ in _corridor_worlds(family, w, h))
    cells = len(_cells(w, h))
    robots = _placements(family.robot, w, h)
    goals = len(_placements(family.goal, w, h)) if family.goal != "robot" else 1
    dangers = [()] if family.danger == "none" else [(c,) for c in _placements(family.danger, w, h)]
    total = 0
    for d in dangers:
        n_robot = sum(1 for r in robots if r not in d)
        humans = sum(cells ** (2 * k) for k in _span(family.humans))
        total += n_robot * goals * humans
    return total


def _corridor_worlds(family: ScenarioFamily, w: int, h: int) -> Iterator[GridWorld]:
    y = h // 2
    offsets = family.danger_offsets or (w - 1,)
    for off in offsets:
        if off >= w:
            continue
        danger = (off, y)
        start = (0, y)
        robots = [c for c in _placements(family.robot, w, h) if c not in (danger, start)]
        for r in robots:
            goals = [r] if family.goal == "robot" else _placements(family.goal, w, h)
            for g in goals:
                yield GridWorld(w, h, r, g, (Human("h1", start, danger),), frozenset({danger}))


def _grid_worlds(family: ScenarioFamily, w: int, h: int) -> Iterator[GridWorld]:
    cells = _cells(w, h)
    dangers = [()] if family.danger == "none" else [(c,) for c in _placements(family.danger, w, h)]
    for d in dangers:
        for r in _placements(family.robot, w, h):
            if r in d:
                continue
            goals = [r] if family.goal == "robot" else _placements(family.goal, w, h)
            for g in goals:
                for k in _span(family.humans):
                    for spots in itertools.product(cells, repeat=2 * k):
                        humans = tuple(
                            Human(f"h{i + 1}", spots[2 * i], spots[2 * i + 1]) for i in range(k)
                        )
                        yield GridWorld(w, h, r, g, humans, frozenset(d))


def _exhaustive_actions(max_len: int) -> list[Action]:
    out = []
    for n in range(1, max_len + 1):
        out.extend(Action(m) for m in itertools.product(MOVE_ORDER, repeat=n))
    return out


def world_options(family: ScenarioFamily, world: GridWorld, horizon: int) -> list[EthOption]:
    spec = family.options
    gen = spec.get("generator", "samples")
    if gen == "exhaustive":
        actions = [a.padded(horizon) for a in _exhaustive_actions(min(spec.get("max_length", 1), horizon))]
    else:
        actions = sample_options(world, spec.get("n", 8), spec.get("seed", family.seed), horizon)
    out, seen = [], set()
    for a in actions:
        if a.moves not in seen:
            seen.add(a.moves)
            out.append(EthOption(f"o{len(out)}", a))
    if spec.get("intercepts", False):
        k = 0
        for hm in world.humans:
            for a in generate_intercepts(world, hm.id, horizon):
                a = a.padded(horizon)
                if a.moves not in seen:
                    seen.add(a.moves)
                    out.append(EthOption(f"i{k}", a))
                    k += 1
    return out


def enumerate_family(family: ScenarioFamily, check_cap: bool = True) -> Iterator[Scenario]:
    """Yield every scenario of the family in a fixed lexicographic order."""
    if check_cap:
        total = count_scenarios(family)
        if total > family.cap:
            raise FamilyTooLarge(total, family.cap)
    if family.kind == "annotation":
        yield from _annotation_scenarios(family)
        return
    index = 0
    reasoners = (consequence_spec(distance_cap=family.distance_cap),)
    builder = _corridor_worlds if family.kind == "corridor" else _grid_worlds
    for w in _span(family.widths):
        for h in _span(family.heights):
            for world in builder(family, w, h):
                for horizon in _span(family.horizons):
                    options = tuple(world_options(family, world, horizon))
                    yield Scenario(
                        index, world, horizon, options, reasoners, world.to_document(horizon)
                    )
                    index += 1


def _annotation_scenarios(family: ScenarioFamily) -> Iterator[Scenario]:
    index = 0
    choices = _severity_choices(family.max_severity, family.max_violations_per_principle)
    for k in _span(family.principles):
        if k < 1:
            continue
        names = [f"v{i}" for i in range(k)]
        rows = [
            [[names[i], s] for i, sevs in enumerate(per) for s in sevs]
            for per in itertools.product(choices, repeat=k)
        ]
        for n in _span(family.plans):
            if n < 1:
                continue
            options = tuple(EthOption(f"p{j}") for j in range(n))
            ids = [o.id for o in options]
            for combo in itertools.combinations_with_replacement(range(len(rows)), n):
                table = {oid: rows[c] for oid, c in zip(ids, combo)}
                spec = ReasonerSpec("annotations", ReasonerKind.STATIC_ANNOTATION, params={"table": table})
                yield Scenario(
                    index, None, 1, options, (spec,),
                    {"principles": names, "table": table},
                )
                index += 1


# ------------------------------------------------------------------- oracles


def _oracle_policy_cmp(a: EvidenceSet, b: EvidenceSet, order: Sequence[str]) -> int:
    """Pairwise comparison written independently of the arbiter's sort key."""
    for name in order:
        sa = sorted((v.severity for v in a.violations if v.principle == name), reverse=True)
        sb = sorted((v.severity for v in b.violations if v.principle == name), reverse=True)
        wa, wb = (sa[0] if sa else 0), (sb[0] if sb else 0)
        if wa != wb:
            return -1 if wa < wb else 1
        if len(sa) != len(sb):
            return -1 if len(sa) < len(sb) else 1
    return (a.option_id > b.option_id) - (a.option_id < b.option_id)


def _oracle_vetoed(ev: EvidenceSet, constraints: ConstraintSet | None) -> bool:
    if constraints is None:
        return False

    def hit(pat: Pattern) -> bool:
        for p in ev.propositions:
            if p.predicate != pat.predicate:
                continue
            if pat.arguments is None:
                return True
            if len(p.arguments) == len(pat.arguments) and all(
                x in ("*", y) for x, y in zip(pat.arguments, p.arguments)
            ):
                return True
        return False

    return any(hit(p) for p in constraints.prohibitions) or not all(
        hit(p) for p in constraints.obligations
    )


# --------------------------------------------------------------------- check


@dataclass(frozen=True)
class Verdict:
    property: PropertyId
    holds: bool
    scenarios_checked: int
    counterexample: Mapping[str, Any] | None = None

    def __post_init__(self):
        if self.holds == (self.counterexample is not None):
            raise ValidationError("a counterexample is present exactly when the property fails")

    def to_dict(self) -> dict:
        return {
            "property": self.property.value,
            "holds": self.holds,
            "scenarios_checked": self.scenarios_checked,
            "counterexample": self.counterexample,
        }


def _require_strategy(prop: PropertyId, strategy: StrategyConfig) -> None:
    if prop is PropertyId.P1 and strategy.name != "policy":
        raise PropertyMismatch(f"{prop.value} needs the policy strategy, family uses {strategy.name}")
    if prop is PropertyId.P3 and strategy.name != "weighted":
        raise PropertyMismatch(f"{prop.value} needs the weighted strategy, family uses {strategy.name}")


def _run(family: ScenarioFamily, sc: Scenario, strategy: StrategyConfig):
    return run_arbitration(
        sc.options, sc.reasoners, strategy, world=sc.world, horizon=sc.horizon,
        seed=family.seed, budget=family.budget,
    )


def _picked(decision: Decision) -> str | None:
    return decision.chosen if decision.chosen is not None else decision.candidate


def check_scenario(prop: PropertyId, family: ScenarioFamily, sc: Scenario) -> str | None:
    """Return a description of the violation, or None if the property holds here."""
    principles = sc.document.get("principles") if family.kind == "annotation" else None
    strategy = family.strategy_config(principles)
    run = _run(family, sc, strategy)
    decision = run.decision
    if prop is PropertyId.P1:
        order = strategy.policy.ordered_principles
        permitted = [
            run.evidence[o.id] for o in run.options
            if not _oracle_vetoed(run.evidence[o.id], strategy.constraints)
        ]
        if not permitted:
            return None if decision.verdict is ArbiterVerdict.ALL_VETOED else "no permitted plan but one was chosen"
        best = min(permitted, key=functools.cmp_to_key(lambda a, b: _oracle_policy_cmp(a, b, order)))
        picked = _picked(decision)
        if picked != best.option_id:
            return f"chose {picked} but the policy-minimal permitted plan is {best.option_id}"
        return None
    if prop is PropertyId.P2:
        chosen = decision.chosen
        if chosen is None:
            return None
        if chosen in decision.vetoes or _oracle_vetoed(run.evidence[chosen], strategy.constraints):
            return f"chose {chosen}, which the constraints veto"
        return None
    if prop is PropertyId.P3:
        harmed = {
            o.id: simulate(sc.world, o.payload, sc.horizon).any_human_harmed for o in run.options
        }
        picked = _picked(decision)
        if picked is None:
            return None
        if not all(harmed.values()) and harmed[picked]:
            safe = sorted(k for k, v in harmed.items() if not v)
            return f"chose {picked}, which harms a human, although {safe} harm nobody"
        return None
    rec = record(run)
    try:
        again = replay(rec)
    except ReplayMismatch as exc:
        return f"replay refused: {exc}"
    if again != rec.decision:
        return f"replay produced {again.to_dict()} instead of {rec.decision.to_dict()}"
    return None


def _counterexample(prop: PropertyId, family: ScenarioFamily, sc: Scenario, reason: str) -> dict:
    principles = sc.document.get("principles") if family.kind == "annotation" else None
    rec: DecisionRecord = record(_run(family, sc, family.strategy_config(principles)))
    return {
        "index": sc.index,
        "reason": reason,
        "scenario": dict(sc.document),
        "record": rec.to_dict(),
    }


def _check_range(prop_value: str, family_doc: dict, start: int, stop: int) -> tuple[int, str] | None:
    prop = PropertyId(prop_value)
    family = ScenarioFamily.from_dict(family_doc)
    for sc in itertools.islice(enumerate_family(family, check_cap=False), start, stop):
        reason = check_scenario(prop, family, sc)
        if reason is not None:
            return sc.index, reason
    return None


def check(prop: PropertyId | str, family: ScenarioFamily, jobs: int = 1) -> Verdict:
    """Check one property over every scenario of ``family``.

    The first violating scenario in enumeration order is reported, also
    when chunks are checked in parallel.
    """
    prop = prop if isinstance(prop, PropertyId) else PropertyId.parse(prop)
    total = count_scenarios(family)
    if total > family.cap:
        raise FamilyTooLarge(total, family.cap)
    _require_strategy(prop, family.strategy_config(["v0"]))
    if jobs <= 1:
        checked = 0
        for sc in enumerate_family(family, check_cap=False):
            checked += 1
            reason = check_scenario(prop, family, sc)
            if reason is not None:
                return Verdict(prop, False, checked, _counterexample(prop, family, sc, reason))
        return Verdict(prop, True, checked)
    chunk = max(1, math.ceil(total / (jobs * 4)))
    bounds = [(s, min(s + chunk, total)) for s in range(0, total, chunk)]
    doc = family.to_dict()
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(_check_range, *zip(*[(prop.value, doc, s, e) for s, e in bounds])))
    hits = [r for r in results if r is not None]
    if not hits:
        return Verdict(prop, True, total)
    index, reason = min(hits)
    sc = next(itertools.islice(enumerate_family(family, check_cap=False), index, None))
    return Verdict(prop, False, index + 1, _counterexample(prop, family, sc, reason))


def rerun_counterexample(family: ScenarioFamily, counterexample: Mapping) -> Decision:
    """Re-run the arbiter on a counterexample's own recorded inputs."""
    rec = DecisionRecord.from_dict(counterexample["record"])
    return replay(rec)


# --------------------------------------------------------- principle validation


@dataclass(frozen=True)
class PrincipleReport:
    features: tuple[str, ...]
    region_count: int
    mode: str
    points_checked: int
    overlaps: tuple[tuple[int, int, Mapping[str, int]], ...]
    gap: Mapping[str, int] | None
    uncovered_points: int
    seed: int | None

    @property
    def exhaustive(self) -> bool:
        return self.mode == "exhaustive"

    @property
    def uncovered_fraction_upper95(self) -> float:
        """Upper 95% bound on the uncovered share of the grid; exact when exhaustive."""
        if self.exhaustive:
            return self.uncovered_points / self.points_checked
        k, n = self.uncovered_points, self.points_checked
        if k == 0:
            return 3.0 / n
        p = k / n
        return min(1.0, p + 1.96 * math.sqrt(p * (1 - p) / n))

    def to_dict(self) -> dict:
        return {
            "features": list(self.features),
            "regions": self.region_count,
            "mode": self.mode,
            "points_checked": self.points_checked,
            "overlaps": [{"regions": [i, j], "witness": dict(w)} for i, j, w in self.overlaps],
            "gap": dict(self.gap) if self.gap is not None else None,
            "uncovered_points": self.uncovered_points,
            "uncovered_fraction_upper95": self.uncovered_fraction_upper95,
            "seed": self.seed,
        }

    def summary(self, max_overlaps: int = 10) -> str:
        lines = [
            f"principle over {len(self.features)} features, {self.region_count} regions, "
            f"{self.mode} check of {self.points_checked} delta points",
            f"overlapping region pairs: {len(self.overlaps)}",
        ]
        for i, j, w in self.overlaps[:max_overlaps]:
            lines.append(f"  regions {i} and {j} overlap, e.g. at {dict(w)}")
        if len(self.overlaps) > max_overlaps:
            lines.append(f"  ... and {len(self.overlaps) - max_overlaps} more pairs")
        if self.gap is None:
            lines.append("no uncovered delta point found")
        else:
            lines.append(f"uncovered points: {self.uncovered_points}; example {dict(self.gap)}")
        if not self.exhaustive:
            lines.append(f"uncovered share below {self.uncovered_fraction_upper95:.2e} (95% upper bound)")
        return "\n".join(lines)


def _region_box(p: Principle, index: int, bound: int) -> dict[str, tuple[int, int]]:
    box = {f: (-bound, bound) for f in p.features}
    for c in p.regions[index].conditions:
        lo, hi = box[c.feature]
        t = c.threshold
        if c.relation == "<":
            hi = min(hi, t - 1)
        elif c.relation == "<=":
            hi = min(hi, t)
        elif c.relation == ">":
            lo = max(lo, t + 1)
        elif c.relation == ">=":
            lo = max(lo, t)
        else:
            lo, hi = max(lo, t), min(hi, t)
        box[c.feature] = (lo, hi)
    return box


def _region_mask(p: Principle, index: int, points: np.ndarray, bound: int) -> np.ndarray:
    box = _region_box(p, index, bound)
    mask = np.ones(points.shape[0], dtype=bool)
    for k, f in enumerate(p.features):
        lo, hi = box[f]
        mask &= (points[:, k] >= lo) & (points[:, k] <= hi)
    return mask


def validate_principle(
    p: Principle,
    seed: int = 0,
    samples: int = 200_000,
    exhaustive_up_to: int = 3,
    bound: int | None = None,
) -> PrincipleReport:
    """Report overlapping regions and uncovered points of the bounded delta grid.

    Overlaps are decided exactly from the regions' integer boxes. Coverage
    is checked on every grid point for up to ``exhaustive_up_to`` features,
    otherwise on ``samples`` points drawn with ``seed``.
    """
    bound = p.delta_bound if bound is None else bound
    n = len(p.features)
    overlaps = []
    boxes = [_region_box(p, i, bound) for i in range(len(p.regions))]
    for i, j in itertools.combinations(range(len(p.regions)), 2):
        inter = {f: (max(boxes[i][f][0], boxes[j][f][0]), min(boxes[i][f][1], boxes[j][f][1])) for f in p.features}
        empty_i = any(lo > hi for lo, hi in boxes[i].values())
        empty_j = any(lo > hi for lo, hi in boxes[j].values())
        if not empty_i and not empty_j and all(lo <= hi for lo, hi in inter.values()):
            witness = {f: (0 if lo <= 0 <= hi else lo) for f, (lo, hi) in inter.items()}
            overlaps.append((i, j, witness))
    if n <= exhaustive_up_to:
        axes = [np.arange(-bound, bound + 1)] * n
        points = np.array(np.meshgrid(*axes, indexing="ij")).reshape(n, -1).T if n else np.zeros((1, 0), int)
        mode, used_seed = "exhaustive", None
    else:
        rng = np.random.default_rng(seed)
        points = rng.integers(-bound, bound + 1, size=(samples, n))
        mode, used_seed = "sampled", seed
    covered = np.zeros(points.shape[0], dtype=bool)
    for i in range(len(p.regions)):
        covered |= _region_mask(p, i, points, bound)
    uncovered = np.flatnonzero(~covered)
    gap = None
    if uncovered.size:
        gap = {f: int(v) for f, v in zip(p.features, points[uncovered[0]])}
    return PrincipleReport(
        tuple(p.features), len(p.regions), mode, int(points.shape[0]), tuple(overlaps),
        gap, int(uncovered.size), used_seed,
    )
