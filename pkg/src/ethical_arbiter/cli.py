"""Command-line entry point: ``run``, ``verify``, ``explain`` and ``bench``.

Exit codes are fixed: 0 success (option chosen, property holds, replay
reproduces, latency within budget), 1 failure (property violated, replay
mismatch, budget exceeded), 2 configuration error, 3 no option chosen.
"""

from __future__ import annotations

import argparse
import json
import random
import statistics
import sys
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

from .arbiter import (
    ConfigurationError,
    ConstraintSet,
    EthicalPolicy,
    Principle,
    Region,
    STRATEGIES,
    StrategyConfig,
    Verdict as ArbiterVerdict,
    Weights,
    arbitrate,
)
from .config import ConfigError, load_document, validate_document
from .core import EthOption, FeatureRegistry, Provenance, ValidationError
from .reasoners import ReasonerKind, ReasonerSpec, build_reasoners, consequence_spec
from .trace import BlackBoxLog, LogError, ReplayMismatch, explain, replay, summarize
from .verify import FamilyTooLarge, PropertyId, ScenarioFamily, check, validate_principle
from .world import load_scenario, sample_options, scenario_horizon

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NO_CHOICE = 0, 1, 2, 3

_PATTERN_LIST = {"type": "array", "items": {"type": "string", "minLength": 1}}

CONSTRAINTS_SCHEMA = {
    "type": "object",
    "properties": {"prohibitions": _PATTERN_LIST, "obligations": _PATTERN_LIST},
    "additionalProperties": False,
}

PRINCIPLE_SCHEMA = {
    "type": "object",
    "required": ["features", "regions"],
    "properties": {
        "name": {"type": "string"},
        "features": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "regions": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["prefer"],
                "properties": {
                    "when": {"type": "array", "items": {"type": "string"}},
                    "prefer": {"enum": ["first", "second"]},
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

POLICY_SCHEMA = {
    "type": "object",
    "required": ["principles"],
    "properties": {
        "context": {"type": "string"},
        "principles": {"type": "array", "items": {"type": "string"}, "minItems": 1},
    },
    "additionalProperties": False,
}

_NUMBER = {"type": ["integer", "number", "string"]}

WEIGHTS_SCHEMA = {
    "type": "object",
    "properties": {
        "human": _NUMBER,
        "robot": _NUMBER,
        "goal": _NUMBER,
        "human_priority": {"type": "boolean"},
    },
    "additionalProperties": False,
}

REGISTRY_SCHEMA = {
    "type": "object",
    "required": ["features"],
    "properties": {
        "bound": {"type": "integer", "minimum": 1},
        "features": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "properties": {
                    "name": {"type": "string"},
                    "polarity": {"enum": ["higherIsBetter", "higherIsWorse"]},
                    "beneficiary": {"enum": ["human", "robot", "mission"]},
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

CUES_SCHEMA = {
    "type": "object",
    "properties": {
        "signals": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind", "subject", "intensity"],
                "properties": {"kind": {"type": "string"}, "subject": {"type": "string"}, "intensity": _NUMBER},
                "additionalProperties": False,
            },
        },
        "rules": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind", "threshold", "emit"],
                "properties": {
                    "kind": {"type": "string"},
                    "threshold": _NUMBER,
                    "emit": {"type": "string"},
                    "subject": {"type": "string"},
                    "suggest": {"type": "string"},
                },
                "additionalProperties": False,
            },
        },
        "predicates": {"type": "array", "items": {"type": "string"}},
    },
    "additionalProperties": False,
}

# propositions the consequence reasoner and the merge step can emit
_BUILTIN_PREDICATES = ("harmed", "severity", "collided_with_human", "score_conflict")


def data_path(*parts: str) -> Path:
    """Location of a file shipped with the package, e.g. ``data_path("scenarios", "corridor.yaml")``."""
    return Path(str(resources.files("ethical_arbiter").joinpath("data", *parts)))


def _load(path: str, schema: dict, what: str) -> Any:
    doc = load_document(path)
    validate_document(doc, schema, what, path)
    return doc


def _build(path: str, what: str, factory, doc: Any):
    """Run a domain constructor, turning its errors into a ConfigError that names the file."""
    try:
        return factory(doc)
    except (ValidationError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise exc.at(path) from None
        raise ConfigError(f"invalid {what}: {exc}", path=path) from None


def load_principle(path: str) -> Principle:
    return _build(path, "principle", Principle.from_dict, _load(path, PRINCIPLE_SCHEMA, "principle"))


def load_policy(path: str) -> EthicalPolicy:
    return _build(path, "policy", EthicalPolicy.from_dict, _load(path, POLICY_SCHEMA, "policy"))


def load_constraints(path: str) -> ConstraintSet:
    return _build(path, "constraints", ConstraintSet.from_dict, _load(path, CONSTRAINTS_SCHEMA, "constraints"))


def load_weights(path: str) -> Weights:
    return _build(path, "weights", Weights.from_dict, _load(path, WEIGHTS_SCHEMA, "weights"))


def load_registry(path: str) -> FeatureRegistry:
    return _build(path, "feature registry", FeatureRegistry.from_dict, _load(path, REGISTRY_SCHEMA, "feature registry"))


def load_family(path: str) -> ScenarioFamily:
    doc = load_document(path)
    return _build(path, "scenario family", lambda d: ScenarioFamily.from_dict(d, path), doc)


# ------------------------------------------------------------------------ run


def _strategy_from_args(args, declared: Sequence[str]) -> StrategyConfig:
    constraints = load_constraints(args.constraints) if args.constraints else None
    if constraints is not None:
        try:
            constraints.check_declared(declared)
        except ConfigurationError as exc:
            raise ConfigError(str(exc), path=args.constraints, field="prohibitions/obligations") from None
    principle = load_principle(args.principle) if args.principle else None
    policy = load_policy(args.policy) if args.policy else None
    weights = load_weights(args.weights) if args.weights else None
    try:
        return StrategyConfig(
            args.strategy,
            constraints=constraints,
            principle=principle,
            policy=policy,
            weights=weights,
            insufficiency=args.insufficiency,
        )
    except ValidationError as exc:
        raise ConfigError(str(exc), field="strategy") from None


def cmd_run(args) -> int:
    doc = load_document(args.scenario)
    try:
        world = load_scenario(doc)
    except ConfigError as exc:
        raise exc.at(args.scenario) from None
    except ValidationError as exc:
        raise ConfigError(str(exc), path=args.scenario) from None
    horizon = args.horizon if args.horizon is not None else scenario_horizon(doc)

    reasoners = [consequence_spec()]
    declared = list(_BUILTIN_PREDICATES)
    if args.cues:
        cues = _load(args.cues, CUES_SCHEMA, "cue rules")
        spec = ReasonerSpec("cues", ReasonerKind.CUE_RULES, params=cues)
        _build(args.cues, "cue rules", lambda s: build_reasoners([s]), spec)
        reasoners.append(spec)
        declared.extend(cues.get("predicates", ()))
        declared.extend(r["emit"].split("(")[0].strip() for r in cues.get("rules", ()))
    strategy = _strategy_from_args(args, declared)
    registry = load_registry(args.registry) if args.registry else None

    actions = sample_options(world, args.samples, args.seed, horizon)
    options = [EthOption(f"c{k}", a) for k, a in enumerate(actions)]
    log = BlackBoxLog(args.trace)
    decision = arbitrate(
        options, reasoners, strategy, world=world, horizon=horizon, seed=args.seed,
        budget=args.budget_rounds, registry=registry, log=log,
    )
    rec = log.get(decision.record_ref)
    print(f"record: {rec.id}")
    print(summarize(rec))
    if decision.verdict is ArbiterVerdict.CHOSEN:
        return EXIT_OK
    return EXIT_NO_CHOICE


# --------------------------------------------------------------------- verify


def cmd_verify(args) -> int:
    if args.principle and not args.property:
        principle = load_principle(args.principle)
        report = validate_principle(principle, seed=args.seed, samples=args.samples)
        print(report.summary())
        if args.report:
            Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        return EXIT_OK if not report.overlaps and not report.gap else EXIT_FAIL
    if not args.property or not args.family:
        raise ConfigError("verify needs --property and --family (or --principle alone)")
    prop = PropertyId.parse(args.property)
    family = load_family(args.family)
    try:
        verdict = check(prop, family, jobs=args.jobs)
    except FamilyTooLarge as exc:
        raise ConfigError(str(exc), path=args.family, field="cap") from None
    status = "HOLDS" if verdict.holds else "VIOLATED"
    print(f"{prop.value} on {family.name}: {status} ({verdict.scenarios_checked} scenarios checked)")
    if args.report:
        Path(args.report).write_text(json.dumps(verdict.to_dict(), indent=2) + "\n")
    if verdict.holds:
        return EXIT_OK
    cx = verdict.counterexample
    print(f"counterexample #{cx['index']}: {cx['reason']}")
    out = Path(args.counterexample or f"{family.name}.{prop.name.split('_')[0]}.counterexample.json")
    out.write_text(json.dumps(cx, indent=2) + "\n")
    print(f"counterexample written to {out}")
    return EXIT_FAIL


# -------------------------------------------------------------------- explain


def cmd_explain(args) -> int:
    log = BlackBoxLog(args.trace)
    try:
        rec = log.get(args.decision_id)
    except KeyError:
        if log.malformed_lines:
            print(f"REPLAY-MISMATCH: record {args.decision_id} not readable; "
                  f"malformed trace lines {log.malformed_lines}")
            return EXIT_FAIL
        raise ConfigError(f"no decision record with id {args.decision_id!r}", path=args.trace,
                          field="decision-id") from None
    except (LogError, ValidationError, KeyError, TypeError, ValueError) as exc:
        print(f"REPLAY-MISMATCH: record {args.decision_id} is damaged ({exc})")
        return EXIT_FAIL
    print(explain(rec))
    try:
        again = replay(rec)
    except ReplayMismatch as exc:
        print(f"REPLAY-MISMATCH: {exc}")
        return EXIT_FAIL
    except (ValidationError, KeyError, TypeError, ValueError) as exc:
        print(f"REPLAY-MISMATCH: record {rec.id} cannot be re-run ({exc})")
        return EXIT_FAIL
    if again != rec.decision:
        print(f"REPLAY-MISMATCH: re-run chose {again.chosen} ({again.verdict.value}), "
              f"record says {rec.decision.chosen} ({rec.decision.verdict.value})")
        return EXIT_FAIL
    print("REPLAY-OK")
    return EXIT_OK


# ---------------------------------------------------------------------- bench


def synthesize_principle(features: Sequence[str], regions: int, seed: int) -> Principle:
    """Seeded principle with ``regions`` regions of one to three conditions each."""
    rng = random.Random(seed)
    out = []
    for _ in range(regions):
        chosen = rng.sample(list(features), min(len(features), rng.randint(1, 3)))
        conds = tuple(f"{f} {rng.choice(('>', '<', '>=', '<='))} {rng.randint(-4, 4)}" for f in chosen)
        out.append(Region(conds, rng.choice(("first", "second"))))
    return Principle(tuple(features), tuple(out), "bench")


def synthesize_bench(n: int, f: int, strategy: str, regions: int, seed: int):
    """Options, one static reasoner with seeded random evidence, and a strategy."""
    rng = random.Random(seed)
    features = [f"f{i}" for i in range(f)]
    options = [EthOption(f"o{i:04d}", None, Provenance.CONTROLLER) for i in range(n)]
    scores = {o.id: {x: rng.randint(-5, 5) for x in features} for o in options}
    principles = features[: min(3, f)]
    table = {
        o.id: [[p, rng.randint(1, 3)] for p in principles if rng.random() < 0.5] for o in options
    }
    spec = ReasonerSpec(
        "bench", ReasonerKind.STATIC_ANNOTATION, frozenset(features), {"scores": scores, "table": table}
    )
    if strategy == "principle":
        cfg = StrategyConfig("principle", principle=synthesize_principle(features, regions, seed),
                             insufficiency="none")
    elif strategy == "policy":
        cfg = StrategyConfig("policy", policy=EthicalPolicy(tuple(principles)), insufficiency="none")
    elif strategy == "constraint":
        cfg = StrategyConfig("constraint", mission_feature=features[0],
                             collateral_feature=features[-1], insufficiency="none")
    else:
        raise ConfigError(f"bench supports principle, policy and constraint strategies, not {strategy!r}",
                          field="strategy")
    return options, [spec], cfg


def _p99(samples: Sequence[float]) -> float:
    if len(samples) < 2:
        return samples[0]
    return statistics.quantiles(samples, n=100, method="inclusive")[98]


def cmd_bench(args) -> int:
    for name in ("options", "features", "repetitions"):
        if getattr(args, name) < 1:
            raise ConfigError(f"--{name} must be >= 1", field=name)
    options, reasoners, strategy = synthesize_bench(
        args.options, args.features, args.strategy or "principle", args.regions, args.seed
    )
    if args.principle:
        principle = load_principle(args.principle)
        strategy = replace(strategy, principle=principle) if strategy.name == "principle" else strategy
    samples, chosen = [], set()
    for _ in range(args.repetitions):
        started = time.perf_counter()
        d = arbitrate(options, reasoners, strategy, seed=args.seed)
        samples.append((time.perf_counter() - started) * 1000)
        chosen.add(d.chosen)
    median = statistics.median(samples)
    within = median <= args.latency_budget_ms
    print(
        f"options={args.options} features={args.features} strategy={strategy.name} "
        f"repetitions={args.repetitions}"
    )
    print(f"chosen: {', '.join(sorted(str(c) for c in chosen))}")
    print(
        f"latency ms: min={min(samples):.3f} median={median:.3f} p99={_p99(samples):.3f} "
        f"budget={args.latency_budget_ms:g} -> {'WITHIN' if within else 'OVER'} BUDGET"
    )
    return EXIT_OK if within else EXIT_FAIL


# --------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ethical-arbiter", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="arbitrate once over a scenario and append the decision to a trace")
    run.add_argument("--scenario", required=True)
    run.add_argument("--strategy", default="weighted", choices=STRATEGIES)
    run.add_argument("--principle")
    run.add_argument("--policy")
    run.add_argument("--constraints")
    run.add_argument("--weights")
    run.add_argument("--registry")
    run.add_argument("--cues")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--horizon", type=int)
    run.add_argument("--budget-rounds", type=int, default=1)
    run.add_argument("--samples", type=int, default=4, help="controller options to sample (Stay is always one)")
    run.add_argument("--insufficiency", default="human_harm", choices=("human_harm", "none"))
    run.add_argument("--trace", help="JSON Lines trace to append to")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="check a property over a scenario family, or validate a principle")
    ver.add_argument("--property")
    ver.add_argument("--family")
    ver.add_argument("--principle", help="validate this principle for gaps and overlaps")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--samples", type=int, default=200_000)
    ver.add_argument("--jobs", type=int, default=1)
    ver.add_argument("--report")
    ver.add_argument("--counterexample")
    ver.set_defaults(func=cmd_verify)

    exp = sub.add_parser("explain", help="explain a recorded decision and replay it")
    exp.add_argument("--trace", required=True)
    exp.add_argument("--decision-id", required=True)
    exp.set_defaults(func=cmd_explain)

    bench = sub.add_parser("bench", help="measure arbitration latency on synthetic evidence")
    bench.add_argument("--options", type=int, default=100)
    bench.add_argument("--features", type=int, default=8)
    bench.add_argument("--strategy", default="principle", choices=("principle", "policy", "constraint"))
    bench.add_argument("--regions", type=int, default=13)
    bench.add_argument("--principle")
    bench.add_argument("--repetitions", type=int, default=50)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--latency-budget-ms", type=float, default=10.0)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError, LogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
