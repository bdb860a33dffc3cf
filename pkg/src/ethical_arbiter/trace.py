"""Decision records, the append-only black-box log, explanations and replay."""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator, Mapping

from .core import EthOption, EvidenceSet, FeatureRegistry, ValidationError
from .world import Action


class ReplayMismatch(Exception):
    """A record does not reproduce: its content was altered or the configs differ."""


class LogError(OSError):
    pass


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def serialize_option(o: EthOption) -> dict:
    if isinstance(o.payload, Action):
        payload: Any = {"type": "action", "moves": o.payload.to_list()}
    elif o.payload is None:
        payload = None
    else:
        payload = {"type": "data", "value": o.payload}
    return {"id": o.id, "payload": payload, "provenance": o.provenance.value}


def deserialize_option(d: Mapping) -> EthOption:
    p = d.get("payload")
    if p is None:
        payload = None
    elif p["type"] == "action":
        payload = Action(tuple(p["moves"]))
    else:
        payload = p["value"]
    return EthOption(d["id"], payload, d.get("provenance", "controller"))


def compute_digest(inputs: Mapping, options: list, evidence: Mapping) -> str:
    body = {"inputs": inputs, "options": options, "evidence": evidence}
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()


@dataclass(frozen=True)
class DecisionRecord:
    id: str
    inputs_digest: str
    strategy: str
    inputs: Mapping[str, Any]
    options: list
    evidence: Mapping[str, Any]
    steps: list
    decision: Any
    latency_micros: int
    timestamp: str

    def __post_init__(self):
        if self.latency_micros < 0:
            raise ValidationError("latency must be non-negative")

    def evidence_sets(self) -> dict[str, EvidenceSet]:
        return {k: EvidenceSet.from_dict(v) for k, v in self.evidence.items()}

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "inputs_digest": self.inputs_digest,
            "strategy": self.strategy,
            "inputs": self.inputs,
            "options": self.options,
            "evidence": self.evidence,
            "steps": self.steps,
            "decision": self.decision.to_dict(),
            "latency_micros": self.latency_micros,
            "timestamp": self.timestamp,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: Mapping) -> "DecisionRecord":
        from .arbiter import Decision

        return cls(
            id=d["id"],
            inputs_digest=d["inputs_digest"],
            strategy=d["strategy"],
            inputs=d["inputs"],
            options=d["options"],
            evidence=d["evidence"],
            steps=d["steps"],
            decision=Decision.from_dict(d["decision"]),
            latency_micros=d["latency_micros"],
            timestamp=d["timestamp"],
        )


class BlackBoxLog:
    """Append-only JSON Lines log of decision records.

    Ids are zero-padded counters, so they increase strictly in append order.
    Without a path the log lives in memory.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._lines: list[str] = []
        if self.path is not None and self.path.exists():
            self._lines = [line for line in self.path.read_text().splitlines() if line.strip()]
        self._next = self._last_number() + 1

    def _last_number(self) -> int:
        for line in reversed(self._lines):
            try:
                return int(json.loads(line)["id"])
            except (ValueError, KeyError, TypeError):
                continue
        return len(self._lines)

    @property
    def malformed_lines(self) -> list[int]:
        """1-based numbers of lines that are not JSON objects."""
        bad = []
        for n, line in enumerate(self._lines, 1):
            try:
                if not isinstance(json.loads(line), dict):
                    bad.append(n)
            except ValueError:
                bad.append(n)
        return bad

    def append(self, rec: DecisionRecord) -> DecisionRecord:
        """Assign the next id to ``rec`` and write it; returns the stored record."""
        with self._lock:
            rid = f"{self._next:08d}"
            stored = replace(rec, id=rid, decision=replace(rec.decision, record_ref=rid))
            line = stored.to_json()
            if self.path is not None:
                try:
                    with self.path.open("a") as fh:
                        fh.write(line + "\n")
                except OSError as exc:
                    raise LogError(f"cannot append to {self.path}: {exc.strerror}") from None
            self._next += 1
            self._lines.append(line)
            return stored

    def __len__(self) -> int:
        return len(self._lines)

    def __iter__(self) -> Iterator[DecisionRecord]:
        for line in list(self._lines):
            yield DecisionRecord.from_dict(json.loads(line))

    def get(self, record_id: str) -> DecisionRecord:
        """Look up a record by id; ``"7"`` and ``"00000007"`` name the same record."""
        wanted = f"{int(record_id):08d}" if str(record_id).isdigit() else str(record_id)
        for line in self._lines:
            try:
                d = json.loads(line)
            except ValueError:
                continue
            if isinstance(d, dict) and d.get("id") == wanted:
                return DecisionRecord.from_dict(d)
        raise KeyError(record_id)


def record(run, log: BlackBoxLog | None = None) -> DecisionRecord:
    """Turn a finished arbitration run into a decision record, appending it to ``log``."""
    options = [serialize_option(o) for o in run.options]
    evidence = {k: v.to_dict() for k, v in sorted(run.evidence.items())}
    digest = compute_digest(run.inputs, options, evidence)
    rec = DecisionRecord(
        id=f"u-{digest[:12]}",
        inputs_digest=digest,
        strategy=run.inputs["strategy"]["name"],
        inputs=run.inputs,
        options=options,
        evidence=evidence,
        steps=run.steps,
        decision=replace(run.decision, record_ref=f"u-{digest[:12]}"),
        latency_micros=run.latency_micros,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )
    if log is not None:
        rec = log.append(rec)
    return rec


# --------------------------------------------------------------- explanation


def _fmt_deltas(deltas: Mapping[str, int]) -> str:
    return ", ".join(f"{k}={v:+d}" for k, v in deltas.items()) or "(no features)"


def _fmt_key(key) -> str:
    # keys are tuples in a live run and lists once loaded from JSON
    return "[" + ", ".join(f"({w},{c})" for w, c in key) + "]"


class _Context:
    """What a compare step needs from the rest of the record to be readable."""

    def __init__(self, rec: DecisionRecord):
        doc = rec.inputs.get("strategy", {}).get("principle")
        self.features = list(doc["features"]) if doc else []
        self.regions = [
            f"{' and '.join(r.get('when', ())) or 'true'} => prefer {r['prefer']}" for r in doc["regions"]
        ] if doc else []
        self.scores = {k: v.get("scores", {}) for k, v in rec.evidence.items()}

    def deltas(self, first: str, second: str) -> dict[str, int]:
        a, b = self.scores.get(first, {}), self.scores.get(second, {})
        return {f: a.get(f, 0) - b.get(f, 0) for f in self.features}


def _explain_step(step: Mapping, ctx: _Context) -> str:
    kind = step["kind"]
    if kind == "veto":
        if step["vetoed"]:
            return f"veto check {step['option']}: vetoed, failing constraint {step['reason']}"
        return f"veto check {step['option']}: permitted"
    if kind == "compare":
        deltas = ctx.deltas(step["first"], step["second"])
        head = f"compare {step['first']} vs {step['second']}: deltas {_fmt_deltas(deltas)}; "
        if step["region"] is None:
            return head + "no region matched, indifferent"
        return head + f"matched region #{step['region']} [{ctx.regions[step['region']]}] -> {step['result']}"
    if kind == "copeland":
        scores = ", ".join(f"{k}={v:+d}" for k, v in sorted(step["scores"].items()))
        return f"Copeland scores (wins - losses): {scores}"
    if kind == "policy":
        if step["deciding_principle"] is None:
            return f"{step['better']} ties with {step['worse']} on every principle; option id decides"
        return (
            f"{step['better']} ranks above {step['worse']}: deciding principle "
            f"{step['deciding_principle']} (worst severity, count per principle "
            f"{_fmt_key(step['better_key'])} vs {_fmt_key(step['worse_key'])})"
        )
    if kind == "ranking":
        return "policy ranking: " + " > ".join(step["order"])
    if kind == "weighted":
        t = step["terms"]
        return (
            f"weighted score {step['option']}: human {t['human']} + robot {t['robot']} "
            f"+ goal {t['goal']} = {step['score']}"
        )
    if kind == "collateral":
        ids = sorted(step["mission"])
        rows = ", ".join(f"{i}(mission {step['mission'][i]}, collateral {step['collateral'][i]})" for i in ids)
        res = step["result"] if step["result"] is not None else "none meets the threshold"
        return f"collateral selection with tau={step['tau']}: {rows} -> {res}"
    if kind == "all_vetoed":
        return f"all {step['count']} options vetoed"
    if kind == "insufficient":
        return f"candidate {step['candidate']} is insufficiently ethical ({step['predicate']})"
    if kind == "request":
        added = ", ".join(step["added"]) or "nothing new"
        return f"option request round {step['round']}: added {added}"
    if kind == "choice":
        note = " (tie broken by smallest option id)" if step.get("tie_break") else ""
        return f"choice: {step['chosen']}{note}"
    return f"{kind}: {canonical_json(step)}"


def explain(rec: DecisionRecord) -> str:
    lines = [f"decision record {rec.id} (strategy {rec.strategy}, digest {rec.inputs_digest[:16]})"]
    ctx = _Context(rec)
    lines.extend(f"  {i + 1}. {_explain_step(s, ctx)}" for i, s in enumerate(rec.steps))
    d = rec.decision
    if d.verdict.value == "chosen":
        final = f"chosen option {d.chosen}"
    elif d.verdict.value == "allVetoed":
        final = "no option chosen: every option was vetoed"
    else:
        final = f"no option chosen: insufficiently ethical (best candidate {d.candidate})"
    if d.request_issued:
        final += "; additional options were requested"
    lines.append(f"result: {final}")
    return "\n".join(lines)


def summarize(rec: DecisionRecord) -> str:
    """The decision plus a one-line justification drawn from the deciding step."""
    d = rec.decision
    vetoed = f"; {len(d.vetoes)} vetoed" if d.vetoes else ""
    requested = "; extra options requested" if d.request_issued else ""
    if d.verdict.value == "allVetoed":
        return f"no option chosen: all {len(d.vetoes)} options vetoed by the constraints"
    if d.verdict.value != "chosen":
        return (
            f"no option chosen: best candidate {d.candidate} is insufficiently ethical"
            f"{vetoed}{requested}"
        )
    why = ""
    kinds = {s["kind"]: s for s in rec.steps}
    if "copeland" in kinds:
        why = f"highest Copeland score ({kinds['copeland']['scores'][d.chosen]:+d})"
    elif "ranking" in kinds:
        why = "best under the ethical policy"
    elif "collateral" in kinds:
        why = "least collateral among options meeting the mission threshold"
    else:
        scores = [s for s in rec.steps if s["kind"] == "weighted" and s["option"] == d.chosen]
        if scores:
            why = f"highest weighted score ({scores[-1]['score']})"
    option = next((o for o in rec.options if o["id"] == d.chosen), None)
    payload = option and option.get("payload")
    shown = ""
    if payload and payload.get("type") == "action":
        shown = " [" + " ".join(payload["moves"]) + "]"
    return f"chosen: {d.chosen}{shown}: {why}{vetoed}{requested}"


# --------------------------------------------------------------------- replay


def rerun(inputs: Mapping):
    """Run the arbitration described by a record's inputs again."""
    from .arbiter import StrategyConfig, run_arbitration
    from .reasoners import ReasonerSpec
    from .world import load_scenario

    return run_arbitration(
        [deserialize_option(o) for o in inputs["options"]],
        [ReasonerSpec.from_dict(r) for r in inputs["reasoners"]],
        StrategyConfig.from_dict(inputs["strategy"]),
        world=load_scenario(inputs["world"]) if inputs.get("world") is not None else None,
        horizon=inputs["horizon"],
        seed=inputs["seed"],
        budget=inputs["budget"],
        registry=FeatureRegistry.from_dict(inputs["registry"]) if inputs.get("registry") else None,
    )


def replay(rec: DecisionRecord, configs: Mapping | None = None):
    """Re-run the arbitration behind ``rec`` and return the fresh Decision.

    ``configs`` may override or restate any of the recorded inputs; it must
    agree with what was recorded. Raises :class:`ReplayMismatch` if the
    record was altered or the re-run sees different evidence.
    """
    own = compute_digest(rec.inputs, rec.options, rec.evidence)
    if own != rec.inputs_digest:
        raise ReplayMismatch(
            f"record {rec.id}: stored digest {rec.inputs_digest[:16]} does not match content {own[:16]}"
        )
    if configs:
        for key, value in configs.items():
            if canonical_json(value) != canonical_json(rec.inputs.get(key)):
                raise ReplayMismatch(f"record {rec.id}: config '{key}' differs from the recorded input")
    run = rerun(rec.inputs)
    fresh = record(run)
    if fresh.inputs_digest != rec.inputs_digest:
        raise ReplayMismatch(f"record {rec.id}: re-run produced different inputs or evidence")
    return replace(run.decision, record_ref=rec.id)
