"""Deterministic grid-world simulator used for consequence prediction.

Coordinates are ``(x, y)`` with ``x`` growing east and ``y`` growing north.
Distances are Chebyshev; movement is 4-connected.
"""

from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .core import ValidationError, check_identifier

Cell = tuple[int, int]


class Move(str, enum.Enum):
    N = "N"
    S = "S"
    E = "E"
    W = "W"
    STAY = "Stay"

    @property
    def offset(self) -> Cell:
        return _OFFSETS[self]


_OFFSETS = {Move.N: (0, 1), Move.S: (0, -1), Move.E: (1, 0), Move.W: (-1, 0), Move.STAY: (0, 0)}
# fixed order so seeded sampling is reproducible across platforms
MOVE_ORDER = (Move.N, Move.S, Move.E, Move.W, Move.STAY)


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


@dataclass(frozen=True)
class Human:
    id: str
    position: Cell
    target: Cell

    def __post_init__(self):
        check_identifier(self.id, "human id")
        object.__setattr__(self, "position", tuple(self.position))
        object.__setattr__(self, "target", tuple(self.target))


@dataclass(frozen=True)
class GridWorld:
    width: int
    height: int
    robot: Cell
    goal: Cell
    humans: tuple[Human, ...] = ()
    danger: frozenset[Cell] = frozenset()
    tick: int = 0
    robot_on_danger_ok: bool = False

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        object.__setattr__(self, "robot", tuple(self.robot))
        object.__setattr__(self, "goal", tuple(self.goal))
        object.__setattr__(self, "humans", tuple(self.humans))
        object.__setattr__(self, "danger", frozenset(tuple(c) for c in self.danger))
        self._check_cell(self.robot, "robot")
        self._check_cell(self.goal, "goal")
        for c in sorted(self.danger):
            self._check_cell(c, "danger cell")
        ids = set()
        for h in self.humans:
            if h.id in ids:
                raise ValidationError(f"duplicate human id: {h.id}")
            ids.add(h.id)
            self._check_cell(h.position, f"human {h.id} position")
            self._check_cell(h.target, f"human {h.id} target")
        if self.tick == 0 and self.robot in self.danger and not self.robot_on_danger_ok:
            raise ValidationError(f"robot starts on danger cell {self.robot}")

    def _check_cell(self, cell: Cell, what: str) -> None:
        if len(cell) != 2 or not self.in_bounds(cell):
            raise ValidationError(
                f"{what} {cell} out of bounds for {self.width}x{self.height} grid"
            )

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def human(self, human_id: str) -> Human:
        for h in self.humans:
            if h.id == human_id:
                return h
        raise ValidationError(f"unknown human id: {human_id}")

    def danger_distance(self, cell: Cell) -> int:
        """Chebyshev distance to the nearest danger cell.

        With no danger cells the distance is ``max(width, height)``, one more
        than any in-grid distance.
        """
        if not self.danger:
            return max(self.width, self.height)
        return min(chebyshev(cell, d) for d in self.danger)

    def to_document(self, horizon: int | None = None) -> dict:
        doc = {
            "grid": {"width": self.width, "height": self.height},
            "robot": list(self.robot),
            "goal": list(self.goal),
            "danger": [list(c) for c in sorted(self.danger)],
            "humans": [
                {"id": h.id, "pos": list(h.position), "target": list(h.target)} for h in self.humans
            ],
        }
        if self.robot_on_danger_ok:
            doc["robot_on_danger_ok"] = True
        if horizon is not None:
            doc["horizon"] = horizon
        return doc


SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["grid", "robot", "goal"],
    "properties": {
        "grid": {
            "type": "object",
            "required": ["width", "height"],
            "properties": {
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "robot": {"$ref": "#/$defs/cell"},
        "goal": {"$ref": "#/$defs/cell"},
        "danger": {"type": "array", "items": {"$ref": "#/$defs/cell"}},
        "humans": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "pos", "target"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "pos": {"$ref": "#/$defs/cell"},
                    "target": {"$ref": "#/$defs/cell"},
                },
                "additionalProperties": False,
            },
        },
        "horizon": {"type": "integer", "minimum": 1},
        "robot_on_danger_ok": {"type": "boolean"},
        "name": {"type": "string"},
    },
    "additionalProperties": False,
    "$defs": {
        "cell": {
            "type": "array",
            "items": {"type": "integer"},
            "minItems": 2,
            "maxItems": 2,
        }
    },
}

DEFAULT_HORIZON = 4


def load_scenario(document: Mapping) -> GridWorld:
    """Validate a scenario document and build the world it describes."""
    from .config import validate_document

    validate_document(document, SCENARIO_SCHEMA, "scenario")
    return GridWorld(
        width=document["grid"]["width"],
        height=document["grid"]["height"],
        robot=tuple(document["robot"]),
        goal=tuple(document["goal"]),
        humans=tuple(
            Human(h["id"], tuple(h["pos"]), tuple(h["target"])) for h in document.get("humans", [])
        ),
        danger=frozenset(tuple(c) for c in document.get("danger", [])),
        robot_on_danger_ok=document.get("robot_on_danger_ok", False),
    )


def scenario_horizon(document: Mapping) -> int:
    return document.get("horizon", DEFAULT_HORIZON)


@dataclass(frozen=True)
class Action:
    moves: tuple[Move, ...]

    def __post_init__(self):
        moves = tuple(Move(m) for m in self.moves)
        if not moves:
            raise ValidationError("an action needs at least one move")
        object.__setattr__(self, "moves", moves)

    @classmethod
    def stay(cls, horizon: int) -> "Action":
        return cls((Move.STAY,) * horizon)

    def padded(self, horizon: int) -> "Action":
        return Action(self.moves + (Move.STAY,) * (horizon - len(self.moves)))

    def __str__(self) -> str:
        return "".join("." if m is Move.STAY else m.value for m in self.moves)

    def to_list(self) -> list[str]:
        return [m.value for m in self.moves]


def _towards(pos: Cell, target: Cell) -> Cell:
    dx, dy = target[0] - pos[0], target[1] - pos[1]
    if dx == 0 and dy == 0:
        return pos
    if abs(dx) >= abs(dy):
        return (pos[0] + (1 if dx > 0 else -1), pos[1])
    return (pos[0], pos[1] + (1 if dy > 0 else -1))


def _apply(world: GridWorld, cell: Cell, move: Move) -> Cell:
    ox, oy = move.offset
    nxt = (cell[0] + ox, cell[1] + oy)
    return nxt if world.in_bounds(nxt) else cell


def step(world: GridWorld, robot_move: Move) -> GridWorld:
    """Advance one tick: the robot moves, then each human walks toward its target.

    A human whose next cell holds the robot stays put. Moves that would leave
    the grid become Stay.
    """
    robot = _apply(world, world.robot, Move(robot_move))
    humans = []
    for h in world.humans:
        nxt = _towards(h.position, h.target)
        if nxt == robot:
            nxt = h.position
        humans.append(replace(h, position=nxt))
    return replace(world, robot=robot, humans=tuple(humans), tick=world.tick + 1)


@dataclass(frozen=True)
class HumanOutcome:
    min_danger_distance: int
    harmed: bool


@dataclass(frozen=True)
class RobotOutcome:
    min_danger_distance: int
    harmed: bool
    collided_with_human: bool


@dataclass(frozen=True)
class Outcome:
    per_human: Mapping[str, HumanOutcome]
    robot: RobotOutcome
    final_goal_distance: int
    horizon_used: int

    @property
    def any_human_harmed(self) -> bool:
        return any(h.harmed for h in self.per_human.values())

    def min_human_danger_distance(self, cap: int) -> int:
        """Smallest human danger distance capped at ``cap``; ``cap`` when there are no humans."""
        return min([cap] + [min(h.min_danger_distance, cap) for h in self.per_human.values()])

    def to_dict(self) -> dict:
        return {
            "per_human": {
                k: {"min_danger_distance": v.min_danger_distance, "harmed": v.harmed}
                for k, v in sorted(self.per_human.items())
            },
            "robot": {
                "min_danger_distance": self.robot.min_danger_distance,
                "harmed": self.robot.harmed,
                "collided_with_human": self.robot.collided_with_human,
            },
            "final_goal_distance": self.final_goal_distance,
            "horizon_used": self.horizon_used,
        }


def trajectory(world: GridWorld, action: Action, horizon: int) -> list[GridWorld]:
    """States at ticks 0..horizon; the robot stays once its moves run out."""
    if horizon <= 0:
        raise ValidationError(f"horizon must be positive, got {horizon}")
    if len(action.moves) > horizon:
        raise ValidationError(f"action of length {len(action.moves)} exceeds horizon {horizon}")
    states = [world]
    for t in range(horizon):
        move = action.moves[t] if t < len(action.moves) else Move.STAY
        states.append(step(states[-1], move))
    return states


def simulate(world: GridWorld, action: Action, horizon: int) -> Outcome:
    """Roll the world forward and summarise danger proximity and harm over the trajectory.

    The initial state counts as part of the trajectory.
    """
    states = trajectory(world, action, horizon)
    per_human = {}
    for i, h in enumerate(world.humans):
        dists = [s.danger_distance(s.humans[i].position) for s in states]
        per_human[h.id] = HumanOutcome(min(dists), min(dists) == 0)
    robot_dists = [s.danger_distance(s.robot) for s in states]
    collided = any(s.robot == hh.position for s in states for hh in s.humans)
    return Outcome(
        per_human=per_human,
        robot=RobotOutcome(min(robot_dists), min(robot_dists) == 0, collided),
        final_goal_distance=chebyshev(states[-1].robot, world.goal),
        horizon_used=horizon,
    )


class Severity(str, enum.Enum):
    NONE = "none"
    LOW_ROBOT = "lowRobot"
    SEVERE_ROBOT = "severeRobot"
    LOW_HUMAN = "lowHuman"
    SEVERE_HUMAN = "severeHuman"

    @property
    def rank(self) -> int:
        return list(Severity).index(self)


class Sufferer(str, enum.Enum):
    NOBODY = "nobody"
    ROBOT = "robot"
    HUMAN = "human"


@dataclass(frozen=True)
class SeverityClass:
    value: Severity
    sufferer: Sufferer

    def __post_init__(self):
        if (self.value is Severity.NONE) != (self.sufferer is Sufferer.NOBODY):
            raise ValidationError("severity none must pair with sufferer nobody")


def classify_severity(outcome: Outcome) -> SeverityClass:
    humans = outcome.per_human.values()
    if any(h.harmed for h in humans):
        return SeverityClass(Severity.SEVERE_HUMAN, Sufferer.HUMAN)
    if any(h.min_danger_distance <= 1 for h in humans):
        return SeverityClass(Severity.LOW_HUMAN, Sufferer.HUMAN)
    if outcome.robot.harmed:
        return SeverityClass(Severity.SEVERE_ROBOT, Sufferer.ROBOT)
    if outcome.robot.min_danger_distance <= 1:
        return SeverityClass(Severity.LOW_ROBOT, Sufferer.ROBOT)
    return SeverityClass(Severity.NONE, Sufferer.NOBODY)


def _valid_moves(world: GridWorld, cell: Cell) -> list[Move]:
    return [m for m in MOVE_ORDER if m is Move.STAY or _apply(world, cell, m) != cell]


def sample_options(
    world: GridWorld, n: int, seed: int, horizon: int = DEFAULT_HORIZON, partial: bool = False
) -> list[Action]:
    """Stay for the whole horizon, then ``n - 1`` distinct seeded random walks.

    Walks only use moves that stay on the grid. When the grid has too few
    distinct walks, ``partial`` returns those found instead of raising.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if horizon < 1:
        raise ValidationError(f"horizon must be positive, got {horizon}")
    rng = random.Random(seed)
    out = [Action.stay(horizon)]
    seen = {out[0].moves}
    attempts = 0
    max_attempts = 200 * n + 1000
    while len(out) < n:
        attempts += 1
        if attempts > max_attempts:
            if partial:
                break
            raise ValidationError(
                f"could not draw {n} distinct walks of length {horizon} on this grid"
            )
        cell = world.robot
        moves = []
        for _ in range(horizon):
            m = rng.choice(_valid_moves(world, cell))
            moves.append(m)
            cell = _apply(world, cell, m)
        key = tuple(moves)
        if key not in seen:
            seen.add(key)
            out.append(Action(key))
    return out


def predict_path(world: GridWorld, human_id: str, horizon: int) -> list[Cell]:
    """Positions of a human after ticks 1..horizon, ignoring the robot."""
    h = world.human(human_id)
    pos, path = h.position, []
    for _ in range(horizon):
        pos = _towards(pos, h.target)
        path.append(pos)
    return path


def _shortest_moves(world: GridWorld, start: Cell, goal: Cell) -> list[Move] | None:
    """BFS over 4-connected cells avoiding danger; moves tried in MOVE_ORDER."""
    if start == goal:
        return []
    prev: dict[Cell, tuple[Cell, Move]] = {start: (start, Move.STAY)}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        for m in MOVE_ORDER[:4]:
            nxt = _apply(world, cell, m)
            if nxt == cell or nxt in prev or nxt in world.danger:
                continue
            prev[nxt] = (cell, m)
            if nxt == goal:
                moves = []
                while nxt != start:
                    nxt, mv = prev[nxt]
                    moves.append(mv)
                return moves[::-1]
            queue.append(nxt)
    return None


def generate_intercepts(world: GridWorld, human_id: str, horizon: int) -> list[Action]:
    """Shortest robot actions that occupy a cell on the human's predicted path in time.

    A cell first entered by the human at tick ``t`` is a candidate when the
    robot can reach it in at most ``t`` moves without crossing danger. Actions
    under which the human would still come to harm are dropped.
    """
    h = world.human(human_id)
    if h.position == h.target:
        return []
    path = predict_path(world, human_id, horizon)
    out: list[Action] = []
    seen: set[tuple[Move, ...]] = set()
    visited = {h.position}
    for t, cell in enumerate(path, start=1):
        if cell in visited or cell in world.danger:
            continue
        visited.add(cell)
        moves = _shortest_moves(world, world.robot, cell)
        if moves is None or len(moves) > t:
            continue
        action = Action(tuple(moves) or (Move.STAY,))
        if action.moves in seen:
            continue
        if simulate(world, action, horizon).per_human[human_id].harmed:
            continue
        seen.add(action.moves)
        out.append(action)
    return out
