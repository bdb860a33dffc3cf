from __future__ import annotations

from pathlib import Path

import pytest

from ethical_arbiter.cli import data_path
from ethical_arbiter.world import GridWorld, Human


@pytest.fixture
def data() -> callable:
    return data_path


def corridor(width: int = 5, height: int = 1, robot=(4, 0), horizon_target=3) -> GridWorld:
    """One person on row ``height // 2`` walking toward a hole at x=``horizon_target``."""
    y = height // 2
    return GridWorld(
        width,
        height,
        robot=robot,
        goal=robot,
        humans=(Human("h1", (0, y), (horizon_target, y)),),
        danger=frozenset({(horizon_target, y)}),
    )


@pytest.fixture
def demo_corridor() -> GridWorld:
    # 5x3: the person walks the middle row toward the hole at (4, 1)
    return GridWorld(
        5, 3, robot=(2, 2), goal=(2, 2),
        humans=(Human("h1", (0, 1), (4, 1)),), danger=frozenset({(4, 1)}),
    )


def write(tmp_path: Path, name: str, text: str) -> str:
    p = tmp_path / name
    p.write_text(text)
    return str(p)
