from __future__ import annotations

import numpy as np
import pytest

from dbsim.config import default_config
from dbsim.dma import SystemSnapshot
from dbsim.geometry import CellGrid


def random_snapshot(seed: int, p_active: float = 0.5, jitter: float = 15.0, **overrides) -> SystemSnapshot:
    """Drones scattered around their centres, users uniform in their cells."""
    c = default_config(**overrides)
    rng = np.random.default_rng(seed)
    grid = CellGrid(c.grid_side, c.cell_edge)
    N, U = grid.n_cells, c.users_per_cell
    lo = np.repeat(grid.all_bounds()[:, :2], U, axis=0)
    ux = lo[:, 0] + c.cell_edge * rng.random(N * U)
    uy = lo[:, 1] + c.cell_edge * rng.random(N * U)
    active = rng.random(N * U) < p_active
    centers = grid.centers()
    dx = centers[:, 0] + rng.uniform(-jitter, jitter, N)
    dy = centers[:, 1] + rng.uniform(-jitter, jitter, N)
    heading = rng.uniform(-np.pi, np.pi, N)
    return SystemSnapshot(0.0, c, dx, dy, heading, ux, uy, np.repeat(np.arange(N), U), active)


@pytest.fixture
def snapshot_factory():
    return random_snapshot


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("C", 1)[1].split(" ", 1)[0])):
            terminalreporter.write_line(line)
