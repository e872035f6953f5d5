"""Cell grid layout and turning-arc kinematics of the drones.

A drone flies at constant speed and commits, once per direction-update
interval ``t_m``, to a total turn ``theta``. Over the interval it follows a
circular arc of radius ``v * t_m / |theta|`` (a straight segment for
``theta == 0``), which implies the centripetal acceleration
``v * |theta| / t_m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dbsim.errors import ConfigError, DomainError


@dataclass(frozen=True)
class GroundPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"non-finite ground point ({self.x}, {self.y})")


@dataclass(frozen=True)
class DronePose:
    position: GroundPoint
    heading: float
    speed: float
    height: float


@dataclass(frozen=True)
class CandidatePath:
    theta: float
    samples: tuple[tuple[float, GroundPoint], ...]
    end_pose: DronePose


@dataclass(frozen=True)
class CellGrid:
    """Square ``side x side`` grid of square cells, row-major indexing.

    Cell ``(row, col)`` spans ``[origin.x + col*edge, origin.x + (col+1)*edge)``
    horizontally and likewise vertically for rows.
    """

    side: int
    edge: float
    origin: GroundPoint = GroundPoint(0.0, 0.0)

    @property
    def n_cells(self) -> int:
        return self.side * self.side

    @property
    def center_index(self) -> int:
        return (self.side * self.side - 1) // 2

    def index(self, row: int, col: int) -> int:
        if not (0 <= row < self.side and 0 <= col < self.side):
            raise IndexError(f"cell ({row}, {col}) outside {self.side}x{self.side} grid")
        return row * self.side + col

    def row_col(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.n_cells:
            raise IndexError(f"cell {index} outside grid of {self.n_cells}")
        return divmod(index, self.side)

    def bounds(self, index: int) -> tuple[float, float, float, float]:
        """``(xmin, ymin, xmax, ymax)`` of a cell."""
        row, col = self.row_col(index)
        x0 = self.origin.x + col * self.edge
        y0 = self.origin.y + row * self.edge
        return x0, y0, x0 + self.edge, y0 + self.edge

    def center(self, index: int) -> GroundPoint:
        x0, y0, x1, y1 = self.bounds(index)
        return GroundPoint((x0 + x1) / 2, (y0 + y1) / 2)

    def centers(self) -> np.ndarray:
        idx = np.arange(self.n_cells)
        rows, cols = np.divmod(idx, self.side)
        return np.column_stack([
            self.origin.x + (cols + 0.5) * self.edge,
            self.origin.y + (rows + 0.5) * self.edge,
        ])

    def all_bounds(self) -> np.ndarray:
        """Array of shape ``(n_cells, 4)`` with ``xmin, ymin, xmax, ymax``."""
        c = self.centers()
        half = self.edge / 2
        return np.column_stack([c[:, 0] - half, c[:, 1] - half, c[:, 0] + half, c[:, 1] + half])


def ground_distance(u: GroundPoint, p: DronePose | GroundPoint) -> float:
    q = p.position if isinstance(p, DronePose) else p
    return math.hypot(u.x - q.x, u.y - q.y)


def euclidean_distance(r: float, h: float) -> float:
    return math.sqrt(r * r + h * h)


def elevation_angle_deg(r: float, h: float) -> float:
    if r == 0:
        return 90.0
    return math.degrees(math.atan(h / r))


def max_turn_angle(v: float, a_max: float, t_m: float, cap: float = math.pi) -> float:
    """Largest turn achievable in one interval without exceeding ``a_max``."""
    return min(a_max * t_m / v, cap)


def candidate_angles(theta_max: float, G: int) -> list[float]:
    """``G`` evenly spaced turns from ``-theta_max`` to ``theta_max``.

    The middle entry is exactly zero and the set is exactly symmetric.
    """
    if G < 3 or G % 2 != 1:
        raise ConfigError([("n_candidates", "n_candidates must be odd and >= 3")])
    half = (G - 1) // 2
    step = 2 * theta_max / (G - 1)
    pos = [step * j for j in range(1, half)] + [theta_max]
    return [-a for a in reversed(pos)] + [0.0] + pos


def preference_order(G: int) -> list[int]:
    """Candidate indices ordered by smallest ``|theta|``, negative first.

    Used to break ties between equally good candidates.
    """
    mid = (G - 1) // 2
    order = [mid]
    for j in range(1, mid + 1):
        order += [mid - j, mid + j]
    return order


def wrap_angle(a: float) -> float:
    """Map an angle into ``(-pi, pi]``."""
    w = math.remainder(a, 2 * math.pi)
    if w == -math.pi:
        w = math.pi
    return w


def arc_advance(p: DronePose, theta: float, dt: float, t_m: float) -> DronePose:
    """Pose after flying ``dt`` seconds along the arc committed to ``theta``."""
    if not 0 <= dt <= t_m:
        raise DomainError(f"dt={dt} outside [0, {t_m}]")
    v = p.speed
    x, y, hd = p.position.x, p.position.y, p.heading
    s = v * dt
    if theta == 0:
        return DronePose(GroundPoint(x + s * math.cos(hd), y + s * math.sin(hd)), hd, v, p.height)
    # displacement in the heading frame, written so tiny turns do not cancel
    a = theta * dt / t_m
    if a == 0:
        fwd, lat = s, 0.0
    else:
        fwd = s * math.sin(a) / a
        lat = s * 2.0 * math.sin(a / 2) ** 2 / a
    ch, sh = math.cos(hd), math.sin(hd)
    return DronePose(GroundPoint(x + fwd * ch - lat * sh, y + fwd * sh + lat * ch),
                     wrap_angle(hd + a), v, p.height)


def build_candidate_path(p: DronePose, theta: float, t_m: float, K: int) -> CandidatePath:
    samples = []
    for j in range(1, K + 1):
        dt = t_m if j == K else j * t_m / K
        samples.append((dt, arc_advance(p, theta, dt, t_m).position))
    return CandidatePath(theta, tuple(samples), arc_advance(p, theta, t_m, t_m))


def arc_positions(x, y, heading, speed, thetas, offsets, t_m):
    """Vectorised :func:`arc_advance` positions.

    ``x``, ``y``, ``heading`` have shape ``(N,)``; ``thetas`` ``(N, C)`` or
    ``(C,)``; ``offsets`` ``(K,)``. Returns ``(px, py, new_heading)`` each of
    shape ``(N, C, K)``. Straight candidates use the exact line formula.
    """
    x = np.asarray(x, dtype=float)[:, None, None]
    y = np.asarray(y, dtype=float)[:, None, None]
    hd = np.asarray(heading, dtype=float)[:, None, None]
    v = np.asarray(speed, dtype=float)
    v = v[:, None, None] if v.ndim else v
    th = np.asarray(thetas, dtype=float)
    th = np.broadcast_to(th, (x.shape[0], th.shape[-1]))[:, :, None]
    dt = np.asarray(offsets, dtype=float)[None, None, :]
    s = v * dt
    a = th * dt / t_m
    safe = np.where(a == 0, 1.0, a)
    fwd = np.where(a == 0, s, s * np.sin(a) / safe)
    lat = np.where(a == 0, 0.0, s * 2.0 * np.sin(a / 2) ** 2 / safe)
    ch, sh = np.cos(hd), np.sin(hd)
    px = x + fwd * ch - lat * sh
    py = y + fwd * sh + lat * ch
    new_hd = np.remainder(hd + a + np.pi, 2 * np.pi) - np.pi
    new_hd = np.where(new_hd == -np.pi, np.pi, new_hd)
    return px, py, np.broadcast_to(new_hd, px.shape)


def outside_cell(px, py, bounds) -> np.ndarray:
    """True where a point lies outside its closed cell rectangle."""
    return (px < bounds[:, 0]) | (py < bounds[:, 1]) | (px > bounds[:, 2]) | (py > bounds[:, 3])
