"""User traffic (reading/download alternation) and random-waypoint motion.

The scalar functions (:func:`step_traffic`, :func:`step_user_motion`) define
the behaviour of a single user. :class:`Population` applies the same rules to
every user at once with numpy and is what the simulation loop uses; the two
consume random numbers in the same order so they can be checked against each
other.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from dbsim.errors import ContractViolation
from dbsim.geometry import GroundPoint


class Mode(enum.Enum):
    READING = "reading"
    ACTIVE = "active"


class Event(enum.Enum):
    REQUEST_STARTED = "RequestStarted"
    REQUEST_COMPLETED = "RequestCompleted"


@dataclass(frozen=True)
class TrafficState:
    mode: Mode
    remaining_s: float = 0.0
    remaining_bits: float = 0.0
    elapsed_s: float = 0.0

    @classmethod
    def reading(cls, remaining_s: float) -> "TrafficState":
        return cls(Mode.READING, remaining_s=remaining_s)

    @classmethod
    def active(cls, remaining_bits: float, elapsed_s: float = 0.0) -> "TrafficState":
        return cls(Mode.ACTIVE, remaining_bits=remaining_bits, elapsed_s=elapsed_s)


@dataclass(frozen=True)
class UserState:
    position: GroundPoint
    waypoint: GroundPoint
    move_speed: float
    pause_remaining_s: float
    traffic: TrafficState
    home_cell: int


@dataclass(frozen=True)
class PacketRecord:
    user: int
    start_s: float
    end_s: float
    tau_s: float
    bits: float


def draw_reading_time(rng: np.random.Generator, lambda_s: float) -> float:
    return float(rng.standard_exponential() * lambda_s)


def step_traffic(u: UserState, dt: float, delivered_bits: float, rng: np.random.Generator,
                 packet_bits: float, lambda_s: float) -> tuple[UserState, list[Event]]:
    """Advance one user's traffic state by ``dt``.

    A reading period that expires inside the step turns the user active with
    a full packet; the download itself starts at the next slot. A download
    that finishes emits ``REQUEST_COMPLETED`` and draws a new reading time.
    """
    t = u.traffic
    if t.mode is Mode.READING:
        if delivered_bits > 0:
            raise ContractViolation("bits delivered to a user that is reading")
        left = t.remaining_s - dt
        if left <= 0:
            return replace(u, traffic=TrafficState.active(packet_bits)), [Event.REQUEST_STARTED]
        return replace(u, traffic=TrafficState.reading(left)), []
    bits = t.remaining_bits - delivered_bits
    elapsed = t.elapsed_s + dt
    if bits <= 0:
        fresh = TrafficState.reading(draw_reading_time(rng, lambda_s))
        return replace(u, traffic=fresh), [Event.REQUEST_COMPLETED]
    return replace(u, traffic=TrafficState.active(bits, elapsed)), []


def _draw_leg(rng, bounds, speed_range, pause_range):
    # order of draws: pause, waypoint x, waypoint y, speed
    x0, y0, x1, y1 = bounds
    u = rng.random(4)
    pause = pause_range[0] + (pause_range[1] - pause_range[0]) * u[0]
    wx = x0 + (x1 - x0) * u[1]
    wy = y0 + (y1 - y0) * u[2]
    speed = speed_range[0] + (speed_range[1] - speed_range[0]) * u[3]
    return pause, wx, wy, speed


def step_user_motion(u: UserState, dt: float, bounds, rng: np.random.Generator,
                     speed_range=(1.0, 3.0), pause_range=(0.0, 10.0)) -> UserState:
    """Random-waypoint step confined to the home cell ``bounds``.

    Reaching the waypoint uses only the time needed; the remainder of the
    step already counts toward the pause drawn on arrival. The next waypoint
    and speed are drawn at the same moment and used once the pause ends.
    """
    if u.pause_remaining_s > 0:
        return replace(u, pause_remaining_s=max(u.pause_remaining_s - dt, 0.0))
    px, py = u.position.x, u.position.y
    dx, dy = u.waypoint.x - px, u.waypoint.y - py
    dist = math.hypot(dx, dy)
    step = u.move_speed * dt
    if step < dist:
        f = step / dist
        return replace(u, position=GroundPoint(px + dx * f, py + dy * f))
    leftover = dt - dist / u.move_speed
    pause, wx, wy, speed = _draw_leg(rng, bounds, speed_range, pause_range)
    return replace(
        u,
        position=u.waypoint,
        waypoint=GroundPoint(wx, wy),
        move_speed=speed,
        pause_remaining_s=max(pause - leftover, 0.0),
    )


class Population:
    """Array state of every user in the network.

    Users are stored cell by cell: user ``i`` lives in cell
    ``i // users_per_cell``.
    """

    def __init__(self, cell_bounds: np.ndarray, users_per_cell: int, packet_bits: float,
                 lambda_s: float, speed_range, pause_range,
                 init_rng: np.random.Generator, traffic_rng: np.random.Generator,
                 motion_rng: np.random.Generator):
        self.U = users_per_cell
        self.n_cells = cell_bounds.shape[0]
        self.n = self.n_cells * users_per_cell
        self.cell = np.repeat(np.arange(self.n_cells), users_per_cell)
        self.bounds = cell_bounds[self.cell]
        self.packet_bits = float(packet_bits)
        self.lambda_s = float(lambda_s)
        self.speed_range = tuple(speed_range)
        self.pause_range = tuple(pause_range)
        self.traffic_rng = traffic_rng
        self.motion_rng = motion_rng

        lo, hi = self.bounds[:, :2], self.bounds[:, 2:]
        u = init_rng.random((self.n, 2))
        self.x = lo[:, 0] + (hi[:, 0] - lo[:, 0]) * u[:, 0]
        self.y = lo[:, 1] + (hi[:, 1] - lo[:, 1]) * u[:, 1]
        w = init_rng.random((self.n, 3))
        self.wx = lo[:, 0] + (hi[:, 0] - lo[:, 0]) * w[:, 0]
        self.wy = lo[:, 1] + (hi[:, 1] - lo[:, 1]) * w[:, 1]
        self.speed = self.speed_range[0] + (self.speed_range[1] - self.speed_range[0]) * w[:, 2]
        self.pause = np.zeros(self.n)

        self.active = np.zeros(self.n, dtype=bool)
        self.reading_left = traffic_rng.standard_exponential(self.n) * self.lambda_s
        self.bits_left = np.zeros(self.n)
        self.elapsed = np.zeros(self.n)
        self.start_s = np.zeros(self.n)
        self.delivered_total = np.zeros(self.n)
        self.completed = np.zeros(self.n, dtype=np.int64)

    # -- motion -----------------------------------------------------------
    def step_motion(self, dt: float) -> None:
        pausing = self.pause > 0
        if pausing.any():
            self.pause[pausing] = np.maximum(self.pause[pausing] - dt, 0.0)
        moving = ~pausing
        dx = self.wx - self.x
        dy = self.wy - self.y
        dist = np.hypot(dx, dy)
        step = self.speed * dt
        going = moving & (step < dist)
        f = np.divide(step, dist, out=np.zeros_like(dist), where=going)
        self.x = np.where(going, self.x + dx * f, self.x)
        self.y = np.where(going, self.y + dy * f, self.y)
        arrived = np.flatnonzero(moving & ~going)
        if arrived.size:
            leftover = dt - dist[arrived] / self.speed[arrived]
            u = self.motion_rng.random((arrived.size, 4))
            b = self.bounds[arrived]
            p0, p1 = self.pause_range
            s0, s1 = self.speed_range
            self.x[arrived] = self.wx[arrived]
            self.y[arrived] = self.wy[arrived]
            self.pause[arrived] = np.maximum(p0 + (p1 - p0) * u[:, 0] - leftover, 0.0)
            self.wx[arrived] = b[:, 0] + (b[:, 2] - b[:, 0]) * u[:, 1]
            self.wy[arrived] = b[:, 1] + (b[:, 3] - b[:, 1]) * u[:, 2]
            self.speed[arrived] = s0 + (s1 - s0) * u[:, 3]

    # -- traffic ----------------------------------------------------------
    def step_traffic(self, dt: float, delivered: np.ndarray, now_end: float) -> list[PacketRecord]:
        """Apply one slot of deliveries; ``now_end`` is the time at slot end.

        Returns the packets completed in this slot.
        """
        if np.any(delivered[~self.active] > 0):
            raise ContractViolation("bits delivered to a user that is reading")
        done = []
        act = self.active
        credited = np.minimum(delivered, self.bits_left)
        self.delivered_total += np.where(act, credited, 0.0)
        self.bits_left = np.where(act, self.bits_left - delivered, self.bits_left)
        self.elapsed = np.where(act, self.elapsed + dt, self.elapsed)
        finished = np.flatnonzero(act & (self.bits_left <= 0))

        reading = ~act
        self.reading_left = np.where(reading, self.reading_left - dt, self.reading_left)
        started = np.flatnonzero(reading & (self.reading_left <= 0))

        if finished.size:
            draws = self.traffic_rng.standard_exponential(finished.size) * self.lambda_s
            for i in finished:
                tau = self.elapsed[i]
                done.append(PacketRecord(int(i), float(self.start_s[i]), float(self.start_s[i] + tau),
                                         float(tau), self.packet_bits))
            self.active[finished] = False
            self.reading_left[finished] = draws
            self.bits_left[finished] = 0.0
            self.elapsed[finished] = 0.0
            self.completed[finished] += 1
        if started.size:
            self.active[started] = True
            self.bits_left[started] = self.packet_bits
            self.elapsed[started] = 0.0
            self.start_s[started] = now_end
        return done
