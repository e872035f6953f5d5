"""Air-to-ground link model and spectral-efficiency aggregation.

Scalar reference implementations. The simulation loop evaluates the same
quantities in bulk through :mod:`dbsim.kernels`; these functions are the
readable definitions that the bulk kernels are tested against.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from dbsim.config import ScenarioConfig
from dbsim.geometry import DronePose, GroundPoint, elevation_angle_deg, euclidean_distance, ground_distance

THERMAL_NOISE_DBM_HZ = -174.0


class Path(str, enum.Enum):
    LOS = "LoS"
    NLOS = "NLoS"


# Distances below the 1 m reference are clamped; the counter exists so a run
# can report whether the clamp ever fired.
clamp_events = 0


@dataclass(frozen=True)
class LinkBudget:
    p_los: float
    s_los_watt: float
    s_nlos_watt: float
    interference_watt: float
    noise_watt: float

    @property
    def p_nlos(self) -> float:
        return 1.0 - self.p_los


def los_probability(omega_deg: float, alpha: float, beta: float) -> float:
    return 1.0 / (1.0 + alpha * math.exp(-beta * (omega_deg - alpha)))


def path_loss_db(d: float, path: Path, config: ScenarioConfig) -> float:
    global clamp_events
    if d < 1.0:
        clamp_events += 1
        d = 1.0
    if path == Path.LOS:
        return config.a_los_db + 10 * config.gamma_los * math.log10(d)
    return config.a_nlos_db + 10 * config.gamma_nlos * math.log10(d)


def received_power_watt(b_u: float, d: float, path: Path, config: ScenarioConfig) -> float:
    return (b_u / config.bandwidth_hz) * config.tx_power_watt * 10 ** (-path_loss_db(d, path, config) / 10)


def noise_power_watt(b_u: float, delta_ue: float) -> float:
    return 10 ** ((THERMAL_NOISE_DBM_HZ + delta_ue) / 10) * b_u * 1e-3


def expected_received_power(u: GroundPoint, p: DronePose, b_u: float, config: ScenarioConfig) -> float:
    """LoS/NLoS-weighted power a user sees from one drone."""
    r = ground_distance(u, p)
    d = euclidean_distance(r, config.drone_height)
    pl = los_probability(elevation_angle_deg(r, config.drone_height), config.los_alpha, config.los_beta)
    return (pl * received_power_watt(b_u, d, Path.LOS, config)
            + (1 - pl) * received_power_watt(b_u, d, Path.NLOS, config))


def link_budget(
    u: GroundPoint,
    serving: int,
    drones: Sequence[DronePose],
    transmitting: Iterable[int],
    b_u: float,
    config: ScenarioConfig,
) -> LinkBudget:
    """Signal, interference and noise seen by user ``u`` of drone ``serving``.

    Interference sums the expected power of every other transmitting drone
    whose ground projection is within ``interference_range`` of the user.
    """
    sp = drones[serving]
    r = ground_distance(u, sp)
    d = euclidean_distance(r, config.drone_height)
    p_los = los_probability(elevation_angle_deg(r, config.drone_height), config.los_alpha, config.los_beta)
    interference = 0.0
    for i in sorted(set(transmitting)):
        if i == serving:
            continue
        if ground_distance(u, drones[i]) <= config.interference_range:
            interference += expected_received_power(u, drones[i], b_u, config)
    return LinkBudget(
        p_los=p_los,
        s_los_watt=received_power_watt(b_u, d, Path.LOS, config),
        s_nlos_watt=received_power_watt(b_u, d, Path.NLOS, config),
        interference_watt=interference,
        noise_watt=noise_power_watt(b_u, config.ue_noise_figure_db),
    )


def expected_user_se(budget: LinkBudget) -> float:
    """Average spectral efficiency (bps/Hz) over the LoS/NLoS mix."""
    denom = budget.interference_watt + budget.noise_watt
    return (budget.p_los * math.log2(1 + budget.s_los_watt / denom)
            + (1 - budget.p_los) * math.log2(1 + budget.s_nlos_watt / denom))


def cell_se(user_ses: Iterable[float] | Mapping[object, float]) -> float:
    values = list(user_ses.values() if isinstance(user_ses, Mapping) else user_ses)
    if not values:
        raise ValueError("cell SE is undefined without active users")
    return math.fsum(values) / len(values)


def system_se(cell_ses: Iterable[float | None]) -> float | None:
    """Mean over cells that carry a sample; ``None`` if every cell is idle."""
    values = [v for v in cell_ses if v is not None and not math.isnan(v)]
    if not values:
        return None
    return math.fsum(values) / len(values)


@dataclass(frozen=True)
class ChannelParams:
    """Constants the bulk kernels need, pre-converted to linear scale.

    Powers are for a full-band allocation; SINR does not depend on the
    allocated share because signal, interference and noise all scale with it.
    """

    h2: float
    h: float
    alpha: float
    beta: float
    lin_los: float
    half_gamma_los: float
    lin_nlos: float
    half_gamma_nlos: float
    kappa2: float
    noise: float

    @classmethod
    def from_config(cls, c: ScenarioConfig) -> "ChannelParams":
        return cls(
            h2=c.drone_height ** 2,
            h=c.drone_height,
            alpha=c.los_alpha,
            beta=c.los_beta,
            lin_los=c.tx_power_watt * 10 ** (-c.a_los_db / 10),
            half_gamma_los=c.gamma_los / 2,
            lin_nlos=c.tx_power_watt * 10 ** (-c.a_nlos_db / 10),
            half_gamma_nlos=c.gamma_nlos / 2,
            kappa2=c.interference_range ** 2,
            noise=noise_power_watt(c.bandwidth_hz, c.ue_noise_figure_db),
        )

    def as_tuple(self) -> tuple[float, ...]:
        return (self.h2, self.h, self.alpha, self.beta, self.lin_los, self.half_gamma_los,
                self.lin_nlos, self.half_gamma_nlos, self.kappa2, self.noise)
