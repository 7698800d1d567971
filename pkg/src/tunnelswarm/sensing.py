"""Noise models between ground truth and what a robot's controller sees.

Controllers never receive world state directly. Each tick the engine builds
one Observation per robot from that robot's own pose, its dig-zone sensor,
and the contacts its shell felt, passed through the classification and
localization noise models here. Structurally there is no channel through
which one controller can read another robot's pose, state, or map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from tunnelswarm.contact_map import ROBOT, WALL


@dataclass
class SensorParams:
    omega_r: float = 0.9        # P(sense robot | robot contact)
    omega_w: float = 0.9        # P(sense wall | wall contact)
    sigma_loc: float = 5.0      # cm, std of longitudinal contact-position noise
    dig_zone_range: float = 15.0  # cm, trigger distance from the dig-zone boundary

    def validate(self) -> None:
        if not 0.5 < self.omega_r <= 1.0:
            raise ValueError(f"omega_r must be in (0.5, 1], got {self.omega_r}")
        if not 0.5 < self.omega_w <= 1.0:
            raise ValueError(f"omega_w must be in (0.5, 1], got {self.omega_w}")
        if self.sigma_loc < 0:
            raise ValueError(f"sigma_loc must be >= 0, got {self.sigma_loc}")
        if self.dig_zone_range < 0:
            raise ValueError(f"dig_zone_range must be >= 0, got {self.dig_zone_range}")


@dataclass
class SensedContact:
    sensed_type: str        # robot | wall, after classification noise
    position_cm: float      # estimated longitudinal position of the contact
    normal: tuple           # unit vector pointing from the obstacle into self


@dataclass
class Observation:
    """Everything one controller is allowed to see for one tick."""

    clock: float
    x: float
    y: float
    theta: float
    dig_zone: bool
    contacts: list = field(default_factory=list)


def classify_contact(true_type: str, params: SensorParams, rng) -> str:
    """Imperfect robot/wall discrimination of a felt contact."""
    if true_type == ROBOT:
        keep = params.omega_r
        other = WALL
    elif true_type == WALL:
        keep = params.omega_w
        other = ROBOT
    else:
        raise ValueError(f"unknown contact type {true_type!r}")
    return true_type if rng.random() < keep else other


def estimate_position(true_x: float, tunnel_length: float, params: SensorParams, rng) -> float:
    """Noisy longitudinal position estimate, clamped inside the tunnel."""
    x = true_x
    if params.sigma_loc > 0:
        x += rng.normal(0.0, params.sigma_loc)
    hi = tunnel_length - 1e-6
    return min(hi, max(0.0, x))


def detect_dig_zone(x: float, theta: float, tip_offset: float, dig_x: float,
                    params: SensorParams) -> bool:
    """True when the body's front tip is inside the dig zone or within
    sensing range of its boundary (boundary inclusive)."""
    anterior_x = x + tip_offset * math.cos(theta)
    return anterior_x >= dig_x - params.dig_zone_range
