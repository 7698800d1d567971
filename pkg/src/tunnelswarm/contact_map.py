"""Egocentric transient contact map and faulty-robot likelihood.

Each robot keeps a private two-channel histogram of the contacts it has
sensed along the tunnel length: one channel for robot-robot contacts, one
for robot-wall contacts.  Channels receive additive, confidence-weighted
updates on every sensed contact, decay linearly at a fixed interval, and
feed a softmax likelihood that a robot contact at a given position comes
from a stationary (faulty) robot rather than passing traffic or a wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ROBOT = "robot"
WALL = "wall"


@dataclass
class MapParams:
    """Tuning constants for map updates, decay, and the likelihood window.

    omega_r / omega_w are the conditional likelihoods of correctly sensing
    a robot-robot / robot-wall contact (calibration of the contact sensor);
    both must exceed 0.5 or the channels carry no information.
    """

    omega_r: float = 0.9
    omega_w: float = 0.9
    weight: float = 1.0
    beta: float = 0.05
    decay_interval_s: float = 5.0
    window_bins: int = 4

    def validate(self) -> None:
        if not 0.5 < self.omega_r <= 1.0:
            raise ValueError(f"omega_r must be in (0.5, 1], got {self.omega_r}")
        if not 0.5 < self.omega_w <= 1.0:
            raise ValueError(f"omega_w must be in (0.5, 1], got {self.omega_w}")
        if self.weight <= 0:
            raise ValueError(f"weight must be > 0, got {self.weight}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.decay_interval_s <= 0:
            raise ValueError(
                f"decay_interval_s must be > 0, got {self.decay_interval_s}"
            )
        if self.window_bins < 1:
            raise ValueError(f"window_bins must be >= 1, got {self.window_bins}")


@dataclass
class ContactMap:
    """Two-channel binned contact-frequency map over the tunnel length.

    A fresh map is identically zero: the robot starts with no prior about
    where other robots (faulty or not) might be.  Entries never go negative;
    decay clamps at zero.
    """

    n_bins: int
    bin_width_cm: float
    robot_channel: np.ndarray = field(default=None)  # type: ignore[assignment]
    wall_channel: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.n_bins < 1:
            raise ValueError(f"n_bins must be >= 1, got {self.n_bins}")
        if self.bin_width_cm <= 0:
            raise ValueError(f"bin_width_cm must be > 0, got {self.bin_width_cm}")
        if self.robot_channel is None:
            self.robot_channel = np.zeros(self.n_bins)
        if self.wall_channel is None:
            self.wall_channel = np.zeros(self.n_bins)
        if len(self.robot_channel) != self.n_bins or len(self.wall_channel) != self.n_bins:
            raise ValueError("channel length must equal n_bins")

    @property
    def length_cm(self) -> float:
        return self.n_bins * self.bin_width_cm

    def bin_of(self, position_cm: float) -> int:
        if not 0.0 <= position_cm < self.length_cm:
            raise ValueError(
                f"position {position_cm} cm outside tunnel [0, {self.length_cm})"
            )
        return min(int(position_cm / self.bin_width_cm), self.n_bins - 1)

    def record_contact(self, params: MapParams, sensed_type: str, position_cm: float) -> None:
        """Additive conditional update of both channels at the contact bin.

        A sensed robot contact credits the robot channel with omega_r * W and
        the wall channel with the residual (1 - omega_r) * W; a sensed wall
        contact does the mirror image.  The residual encodes how much the
        sensor's imperfect classification leaks into the opposite hypothesis.
        """
        b = self.bin_of(position_cm)
        w = params.weight
        if sensed_type == ROBOT:
            self.robot_channel[b] += params.omega_r * w
            self.wall_channel[b] += (1.0 - params.omega_r) * w
        elif sensed_type == WALL:
            self.wall_channel[b] += params.omega_w * w
            self.robot_channel[b] += (1.0 - params.omega_w) * w
        else:
            raise ValueError(f"unknown contact type {sensed_type!r}")

    def decay(self, beta: float) -> None:
        """Subtract beta from every entry of both channels, clamped at zero.

        Frequencies are semantically non-negative, so the raw linear decay is
        floored rather than allowed to run negative.
        """
        if beta <= 0:
            raise ValueError(f"beta must be > 0, got {beta}")
        np.subtract(self.robot_channel, beta, out=self.robot_channel)
        np.maximum(self.robot_channel, 0.0, out=self.robot_channel)
        np.subtract(self.wall_channel, beta, out=self.wall_channel)
        np.maximum(self.wall_channel, 0.0, out=self.wall_channel)

    def window_slice(self, params: MapParams, position_cm: float) -> slice:
        """Bins spanned by one robot length, centered on the position's bin,
        truncated at the tunnel ends."""
        b = self.bin_of(position_cm)
        lo = max(0, b - params.window_bins // 2)
        hi = min(self.n_bins, lo + params.window_bins)
        return slice(lo, hi)

    def faulty_likelihood(self, params: MapParams, robot_position_cm: float) -> float:
        """Likelihood that a robot contact here originates from a faulty robot.

        Softmax of the summed robot-channel evidence against the summed
        wall-channel evidence over the window spanning the robot's projected
        length.  Evaluated in shifted form so large sums cannot overflow.
        """
        win = self.window_slice(params, robot_position_cm)
        s_r = float(np.sum(self.robot_channel[win]))
        s_w = float(np.sum(self.wall_channel[win]))
        m = max(s_r, s_w)
        er = math.exp(s_r - m)
        ew = math.exp(s_w - m)
        r = er / (er + ew)
        # extreme margins round to 0.0 or 1.0 in float64; keep the result a
        # genuine probability strictly inside (0, 1)
        return min(max(r, math.nextafter(0.0, 1.0)), math.nextafter(1.0, 0.0))

    def copy(self) -> "ContactMap":
        return ContactMap(
            n_bins=self.n_bins,
            bin_width_cm=self.bin_width_cm,
            robot_channel=self.robot_channel.copy(),
            wall_channel=self.wall_channel.copy(),
        )

    def to_lists(self) -> dict:
        """JSON-friendly snapshot of both channels."""
        return {
            "robot": [float(v) for v in self.robot_channel],
            "wall": [float(v) for v in self.wall_channel],
        }
