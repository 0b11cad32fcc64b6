"""Confidence-weighted PD control for in-pipe centering.

Translational axes act on the filtered center displacement; attitude axes
level the vehicle and hold the heading from an integrated gyro rate.  Every
output is clamped to the normalized actuator envelope [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .center_geometry import CenterEstimate

MIN_RATE_DT_S = 1e-3


def clamp(u: float, lo: float = -1.0, hi: float = 1.0) -> float:
    return min(hi, max(lo, u))


@dataclass(frozen=True)
class ControlGains:
    kp_x: float = 1.2
    kd_x: float = 0.6
    kp_z: float = 1.2
    kd_z: float = 0.6
    kp_roll: float = 2.0
    kd_roll: float = 0.4
    kp_pitch: float = 2.0
    kd_pitch: float = 0.4
    kp_yaw: float = 1.5
    kd_yaw: float = 0.3
    u_forward: float = 0.3
    epsilon_m: float = 0.05
    h_trg_m: float = 0.0
    confidence_gate: float = 0.5

    def __post_init__(self):
        for name in ("kp_x", "kd_x", "kp_z", "kd_z", "kp_roll", "kd_roll",
                     "kp_pitch", "kd_pitch", "kp_yaw", "kd_yaw"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.epsilon_m > 0:
            raise ValueError("epsilon_m must be > 0")
        if not 0.0 < self.confidence_gate < 1.0:
            raise ValueError("confidence_gate must lie in (0, 1)")


@dataclass
class VehicleState:
    """Proprioceptive state.

    ``depth_m`` is the vertical coordinate along the robot's Z axis (positive
    up), i.e. the pressure reading expressed in the same sense as the center
    offset.
    """

    depth_m: float = 0.0
    depth_rate: float = 0.0
    roll_rad: float = 0.0
    pitch_rad: float = 0.0
    roll_rate: float = 0.0
    pitch_rate: float = 0.0
    yaw_rate_gyro: float = 0.0
    yaw_est_rad: float = 0.0
    yaw_ref_rad: float = 0.0


@dataclass(frozen=True)
class ControlCommand:
    u_x: float = 0.0
    u_y: float = 0.0
    u_z: float = 0.0
    u_roll: float = 0.0
    u_pitch: float = 0.0
    u_yaw: float = 0.0
    stale: bool = False

    def as_tuple(self) -> tuple[float, ...]:
        return (self.u_x, self.u_y, self.u_z, self.u_roll, self.u_pitch, self.u_yaw)


def lateral_command(e_x: float, e_x_rate: float, w_x: float, gains: ControlGains) -> float:
    return clamp((gains.kp_x * e_x + gains.kd_x * e_x_rate) * w_x)


def depth_command(
    state: VehicleState,
    e_z: float,
    w_z: float,
    gains: ControlGains,
    setpoint: Optional[float] = None,
) -> tuple[float, float]:
    """Gated depth setpoint update followed by PD on depth.

    The setpoint rate is taken as zero: the setpoint only jumps at sonar
    updates and is constant in between.
    """
    h_star = state.depth_m if setpoint is None else setpoint
    if w_z > gains.confidence_gate:
        h_star = state.depth_m + e_z
    u_z = gains.kp_z * (h_star - state.depth_m) + gains.kd_z * (0.0 - state.depth_rate)
    return clamp(u_z), h_star


def forward_command(center: CenterEstimate, gains: ControlGains) -> float:
    if center.stale:
        return 0.0
    ex, ez = center.offset
    if math.hypot(ex, ez - gains.h_trg_m) < gains.epsilon_m:
        return clamp(gains.u_forward)
    return 0.0


def attitude_commands(state: VehicleState, gains: ControlGains) -> tuple[float, float]:
    u_roll = -gains.kp_roll * state.roll_rad - gains.kd_roll * state.roll_rate
    u_pitch = -gains.kp_pitch * state.pitch_rad - gains.kd_pitch * state.pitch_rate
    return clamp(u_roll), clamp(u_pitch)


def yaw_command(state: VehicleState, dt_s: float, gains: ControlGains) -> tuple[float, float]:
    """Euler-integrate the gyro heading, then PD toward the reference heading."""
    if not dt_s > 0:
        raise ValueError("dt_s must be > 0")
    yaw_est = state.yaw_est_rad + state.yaw_rate_gyro * dt_s
    u = gains.kp_yaw * (state.yaw_ref_rad - yaw_est) - gains.kd_yaw * state.yaw_rate_gyro
    return clamp(u), yaw_est


@dataclass
class CenteringController:
    """Stateful six-axis controller.

    Holds the depth setpoint, the integrated heading and the last fresh center
    estimate (for the lateral error rate).  Call ``reset`` when the vehicle is
    repositioned.
    """

    gains: ControlGains = field(default_factory=ControlGains)
    depth_setpoint: Optional[float] = None
    yaw_est: Optional[float] = None
    _prev_ex: Optional[float] = None
    _prev_t: Optional[float] = None

    def reset(self) -> None:
        self.depth_setpoint = None
        self.yaw_est = None
        self._prev_ex = None
        self._prev_t = None

    def lateral_rate(self, center: CenterEstimate) -> float:
        ex = center.offset[0]
        if self._prev_ex is None:
            rate = 0.0
        else:
            dt = max(center.timestamp_s - self._prev_t, MIN_RATE_DT_S)
            rate = (ex - self._prev_ex) / dt
        self._prev_ex, self._prev_t = ex, center.timestamp_s
        return rate

    def step(self, center: CenterEstimate, state: VehicleState, dt_s: float) -> ControlCommand:
        g = self.gains
        if self.yaw_est is None:
            self.yaw_est = state.yaw_ref_rad
        heading = VehicleState(**{**vars(state), "yaw_est_rad": self.yaw_est})
        u_yaw, self.yaw_est = yaw_command(heading, dt_s, g)
        u_roll, u_pitch = attitude_commands(state, g)

        if center.stale:
            if self.depth_setpoint is None:
                self.depth_setpoint = state.depth_m
            return ControlCommand(0.0, 0.0, 0.0, u_roll, u_pitch, u_yaw, stale=True)

        w_x, w_z = center.weights
        rate = self.lateral_rate(center)
        u_x = lateral_command(center.offset[0], rate, w_x, g)
        u_z, self.depth_setpoint = depth_command(state, center.offset[1], w_z, g, self.depth_setpoint)
        u_y = forward_command(center, g)
        return ControlCommand(u_x, u_y, u_z, u_roll, u_pitch, u_yaw, stale=False)
