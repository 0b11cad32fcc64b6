"""Beam-geometry dependent measurement variance and confidence weights."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class CovarianceModel:
    """Three-bump Gaussian mixture over the beam-separation angle.

    Bumps sit at 0, 180 and 360 degrees; ``width_w1`` is the width of the 0
    degree bump, ``width_w2`` the width of the other two.
    """

    amplitude_a: float = 0.05
    width_w1: float = 30.0
    width_w2: float = 30.0

    def __post_init__(self):
        if not self.amplitude_a > 0:
            raise ValueError("amplitude_a must be > 0")
        if not (self.width_w1 > 0 and self.width_w2 > 0):
            raise ValueError("widths must be > 0")


CovarianceSpec = Union[CovarianceModel, "tuple[CovarianceModel, CovarianceModel]"]


def beam_separation(p_d, p_360) -> float:
    """Counterclockwise angle (deg, [0, 360)) from the downward-beam vector to
    the rotating-beam vector, both taken from the robot-frame origin.

    Accepts ``WallPoint`` objects or plain ``(x, z)`` pairs.
    """
    xd, zd = _xz(p_d)
    xr, zr = _xz(p_360)
    if math.hypot(xd, zd) == 0.0 or math.hypot(xr, zr) == 0.0:
        raise ValueError("beam vectors must be non-zero")
    cross = xd * zr - zd * xr
    dot = xd * xr + zd * zr
    theta = math.degrees(math.atan2(cross, dot)) % 360.0
    # -tiny % 360 rounds to 360.0
    return 0.0 if theta >= 360.0 else theta


def variance_at(model: CovarianceModel, theta_deg):
    """Evaluate the mixture; works on scalars and numpy arrays."""
    t = np.asarray(theta_deg, dtype=float)
    w1 = 2.0 * model.width_w1**2
    w2 = 2.0 * model.width_w2**2
    v = model.amplitude_a * (
        np.exp(-(t**2) / w1) + np.exp(-((t - 180.0) ** 2) / w2) + np.exp(-((t - 360.0) ** 2) / w2)
    )
    return float(v) if v.ndim == 0 else v


def axis_variances(cov: CovarianceSpec, theta_deg: float) -> tuple[float, float]:
    if isinstance(cov, CovarianceModel):
        v = variance_at(cov, theta_deg)
        return (v, v)
    model_x, model_z = cov
    return (variance_at(model_x, theta_deg), variance_at(model_z, theta_deg))


def confidence_weights(var) -> tuple[float, float]:
    vx, vz = var
    if vx < 0 or vz < 0:
        raise ValueError("variances must be >= 0")
    return (1.0 / (1.0 + vx), 1.0 / (1.0 + vz))


def _xz(p) -> tuple[float, float]:
    if hasattr(p, "x_m"):
        return float(p.x_m), float(p.z_m)
    x, z = p
    return float(x), float(z)
