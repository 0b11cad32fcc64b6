"""Pipe-center estimation from two wall points and a known radius."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .filtering import Center2DKalman
from .uncertainty import CovarianceSpec, axis_variances, beam_separation, confidence_weights

EPS_GEOM = 1e-9
DOWNWARD_AZIMUTH_DEG = 270.0


class GeometryError(ValueError):
    pass


class ChordTooLong(GeometryError):
    """The two points are farther apart than the pipe diameter."""


class DegeneratePoints(GeometryError):
    """The two points coincide, so no chord is defined."""


class Source(enum.Enum):
    DOWNWARD = "downward"
    ROTATING = "rotating"


@dataclass(frozen=True)
class WallPoint:
    x_m: float
    z_m: float
    source: Source = Source.ROTATING
    azimuth_deg: float = DOWNWARD_AZIMUTH_DEG

    def __post_init__(self):
        if not (math.isfinite(self.x_m) and math.isfinite(self.z_m)):
            raise ValueError("wall point coordinates must be finite")

    @classmethod
    def from_range(cls, range_m: float, azimuth_deg: float, source: Source = Source.ROTATING) -> "WallPoint":
        a = math.radians(azimuth_deg)
        return cls(range_m * math.cos(a), range_m * math.sin(a), source, azimuth_deg)

    @property
    def xz(self) -> tuple[float, float]:
        return (self.x_m, self.z_m)


@dataclass(frozen=True)
class CandidatePair:
    c1: tuple[float, float]
    c2: tuple[float, float]
    half_chord_a: float
    perp_offset_b: float
    midpoint: tuple[float, float]


@dataclass(frozen=True)
class CenterEstimate:
    """Filtered center displacement in the robot frame.

    ``stale`` marks an estimate that was held because the latest measurement
    pair was rejected.  A stale estimate from a filter that never received a
    measurement carries infinite variance and zero weights.
    """

    offset: tuple[float, float]
    var: tuple[float, float]
    weights: tuple[float, float]
    timestamp_s: float = 0.0
    stale: bool = False
    theta_deg: float = math.nan
    measurement: Optional[tuple[float, float]] = None


def candidate_centers(p_d: WallPoint, p_360: WallPoint, radius_m: float) -> CandidatePair:
    if not radius_m > 0:
        raise ValueError("radius must be > 0")
    xd, zd = p_d.x_m, p_d.z_m
    x_a = 0.5 * (p_360.x_m - xd)
    z_a = 0.5 * (p_360.z_m - zd)
    mid = (xd + x_a, zd + z_a)
    a = math.hypot(x_a, z_a)
    if 2.0 * a <= EPS_GEOM:
        raise DegeneratePoints(f"wall points coincide: {p_d.xz} vs {p_360.xz}")
    if a > radius_m + EPS_GEOM:
        raise ChordTooLong(f"half chord {a:.6g} m exceeds radius {radius_m:.6g} m")
    # a in (r, r + eps] is treated as a diametral chord
    b = math.sqrt(max(radius_m * radius_m - a * a, 0.0))
    ux, uz = z_a / a, -x_a / a
    c1 = (mid[0] + b * ux, mid[1] + b * uz)
    c2 = (mid[0] - b * ux, mid[1] - b * uz)
    return CandidatePair(c1=c1, c2=c2, half_chord_a=a, perp_offset_b=b, midpoint=mid)


def select_center(
    pair: CandidatePair,
    radius_m: float,
    previous: Optional[tuple[float, float]] = None,
) -> tuple[float, float]:
    """Pick the physically consistent candidate.

    The robot sits at the frame origin, so a candidate is admissible when its
    norm is below the radius.  Ties (both or neither admissible) go to the
    candidate nearest ``previous``, or to the smaller-norm one when there is no
    previous estimate; exact ties return ``c1``.
    """
    n1 = math.hypot(*pair.c1)
    n2 = math.hypot(*pair.c2)
    inside1, inside2 = n1 < radius_m, n2 < radius_m
    if inside1 != inside2:
        return pair.c1 if inside1 else pair.c2
    if previous is None:
        return pair.c2 if n2 < n1 else pair.c1
    d1 = math.dist(pair.c1, previous)
    d2 = math.dist(pair.c2, previous)
    return pair.c2 if d2 < d1 else pair.c1


def held_estimate(filt: Center2DKalman, timestamp_s: float = 0.0) -> CenterEstimate:
    if filt.initialized:
        var = filt.variances
        return CenterEstimate(
            offset=filt.previous,
            var=var,
            weights=confidence_weights(var),
            timestamp_s=timestamp_s,
            stale=True,
        )
    return CenterEstimate(
        offset=(0.0, 0.0),
        var=(math.inf, math.inf),
        weights=(0.0, 0.0),
        timestamp_s=timestamp_s,
        stale=True,
    )


def estimate_center(
    p_d: WallPoint,
    p_360: WallPoint,
    radius_m: float,
    filter: Center2DKalman,
    cov_model: CovarianceSpec,
    timestamp_s: float = 0.0,
) -> CenterEstimate:
    """One estimate cycle: candidates, selection, adaptive variance, filter.

    A chord longer than the diameter leaves the filter untouched and returns
    the held prior flagged stale.  ``DegeneratePoints`` propagates.
    """
    try:
        pair = candidate_centers(p_d, p_360, radius_m)
    except ChordTooLong:
        return held_estimate(filter, timestamp_s)
    c_star = select_center(pair, radius_m, filter.previous)
    theta = beam_separation(p_d, p_360)
    meas_var = axis_variances(cov_model, theta)
    mean, cov = filter.update(c_star, meas_var)
    # weights follow the measurement variance that drove this update
    return CenterEstimate(
        offset=(float(mean[0]), float(mean[1])),
        var=meas_var,
        weights=confidence_weights(meas_var),
        timestamp_s=timestamp_s,
        stale=False,
        theta_deg=theta,
        measurement=c_star,
    )

