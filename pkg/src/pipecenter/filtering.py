"""Static-state Kalman filters for temporal smoothing of ranges and centers.

Both filters use an identity transition: the predict step only inflates the
variance by the process noise.  The 2D center filter keeps every covariance
diagonal, so its update is exactly two independent scalar updates (one per
axis); it is written in that reduced form rather than with matrix algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_RANGE_Q = 1e-4
DEFAULT_RANGE_R = 1e-4
DEFAULT_CENTER_Q = (1e-4, 1e-4)


def _kalman_step(mean: float, var: float, q: float, z: float, r: float) -> tuple[float, float]:
    var = var + q
    gain = var / (var + r)
    mean = mean + gain * (z - mean)
    var = var * (1.0 - gain)
    return mean, var


@dataclass
class ScalarKalman:
    """Scalar filter for successive range estimates.

    Attributes
    ----------
    process_noise_q : float
        Variance added per step (m^2).
    default_meas_var_r : float
        Measurement variance used when ``update`` is called without one.
    """

    process_noise_q: float = DEFAULT_RANGE_Q
    default_meas_var_r: float = DEFAULT_RANGE_R
    state_mean: float = 0.0
    state_var: float = 0.0
    initialized: bool = False

    def __post_init__(self):
        if self.process_noise_q < 0:
            raise ValueError("process_noise_q must be >= 0")
        if not self.default_meas_var_r > 0:
            raise ValueError("default_meas_var_r must be > 0")

    def update(self, measurement: float, meas_var: float | None = None) -> float:
        r = self.default_meas_var_r if meas_var is None else float(meas_var)
        if not math.isfinite(measurement):
            raise ValueError(f"non-finite measurement: {measurement!r}")
        if not r > 0:
            raise ValueError("meas_var must be > 0")
        if not self.initialized:
            self.state_mean = float(measurement)
            self.state_var = r
            self.initialized = True
        else:
            self.state_mean, self.state_var = _kalman_step(
                self.state_mean, self.state_var, self.process_noise_q, float(measurement), r
            )
        return self.state_mean

    def reset(self) -> None:
        self.state_mean = 0.0
        self.state_var = 0.0
        self.initialized = False

    def snapshot(self) -> tuple[float, float, bool]:
        return (self.state_mean, self.state_var, self.initialized)


@dataclass
class Center2DKalman:
    """Filter for the pipe-center displacement ``(x, z)`` in the robot frame.

    The measurement covariance is supplied per update (it depends on the beam
    geometry), the process noise is fixed.  ``state_mean`` before an update is
    the previous center estimate used for candidate disambiguation.
    """

    process_noise_q: tuple[float, float] = DEFAULT_CENTER_Q
    state_mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    state_cov: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    initialized: bool = False

    def __post_init__(self):
        q = tuple(float(v) for v in self.process_noise_q)
        if len(q) != 2 or min(q) < 0:
            raise ValueError("process_noise_q must be two non-negative values")
        self.process_noise_q = q
        self.state_mean = np.asarray(self.state_mean, dtype=float).copy()
        self.state_cov = np.asarray(self.state_cov, dtype=float).copy()

    @property
    def previous(self) -> tuple[float, float] | None:
        if not self.initialized:
            return None
        return (float(self.state_mean[0]), float(self.state_mean[1]))

    @property
    def variances(self) -> tuple[float, float]:
        return (float(self.state_cov[0, 0]), float(self.state_cov[1, 1]))

    def update(self, measurement, meas_var) -> tuple[np.ndarray, np.ndarray]:
        """Correct the state with one center measurement.

        Parameters
        ----------
        measurement : (float, float)
            Selected center ``c*`` in meters.
        meas_var : (float, float)
            Per-axis measurement variances ``(sigma_x^2, sigma_z^2)``.

        Returns
        -------
        (mean, cov) after the update (copies).
        """
        z = np.asarray(measurement, dtype=float)
        r = np.asarray(meas_var, dtype=float)
        if z.shape != (2,) or r.shape != (2,):
            raise ValueError("measurement and meas_var must both have two entries")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(r))):
            raise ValueError("non-finite center measurement or variance")
        if np.any(r <= 0):
            raise ValueError("meas_var entries must be > 0")

        if not self.initialized:
            self.state_mean = z.copy()
            self.state_cov = np.diag(r)
            self.initialized = True
        else:
            mean = np.empty(2)
            var = np.empty(2)
            for axis in range(2):
                mean[axis], var[axis] = _kalman_step(
                    float(self.state_mean[axis]),
                    float(self.state_cov[axis, axis]),
                    self.process_noise_q[axis],
                    float(z[axis]),
                    float(r[axis]),
                )
            self.state_mean = mean
            self.state_cov = np.diag(var)
        return self.state_mean.copy(), self.state_cov.copy()

    def reset(self) -> None:
        self.state_mean = np.zeros(2)
        self.state_cov = np.zeros((2, 2))
        self.initialized = False


def scalar_update(filt: ScalarKalman, measurement: float, meas_var: float) -> float:
    return filt.update(measurement, meas_var)


def center_update(filt: Center2DKalman, measurement, meas_var):
    return filt.update(measurement, meas_var)
