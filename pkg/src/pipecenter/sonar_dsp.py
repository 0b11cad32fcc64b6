"""Wall-range extraction from single-beam sonar intensity profiles.

Pipeline per ping: near-field truncation, Gaussian denoising, edge
enhancement with a linear +1..-1 taper, first-peak detection and bin-to-range
conversion, optionally followed by scalar Kalman smoothing across pings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .filtering import ScalarKalman

# Taper weights run +1 -> -1 along the kernel index; with true convolution the
# +1 end multiplies the latest sample of each window, so rising edges respond
# positively.
EDGE_KERNEL_ORIENTATION = "rising_positive"

DEFAULT_NEAR_FIELD_FRACTION = 0.10
DEFAULT_THRESHOLD_SCALE = 8.0
MIN_PEAK_THRESHOLD = 1e-9


class ProfileError(ValueError):
    """Raised for profiles or parameters that cannot be processed."""


@dataclass(frozen=True)
class IntensityProfile:
    samples: np.ndarray
    azimuth_deg: float
    max_range_m: float
    timestamp_s: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise ProfileError("profile needs at least 2 samples")
        if not np.all(np.isfinite(samples)) or np.any(samples < 0):
            raise ProfileError("samples must be finite and non-negative")
        if not self.max_range_m > 0:
            raise ProfileError("max_range_m must be > 0")
        if not 0.0 <= self.azimuth_deg < 360.0:
            raise ProfileError(f"azimuth_deg out of [0, 360): {self.azimuth_deg}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "azimuth_deg", float(self.azimuth_deg))
        object.__setattr__(self, "max_range_m", float(self.max_range_m))
        object.__setattr__(self, "timestamp_s", float(self.timestamp_s))

    @property
    def n_bins(self) -> int:
        return int(self.samples.size)


@dataclass(frozen=True)
class DspParams:
    """Range-extraction parameters.

    ``near_field_bins=None`` discards the first 10% of each profile and
    ``peak_threshold=None`` selects an adaptive threshold of
    ``threshold_scale`` times the median magnitude of the negative part of the
    enhanced signal.
    """

    near_field_bins: Optional[int] = None
    gauss_sigma_bins: float = 2.0
    edge_kernel_len: int = 11
    peak_threshold: Optional[float] = None
    threshold_scale: float = DEFAULT_THRESHOLD_SCALE

    def __post_init__(self):
        if self.near_field_bins is not None and self.near_field_bins < 0:
            raise ProfileError("near_field_bins must be >= 0")
        if not self.gauss_sigma_bins > 0:
            raise ProfileError("gauss_sigma_bins must be > 0")
        if self.edge_kernel_len < 3 or self.edge_kernel_len % 2 == 0:
            raise ProfileError("edge_kernel_len must be odd and >= 3")
        if self.peak_threshold is not None and not self.peak_threshold > 0:
            raise ProfileError("peak_threshold must be > 0")
        if not self.threshold_scale > 0:
            raise ProfileError("threshold_scale must be > 0")

    def resolve_near_field(self, n_bins: int) -> int:
        if self.near_field_bins is None:
            return int(round(DEFAULT_NEAR_FIELD_FRACTION * n_bins))
        return int(self.near_field_bins)


@dataclass(frozen=True)
class RangeDetection:
    range_m: float
    peak_index: int
    source_bin: int
    azimuth_deg: float
    raw_range_m: float = math.nan
    timestamp_s: float = 0.0


def suppress_near_field(profile: IntensityProfile, params: DspParams) -> np.ndarray:
    n0 = params.resolve_near_field(profile.n_bins)
    if n0 >= profile.n_bins:
        raise ProfileError(f"near_field_bins={n0} leaves nothing of a {profile.n_bins}-bin profile")
    return np.array(profile.samples[n0:], dtype=float)


def gaussian_kernel(sigma_bins: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma_bins))
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma_bins) ** 2)
    return k / k.sum()


def gaussian_smooth(signal: Sequence[float], sigma_bins: float) -> np.ndarray:
    """Same-length Gaussian smoothing with edge-value padding."""
    sig = np.asarray(signal, dtype=float)
    if sig.size == 0:
        raise ProfileError("cannot smooth an empty signal")
    if not sigma_bins > 0:
        raise ProfileError("sigma_bins must be > 0")
    if sig.size == 1:
        return sig.copy()
    kernel = gaussian_kernel(sigma_bins)
    radius = kernel.size // 2
    padded = np.pad(sig, radius, mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def edge_kernel(kernel_len: int) -> np.ndarray:
    j = np.arange(kernel_len, dtype=float)
    return 1.0 - 2.0 * j / (kernel_len - 1)


def edge_enhance(signal: Sequence[float], kernel_len: int) -> np.ndarray:
    """Valid-mode convolution with the +1..-1 taper.

    Output index ``k`` covers input samples ``k .. k + L - 1``; its length is
    ``len(signal) - L + 1``.
    """
    sig = np.asarray(signal, dtype=float)
    if kernel_len < 3 or kernel_len % 2 == 0:
        raise ProfileError("kernel_len must be odd and >= 3")
    if kernel_len > sig.size:
        raise ProfileError(f"kernel_len={kernel_len} exceeds signal length {sig.size}")
    return np.convolve(sig, edge_kernel(kernel_len), mode="valid")


def local_maxima(signal: Sequence[float]) -> np.ndarray:
    """Indices of interior local maxima; a plateau reports its first index."""
    d = np.asarray(signal, dtype=float)
    if d.size < 3:
        return np.empty(0, dtype=int)
    nz = np.flatnonzero(np.diff(d))
    if nz.size < 2:
        return np.empty(0, dtype=int)
    s = np.sign(np.diff(d)[nz])
    rise_then_fall = (s[:-1] > 0) & (s[1:] < 0)
    return nz[:-1][rise_then_fall] + 1


def adaptive_threshold(enhanced: Sequence[float], scale: float = DEFAULT_THRESHOLD_SCALE) -> float:
    d = np.asarray(enhanced, dtype=float)
    neg = -d[d < 0]
    if neg.size == 0:
        return MIN_PEAK_THRESHOLD
    return max(scale * float(np.median(neg)), MIN_PEAK_THRESHOLD)


def detect_first_peak(enhanced: Sequence[float], threshold: float) -> Optional[int]:
    """Smallest local-maximum index whose value exceeds ``threshold``, else None."""
    d = np.asarray(enhanced, dtype=float)
    if d.size == 0:
        raise ProfileError("empty enhanced signal")
    peaks = local_maxima(d)
    above = peaks[d[peaks] > threshold]
    if above.size == 0:
        return None
    return int(above[0])


def bin_to_range(b_star: int, n_bins: int, max_range_m: float) -> float:
    if n_bins < 2:
        raise ProfileError("n_bins must be >= 2")
    if not 0 <= b_star <= n_bins - 1:
        raise ProfileError(f"bin {b_star} outside [0, {n_bins - 1}]")
    return b_star / (n_bins - 1) * max_range_m


def enhanced_signal(profile: IntensityProfile, params: DspParams) -> np.ndarray:
    truncated = suppress_near_field(profile, params)
    smoothed = gaussian_smooth(truncated, params.gauss_sigma_bins)
    return edge_enhance(smoothed, params.edge_kernel_len)


def extract_range(
    profile: IntensityProfile,
    params: DspParams,
    filter: Optional[ScalarKalman] = None,
) -> Optional[RangeDetection]:
    """Run the full pipeline on one ping.

    Returns None when no peak clears the threshold; the filter is then left
    untouched.  With a filter, ``range_m`` holds the smoothed value and
    ``raw_range_m`` the single-ping estimate.
    """
    enhanced = enhanced_signal(profile, params)
    if params.peak_threshold is None:
        threshold = adaptive_threshold(enhanced, params.threshold_scale)
    else:
        threshold = params.peak_threshold
    k_star = detect_first_peak(enhanced, threshold)
    if k_star is None:
        return None
    n0 = params.resolve_near_field(profile.n_bins)
    b_star = n0 + k_star + (params.edge_kernel_len - 1)
    raw = bin_to_range(b_star, profile.n_bins, profile.max_range_m)
    smoothed = filter.update(raw) if filter is not None else raw
    return RangeDetection(
        range_m=smoothed,
        peak_index=k_star,
        source_bin=b_star,
        azimuth_deg=profile.azimuth_deg,
        raw_range_m=raw,
        timestamp_s=profile.timestamp_s,
    )
