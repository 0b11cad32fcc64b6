"""2D point-robot simulation inside a circular pipe cross-section.

The robot carries a downward sonar and a rotating sonar.  Each tick the
rotating azimuth advances, both rays are cast to the wall, the resulting
points are perturbed and fed through the estimator and controller, and the
robot moves with a first-order kinematic model (velocity = gain * thrust).

Every trial owns its RNG, spawned from ``SeedSequence(seed)`` at position
``trial_index`` so trials never share streams across nearby seeds.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .center_geometry import (
    DOWNWARD_AZIMUTH_DEG,
    CenterEstimate,
    DegeneratePoints,
    Source,
    WallPoint,
    estimate_center,
    held_estimate,
)
from .control import CenteringController, ControlCommand, ControlGains, VehicleState
from .filtering import DEFAULT_CENTER_Q, DEFAULT_RANGE_Q, DEFAULT_RANGE_R, Center2DKalman, ScalarKalman
from .sonar_dsp import DspParams, IntensityProfile, extract_range
from .uncertainty import CovarianceModel, CovarianceSpec

RNG_ALGORITHM = "numpy.random.Generator(PCG64), SeedSequence(seed, spawn_key=(trial,))"
MODES = ("geometric", "profile")


class RobotOutsidePipe(RuntimeError):
    pass


@dataclass(frozen=True)
class SyntheticProfileSpec:
    true_range_m: float = 0.5
    n_bins: int = 1200
    max_range_m: float = 2.0
    echo_width_bins: float = 5.0
    echo_amplitude: float = 1.0
    ringdown_bins: int = 40
    ringdown_amplitude: float = 3.0
    noise_std: float = 0.05
    baseline: float = 0.1
    multipath: tuple = ()

    def __post_init__(self):
        if not 0 < self.true_range_m <= self.max_range_m:
            raise ValueError("true_range_m must lie in (0, max_range_m]")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if not (self.echo_amplitude > 0 and self.ringdown_amplitude > 0):
            raise ValueError("amplitudes must be > 0")
        if not self.echo_width_bins > 0 or self.noise_std < 0 or self.baseline < 0:
            raise ValueError("echo width must be > 0, noise and baseline >= 0")
        mp = tuple((float(r), float(a)) for r, a in self.multipath)
        for r, a in mp:
            if not (r > self.true_range_m and a > 0):
                raise ValueError("multipath echoes must follow the primary and have amplitude > 0")
        object.__setattr__(self, "multipath", mp)

    def range_to_bin(self, range_m: float) -> float:
        return range_m / self.max_range_m * (self.n_bins - 1)


@dataclass(frozen=True)
class SyntheticTruth:
    range_m: float
    bin: float


def synth_profile(
    spec: SyntheticProfileSpec,
    rng: np.random.Generator,
    azimuth_deg: float = 0.0,
    timestamp_s: float = 0.0,
) -> tuple[IntensityProfile, SyntheticTruth]:
    """Ring-down + Gaussian wall echo (+ later multipath echoes) + noise.

    The primary echo is centered on the bin of ``true_range_m``; that bin is
    the ground truth returned alongside the profile.
    """
    i = np.arange(spec.n_bins, dtype=float)
    s = np.full(spec.n_bins, spec.baseline)
    if spec.ringdown_bins > 0:
        decay = np.exp(-i / (spec.ringdown_bins / 4.0))
        s += np.where(i < spec.ringdown_bins, spec.ringdown_amplitude * decay, 0.0)
    center = spec.range_to_bin(spec.true_range_m)
    s += spec.echo_amplitude * np.exp(-0.5 * ((i - center) / spec.echo_width_bins) ** 2)
    for r, a in spec.multipath:
        c = spec.range_to_bin(r)
        s += a * np.exp(-0.5 * ((i - c) / spec.echo_width_bins) ** 2)
    if spec.noise_std > 0:
        s += rng.normal(0.0, spec.noise_std, spec.n_bins)
    np.clip(s, 0.0, None, out=s)
    profile = IntensityProfile(s, azimuth_deg % 360.0, spec.max_range_m, timestamp_s)
    return profile, SyntheticTruth(spec.true_range_m, center)


@dataclass(frozen=True)
class CorpusSpec:
    """Random corpus of independent pings built on a profile template."""

    template: SyntheticProfileSpec = field(default_factory=SyntheticProfileSpec)
    range_min_frac: float = 0.05
    range_max_frac: float = 0.95
    multipath_fraction: float = 0.2
    multipath_factor: tuple = (1.5, 3.0)
    multipath_rel_amplitude: tuple = (0.3, 1.0)
    ping_period_s: float = 1.0 / 15.0
    azimuth_step_deg: float = 9.0

    def __post_init__(self):
        if not 0 < self.range_min_frac <= self.range_max_frac <= 1:
            raise ValueError("need 0 < range_min_frac <= range_max_frac <= 1")
        if not 0 <= self.multipath_fraction <= 1:
            raise ValueError("multipath_fraction must lie in [0, 1]")


def synth_corpus(spec: CorpusSpec, count: int, rng: np.random.Generator):
    """Yield ``count`` (profile, truth) pairs; fully determined by ``rng``."""
    t = spec.template
    for k in range(count):
        r = float(rng.uniform(spec.range_min_frac, spec.range_max_frac) * t.max_range_m)
        mp = ()
        if rng.random() < spec.multipath_fraction:
            r_mp = r * float(rng.uniform(*spec.multipath_factor))
            amp = t.echo_amplitude * float(rng.uniform(*spec.multipath_rel_amplitude))
            if r_mp < t.max_range_m:
                mp = ((r_mp, amp),)
        ping = SyntheticProfileSpec(**{**_fields(t), "true_range_m": r, "multipath": mp})
        yield synth_profile(ping, rng, (k * spec.azimuth_step_deg) % 360.0, k * spec.ping_period_s)


def cast_ray(robot_pos, direction_deg: float, pipe_center, radius_m: float) -> WallPoint:
    """Forward wall intersection of a ray from the robot, in the robot frame."""
    px, pz = robot_pos
    cx, cz = pipe_center
    mx, mz = px - cx, pz - cz
    if math.hypot(mx, mz) >= radius_m:
        raise RobotOutsidePipe(f"robot at {robot_pos} is not inside the pipe")
    a = math.radians(direction_deg)
    dx, dz = math.cos(a), math.sin(a)
    half_b = dx * mx + dz * mz
    c = mx * mx + mz * mz - radius_m * radius_m
    t = -half_b + math.sqrt(half_b * half_b - c)
    source = Source.DOWNWARD if direction_deg == DOWNWARD_AZIMUTH_DEG else Source.ROTATING
    return WallPoint(t * dx, t * dz, source, direction_deg % 360.0)


def add_uniform_noise(point: WallPoint, half_width_m: float, rng: np.random.Generator) -> WallPoint:
    if half_width_m < 0:
        raise ValueError("half_width_m must be >= 0")
    if half_width_m == 0:
        return point
    dx, dz = rng.uniform(-half_width_m, half_width_m, 2)
    return WallPoint(point.x_m + float(dx), point.z_m + float(dz), point.source, point.azimuth_deg)


@dataclass(frozen=True)
class StackConfig:
    """Estimator and controller parameters used by each trial."""

    dsp: DspParams = field(default_factory=DspParams)
    covariance: CovarianceSpec = field(default_factory=CovarianceModel)
    gains: ControlGains = field(default_factory=ControlGains)
    range_process_noise: float = DEFAULT_RANGE_Q
    range_meas_var: float = DEFAULT_RANGE_R
    range_smoothing: bool = True
    center_process_noise: tuple = DEFAULT_CENTER_Q


@dataclass(frozen=True)
class SimConfig:
    pipe_radius_m: float = 0.23
    noise_half_width_m: float = 0.04
    azimuth_step_deg: float = 9.0
    sweeps: int = 3
    trials: int = 100
    seed: int = 0
    dt_s: float = 0.1125
    robot_speed_gain: float = 1.0
    start_radius_fraction: float = 0.8
    convergence_threshold_m: float = 0.05
    mode: str = "geometric"
    profile: SyntheticProfileSpec = field(
        default_factory=lambda: SyntheticProfileSpec(true_range_m=0.23, max_range_m=1.0, n_bins=1200)
    )
    workers: int = 1

    def __post_init__(self):
        if not self.pipe_radius_m > 0:
            raise ValueError("pipe_radius_m must be > 0")
        if self.noise_half_width_m < 0:
            raise ValueError("noise_half_width_m must be >= 0")
        if not 0 < self.azimuth_step_deg <= 360:
            raise ValueError("azimuth_step_deg must lie in (0, 360]")
        if self.sweeps < 1 or self.trials < 1:
            raise ValueError("sweeps and trials must be >= 1")
        if not (self.dt_s > 0 and self.robot_speed_gain >= 0):
            raise ValueError("dt_s must be > 0 and robot_speed_gain >= 0")
        if not 0 <= self.start_radius_fraction < 1:
            raise ValueError("start_radius_fraction must lie in [0, 1)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    @property
    def ticks(self) -> int:
        return int(math.ceil(self.sweeps * 360.0 / self.azimuth_step_deg))


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    position: tuple[float, float]
    estimate: tuple[float, float]
    command: tuple[float, ...]
    distance_m: float
    stale: bool


@dataclass
class TrialResult:
    trial_index: int
    seed: int
    start: tuple[float, float]
    steps_to_converge: Optional[int]
    steady_state_error_m: float
    failed: bool
    trajectory: list[TrajectorySample]

    @property
    def distances(self) -> list[float]:
        return [s.distance_m for s in self.trajectory]

    def summary(self) -> dict:
        return {
            "trial_index": self.trial_index,
            "seed": self.seed,
            "start": list(self.start),
            "steps_to_converge": self.steps_to_converge,
            "steady_state_error_m": None if math.isnan(self.steady_state_error_m) else self.steady_state_error_m,
            "failed": self.failed,
        }


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial_index,)))


def sample_start(rng: np.random.Generator, radius_m: float) -> tuple[float, float]:
    """Uniform point in a disk of the given radius."""
    rho = radius_m * math.sqrt(float(rng.random()))
    phi = 2.0 * math.pi * float(rng.random())
    return (rho * math.cos(phi), rho * math.sin(phi))


def convergence_stats(distances: Sequence[float], threshold_m: float) -> tuple[Optional[int], float]:
    """Steps until the distance first drops below ``threshold_m`` (0 when it
    starts there) and the mean distance from that point on.

    ``distances[0]`` is the starting distance, ``distances[k]`` the distance
    after ``k`` update steps.
    """
    for k, d in enumerate(distances):
        if d < threshold_m:
            tail = distances[k:]
            return k, float(sum(tail) / len(tail))
    return None, math.nan


def run_trial(
    config: SimConfig,
    stack: StackConfig = StackConfig(),
    trial_index: int = 0,
    start: Optional[tuple[float, float]] = None,
) -> TrialResult:
    seed = int(config.seed)
    rng = trial_rng(seed, trial_index)
    r = config.pipe_radius_m
    center = (0.0, 0.0)
    if start is None:
        start = sample_start(rng, config.start_radius_fraction * r)
    pos = np.array(start, dtype=float)

    center_filter = Center2DKalman(stack.center_process_noise)
    range_filter = ScalarKalman(stack.range_process_noise, stack.range_meas_var) if stack.range_smoothing else None
    controller = CenteringController(stack.gains)
    depth_rate = 0.0

    start_dist = math.dist(pos, center)
    dists = [start_dist]
    traj: list[TrajectorySample] = []
    failed = False
    for k in range(config.ticks):
        t = (k + 1) * config.dt_s
        azimuth = (k * config.azimuth_step_deg) % 360.0
        try:
            p_d = add_uniform_noise(cast_ray(pos, DOWNWARD_AZIMUTH_DEG, center, r), config.noise_half_width_m, rng)
            p_r = _rotating_point(config, stack, pos, azimuth, center, rng, range_filter, t)
        except RobotOutsidePipe:
            failed = True
            break
        est = _estimate(p_d, p_r, r, center_filter, stack.covariance, t)

        state = VehicleState(depth_m=float(pos[1]), depth_rate=depth_rate)
        cmd = controller.step(est, state, config.dt_s)
        vel = config.robot_speed_gain * np.array([cmd.u_x, cmd.u_z])
        pos = pos + vel * config.dt_s
        depth_rate = float(vel[1])

        d = math.dist(pos, center)
        traj.append(TrajectorySample(t, (float(pos[0]), float(pos[1])), est.offset, cmd.as_tuple(), d, est.stale))
        dists.append(d)
        if d >= r:
            failed = True
            break

    steps, sse = convergence_stats(dists, config.convergence_threshold_m)
    if failed:
        steps, sse = None, math.nan
    return TrialResult(trial_index, seed, (float(start[0]), float(start[1])), steps, sse, failed, traj)


def _rotating_point(config, stack, pos, azimuth, center, rng, range_filter, t) -> Optional[WallPoint]:
    truth = cast_ray(pos, azimuth, center, config.pipe_radius_m)
    if config.mode == "geometric":
        return add_uniform_noise(truth, config.noise_half_width_m, rng)
    true_range = math.hypot(truth.x_m, truth.z_m)
    spec = SyntheticProfileSpec(**{**_fields(config.profile), "true_range_m": true_range, "multipath": ()})
    profile, _ = synth_profile(spec, rng, azimuth, t)
    det = extract_range(profile, stack.dsp, range_filter)
    if det is None:
        return None
    return WallPoint.from_range(det.range_m, azimuth, Source.ROTATING)


def _estimate(p_d, p_r, radius, filt, cov, t) -> CenterEstimate:
    if p_r is None:
        return held_estimate(filt, t)
    try:
        return estimate_center(p_d, p_r, radius, filt, cov, t)
    except DegeneratePoints:
        return held_estimate(filt, t)


def _fields(obj) -> dict:
    return {name: getattr(obj, name) for name in obj.__dataclass_fields__}


@dataclass(frozen=True)
class BenchmarkStats:
    trials: int
    converged: int
    failures: int
    steps_mean: float
    steps_median: float
    steps_std: float
    sse_mean: float
    sse_median: float
    sse_std: float
    median_distance_curve: tuple

    def as_dict(self) -> dict:
        d = dict(_fields(self))
        d["median_distance_curve"] = list(self.median_distance_curve)
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}


def aggregate(results: Sequence[TrialResult]) -> BenchmarkStats:
    steps = np.array([r.steps_to_converge for r in results if r.steps_to_converge is not None], dtype=float)
    sse = np.array([r.steady_state_error_m for r in results if r.steps_to_converge is not None], dtype=float)

    def stats(a):
        if a.size == 0:
            return math.nan, math.nan, math.nan
        return float(np.mean(a)), float(np.median(a)), float(np.std(a))

    curves = [r.distances for r in results if not r.failed]
    if curves:
        n = min(len(c) for c in curves)
        median_curve = tuple(float(v) for v in np.median(np.array([c[:n] for c in curves]), axis=0))
    else:
        median_curve = ()
    return BenchmarkStats(
        len(results),
        int(steps.size),
        sum(1 for r in results if r.failed),
        *stats(steps),
        *stats(sse),
        median_curve,
    )


def _trial_job(args):
    config, stack, i = args
    return run_trial(config, stack, i)


def run_trials(config: SimConfig, stack: StackConfig = StackConfig()) -> list[TrialResult]:
    jobs = [(config, stack, i) for i in range(config.trials)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_trial_job, jobs))
    return [_trial_job(j) for j in jobs]


def run_benchmark(config: SimConfig, stack: StackConfig = StackConfig()) -> tuple[BenchmarkStats, list[TrialResult]]:
    results = run_trials(config, stack)
    return aggregate(results), results
