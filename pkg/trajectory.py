"""Synthetic salient-feature trajectories (circle, figure-eight, wire polyline, replay)."""
import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

import config
from geometry import GeometryError, angle_between, unit_vector
from placement import FeatureState

logger = logging.getLogger(__name__)

CURVES = ('static', 'circle', 'figure_eight', 'polyline', 'replay')
NORMAL_MODES = ('frenet', 'lateral', 'fixed')
SPEED_PROFILES = ('constant', 'smooth_start')
TRAVERSALS = ('once', 'back_and_forth')
REPLAY_COLUMNS = ('t', 'px', 'py', 'pz', 'nx', 'ny', 'nz')

# Curvature below this counts as a straight section (no Frenet normal).
MIN_CURVATURE = 1e-6


class TrajectoryError(ValueError):
    """Raised for invalid trajectory specifications."""


@dataclass(frozen=True)
class TrajectorySample:
    time: float
    feature: FeatureState


@dataclass(frozen=True, eq=False)
class TrajectorySpec:
    curve: str = 'static'
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 0.05
    waypoints: tuple = ()
    corner_radius: float = 0.01
    traversal: str = 'once'
    speed: float = None
    period: float = None
    speed_profile: str = 'constant'
    ramp_time: float = 1.0
    duration: float = 10.0
    dt: float = field(default_factory=config.get_tick_period)
    normal_mode: str = 'fixed'
    normal_axis: tuple = (-1.0, 0.0, 0.0)
    tremor_amplitude: float = 0.0
    tremor_frequencies: tuple = (0.4, 1.1, 2.3)
    replay_path: str = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.curve not in CURVES:
            raise TrajectoryError(f"unknown curve '{self.curve}', expected one of {CURVES}")
        if self.normal_mode not in NORMAL_MODES:
            raise TrajectoryError(f"unknown normal_mode '{self.normal_mode}'")
        if self.speed_profile not in SPEED_PROFILES:
            raise TrajectoryError(f"unknown speed_profile '{self.speed_profile}'")
        if self.traversal not in TRAVERSALS:
            raise TrajectoryError(f"unknown traversal '{self.traversal}'")
        if not self.duration > 0:
            raise TrajectoryError("duration must be positive")
        if not self.dt > 0:
            raise TrajectoryError("dt must be positive")
        if self.curve in ('circle', 'figure_eight') and not self.radius > 0:
            raise TrajectoryError("radius must be positive")
        if self.speed is not None and self.speed < 0:
            raise TrajectoryError("speed must be non-negative")
        if self.period is not None and not self.period > 0:
            raise TrajectoryError("period must be positive")
        if self.speed_profile == 'smooth_start' and not self.ramp_time > 0:
            raise TrajectoryError("ramp_time must be positive")
        if self.tremor_amplitude < 0:
            raise TrajectoryError("tremor_amplitude must be non-negative")
        if self.curve == 'polyline':
            if len(self.waypoints) < 2:
                raise TrajectoryError("polyline needs at least two waypoints")
            if self.corner_radius < 0:
                raise TrajectoryError("corner_radius must be non-negative")
        if self.curve == 'replay' and not self.replay_path:
            raise TrajectoryError("replay curve needs replay_path")
        for name in ('center', 'normal_axis'):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, 'waypoints', tuple(tuple(float(v) for v in w) for w in self.waypoints))
        object.__setattr__(self, 'tremor_frequencies', tuple(float(f) for f in self.tremor_frequencies))

    @classmethod
    def from_dict(cls, data, base_dir=None):
        """Build a spec from scenario JSON; relative replay paths resolve against base_dir."""
        data = dict(data or {})
        config.check_keys('trajectory', data, cls.__dataclass_fields__.keys())
        path = data.get('replay_path')
        if path and base_dir is not None and not os.path.isabs(path):
            data['replay_path'] = os.path.join(base_dir, path)
        return config.build_section(cls, 'trajectory', data)


def _progress_time(t, spec):
    """Elapsed time warped by the speed profile (velocity ramps in smoothly)."""
    if spec.speed_profile == 'constant':
        return t
    ramp = spec.ramp_time
    if t < ramp:
        return t / 2.0 - ramp / (2.0 * np.pi) * np.sin(np.pi * t / ramp)
    return t - ramp / 2.0


class _Path:
    """Arc-length parametrized curve: sample(s) -> (position, unit tangent, curvature normal or None)."""

    length = np.inf

    def sample(self, s):
        raise NotImplementedError


class _Circle(_Path):
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = radius
        self.length = 2.0 * np.pi * radius

    def sample(self, s):
        theta = s / self.radius
        radial = np.array([np.cos(theta), np.sin(theta), 0.0])
        tangent = np.array([-np.sin(theta), np.cos(theta), 0.0])
        return self.center + self.radius * radial, tangent, -radial


class _FigureEight(_Path):
    """Horizontal lemniscate of Gerono; ``s`` is the curve parameter scaled by the radius."""

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = radius

    def sample(self, s):
        theta = s / self.radius
        r = self.radius
        position = self.center + np.array([r * np.sin(theta), 0.5 * r * np.sin(2 * theta), 0.0])
        d1 = np.array([r * np.cos(theta), r * np.cos(2 * theta), 0.0])
        d2 = np.array([-r * np.sin(theta), -2.0 * r * np.sin(2 * theta), 0.0])
        speed = np.linalg.norm(d1)
        tangent = d1 / speed
        perp = d2 - np.dot(d2, tangent) * tangent
        curvature = np.linalg.norm(perp) / speed ** 2
        normal = perp / np.linalg.norm(perp) if curvature > MIN_CURVATURE else None
        return position, tangent, normal


class _Polyline(_Path):
    """Straight segments joined by circular fillets at the interior corners."""

    def __init__(self, waypoints, corner_radius):
        pts = np.asarray(waypoints, dtype=float)
        if np.any(np.linalg.norm(np.diff(pts, axis=0), axis=1) < 1e-9):
            raise TrajectoryError("polyline has repeated consecutive waypoints")
        self.pieces = []
        start = pts[0]
        for i in range(1, len(pts) - 1):
            d_in = unit_vector(pts[i] - pts[i - 1])
            d_out = unit_vector(pts[i + 1] - pts[i])
            phi = angle_between(d_in, d_out)
            if phi < 1e-9 or corner_radius == 0:
                self._line(start, pts[i])
                start = pts[i]
                continue
            if phi > np.pi - 1e-6:
                raise TrajectoryError(f"polyline reverses direction at waypoint {i}")
            tangent_length = corner_radius * np.tan(phi / 2.0)
            tangent_length = min(tangent_length,
                                 0.5 * np.linalg.norm(pts[i] - pts[i - 1]),
                                 0.5 * np.linalg.norm(pts[i + 1] - pts[i]))
            radius = tangent_length / np.tan(phi / 2.0)
            entry = pts[i] - tangent_length * d_in
            exit_ = pts[i] + tangent_length * d_out
            inward = unit_vector(d_out - np.dot(d_out, d_in) * d_in)
            self._line(start, entry)
            self.pieces.append(('arc', entry + radius * inward, radius, d_in, inward, phi))
            start = exit_
        self._line(start, pts[-1])
        self.offsets = np.concatenate([[0.0], np.cumsum([self._piece_length(p) for p in self.pieces])])
        self.length = float(self.offsets[-1])

    def _line(self, a, b):
        if np.linalg.norm(b - a) > 1e-12:
            self.pieces.append(('line', a, b))

    @staticmethod
    def _piece_length(piece):
        if piece[0] == 'line':
            return float(np.linalg.norm(piece[2] - piece[1]))
        return piece[2] * piece[5]

    def sample(self, s):
        s = float(np.clip(s, 0.0, self.length))
        index = min(int(np.searchsorted(self.offsets, s, side='right')) - 1, len(self.pieces) - 1)
        local = s - self.offsets[index]
        piece = self.pieces[index]
        if piece[0] == 'line':
            _, a, b = piece
            direction = unit_vector(b - a)
            return a + local * direction, direction, None
        _, center, radius, d_in, inward, _ = piece
        alpha = local / radius
        position = center - radius * np.cos(alpha) * inward + radius * np.sin(alpha) * d_in
        tangent = np.sin(alpha) * inward + np.cos(alpha) * d_in
        return position, tangent, unit_vector(center - position)


def _arc_length(t, spec, path):
    """Distance travelled along the path at time t, honoring traversal mode.

    Back-and-forth traversal still samples the forward tangent, so lateral
    normals keep pointing to the same side on the way back.
    """
    progress = _progress_time(t, spec)
    if spec.curve == 'circle' and spec.period is not None:
        travelled = path.length * progress / spec.period
    elif spec.curve == 'figure_eight' and spec.period is not None:
        travelled = 2.0 * np.pi * spec.radius * progress / spec.period
    else:
        travelled = (spec.speed or 0.0) * progress
    if spec.curve != 'polyline':
        return travelled
    if spec.traversal == 'back_and_forth':
        return path.length * (1.0 - np.cos(np.pi * travelled / path.length)) / 2.0
    return min(travelled, path.length)


def _tremor(spec, times):
    """Seeded smooth offset: a sum of sinusoids per axis, RMS-scaled to the amplitude."""
    if spec.tremor_amplitude == 0 or not spec.tremor_frequencies:
        return np.zeros((len(times), 3))
    rng = np.random.default_rng(spec.rng_seed)
    freqs = np.asarray(spec.tremor_frequencies)
    gains = rng.normal(size=(len(freqs), 3))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(len(freqs), 3))
    gains /= np.sqrt(0.5 * np.sum(gains ** 2, axis=0))
    waves = np.sin(2.0 * np.pi * freqs[None, :, None] * np.asarray(times)[:, None, None] + phases[None])
    return spec.tremor_amplitude * np.sum(gains[None] * waves, axis=1)


def _normal(spec, tangent, curvature_normal, previous, world_up):
    if spec.normal_mode == 'fixed':
        return unit_vector(spec.normal_axis)
    if spec.normal_mode == 'frenet' and curvature_normal is not None:
        return curvature_normal
    lateral = np.cross(world_up, tangent)
    if np.linalg.norm(lateral) < 1e-9:
        return previous if previous is not None else unit_vector(spec.normal_axis)
    return lateral / np.linalg.norm(lateral)


def load_replay(path):
    """Read a recorded pose stream: CSV with columns t, px, py, pz, nx, ny, nz."""
    try:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            rows = list(csv.DictReader(f))
    except OSError as e:
        raise TrajectoryError(f"{path}: cannot read replay file: {e}") from e
    if not rows or any(c not in rows[0] for c in REPLAY_COLUMNS):
        raise TrajectoryError(f"{path}: replay file needs columns {REPLAY_COLUMNS}")
    data = np.array([[float(r[c]) for c in REPLAY_COLUMNS] for r in rows])
    if np.any(np.diff(data[:, 0]) <= 0):
        raise TrajectoryError(f"{path}: replay times must be strictly increasing")
    return data


def sample_times(spec):
    count = int(np.floor(spec.duration / spec.dt + 1e-9)) + 1
    return np.arange(count) * spec.dt


def generate_trajectory(spec, world_up=config.WORLD_UP):
    """Time-indexed feature stream for a trajectory spec.

    Returns:
        list of TrajectorySample, one per controller tick.
    """
    times = sample_times(spec)
    up = unit_vector(world_up)
    tremor = _tremor(spec, times)
    samples = []

    if spec.curve == 'replay':
        data = load_replay(spec.replay_path)
        for i, t in enumerate(times):
            position = np.array([np.interp(t, data[:, 0], data[:, k]) for k in (1, 2, 3)])
            normal = np.array([np.interp(t, data[:, 0], data[:, k]) for k in (4, 5, 6)])
            try:
                feature = FeatureState.from_position_normal(position + tremor[i], normal, up)
            except GeometryError as e:
                raise TrajectoryError(f"{spec.replay_path}: invalid normal at t={t}: {e}") from e
            samples.append(TrajectorySample(float(t), feature))
        return samples

    center = np.asarray(spec.center, dtype=float)
    if spec.curve == 'static':
        path = None
    elif spec.curve == 'circle':
        path = _Circle(center, spec.radius)
    elif spec.curve == 'figure_eight':
        path = _FigureEight(center, spec.radius)
    else:
        path = _Polyline(spec.waypoints, spec.corner_radius)

    previous = None
    for i, t in enumerate(times):
        if path is None:
            position = center
            normal = unit_vector(spec.normal_axis)
        else:
            s = _arc_length(t, spec, path)
            position, tangent, curvature_normal = path.sample(s)
            normal = _normal(spec, tangent, curvature_normal, previous, up)
        previous = normal
        feature = FeatureState.from_position_normal(position + tremor[i], normal, up)
        samples.append(TrajectorySample(float(t), feature))

    logger.debug("generated %d samples for curve '%s'", len(samples), spec.curve)
    return samples
