"""Naive geometric camera placement and the orientation-side check."""
import logging
from dataclasses import dataclass, field

import numpy as np

import config
from geometry import GeometryError, Pose, angle_between, unit_vector

logger = logging.getLogger(__name__)

_DEGENERATE_SIN = np.sin(config.DEGENERATE_VIEW_ANGLE)


class DegenerateViewError(GeometryError):
    """Raised when the optical axis is (anti)parallel to world up."""


@dataclass(frozen=True, eq=False)
class PlacementConfig:
    d_t: float = config.DESIRED_DISTANCE
    world_up: np.ndarray = field(default_factory=lambda: config.WORLD_UP.copy())
    preferred_side_axis: np.ndarray = field(
        default_factory=lambda: config.PREFERRED_SIDE_AXIS.copy())
    side_angle_limit: float = config.SIDE_ANGLE_LIMIT

    def __post_init__(self):
        if not self.d_t > 0:
            raise config.ConfigError(f"d_t must be positive, got {self.d_t}")
        if not self.side_angle_limit > 0:
            raise config.ConfigError("side_angle_limit must be positive")
        object.__setattr__(self, 'world_up', unit_vector(self.world_up))
        object.__setattr__(self, 'preferred_side_axis', unit_vector(self.preferred_side_axis))

    @classmethod
    def from_dict(cls, data):
        """Keys: d_t, world_up, preferred_side_axis, side_angle_limit_deg."""
        data = dict(data or {})
        config.check_keys('placement', data,
                          ('d_t', 'world_up', 'preferred_side_axis', 'side_angle_limit_deg'))
        if 'side_angle_limit_deg' in data:
            data['side_angle_limit'] = np.radians(
                config.as_number('placement', 'side_angle_limit_deg', data.pop('side_angle_limit_deg')))
        return config.build_section(cls, 'placement', data)


@dataclass(frozen=True, eq=False)
class FeatureState:
    """Tracked feature: its frame in ECM coordinates and its normal (frame y-axis)."""

    pose: Pose

    @property
    def normal(self):
        return self.pose.y_axis

    @property
    def translation(self):
        return self.pose.translation

    @classmethod
    def from_position_normal(cls, position, normal, world_up=config.WORLD_UP):
        """Feature frame with y along the normal and z as close to world up as possible."""
        y_axis = unit_vector(normal)
        up = unit_vector(world_up)
        z_axis = up - np.dot(up, y_axis) * y_axis
        if np.linalg.norm(z_axis) < 1e-9:
            # normal along world up: any horizontal direction will do
            helper = np.array([1.0, 0.0, 0.0]) if abs(y_axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
            z_axis = helper - np.dot(helper, y_axis) * y_axis
        z_axis = unit_vector(z_axis)
        x_axis = np.cross(y_axis, z_axis)
        return cls(Pose(np.column_stack([x_axis, y_axis, z_axis]), position))


def aim_at(position, target, world_up=config.WORLD_UP, fallback_x_axis=None):
    """Camera pose at ``position`` whose optical axis points at ``target``.

    The x-axis is kept horizontal (perpendicular to world up). When the view
    direction is within the degenerate angle of world up, ``fallback_x_axis``
    is re-orthogonalized against the optical axis instead; without a fallback
    this raises DegenerateViewError.
    """
    position = np.asarray(position, dtype=float)
    z_c = unit_vector(np.asarray(target, dtype=float) - position)
    up = unit_vector(world_up)
    x_c = np.cross(up, z_c)
    if np.linalg.norm(x_c) < _DEGENERATE_SIN:
        if fallback_x_axis is None:
            raise DegenerateViewError("view direction is parallel to world up")
        fallback = np.asarray(fallback_x_axis, dtype=float)
        x_c = fallback - np.dot(fallback, z_c) * z_c
        try:
            x_c = unit_vector(x_c)
        except GeometryError as e:
            raise DegenerateViewError("fallback x-axis is parallel to the view direction") from e
    else:
        x_c = x_c / np.linalg.norm(x_c)
    y_c = np.cross(z_c, x_c)
    return Pose(np.column_stack([x_c, y_c, z_c]), position)


def compute_naive_pose(feature, cfg, fallback_x_axis=None):
    """Camera d_t along the feature normal, looking back at the feature."""
    p_cam = feature.translation + cfg.d_t * feature.normal
    return aim_at(p_cam, feature.translation, cfg.world_up, fallback_x_axis)


def check_orientation_side(camera_pose, cfg):
    """True when the viewing axis lies within the limit of the preferred side axis."""
    return angle_between(camera_pose.z_axis, cfg.preferred_side_axis) <= cfg.side_angle_limit
