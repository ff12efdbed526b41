"""No-Go-Zone virtual fixtures and the proximity constraint.

A zone is the intersection of half-spaces ``(p - p_plane) . n_plane < 0`` with
outward normals. Points on a face plane count as outside.
"""
import itertools
import logging

import numpy as np
from scipy.spatial import ConvexHull, QhullError

import config
from geometry import GeometryError, unit_vector
from placement import aim_at

logger = logging.getLogger(__name__)

PRISM_POINT_COUNT = 5


class ZoneError(ValueError):
    """Raised for zones that are malformed or have an empty interior."""


class FitError(ZoneError):
    """Raised when operator points cannot define a prism."""


class NoGoZone:
    """Convex region bounded by outward-facing planes."""

    def __init__(self, normals, points, interior_point=None, name="zone"):
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if normals.ndim != 2 or normals.shape[1] != 3 or normals.shape != points.shape:
            raise ZoneError(f"faces need matching (k, 3) normals and points, got "
                            f"{normals.shape} and {points.shape}")
        try:
            normals = np.array([unit_vector(n) for n in normals])
        except GeometryError as e:
            raise ZoneError(f"zone '{name}' has a zero-length face normal") from e
        normals.setflags(write=False)
        points = points.copy()
        points.setflags(write=False)
        self.normals = normals
        self.points = points
        self.name = name

        if interior_point is None:
            interior_point = points.mean(axis=0)
        interior_point = np.asarray(interior_point, dtype=float)
        if not np.all(self.signed_distances(interior_point) < 0):
            raise ZoneError(f"zone '{name}' has an empty interior")
        self.interior_point = interior_point

    @property
    def face_count(self):
        return len(self.normals)

    def signed_distances(self, points):
        """Signed distance of each point to each face: shape (..., face_count)."""
        pts = np.asarray(points, dtype=float)
        return np.einsum('...j,kj->...k', pts, self.normals) - np.sum(self.points * self.normals, axis=1)

    def contains(self, p):
        return bool(np.all(self.signed_distances(p) < 0))

    def closest_face(self, p):
        """Index of the face with the smallest |signed distance|; lowest index on ties."""
        return int(np.argmin(np.abs(self.signed_distances(p))))

    @classmethod
    def from_dict(cls, data, name="zone"):
        """Either ``{"points": [5 x xyz]}`` or ``{"faces": [{"normal", "point"}, ...]}``."""
        data = dict(data)
        config.check_keys('zone', data, ('points', 'faces', 'interior_point', 'name'))
        name = data.get('name', name)
        if 'points' in data and 'faces' in data:
            raise ZoneError("zone: give either points or faces, not both")
        if 'points' in data:
            return fit_prism(data['points'], name=name)
        if 'faces' in data:
            try:
                normals = [f['normal'] for f in data['faces']]
                points = [f['point'] for f in data['faces']]
            except (KeyError, TypeError) as e:
                raise ZoneError(f"zone: malformed face entry: {e}") from e
            return cls(normals, points, data.get('interior_point'), name=name)
        raise ZoneError("zone: needs 'points' or 'faces'")

    def __repr__(self):
        return f"NoGoZone(name={self.name!r}, faces={self.face_count})"


def contains(zone, p):
    """Strict interior test: negative signed distance to every face."""
    return zone.contains(p)


def floor_zone(height, world_up=config.WORLD_UP):
    """Half-space below the floor plane at ``height`` along world up."""
    up = unit_vector(world_up)
    plane_point = height * up
    return NoGoZone([up], [plane_point], interior_point=plane_point - up, name="floor")


def _min_area_rectangle(points_2d):
    """Minimum-area bounding rectangle: (center, axes rows, half extents)."""
    hull = ConvexHull(points_2d)
    vertices = points_2d[hull.vertices]
    best = None
    for i in range(len(vertices)):
        edge = vertices[(i + 1) % len(vertices)] - vertices[i]
        length = np.linalg.norm(edge)
        if length < 1e-12:
            continue
        e1 = edge / length
        e2 = np.array([-e1[1], e1[0]])
        axes = np.vstack([e1, e2])
        proj = vertices @ axes.T
        lo = proj.min(axis=0)
        hi = proj.max(axis=0)
        area = np.prod(hi - lo)
        if best is None or area < best[0] - 1e-15:
            best = (area, axes, lo, hi)
    _, axes, lo, hi = best
    center = ((lo + hi) / 2.0) @ axes
    return center, axes, (hi - lo) / 2.0


def fit_prism(points, name="zone"):
    """Fit a 6-face rectangular prism to four base points and one height point.

    The base plane is the least-squares plane through the first four points;
    the lateral faces come from the minimum-area rectangle around the base
    points projected into that plane, and the height is the fifth point's
    distance to the plane.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape != (PRISM_POINT_COUNT, 3):
        raise FitError(f"prism fit needs {PRISM_POINT_COUNT} points, got shape {pts.shape}")
    base, apex = pts[:4], pts[4]
    scale = max(np.max(np.linalg.norm(base - base.mean(axis=0), axis=1)), 1e-12)
    for a, b, c in itertools.combinations(base, 3):
        if np.linalg.norm(np.cross(b - a, c - a)) < 1e-9 * scale * scale:
            raise FitError("three base points are collinear")

    centroid = base.mean(axis=0)
    _, _, vt = np.linalg.svd(base - centroid)
    u_axis, v_axis, normal = vt[0], vt[1], vt[2]
    height = float(np.dot(apex - centroid, normal))
    if abs(height) < 1e-9 * max(scale, 1.0):
        raise FitError("height point lies on the base plane")
    if height < 0:
        normal = -normal
        v_axis = -v_axis
        height = -height

    in_plane = np.column_stack([(base - centroid) @ u_axis, (base - centroid) @ v_axis])
    try:
        center_2d, axes_2d, half = _min_area_rectangle(in_plane)
    except QhullError as e:
        raise FitError(f"base points do not span an area: {e}") from e
    basis = np.vstack([u_axis, v_axis])
    center = centroid + center_2d @ basis
    e1, e2 = axes_2d @ basis

    normals = [-normal, normal, e1, -e1, e2, -e2]
    face_points = [
        center,
        center + height * normal,
        center + half[0] * e1,
        center - half[0] * e1,
        center + half[1] * e2,
        center - half[1] * e2,
    ]
    zone = NoGoZone(normals, face_points, interior_point=pts.mean(axis=0), name=name)
    logger.debug("fitted zone '%s': base %.4f x %.4f m, height %.4f m",
                 name, 2 * half[0], 2 * half[1], height)
    return zone


def boundary_pose(zone, desired, feature, cfg, margin=0.0, fallback_x_axis=None):
    """Replace a pose inside the zone by the nearest point on its closest face.

    The translation is projected onto the closest face plane (and pushed
    ``margin`` further out along its normal); the rotation is re-aimed at the
    feature.
    """
    p_cam = desired.translation
    face = zone.closest_face(p_cam)
    normal = zone.normals[face]
    plane_point = zone.points[face]
    boundary = p_cam - np.dot(p_cam - plane_point, normal) * normal + margin * normal
    # rounding can leave the point a hair inside the plane; nudge it onto the outer side
    for _ in range(4):
        residual = zone.signed_distances(boundary)[face] - margin
        if residual >= 0:
            break
        boundary = boundary + (np.spacing(np.max(np.abs(boundary)) + 1.0) - residual) * normal
    return aim_at(boundary, feature.translation, cfg.world_up, fallback_x_axis)


def proximity_violated(p_cam, feature, min_dist):
    if not min_dist > 0:
        raise ZoneError(f"min_dist must be positive, got {min_dist}")
    return bool(np.linalg.norm(np.asarray(p_cam, dtype=float) - feature.translation) < min_dist)
