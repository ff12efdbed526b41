"""Rigid-body poses, frame algebra and paired-point registration."""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

ORTHONORMAL_TOL = 1e-9
POSE_ROW_LENGTH = 12


class GeometryError(ValueError):
    """Raised for zero-length vectors and malformed rotations."""


class DegenerateRegistrationError(GeometryError):
    """Raised when paired points cannot pin down a rigid transform."""


def _frozen(array, shape):
    arr = np.array(array, dtype=float).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pose:
    """Homogeneous rigid transform mapping points of a child frame into a
    parent frame: p_parent = rotation @ p_child + translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = _frozen(self.rotation, (3, 3))
        translation = _frozen(self.translation, (3,))
        if not np.all(np.isfinite(rotation)) or not np.all(np.isfinite(translation)):
            raise GeometryError("pose contains non-finite values")
        if np.max(np.abs(rotation @ rotation.T - np.eye(3))) > ORTHONORMAL_TOL:
            raise GeometryError("rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOL:
            raise GeometryError("rotation determinant is not +1")
        object.__setattr__(self, 'rotation', rotation)
        object.__setattr__(self, 'translation', translation)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_matrix(cls, matrix):
        """Build a pose from a 4x4 homogeneous matrix."""
        m = np.asarray(matrix, dtype=float)
        if m.shape != (4, 4):
            raise GeometryError(f"expected a 4x4 matrix, got {m.shape}")
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def from_translation(cls, translation):
        return cls(np.eye(3), translation)

    @classmethod
    def from_xyz_rpy(cls, xyz=(0.0, 0.0, 0.0), rpy=(0.0, 0.0, 0.0)):
        """Fixed-axis roll/pitch/yaw plus translation (URDF origin style)."""
        return cls(Rotation.from_euler('xyz', rpy).as_matrix(), xyz)

    @classmethod
    def from_quaternion(cls, quaternion_xyzw, translation=(0.0, 0.0, 0.0)):
        return cls(Rotation.from_quat(quaternion_xyzw).as_matrix(), translation)

    def as_quaternion(self):
        """Rotation as a scalar-last unit quaternion."""
        return Rotation.from_matrix(self.rotation).as_quat()

    def as_matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points):
        """Map a point (3,) or points (N, 3) from the child frame into the parent."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    @property
    def x_axis(self):
        return self.rotation[:, 0]

    @property
    def y_axis(self):
        return self.rotation[:, 1]

    @property
    def z_axis(self):
        return self.rotation[:, 2]

    def __repr__(self):
        return (f"Pose(rotvec={np.round(Rotation.from_matrix(self.rotation).as_rotvec(), 6)}, "
                f"translation={np.round(self.translation, 6)})")


def compose(a, b):
    """Pose that maps points through b, then through a."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(p):
    rt = p.rotation.T
    return Pose(rt, -rt @ p.translation)


def pose_to_row(p):
    """Flat 12-number record: rotation row-major, then translation."""
    return np.concatenate([p.rotation.reshape(9), p.translation])


def pose_from_row(row):
    values = np.asarray(row, dtype=float)
    if values.shape != (POSE_ROW_LENGTH,):
        raise GeometryError(f"pose row needs {POSE_ROW_LENGTH} values, got {values.size}")
    return Pose(values[:9].reshape(3, 3), values[9:])


def unit_vector(v):
    """Normalize a 3-vector, rejecting zero length."""
    vec = np.asarray(v, dtype=float).reshape(3)
    norm = np.linalg.norm(vec)
    if not np.isfinite(norm) or norm < 1e-12:
        raise GeometryError("cannot normalize a zero-length vector")
    return vec / norm


def cosine_similarity(v1, v2):
    a = np.asarray(v1, dtype=float)
    b = np.asarray(v2, dtype=float)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise GeometryError("cosine similarity of a zero-length vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def angle_between(v1, v2):
    """Unsigned angle between two vectors in radians."""
    return float(np.arccos(cosine_similarity(v1, v2)))


def rotation_angle(a, b):
    """Magnitude of the rotation taking orientation a onto orientation b."""
    relative = np.asarray(a).T @ np.asarray(b)
    return float(Rotation.from_matrix(relative).magnitude())


def skew(v):
    """Cross-product matrix: skew(a) @ b == cross(a, b)."""
    k = np.asarray(v, dtype=float)
    return np.array([[0.0, -k[2], k[1]],
                     [k[2], 0.0, -k[0]],
                     [-k[1], k[0], 0.0]])


@dataclass(frozen=True, eq=False)
class RegistrationResult:
    """Estimated transform mapping A points onto B points, with residual stats."""

    pose: Pose
    mean_abs_error: float
    rms_error: float
    max_error: float
    residuals: np.ndarray
    iterations: int = 0


def _weighted_kabsch(a, b, weights):
    w = weights / np.sum(weights)
    centroid_a = w @ a
    centroid_b = w @ b
    h = (a - centroid_a).T @ ((b - centroid_b) * w[:, None])
    u, _, vt = np.linalg.svd(h)
    v = vt.T
    d = np.sign(np.linalg.det(v @ u.T))
    if d == 0:
        d = 1.0
    r = v @ np.diag([1.0, 1.0, d]) @ u.T
    t = centroid_b - r @ centroid_a
    return r, t


def _residuals(r, t, a, b):
    return np.linalg.norm(a @ r.T + t - b, axis=1)


def register_paired_points(a_points, b_points, refine_l1=False, max_refine_iter=50):
    """Rigid transform T minimizing |T(a_i) - b_i| over paired points.

    Closed-form least-squares (SVD) estimate; with ``refine_l1`` the estimate
    is refined by iteratively reweighted least squares toward the
    mean-absolute-error objective.

    Args:
        a_points: (N, 3) points expressed in frame A.
        b_points: (N, 3) matching points expressed in frame B.
        refine_l1: Enable the reweighted refinement.
        max_refine_iter: Refinement iteration cap.

    Returns:
        RegistrationResult whose pose maps A coordinates into B.
    """
    a = np.asarray(a_points, dtype=float)
    b = np.asarray(b_points, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3 or a.shape != b.shape:
        raise DegenerateRegistrationError(
            f"paired point sets must both be (N, 3), got {a.shape} and {b.shape}")
    if a.shape[0] < 3:
        raise DegenerateRegistrationError("registration needs at least 3 paired points")

    scale = max(np.max(np.linalg.norm(a - a.mean(axis=0), axis=1)), 1e-12)
    singular = np.linalg.svd(a - a.mean(axis=0), compute_uv=False)
    if singular[1] <= 1e-9 * max(scale, 1.0) * np.sqrt(a.shape[0]):
        raise DegenerateRegistrationError("paired points are collinear")

    r, t = _weighted_kabsch(a, b, np.ones(len(a)))
    res = _residuals(r, t, a, b)
    iterations = 0

    if refine_l1:
        best = (r, t, res)
        for iterations in range(1, max_refine_iter + 1):
            weights = 1.0 / np.maximum(best[2], 1e-9)
            r_new, t_new = _weighted_kabsch(a, b, weights)
            res_new = _residuals(r_new, t_new, a, b)
            improvement = np.mean(best[2]) - np.mean(res_new)
            if improvement <= 0:
                break
            best = (r_new, t_new, res_new)
            if improvement < 1e-12:
                break
        r, t, res = best

    return RegistrationResult(
        pose=Pose(r, t),
        mean_abs_error=float(np.mean(res)),
        rms_error=float(np.sqrt(np.mean(res ** 2))),
        max_error=float(np.max(res)),
        residuals=res,
        iterations=iterations,
    )
