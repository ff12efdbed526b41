"""Serial-chain kinematics and the naive Newton inverse-kinematics solver."""
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

import config
from geometry import GeometryError, Pose, skew, unit_vector

logger = logging.getLogger(__name__)

REVOLUTE = 'revolute'
PRISMATIC = 'prismatic'
JOINT_TYPES = (REVOLUTE, PRISMATIC)

# Task-space error clamps keep single Newton steps inside the linear regime.
CLAMP_POSITION_ERROR = 0.05
CLAMP_ROTATION_ERROR = np.pi / 3
MAX_JOINT_STEP = 0.5


class KinematicsError(ValueError):
    """Raised for malformed chains and joint vectors of the wrong size."""


@dataclass(frozen=True, eq=False)
class Joint:
    """One actuated joint: fixed origin transform, then motion along/about axis."""

    name: str
    joint_type: str
    axis: np.ndarray
    origin: Pose
    lower: float
    upper: float

    @property
    def is_revolute(self):
        return self.joint_type == REVOLUTE


def _origin_from_dict(data):
    data = data or {}
    return Pose.from_xyz_rpy(data.get('xyz', (0.0, 0.0, 0.0)), data.get('rpy', (0.0, 0.0, 0.0)))


class KinematicChain:
    """Serial chain of revolute/prismatic joints ending in a camera frame.

    Immutable after construction: joint limits and the home configuration are
    read-only arrays.
    """

    def __init__(self, joints, tool_offset=None, name="chain", home=None, description=""):
        if not joints:
            raise KinematicsError("a chain needs at least one joint")
        self.joints = tuple(joints)
        self.tool_offset = tool_offset if tool_offset is not None else Pose.identity()
        self.name = name
        self.description = description

        lower = np.array([j.lower for j in self.joints], dtype=float)
        upper = np.array([j.upper for j in self.joints], dtype=float)
        if np.any(lower >= upper):
            bad = [j.name for j in self.joints if j.lower >= j.upper]
            raise KinematicsError(f"joint limits must satisfy lower < upper: {bad}")
        lower.setflags(write=False)
        upper.setflags(write=False)
        self._lower = lower
        self._upper = upper

        if home is None:
            home = 0.5 * (lower + upper)
        home = np.array(home, dtype=float)
        if home.shape != (self.dof,):
            raise KinematicsError(f"home configuration needs {self.dof} values, got {home.size}")
        home.setflags(write=False)
        self._home = home

        # Per-joint constants for the FK walk: origin rotation O, the joint axis
        # in the parent frame (O @ axis), and O @ K, O @ K^2 so that
        # O @ R(theta) = O + sin(theta) * OK + (1 - cos(theta)) * OK2.
        self._origin_rot = tuple(j.origin.rotation for j in self.joints)
        self._origin_pos = tuple(j.origin.translation for j in self.joints)
        self._axes_local = tuple(j.origin.rotation @ j.axis for j in self.joints)
        self._origin_k = tuple(j.origin.rotation @ skew(j.axis) for j in self.joints)
        self._origin_k2 = tuple(j.origin.rotation @ skew(j.axis) @ skew(j.axis)
                                for j in self.joints)
        self._has_offset = tuple(bool(np.any(p)) for p in self._origin_pos)
        self._revolute = np.array([j.is_revolute for j in self.joints])
        self._revolute_flags = tuple(bool(r) for r in self._revolute)
        self._tool_rot = self.tool_offset.rotation
        self._tool_pos = self.tool_offset.translation

    @property
    def dof(self):
        return len(self.joints)

    @property
    def q_lower(self):
        return self._lower

    @property
    def q_upper(self):
        return self._upper

    @property
    def home(self):
        return self._home

    @property
    def joint_names(self):
        return [j.name for j in self.joints]

    @classmethod
    def from_dict(cls, data):
        """Build a chain from the JSON chain schema."""
        try:
            joints = []
            for i, jd in enumerate(data['joints']):
                joint_type = jd.get('type', REVOLUTE)
                if joint_type not in JOINT_TYPES:
                    raise KinematicsError(f"joint {i}: unknown type '{joint_type}'")
                lower, upper = jd['limits']
                joints.append(Joint(
                    name=jd.get('name', f"joint{i + 1}"),
                    joint_type=joint_type,
                    axis=unit_vector(jd['axis']),
                    origin=_origin_from_dict(jd.get('origin')),
                    lower=float(lower),
                    upper=float(upper),
                ))
            return cls(
                joints,
                tool_offset=_origin_from_dict(data.get('tool_offset')),
                name=data.get('name', 'chain'),
                home=data.get('home'),
                description=data.get('description', ''),
            )
        except (KeyError, TypeError) as e:
            raise KinematicsError(f"malformed chain definition: {e}") from e
        except GeometryError as e:
            raise KinematicsError(f"invalid chain geometry: {e}") from e

    @classmethod
    def from_json(cls, path):
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        chain = cls.from_dict(data)
        logger.debug("loaded chain '%s' (%d joints) from %s", chain.name, chain.dof, path)
        return chain

    def as_joint_vector(self, q):
        values = np.asarray(q, dtype=float).reshape(-1)
        if values.shape != (self.dof,):
            raise KinematicsError(
                f"joint vector has {values.size} values, chain '{self.name}' has {self.dof} joints")
        return values

    def _frames(self, q):
        """Flange rotation/position plus world joint axes and joint origins."""
        rot = np.eye(3)
        pos = np.zeros(3)
        axes = np.empty((self.dof, 3))
        origins = np.empty((self.dof, 3))
        for i, (value, revolute) in enumerate(zip(q.tolist(), self._revolute_flags)):
            if self._has_offset[i]:
                pos = pos + rot @ self._origin_pos[i]
            axis_world = rot @ self._axes_local[i]
            axes[i] = axis_world
            origins[i] = pos
            if revolute:
                rot = rot @ (self._origin_rot[i] + math.sin(value) * self._origin_k[i]
                             + (1.0 - math.cos(value)) * self._origin_k2[i])
            else:
                rot = rot @ self._origin_rot[i]
                pos = pos + axis_world * value
        return rot, pos, axes, origins

    def camera_frame(self, q):
        """Camera rotation, camera position, world joint axes, joint origins."""
        rot, pos, axes, origins = self._frames(q)
        return rot @ self._tool_rot, pos + rot @ self._tool_pos, axes, origins

    def jacobian_from_frames(self, cam_pos, axes, origins):
        rev = self._revolute[:, None]
        jac = np.empty((6, self.dof))
        jac[:3] = np.where(rev, np.cross(axes, cam_pos - origins), axes).T
        jac[3:] = np.where(rev, axes, 0.0).T
        return jac


def load_default_chain(path=None):
    """Load the shipped stand-in chain (or the chain file at path)."""
    if path is None:
        path = config.DEFAULT_CHAIN_FILE
    return KinematicChain.from_json(os.fspath(path))


def forward_kinematics(chain, q, include_tool=True):
    """Camera pose in the base frame: f_k(q) composed with the tool offset."""
    qv = chain.as_joint_vector(q)
    rot, pos, _, _ = chain._frames(qv)
    flange = Pose(rot, pos)
    if not include_tool:
        return flange
    return Pose(rot @ chain.tool_offset.rotation, pos + rot @ chain.tool_offset.translation)


def jacobian(chain, q):
    """Geometric 6xn Jacobian of the camera origin (linear rows first)."""
    qv = chain.as_joint_vector(q)
    _, cam_pos, axes, origins = chain.camera_frame(qv)
    return chain.jacobian_from_frames(cam_pos, axes, origins)


def within_joint_limits(chain, q):
    qv = chain.as_joint_vector(q)
    return bool(np.all(qv >= chain.q_lower) and np.all(qv <= chain.q_upper))


def pose_error(current, target):
    """6-vector error: translation (m) and world-frame rotation vector (rad)."""
    dp = target.translation - current.translation
    dr = Rotation.from_matrix(target.rotation @ current.rotation.T).as_rotvec()
    return np.concatenate([dp, dr])


@dataclass(frozen=True, eq=False)
class IKResult:
    q: np.ndarray
    success: bool
    iterations: int
    error_norm: float
    reason: str


def ik_newton(chain, target, q0, tol=config.NEWTON_TOL, max_iter=config.NEWTON_MAX_ITER,
              damping=config.NEWTON_DAMPING):
    """Damped Newton (least-squares) inverse kinematics for a full 6-DOF pose.

    Joint limits are deliberately ignored; the controller gates the result.

    Args:
        chain: KinematicChain.
        target: Desired camera Pose.
        q0: Seed joint vector.
        tol: Convergence threshold on the 6-vector pose error norm.
        max_iter: Iteration cap.
        damping: Initial damping, raised x10 while the normal matrix is
            ill-conditioned.

    Returns:
        IKResult; ``success`` is False instead of raising on non-convergence.
    """
    if tol <= 0:
        raise KinematicsError("tol must be positive")
    if max_iter < 1:
        raise KinematicsError("max_iter must be at least 1")

    q = chain.as_joint_vector(q0).copy()
    identity = np.eye(chain.dof)
    err_norm = np.inf
    for it in range(max_iter + 1):
        cam_rot, cam_pos, axes, origins = chain.camera_frame(q)
        err = pose_error(Pose(cam_rot, cam_pos), target)
        err_norm = float(np.linalg.norm(err))
        if err_norm < tol:
            return IKResult(q, True, it, err_norm, 'converged')
        if it == max_iter:
            break

        pos_err = np.linalg.norm(err[:3])
        if pos_err > CLAMP_POSITION_ERROR:
            err[:3] *= CLAMP_POSITION_ERROR / pos_err
        rot_err = np.linalg.norm(err[3:])
        if rot_err > CLAMP_ROTATION_ERROR:
            err[3:] *= CLAMP_ROTATION_ERROR / rot_err

        jac = chain.jacobian_from_frames(cam_pos, axes, origins)
        if not np.all(np.isfinite(jac)):
            return IKResult(q, False, it, err_norm, 'singular')
        normal = jac.T @ jac
        lam = damping
        while np.linalg.cond(normal + lam * identity) > config.NEWTON_MAX_CONDITION:
            lam *= 10.0
            if lam > config.NEWTON_MAX_DAMPING:
                logger.debug("newton: singular configuration at iteration %d", it)
                return IKResult(q, False, it, err_norm, 'singular')
        step = np.linalg.solve(normal + lam * identity, jac.T @ err)
        biggest = np.max(np.abs(step))
        if biggest > MAX_JOINT_STEP:
            step *= MAX_JOINT_STEP / biggest
        q = q + step

    return IKResult(q, False, max_iter, err_norm, 'max-iterations')
