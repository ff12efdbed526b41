"""Hierarchical per-tick camera controller.

Each tick: naive placement, workspace constraints, Cartesian interpolation,
Newton IK, joint-limit gate with the constrained-IK fallback, then a quintic
joint trajectory re-planned from the current state.
"""
import enum
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

import config
from geometry import GeometryError, Pose
from kinematics import forward_kinematics, ik_newton, within_joint_limits
from optimizer import ObjectiveContext, SolverConfig, objective, solve_constrained_ik
from placement import (DegenerateViewError, PlacementConfig, check_orientation_side,
                       compute_naive_pose)
from workspace import boundary_pose, floor_zone, proximity_violated

logger = logging.getLogger(__name__)

SOLVER_NEWTON = 'newton'
SOLVER_CONSTRAINED = 'constrained'
SIDE_POLICIES = ('log', 'constrained')


class ControllerError(ValueError):
    """Raised for invalid controller settings or state."""


class Constraint(str, enum.Enum):
    NO_GO_ZONE = 'no_go_zone'
    BELOW_FLOOR = 'below_floor'
    PROXIMITY = 'proximity'
    JOINT_LIMIT = 'joint_limit'
    SIDE_ORIENTATION = 'side_orientation'


@dataclass(frozen=True)
class ControllerConfig:
    dt: float = field(default_factory=config.get_tick_period)
    step_limit: float = config.CARTESIAN_STEP_LIMIT
    max_joint_speed: float = config.MAX_JOINT_SPEED
    proximity_min: float = config.PROXIMITY_MIN_DISTANCE
    floor_height: float = None
    zone_margin: float = config.ZONE_MARGIN
    ik_clearance: float = config.IK_ZONE_CLEARANCE
    newton_tol: float = config.NEWTON_TOL
    newton_max_iter: int = config.NEWTON_MAX_ITER
    side_policy: str = 'log'
    lag_time_constant: float = 0.0
    tracking_noise_std: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ControllerError("dt must be positive")
        if not self.step_limit > 0:
            raise ControllerError("step_limit must be positive")
        if not self.max_joint_speed > 0:
            raise ControllerError("max_joint_speed must be positive")
        if not self.proximity_min > 0:
            raise ControllerError("proximity_min must be positive")
        if self.zone_margin < 0 or self.ik_clearance < 0:
            raise ControllerError("zone_margin and ik_clearance must be non-negative")
        if self.side_policy not in SIDE_POLICIES:
            raise ControllerError(f"side_policy must be one of {SIDE_POLICIES}")
        if self.lag_time_constant < 0 or self.tracking_noise_std < 0:
            raise ControllerError("lag_time_constant and tracking_noise_std must be non-negative")

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        config.check_keys('controller', data, cls.__dataclass_fields__.keys())
        return config.build_section(cls, 'controller', data)


@dataclass(frozen=True, eq=False)
class ControllerState:
    q_current: np.ndarray
    q_velocity: np.ndarray
    q_acceleration: np.ndarray
    last_valid_x_axis: np.ndarray
    tick_index: int = 0
    rng_seed: int = 0

    @classmethod
    def at_rest(cls, chain, q, rng_seed=0):
        qv = chain.as_joint_vector(q).copy()
        zeros = np.zeros(chain.dof)
        return cls(qv, zeros, zeros.copy(), forward_kinematics(chain, qv).x_axis.copy(),
                   0, int(rng_seed))


@dataclass(frozen=True, eq=False)
class TickReport:
    tick_index: int
    naive_pose: Pose
    commanded_pose: Pose
    achieved_pose: Pose
    q_command: np.ndarray
    q_achieved: np.ndarray
    constraints_hit: frozenset
    solver_used: str
    objective: object
    solve_report: object
    newton_failed: bool
    newton_iterations: int
    degenerate_view: bool
    held: bool
    snapped: bool
    loop_time: float

    @property
    def with_constraints(self):
        return bool(self.constraints_hit) or self.solver_used == SOLVER_CONSTRAINED

    @property
    def solver_evaluations(self):
        return self.solve_report.evaluations if self.solve_report is not None else 0


def interpolate_cartesian(current, desired, step_limit=config.CARTESIAN_STEP_LIMIT):
    """Limit a Cartesian move to ``step_limit`` meters, slerping the rotation alongside."""
    if not step_limit > 0:
        raise ControllerError("step_limit must be positive")
    delta = desired.translation - current.translation
    distance = np.linalg.norm(delta)
    if distance <= step_limit:
        return desired
    fraction = step_limit / distance
    key_rotations = Rotation.from_matrix(np.stack([current.rotation, desired.rotation]))
    rotation = Slerp([0.0, 1.0], key_rotations)(fraction).as_matrix()
    return Pose(rotation, current.translation + fraction * delta)


@dataclass(frozen=True, eq=False)
class QuinticTrajectory:
    """Per-joint quintic polynomials; ``coefficients`` has shape (6, n), lowest order first."""

    coefficients: np.ndarray
    duration: float

    def _t(self, t):
        return float(np.clip(t, 0.0, self.duration))

    def position(self, t):
        t = self._t(t)
        powers = np.array([1.0, t, t ** 2, t ** 3, t ** 4, t ** 5])
        return powers @ self.coefficients

    def velocity(self, t):
        t = self._t(t)
        powers = np.array([0.0, 1.0, 2 * t, 3 * t ** 2, 4 * t ** 3, 5 * t ** 4])
        return powers @ self.coefficients

    def acceleration(self, t):
        t = self._t(t)
        powers = np.array([0.0, 0.0, 2.0, 6 * t, 12 * t ** 2, 20 * t ** 3])
        return powers @ self.coefficients


def quintic_joint_trajectory(q0, v0, a0, q1, duration):
    """Quintic from (q0, v0, a0) to rest at q1 after ``duration`` seconds."""
    if not duration > 0:
        raise ControllerError("duration must be positive")
    q0, v0, a0, q1 = (np.asarray(x, dtype=float) for x in (q0, v0, a0, q1))
    h = q1 - q0
    T = float(duration)
    coefficients = np.vstack([
        q0,
        v0,
        a0 / 2.0,
        (20.0 * h - 12.0 * v0 * T - 3.0 * a0 * T ** 2) / (2.0 * T ** 3),
        (-30.0 * h + 16.0 * v0 * T + 3.0 * a0 * T ** 2) / (2.0 * T ** 4),
        (12.0 * h - 6.0 * v0 * T - a0 * T ** 2) / (2.0 * T ** 5),
    ])
    return QuinticTrajectory(coefficients, T)


def _active_zones(zone, cfg, world_up):
    zones = []
    if zone is not None:
        zones.append((Constraint.NO_GO_ZONE, zone))
    if cfg.floor_height is not None:
        zones.append((Constraint.BELOW_FLOOR, floor_zone(cfg.floor_height, world_up)))
    return zones


def _apply_workspace(pose, zones, feature, placement_cfg, margin, fallback_x_axis):
    """Project the pose out of every active zone; returns (pose, constraints hit)."""
    hit = set()
    for _ in range(len(zones) + 1):
        inside = [(tag, z) for tag, z in zones if z.contains(pose.translation)]
        if not inside:
            break
        tag, z = inside[0]
        hit.add(tag)
        pose = boundary_pose(z, pose, feature, placement_cfg, margin, fallback_x_axis)
    return pose, hit


def _clear_of_zones(pose, zones, clearance):
    """Push a pose lying on (or just outside) a zone face out to the clearance."""
    p = pose.translation
    for _, z in zones:
        d = z.signed_distances(p)
        face = int(np.argmax(d))
        if d[face] < clearance:
            p = p + (clearance - d[face]) * z.normals[face]
    if p is pose.translation:
        return pose
    return Pose(pose.rotation, p)


def _is_safe(chain, q, zones):
    p = forward_kinematics(chain, q).translation
    return not any(z.contains(p) for _, z in zones)


def tick(state, feature, zone, chain, placement_cfg=None, solver_cfg=None,
         controller_cfg=None, clock=time.perf_counter):
    """Advance the controller by one tick.

    Args:
        state: ControllerState before the tick.
        feature: FeatureState observed this tick.
        zone: NoGoZone or None.
        chain: KinematicChain of the camera arm.
        placement_cfg, solver_cfg, controller_cfg: configs (defaults when None).
        clock: wall-clock source for the loop time.

    Returns:
        (ControllerState, TickReport)
    """
    placement_cfg = placement_cfg or PlacementConfig()
    solver_cfg = solver_cfg or SolverConfig()
    cfg = controller_cfg or ControllerConfig()
    start = clock()

    q_current = chain.as_joint_vector(state.q_current)
    world_up = placement_cfg.world_up
    zones = _active_zones(zone, cfg, world_up)
    constraints = set()

    degenerate_view = False
    try:
        naive = compute_naive_pose(feature, placement_cfg)
    except DegenerateViewError:
        degenerate_view = True
        logger.warning("tick %d: degenerate view, holding previous camera x-axis",
                       state.tick_index)
        naive = compute_naive_pose(feature, placement_cfg, fallback_x_axis=state.last_valid_x_axis)
    fallback = state.last_valid_x_axis

    target, hit = _apply_workspace(naive, zones, feature, placement_cfg, cfg.zone_margin, fallback)
    constraints |= hit
    if proximity_violated(target.translation, feature, cfg.proximity_min):
        constraints.add(Constraint.PROXIMITY)
    side_ok = check_orientation_side(target, placement_cfg)
    if not side_ok:
        constraints.add(Constraint.SIDE_ORIENTATION)

    current_pose = forward_kinematics(chain, q_current)
    setpoint = interpolate_cartesian(current_pose, target, cfg.step_limit)
    setpoint, hit = _apply_workspace(setpoint, zones, feature, placement_cfg,
                                     cfg.zone_margin, fallback)
    constraints |= hit

    ik_target = _clear_of_zones(setpoint, zones, cfg.ik_clearance)
    ik = ik_newton(chain, ik_target, q_current, tol=cfg.newton_tol, max_iter=cfg.newton_max_iter)
    newton_failed = not ik.success
    use_constrained = newton_failed
    if ik.success and not within_joint_limits(chain, ik.q):
        constraints.add(Constraint.JOINT_LIMIT)
        use_constrained = True
    if not side_ok and cfg.side_policy == 'constrained':
        use_constrained = True

    ctx = ObjectiveContext(chain, feature, ik_target.translation, solver_cfg, world_up)
    solve_report = None
    if use_constrained:
        q_target, solve_report = solve_constrained_ik(q_current, ctx)
        solver_used = SOLVER_CONSTRAINED
        logger.debug("tick %d: constrained IK (%s), constraints %s", state.tick_index,
                     solve_report.termination.value, sorted(c.value for c in constraints))
    else:
        q_target = ik.q
        solver_used = SOLVER_NEWTON

    duration = max(cfg.dt, float(np.linalg.norm(q_target - q_current)) / cfg.max_joint_speed)
    trajectory = quintic_joint_trajectory(q_current, state.q_velocity, state.q_acceleration,
                                          q_target, duration)
    q_command = trajectory.position(cfg.dt)
    q_velocity = trajectory.velocity(cfg.dt)
    q_acceleration = trajectory.acceleration(cfg.dt)
    clipped = (q_command < chain.q_lower) | (q_command > chain.q_upper)
    if np.any(clipped):
        q_command = np.clip(q_command, chain.q_lower, chain.q_upper)
        q_velocity = np.where(clipped, 0.0, q_velocity)
        q_acceleration = np.where(clipped, 0.0, q_acceleration)

    held = snapped = False
    if not _is_safe(chain, q_command, zones):
        if within_joint_limits(chain, q_target) and _is_safe(chain, q_target, zones):
            q_command = q_target.copy()
            snapped = True
        else:
            q_command = q_current.copy()
            held = True
        q_velocity = np.zeros(chain.dof)
        q_acceleration = np.zeros(chain.dof)

    q_achieved = q_command
    if cfg.lag_time_constant > 0 or cfg.tracking_noise_std > 0:
        q_achieved = _track(q_current, q_command, chain, cfg, state)
        if not _is_safe(chain, q_achieved, zones):
            q_command = q_achieved = q_current.copy()
            q_velocity = np.zeros(chain.dof)
            q_acceleration = np.zeros(chain.dof)
            held = True
    if held:
        logger.warning("tick %d: commanded camera position unsafe, holding joints",
                       state.tick_index)

    achieved_pose = forward_kinematics(chain, q_achieved)
    try:
        breakdown = objective(q_command, ctx)
    except GeometryError:
        breakdown = None

    new_state = replace(
        state,
        q_current=q_achieved.copy(),
        q_velocity=q_velocity,
        q_acceleration=q_acceleration,
        last_valid_x_axis=setpoint.x_axis.copy() if not degenerate_view else state.last_valid_x_axis,
        tick_index=state.tick_index + 1,
    )
    report = TickReport(
        tick_index=state.tick_index,
        naive_pose=naive,
        commanded_pose=setpoint,
        achieved_pose=achieved_pose,
        q_command=q_command,
        q_achieved=q_achieved,
        constraints_hit=frozenset(constraints),
        solver_used=solver_used,
        objective=breakdown,
        solve_report=solve_report,
        newton_failed=newton_failed,
        newton_iterations=ik.iterations,
        degenerate_view=degenerate_view,
        held=held,
        snapped=snapped,
        loop_time=clock() - start,
    )
    return new_state, report


def _track(q_current, q_command, chain, cfg, state):
    """First-order lag toward the command plus seeded tracking noise."""
    if cfg.lag_time_constant > 0:
        alpha = 1.0 - np.exp(-cfg.dt / cfg.lag_time_constant)
        q = q_current + alpha * (q_command - q_current)
    else:
        q = q_command.copy()
    if cfg.tracking_noise_std > 0:
        rng = np.random.default_rng(state.rng_seed + state.tick_index)
        q = q + rng.normal(0.0, cfg.tracking_noise_std, size=q.shape)
    return np.clip(q, chain.q_lower, chain.q_upper)


class CameraController:
    """Stateful wrapper that owns the controller state for a scenario run."""

    def __init__(self, chain, placement_cfg=None, solver_cfg=None, controller_cfg=None,
                 zone=None, q0=None, rng_seed=0, clock=time.perf_counter):
        self.chain = chain
        self.placement_cfg = placement_cfg or PlacementConfig()
        self.solver_cfg = solver_cfg or SolverConfig()
        self.controller_cfg = controller_cfg or ControllerConfig()
        self.zone = zone
        self.clock = clock
        q0 = chain.home if q0 is None else q0
        if not within_joint_limits(chain, q0):
            raise ControllerError("initial joints are outside the joint limits")
        self.state = ControllerState.at_rest(chain, q0, rng_seed)

        p0 = forward_kinematics(chain, q0).translation
        for tag, z in _active_zones(zone, self.controller_cfg, self.placement_cfg.world_up):
            if z.contains(p0):
                logger.warning("initial camera position is inside the %s constraint", tag.value)

    def step(self, feature):
        self.state, report = tick(self.state, feature, self.zone, self.chain,
                                  self.placement_cfg, self.solver_cfg, self.controller_cfg,
                                  clock=self.clock)
        return report
