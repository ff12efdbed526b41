"""Constrained inverse kinematics: Huber-robust placement objective under joint bounds."""
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, minimize

import config
from geometry import GeometryError, cosine_similarity, unit_vector
from kinematics import forward_kinematics

logger = logging.getLogger(__name__)

# Objective value reported for configurations where the costs are undefined
# (camera origin on top of the feature).
INFEASIBLE_PENALTY = 1e6
ARMIJO_C = 1e-4


class OptimizerError(ValueError):
    """Raised for invalid solver configuration."""


class Termination(str, enum.Enum):
    FTOL = 'ftol'
    MAX_EVALS = 'max-evals'
    STALLED = 'stalled'


@dataclass(frozen=True)
class SolverConfig:
    w1: float = config.COST_WEIGHTS[0]
    w2: float = config.COST_WEIGHTS[1]
    w3: float = config.COST_WEIGHTS[2]
    w4: float = config.COST_WEIGHTS[3]
    w5: float = config.COST_WEIGHTS[4]
    delta1: float = config.HUBER_DELTAS[0]
    delta2: float = config.HUBER_DELTAS[1]
    delta3: float = config.HUBER_DELTAS[2]
    d_t: float = config.DESIRED_DISTANCE
    max_evals: int = config.SOLVER_MAX_EVALS
    ftol: float = config.SOLVER_FTOL

    def __post_init__(self):
        weights = (self.w1, self.w2, self.w3, self.w4, self.w5)
        if any(not w >= 0 for w in weights):
            raise OptimizerError(f"weights must be non-negative, got {weights}")
        deltas = (self.delta1, self.delta2, self.delta3)
        if any(not d > 0 for d in deltas):
            raise OptimizerError(f"huber deltas must be positive, got {deltas}")
        if not self.d_t > 0:
            raise OptimizerError("d_t must be positive")
        if int(self.max_evals) != self.max_evals or self.max_evals < 1:
            raise OptimizerError("max_evals must be an integer >= 1")
        if not self.ftol > 0:
            raise OptimizerError("ftol must be positive")

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        config.check_keys('solver', data, config.get_solver_defaults().keys())
        return config.build_section(cls, 'solver', data)


@dataclass(frozen=True)
class ObjectiveBreakdown:
    c_ps: float
    c_or: float
    c_v: float
    c_per: float
    c_d: float
    total: float

    def as_dict(self):
        return {'c_ps': self.c_ps, 'c_or': self.c_or, 'c_v': self.c_v,
                'c_per': self.c_per, 'c_d': self.c_d, 'total': self.total}


@dataclass(frozen=True, eq=False)
class ObjectiveContext:
    """Everything the objective needs besides q."""

    chain: object
    feature: object
    target_translation: np.ndarray
    solver_config: SolverConfig
    world_up: np.ndarray = config.WORLD_UP

    def __post_init__(self):
        object.__setattr__(self, 'target_translation',
                           np.asarray(self.target_translation, dtype=float).reshape(3))
        object.__setattr__(self, 'world_up', unit_vector(self.world_up))
        object.__setattr__(self, 'feature_translation',
                           np.asarray(self.feature.translation, dtype=float).reshape(3))

    @property
    def bounds(self):
        return self.chain.q_lower, self.chain.q_upper


def huber(x, delta):
    """Quadratic inside |x| <= delta, linear outside; C1 at the seam."""
    if not delta > 0:
        raise OptimizerError(f"huber delta must be positive, got {delta}")
    if np.ndim(x) == 0:
        ax = abs(float(x))
        return 0.5 * ax * ax if ax <= delta else delta * (ax - 0.5 * delta)
    ax = np.abs(x)
    return np.where(ax <= delta, 0.5 * np.square(x), delta * (ax - 0.5 * delta))


def huber_derivative(x, delta):
    if not delta > 0:
        raise OptimizerError(f"huber delta must be positive, got {delta}")
    x = float(x)
    return x if abs(x) <= delta else math.copysign(delta, x)


def cost_position(q, chain, target_translation):
    p = forward_kinematics(chain, q).translation
    return float(np.linalg.norm(p - np.asarray(target_translation, dtype=float)))


def _orientation_terms(cam_rot, cam_pos, feature_pos, world_up):
    c = unit_vector(feature_pos - cam_pos)
    c_v = 1.0 - cosine_similarity(cam_rot[:, 2], c)
    c_per = abs(cosine_similarity(cam_rot[:, 0], world_up))
    return c_v, c_per


def cost_orientation(q, chain, feature, world_up, w4, w5):
    """Compound orientation cost (c_or, c_v, c_per).

    c_v penalizes the optical axis missing the feature origin, c_per penalizes
    a non-horizontal camera x-axis.
    """
    cam = forward_kinematics(chain, q)
    c_v, c_per = _orientation_terms(cam.rotation, cam.translation, feature.translation,
                                    unit_vector(world_up))
    return w4 * 0.5 * c_v + w5 * c_per, c_v, c_per


def cost_distance(q, chain, feature, d_t):
    """Signed distance error ||feature - camera|| - d_t."""
    p = forward_kinematics(chain, q).translation
    return float(np.linalg.norm(feature.translation - p) - d_t)


def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def _evaluate(qv, ctx, with_gradient):
    """Cost terms, total and (optionally) gradient at a validated joint vector.

    Returns (c_ps, c_or, c_v, c_per, c_d, total, gradient-or-None).
    """
    cfg = ctx.solver_config
    chain = ctx.chain
    cam_rot, cam_pos, axes, origins = chain.camera_frame(qv)

    to_target = cam_pos - ctx.target_translation
    c_ps = math.sqrt(to_target @ to_target)
    to_feature = ctx.feature_translation - cam_pos
    dist = math.sqrt(to_feature @ to_feature)
    if dist < 1e-12:
        raise GeometryError("camera origin coincides with the feature")
    c_hat = to_feature / dist
    z_c = cam_rot[:, 2]
    x_c = cam_rot[:, 0]
    cos_v = min(1.0, max(-1.0, float(z_c @ c_hat)))
    x_up = float(x_c @ ctx.world_up)
    c_v = 1.0 - cos_v
    c_per = abs(x_up)
    c_d = dist - cfg.d_t
    c_or = cfg.w4 * 0.5 * c_v + cfg.w5 * c_per

    total = (cfg.w1 * huber(c_ps, cfg.delta1)
             + cfg.w2 * huber(c_or, cfg.delta2)
             + cfg.w3 * huber(c_d, cfg.delta3))
    if not with_gradient:
        return c_ps, c_or, c_v, c_per, c_d, total, None

    jac = chain.jacobian_from_frames(cam_pos, axes, origins)
    jv, jw = jac[:3], jac[3:]
    s_ps = huber_derivative(c_ps, cfg.delta1)
    s_or = huber_derivative(c_or, cfg.delta2)
    s_d = huber_derivative(c_d, cfg.delta3)
    # Linear-velocity and angular-velocity parts of d(total)/dq, pulled back
    # through the Jacobian once.
    lin = -cfg.w3 * s_d * c_hat
    if c_ps > 1e-15:
        lin = lin + (cfg.w1 * s_ps / c_ps) * to_target
    k_or = cfg.w2 * s_or
    lin = lin + (k_or * cfg.w4 * 0.5 / dist) * (z_c - cos_v * c_hat)
    ang = (-k_or * cfg.w4 * 0.5) * _cross(z_c, c_hat)
    if x_up != 0.0:
        ang = ang + (k_or * cfg.w5 * math.copysign(1.0, x_up)) * _cross(x_c, ctx.world_up)
    gradient = jv.T @ lin + jw.T @ ang
    return c_ps, c_or, c_v, c_per, c_d, total, gradient


def objective(q, ctx):
    """Weighted Huber combination of the position, orientation and distance costs."""
    terms = _evaluate(ctx.chain.as_joint_vector(q), ctx, with_gradient=False)
    return ObjectiveBreakdown(*(float(v) for v in terms[:6]))


def objective_gradient(q, ctx):
    """Analytic gradient of objective(q, ctx).total with respect to q."""
    return _evaluate(ctx.chain.as_joint_vector(q), ctx, with_gradient=True)[6]


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    evaluations: int
    initial_total: float
    final_total: float
    termination: Termination
    improved: bool
    seed_clamped: bool


class _EvaluationBudgetExceeded(Exception):
    pass


class _BudgetedObjective:
    """Counts evaluations, clips every query into the bounds and keeps the best point."""

    def __init__(self, ctx, lower, upper, max_evals):
        self.ctx = ctx
        self.lower = lower
        self.upper = upper
        self.max_evals = max_evals
        self.evaluations = 0
        self.best_q = None
        self.best_total = np.inf
        self._last_q = None
        self._last = None

    @property
    def remaining(self):
        return self.max_evals - self.evaluations

    def __call__(self, q):
        q = np.minimum(np.maximum(np.asarray(q, dtype=float), self.lower), self.upper)
        if self._last_q is not None and (q == self._last_q).all():
            return self._last
        if self.evaluations >= self.max_evals:
            raise _EvaluationBudgetExceeded()
        self.evaluations += 1
        try:
            *_, value, gradient = _evaluate(q, self.ctx, with_gradient=True)
        except GeometryError:
            value, gradient = INFEASIBLE_PENALTY, np.zeros_like(q)
        if not np.isfinite(value):
            value, gradient = INFEASIBLE_PENALTY, np.zeros_like(q)
        if value < self.best_total:
            self.best_total = value
            self.best_q = q
        self._last_q = q
        self._last = (value, gradient)
        return value, gradient


def _projected_gradient(fun, q, value, gradient, ftol):
    """Armijo-backtracking projected gradient descent until the budget runs out."""
    iterations = 0
    step = 1.0
    while True:
        iterations += 1
        while True:
            candidate = np.clip(q - step * gradient, fun.lower, fun.upper)
            moved = q - candidate
            if not np.any(moved):
                return iterations, Termination.STALLED
            cand_value, cand_gradient = fun(candidate)
            if cand_value <= value - ARMIJO_C * np.dot(gradient, moved):
                break
            step *= 0.5
            if step < 1e-12:
                return iterations, Termination.STALLED
        converged = abs(value - cand_value) < ftol
        q, value, gradient = candidate, cand_value, cand_gradient
        if converged:
            return iterations, Termination.FTOL
        step = min(step * 2.0, 1.0)


def solve_constrained_ik(q_seed, ctx):
    """Minimize the placement objective over the chain's joint-limit box.

    Seeded with ``q_seed`` (clamped into bounds when outside). The returned
    joint vector always lies inside the bounds and is never worse than the
    clamped seed.

    Returns:
        (q_star, SolveReport)
    """
    cfg = ctx.solver_config
    lower, upper = ctx.bounds
    seed = ctx.chain.as_joint_vector(q_seed)
    q0 = np.clip(seed, lower, upper)
    seed_clamped = not np.array_equal(q0, seed)
    if seed_clamped:
        logger.warning("constrained IK seed outside joint limits; clamped")

    fun = _BudgetedObjective(ctx, lower, upper, int(cfg.max_evals))
    initial_total, initial_gradient = fun(q0)
    iterations = 0
    termination = Termination.MAX_EVALS

    try:
        result = minimize(fun, q0, jac=True, method='SLSQP', bounds=Bounds(lower, upper),
                          options={'maxiter': int(cfg.max_evals), 'ftol': cfg.ftol})
        iterations = int(result.nit)
        if result.status == 0:
            termination = Termination.FTOL
        elif result.status == 9:
            termination = Termination.MAX_EVALS
        else:
            termination = Termination.STALLED
            logger.debug("SLSQP stopped: %s", result.message)
    except _EvaluationBudgetExceeded:
        termination = Termination.MAX_EVALS

    if termination is Termination.STALLED and fun.best_total >= initial_total and fun.remaining > 0:
        try:
            extra, termination = _projected_gradient(fun, q0, initial_total, initial_gradient, cfg.ftol)
            iterations += extra
        except _EvaluationBudgetExceeded:
            termination = Termination.MAX_EVALS

    q_star = np.clip(fun.best_q, lower, upper)
    report = SolveReport(
        iterations=iterations,
        evaluations=fun.evaluations,
        initial_total=float(initial_total),
        final_total=float(fun.best_total),
        termination=termination,
        improved=bool(fun.best_total < initial_total),
        seed_clamped=seed_clamped,
    )
    logger.debug("constrained IK: %s after %d evals, total %.6g -> %.6g",
                 termination.value, fun.evaluations, initial_total, fun.best_total)
    return q_star, report
