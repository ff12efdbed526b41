"""Central defaults for the camera-placement simulator.

All values use SI units (meters, radians, seconds) unless the name says
otherwise. Coordinate system: the endoscope (ECM) frame doubles as the world
frame, z-up.
"""
import dataclasses
import math
from pathlib import Path

import numpy as np

PROJECT_ROOT = Path(__file__).resolve().parent
CHAINS_DIR = PROJECT_ROOT / "chains"
SCENARIOS_DIR = PROJECT_ROOT / "scenarios"
DEFAULT_CHAIN_FILE = CHAINS_DIR / "rcm_camera_arm.json"

SCENARIO_SCHEMA_VERSION = 1

# ============================================================================
# Placement
# ============================================================================

DESIRED_DISTANCE = 0.11            # d_t
WORLD_UP = np.array([0.0, 0.0, 1.0])
PREFERRED_SIDE_AXIS = np.array([1.0, 0.0, 0.0])
SIDE_ANGLE_LIMIT = math.pi / 2.0
DEGENERATE_VIEW_ANGLE = math.radians(0.5)

# ============================================================================
# Workspace
# ============================================================================

PROXIMITY_MIN_DISTANCE = 0.08
ZONE_MARGIN = 0.0
# Minimum distance kept between the IK target and any zone face.
IK_ZONE_CLEARANCE = 1e-5

# ============================================================================
# Inverse kinematics
# ============================================================================

NEWTON_TOL = 1e-6
NEWTON_MAX_ITER = 50
NEWTON_DAMPING = 1e-6
NEWTON_MAX_DAMPING = 1e-1
NEWTON_MAX_CONDITION = 1e8

# Constrained IK cost weights w1..w5 and Huber thresholds delta1..delta3
COST_WEIGHTS = (15.0, 30.0, 25.0, 2.0, 0.5)
HUBER_DELTAS = (0.01, 0.17, 0.02)
SOLVER_MAX_EVALS = 50
SOLVER_FTOL = 5e-4

# ============================================================================
# Controller
# ============================================================================

TICK_RATE_HZ = 100.0
CARTESIAN_STEP_LIMIT = 0.015
MAX_JOINT_SPEED = 0.5

# ============================================================================
# Camera (stereo pair)
# ============================================================================

IMAGE_WIDTH_PX = 1280
IMAGE_HEIGHT_PX = 960
HFOV_DEG = 62.2
VFOV_DEG = 48.8
STEREO_BASELINE = 0.015
FOV_CHECK_TOLERANCE_DEG = 0.1

SHARPEN_ALPHA = 1.0
SHARPEN_SIGMA = 1.5

# ============================================================================
# Logging
# ============================================================================

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def get_tick_period() -> float:
    """Nominal controller tick period in seconds."""
    return 1.0 / TICK_RATE_HZ


def get_solver_defaults() -> dict:
    """Constrained IK defaults keyed the way scenario files spell them."""
    w1, w2, w3, w4, w5 = COST_WEIGHTS
    d1, d2, d3 = HUBER_DELTAS
    return {
        'w1': w1, 'w2': w2, 'w3': w3, 'w4': w4, 'w5': w5,
        'delta1': d1, 'delta2': d2, 'delta3': d3,
        'd_t': DESIRED_DISTANCE,
        'max_evals': SOLVER_MAX_EVALS,
        'ftol': SOLVER_FTOL,
    }


class ConfigError(ValueError):
    """Raised for malformed configuration values and scenario files."""


def check_keys(section: str, data: dict, allowed) -> None:
    """Reject keys a config section does not know about."""
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")


def as_number(section: str, key: str, value, kind=float):
    """Convert a config value to ``kind`` (float or int), accepting numeric strings."""
    try:
        number = float(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{section}: '{key}' must be a number, got {value!r}") from e
    if kind is int:
        if not number.is_integer():
            raise ConfigError(f"{section}: '{key}' must be an integer, got {value!r}")
        return int(number)
    return number


def build_section(cls, section: str, data: dict):
    """Construct a config dataclass from an already key-checked dict.

    Fields declared ``float`` or ``int`` are converted first; any remaining
    type mismatch surfaces as ConfigError.
    """
    kinds = {f.name: f.type for f in dataclasses.fields(cls)}
    values = dict(data)
    for key, value in data.items():
        kind = kinds.get(key)
        if value is not None and kind in (float, int):
            values[key] = as_number(section, key, value, kind)
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"{section}: {e}") from e
