"""Scenario files: loading, running the controller over a trajectory, replay and calibration."""
import csv
import json
import logging
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

import config
from camera import CameraConfig, StereoRig
from controller import CameraController, ControllerConfig
from geometry import register_paired_points
from kinematics import KinematicChain, load_default_chain
from metrics import compute_metrics, summarize
from optimizer import SolverConfig
from placement import PlacementConfig
from report import (ReportError, build_tick_row, logged_tick_from_row, read_tick_csv,
                    records_from_rows, write_summary_json, write_tick_csv)
from trajectory import TrajectorySpec, generate_trajectory
from workspace import NoGoZone

logger = logging.getLogger(__name__)

SCENARIO_KEYS = ('schema_version', 'name', 'description', 'chain', 'initial_joints', 'zone',
                 'placement', 'solver', 'controller', 'camera', 'trajectory', 'rng_seed',
                 'output')
OUTPUT_KEYS = ('directory', 'csv', 'summary')


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    chain: KinematicChain
    trajectory: TrajectorySpec
    zone: NoGoZone = None
    initial_joints: np.ndarray = None
    placement: PlacementConfig = field(default_factory=PlacementConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    rng_seed: int = 0
    output_dir: str = 'results'
    csv_name: str = None
    summary_name: str = None
    source_path: str = None

    @property
    def csv_path(self):
        return os.path.join(self.output_dir, self.csv_name or f'{self.name}_ticks.csv')

    @property
    def summary_path(self):
        return os.path.join(self.output_dir, self.summary_name or f'{self.name}_summary.json')


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    scenario: Scenario
    records: list
    summary: dict
    rows: list
    csv_path: str = None
    summary_path: str = None


def _resolve(base_dir, path):
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))


def scenario_from_dict(data, base_dir='.', seed=None, output_dir=None):
    """Build a Scenario from parsed JSON; relative paths resolve against base_dir."""
    config.check_keys('scenario', data, SCENARIO_KEYS)
    version = data.get('schema_version')
    if version != config.SCENARIO_SCHEMA_VERSION:
        raise config.ConfigError(
            f"unsupported schema_version {version!r} (expected {config.SCENARIO_SCHEMA_VERSION})")
    if 'trajectory' not in data:
        raise config.ConfigError("scenario needs a 'trajectory' section")

    if data.get('chain'):
        chain_path = _resolve(base_dir, data['chain'])
        if not os.path.exists(chain_path):
            raise ReportError(f"{chain_path}: chain file not found")
        chain = KinematicChain.from_json(chain_path)
    else:
        chain = load_default_chain()

    rng_seed = int(data.get('rng_seed', 0) if seed is None else seed)
    trajectory_data = dict(data['trajectory'])
    trajectory_data.setdefault('rng_seed', rng_seed)
    if seed is not None:
        trajectory_data['rng_seed'] = rng_seed
    controller = ControllerConfig.from_dict(data.get('controller'))
    trajectory_data.setdefault('dt', controller.dt)
    trajectory = TrajectorySpec.from_dict(trajectory_data, base_dir=base_dir)
    if trajectory.replay_path and not os.path.exists(trajectory.replay_path):
        raise ReportError(f"{trajectory.replay_path}: replay file not found")

    output = dict(data.get('output') or {})
    config.check_keys('output', output, OUTPUT_KEYS)
    if output_dir is None:
        output_dir = _resolve(base_dir, output.get('directory', 'results'))

    initial = data.get('initial_joints')
    zone = NoGoZone.from_dict(data['zone']) if data.get('zone') else None
    return Scenario(
        name=data.get('name', 'scenario'),
        chain=chain,
        trajectory=trajectory,
        zone=zone,
        initial_joints=None if initial is None else chain.as_joint_vector(initial),
        placement=PlacementConfig.from_dict(data.get('placement')),
        solver=SolverConfig.from_dict(data.get('solver')),
        controller=controller,
        camera=CameraConfig.from_dict(data.get('camera')),
        rng_seed=rng_seed,
        output_dir=output_dir,
        csv_name=output.get('csv'),
        summary_name=output.get('summary'),
    )


def load_scenario(path, seed=None, output_dir=None):
    """Read a scenario JSON file; ``seed``/``output_dir`` override the file's values."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        raise ReportError(f"{path}: cannot read scenario: {e}") from e
    except json.JSONDecodeError as e:
        raise config.ConfigError(f"{path}: invalid JSON: {e}") from e
    base_dir = os.path.dirname(os.path.abspath(path))
    try:
        scenario = scenario_from_dict(data, base_dir, seed, output_dir)
    except ValueError as e:
        raise type(e)(f"{path}: {e}") from e
    except TypeError as e:
        raise config.ConfigError(f"{path}: wrong value type: {e}") from e
    return replace(scenario, source_path=os.path.abspath(path))


def run_scenario(scenario, write=True, clock=time.perf_counter):
    """Drive the controller over the scenario trajectory and aggregate the metrics.

    Args:
        scenario: Scenario to run.
        write: Write the per-tick CSV and summary JSON.
        clock: Wall-clock source for loop times.

    Returns:
        ScenarioResult
    """
    logger.info("running scenario '%s' (seed %d)", scenario.name, scenario.rng_seed)
    samples = generate_trajectory(scenario.trajectory, scenario.placement.world_up)
    rig = StereoRig.from_config(scenario.camera)
    controller = CameraController(
        scenario.chain, scenario.placement, scenario.solver, scenario.controller,
        zone=scenario.zone, q0=scenario.initial_joints, rng_seed=scenario.rng_seed, clock=clock)

    records = []
    rows = []
    for sample in samples:
        report = controller.step(sample.feature)
        record = compute_metrics(report, sample.feature, rig, scenario.placement.d_t,
                                 scenario.placement.world_up, time=sample.time)
        records.append(record)
        rows.append(build_tick_row(report, sample.feature, record))

    summary = {'scenario': scenario.name, 'rng_seed': scenario.rng_seed}
    summary.update(summarize(records))
    result = ScenarioResult(scenario, records, summary, rows)
    if write:
        write_tick_csv(scenario.csv_path, rows)
        write_summary_json(scenario.summary_path, summary)
        result = replace(result, csv_path=scenario.csv_path, summary_path=scenario.summary_path)
    logger.info("scenario '%s' done: %d ticks, visibility %.2f%%", scenario.name,
                len(records), summary['visibility_pct']['any'] or 0.0)
    return result


def summarize_csv(path):
    """Summary from the metric columns of a stored tick log."""
    return summarize(records_from_rows(read_tick_csv(path)))


def replay_csv(path, scenario=None):
    """Recompute metrics from the logged poses and summarize them.

    Camera and placement settings come from ``scenario`` when given, defaults
    otherwise.
    """
    rows = read_tick_csv(path)
    placement = scenario.placement if scenario is not None else PlacementConfig()
    rig = StereoRig.from_config(scenario.camera if scenario is not None else None)
    records = []
    for row in rows:
        logged = logged_tick_from_row(row)
        records.append(compute_metrics(logged, logged.feature, rig, placement.d_t,
                                       placement.world_up, time=logged.time))
    return summarize(records)


def _is_numeric_row(row):
    try:
        np.array(row, dtype=float)
    except ValueError:
        return False
    return True


def load_paired_points(path):
    """Paired calibration points: CSV rows ax, ay, az, bx, by, bz (header optional)."""
    try:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            rows = [r for r in csv.reader(f)
                    if r and any(c.strip() for c in r) and not r[0].lstrip().startswith('#')]
    except OSError as e:
        raise ReportError(f"{path}: cannot read paired points: {e}") from e
    if rows and not _is_numeric_row(rows[0]):
        rows = rows[1:]
    if not rows or any(len(r) != 6 for r in rows):
        raise config.ConfigError(f"{path}: expected 6 columns (ax, ay, az, bx, by, bz)")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as e:
        raise config.ConfigError(f"{path}: paired points must be numeric: {e}") from e
    return data[:, :3], data[:, 3:]


def calibrate_from_file(path, refine_l1=False):
    """Register paired touch points from a file (arm A frame -> arm B frame)."""
    a_points, b_points = load_paired_points(path)
    result = register_paired_points(a_points, b_points, refine_l1=refine_l1)
    logger.info("calibration from %s: mean abs error %.3f mm over %d points",
                path, result.mean_abs_error * 1000.0, len(a_points))
    return result
