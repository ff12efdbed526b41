"""Per-tick CSV log and summary JSON.

CSV column order (stable): tick and time, the feature pose, the naive,
commanded and achieved camera poses (12 values each, rotation row-major then
translation), commanded and achieved joints, controller flags, the objective
breakdown at the commanded joints, the metric columns, and finally the raw
loop time in seconds.
"""
import csv
import json
import logging
import math
import os
from dataclasses import dataclass

from geometry import pose_from_row, pose_to_row
from metrics import RECORD_FIELDS, record_from_row, record_to_row
from placement import FeatureState

logger = logging.getLogger(__name__)

POSE_PREFIXES = ('feature', 'naive', 'commanded', 'achieved')
OBJECTIVE_FIELDS = ('c_ps', 'c_or', 'c_v', 'c_per', 'c_d', 'total')
FLAG_FIELDS = ('newton_failed', 'degenerate_view', 'held', 'snapped')
TIMING_COLUMNS = ('lt_ms', 'loop_time')


class ReportError(RuntimeError):
    """I/O failure while reading or writing a report; the message starts with the path."""


def pose_columns(prefix):
    rotation = [f'{prefix}_r{i}{j}' for i in range(3) for j in range(3)]
    return rotation + [f'{prefix}_t{k}' for k in 'xyz']


def _format(value):
    if isinstance(value, bool):
        return '1' if value else '0'
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def build_tick_row(report, feature, record):
    """Flatten one tick (TickReport, FeatureState, MetricsRecord) into a CSV row dict."""
    row = {'tick': record.tick, 'time': record.time}
    poses = (feature.pose, report.naive_pose, report.commanded_pose, report.achieved_pose)
    for prefix, pose in zip(POSE_PREFIXES, poses):
        row.update(zip(pose_columns(prefix), (float(v) for v in pose_to_row(pose))))
    for i, value in enumerate(report.q_command):
        row[f'q_command_{i + 1}'] = float(value)
    for i, value in enumerate(report.q_achieved):
        row[f'q_achieved_{i + 1}'] = float(value)
    for name in FLAG_FIELDS:
        row[name] = bool(getattr(report, name))
    row['newton_iterations'] = int(report.newton_iterations)
    row['solver_termination'] = (report.solve_report.termination.value
                                 if report.solve_report is not None else '')
    for name in OBJECTIVE_FIELDS:
        row[f'obj_{name}'] = float(getattr(report.objective, name)) if report.objective else math.nan
    for name, value in record_to_row(record).items():
        if name not in ('tick', 'time'):
            row[name] = value
    row['loop_time'] = float(report.loop_time)
    return row


def write_tick_csv(path, rows):
    """Write per-tick rows; floats use repr so they read back bit-identical."""
    rows = list(rows)
    if not rows:
        raise ReportError(f"{path}: no rows to write")
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()), lineterminator='\n')
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _format(v) for k, v in row.items()})
    except OSError as e:
        raise ReportError(f"{path}: cannot write tick log: {e}") from e
    logger.info("wrote %d ticks to %s", len(rows), path)
    return path


def read_tick_csv(path):
    """Rows of a per-tick CSV as string dicts."""
    try:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            rows = list(csv.DictReader(f))
    except OSError as e:
        raise ReportError(f"{path}: cannot read tick log: {e}") from e
    if not rows:
        raise ReportError(f"{path}: tick log is empty")
    missing = [c for c in RECORD_FIELDS + tuple(pose_columns('achieved')) if c not in rows[0]]
    if missing:
        raise ReportError(f"{path}: not a tick log, missing columns {missing[:5]}")
    return rows


def records_from_rows(rows):
    """MetricsRecords exactly as they were logged."""
    return [record_from_row(row) for row in rows]


@dataclass(frozen=True, eq=False)
class LoggedTick:
    """The parts of a TickReport the metrics need, rebuilt from a CSV row."""

    tick_index: int
    time: float
    feature: FeatureState
    naive_pose: object
    commanded_pose: object
    achieved_pose: object
    constraints_hit: tuple
    solver_used: str
    solver_evaluations: int
    loop_time: float


def logged_tick_from_row(row):
    def pose(prefix):
        return pose_from_row([float(row[c]) for c in pose_columns(prefix)])

    return LoggedTick(
        tick_index=int(row['tick']),
        time=float(row['time']),
        feature=FeatureState(pose('feature')),
        naive_pose=pose('naive'),
        commanded_pose=pose('commanded'),
        achieved_pose=pose('achieved'),
        constraints_hit=tuple(c for c in row['constraints'].split('|') if c),
        solver_used=row['solver_used'],
        solver_evaluations=int(row['solver_evaluations']),
        loop_time=float(row['loop_time']),
    )


def json_safe(value):
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_summary_json(path, summary):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(json_safe(summary), f, indent=2, allow_nan=False)
            f.write('\n')
    except OSError as e:
        raise ReportError(f"{path}: cannot write summary: {e}") from e
    logger.info("wrote summary to %s", path)
    return path

