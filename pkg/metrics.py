"""Per-tick tracking metrics and their All / WoC / WC summaries."""
import logging
import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import stats

import config
from geometry import angle_between, rotation_angle

logger = logging.getLogger(__name__)

SPLITS = ('All', 'WoC', 'WC')
SUMMARY_METRICS = (
    'vva_deg', 'fd_mm', 'fd_signed_mm', 'pf_deg', 'an_deg', 'pn_mm', 'lt_ms',
    'left_l2_pct', 'left_u_err_pct', 'left_v_err_pct',
    'right_l2_pct', 'right_u_err_pct', 'right_v_err_pct',
)
CONSTRAINT_TAGS = ('no_go_zone', 'below_floor', 'proximity', 'joint_limit', 'side_orientation')
# Placement metrics reported per constraint type and for constrained-solver ticks.
CONSTRAINT_METRICS = ('vva_deg', 'fd_mm', 'pf_deg', 'an_deg', 'pn_mm', 'lt_ms')


@dataclass(frozen=True)
class MetricsRecord:
    """One tick of tracking metrics (angles in degrees, lengths in millimeters)."""

    tick: int
    time: float
    vva_deg: float
    fd_mm: float
    fd_signed_mm: float
    pf_deg: float
    an_deg: float
    pn_mm: float
    lt_ms: float
    constraints: tuple
    solver_used: str
    solver_evaluations: int
    with_constraints: bool
    left_visible: bool
    right_visible: bool
    left_u: float
    left_v: float
    right_u: float
    right_v: float
    left_l2_pct: float
    left_u_err_pix: float
    left_u_err_pct: float
    left_v_err_pct: float
    right_l2_pct: float
    right_u_err_pix: float
    right_u_err_pct: float
    right_v_err_pct: float

    @property
    def visible_any(self):
        return self.left_visible or self.right_visible

    @property
    def visible_both(self):
        return self.left_visible and self.right_visible


def _observation_fields(prefix, obs):
    nan = math.nan
    if obs.uv is None:
        return {f'{prefix}_visible': False, f'{prefix}_u': nan, f'{prefix}_v': nan,
                f'{prefix}_l2_pct': nan, f'{prefix}_u_err_pix': nan,
                f'{prefix}_u_err_pct': nan, f'{prefix}_v_err_pct': nan}
    return {
        f'{prefix}_visible': obs.visible,
        f'{prefix}_u': float(obs.uv[0]),
        f'{prefix}_v': float(obs.uv[1]),
        f'{prefix}_l2_pct': obs.errors.l2_pct,
        f'{prefix}_u_err_pix': obs.errors.u_err_pix,
        f'{prefix}_u_err_pct': obs.errors.u_err_pct,
        f'{prefix}_v_err_pct': obs.errors.v_err_pct,
    }


def compute_metrics(report, feature, rig, d_t=config.DESIRED_DISTANCE,
                    world_up=config.WORLD_UP, time=0.0):
    """Tracking metrics for one tick.

    VVA, FD and PF are measured on the achieved camera pose; AN and PN compare
    the naive pose with the commanded pose. Projections use the achieved pose
    as the rig pose.
    """
    camera = report.achieved_pose
    to_feature = feature.translation - camera.translation
    distance = float(np.linalg.norm(to_feature))
    vva = math.degrees(angle_between(camera.z_axis, to_feature)) if distance > 0 else math.nan
    fd_signed = (distance - d_t) * 1000.0
    pf = abs(90.0 - math.degrees(angle_between(camera.x_axis, world_up)))
    an = math.degrees(rotation_angle(report.naive_pose.rotation, report.commanded_pose.rotation))
    pn = float(np.linalg.norm(report.naive_pose.translation - report.commanded_pose.translation)) * 1000.0

    left, right = rig.observe(camera, feature.translation)
    constraints = tuple(sorted(getattr(c, 'value', c) for c in report.constraints_hit))
    return MetricsRecord(
        tick=int(report.tick_index),
        time=float(time),
        vva_deg=vva,
        fd_mm=abs(fd_signed),
        fd_signed_mm=fd_signed,
        pf_deg=pf,
        an_deg=an,
        pn_mm=pn,
        lt_ms=float(report.loop_time) * 1000.0,
        constraints=constraints,
        solver_used=report.solver_used,
        solver_evaluations=int(report.solver_evaluations),
        with_constraints=bool(constraints) or report.solver_used == 'constrained',
        **_observation_fields('left', left),
        **_observation_fields('right', right),
    )


def _stats(values):
    arr = np.asarray([v for v in values if math.isfinite(v)], dtype=float)
    if arr.size == 0:
        return {'mean': None, 'std': None, 'count': 0}
    return {'mean': float(np.mean(arr)), 'std': float(np.std(arr)), 'count': int(arr.size)}


def _percent(flags):
    flags = list(flags)
    if not flags:
        return None
    return 100.0 * sum(bool(f) for f in flags) / len(flags)


def u_error_correlation(records):
    """Pearson correlation of left and right u-errors over ticks both cameras see."""
    pairs = [(r.left_u_err_pix, r.right_u_err_pix) for r in records
             if math.isfinite(r.left_u_err_pix) and math.isfinite(r.right_u_err_pix)]
    if len(pairs) < 3:
        return None
    left, right = np.array(pairs).T
    if np.ptp(left) == 0 or np.ptp(right) == 0:
        return None
    return float(stats.pearsonr(left, right)[0])


def _metric_stats(records):
    return {name: _stats(getattr(r, name) for r in records) for name in CONSTRAINT_METRICS}


def summarize(records):
    """Summary dict: per metric {All, WoC, WC} x {mean, std, count} plus visibility,
    constraint counts, constrained-solver statistics and the u-error correlation.

    ``by_constraint`` repeats the placement metrics over the ticks carrying each
    constraint tag; ``constrained_solver['metrics']`` does the same for ticks
    solved by the constrained optimizer.
    """
    records = list(records)
    splits = {
        'All': records,
        'WoC': [r for r in records if not r.with_constraints],
        'WC': [r for r in records if r.with_constraints],
    }
    metrics = {
        name: {split: _stats(getattr(r, name) for r in subset) for split, subset in splits.items()}
        for name in SUMMARY_METRICS
    }
    constrained = [r for r in records if r.solver_used == 'constrained']
    return {
        'ticks': len(records),
        'metrics': metrics,
        'visibility_pct': {
            'left': _percent(r.left_visible for r in records),
            'right': _percent(r.right_visible for r in records),
            'any': _percent(r.visible_any for r in records),
            'both': _percent(r.visible_both for r in records),
        },
        'constraint_counts': {
            tag: sum(tag in r.constraints for r in records) for tag in CONSTRAINT_TAGS
        },
        'by_constraint': {
            tag: _metric_stats([r for r in records if tag in r.constraints])
            for tag in CONSTRAINT_TAGS
        },
        'constrained_solver': {
            'count': len(constrained),
            'mean_lt_ms': _stats(r.lt_ms for r in constrained)['mean'],
            'mean_evaluations': _stats(r.solver_evaluations for r in constrained)['mean'],
            'metrics': _metric_stats(constrained),
        },
        'u_error_correlation': u_error_correlation(records),
    }


RECORD_FIELDS = tuple(f.name for f in fields(MetricsRecord))


def record_to_row(record):
    """Flat dict for the per-tick CSV (constraints joined with '|')."""
    row = asdict(record)
    row['constraints'] = '|'.join(record.constraints)
    return row


def record_from_row(row):
    """Inverse of record_to_row for string-valued CSV rows."""
    values = {}
    for f in fields(MetricsRecord):
        raw = row[f.name]
        if f.name == 'constraints':
            values[f.name] = tuple(c for c in raw.split('|') if c)
        elif f.name == 'solver_used':
            values[f.name] = raw
        elif f.type is bool or f.type == 'bool':
            values[f.name] = raw in ('1', 'True', 'true')
        elif f.type is int or f.type == 'int':
            values[f.name] = int(raw)
        else:
            values[f.name] = float(raw)
    return MetricsRecord(**values)
