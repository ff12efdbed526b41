import pytest
import numpy as np
import sys
import os

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import config
from tests.chains import make_gantry_chain
from geometry import Pose, rotation_angle
from kinematics import forward_kinematics, within_joint_limits
from placement import PlacementConfig, FeatureState, compute_naive_pose
from workspace import NoGoZone
from controller import (Constraint, ControllerConfig, ControllerError, ControllerState,
                        CameraController, SOLVER_NEWTON, SOLVER_CONSTRAINED, tick,
                        interpolate_cartesian, quintic_joint_trajectory)


def _feature(position=(0.0, 0.0, 0.0), normal=(-1.0, 0.0, 0.0)):
    return FeatureState.from_position_normal(position, normal)


def _box(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    normals = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
    points = [hi, lo, hi, lo, hi, lo]
    return NoGoZone(normals, points, interior_point=(lo + hi) / 2.0, name="box")


def test_quintic_boundary_conditions():
    q0 = np.array([0.0, 1.0])
    v0 = np.array([0.2, -0.1])
    a0 = np.array([0.0, 0.5])
    q1 = np.array([0.5, 0.0])
    traj = quintic_joint_trajectory(q0, v0, a0, q1, 2.0)
    assert np.allclose(traj.position(0.0), q0)
    assert np.allclose(traj.velocity(0.0), v0)
    assert np.allclose(traj.acceleration(0.0), a0)
    assert np.allclose(traj.position(2.0), q1)
    assert np.allclose(traj.velocity(2.0), 0.0, atol=1e-12)
    assert np.allclose(traj.acceleration(2.0), 0.0, atol=1e-12)
    # 区間外は端点にクリップ
    assert np.allclose(traj.position(5.0), q1)
    with pytest.raises(ControllerError):
        quintic_joint_trajectory(q0, v0, a0, q1, 0.0)


def test_quintic_boundary_conditions_random():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        q0, v0, a0, q1 = (rng.uniform(-1.0, 1.0, n) for _ in range(4))
        T = float(rng.uniform(0.1, 2.0))
        traj = quintic_joint_trajectory(q0, v0, a0, q1, T)
        assert np.allclose(traj.position(0.0), q0, rtol=0.0, atol=1e-10)
        assert np.allclose(traj.velocity(0.0), v0, rtol=0.0, atol=1e-10)
        assert np.allclose(traj.acceleration(0.0), a0, rtol=0.0, atol=1e-10)
        assert np.allclose(traj.position(T), q1, rtol=0.0, atol=1e-10)
        assert np.allclose(traj.velocity(T), 0.0, rtol=0.0, atol=1e-10)
        assert np.allclose(traj.acceleration(T), 0.0, rtol=0.0, atol=1e-10)


def test_interpolation_limits_step():
    current = Pose.identity()
    desired = Pose(np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
                   [0.1, 0.0, 0.0])
    step = interpolate_cartesian(current, desired, 0.015)
    assert np.linalg.norm(step.translation) == pytest.approx(0.015)
    # 回転も同じ割合だけ進む
    assert rotation_angle(current.rotation, step.rotation) == pytest.approx(np.pi / 2 * 0.15)
    assert interpolate_cartesian(current, Pose.from_translation([0.01, 0, 0]), 0.015).translation[0] \
        == pytest.approx(0.01)
    with pytest.raises(ControllerError):
        interpolate_cartesian(current, desired, 0.0)


def test_fixed_point_at_naive_pose():
    chain = make_gantry_chain()
    state = ControllerState.at_rest(chain, chain.home)
    feature = _feature()
    new_state, report = tick(state, feature, None, chain)
    assert report.constraints_hit == frozenset()
    assert report.solver_used == SOLVER_NEWTON
    assert not report.with_constraints
    assert not report.newton_failed
    assert np.allclose(report.q_command, chain.home, atol=1e-12)
    naive = compute_naive_pose(feature, PlacementConfig())
    assert np.allclose(report.achieved_pose.translation, naive.translation, atol=1e-12)
    assert report.objective.total == pytest.approx(0.0, abs=1e-9)
    assert new_state.tick_index == 1


def test_controller_converges_to_moved_feature():
    chain = make_gantry_chain()
    controller = CameraController(chain)
    feature = _feature((0.0, 0.05, 0.02))
    reports = [controller.step(feature) for _ in range(300)]
    assert all(r.solver_used == SOLVER_NEWTON for r in reports)
    final = reports[-1].achieved_pose.translation
    assert np.allclose(final, [-0.11, 0.05, 0.02], atol=1e-4)
    # 指令姿勢は直前の到達位置から step_limit 以内
    previous = [forward_kinematics(chain, chain.home).translation] + \
        [r.achieved_pose.translation for r in reports[:-1]]
    for before, r in zip(previous, reports):
        assert np.linalg.norm(r.commanded_pose.translation - before) <= config.CARTESIAN_STEP_LIMIT + 1e-9


def test_zone_is_never_entered():
    chain = make_gantry_chain()
    zone = _box([-0.115, -0.02, -0.02], [-0.095, 0.02, 0.02])
    cfg = ControllerConfig(zone_margin=0.0)
    controller = CameraController(chain, controller_cfg=cfg, zone=zone,
                                  q0=[-0.125, 0.0, 0.0, 0.0])
    feature = _feature()
    reports = [controller.step(feature) for _ in range(60)]
    assert Constraint.NO_GO_ZONE in reports[0].constraints_hit
    assert reports[0].with_constraints
    for r in reports:
        assert not zone.contains(r.achieved_pose.translation)
        assert not zone.contains(r.commanded_pose.translation)
    assert reports[-1].achieved_pose.translation[0] == pytest.approx(-0.115, abs=1e-4)


def test_default_config_commands_pose_on_zone_face():
    chain = make_gantry_chain()
    zone = _box([-0.114, -0.02, -0.02], [-0.1, 0.02, 0.02])
    assert ControllerConfig().zone_margin == 0.0
    controller = CameraController(chain, zone=zone, q0=[-0.118, 0.0, 0.0, 0.0])
    reports = [controller.step(_feature()) for _ in range(100)]
    for r in reports:
        assert Constraint.NO_GO_ZONE in r.constraints_hit
        assert not r.held
        # 指令位置は最も近い面 (x = -0.114) の平面上にある
        d = zone.signed_distances(r.commanded_pose.translation)
        assert d[1] == pytest.approx(0.0, abs=1e-9)
        assert not zone.contains(r.achieved_pose.translation)
    assert reports[-1].achieved_pose.translation[0] == pytest.approx(-0.114, abs=1e-4)


def test_floor_constraint_flagged():
    chain = make_gantry_chain()
    cfg = ControllerConfig(floor_height=0.05)
    controller = CameraController(chain, controller_cfg=cfg, q0=[-0.11, 0.0, 0.1, 0.0])
    report = controller.step(_feature((0.0, 0.0, 0.0)))
    assert Constraint.BELOW_FLOOR in report.constraints_hit
    assert report.achieved_pose.translation[2] >= 0.05 - 1e-9


def test_joint_limit_switches_to_constrained_solver():
    chain = make_gantry_chain(y_limits=(-0.02, 0.02))
    controller = CameraController(chain)
    feature = _feature((0.0, 0.05, 0.0))
    reports = [controller.step(feature) for _ in range(40)]
    limited = [r for r in reports if Constraint.JOINT_LIMIT in r.constraints_hit]
    assert limited
    assert all(r.solver_used == SOLVER_CONSTRAINED for r in limited)
    assert all(r.solve_report is not None and r.solver_evaluations > 0 for r in limited)
    for r in reports:
        assert within_joint_limits(chain, r.q_command)


def test_side_policy_controls_solver_choice():
    chain = make_gantry_chain()
    placement = PlacementConfig(preferred_side_axis=[-1.0, 0.0, 0.0])
    feature = _feature()

    state = ControllerState.at_rest(chain, chain.home)
    _, logged = tick(state, feature, None, chain, placement_cfg=placement)
    assert Constraint.SIDE_ORIENTATION in logged.constraints_hit
    assert logged.solver_used == SOLVER_NEWTON

    strict = ControllerConfig(side_policy='constrained')
    _, solved = tick(state, feature, None, chain, placement_cfg=placement, controller_cfg=strict)
    assert solved.solver_used == SOLVER_CONSTRAINED


def test_degenerate_view_is_flagged_not_raised():
    chain = make_gantry_chain()
    controller = CameraController(chain)
    report = controller.step(_feature(normal=(0.0, 0.0, 1.0)))
    assert report.degenerate_view
    assert within_joint_limits(chain, report.q_command)


def test_tracking_noise_is_seeded():
    chain = make_gantry_chain()
    cfg = ControllerConfig(tracking_noise_std=1e-4, lag_time_constant=0.02)
    feature = _feature((0.0, 0.01, 0.0))
    runs = []
    for _ in range(2):
        controller = CameraController(chain, controller_cfg=cfg, rng_seed=42)
        runs.append(np.array([controller.step(feature).q_achieved for _ in range(10)]))
    assert np.array_equal(runs[0], runs[1])
    other = CameraController(chain, controller_cfg=cfg, rng_seed=43)
    assert not np.array_equal(runs[0], np.array([other.step(feature).q_achieved for _ in range(10)]))


def test_loop_time_uses_clock(mocker):
    chain = make_gantry_chain()
    clock = mocker.Mock(side_effect=[1.0, 1.25])
    controller = CameraController(chain, clock=clock)
    report = controller.step(_feature())
    assert report.loop_time == pytest.approx(0.25)


def test_controller_argument_checks():
    chain = make_gantry_chain()
    with pytest.raises(ControllerError):
        CameraController(chain, q0=[5.0, 0.0, 0.0, 0.0])
    with pytest.raises(ControllerError):
        ControllerConfig(side_policy='ignore')
    with pytest.raises(ValueError):
        ControllerConfig.from_dict({"gain": 1.0})
    assert ControllerConfig.from_dict({"floor_height": -0.06}).floor_height == -0.06
