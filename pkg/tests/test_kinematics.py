import pytest
import numpy as np
import sys
import os
import json

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from scipy.spatial.transform import Rotation

from geometry import Pose, rotation_angle
from kinematics import (KinematicChain, KinematicsError, load_default_chain, forward_kinematics,
                        jacobian, ik_newton, within_joint_limits, pose_error)


def test_planar_forward_kinematics(planar_chain):
    p = forward_kinematics(planar_chain, [0.0, np.pi / 2])
    assert np.allclose(p.translation, [0.1, 0.1, 0.0], atol=1e-12)
    assert np.allclose(p.x_axis, [0.0, 1.0, 0.0], atol=1e-12)
    # ツールなしはフランジ (第2関節の位置)
    flange = forward_kinematics(planar_chain, [0.0, np.pi / 2], include_tool=False)
    assert np.allclose(flange.translation, [0.1, 0.0, 0.0], atol=1e-12)


def test_dimension_mismatch_raises(planar_chain):
    with pytest.raises(KinematicsError):
        forward_kinematics(planar_chain, [0.0, 0.0, 0.0])


def test_malformed_chain_definitions():
    with pytest.raises(KinematicsError):
        KinematicChain.from_dict({"joints": []})
    with pytest.raises(KinematicsError):
        KinematicChain.from_dict({"joints": [{"type": "spherical", "axis": [0, 0, 1],
                                              "limits": [-1, 1]}]})
    with pytest.raises(KinematicsError):
        KinematicChain.from_dict({"joints": [{"axis": [0, 0, 1], "limits": [1, -1]}]})
    with pytest.raises(KinematicsError):
        KinematicChain.from_dict({"joints": [{"axis": [0, 0, 0], "limits": [-1, 1]}]})


def test_chain_limits_are_read_only(planar_chain):
    with pytest.raises(ValueError):
        planar_chain.q_lower[0] = 0.0


def test_chain_from_json(mocker):
    data = {"name": "one", "joints": [{"axis": [0, 0, 1], "limits": [-1, 1]}]}
    mocker.patch("builtins.open", mocker.mock_open(read_data=json.dumps(data)))
    chain = KinematicChain.from_json("/dummy/chain.json")
    assert chain.name == "one"
    assert chain.dof == 1
    assert np.allclose(chain.home, [0.0])


def test_default_chain_home_matches_naive_view():
    chain = load_default_chain()
    assert chain.dof == 6
    assert within_joint_limits(chain, chain.home)
    cam = forward_kinematics(chain, chain.home)
    # 原点の特徴 (法線 -x) を 0.11 m 手前から水平に見る姿勢
    assert np.allclose(cam.translation, [-0.11, 0.0, 0.0], atol=1e-3)
    assert np.allclose(cam.z_axis, [1.0, 0.0, 0.0], atol=1e-3)
    assert np.allclose(cam.x_axis, [0.0, 1.0, 0.0], atol=1e-3)


def test_jacobian_matches_finite_differences():
    chain = load_default_chain()
    q = chain.home + np.array([0.1, -0.05, 0.02, 0.3, 0.2, -0.4])
    jac = jacobian(chain, q)
    h = 1e-6
    base = forward_kinematics(chain, q)
    for i in range(chain.dof):
        dq = np.zeros(chain.dof)
        dq[i] = h
        moved = forward_kinematics(chain, q + dq)
        lin = (moved.translation - base.translation) / h
        ang = Rotation.from_matrix(moved.rotation @ base.rotation.T).as_rotvec() / h
        assert np.allclose(jac[:3, i], lin, atol=1e-5)
        assert np.allclose(jac[3:, i], ang, atol=1e-5)


def test_jacobian_relative_error_at_random_configurations():
    chain = load_default_chain()
    rng = np.random.default_rng(6)
    h = 1e-6
    for _ in range(200):
        q = rng.uniform(chain.q_lower, chain.q_upper)
        jac = jacobian(chain, q)
        numeric = np.zeros_like(jac)
        for i in range(chain.dof):
            dq = np.zeros(chain.dof)
            dq[i] = h
            plus = forward_kinematics(chain, q + dq)
            minus = forward_kinematics(chain, q - dq)
            numeric[:3, i] = (plus.translation - minus.translation) / (2 * h)
            numeric[3:, i] = Rotation.from_matrix(plus.rotation @ minus.rotation.T).as_rotvec() / (2 * h)
        # 中心差分との相対誤差
        assert np.max(np.abs(jac - numeric)) / np.max(np.abs(jac)) < 1e-5


def test_within_joint_limits_is_inclusive(planar_chain):
    assert within_joint_limits(planar_chain, [3.0, -3.0])
    assert not within_joint_limits(planar_chain, [3.0 + 1e-9, 0.0])


def test_pose_error_zero_for_same_pose():
    p = Pose.from_xyz_rpy((0.1, 0.2, 0.3), (0.1, 0.2, 0.3))
    assert np.allclose(pose_error(p, p), 0.0)


def test_newton_recovers_reachable_pose(planar_chain):
    target = forward_kinematics(planar_chain, [0.3, 0.8])
    result = ik_newton(planar_chain, target, [0.2, 0.6])
    assert result.success
    assert result.reason == "converged"
    assert result.error_norm < 1e-6
    assert np.allclose(forward_kinematics(planar_chain, result.q).translation,
                       target.translation, atol=1e-6)


def test_newton_round_trip_on_default_chain():
    chain = load_default_chain()
    rng = np.random.default_rng(5)
    for _ in range(500):
        q_true = chain.home + rng.uniform(-0.15, 0.15, chain.dof) * [1, 1, 0.1, 1, 1, 1]
        target = forward_kinematics(chain, q_true)
        result = ik_newton(chain, target, chain.home)
        assert result.success
        reached = forward_kinematics(chain, result.q)
        assert np.linalg.norm(reached.translation - target.translation) < 1e-5
        assert rotation_angle(reached.rotation, target.rotation) < 1e-5


def test_newton_reports_failure_instead_of_raising(planar_chain):
    result = ik_newton(planar_chain, Pose.from_translation([1.0, 0.0, 0.0]), [0.1, 0.1],
                       max_iter=20)
    assert not result.success
    assert result.reason in ("max-iterations", "singular")
    assert result.iterations <= 20


def test_newton_argument_checks(planar_chain):
    target = Pose.identity()
    with pytest.raises(KinematicsError):
        ik_newton(planar_chain, target, [0.0, 0.0], tol=0.0)
    with pytest.raises(KinematicsError):
        ik_newton(planar_chain, target, [0.0, 0.0], max_iter=0)
