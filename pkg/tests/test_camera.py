import pytest
import numpy as np
import sys
import os

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from placement import aim_at
from camera import (CameraModel, CameraConfig, CameraError, StereoRig, project, visible,
                    centroid_errors, sharpen)


def test_projection_of_optical_axis_point_is_centered():
    cam = CameraModel.from_fov()
    u, v = project(cam, [0.0, 0.0, 0.11])
    assert u == pytest.approx(cam.width / 2)
    assert v == pytest.approx(cam.height / 2)
    assert visible(cam, [0.0, 0.0, 0.11])


def test_point_behind_camera_is_not_projected():
    cam = CameraModel.from_fov()
    assert project(cam, [0.0, 0.0, -0.1]) is None
    assert project(cam, [0.0, 0.0, 0.0]) is None
    assert not visible(cam, [0.0, 0.0, -0.1])


def test_visibility_edges():
    cam = CameraModel.from_intrinsics(640.0, 640.0, 640.0, 480.0, 1280, 960)
    # u = 640 * 1 + 640 = 1280 は画像の外 (半開区間)
    assert project(cam, [0.5, 0.0, 0.5]) == pytest.approx((1280.0, 480.0))
    assert not visible(cam, [0.5, 0.0, 0.5])
    assert visible(cam, [0.499, 0.0, 0.5])
    assert visible(cam, [-1.0, -0.75, 1.0])  # (0, 0) は画像内


def test_fov_consistency_check():
    with pytest.raises(CameraError):
        CameraModel(640.0, 640.0, 640.0, 480.0, 1280, 960, hfov=60.0)
    cam = CameraModel(640.0, 640.0, 640.0, 480.0, 1280, 960, hfov=90.0)
    assert cam.vfov == pytest.approx(2 * np.degrees(np.arctan(960 / 1280)))
    with pytest.raises(CameraError):
        CameraModel.from_fov(hfov_deg=190.0)
    with pytest.raises(CameraError):
        CameraModel(640.0, 640.0, 640.0, 480.0, 0, 960)


def test_centroid_errors():
    cam = CameraModel.from_intrinsics(640.0, 640.0, 640.0, 480.0, 1280, 960)
    errors = centroid_errors(cam, (670.0, 520.0))
    assert errors.l2_pix == pytest.approx(50.0)
    assert errors.l2_pct == pytest.approx(100.0 * 50.0 / 1600.0)
    assert errors.u_err_pix == pytest.approx(30.0)
    assert errors.u_err_pct == pytest.approx(100.0 * 30.0 / 1280.0)
    assert errors.v_err_pct == pytest.approx(100.0 * 40.0 / 960.0)
    with pytest.raises(CameraError):
        centroid_errors(cam, (np.nan, 0.0))


def test_centroid_error_pythagorean_cases():
    cam = CameraModel.from_intrinsics(640.0, 640.0, 640.0, 480.0, 1280, 960)
    # 1280x960 の対角は 1600 px
    errors = centroid_errors(cam, (800.0, 480.0))
    assert errors.l2_pix == 160.0
    assert errors.l2_pct == 10.0
    corner = centroid_errors(cam, (0.0, 0.0))
    assert corner.l2_pix == 800.0
    assert corner.l2_pct == 50.0
    assert corner.u_err_pct == 50.0
    assert corner.v_err_pct == 50.0


def test_sharpen():
    rng = np.random.default_rng(0)
    image = rng.uniform(0.0, 1.0, size=(32, 48))
    assert np.allclose(sharpen(image, alpha=0.0), image)
    flat = np.full((16, 16), 0.3)
    assert np.allclose(sharpen(flat), flat)
    # 周期境界ではぼかしが総和を保つので平均輝度も変わらない
    assert sharpen(image, alpha=1.5, mode='wrap').mean() == pytest.approx(image.mean())
    with pytest.raises(CameraError):
        sharpen(np.zeros(5))
    with pytest.raises(CameraError):
        sharpen(image, alpha=-1.0)


def test_stereo_rig_symmetric_u_errors():
    rig = StereoRig.from_config(CameraConfig())
    rig_pose = aim_at([-0.11, 0.0, 0.0], [0.0, 0.0, 0.0])
    left, right = rig.observe(rig_pose, [0.0, 0.0, 0.0])
    assert left.visible and right.visible
    cx = rig.left.width / 2
    # 左カメラでは特徴が右寄り、右カメラでは左寄りに写る
    assert left.uv[0] > cx > right.uv[0]
    assert left.uv[0] - cx == pytest.approx(cx - right.uv[0])
    assert left.uv[1] == pytest.approx(right.uv[1])
    assert left.errors.u_err_pix == pytest.approx(right.errors.u_err_pix)


def test_stereo_rig_point_behind():
    rig = StereoRig.from_config()
    rig_pose = aim_at([-0.11, 0.0, 0.0], [0.0, 0.0, 0.0])
    left, right = rig.observe(rig_pose, [-0.3, 0.0, 0.0])
    assert left.uv is None and not left.visible and left.errors is None
    assert right.uv is None


def test_camera_config_from_dict():
    cfg = CameraConfig.from_dict({"baseline": 0.02})
    assert cfg.baseline == 0.02
    with pytest.raises(ValueError):
        CameraConfig.from_dict({"focal": 1.0})
    with pytest.raises(CameraError):
        StereoRig.from_config(CameraConfig(baseline=0.0))
