"""Pinhole stereo camera model: projection, visibility, centroid errors, sharpening."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

import config
from geometry import Pose, compose, invert

logger = logging.getLogger(__name__)


class CameraError(ValueError):
    """Raised for inconsistent camera parameters and invalid images."""


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Ideal pinhole camera. ``extrinsic`` places the camera in the rig frame."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    hfov: float = None
    vfov: float = None
    extrinsic: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height \
                or self.width <= 0 or self.height <= 0:
            raise CameraError(f"image size must be positive integers, got {self.width}x{self.height}")
        if not (self.fx > 0 and self.fy > 0):
            raise CameraError("focal lengths must be positive")
        object.__setattr__(self, 'width', int(self.width))
        object.__setattr__(self, 'height', int(self.height))
        derived_h = math.degrees(2.0 * math.atan(self.width / (2.0 * self.fx)))
        derived_v = math.degrees(2.0 * math.atan(self.height / (2.0 * self.fy)))
        tol = config.FOV_CHECK_TOLERANCE_DEG
        if self.hfov is not None and abs(derived_h - self.hfov) > tol:
            raise CameraError(f"hfov {self.hfov} deg disagrees with fx (implies {derived_h:.3f} deg)")
        if self.vfov is not None and abs(derived_v - self.vfov) > tol:
            raise CameraError(f"vfov {self.vfov} deg disagrees with fy (implies {derived_v:.3f} deg)")
        object.__setattr__(self, 'hfov', derived_h if self.hfov is None else float(self.hfov))
        object.__setattr__(self, 'vfov', derived_v if self.vfov is None else float(self.vfov))

    @classmethod
    def from_fov(cls, width=config.IMAGE_WIDTH_PX, height=config.IMAGE_HEIGHT_PX,
                 hfov_deg=config.HFOV_DEG, vfov_deg=config.VFOV_DEG, extrinsic=None):
        """Focal lengths from field of view; principal point at the image center."""
        if not (0 < hfov_deg < 180 and 0 < vfov_deg < 180):
            raise CameraError("field of view must lie in (0, 180) degrees")
        fx = width / (2.0 * math.tan(math.radians(hfov_deg) / 2.0))
        fy = height / (2.0 * math.tan(math.radians(vfov_deg) / 2.0))
        return cls(fx, fy, width / 2.0, height / 2.0, width, height, hfov_deg, vfov_deg,
                   extrinsic or Pose.identity())

    @classmethod
    def from_intrinsics(cls, fx, fy, cx, cy, width, height, extrinsic=None):
        return cls(fx, fy, cx, cy, width, height, extrinsic=extrinsic or Pose.identity())

    @property
    def diagonal(self):
        return math.hypot(self.width, self.height)


def project(cam, point_cam_frame):
    """Pixel coordinates (u, v) of a camera-frame point, or None when z <= 0."""
    x, y, z = np.asarray(point_cam_frame, dtype=float).reshape(3)
    if z <= 0:
        return None
    return (cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy)


def visible(cam, point):
    """True iff the camera-frame point projects inside [0, width) x [0, height)."""
    uv = project(cam, point)
    if uv is None:
        return False
    u, v = uv
    return bool(0 <= u < cam.width and 0 <= v < cam.height)


@dataclass(frozen=True)
class CentroidErrors:
    l2_pix: float
    l2_pct: float
    u_err_pix: float
    u_err_pct: float
    v_err_pix: float
    v_err_pct: float


def centroid_errors(cam, uv):
    """Distance of a projected centroid from the geometric screen center."""
    u, v = (float(c) for c in uv)
    if not (math.isfinite(u) and math.isfinite(v)):
        raise CameraError("centroid coordinates must be finite")
    du = abs(u - cam.width / 2.0)
    dv = abs(v - cam.height / 2.0)
    l2 = math.hypot(du, dv)
    return CentroidErrors(
        l2_pix=l2,
        l2_pct=100.0 * l2 / cam.diagonal,
        u_err_pix=du,
        u_err_pct=100.0 * du / cam.width,
        v_err_pix=dv,
        v_err_pct=100.0 * dv / cam.height,
    )


def sharpen(image, alpha=config.SHARPEN_ALPHA, blur_sigma=config.SHARPEN_SIGMA, mode='reflect'):
    """Unsharp masking S = (alpha + 1) I - alpha G(I)."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise CameraError(f"sharpen needs a non-empty 2D image, got shape {img.shape}")
    if alpha < 0:
        raise CameraError("alpha must be non-negative")
    if not blur_sigma > 0:
        raise CameraError("blur_sigma must be positive")
    blurred = gaussian_filter(img, sigma=blur_sigma, mode=mode)
    return (alpha + 1.0) * img - alpha * blurred


@dataclass(frozen=True, eq=False)
class CameraConfig:
    width: int = config.IMAGE_WIDTH_PX
    height: int = config.IMAGE_HEIGHT_PX
    hfov_deg: float = config.HFOV_DEG
    vfov_deg: float = config.VFOV_DEG
    baseline: float = config.STEREO_BASELINE

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        config.check_keys('camera', data, cls.__dataclass_fields__.keys())
        return config.build_section(cls, 'camera', data)


@dataclass(frozen=True)
class CameraObservation:
    uv: tuple
    visible: bool
    errors: CentroidErrors


@dataclass(frozen=True, eq=False)
class StereoRig:
    """Two parallel pinhole cameras offset by ``baseline`` along the rig x-axis."""

    left: CameraModel
    right: CameraModel
    baseline: float

    def __post_init__(self):
        if not self.baseline > 0:
            raise CameraError("stereo baseline must be positive")

    @classmethod
    def from_config(cls, cfg=None):
        cfg = cfg or CameraConfig()
        half = cfg.baseline / 2.0
        left = CameraModel.from_fov(cfg.width, cfg.height, cfg.hfov_deg, cfg.vfov_deg,
                                    Pose.from_translation((-half, 0.0, 0.0)))
        right = CameraModel.from_fov(cfg.width, cfg.height, cfg.hfov_deg, cfg.vfov_deg,
                                     Pose.from_translation((half, 0.0, 0.0)))
        return cls(left, right, cfg.baseline)

    @property
    def cameras(self):
        return (self.left, self.right)

    def observe(self, rig_pose, point_world):
        """Project a world point through both cameras of a rig placed at ``rig_pose``."""
        observations = []
        for cam in self.cameras:
            world_to_cam = invert(compose(rig_pose, cam.extrinsic))
            p = world_to_cam.apply(point_world)
            uv = project(cam, p)
            is_visible = visible(cam, p)
            errors = centroid_errors(cam, uv) if uv is not None else None
            observations.append(CameraObservation(uv, is_visible, errors))
        return tuple(observations)
