"""
Synthetic workcell and the end-to-end calibration procedure.

The scene holds ground-truth T_RC (robot base to camera), T_BT (flange to phantom mount),
T_CH (camera to HySenSe base) and the camera intrinsics. calibrate() replays the
procedure on it: board views, planar intrinsic calibration, per-view target poses and
separable hand-eye registration, then scores the estimates against the truth.
"""

from __future__ import annotations

from typing import Any, Mapping
from dataclasses import dataclass, field, replace
import logging

from scipy.spatial.transform import Rotation
import numpy as np

from agctactile.camera import (
    CameraModel,
    CorrespondenceSet,
    PlanarTarget,
    calibrate_zhang,
    estimate_target_pose,
    reprojection_rms,
    synthesize_view,
)
from agctactile.errors import InvalidConfig
from agctactile.geometry import RigidTransform, compose, invert, rotation_about, rotation_error, translation_error
from agctactile.handeye import WorkcellRegistration, register_workcell

logger = logging.getLogger(__name__)

# Board center distance from the camera, millimeters
_VIEW_DISTANCE_MM = 300.0


@dataclass(frozen=True, slots=True)
class CalibrationConfig:
    poses: int = 10
    pixel_noise: float = 0.0
    board_rows: int = 7
    board_cols: int = 10
    board_pitch_mm: float = 15.0
    refine_pose: bool = True
    camera: CameraModel = field(default_factory=lambda: CameraModel(600.0, 600.0, 320.0, 240.0))

    def __post_init__(self) -> None:
        if self.poses < 1 or self.pixel_noise < 0:
            msg = f"Calibration needs at least one pose and non-negative noise, got {self.poses}, {self.pixel_noise}"
            raise InvalidConfig(msg)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> CalibrationConfig:
        camera = dict(data["camera"])
        return cls(
            poses=int(data["poses"]),
            pixel_noise=float(data["pixel_noise"]),
            board_rows=int(data["board_rows"]),
            board_cols=int(data["board_cols"]),
            board_pitch_mm=float(data["board_pitch_mm"]),
            refine_pose=bool(data["refine_pose"]),
            camera=CameraModel(
                float(camera["fx"]),
                float(camera["fy"]),
                float(camera["cx"]),
                float(camera["cy"]),
                distortion=tuple(float(value) for value in camera["distortion"]),
            ),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "poses": self.poses,
            "pixel_noise": self.pixel_noise,
            "board_rows": self.board_rows,
            "board_cols": self.board_cols,
            "board_pitch_mm": self.board_pitch_mm,
            "refine_pose": self.refine_pose,
            "camera": {key: value for key, value in self.camera.to_dict().items() if key != "skew"},
        }

    @property
    def target(self) -> PlanarTarget:
        return PlanarTarget(self.board_rows, self.board_cols, self.board_pitch_mm)


@dataclass(frozen=True, slots=True)
class WorkcellScene:
    """Ground truth for one simulated workcell."""

    T_RC: RigidTransform
    T_BT: RigidTransform
    T_CH: RigidTransform
    camera: CameraModel
    target: PlanarTarget

    @classmethod
    def generate(cls, rng: np.random.Generator, cfg: CalibrationConfig) -> WorkcellScene:
        # Camera 600 mm above the robot base looking down, with a little random misalignment
        camera_rotation = Rotation.from_rotvec(rng.normal(scale=0.05, size=3)).as_matrix() @ rotation_about("x", 180)
        T_RC = RigidTransform(camera_rotation, np.array([400.0, 0.0, 600.0]) + rng.normal(scale=10.0, size=3))
        # Mount sits roughly 80 mm along the flange axis
        T_BT = RigidTransform(
            Rotation.from_rotvec(rng.normal(scale=0.3, size=3)).as_matrix(),
            np.array([0.0, 0.0, 80.0]) + rng.normal(scale=15.0, size=3),
        )
        T_CH = RigidTransform(rotation_about("x", 180), np.array([0.0, 0.0, 450.0]))
        return cls(T_RC=T_RC, T_BT=T_BT, T_CH=T_CH, camera=cfg.camera, target=cfg.target)

    def sample_target_poses(self, rng: np.random.Generator, count: int) -> list[RigidTransform]:
        """Board poses in front of the camera with tilts of 15-40 degrees about varied axes."""
        poses = []
        for _ in range(count):
            axis_angle = rng.uniform(0.0, 2.0 * np.pi)
            axis = np.array([np.cos(axis_angle), np.sin(axis_angle), 0.0])
            tilt = np.deg2rad(rng.uniform(15.0, 40.0))
            spin = rng.uniform(-90.0, 90.0)
            rotation = Rotation.from_rotvec(axis * tilt).as_matrix() @ rotation_about("z", spin)
            center = np.array([rng.uniform(-30.0, 30.0), rng.uniform(-30.0, 30.0), _VIEW_DISTANCE_MM])
            center[2] += rng.uniform(-40.0, 40.0)
            poses.append(RigidTransform(rotation, center - rotation @ self.target.center))
        return poses

    def robot_pose_for(self, T_CT: RigidTransform) -> RigidTransform:
        """Flange pose that puts the board at T_CT: T_RB = T_RC . T_CT . T_BT^-1."""
        return compose(compose(self.T_RC, T_CT), invert(self.T_BT))


@dataclass(frozen=True, slots=True)
class CalibrationOutcome:
    registration: WorkcellRegistration
    camera: CameraModel
    views: tuple[CorrespondenceSet, ...]
    robot_poses: tuple[RigidTransform, ...]
    errors: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "registration": self.registration.to_dict(),
            "camera": self.camera.to_dict(),
            "robot_poses": [pose.to_row_major() for pose in self.robot_poses],
            "errors": self.errors,
        }


def calibrate(
    cfg: CalibrationConfig,
    seed: int,
    scene: WorkcellScene | None = None,
    estimate_intrinsics: bool = True,
) -> CalibrationOutcome:
    """
    Replay workcell calibration on a synthetic scene.

    Args:
        cfg: Board, pose count, pixel noise and ground-truth camera
        seed: Drives the scene, the board poses and the pixel noise
        scene: Use this scene instead of generating one from the seed
        estimate_intrinsics: Calibrate intrinsics from the board views first; otherwise use the
            ground-truth camera for pose estimation

    Returns:
        Registration, the camera used for pose estimation, the correspondence fixtures and the
        estimation errors against ground truth
    """
    rng = np.random.default_rng(seed)
    if scene is None:
        scene = WorkcellScene.generate(rng, cfg)
    target_poses = scene.sample_target_poses(rng, cfg.poses)
    robot_poses = [scene.robot_pose_for(T_CT) for T_CT in target_poses]
    views = [synthesize_view(scene.camera, scene.target, T_CT, rng, cfg.pixel_noise) for T_CT in target_poses]

    camera = scene.camera
    if estimate_intrinsics:
        # Distortion stays at its known value; only the pinhole intrinsics are estimated
        camera = replace(calibrate_zhang(views), distortion=scene.camera.distortion)
        logger.info("Calibrated intrinsics fx=%.3f fy=%.3f cx=%.3f cy=%.3f", camera.fx, camera.fy, camera.cx, camera.cy)

    measured = [estimate_target_pose(camera, view, refine=cfg.refine_pose) for view in views]
    registration = register_workcell(robot_poses, measured, T_CH=scene.T_CH)
    errors = {
        "T_RC_rot": rotation_error(registration.T_RC, scene.T_RC),
        "T_RC_trans": translation_error(registration.T_RC, scene.T_RC),
        "T_BT_rot": rotation_error(registration.T_BT, scene.T_BT),
        "T_BT_trans": translation_error(registration.T_BT, scene.T_BT),
        "reprojection_rms": max(reprojection_rms(camera, pose, view) for pose, view in zip(measured, views)),
    }
    logger.debug("Calibration errors against ground truth: %s", errors)
    return CalibrationOutcome(
        registration=registration,
        camera=camera,
        views=tuple(views),
        robot_poses=tuple(robot_poses),
        errors=errors,
    )
