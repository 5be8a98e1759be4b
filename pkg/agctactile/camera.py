"""
Pinhole camera model with the 10-parameter Brown distortion vector, planar calibration and
target pose estimation.

- project / project_points: target frame -> pixels through pose, distortion and intrinsics
- estimate_homography: normalized DLT between the target plane and the image
- calibrate_zhang: closed-form intrinsics from three or more homographies, zero skew
- estimate_target_pose: T_CT from one view, homography decomposition plus optional
  Levenberg-Marquardt reprojection refinement

Distortion vector order is (k1, k2, k3, k4, k5, k6, p1, p2, s1, s2): rational radial,
tangential, thin prism with s1 r^2 added to x and s2 r^2 added to y.
"""

from __future__ import annotations

from typing import Any, Sequence
from dataclasses import dataclass, field

from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation
import numpy as np
import numpy.typing as npt

from agctactile.constants import MIN_DEPTH_MM
from agctactile.errors import BehindCamera, Degenerate, InsufficientViews, InvalidConfig
from agctactile.geometry import RigidTransform, nearest_rotation

# Relative singular value below which a linear system counts as rank deficient
_RANK_TOLERANCE = 1e-9

_UNDISTORT_ITERATIONS = 50


@dataclass(frozen=True, slots=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0
    distortion: tuple[float, ...] = (0.0,) * 10

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            msg = f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}"
            raise InvalidConfig(msg)
        if len(self.distortion) != 10:
            msg = f"Distortion vector needs exactly 10 entries, got {len(self.distortion)}"
            raise InvalidConfig(msg)
        object.__setattr__(self, "distortion", tuple(float(value) for value in self.distortion))

    @classmethod
    def from_matrix(cls, matrix: npt.ArrayLike, distortion: Sequence[float] = (0.0,) * 10) -> CameraModel:
        k = np.asarray(matrix, dtype=np.float64)
        return cls(float(k[0, 0]), float(k[1, 1]), float(k[0, 2]), float(k[1, 2]), float(k[0, 1]), tuple(distortion))

    @property
    def intrinsic_matrix(self) -> npt.NDArray[np.float64]:
        return np.array([[self.fx, self.skew, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def has_distortion(self) -> bool:
        return any(value != 0.0 for value in self.distortion)

    def to_dict(self) -> dict[str, Any]:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "skew": self.skew,
            "distortion": list(self.distortion),
        }


@dataclass(frozen=True, slots=True)
class PlanarTarget:
    """Checkerboard inner corners on the z = 0 plane of frame T, row-major from the origin."""

    rows: int
    cols: int
    pitch: float
    points: npt.NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.rows < 2 or self.cols < 2 or self.pitch <= 0:
            msg = f"Planar target needs at least 2x2 corners and a positive pitch, got {self}"
            raise InvalidConfig(msg)
        grid_y, grid_x = np.mgrid[0 : self.rows, 0 : self.cols].astype(np.float64)
        points = np.stack([grid_x * self.pitch, grid_y * self.pitch, np.zeros_like(grid_x)], axis=-1).reshape(-1, 3)
        points.flags.writeable = False
        object.__setattr__(self, "points", points)

    @property
    def center(self) -> npt.NDArray[np.float64]:
        return np.array([(self.cols - 1) * self.pitch / 2, (self.rows - 1) * self.pitch / 2, 0.0])


@dataclass(frozen=True, slots=True, eq=False)
class CorrespondenceSet:
    """
    Plane points (mm, z = 0 in frame T) matched with pixels.

    Serialized as [[X, Y, 0], [u, v]] pairs for replayable fixtures.
    """

    plane_points: npt.NDArray[np.float64]
    pixels: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        plane = np.asarray(self.plane_points, dtype=np.float64)
        if plane.ndim == 2 and plane.shape[1] == 3:
            plane = plane[:, :2]
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if plane.ndim != 2 or plane.shape[1] != 2 or pixels.shape != plane.shape:
            msg = f"Mismatched correspondence shapes {plane.shape} and {pixels.shape}"
            raise Degenerate(msg)
        object.__setattr__(self, "plane_points", plane)
        object.__setattr__(self, "pixels", pixels)

    def __len__(self) -> int:
        return len(self.pixels)

    def to_json(self) -> list[list[list[float]]]:
        return [
            [[float(x), float(y), 0.0], [float(u), float(v)]]
            for (x, y), (u, v) in zip(self.plane_points, self.pixels, strict=True)
        ]

    @classmethod
    def from_json(cls, data: Sequence[Sequence[Sequence[float]]]) -> CorrespondenceSet:
        return cls(np.array([pair[0] for pair in data]), np.array([pair[1] for pair in data]))


def distort(distortion: Sequence[float], normalized: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Apply the Brown model to (..., 2) normalized coordinates."""
    k1, k2, k3, k4, k5, k6, p1, p2, s1, s2 = distortion
    x = normalized[..., 0]
    y = normalized[..., 1]
    r2 = x * x + y * y
    r4 = r2 * r2
    r6 = r4 * r2
    radial = (1.0 + k1 * r2 + k2 * r4 + k3 * r6) / (1.0 + k4 * r2 + k5 * r4 + k6 * r6)
    x_d = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x) + s1 * r2
    y_d = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y + s2 * r2
    return np.stack([x_d, y_d], axis=-1)


def project_points(
    cam: CameraModel, pose_CT: RigidTransform, points_T: npt.ArrayLike
) -> npt.NDArray[np.float64]:
    """
    Project (N, 3) target-frame points to (N, 2) pixels.

    Raises:
        BehindCamera: any point has z_C <= 1e-6 mm
    """
    points_C = pose_CT.apply(np.atleast_2d(np.asarray(points_T, dtype=np.float64)))
    depth = points_C[:, 2]
    if (depth <= MIN_DEPTH_MM).any():
        msg = f"{int((depth <= MIN_DEPTH_MM).sum())} point(s) at or behind the camera plane"
        raise BehindCamera(msg)
    distorted = distort(cam.distortion, points_C[:, :2] / depth[:, None])
    u = cam.fx * distorted[:, 0] + cam.skew * distorted[:, 1] + cam.cx
    v = cam.fy * distorted[:, 1] + cam.cy
    return np.stack([u, v], axis=-1)


def project(cam: CameraModel, pose_CT: RigidTransform, point_T: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return project_points(cam, pose_CT, [point_T])[0]


def undistort_points(cam: CameraModel, pixels: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Pixels -> undistorted normalized coordinates, inverting the Brown model by fixed-point iteration."""
    pixels = np.asarray(pixels, dtype=np.float64)
    y_d = (pixels[:, 1] - cam.cy) / cam.fy
    x_d = (pixels[:, 0] - cam.cx - cam.skew * y_d) / cam.fx
    distorted = np.stack([x_d, y_d], axis=-1)
    if not cam.has_distortion:
        return distorted

    k1, k2, k3, k4, k5, k6, p1, p2, s1, s2 = cam.distortion
    estimate = distorted.copy()
    for _ in range(_UNDISTORT_ITERATIONS):
        x = estimate[:, 0]
        y = estimate[:, 1]
        r2 = x * x + y * y
        r4 = r2 * r2
        r6 = r4 * r2
        radial = (1.0 + k1 * r2 + k2 * r4 + k3 * r6) / (1.0 + k4 * r2 + k5 * r4 + k6 * r6)
        delta_x = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x) + s1 * r2
        delta_y = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y + s2 * r2
        estimate = np.stack([(x_d - delta_x) / radial, (y_d - delta_y) / radial], axis=-1)
    return estimate


def _normalizing_transform(points: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Similarity moving the centroid to the origin with mean distance sqrt(2)."""
    centroid = points.mean(axis=0)
    mean_distance = float(np.linalg.norm(points - centroid, axis=1).mean())
    if mean_distance <= 0:
        msg = "All points coincide"
        raise Degenerate(msg)
    scale = np.sqrt(2.0) / mean_distance
    return np.array([[scale, 0.0, -scale * centroid[0]], [0.0, scale, -scale * centroid[1]], [0.0, 0.0, 1.0]])


def _apply_homography(matrix: npt.NDArray[np.float64], points: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    homogeneous = np.column_stack([points, np.ones(len(points))]) @ matrix.T
    return homogeneous[:, :2] / homogeneous[:, 2:3]


def homography_from_points(source: npt.ArrayLike, destination: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """
    Normalized DLT homography mapping (N, 2) source points onto destination points.

    Raises:
        Degenerate: fewer than 4 points, or a rank-deficient design matrix
    """
    source = np.asarray(source, dtype=np.float64)
    destination = np.asarray(destination, dtype=np.float64)
    if len(source) < 4 or len(source) != len(destination):
        msg = f"Homography needs at least 4 matched points, got {len(source)}"
        raise Degenerate(msg)

    source_norm = _normalizing_transform(source)
    destination_norm = _normalizing_transform(destination)
    src = _apply_homography(source_norm, source)
    dst = _apply_homography(destination_norm, destination)

    design = np.zeros((2 * len(src), 9))
    x, y = src[:, 0], src[:, 1]
    u, v = dst[:, 0], dst[:, 1]
    ones = np.ones(len(src))
    zeros = np.zeros(len(src))
    design[0::2] = np.column_stack([-x, -y, -ones, zeros, zeros, zeros, u * x, u * y, u])
    design[1::2] = np.column_stack([zeros, zeros, zeros, -x, -y, -ones, v * x, v * y, v])

    _, singular, vt = np.linalg.svd(design)
    if singular[7] <= _RANK_TOLERANCE * singular[0]:
        msg = "Homography design matrix is rank deficient (collinear points?)"
        raise Degenerate(msg)
    normalized = vt[-1].reshape(3, 3)
    matrix = np.linalg.inv(destination_norm) @ normalized @ source_norm
    if abs(matrix[2, 2]) <= 1e-12 * np.abs(matrix).max():
        msg = "Homography maps the origin to infinity"
        raise Degenerate(msg)
    return matrix / matrix[2, 2]


def estimate_homography(correspondences: CorrespondenceSet) -> npt.NDArray[np.float64]:
    """Homography from target-plane millimeters to pixels, scaled so H[2][2] = 1."""
    return homography_from_points(correspondences.plane_points, correspondences.pixels)


def homography_rms(matrix: npt.NDArray[np.float64], correspondences: CorrespondenceSet) -> float:
    residual = _apply_homography(matrix, correspondences.plane_points) - correspondences.pixels
    return float(np.sqrt((residual**2).sum(axis=1).mean()))


def _zhang_row(matrix: npt.NDArray[np.float64], i: int, j: int) -> npt.NDArray[np.float64]:
    hi = matrix[:, i]
    hj = matrix[:, j]
    return np.array(
        [
            hi[0] * hj[0],
            hi[0] * hj[1] + hi[1] * hj[0],
            hi[1] * hj[1],
            hi[2] * hj[0] + hi[0] * hj[2],
            hi[2] * hj[1] + hi[1] * hj[2],
            hi[2] * hj[2],
        ]
    )


def calibrate_zhang(views: Sequence[CorrespondenceSet]) -> CameraModel:
    """
    Closed-form intrinsics from planar views with zero skew; distortion is left at zero.

    Pixels are pre-normalized by a shared similarity for conditioning, and the recovered
    matrix is mapped back afterwards.

    Raises:
        InsufficientViews: fewer than 3 views
        Degenerate: the views do not constrain the intrinsics (e.g. all parallel)
    """
    if len(views) < 3:
        msg = f"Planar calibration needs at least 3 views, got {len(views)}"
        raise InsufficientViews(msg)

    all_pixels = np.concatenate([view.pixels for view in views])
    center = all_pixels.mean(axis=0)
    spread = float(np.abs(all_pixels - center).max()) or 1.0
    conditioning = np.array([[1 / spread, 0.0, -center[0] / spread], [0.0, 1 / spread, -center[1] / spread], [0, 0, 1]])

    rows = []
    for view in views:
        matrix = conditioning @ estimate_homography(view)
        matrix /= np.linalg.norm(matrix[:, :2])
        rows.append(_zhang_row(matrix, 0, 1))
        rows.append(_zhang_row(matrix, 0, 0) - _zhang_row(matrix, 1, 1))
    # zero skew means B12 = 0
    rows.append(np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]))

    _, singular, vt = np.linalg.svd(np.asarray(rows))
    if singular[-2] <= _RANK_TOLERANCE * singular[0]:
        msg = "Views do not constrain the intrinsics; orientations are too similar"
        raise Degenerate(msg)
    b11, b12, b22, b13, b23, b33 = vt[-1] if vt[-1][0] > 0 else -vt[-1]

    denominator = b11 * b22 - b12 * b12
    if b11 <= 0 or denominator <= 0:
        msg = "Absolute conic estimate is not positive definite"
        raise Degenerate(msg)
    v0 = (b12 * b13 - b11 * b23) / denominator
    scale = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11
    if scale <= 0:
        msg = "Absolute conic estimate is not positive definite"
        raise Degenerate(msg)
    alpha = np.sqrt(scale / b11)
    beta = np.sqrt(scale * b11 / denominator)
    u0 = -b13 * alpha * alpha / scale

    conditioned = np.array([[alpha, 0.0, u0], [0.0, beta, v0], [0.0, 0.0, 1.0]])
    intrinsics = np.linalg.inv(conditioning) @ conditioned
    return CameraModel.from_matrix(intrinsics / intrinsics[2, 2])


def _pose_from_normalized_homography(
    matrix: npt.NDArray[np.float64], plane_points: npt.NDArray[np.float64]
) -> RigidTransform:
    h1, h2, h3 = matrix[:, 0], matrix[:, 1], matrix[:, 2]
    scale = 2.0 / (np.linalg.norm(h1) + np.linalg.norm(h2))
    points = np.column_stack([plane_points, np.zeros(len(plane_points))])
    for sign in (1.0, -1.0):
        r1 = sign * scale * h1
        r2 = sign * scale * h2
        rotation = nearest_rotation(np.column_stack([r1, r2, np.cross(r1, r2)]))
        translation = sign * scale * h3
        candidate = RigidTransform(rotation, translation)
        if (candidate.apply(points)[:, 2] > MIN_DEPTH_MM).all():
            return candidate
    msg = "Every pose candidate puts the target behind the camera"
    raise BehindCamera(msg)


def estimate_target_pose(cam: CameraModel, view: CorrespondenceSet, refine: bool = True) -> RigidTransform:
    """
    Pose of the planar target in the camera frame, T_CT.

    Raises:
        Degenerate: fewer than 4 correspondences or collinear points
        BehindCamera: no candidate has positive depth for every point
    """
    if len(view) < 4:
        msg = f"Pose estimation needs at least 4 correspondences, got {len(view)}"
        raise Degenerate(msg)
    normalized = undistort_points(cam, view.pixels)
    pose = _pose_from_normalized_homography(homography_from_points(view.plane_points, normalized), view.plane_points)
    if not refine:
        return pose
    return refine_target_pose(cam, view, pose)


def refine_target_pose(cam: CameraModel, view: CorrespondenceSet, initial: RigidTransform) -> RigidTransform:
    """Levenberg-Marquardt minimization of pixel reprojection error, starting from a linear estimate."""
    points = np.column_stack([view.plane_points, np.zeros(len(view))])
    start = np.concatenate([Rotation.from_matrix(initial.rotation).as_rotvec(), initial.translation])

    def residuals(parameters: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        rotation = Rotation.from_rotvec(parameters[:3]).as_matrix()
        points_C = points @ rotation.T + parameters[3:]
        depth = np.maximum(points_C[:, 2], MIN_DEPTH_MM)
        distorted = distort(cam.distortion, points_C[:, :2] / depth[:, None])
        u = cam.fx * distorted[:, 0] + cam.skew * distorted[:, 1] + cam.cx
        v = cam.fy * distorted[:, 1] + cam.cy
        return (np.stack([u, v], axis=-1) - view.pixels).reshape(-1)

    if float(np.abs(residuals(start)).max()) < 1e-9:
        return initial
    result = least_squares(residuals, start, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return RigidTransform.from_rotvec(result.x[:3], result.x[3:])


def reprojection_rms(cam: CameraModel, pose_CT: RigidTransform, view: CorrespondenceSet) -> float:
    points = np.column_stack([view.plane_points, np.zeros(len(view))])
    residual = project_points(cam, pose_CT, points) - view.pixels
    return float(np.sqrt((residual**2).sum(axis=1).mean()))


def synthesize_view(
    cam: CameraModel,
    target: PlanarTarget,
    pose_CT: RigidTransform,
    rng: np.random.Generator | None = None,
    noise_sigma: float = 0.0,
) -> CorrespondenceSet:
    """Stand-in for corner detection: project the board and optionally add iid Gaussian pixel noise."""
    pixels = project_points(cam, pose_CT, target.points)
    if noise_sigma > 0:
        if rng is None:
            msg = "Pixel noise needs a seeded generator"
            raise InvalidConfig(msg)
        pixels = pixels + rng.normal(scale=noise_sigma, size=pixels.shape)
    return CorrespondenceSet(target.points, pixels)
