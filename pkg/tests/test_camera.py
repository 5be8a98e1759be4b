from numpy.testing import assert_allclose
import numpy as np
import pytest

from agctactile.camera import (
    CameraModel,
    CorrespondenceSet,
    PlanarTarget,
    calibrate_zhang,
    distort,
    estimate_homography,
    estimate_target_pose,
    homography_from_points,
    homography_rms,
    project,
    reprojection_rms,
    synthesize_view,
    undistort_points,
)
from agctactile.errors import BehindCamera, Degenerate, InsufficientViews
from agctactile.geometry import RigidTransform, rotation_about, rotation_error, translation_error
from agctactile.workcell import WorkcellScene

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


@pytest.fixture
def camera() -> CameraModel:
    return CameraModel(600.0, 600.0, 320.0, 240.0)


@pytest.fixture
def target() -> PlanarTarget:
    return PlanarTarget(7, 10, 15.0)


def test_optical_axis_projects_to_principal_point(camera):
    assert_allclose(project(camera, RigidTransform.identity(), [0.0, 0.0, 100.0]), [320.0, 240.0])


def test_intrinsic_matrix_roundtrip(camera):
    matrix = camera.intrinsic_matrix
    assert_allclose(matrix[2], [0.0, 0.0, 1.0])
    assert CameraModel.from_matrix(matrix, camera.distortion) == camera


def test_pinhole_projection():
    camera = CameraModel(500.0, 500.0, 320.0, 240.0)
    assert_allclose(project(camera, RigidTransform.identity(), [10.0, 0.0, 100.0]), [370.0, 240.0])


def test_radial_distortion_matches_polynomial():
    camera = CameraModel(500.0, 500.0, 320.0, 240.0, distortion=(0.1,) + (0.0,) * 9)
    pixel = project(camera, RigidTransform.identity(), [20.0, 0.0, 100.0])
    assert_allclose(pixel[0], 500.0 * 0.2 * (1 + 0.1 * 0.04) + 320.0, rtol=1e-12)


def test_zero_distortion_is_identity(rng):
    normalized = rng.normal(size=(50, 2))
    assert np.array_equal(distort((0.0,) * 10, normalized), normalized)


def test_points_behind_camera_rejected(camera):
    with pytest.raises(BehindCamera):
        project(camera, RigidTransform.identity(), [0.0, 0.0, -5.0])


def test_undistort_inverts_distortion(rng):
    distortion = (0.05, -0.01, 0.0, 0.0, 0.0, 0.0, 1e-3, -5e-4, 2e-4, 1e-4)
    camera = CameraModel(600.0, 600.0, 320.0, 240.0, distortion=distortion)
    normalized = rng.uniform(-0.3, 0.3, size=(40, 2))
    points = np.column_stack([normalized, np.ones(40)])
    pixels = np.array([project(camera, RigidTransform.identity(), point) for point in points])
    assert_allclose(undistort_points(camera, pixels), normalized, atol=1e-9)


def test_identity_homography():
    assert_allclose(homography_from_points(UNIT_SQUARE, UNIT_SQUARE), np.eye(3), atol=1e-12)


def test_scaling_homography():
    assert_allclose(homography_from_points(UNIT_SQUARE, 2 * UNIT_SQUARE), np.diag([2.0, 2.0, 1.0]), atol=1e-12)


def test_random_homography_recovered(rng):
    truth = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
    truth /= truth[2, 2]
    source = rng.uniform(-1, 1, size=(20, 2))
    mapped = np.column_stack([source, np.ones(20)]) @ truth.T
    destination = mapped[:, :2] / mapped[:, 2:]
    assert_allclose(homography_from_points(source, destination), truth, rtol=1e-8, atol=1e-10)


def test_noise_free_view_fits_homography_exactly(rng):
    plane = rng.uniform(0, 40, size=(12, 2))
    truth = np.array([[2.0, 0.1, 100.0], [-0.05, 1.9, 80.0], [1e-4, 2e-4, 1.0]])
    mapped = np.column_stack([plane, np.ones(12)]) @ truth.T
    exact = CorrespondenceSet(plane, mapped[:, :2] / mapped[:, 2:])
    matrix = estimate_homography(exact)
    assert homography_rms(matrix, exact) < 1e-8
    assert homography_rms(np.eye(3), exact) > 1.0


def test_collinear_points_are_degenerate():
    line = np.column_stack([np.linspace(0, 1, 6), np.linspace(0, 2, 6)])
    with pytest.raises(Degenerate):
        homography_from_points(line, line)


def _tilted_views(camera, count, seed=0):
    generator = np.random.default_rng(seed)
    scene = WorkcellScene(
        T_RC=RigidTransform.identity(),
        T_BT=RigidTransform.identity(),
        T_CH=RigidTransform.identity(),
        camera=camera,
        target=PlanarTarget(7, 10, 15.0),
    )
    poses = scene.sample_target_poses(generator, count)
    return poses, [synthesize_view(camera, scene.target, pose) for pose in poses]


def test_zhang_recovers_intrinsics(camera):
    _, views = _tilted_views(camera, 5)
    recovered = calibrate_zhang(views)
    for name in ("fx", "fy", "cx", "cy"):
        assert abs(getattr(recovered, name) / getattr(camera, name) - 1.0) < 1e-4
    assert recovered.distortion == (0.0,) * 10


def test_zhang_needs_three_views(camera):
    _, views = _tilted_views(camera, 2)
    with pytest.raises(InsufficientViews):
        calibrate_zhang(views)


def test_zhang_rejects_parallel_views(camera, target):
    pose = RigidTransform(np.eye(3), np.array([-60.0, -45.0, 500.0]))
    view = synthesize_view(camera, target, pose)
    with pytest.raises(Degenerate):
        calibrate_zhang([view] * 5)


def test_fronto_parallel_pose(camera, target):
    truth = RigidTransform(np.eye(3), np.array([0.0, 0.0, 200.0]))
    estimate = estimate_target_pose(camera, synthesize_view(camera, target, truth))
    assert translation_error(estimate, truth) < 1e-3
    assert rotation_error(estimate, truth) < 1e-4


def test_tilted_pose(camera, target):
    truth = RigidTransform(rotation_about("x", 30), np.array([-60.0, -40.0, 400.0]))
    view = synthesize_view(camera, target, truth)
    for refine in (False, True):
        estimate = estimate_target_pose(camera, view, refine=refine)
        assert rotation_error(estimate, truth) < 1e-4
        assert translation_error(estimate, truth) < 1e-3
        assert reprojection_rms(camera, estimate, view) < 1e-6


def test_pose_with_known_distortion(target):
    camera = CameraModel(600.0, 600.0, 320.0, 240.0, distortion=(0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 1e-4, 0.0, 0.0, 0.0))
    truth = RigidTransform(rotation_about("y", 20), np.array([-70.0, -40.0, 450.0]))
    estimate = estimate_target_pose(camera, synthesize_view(camera, target, truth))
    assert rotation_error(estimate, truth) < 1e-6
    assert translation_error(estimate, truth) < 1e-4


def test_three_correspondences_are_degenerate(camera):
    view = CorrespondenceSet(UNIT_SQUARE[:3], UNIT_SQUARE[:3] * 100)
    with pytest.raises(Degenerate):
        estimate_target_pose(camera, view)


def test_correspondence_json_roundtrip(camera, target):
    view = synthesize_view(camera, target, RigidTransform(np.eye(3), np.array([0.0, 0.0, 300.0])))
    data = view.to_json()
    assert data[0][0][2] == 0.0
    restored = CorrespondenceSet.from_json(data)
    assert_allclose(restored.pixels, view.pixels)
    assert_allclose(restored.plane_points, view.plane_points)
