import numpy as np
import pytest

from agctactile.errors import DegenerateMotion, MisalignedInput, TooFewPairs
from agctactile.geometry import (
    RigidTransform,
    compose,
    invert,
    random_transform,
    rotation_about,
    rotation_error,
    translation_error,
)
from agctactile.handeye import (
    MotionPair,
    average_transforms,
    axxb_residual,
    pair_indices,
    register_workcell,
    solve_axxb_separable,
)
from agctactile.workcell import CalibrationConfig, WorkcellScene, calibrate


def _pairs_for(solution, motions):
    return [MotionPair(motion, compose(compose(invert(solution), motion), solution)) for motion in motions]


def test_equal_motions_give_identity(rng):
    motions = [RigidTransform(rotation_about("x", 30), [1, 2, 3]), RigidTransform(rotation_about("y", 45), [4, 0, 1])]
    solution = solve_axxb_separable([MotionPair(motion, motion) for motion in motions])
    assert solution.allclose(RigidTransform.identity(), atol=1e-9)


def test_recovers_known_solution(rng):
    truth = random_transform(rng)
    pairs = _pairs_for(truth, [random_transform(rng) for _ in range(10)])
    solution = solve_axxb_separable(pairs)
    assert rotation_error(solution, truth) < 1e-6
    assert translation_error(solution, truth) < 1e-6
    assert axxb_residual(pairs, solution) < 1e-8
    assert max(pair.angle_mismatch for pair in pairs) < 1e-6


@pytest.mark.parametrize("wrap", [-1e-6, 1e-6])
def test_near_half_turn_pair_under_noise(wrap):
    truth = RigidTransform.from_rotvec([0.3, -0.2, 0.5], [10.0, -5.0, 20.0])
    motions = [
        RigidTransform.from_rotvec([0.8, 0.1, 0.0], [5.0, 0.0, 2.0]),
        RigidTransform.from_rotvec([0.0, -0.6, 0.4], [0.0, 3.0, -1.0]),
        RigidTransform.from_rotvec([0.0, 0.0, np.pi - 1e-7], [1.0, 2.0, 0.0]),
    ]
    pairs = _pairs_for(truth, motions)
    last = pairs[-1].B
    nudged = compose(last, RigidTransform.from_rotvec(wrap * last.rotation_axis()))
    pairs[-1] = MotionPair(pairs[-1].A, nudged)
    solution = solve_axxb_separable(pairs)
    assert rotation_error(solution, truth) < 1e-5
    assert translation_error(solution, truth) < 1e-3


def test_solution_ignores_pair_order(rng):
    truth = random_transform(rng)
    pairs = _pairs_for(truth, [random_transform(rng) for _ in range(8)])
    forward = solve_axxb_separable(pairs)
    backward = solve_axxb_separable(pairs[::-1])
    assert forward.allclose(backward, atol=1e-12)


def test_redundant_pair_does_not_hurt(rng):
    truth = random_transform(rng)
    motions = [random_transform(rng) for _ in range(6)]
    pairs = _pairs_for(truth, motions)
    before = axxb_residual(pairs, solve_axxb_separable(pairs))
    extended = pairs + _pairs_for(truth, [random_transform(rng)])
    after = axxb_residual(extended, solve_axxb_separable(extended))
    assert after <= before + 1e-9


def test_parallel_axes_are_degenerate(rng):
    truth = random_transform(rng)
    motions = [RigidTransform(rotation_about("z", angle), rng.normal(size=3)) for angle in np.linspace(10, 100, 10)]
    with pytest.raises(DegenerateMotion):
        solve_axxb_separable(_pairs_for(truth, motions))


def test_needs_two_pairs(rng):
    with pytest.raises(TooFewPairs):
        solve_axxb_separable(_pairs_for(random_transform(rng), [random_transform(rng)]))


def test_pairing_strategy():
    assert pair_indices(4) == [(0, 1), (1, 2), (2, 3), (0, 2), (1, 3)]
    assert pair_indices(2) == [(0, 1)]


def test_average_aligns_quaternion_signs(rng):
    transform = random_transform(rng)
    assert average_transforms([transform, transform, transform]).allclose(transform, atol=1e-9)


def _workcell(seed, count=10):
    generator = np.random.default_rng(seed)
    cfg = CalibrationConfig(poses=count)
    scene = WorkcellScene.generate(generator, cfg)
    target_poses = scene.sample_target_poses(generator, count)
    robot_poses = [scene.robot_pose_for(pose) for pose in target_poses]
    return scene, robot_poses, target_poses


def test_register_noise_free_workcell():
    scene, robot_poses, target_poses = _workcell(3)
    registration = register_workcell(robot_poses, target_poses, T_CH=scene.T_CH)
    assert rotation_error(registration.T_BT, scene.T_BT) < 1e-6
    assert translation_error(registration.T_BT, scene.T_BT) < 1e-5
    assert rotation_error(registration.T_RC, scene.T_RC) < 1e-6
    assert translation_error(registration.T_RC, scene.T_RC) < 1e-5
    assert registration.pair_count == 17
    assert registration.T_CH.allclose(scene.T_CH)


def test_registration_frame_graph_closes_the_loop():
    scene, robot_poses, target_poses = _workcell(5)
    registration = register_workcell(robot_poses, target_poses)
    graph = registration.frame_graph(robot_poses[0])
    graph.add_edge("C", "T", target_poses[0])
    assert graph.check_consistency("R", "T", tolerance=1e-5) == 2


def test_register_two_poses_is_too_few():
    _, robot_poses, target_poses = _workcell(1, count=2)
    with pytest.raises(TooFewPairs):
        register_workcell(robot_poses, target_poses)


def test_register_misaligned_lists():
    _, robot_poses, target_poses = _workcell(1, count=4)
    with pytest.raises(MisalignedInput):
        register_workcell(robot_poses, target_poses[:3])


def test_calibration_from_synthesized_views():
    outcome = calibrate(CalibrationConfig(poses=10), seed=11, estimate_intrinsics=False)
    assert outcome.errors["T_BT_rot"] < 1e-6
    assert outcome.errors["T_BT_trans"] < 1e-5
    assert outcome.errors["T_RC_rot"] < 1e-6
    assert outcome.errors["T_RC_trans"] < 1e-5
    assert len(outcome.views) == 10


def test_calibration_with_estimated_intrinsics():
    outcome = calibrate(CalibrationConfig(poses=10), seed=11)
    assert abs(outcome.camera.fx / 600.0 - 1.0) < 1e-4
    assert outcome.errors["T_BT_rot"] < 1e-3
    assert outcome.errors["T_RC_trans"] < 1.0


@pytest.mark.slow
def test_calibration_under_pixel_noise():
    cfg = CalibrationConfig(poses=10, pixel_noise=0.5)
    for seed in range(20):
        outcome = calibrate(cfg, seed=seed, estimate_intrinsics=False)
        assert outcome.errors["T_BT_rot"] < 0.02
        assert outcome.errors["T_RC_rot"] < 0.02
        assert outcome.errors["T_BT_trans"] < 1.0
        assert outcome.errors["T_RC_trans"] < 1.0
