"""
Separable AX = XB hand-eye calibration.

The phantom mount is rigidly attached to the flange and observed by a fixed camera, so
for robot poses T_RB_i and camera measurements T_CT_i the unknown X = T_BT satisfies

    A X = X B,  A = T_RB_j^-1 T_RB_i,  B = T_CT_j^-1 T_CT_i

Rotation is solved first in quaternion form (smallest eigenvector of an accumulated 4x4
symmetric matrix), then translation by linear least squares through the normal equations.
register_workcell turns the solution into T_RC and reports how well the per-view estimates
agree.
"""

from __future__ import annotations

from typing import Any, Sequence
from dataclasses import dataclass, field
import itertools
import logging

import numpy as np
import numpy.typing as npt

from agctactile.constants import HALF_TURN_SCALAR, PARALLEL_AXIS_ANGLE, WEAK_MOTION_ANGLE
from agctactile.errors import DegenerateMotion, MisalignedInput, TooFewPairs
from agctactile.geometry import (
    FrameGraph,
    RigidTransform,
    UnitQuaternion,
    compose,
    invert,
    rotation_error,
    translation_error,
)
from agctactile.primitives import FrameId

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class MotionPair:
    """Relative flange motion A and the matching relative target motion B seen by the camera."""

    A: RigidTransform
    B: RigidTransform

    @classmethod
    def from_poses(
        cls,
        robot_i: RigidTransform,
        robot_j: RigidTransform,
        camera_i: RigidTransform,
        camera_j: RigidTransform,
    ) -> MotionPair:
        return cls(compose(invert(robot_j), robot_i), compose(invert(camera_j), camera_i))

    @property
    def angle(self) -> float:
        return self.A.rotation_angle()

    @property
    def weakly_informative(self) -> bool:
        return self.angle < WEAK_MOTION_ANGLE

    @property
    def angle_mismatch(self) -> float:
        """Difference between the rotation angles of A and B; zero for noise-free data."""
        return abs(self.A.rotation_angle() - self.B.rotation_angle())


def left_matrix(q: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """L(p) with p (x) q = L(p) q, quaternions as (w, x, y, z)."""
    w, x, y, z = q
    return np.array([[w, -x, -y, -z], [x, w, -z, y], [y, z, w, -x], [z, -y, x, w]])


def right_matrix(q: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """R(q) with p (x) q = R(q) p, quaternions as (w, x, y, z)."""
    w, x, y, z = q
    return np.array([[w, -x, -y, -z], [x, w, z, -y], [y, -z, w, x], [z, y, -x, w]])


def _check_axis_diversity(pairs: Sequence[MotionPair]) -> None:
    axes = [pair.A.rotation_axis() for pair in pairs if not pair.weakly_informative]
    widest = 0.0
    for first, second in itertools.combinations(axes, 2):
        widest = max(widest, float(np.arccos(np.clip(abs(first @ second), 0.0, 1.0))))
    if widest <= PARALLEL_AXIS_ANGLE:
        msg = "Every relative motion rotates about the same axis"
        raise DegenerateMotion(msg, f"widest angle between rotation axes is {widest:.3e} rad")


QuaternionPair = tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]


def _smallest_eigenvector(quaternions: Sequence[QuaternionPair]) -> npt.NDArray[np.float64]:
    system = np.zeros((4, 4))
    for q_a, q_b in quaternions:
        difference = left_matrix(q_a) - right_matrix(q_b)
        system += difference.T @ difference
    _, eigenvectors = np.linalg.eigh(system)
    return eigenvectors[:, 0]


def solve_rotation(pairs: Sequence[MotionPair]) -> npt.NDArray[np.float64]:
    """
    R_X minimizing sum ||q_A (x) q_X - q_X (x) q_B||^2 over unit quaternions.

    q_A and q_B are only defined up to sign, and near a half turn their canonical (w >= 0)
    forms can disagree. The first estimate uses the pairs away from a half turn; every
    q_B is then re-signed to agree with it and the system is solved again.
    """
    quaternions = [(pair.A.quaternion().as_array(), pair.B.quaternion().as_array()) for pair in pairs]
    anchored = [(q_a, q_b) for q_a, q_b in quaternions if min(abs(q_a[0]), abs(q_b[0])) > HALF_TURN_SCALAR]
    q_x = _smallest_eigenvector(anchored if len(anchored) >= 2 else quaternions)
    for _ in range(2):
        aligned = []
        for q_a, q_b in quaternions:
            lhs = left_matrix(q_a) @ q_x
            if np.linalg.norm(lhs - right_matrix(q_b) @ q_x) > np.linalg.norm(lhs + right_matrix(q_b) @ q_x):
                q_b = -q_b
            aligned.append((q_a, q_b))
        q_x = _smallest_eigenvector(aligned)
    return UnitQuaternion.from_array(q_x).to_matrix()


def solve_translation(pairs: Sequence[MotionPair], rotation: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """t_X from the stacked (R_A - I) t_X = R_X t_B - t_A system, through the normal equations."""
    design = np.concatenate([pair.A.rotation - np.eye(3) for pair in pairs])
    target = np.concatenate([rotation @ pair.B.translation - pair.A.translation for pair in pairs])
    normal = design.T @ design
    if np.linalg.matrix_rank(normal) < 3:
        msg = "Translation system is rank deficient"
        raise DegenerateMotion(msg)
    return np.linalg.solve(normal, design.T @ target)


def solve_axxb_separable(pairs: Sequence[MotionPair]) -> RigidTransform:
    """
    Solve A X = X B for X, rotation first and then translation.

    Raises:
        TooFewPairs: fewer than two pairs
        DegenerateMotion: every rotation axis is parallel
    """
    if len(pairs) < 2:
        msg = f"Hand-eye calibration needs at least 2 motion pairs, got {len(pairs)}"
        raise TooFewPairs(msg)
    weak = sum(pair.weakly_informative for pair in pairs)
    if weak:
        logger.warning("%d of %d motion pairs rotate less than %.0e rad", weak, len(pairs), WEAK_MOTION_ANGLE)
    _check_axis_diversity(pairs)
    rotation = solve_rotation(pairs)
    return RigidTransform.from_approximate(rotation, solve_translation(pairs, rotation))


def pair_indices(count: int) -> list[tuple[int, int]]:
    """Consecutive pairs (i, i+1) followed by stride-2 skips (i, i+2)."""
    return [(i, i + 1) for i in range(count - 1)] + [(i, i + 2) for i in range(count - 2)]


def axxb_residual(pairs: Sequence[MotionPair], solution: RigidTransform) -> float:
    """Sum over pairs of the rotation geodesic plus translation norm between A X and X B."""
    total = 0.0
    for pair in pairs:
        left = compose(pair.A, solution)
        right = compose(solution, pair.B)
        total += rotation_error(left, right) + translation_error(left, right)
    return total


def average_transforms(transforms: Sequence[RigidTransform]) -> RigidTransform:
    """Sign-aligned quaternion mean for rotation, arithmetic mean for translation."""
    quaternions = np.array([transform.quaternion().as_array() for transform in transforms])
    signs = np.where(quaternions @ quaternions[0] < 0, -1.0, 1.0)
    mean_quaternion = UnitQuaternion.from_array((quaternions * signs[:, None]).mean(axis=0))
    translation = np.mean([transform.translation for transform in transforms], axis=0)
    return RigidTransform(mean_quaternion.to_matrix(), translation)


@dataclass(frozen=True, slots=True)
class WorkcellRegistration:
    """
    Estimated workcell transforms and how consistent the per-view estimates of T_RC were.

    T_CH is carried from the scene; it is measured physically, not estimated.
    """

    T_RC: RigidTransform
    T_BT: RigidTransform
    T_CH: RigidTransform
    residual_rot: float
    residual_trans: float
    pair_count: int = 0
    pair_angles: tuple[float, ...] = field(default=())

    def frame_graph(self, T_RB: RigidTransform | None = None) -> FrameGraph:
        """Frame graph over R, C, T, H and, given a robot pose, B."""
        graph = FrameGraph()
        graph.add_edge(FrameId("R"), FrameId("C"), self.T_RC)
        graph.add_edge(FrameId("C"), FrameId("H"), self.T_CH)
        graph.add_edge(FrameId("B"), FrameId("T"), self.T_BT)
        if T_RB is not None:
            graph.add_edge(FrameId("R"), FrameId("B"), T_RB)
        return graph

    def to_dict(self) -> dict[str, Any]:
        return {
            "T_RC": self.T_RC.to_row_major(),
            "T_BT": self.T_BT.to_row_major(),
            "T_CH": self.T_CH.to_row_major(),
            "residual_rot": self.residual_rot,
            "residual_trans": self.residual_trans,
            "pair_count": self.pair_count,
            "pair_angles": list(self.pair_angles),
        }


def register_workcell(
    robot_poses: Sequence[RigidTransform],
    camera_views: Sequence[RigidTransform],
    T_CH: RigidTransform | None = None,
) -> WorkcellRegistration:
    """
    Estimate T_BT and T_RC from index-aligned robot poses T_RB_i and target measurements T_CT_i.

    Raises:
        MisalignedInput: the two lists differ in length
        TooFewPairs, DegenerateMotion: from the solver
    """
    if len(robot_poses) != len(camera_views):
        msg = f"{len(robot_poses)} robot poses but {len(camera_views)} camera views"
        raise MisalignedInput(msg)

    pairs = [
        MotionPair.from_poses(robot_poses[i], robot_poses[j], camera_views[i], camera_views[j])
        for i, j in pair_indices(len(robot_poses))
    ]
    T_BT = solve_axxb_separable(pairs)

    estimates = [compose(compose(T_RB, T_BT), invert(T_CT)) for T_RB, T_CT in zip(robot_poses, camera_views)]
    T_RC = average_transforms(estimates)
    residual_rot = max(rotation_error(estimate, T_RC) for estimate in estimates)
    residual_trans = max(translation_error(estimate, T_RC) for estimate in estimates)
    logger.info(
        "Registered workcell from %d poses (%d pairs): residual %.3e rad, %.3e mm",
        len(robot_poses),
        len(pairs),
        residual_rot,
        residual_trans,
    )
    return WorkcellRegistration(
        T_RC=T_RC,
        T_BT=T_BT,
        T_CH=T_CH if T_CH is not None else RigidTransform.identity(),
        residual_rot=residual_rot,
        residual_trans=residual_trans,
        pair_count=len(pairs),
        pair_angles=tuple(pair.angle for pair in pairs),
    )
