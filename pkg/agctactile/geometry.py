"""
Rigid-body transforms, unit quaternions and the workcell frame graph.

Conventions:
- Translations in millimeters, rotations as 3x3 matrices
- T_ab maps coordinates expressed in frame b into frame a, so T_ac = T_ab . T_bc
- Frame identifiers are opaque strings; "R" robot base, "B" flange, "C" camera,
  "T" target/phantom mount and "H" HySenSe base are conventions only

Serialized transforms are row-major lists of the 16 homogeneous entries.
"""

from __future__ import annotations

from typing import Iterator, Sequence
from collections import deque
from dataclasses import dataclass, field
import logging

from scipy.spatial.transform import Rotation
import numpy as np
import numpy.typing as npt

from agctactile.constants import FRAME_CONSISTENCY_TOLERANCE, ORTHONORMAL_TOLERANCE
from agctactile.errors import InconsistentFrames, InvalidTransform, NoPath
from agctactile.primitives import FrameId

logger = logging.getLogger(__name__)

# compose() projects back onto SO(3) once drift passes this
_REORTHONORMALIZE_THRESHOLD = 1e-10

# Cap on the number of simple paths compared by the consistency check
_MAX_PATHS_CHECKED = 64


def nearest_rotation(matrix: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Project a 3x3 matrix onto SO(3) (polar decomposition through the SVD)."""
    u, _, vt = np.linalg.svd(np.asarray(matrix, dtype=np.float64))
    correction = np.diag([1.0, 1.0, np.sign(np.linalg.det(u @ vt))])
    return u @ correction @ vt


def orthonormality_error(rotation: npt.NDArray[np.float64]) -> float:
    return float(np.abs(rotation.T @ rotation - np.eye(3)).max())


@dataclass(frozen=True, slots=True, eq=False)
class RigidTransform:
    """
    A proper rigid motion: rotation then translation.

    Attributes:
        rotation: 3x3 orthonormal matrix with determinant +1
        translation: 3-vector in millimeters
    """

    rotation: npt.NDArray[np.float64]
    translation: npt.NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        rotation = np.array(self.rotation, dtype=np.float64)
        translation = np.array(self.translation, dtype=np.float64).reshape(-1)
        if rotation.shape != (3, 3) or translation.shape != (3,):
            msg = f"Expected a 3x3 rotation and a 3-vector, got {rotation.shape} and {translation.shape}"
            raise InvalidTransform(msg)
        if not (np.isfinite(rotation).all() and np.isfinite(translation).all()):
            msg = "Transform contains non-finite values"
            raise InvalidTransform(msg)
        error = orthonormality_error(rotation)
        determinant = float(np.linalg.det(rotation))
        if error > ORTHONORMAL_TOLERANCE or abs(determinant - 1.0) > ORTHONORMAL_TOLERANCE:
            msg = "Rotation is not a proper rotation"
            raise InvalidTransform(msg, f"orthonormality error {error:.3e}, determinant {determinant:.12f}")
        rotation.flags.writeable = False
        translation.flags.writeable = False
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> RigidTransform:
        return cls(np.eye(3), np.array([x, y, z], dtype=np.float64))

    @classmethod
    def from_matrix(cls, matrix: npt.ArrayLike) -> RigidTransform:
        """Build from a 4x4 homogeneous matrix; the last row must be (0, 0, 0, 1)."""
        homogeneous = np.asarray(matrix, dtype=np.float64)
        if homogeneous.shape != (4, 4) or not np.allclose(homogeneous[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
            msg = "Homogeneous matrix must be 4x4 with last row (0, 0, 0, 1)"
            raise InvalidTransform(msg)
        return cls(homogeneous[:3, :3], homogeneous[:3, 3])

    @classmethod
    def from_approximate(cls, rotation: npt.ArrayLike, translation: npt.ArrayLike) -> RigidTransform:
        """Build from an estimated rotation, projecting it onto SO(3) first."""
        return cls(nearest_rotation(rotation), np.asarray(translation, dtype=np.float64))

    @classmethod
    def from_row_major(cls, values: Sequence[float]) -> RigidTransform:
        if len(values) != 16:
            msg = f"Expected 16 values, got {len(values)}"
            raise InvalidTransform(msg)
        return cls.from_matrix(np.asarray(values, dtype=np.float64).reshape(4, 4))

    @classmethod
    def from_rotvec(cls, rotvec: npt.ArrayLike, translation: npt.ArrayLike = (0.0, 0.0, 0.0)) -> RigidTransform:
        return cls(Rotation.from_rotvec(np.asarray(rotvec, dtype=np.float64)).as_matrix(), translation)

    def as_matrix(self) -> npt.NDArray[np.float64]:
        homogeneous = np.eye(4)
        homogeneous[:3, :3] = self.rotation
        homogeneous[:3, 3] = self.translation
        return homogeneous

    def to_row_major(self) -> list[float]:
        return [float(value) for value in self.as_matrix().reshape(-1)]

    def apply(self, points: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Transform an (..., 3) array of points."""
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def rotation_angle(self) -> float:
        """Geodesic rotation angle in radians, in [0, pi]."""
        return float(np.linalg.norm(Rotation.from_matrix(self.rotation).as_rotvec()))

    def rotation_axis(self) -> npt.NDArray[np.float64]:
        """Unit rotation axis; the zero vector for the identity rotation."""
        rotvec = Rotation.from_matrix(self.rotation).as_rotvec()
        norm = np.linalg.norm(rotvec)
        return rotvec / norm if norm > 0 else np.zeros(3)

    def quaternion(self) -> UnitQuaternion:
        return UnitQuaternion.from_matrix(self.rotation)

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        return compose(self, other)

    def allclose(self, other: RigidTransform, atol: float = 1e-9) -> bool:
        return bool(np.allclose(self.as_matrix(), other.as_matrix(), rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        rotvec = Rotation.from_matrix(self.rotation).as_rotvec()
        translation = np.round(self.translation, 6).tolist()
        return f"RigidTransform(rotvec={np.round(rotvec, 6).tolist()}, translation={translation})"


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Apply b then a, the homogeneous product a . b."""
    rotation = a.rotation @ b.rotation
    if orthonormality_error(rotation) > _REORTHONORMALIZE_THRESHOLD:
        rotation = nearest_rotation(rotation)
    return RigidTransform(rotation, a.rotation @ b.translation + a.translation)


def invert(t: RigidTransform) -> RigidTransform:
    rotation_t = t.rotation.T
    return RigidTransform(rotation_t, -rotation_t @ t.translation)


def rotation_about(axis: str, degrees: float) -> npt.NDArray[np.float64]:
    """Rotation matrix about a principal axis, e.g. rotation_about("z", 90)."""
    return Rotation.from_euler(axis, degrees, degrees=True).as_matrix()


def rotation_error(a: RigidTransform, b: RigidTransform) -> float:
    """Geodesic angle between two rotations, radians."""
    return compose(invert(a), b).rotation_angle()


def translation_error(a: RigidTransform, b: RigidTransform) -> float:
    return float(np.linalg.norm(a.translation - b.translation))


def random_transform(rng: np.random.Generator, translation_scale: float = 100.0) -> RigidTransform:
    """Uniformly random rotation with a Gaussian translation."""
    rotation = Rotation.random(random_state=rng).as_matrix()
    return RigidTransform(rotation, rng.normal(scale=translation_scale, size=3))


@dataclass(frozen=True, slots=True)
class UnitQuaternion:
    """
    Rotation as a unit quaternion (w, x, y, z).

    q and -q are the same rotation; canonical() picks w >= 0, and when w is zero the
    first non-zero vector component positive.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        norm = float(np.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2))
        if abs(norm - 1.0) > ORTHONORMAL_TOLERANCE:
            msg = f"Quaternion norm is {norm!r}, expected 1"
            raise InvalidTransform(msg)

    @classmethod
    def from_array(cls, values: npt.ArrayLike) -> UnitQuaternion:
        """Normalize a (w, x, y, z) array into a unit quaternion."""
        array = np.asarray(values, dtype=np.float64)
        norm = np.linalg.norm(array)
        if array.shape != (4,) or norm == 0 or not np.isfinite(norm):
            msg = "Quaternion must be a finite non-zero 4-vector"
            raise InvalidTransform(msg)
        w, x, y, z = (float(value) for value in array / norm)
        return cls(w, x, y, z)

    @classmethod
    def from_matrix(cls, rotation: npt.ArrayLike) -> UnitQuaternion:
        x, y, z, w = Rotation.from_matrix(np.asarray(rotation, dtype=np.float64)).as_quat()
        return cls.from_array([w, x, y, z]).canonical()

    def as_array(self) -> npt.NDArray[np.float64]:
        return np.array([self.w, self.x, self.y, self.z])

    def to_matrix(self) -> npt.NDArray[np.float64]:
        return Rotation.from_quat([self.x, self.y, self.z, self.w]).as_matrix()

    def canonical(self) -> UnitQuaternion:
        for component in (self.w, self.x, self.y, self.z):
            if abs(component) > 1e-12:
                if component < 0:
                    return UnitQuaternion(-self.w, -self.x, -self.y, -self.z)
                return self
        return self


def quat_matrix_roundtrip(q: UnitQuaternion) -> UnitQuaternion:
    """quaternion -> matrix -> quaternion, returned in canonical form."""
    return UnitQuaternion.from_matrix(q.to_matrix())


class FrameGraph:
    """
    Network of frames connected by rigid transforms.

    Adding edge (a, b) with T_ab also records (b, a) as its inverse. Single writer; once
    built, reads need no locking.
    """

    def __init__(self) -> None:
        self._edges: dict[tuple[FrameId, FrameId], RigidTransform] = {}
        self._neighbours: dict[FrameId, list[FrameId]] = {}

    @property
    def frames(self) -> set[FrameId]:
        return set(self._neighbours)

    def add_frame(self, frame: FrameId) -> None:
        self._neighbours.setdefault(frame, [])

    def add_edge(self, from_frame: FrameId, to_frame: FrameId, transform: RigidTransform) -> None:
        """Record T_{from,to}; replaces an existing edge between the same frames."""
        for frame in (from_frame, to_frame):
            self.add_frame(frame)
        if to_frame not in self._neighbours[from_frame]:
            self._neighbours[from_frame].append(to_frame)
            self._neighbours[to_frame].append(from_frame)
        self._edges[(from_frame, to_frame)] = transform
        self._edges[(to_frame, from_frame)] = invert(transform)

    def edge(self, from_frame: FrameId, to_frame: FrameId) -> RigidTransform:
        try:
            return self._edges[(from_frame, to_frame)]
        except KeyError:
            raise NoPath(from_frame, to_frame) from None

    def _shortest_path(self, from_frame: FrameId, to_frame: FrameId) -> list[FrameId]:
        if from_frame not in self._neighbours or to_frame not in self._neighbours:
            raise NoPath(from_frame, to_frame)
        previous: dict[FrameId, FrameId | None] = {from_frame: None}
        queue: deque[FrameId] = deque([from_frame])
        while queue:
            current = queue.popleft()
            if current == to_frame:
                break
            for neighbour in self._neighbours[current]:
                if neighbour not in previous:
                    previous[neighbour] = current
                    queue.append(neighbour)
        if to_frame not in previous:
            raise NoPath(from_frame, to_frame)

        path = [to_frame]
        while (step := previous[path[-1]]) is not None:
            path.append(step)
        return path[::-1]

    def simple_paths(self, from_frame: FrameId, to_frame: FrameId) -> Iterator[list[FrameId]]:
        """Depth-first enumeration of every simple path between two frames."""
        if from_frame not in self._neighbours:
            return
        stack: list[tuple[FrameId, list[FrameId]]] = [(from_frame, [from_frame])]
        while stack:
            current, path = stack.pop()
            if current == to_frame:
                yield path
                continue
            for neighbour in reversed(self._neighbours[current]):
                if neighbour not in path:
                    stack.append((neighbour, [*path, neighbour]))

    def path_transform(self, path: Sequence[FrameId]) -> RigidTransform:
        result = RigidTransform.identity()
        for from_frame, to_frame in zip(path, path[1:]):
            result = compose(result, self._edges[(from_frame, to_frame)])
        return result

    def resolve(self, from_frame: FrameId, to_frame: FrameId) -> RigidTransform:
        """
        T_{from,to} as the product of edge transforms along the shortest path.

        Raises:
            NoPath: the frames are disconnected or unknown
        """
        if from_frame == to_frame:
            return RigidTransform.identity()
        return self.path_transform(self._shortest_path(from_frame, to_frame))

    def check_consistency(
        self, from_frame: FrameId, to_frame: FrameId, tolerance: float = FRAME_CONSISTENCY_TOLERANCE
    ) -> int:
        """
        Compare every simple path between two frames against the resolved transform.

        Returns:
            Number of paths compared

        Raises:
            InconsistentFrames: two routes differ by more than the tolerance
            NoPath: the frames are disconnected
        """
        reference = self.resolve(from_frame, to_frame)
        compared = 0
        for path in self.simple_paths(from_frame, to_frame):
            candidate = self.path_transform(path)
            deviation = float(np.abs(candidate.as_matrix() - reference.as_matrix()).max())
            if deviation > tolerance:
                msg = f"Routes from {from_frame} to {to_frame} disagree"
                raise InconsistentFrames(msg, f"path {'->'.join(path)} deviates by {deviation:.3e}")
            compared += 1
            if compared >= _MAX_PATHS_CHECKED:
                logger.debug("Stopped consistency check after %d paths", compared)
                break
        return compared

    def to_dict(self) -> dict[str, list[float]]:
        """Forward edges only, keyed "from->to", as row-major 16-vectors."""
        seen: set[frozenset[FrameId]] = set()
        result: dict[str, list[float]] = {}
        for (from_frame, to_frame), transform in self._edges.items():
            key = frozenset((from_frame, to_frame))
            if key in seen:
                continue
            seen.add(key)
            result[f"{from_frame}->{to_frame}"] = transform.to_row_major()
        return result
