"""
Quasi-static gel contact and photometric rendering in place of the HySenSe sensor.

Sensor frame: the gel surface is the z = 0 plane with its outward normal along +z, and
the sensing window is centered on the origin. A phantom pose (phantom -> sensor) places
the phantom above the gel, face down. For a plunge depth d along -z, a window cell whose
phantom surface sits at elevation e = -z_S penetrates by delta = max(0, e + d).

Tissue and gel act as independent springs in series (a Winkler foundation), so a cell
pushes back with k_eff * delta * A_cell and the gel takes the share k / (k + k_gel) of the
penetration. The rendered image shades the smoothed gel indentation with three colored
LEDs.
"""

from __future__ import annotations

from typing import Any, Mapping
from dataclasses import dataclass

from scipy.interpolate import griddata
from scipy.ndimage import gaussian_filter
from scipy.spatial import QhullError
import numpy as np
import numpy.typing as npt

from agctactile.constants import (
    BISECTION_MAX_ITERATIONS,
    FORCE_BAND_LOW,
    K_GEL,
    MAX_CONTACT_TILT_DEG,
    MAX_FORCE_N,
    TRAVEL_LIMIT_MM,
    WORK_AREA_MM,
)
from agctactile.errors import ContactError, ForceNotReached, InvalidConfig, NoContact
from agctactile.geometry import RigidTransform
from agctactile.phantom import PhantomSpec
from agctactile.utils import to_bytes_half_up


@dataclass(frozen=True, slots=True)
class SensorConfig:
    """
    Sensor geometry, mechanics and lighting.

    Attributes:
        window_mm: Sensing extent (height, width) in millimeters
        resolution: Output (height, width) in pixels; the internal camera maps one cell to one pixel
        gel_stiffness: k_gel, N/mm per mm^2
        led_elevation_deg, led_azimuths_deg: LED directions for the R, G and B channels
        force_target: Interaction force to settle at, Newtons
    """

    window_mm: tuple[float, float] = (20.0, 20.0)
    resolution: tuple[int, int] = (256, 256)
    gel_stiffness: float = K_GEL
    led_elevation_deg: float = 45.0
    led_azimuths_deg: tuple[float, float, float] = (0.0, 120.0, 240.0)
    led_intensity: float = 0.65
    ambient: float = 0.25
    force_target: float = MAX_FORCE_N
    smoothing_sigma_mm: float = 0.4
    travel_limit_mm: float = TRAVEL_LIMIT_MM

    def __post_init__(self) -> None:
        if not 0 < self.force_target <= MAX_FORCE_N:
            msg = f"Force target must be in (0, {MAX_FORCE_N}] N, got {self.force_target}"
            raise InvalidConfig(msg)
        if min(self.resolution) < 16:
            msg = f"Sensor resolution must be at least 16x16, got {self.resolution}"
            raise InvalidConfig(msg)
        if not 0 < self.led_elevation_deg <= 90:
            msg = f"LEDs must shine from above the gel, elevation {self.led_elevation_deg} deg"
            raise InvalidConfig(msg)
        if len(self.led_azimuths_deg) != 3:
            msg = "Exactly three LEDs (R, G, B) are supported"
            raise InvalidConfig(msg)
        if not (0 <= self.led_intensity <= 1 and 0 <= self.ambient <= 1):
            msg = "LED intensity and ambient light must lie in [0, 1]"
            raise InvalidConfig(msg)
        if self.gel_stiffness <= 0 or min(self.window_mm) <= 0 or self.smoothing_sigma_mm < 0:
            msg = "Gel stiffness and window must be positive, smoothing non-negative"
            raise InvalidConfig(msg)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], force_target: float = MAX_FORCE_N) -> SensorConfig:
        window = data["window_mm"]
        window_mm = (float(window), float(window)) if isinstance(window, (int, float)) else tuple(window)
        height, width = data["resolution"]
        return cls(
            window_mm=(float(window_mm[0]), float(window_mm[1])),
            resolution=(int(height), int(width)),
            gel_stiffness=float(data["gel_stiffness"]),
            led_elevation_deg=float(data["led_elevation_deg"]),
            led_azimuths_deg=tuple(float(value) for value in data["led_azimuths_deg"]),  # type: ignore[arg-type]
            led_intensity=float(data["led_intensity"]),
            ambient=float(data["ambient"]),
            force_target=force_target,
            smoothing_sigma_mm=float(data["smoothing_sigma_mm"]),
            travel_limit_mm=float(data["travel_limit_mm"]),
        )

    @property
    def led_directions(self) -> npt.NDArray[np.float64]:
        """(3, 3) unit vectors, one row per channel."""
        elevation = np.deg2rad(self.led_elevation_deg)
        azimuths = np.deg2rad(np.asarray(self.led_azimuths_deg))
        return np.column_stack(
            [
                np.cos(elevation) * np.cos(azimuths),
                np.cos(elevation) * np.sin(azimuths),
                np.full(3, np.sin(elevation)),
            ]
        )

    @property
    def cell_size(self) -> tuple[float, float]:
        """(dy, dx) pixel pitch in millimeters."""
        return self.window_mm[0] / self.resolution[0], self.window_mm[1] / self.resolution[1]

    @property
    def cell_area(self) -> float:
        dy, dx = self.cell_size
        return dy * dx

    def cell_centers(self) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        """(x, y) sensor-frame coordinates of every cell center, each shaped like the image."""
        dy, dx = self.cell_size
        xs = -self.window_mm[1] / 2 + (np.arange(self.resolution[1]) + 0.5) * dx
        ys = -self.window_mm[0] / 2 + (np.arange(self.resolution[0]) + 0.5) * dy
        return np.meshgrid(xs, ys)


@dataclass(frozen=True, slots=True, eq=False)
class TactileFrame:
    deformation: npt.NDArray[np.float64]
    image: npt.NDArray[np.uint8]
    achieved_force: float
    pose_used: RigidTransform
    contact_fraction: float
    depth: float


def contact_tilt_deg(pose: RigidTransform) -> float:
    """Angle between the phantom's outward normal and the direction facing the gel (-z)."""
    facing = -float(pose.rotation[2, 2])
    return float(np.rad2deg(np.arccos(np.clip(facing, -1.0, 1.0))))


def surface_in_window(
    spec: PhantomSpec, pose: RigidTransform, cfg: SensorConfig
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Resample the posed phantom surface onto the window cells.

    Returns:
        (elevation, stiffness) per cell; NaN where no phantom surface lies over the cell
    """
    points = pose.apply(spec.surface_points())
    pitch = WORK_AREA_MM / (min(spec.grid_shape) - 1)
    margin = 2.0 * pitch
    inside = (np.abs(points[:, 0]) <= cfg.window_mm[1] / 2 + margin) & (
        np.abs(points[:, 1]) <= cfg.window_mm[0] / 2 + margin
    )
    grid_x, grid_y = cfg.cell_centers()
    empty = np.full(grid_x.shape, np.nan)
    if inside.sum() < 3:
        return empty, empty.copy()

    values = np.column_stack([-points[inside, 2], spec.stiffness.astype(np.float64).ravel()[inside]])
    try:
        resampled = griddata(points[inside, :2], values, (grid_x, grid_y), method="linear")
    except QhullError:
        return empty, empty.copy()
    return resampled[..., 0], resampled[..., 1]


class ContactSolver:
    """Force and gel deformation as functions of the plunge depth for one posed contact."""

    def __init__(
        self,
        elevation: npt.NDArray[np.float64],
        tissue_stiffness: npt.NDArray[np.float64],
        cfg: SensorConfig,
    ) -> None:
        self.cfg = cfg
        self.valid = np.isfinite(elevation) & np.isfinite(tissue_stiffness)
        self.elevation = np.where(self.valid, elevation, -np.inf)
        tissue = np.where(self.valid, tissue_stiffness, 0.0)
        k_gel = cfg.gel_stiffness
        self.effective_stiffness = tissue * k_gel / (tissue + k_gel)
        self.gel_share = tissue / (tissue + k_gel)

    @classmethod
    def for_pose(cls, spec: PhantomSpec, pose: RigidTransform, cfg: SensorConfig) -> ContactSolver:
        tilt = contact_tilt_deg(pose)
        if tilt > MAX_CONTACT_TILT_DEG + 1e-9:
            msg = f"Phantom tilted {tilt:.2f} deg from the gel normal, at most {MAX_CONTACT_TILT_DEG:g} is supported"
            raise ContactError(msg)
        elevation, stiffness = surface_in_window(spec, pose, cfg)
        return cls(elevation, stiffness, cfg)

    @property
    def first_contact_depth(self) -> float:
        """Plunge depth at which the highest surface point touches the gel."""
        return -float(self.elevation[self.valid].max()) if self.valid.any() else np.inf

    def penetration(self, depth: float) -> npt.NDArray[np.float64]:
        return np.maximum(0.0, self.elevation + depth)

    def force(self, depth: float) -> float:
        return float((self.effective_stiffness * self.penetration(depth)).sum() * self.cfg.cell_area)

    def deformation(self, depth: float) -> npt.NDArray[np.float64]:
        return self.penetration(depth) * self.gel_share

    def settle(self) -> tuple[npt.NDArray[np.float64], float, float]:
        """
        Bisect the plunge depth until the force lies in [0.98, 1.0] * force_target.

        Returns:
            (gel deformation, achieved force, depth)

        Raises:
            NoContact: no surface over the window, or none reachable within the travel limit
            ForceNotReached: the travel limit stops short of the force band, or bisection runs out
                of steps before landing in it
        """
        target = self.cfg.force_target
        low_band = FORCE_BAND_LOW * target
        travel = self.cfg.travel_limit_mm
        if not self.valid.any() or self.first_contact_depth >= travel or self.force(travel) <= 0:
            msg = "Phantom never touches the gel within the travel limit"
            raise NoContact(msg)
        if self.force(travel) < low_band:
            msg = f"Force at full travel is {self.force(travel):.3f} N, below {low_band:.3f} N"
            raise ForceNotReached(msg)

        lo, hi = self.first_contact_depth, travel
        for _ in range(BISECTION_MAX_ITERATIONS):
            middle = 0.5 * (lo + hi)
            force = self.force(middle)
            if force > target:
                hi = middle
            elif force < low_band:
                lo = middle
            else:
                depth = middle
                break
        else:
            msg = f"Bisection stopped outside [{low_band:.3f}, {target:.3f}] N after {BISECTION_MAX_ITERATIONS} steps"
            raise ForceNotReached(msg, f"last bracket {lo:.6f}..{hi:.6f} mm")
        return self.deformation(depth), self.force(depth), depth


def settle_contact(
    spec: PhantomSpec, pose: RigidTransform, cfg: SensorConfig
) -> tuple[npt.NDArray[np.float64], float, float]:
    """(gel deformation field, achieved force, plunge depth) for a posed phantom."""
    return ContactSolver.for_pose(spec, pose, cfg).settle()


def _smoothed(deformation: npt.NDArray[np.float64], cfg: SensorConfig) -> npt.NDArray[np.float64]:
    if cfg.smoothing_sigma_mm <= 0:
        return deformation
    dy, dx = cfg.cell_size
    return gaussian_filter(deformation, (cfg.smoothing_sigma_mm / dy, cfg.smoothing_sigma_mm / dx), mode="nearest")


def surface_normals(deformation: npt.NDArray[np.float64], cfg: SensorConfig) -> npt.NDArray[np.float64]:
    """
    Unit normals of the indented gel surface z = -D(x, y), (H, W, 3).

    Central differences inside, one-sided at the border.
    """
    dy, dx = cfg.cell_size
    grad_y, grad_x = np.gradient(deformation, dy, dx)
    normals = np.stack([grad_x, grad_y, np.ones_like(deformation)], axis=-1)
    return normals / np.linalg.norm(normals, axis=-1, keepdims=True)


def shade(deformation: npt.NDArray[np.float64], cfg: SensorConfig, smooth: bool = True) -> npt.NDArray[np.float64]:
    """Per-channel intensity before clamping: ambient + intensity * max(0, n . l_c)."""
    field = _smoothed(np.asarray(deformation, dtype=np.float64), cfg) if smooth else deformation
    lambert = np.maximum(0.0, surface_normals(field, cfg) @ cfg.led_directions.T)
    return cfg.ambient + cfg.led_intensity * lambert


def render_image(deformation: npt.NDArray[np.float64], cfg: SensorConfig) -> npt.NDArray[np.uint8]:
    """Shade the gel smoothed by a sigma_mm Gaussian into an (H, W, 3) byte image."""
    return to_bytes_half_up(np.clip(shade(deformation, cfg), 0.0, 1.0))


def capture(spec: PhantomSpec, pose: RigidTransform, cfg: SensorConfig) -> TactileFrame:
    """Settle the contact and render it; NoContact propagates."""
    deformation, force, depth = settle_contact(spec, pose, cfg)
    return TactileFrame(
        deformation=deformation,
        image=render_image(deformation, cfg),
        achieved_force=force,
        pose_used=pose,
        contact_fraction=float((deformation > 0).mean()),
        depth=depth,
    )
