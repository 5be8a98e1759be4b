"""
Procedural Borrmann-type tumor phantoms.

A phantom is a height field (mm above the rigid backplate) and a contact-stiffness field
sampled on an N x N grid of nodes spanning the closed 30 mm x 30 mm working area. Every
template sits on a 1.5 mm base layer with a low mucosal ripple:

- Type I: lobulated super-Gaussian dome; tumor region is the dome footprint
- Type II: crater with a sharp raised rim; tumor region is rim plus floor
- Type III: the same crater core with a shallow margin falloff and a tumor region that
  infiltrates 5.5-8 mm past the rim along an irregular boundary
- Type IV: nearly flat; tumor stiffness covers an irregular patch of most of the area

Generation is a pure function of (class, seed). Types II and III draw the crater core from
the same stream, so for a shared seed their rim cores coincide.
"""

from __future__ import annotations

from typing import Any, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
import logging

from scipy.interpolate import RegularGridInterpolator
from scipy.ndimage import gaussian_filter
import numpy as np
import numpy.typing as npt

from agctactile.constants import (
    BASE_LAYER_MM,
    K_HEALTHY,
    K_TUMOR,
    MAX_HEIGHT_MM,
    PHANTOMS_PER_CLASS,
    RIPPLE_MM,
    WORK_AREA_MM,
)
from agctactile.errors import InvalidConfig, OutOfBounds, PhantomError
from agctactile.primitives import PhantomId
from agctactile.types import BorrmannClass
from agctactile.utils import derive_seed, read_json, write_json

logger = logging.getLogger(__name__)

# 80% of the rim excess is gone after the falloff length: exp(-s / L) = 1/5
_LN5 = float(np.log(5.0))
_TYPE_II_FALLOFF_MM = 1.5

# Streams drawn from each phantom seed
_CORE_STREAM = 0
_RIPPLE_STREAM = 1
_CLASS_STREAM = 2


@dataclass(frozen=True, slots=True)
class PhantomBankConfig:
    grid_size: int = 128
    per_class: int = PHANTOMS_PER_CLASS
    k_healthy: float = K_HEALTHY
    k_tumor: float = K_TUMOR

    def __post_init__(self) -> None:
        if self.grid_size < 2 or self.per_class < 1:
            msg = f"Phantom grid needs at least 2 nodes and 1 phantom per class, got {self.grid_size}, {self.per_class}"
            raise InvalidConfig(msg)
        if not 0 < self.k_healthy < self.k_tumor:
            msg = f"Stiffness must satisfy 0 < k_healthy < k_tumor, got {self.k_healthy}, {self.k_tumor}"
            raise InvalidConfig(msg)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> PhantomBankConfig:
        return cls(
            grid_size=int(data["grid_size"]),
            per_class=int(data["per_class"]),
            k_healthy=float(data["k_healthy"]),
            k_tumor=float(data["k_tumor"]),
        )


@dataclass(frozen=True, eq=False)
class PhantomSpec:
    """
    One synthetic tumor phantom.

    Attributes:
        phantom_id: e.g. "II-04"
        borrmann_class: Tumor type
        seed: 64-bit generation seed
        heights: (N, N) float32 heights in mm, indexed [y, x]
        stiffness: (N, N) float32 contact stiffness, N/mm per mm^2 of cell area
        params: The sampled shape parameters
    """

    phantom_id: PhantomId
    borrmann_class: BorrmannClass
    seed: int
    heights: npt.NDArray[np.float32]
    stiffness: npt.NDArray[np.float32]
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        heights = np.ascontiguousarray(self.heights, dtype=np.float32)
        stiffness = np.ascontiguousarray(self.stiffness, dtype=np.float32)
        if heights.ndim != 2 or heights.shape != stiffness.shape or min(heights.shape) < 2:
            msg = f"Height {heights.shape} and stiffness {stiffness.shape} grids must match and be at least 2x2"
            raise PhantomError(msg)
        heights.flags.writeable = False
        stiffness.flags.writeable = False
        object.__setattr__(self, "heights", heights)
        object.__setattr__(self, "stiffness", stiffness)

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.heights.shape[0], self.heights.shape[1]

    @property
    def node_x(self) -> npt.NDArray[np.float64]:
        return np.linspace(0.0, WORK_AREA_MM, self.grid_shape[1])

    @property
    def node_y(self) -> npt.NDArray[np.float64]:
        return np.linspace(0.0, WORK_AREA_MM, self.grid_shape[0])

    @property
    def tumor_mask(self) -> npt.NDArray[np.bool_]:
        k_tumor = float(self.params.get("k_tumor", K_TUMOR))
        return self.stiffness >= 0.9 * k_tumor

    @cached_property
    def _height_interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator((self.node_y, self.node_x), self.heights.astype(np.float64))

    @cached_property
    def _stiffness_interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator((self.node_y, self.node_x), self.stiffness.astype(np.float64))

    def surface_points(self) -> npt.NDArray[np.float64]:
        """(N*N, 3) node coordinates (x, y, height) in the phantom frame."""
        grid_x, grid_y = np.meshgrid(self.node_x, self.node_y)
        return np.column_stack([grid_x.ravel(), grid_y.ravel(), self.heights.astype(np.float64).ravel()])

    def header(self) -> dict[str, Any]:
        return {
            "phantom_id": self.phantom_id,
            "borrmann_class": self.borrmann_class.value,
            "seed": self.seed,
            "params": self.params,
            "grid": list(self.grid_shape),
        }


def sample_field(spec: PhantomSpec, x: float, y: float) -> tuple[float, float]:
    """
    Bilinear (height mm, stiffness) at a point of the working area; exact at grid nodes.

    Raises:
        OutOfBounds: the point lies outside [0, 30] x [0, 30] mm
    """
    if not (0.0 <= x <= WORK_AREA_MM and 0.0 <= y <= WORK_AREA_MM):
        msg = f"({x}, {y}) mm lies outside the {WORK_AREA_MM:g} mm working area"
        raise OutOfBounds(msg)
    point = np.array([[y, x]])
    return float(spec._height_interpolator(point)[0]), float(spec._stiffness_interpolator(point)[0])


def fractal_noise(
    rng: np.random.Generator,
    shape: tuple[int, int],
    base_sigma: float,
    octaves: int = 4,
    persistence: float = 0.5,
    lacunarity: float = 2.0,
) -> npt.NDArray[np.float64]:
    """
    Sum of Gaussian-smoothed white-noise octaves, scaled into [-1, 1].

    Args:
        base_sigma: Smoothing of the coarsest octave, grid cells
    """
    total = np.zeros(shape)
    amplitude = 1.0
    sigma = base_sigma
    for _ in range(octaves):
        layer = gaussian_filter(rng.standard_normal(shape), max(sigma, 0.5), mode="wrap")
        peak = np.abs(layer).max()
        if peak > 0:
            total += amplitude * layer / peak
        amplitude *= persistence
        sigma /= lacunarity
    peak = np.abs(total).max()
    return total / peak if peak > 0 else total


class _Grid:
    """Node coordinates shared by the templates."""

    def __init__(self, size: int) -> None:
        axis = np.linspace(0.0, WORK_AREA_MM, size)
        self.size = size
        self.pitch = WORK_AREA_MM / (size - 1)
        self.x, self.y = np.meshgrid(axis, axis)

    def polar(self, cx: float, cy: float) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        dx = self.x - cx
        dy = self.y - cy
        return np.hypot(dx, dy), np.arctan2(dy, dx)


def _ripple(rng: np.random.Generator, grid: _Grid) -> tuple[npt.NDArray[np.float64], float]:
    amplitude = float(rng.uniform(0.5, 1.0)) * RIPPLE_MM
    return amplitude * fractal_noise(rng, (grid.size, grid.size), base_sigma=1.0 / grid.pitch), amplitude


def _dome(grid: _Grid, core: np.random.Generator, extra: np.random.Generator) -> tuple[Any, Any, dict[str, Any]]:
    cx, cy = (float(value) for value in 15.0 + core.uniform(-2.0, 2.0, size=2))
    peak = float(core.uniform(5.0, 9.0))
    radius = float(core.uniform(6.0, 10.0))
    amplitude = peak - BASE_LAYER_MM
    rho, _ = grid.polar(cx, cy)
    dome = np.exp(-((rho / radius) ** 4))
    profile = amplitude * dome
    footprint = dome >= 0.05

    lobes = []
    count = int(extra.integers(2, 5))
    offsets = extra.uniform(-0.4, 0.4, size=count)
    for index in range(count):
        angle = 2.0 * np.pi * (index + offsets[index]) / count
        distance = radius * float(extra.uniform(0.65, 0.75))
        width = radius * float(extra.uniform(0.12, 0.18))
        height = amplitude * float(extra.uniform(0.1, 0.25))
        lx, ly = cx + distance * np.cos(angle), cy + distance * np.sin(angle)
        lobe_rho, _ = grid.polar(lx, ly)
        lobe = np.exp(-0.5 * (lobe_rho / width) ** 2)
        profile = profile + height * lobe
        footprint |= lobe >= 0.05
        lobes.append({"x": lx, "y": ly, "width": width, "height": height})

    params = {"center": [cx, cy], "peak_height": peak, "radius": radius, "lobes": lobes}
    return profile, footprint, params


def _crater_core(grid: _Grid, core: np.random.Generator) -> dict[str, float]:
    cx, cy = (float(value) for value in 15.0 + core.uniform(-0.5, 0.5, size=2))
    return {
        "cx": cx,
        "cy": cy,
        "crater_radius": float(core.uniform(4.0, 6.0)),
        "rim_width": float(core.uniform(2.0, 3.0)),
        "rim_height": float(core.uniform(3.0, 5.0)),
        "floor_depth": float(core.uniform(0.5, 1.0)),
    }


def _crater_profile(grid: _Grid, shape: Mapping[str, float], falloff_length: float) -> npt.NDArray[np.float64]:
    """Height above the base layer: depressed floor, raised rim, exponential margin falloff."""
    rho, _ = grid.polar(shape["cx"], shape["cy"])
    inner = shape["crater_radius"]
    outer = inner + shape["rim_width"]
    rim_excess = shape["rim_height"] - BASE_LAYER_MM
    floor = -shape["floor_depth"]

    # floor rises to the rim top over the inner half of the rim
    rise = np.clip((rho - inner) / (0.5 * shape["rim_width"]), 0.0, 1.0)
    smooth = rise * rise * (3.0 - 2.0 * rise)
    profile = floor + (rim_excess - floor) * smooth
    outside = rho > outer
    profile[outside] = rim_excess * np.exp(-(rho[outside] - outer) / falloff_length)
    return profile


def _crater(
    grid: _Grid, core: np.random.Generator, extra: np.random.Generator, infiltrating: bool
) -> tuple[Any, Any, dict[str, Any]]:
    shape = _crater_core(grid, core)
    rho, theta = grid.polar(shape["cx"], shape["cy"])
    outer = shape["crater_radius"] + shape["rim_width"]
    params: dict[str, Any] = dict(shape)

    if not infiltrating:
        params["falloff_mm"] = _TYPE_II_FALLOFF_MM
        return _crater_profile(grid, shape, _TYPE_II_FALLOFF_MM / _LN5), rho <= outer, params

    falloff = float(extra.uniform(5.0, 8.0))
    # infiltration depth past the rim, irregular in angle, always within [5.5, 8] mm
    mean_extension = float(extra.uniform(6.25, 7.25))
    modulation_amplitude = float(extra.uniform(0.3, 1.0)) * min(mean_extension - 5.5, 8.0 - mean_extension)
    harmonics = np.arange(2, 6)
    weights = extra.uniform(0.2, 1.0, size=len(harmonics))
    phases = extra.uniform(0.0, 2.0 * np.pi, size=len(harmonics))
    modulation = sum(w * np.cos(k * theta + p) for k, w, p in zip(harmonics, weights, phases)) / weights.sum()
    extension = mean_extension + modulation_amplitude * modulation
    params.update(
        {
            "falloff_mm": falloff,
            "infiltration_mean_mm": mean_extension,
            "infiltration_modulation_mm": modulation_amplitude,
        }
    )
    return _crater_profile(grid, shape, falloff / _LN5), rho <= outer + extension, params


def _diffuse(grid: _Grid, core: np.random.Generator, extra: np.random.Generator) -> tuple[Any, Any, dict[str, Any]]:
    peak_to_peak = float(core.uniform(0.3, 0.5))
    undulation = fractal_noise(core, (grid.size, grid.size), base_sigma=4.0 / grid.pitch, octaves=2)
    profile = 0.5 * peak_to_peak * undulation
    coverage = float(extra.uniform(0.62, 0.85))
    patch_field = fractal_noise(extra, (grid.size, grid.size), base_sigma=3.0 / grid.pitch, octaves=3)
    threshold = np.quantile(patch_field, 1.0 - coverage)
    return profile, patch_field >= threshold, {"undulation_mm": peak_to_peak, "coverage": coverage}


def generate_phantom(
    borrmann_class: BorrmannClass,
    seed: int,
    phantom_id: str | None = None,
    cfg: PhantomBankConfig | None = None,
) -> PhantomSpec:
    """Deterministic phantom for (class, seed)."""
    cfg = cfg or PhantomBankConfig()
    grid = _Grid(cfg.grid_size)
    core = np.random.default_rng([seed, _CORE_STREAM])
    extra = np.random.default_rng([seed, _CLASS_STREAM])
    ripple, ripple_amplitude = _ripple(np.random.default_rng([seed, _RIPPLE_STREAM]), grid)

    match borrmann_class:
        case BorrmannClass.I:
            profile, mask, params = _dome(grid, core, extra)
        case BorrmannClass.II:
            profile, mask, params = _crater(grid, core, extra, infiltrating=False)
        case BorrmannClass.III:
            profile, mask, params = _crater(grid, core, extra, infiltrating=True)
        case BorrmannClass.IV:
            profile, mask, params = _diffuse(grid, core, extra)

    heights = np.clip(BASE_LAYER_MM + profile + ripple, 0.0, MAX_HEIGHT_MM)
    stiffness = np.where(mask, cfg.k_tumor, cfg.k_healthy)
    params.update({"ripple_mm": ripple_amplitude, "k_healthy": cfg.k_healthy, "k_tumor": cfg.k_tumor})
    return PhantomSpec(
        phantom_id=PhantomId(phantom_id or f"{borrmann_class.value}-{seed}"),
        borrmann_class=borrmann_class,
        seed=seed,
        heights=heights,
        stiffness=stiffness,
        params=params,
    )


def phantom_seed(master_seed: int, borrmann_class: BorrmannClass, index: int) -> int:
    return derive_seed(master_seed, "phantom", borrmann_class.value, index)


def build_phantom_bank(master_seed: int, cfg: PhantomBankConfig | None = None, jobs: int = 1) -> list[PhantomSpec]:
    """per_class phantoms of every class, ids "{class}-{index:02}", ordered by class then index."""
    cfg = cfg or PhantomBankConfig()
    jobs_list = [
        (borrmann_class, phantom_seed(master_seed, borrmann_class, index), f"{borrmann_class.value}-{index:02}")
        for borrmann_class in BorrmannClass
        for index in range(cfg.per_class)
    ]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        bank = list(executor.map(lambda job: generate_phantom(job[0], job[1], job[2], cfg), jobs_list))
    logger.info("Generated %d phantoms from master seed %d", len(bank), master_seed)
    return bank


def save_phantom(spec: PhantomSpec, directory: Path) -> Path:
    """Write {id}.json plus {id}.height.f32 and {id}.stiffness.f32 (little-endian, row-major)."""
    directory.mkdir(parents=True, exist_ok=True)
    header_path = directory / f"{spec.phantom_id}.json"
    write_json(header_path, spec.header())
    (directory / f"{spec.phantom_id}.height.f32").write_bytes(spec.heights.astype("<f4").tobytes())
    (directory / f"{spec.phantom_id}.stiffness.f32").write_bytes(spec.stiffness.astype("<f4").tobytes())
    return header_path


def load_phantom(header_path: Path) -> PhantomSpec:
    header = read_json(header_path)
    rows, cols = header["grid"]
    directory = header_path.parent
    phantom_id = header["phantom_id"]
    heights = np.frombuffer((directory / f"{phantom_id}.height.f32").read_bytes(), dtype="<f4").reshape(rows, cols)
    stiffness = np.frombuffer((directory / f"{phantom_id}.stiffness.f32").read_bytes(), dtype="<f4").reshape(rows, cols)
    return PhantomSpec(
        phantom_id=PhantomId(phantom_id),
        borrmann_class=BorrmannClass(header["borrmann_class"]),
        seed=int(header["seed"]),
        heights=heights,
        stiffness=stiffness,
        params=header["params"],
    )


def save_bank(bank: list[PhantomSpec], directory: Path) -> list[Path]:
    return [save_phantom(spec, directory) for spec in bank]


def load_bank(directory: Path) -> list[PhantomSpec]:
    """Every phantom under the directory, in bank order (class, then index)."""
    order = {borrmann_class.value: position for position, borrmann_class in enumerate(BorrmannClass)}
    headers = sorted(directory.glob("*.json"), key=lambda path: (order[path.stem.split("-")[0]], path.stem))
    if not headers:
        msg = f"No phantoms found under {directory}"
        raise PhantomError(msg)
    return [load_phantom(path) for path in headers]
