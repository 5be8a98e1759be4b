from scipy.ndimage import map_coordinates
import numpy as np
import pytest

from agctactile import tactile_sim
from agctactile.collection import CollectionConfig, sample_contact_pose
from agctactile.constants import MAX_FORCE_N
from agctactile.errors import ForceNotReached, InvalidConfig, NoContact
from agctactile.geometry import RigidTransform
from agctactile.phantom import PhantomSpec, generate_phantom
from agctactile.tactile_sim import ContactSolver, SensorConfig, capture, render_image, settle_contact, shade
from agctactile.types import BorrmannClass

FACE_DOWN = np.diag([1.0, -1.0, -1.0])


def _flat_phantom(height=2.0, stiffness=0.02, size=32, stiff_left_half=False):
    heights = np.full((size, size), height, dtype=np.float32)
    field = np.full((size, size), stiffness, dtype=np.float32)
    if stiff_left_half:
        field[:, : size // 2] = 0.2
    return PhantomSpec("flat-00", BorrmannClass.IV, 0, heights, field)


def _centered_pose(standoff=13.0, center=(15.0, 15.0)):
    anchor = np.array([center[0], center[1], 0.0])
    return RigidTransform(FACE_DOWN, np.array([0.0, 0.0, standoff]) - FACE_DOWN @ anchor)


@pytest.fixture
def sensor() -> SensorConfig:
    return SensorConfig(resolution=(64, 64))


def test_flat_plate_matches_closed_form(sensor):
    height, stiffness, standoff = 2.0, 0.02, 13.0
    deformation, force, depth = settle_contact(_flat_phantom(height, stiffness), _centered_pose(standoff), sensor)
    k_eff = stiffness * sensor.gel_stiffness / (stiffness + sensor.gel_stiffness)
    indentation = MAX_FORCE_N / (k_eff * 20.0 * 20.0)
    assert 0.98 * MAX_FORCE_N <= force <= MAX_FORCE_N
    assert abs(depth - (standoff - height + indentation)) <= 0.02 * indentation
    assert np.all(deformation > 0)


def test_phantom_outside_window_has_no_contact(sensor):
    with pytest.raises(NoContact):
        settle_contact(_flat_phantom(), _centered_pose(center=(200.0, 15.0)), sensor)


def test_bisection_without_enough_steps_refuses_to_settle(sensor, monkeypatch):
    monkeypatch.setattr(tactile_sim, "BISECTION_MAX_ITERATIONS", 1)
    with pytest.raises(ForceNotReached):
        settle_contact(_flat_phantom(), _centered_pose(), sensor)


def test_force_is_monotone_in_depth(sensor):
    cfg = CollectionConfig()
    for seed in range(20):
        generator = np.random.default_rng(seed)
        spec = generate_phantom(list(BorrmannClass)[seed % 4], seed)
        solver = ContactSolver.for_pose(spec, sample_contact_pose(generator, spec, cfg), sensor)
        forces = [solver.force(depth) for depth in np.linspace(0.0, 15.0, 40)]
        assert all(later >= earlier for earlier, later in zip(forces, forces[1:]))


def test_series_springs_split_the_deformation(sensor):
    deformation, _, _ = settle_contact(_flat_phantom(stiff_left_half=True), _centered_pose(), sensor)
    g = sensor.gel_stiffness / 0.02
    expected = (10 / (10 + g)) / (1 / (1 + g))
    assert deformation.max() / deformation.min() == pytest.approx(expected, rel=1e-6)


def test_deformation_is_zero_outside_support(sensor):
    spec = generate_phantom(BorrmannClass.I, 4)
    deformation, _, _ = settle_contact(spec, _centered_pose(), sensor)
    assert deformation.min() >= 0.0
    assert (deformation == 0).any()


def test_flat_gel_renders_uniform_image(sensor):
    image = render_image(np.zeros(sensor.resolution), sensor)
    expected = round((sensor.ambient + sensor.led_intensity * np.sin(np.deg2rad(sensor.led_elevation_deg))) * 255)
    assert np.all(image == expected)


def test_led_symmetry_under_rotation():
    sensor = SensorConfig(resolution=(128, 128))
    xs, ys = sensor.cell_centers()
    bump = 0.5 * np.exp(-(xs**2 + ys**2) / (2 * 3.0**2))
    field = shade(bump, sensor, smooth=False)
    dy, dx = sensor.cell_size

    def sample(channel, angle, radius=3.0):
        x, y = radius * np.cos(angle), radius * np.sin(angle)
        row = (y + sensor.window_mm[0] / 2) / dy - 0.5
        col = (x + sensor.window_mm[1] / 2) / dx - 0.5
        return float(map_coordinates(field[..., channel], [[row], [col]], order=1)[0])

    for angle in np.linspace(0, 2 * np.pi, 7, endpoint=False):
        for channel in range(3):
            rotated = sample((channel + 1) % 3, angle + 2 * np.pi / 3)
            assert abs(sample(channel, angle) - rotated) <= 1.0 / 255


def test_deeper_indentation_shades_further_from_flat():
    sensor = SensorConfig(resolution=(64, 64))
    xs, ys = sensor.cell_centers()
    bump = 0.2 * np.exp(-(xs**2 + ys**2) / 8.0)
    flat = shade(np.zeros_like(bump), sensor, smooth=False)
    shallow = np.abs(shade(bump, sensor, smooth=False) - flat).mean()
    deep = np.abs(shade(2 * bump, sensor, smooth=False) - flat).mean()
    assert deep > shallow > 0


def test_rendering_is_local(sensor):
    spec = generate_phantom(BorrmannClass.II, 3, cfg=None)
    pose = _centered_pose()
    heights = spec.heights.copy()
    heights[:, :8] += 3.0
    altered = PhantomSpec(spec.phantom_id, spec.borrmann_class, spec.seed, heights, spec.stiffness, spec.params)
    assert np.array_equal(capture(spec, pose, sensor).image, capture(altered, pose, sensor).image)


def test_flat_diffuse_contact_is_broad(sensor):
    cfg = CollectionConfig(tilt_max_deg=0.0)
    for seed in range(3):
        spec = generate_phantom(BorrmannClass.IV, seed)
        frame = capture(spec, sample_contact_pose(np.random.default_rng(seed), spec, cfg), sensor)
        assert frame.contact_fraction > 0.5
        assert frame.achieved_force <= MAX_FORCE_N


def test_capture_is_deterministic(sensor):
    spec = generate_phantom(BorrmannClass.III, 8)
    pose = _centered_pose()
    first = capture(spec, pose, sensor)
    second = capture(spec, pose, sensor)
    assert np.array_equal(first.image, second.image)
    assert first.achieved_force == second.achieved_force
    assert first.image.shape == (64, 64, 3)
    assert first.image.dtype == np.uint8


@pytest.mark.parametrize(
    "kwargs", [{"force_target": 3.5}, {"force_target": 0.0}, {"resolution": (8, 8)}, {"led_azimuths_deg": (0.0, 90.0)}]
)
def test_sensor_config_validation(kwargs):
    with pytest.raises(InvalidConfig):
        SensorConfig(**kwargs)
