from numpy.testing import assert_allclose
import numpy as np
import pytest

from agctactile.constants import MAX_HEIGHT_MM, RIPPLE_MM, WORK_AREA_MM
from agctactile.errors import InvalidConfig, OutOfBounds
from agctactile.phantom import (
    PhantomBankConfig,
    PhantomSpec,
    build_phantom_bank,
    generate_phantom,
    load_bank,
    sample_field,
    save_bank,
)
from agctactile.types import BorrmannClass


def _flat_spec(heights, stiffness=None):
    heights = np.asarray(heights, dtype=np.float32)
    if stiffness is None:
        stiffness = np.full(heights.shape, 0.02, dtype=np.float32)
    return PhantomSpec("test-00", BorrmannClass.IV, 0, heights, stiffness)


def test_sample_field_exact_at_nodes(rng):
    spec = generate_phantom(BorrmannClass.I, 7, cfg=PhantomBankConfig(grid_size=32))
    for row, col in rng.integers(0, 32, size=(10, 2)):
        height, stiffness = sample_field(spec, spec.node_x[col], spec.node_y[row])
        assert height == pytest.approx(float(spec.heights[row, col]), abs=1e-12)
        assert stiffness == pytest.approx(float(spec.stiffness[row, col]), abs=1e-12)


def test_sample_field_bilinear():
    assert sample_field(_flat_spec([[2.0, 2.0], [2.0, 2.0]]), 15.0, 15.0)[0] == pytest.approx(2.0)
    assert sample_field(_flat_spec([[0.0, 0.0], [0.0, 4.0]]), 15.0, 15.0)[0] == pytest.approx(1.0)


@pytest.mark.parametrize(("x", "y"), [(-0.1, 10.0), (10.0, 30.01), (31.0, 31.0)])
def test_sample_field_out_of_bounds(x, y):
    with pytest.raises(OutOfBounds):
        sample_field(_flat_spec([[0.0, 0.0], [0.0, 0.0]]), x, y)


@pytest.mark.parametrize("borrmann_class", list(BorrmannClass))
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_field_invariants(borrmann_class, seed):
    cfg = PhantomBankConfig(grid_size=64)
    spec = generate_phantom(borrmann_class, seed, cfg=cfg)
    assert spec.heights.min() >= 0.0
    assert spec.heights.max() <= MAX_HEIGHT_MM
    assert set(np.unique(spec.stiffness)) <= {np.float32(cfg.k_healthy), np.float32(cfg.k_tumor)}
    tumor = spec.tumor_mask
    assert tumor.any()
    assert not tumor.all()
    assert spec.stiffness[tumor].mean() >= 5 * spec.stiffness[~tumor].mean()
    assert_allclose(spec.node_x[[0, -1]], [0.0, WORK_AREA_MM])


def test_generation_is_deterministic():
    first = generate_phantom(BorrmannClass.III, 99)
    second = generate_phantom(BorrmannClass.III, 99)
    assert np.array_equal(first.heights, second.heights)
    assert np.array_equal(first.stiffness, second.stiffness)
    assert first.params == second.params


@pytest.mark.parametrize("seed", range(5))
def test_polypoid_dome_peak(seed):
    spec = generate_phantom(BorrmannClass.I, seed)
    cx, cy = spec.params["center"]
    height, stiffness = sample_field(spec, cx, cy)
    assert spec.params["peak_height"] >= 5.0
    assert abs(height - spec.params["peak_height"]) <= RIPPLE_MM + 0.02
    assert stiffness == pytest.approx(spec.params["k_tumor"])


@pytest.mark.parametrize("seed", range(5))
def test_flat_diffuse_relief(seed):
    spec = generate_phantom(BorrmannClass.IV, seed)
    assert float(spec.heights.max() - spec.heights.min()) <= 0.8 + RIPPLE_MM


@pytest.mark.parametrize("seed", range(5))
def test_infiltration_separates_ii_from_iii(seed):
    sharp = generate_phantom(BorrmannClass.II, seed)
    diffuse = generate_phantom(BorrmannClass.III, seed)
    cx, cy = sharp.params["cx"], sharp.params["cy"]
    assert (cx, cy) == (diffuse.params["cx"], diffuse.params["cy"])

    core = sharp.params["crater_radius"] * 0.8
    assert sample_field(sharp, cx + core, cy)[0] == pytest.approx(sample_field(diffuse, cx + core, cy)[0], abs=1e-6)

    probe = cx + sharp.params["crater_radius"] + sharp.params["rim_width"] + 5.0
    sharp_height, sharp_stiffness = sample_field(sharp, probe, cy)
    diffuse_height, diffuse_stiffness = sample_field(diffuse, probe, cy)
    assert diffuse_height > sharp_height
    assert diffuse_stiffness > sharp_stiffness


def test_bank_layout(small_bank_cfg):
    bank = build_phantom_bank(3, small_bank_cfg)
    assert len(bank) == 4 * small_bank_cfg.per_class
    assert [spec.phantom_id for spec in bank[:3]] == ["I-00", "I-01", "I-02"]
    for borrmann_class in BorrmannClass:
        assert sum(spec.borrmann_class == borrmann_class for spec in bank) == small_bank_cfg.per_class


def test_default_bank_size():
    cfg = PhantomBankConfig(grid_size=8)
    bank = build_phantom_bank(0, cfg)
    assert len(bank) == 44
    assert bank[-1].phantom_id == "IV-10"


def test_bank_independent_of_jobs(small_bank_cfg):
    serial = build_phantom_bank(5, small_bank_cfg, jobs=1)
    threaded = build_phantom_bank(5, small_bank_cfg, jobs=4)
    for left, right in zip(serial, threaded):
        assert left.seed == right.seed
        assert np.array_equal(left.heights, right.heights)


def test_master_seed_changes_phantoms(small_bank_cfg):
    first = build_phantom_bank(1, small_bank_cfg)[0]
    second = build_phantom_bank(2, small_bank_cfg)[0]
    assert first.seed != second.seed
    assert first.params != second.params


def test_bank_files_roundtrip(tmp_path, small_bank_cfg):
    bank = build_phantom_bank(4, small_bank_cfg)
    save_bank(bank, tmp_path / "a")
    save_bank(build_phantom_bank(4, small_bank_cfg), tmp_path / "b")
    for path in sorted((tmp_path / "a").iterdir()):
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()

    loaded = load_bank(tmp_path / "a")
    assert [spec.phantom_id for spec in loaded] == [spec.phantom_id for spec in bank]
    for original, restored in zip(bank, loaded):
        assert np.array_equal(original.heights, restored.heights)
        assert np.array_equal(original.stiffness, restored.stiffness)
        assert restored.borrmann_class == original.borrmann_class


@pytest.mark.parametrize(
    "kwargs", [{"grid_size": 1}, {"per_class": 0}, {"k_healthy": 0.3, "k_tumor": 0.2}, {"k_healthy": 0.0}]
)
def test_bank_config_validation(kwargs):
    with pytest.raises(InvalidConfig):
        PhantomBankConfig(**kwargs)
