from numpy.testing import assert_array_equal
import numpy as np
import pytest

from agctactile.augment import Standardizer
from agctactile.errors import MissingCheckpoint, ShapeMismatch
from agctactile.nn import build_model, load_checkpoint, save_checkpoint
from agctactile.nn.checkpoint import read_checkpoint


@pytest.fixture
def model(tiny_model_cfg, rng):
    model = build_model(tiny_model_cfg, 11)
    # move the running statistics off their initial values
    model.forward(rng.standard_normal((4, 3, 16, 16)), training=True)
    return model


def test_roundtrip(tmp_path, model, rng):
    standardizer = Standardizer(mean=(0.1, 0.2, 0.3), std=(1.0, 2.0, 3.0))
    path = save_checkpoint(tmp_path / "model.ckpt", model, 7, standardizer, {"stop_reason": "max_epochs"})
    loaded, checkpoint = load_checkpoint(path)
    assert checkpoint.epoch == 7
    assert checkpoint.seed == 11
    assert checkpoint.standardizer == standardizer
    assert checkpoint.extra == {"stop_reason": "max_epochs"}
    assert loaded.config == model.config
    for left, right in zip(loaded.state(), model.state()):
        assert_array_equal(left, right)
    images = rng.standard_normal((3, 3, 16, 16))
    assert_array_equal(loaded.predict_proba(images), model.predict_proba(images))


def test_files_are_byte_identical(tmp_path, tiny_model_cfg):
    first = save_checkpoint(tmp_path / "a.ckpt", build_model(tiny_model_cfg, 2), 0)
    second = save_checkpoint(tmp_path / "b.ckpt", build_model(tiny_model_cfg, 2), 0)
    assert first.read_bytes() == second.read_bytes()
    checkpoint, blob = read_checkpoint(first)
    assert len(blob) == 4 * sum(int(np.prod(entry["shape"])) for entry in checkpoint.tensors)


def test_missing_file(tmp_path):
    with pytest.raises(MissingCheckpoint):
        load_checkpoint(tmp_path / "nothing.ckpt")


def test_foreign_file(tmp_path):
    path = tmp_path / "other.ckpt"
    path.write_bytes(b'{"format":"something-else"}\n')
    with pytest.raises(MissingCheckpoint):
        load_checkpoint(path)


def test_truncated_blob(tmp_path, model):
    path = save_checkpoint(tmp_path / "model.ckpt", model, 0)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(ShapeMismatch):
        load_checkpoint(path)


def test_header_that_does_not_fit_the_model(tmp_path, model):
    path = save_checkpoint(tmp_path / "model.ckpt", model, 0)
    header, _, blob = path.read_bytes().partition(b"\n")
    renamed = header.replace(b"stem.conv.weight", b"stem.conv.kernel")
    path.write_bytes(renamed + b"\n" + blob)
    with pytest.raises(ShapeMismatch):
        load_checkpoint(path)
