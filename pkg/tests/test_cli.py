from pathlib import Path

import pytest

from agctactile import __version__
from agctactile.cli import build_parser, dispatch, overrides_from
from agctactile.constants import REGISTRATION_FILE, REPORT_FILE, RESOLVED_CONFIG_FILE
from agctactile.experiment import load_baseline
from agctactile.utils import read_json

SMALL_RUN = """\
jobs: 2
phantom:
  grid_size: 48
  per_class: 3
model:
  widths: [4, 8, 8]
  blocks: [1, 1, 1]
training:
  max_epochs: 2
  batch_size: 8
cv:
  folds: 2
"""


@pytest.fixture
def small_config(tmp_path) -> Path:
    path = tmp_path / "small.yaml"
    path.write_text(SMALL_RUN)
    return path


def test_no_arguments(capsys):
    assert dispatch([]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_stage(capsys):
    assert dispatch(["fly"]) == 1
    assert "Unknown stage 'fly'" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["train", "--bogus"], ["train", "--jobs", "0"], ["collect", "--resolution", "1x2x3"]])
def test_bad_flags(argv):
    assert dispatch(argv) == 1


def test_version(capsys):
    assert dispatch(["--version"]) == 0
    assert capsys.readouterr().out.startswith(f"agctactile {__version__} (Python ")


def test_help():
    assert dispatch(["train", "--help"]) == 0


def test_unreadable_config(tmp_path):
    assert dispatch(["gen-phantoms", "--config", str(tmp_path / "absent.yaml")]) == 1


def test_invalid_config_fails_the_stage(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("collection:\n  force_target: 5.0\n")
    assert dispatch(["gen-phantoms", "--config", str(path), "--out", str(tmp_path / "out")]) == 2


def test_flags_become_overrides():
    args = build_parser().parse_args(["collect", "--seed", "3", "--resolution", "48x64", "--views", "2"])
    assert overrides_from(args) == {
        "master_seed": 3,
        "sensor.resolution": [48, 64],
        "augment.target_size": [48, 64],
        "collection.views_per_phantom": 2,
    }


def test_gen_phantoms_is_reproducible(tmp_path, small_config):
    for name in ("first", "second"):
        argv = ["gen-phantoms", "--config", str(small_config), "--seed", "7", "--out", str(tmp_path / name)]
        assert dispatch(argv) == 0
    first = sorted((tmp_path / "first" / "phantoms" / "bank").iterdir())
    second = sorted((tmp_path / "second" / "phantoms" / "bank").iterdir())
    assert [path.name for path in first] == [path.name for path in second]
    assert len([path for path in first if path.suffix == ".json"]) == 12
    for left, right in zip(first, second):
        assert left.read_bytes() == right.read_bytes()
    resolved = read_json(tmp_path / "first" / RESOLVED_CONFIG_FILE)
    assert resolved["master_seed"] == 7


def test_missing_stage_output(tmp_path, capsys):
    assert dispatch(["split", "--out", str(tmp_path / "empty")]) == 2
    assert "run the 'collect' stage first" in capsys.readouterr().err


def test_calibrate(tmp_path):
    assert dispatch(["calibrate", "--out", str(tmp_path)]) == 0
    registration = read_json(tmp_path / "calibration" / REGISTRATION_FILE)
    assert registration["config"]["master_seed"] == 0
    assert len(list((tmp_path / "calibration" / "correspondences").glob("view_*.json"))) == 10


@pytest.mark.slow
def test_whole_pipeline(tmp_path, small_config, capsys):
    out = tmp_path / "out"
    common = ["--config", str(small_config), "--out", str(out)]
    assert dispatch(["all", *common, "--n-configs", "2", "--views", "4", "--resolution", "64"]) == 0
    assert (out / "evaluate" / "dilated_resnet" / REPORT_FILE).is_file()
    capsys.readouterr()
    assert dispatch(["report", *common]) == 0
    assert "dilated_resnet" in capsys.readouterr().out


@pytest.mark.slow
def test_default_bank_carries_class_signal(tmp_path):
    common = ["--out", str(tmp_path / "out"), "--resolution", "64"]
    for stage in ("gen-phantoms", "collect", "split", "train", "evaluate"):
        assert dispatch([stage, *common]) == 0
    report = read_json(tmp_path / "out" / "evaluate" / "dilated_resnet" / REPORT_FILE)
    baseline = load_baseline()
    assert report["metrics"]["accuracy"] >= baseline.min_accuracy
