import json

import pytest

from agctactile.config import RunConfig, leaf_paths, load_pipeline_config, read_base_config, resolve_config
from agctactile.errors import ConfigParse, InvalidConfig
from agctactile.types import Arch


def test_defaults():
    config = resolve_config()
    assert config.master_seed == 0
    assert config.model.arch == Arch.DILATED_RESNET
    assert config.model.input_size == (224, 224)
    assert config.sensor.resolution == (256, 256)
    assert config.sensor.window_mm == (20.0, 20.0)
    assert config.collection.views_per_phantom == 50
    assert config.phantom.per_class == 11
    assert config.evaluate.checkpoint is None
    assert config.logging["version"] == 1


def test_every_base_key_reaches_the_merged_config():
    merged = load_pipeline_config().as_dict()
    assert set(leaf_paths(merged)) == set(leaf_paths(read_base_config()))


def test_yaml_file_overrides_defaults(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("master_seed: 5\nsearch:\n  n_configs: 3\n")
    config = resolve_config(path)
    assert config.master_seed == 5
    assert config.search.n_configs == 3
    assert config.search.val_fraction == 0.2


def test_json_file_is_yaml_too(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"model": {"arch": "resnet_baseline"}}))
    config = resolve_config(path)
    assert config.model.arch == Arch.RESNET_BASELINE
    assert config.model.dilations == (1, 1, 1)


def test_logging_section_is_replaced_whole(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("logging:\n  version: 1\n")
    assert resolve_config(path).logging == {"version": 1}


def test_dotted_overrides():
    config = resolve_config(overrides={"search.n_configs": 2, "augment.target_size": [64, 64], "master_seed": 9})
    assert config.search.n_configs == 2
    assert config.model.input_size == (64, 64)
    assert config.master_seed == 9


@pytest.mark.parametrize(
    "content",
    ["colour: blue\n", "phantom:\n  size: 3\n", "- a\n- b\n", "phantom: [unclosed\n"],
)
def test_unreadable_files(tmp_path, content):
    path = tmp_path / "bad.yaml"
    path.write_text(content)
    with pytest.raises(ConfigParse):
        resolve_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigParse):
        resolve_config(tmp_path / "absent.yaml")


@pytest.mark.parametrize(
    "overrides",
    [
        {"collection.force_target": 5.0},
        {"jobs": 0},
        {"master_seed": -1},
        {"model.arch": "vgg"},
        {"cv.folds": 1},
        {"training.batch_size": 1},
        {"sensor.resolution": [8, 8]},
    ],
)
def test_invalid_values(overrides):
    with pytest.raises(InvalidConfig):
        resolve_config(overrides=overrides)


def test_json_is_byte_stable():
    config = resolve_config(overrides={"master_seed": 3})
    again = RunConfig.from_mapping(json.loads(config.to_json()))
    assert again.to_json() == config.to_json()
    assert again == config
