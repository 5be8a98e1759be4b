from dataclasses import replace

from numpy.testing import assert_array_equal
import numpy as np
import pytest

from agctactile.augment import AugmentConfig
from agctactile.nn import build_model
from agctactile.optim import OptimizerSpec, ScheduleSpec, TrainingConfig, evaluate_loss, train
from agctactile.types import Arch, OptimizerKind, ScheduleKind


@pytest.fixture
def splits(image_set):
    train_ids = [owner for owner in image_set.unique_phantoms() if not owner.endswith("-02")]
    val_ids = [owner for owner in image_set.unique_phantoms() if owner.endswith("-02")]
    return image_set.for_phantoms(train_ids), image_set.for_phantoms(val_ids)


@pytest.fixture
def augment_cfg():
    return AugmentConfig(target_size=(16, 16), blur_sigma=(1.0, 4.0))


def test_zero_lr_stops_after_patience(tiny_model_cfg, splits):
    model = build_model(replace(tiny_model_cfg, arch=Arch.ALEXNET_BASELINE, dilations=(1, 1, 1)), 0)
    initial = model.state()
    result = train(
        model,
        *splits,
        OptimizerSpec(lr=0.0),
        ScheduleSpec(kind=ScheduleKind.STEP),
        run_seed=1,
        cfg=TrainingConfig(max_epochs=50, patience=10, batch_size=4, augment=False),
    )
    assert result.state.stop_reason == "early_stopping"
    assert len(result.state.history) == 11
    assert result.state.best_epoch == 0
    assert all(record.lr == 0.0 for record in result.state.history)
    for left, right in zip(model.state(), initial):
        assert_array_equal(left, right)


def test_max_epochs(tiny_model_cfg, splits, augment_cfg):
    result = train(
        build_model(tiny_model_cfg, 0),
        *splits,
        OptimizerSpec(kind=OptimizerKind.ADAM, lr=0.01),
        ScheduleSpec(kind=ScheduleKind.COSINE, t_max=3),
        run_seed=1,
        cfg=TrainingConfig(max_epochs=3, patience=10, batch_size=8),
        augment_cfg=augment_cfg,
    )
    assert result.state.stop_reason == "max_epochs"
    assert [record.epoch for record in result.state.history] == [0, 1, 2]
    assert 0 <= result.state.best_epoch <= 2
    assert all(np.isfinite(record.train_loss) for record in result.state.history)


def test_best_epoch_weights_are_restored(tiny_model_cfg, splits, augment_cfg):
    cfg = TrainingConfig(max_epochs=4, patience=10, batch_size=8)
    result = train(
        build_model(tiny_model_cfg, 0),
        *splits,
        OptimizerSpec(kind=OptimizerKind.SGD, lr=0.05),
        ScheduleSpec(kind=ScheduleKind.STEP),
        run_seed=2,
        cfg=cfg,
        augment_cfg=augment_cfg,
    )
    val_set = splits[1]
    inputs = result.standardizer(val_set.images, dtype=result.model.dtype)
    val_loss, _ = evaluate_loss(result.model, inputs, val_set.labels, cfg.batch_size)
    assert val_loss == pytest.approx(result.state.best_val_loss, rel=1e-9)


def test_training_is_reproducible(tiny_model_cfg, splits, augment_cfg):
    def run():
        return train(
            build_model(tiny_model_cfg, 5),
            *splits,
            OptimizerSpec(kind=OptimizerKind.ADABOUND, lr=0.01),
            ScheduleSpec(kind=ScheduleKind.PLATEAU, patience=1),
            run_seed=9,
            cfg=TrainingConfig(max_epochs=2, patience=10, batch_size=4),
            augment_cfg=augment_cfg,
        )

    first, second = run(), run()
    assert first.state.history == second.state.history
    for left, right in zip(first.model.state(), second.model.state()):
        assert_array_equal(left, right)


def test_record_layout(tiny_model_cfg, splits, augment_cfg):
    result = train(
        build_model(tiny_model_cfg, 0),
        *splits,
        OptimizerSpec(),
        ScheduleSpec(),
        run_seed=0,
        cfg=TrainingConfig(max_epochs=1, batch_size=16),
        augment_cfg=augment_cfg,
    )
    record = result.record()
    assert record["parameter_count"] == result.model.parameter_count
    assert record["stop_reason"] == "max_epochs"
    assert record["epochs_completed"] == 1
    assert set(record["history"][0]) == {"epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr"}
