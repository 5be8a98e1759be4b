from collections import Counter
from dataclasses import replace
import math

import numpy as np
import pytest

from agctactile.augment import AugmentConfig
from agctactile.constants import LR_MAX, LR_MIN, RESULTS_TABLE_FILE, SEARCH_FILE, SWEEP_PLOT_FILE
from agctactile.errors import InsufficientPhantoms, InvalidConfig
from agctactile.experiment import (
    HyperParams,
    SearchContext,
    SearchResult,
    SearchRun,
    run_random_search,
    sample_hyperparams,
    select_config,
    validation_split,
)
from agctactile.optim import TrainingConfig
from agctactile.primitives import PhantomId
from agctactile.types import Arch, OptimizerKind, ScheduleKind

PARAMS = HyperParams(0.01, ScheduleKind.COSINE, OptimizerKind.SGD, 0.0)


def run(index, train_acc, val_acc, val_loss):
    return SearchRun(index, PARAMS, train_acc, val_acc, val_loss, stop_epoch=5, best_epoch=2)


def test_sampled_hyperparams_stay_in_range(rng):
    samples = [sample_hyperparams(rng) for _ in range(500)]
    assert all(LR_MIN <= params.lr <= LR_MAX for params in samples)
    assert all(0.0 <= params.weight_decay <= 0.1 for params in samples)
    assert {params.schedule for params in samples} == set(ScheduleKind)
    assert {params.optimizer for params in samples} == set(OptimizerKind)
    # log-uniform: roughly half the draws fall below the geometric midpoint
    below = sum(params.lr < math.sqrt(LR_MIN * LR_MAX) for params in samples)
    assert 200 < below < 300


@pytest.mark.parametrize(("lr", "weight_decay"), [(0.0005, 0.0), (0.2, 0.0), (0.01, 0.11)])
def test_hyperparams_outside_the_space(lr, weight_decay):
    with pytest.raises(InvalidConfig):
        HyperParams(lr, ScheduleKind.STEP, OptimizerKind.ADAM, weight_decay)


def test_select_prefers_low_loss_then_small_gap():
    runs = [
        run(0, 1.0, 0.6, 0.1),
        run(1, 0.9, 0.8, 0.5),
        run(2, 0.9, 0.85, 0.5 + 1e-7),
        run(3, 0.8, 0.8, 0.9),
    ]
    selected, rationale = select_config(runs, overfit_gap=0.15)
    assert selected == 2
    assert rationale["gap_filter_applied"]
    assert rationale["filtered_out"] == [0]
    assert rationale["tied_candidates"] == [1, 2]


def test_select_breaks_exact_ties_by_index():
    selected, _ = select_config([run(0, 0.9, 0.9, 0.4), run(1, 0.9, 0.9, 0.4)])
    assert selected == 0


def test_select_falls_back_when_everything_overfits():
    selected, rationale = select_config([run(0, 1.0, 0.5, 0.7), run(1, 1.0, 0.6, 0.6)], overfit_gap=0.15)
    assert selected == 1
    assert not rationale["gap_filter_applied"]


def test_select_skips_failed_runs():
    failed = SearchRun(0, PARAMS, math.nan, math.nan, math.inf, 0, -1, "diverged")
    selected, _ = select_config([failed, run(1, 0.9, 0.9, 1.2)])
    assert selected == 1


def test_select_needs_runs():
    with pytest.raises(InvalidConfig):
        select_config([])


def test_validation_split_is_tumor_level():
    labels = {
        PhantomId(f"{cls}-{index:02}"): label
        for label, cls in enumerate(["I", "II", "III", "IV"])
        for index in range(8)
    }
    train_ids, val_ids = validation_split(labels, 0.2, seed=3)
    assert not set(train_ids) & set(val_ids)
    assert set(train_ids) | set(val_ids) == set(labels)
    assert Counter(labels[owner] for owner in val_ids) == {0: 2, 1: 2, 2: 2, 3: 2}
    assert validation_split(labels, 0.2, seed=3) == (train_ids, val_ids)
    assert validation_split(labels, 0.2, seed=4) != (train_ids, val_ids)


def test_validation_split_keeps_one_of_each_side():
    labels = {PhantomId("I-00"): 0, PhantomId("I-01"): 0}
    assert validation_split(labels, 0.9, seed=0)[0]
    assert validation_split(labels, 0.01, seed=0)[1]


def test_validation_split_needs_two_tumors_per_class():
    with pytest.raises(InsufficientPhantoms):
        validation_split({PhantomId("I-00"): 0, PhantomId("II-00"): 1, PhantomId("II-01"): 1}, 0.2, seed=0)


@pytest.fixture
def search_ctx(tiny_model_cfg):
    return SearchContext(
        model=tiny_model_cfg,
        training=TrainingConfig(max_epochs=2, patience=5, batch_size=4, augment=False),
        augment=AugmentConfig(target_size=(16, 16)),
        val_fraction=0.34,
    )


def test_random_search(tmp_path, image_set, search_ctx):
    result = run_random_search(Arch.DILATED_RESNET, image_set, 2, seed=8, ctx=search_ctx)
    assert [entry.index for entry in result.runs] == [0, 1]
    assert result.selected in (0, 1)
    assert len(result.validation_phantoms) == 4
    assert all(np.isfinite(entry.val_loss) for entry in result.runs)

    result.write(tmp_path, {"master_seed": 8})
    for name in (SEARCH_FILE, RESULTS_TABLE_FILE, SWEEP_PLOT_FILE):
        assert (tmp_path / name).is_file()
    loaded = SearchResult.load(tmp_path)
    assert loaded.best.params == result.best.params
    assert loaded.to_dict() == result.to_dict()


def test_random_search_ignores_worker_count(image_set, search_ctx):
    serial = run_random_search(Arch.RESNET_BASELINE, image_set, 2, seed=1, ctx=search_ctx)
    threaded = run_random_search(Arch.RESNET_BASELINE, image_set, 2, seed=1, ctx=replace(search_ctx, jobs=2))
    assert serial.to_dict() == threaded.to_dict()
