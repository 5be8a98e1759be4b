from numpy.testing import assert_allclose
import numpy as np
import pytest

from agctactile.errors import InvalidConfig, NonFiniteGradient
from agctactile.nn import Tensor
from agctactile.optim import Optimizer, OptimizerSpec, adabound_bounds, optimizer_step
from agctactile.types import OptimizerKind


def test_sgd_momentum():
    spec = OptimizerSpec(kind=OptimizerKind.SGD, momentum=0.9)
    weight = np.array([1.0, -2.0])
    first, state = optimizer_step(spec, weight, np.array([0.5, 1.0]), None, 1, 0.1)
    assert_allclose(first, [0.95, -2.1])
    second, state = optimizer_step(spec, first, np.array([1.0, 0.0]), state, 2, 0.1)
    assert_allclose(state.first, [1.45, 0.9])
    assert_allclose(second, first - 0.1 * np.array([1.45, 0.9]))


def test_weight_decay_is_added_to_the_gradient():
    spec = OptimizerSpec(kind=OptimizerKind.SGD, weight_decay=0.1, momentum=0.0)
    updated, _ = optimizer_step(spec, np.array([2.0]), np.array([0.0]), None, 1, 0.5)
    assert_allclose(updated, [2.0 - 0.5 * 0.2])


def test_adam_matches_a_direct_transcription(rng):
    spec = OptimizerSpec(kind=OptimizerKind.ADAM)
    weight = rng.standard_normal(6)
    expected = weight.copy()
    m = np.zeros(6)
    v = np.zeros(6)
    state = None
    for step in range(1, 6):
        grad = rng.standard_normal(6)
        weight, state = optimizer_step(spec, weight, grad, state, step, 0.01)
        m = 0.9 * m + 0.1 * grad
        v = 0.999 * v + 0.001 * grad**2
        expected = expected - 0.01 * (m / (1 - 0.9**step)) / (np.sqrt(v / (1 - 0.999**step)) + 1e-8)
    assert_allclose(weight, expected, rtol=1e-12)


def test_adam_first_step_is_sign_sized():
    spec = OptimizerSpec(kind=OptimizerKind.ADAM)
    updated, _ = optimizer_step(spec, np.zeros(3), np.array([3.0, -0.2, 40.0]), None, 1, 0.01)
    assert_allclose(updated, [-0.01, 0.01, -0.01], rtol=1e-6)


def test_adabound_bounds_tighten_towards_final_lr():
    low, high = adabound_bounds(0.1, 0.999, 1)
    assert low == pytest.approx(0.1 * (1 - 1 / 1.001))
    assert high == pytest.approx(0.1 * 1001)
    late_low, late_high = adabound_bounds(0.1, 0.999, 10**7)
    assert 0.0999 < late_low < 0.1 < late_high < 0.1001
    assert all(adabound_bounds(0.1, 0.999, t)[0] < adabound_bounds(0.1, 0.999, t + 1)[0] for t in range(1, 50))


def test_adabound_clips_small_steps():
    spec = OptimizerSpec(kind=OptimizerKind.ADABOUND, final_lr=0.1)
    grad = np.array([1.0, -1.0])
    updated, _ = optimizer_step(spec, np.zeros(2), grad, None, 1000, 1e-8)
    lower, _ = adabound_bounds(0.1, 0.999, 1000)
    first_hat = 0.1 * grad / (1 - 0.9**1000)
    assert_allclose(updated, -lower * first_hat)


def test_zero_lr_leaves_weights_alone(rng):
    for kind in OptimizerKind:
        if kind == OptimizerKind.ADABOUND:
            continue
        weight = rng.standard_normal(4)
        updated, _ = optimizer_step(OptimizerSpec(kind=kind), weight, rng.standard_normal(4), None, 1, 0.0)
        assert_allclose(updated, weight)


def test_optimizer_skips_tensors_without_gradients():
    trained = Tensor("a", np.ones(2))
    frozen = Tensor("b", np.ones(2))
    trained.accumulate(np.array([1.0, 1.0]))
    optimizer = Optimizer(OptimizerSpec(momentum=0.0), [trained, frozen])
    optimizer.step(0.5)
    assert_allclose(trained.data, [0.5, 0.5])
    assert_allclose(frozen.data, [1.0, 1.0])
    assert optimizer.step_count == 1


def test_non_finite_gradient_stops_the_step():
    tensor = Tensor("w", np.ones(3))
    tensor.accumulate(np.array([1.0, np.nan, 0.0]))
    optimizer = Optimizer(OptimizerSpec(), [tensor])
    with pytest.raises(NonFiniteGradient):
        optimizer.step(0.1)
    assert_allclose(tensor.data, 1.0)


@pytest.mark.parametrize(
    "overrides",
    [{"lr": 1.5}, {"lr": -0.1}, {"weight_decay": 0.2}, {"momentum": 1.0}, {"beta2": 1.0}, {"eps": 0.0}],
)
def test_spec_validation(overrides):
    with pytest.raises(InvalidConfig):
        OptimizerSpec(**overrides)
