import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rnff.optim import AMSGradState, TrainConfig, amsgrad_step


def test_zero_gradient_leaves_parameters():
    cfg = TrainConfig()
    state = AMSGradState.init([1.0, -2.0])
    for _ in range(10):
        state = amsgrad_step(state, np.zeros(2), cfg)
    np.testing.assert_array_equal(state.theta, [1.0, -2.0])
    assert state.t == 10


def test_first_step_by_hand():
    cfg = TrainConfig(learning_rate=0.01)
    state = amsgrad_step(AMSGradState.init([0.0]), np.array([1.0]), cfg)
    expected = -0.01 * 0.1 / (np.sqrt(0.001) + 1e-8)
    assert state.theta[0] == pytest.approx(expected, rel=1e-14)
    assert state.theta[0] == pytest.approx(-0.031622, abs=1e-6)


@settings(max_examples=50)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=40))
def test_v_hat_non_decreasing(gs):
    cfg = TrainConfig()
    state = AMSGradState.init([0.0])
    prev = 0.0
    for g in gs:
        state = amsgrad_step(state, np.array([g]), cfg)
        assert state.v_hat[0] >= prev
        prev = state.v_hat[0]


def test_init_does_not_alias():
    theta = np.array([1.0])
    state = AMSGradState.init(theta)
    theta[0] = 5.0
    assert state.theta[0] == 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(iterations=-1)


def test_minimizes_quadratic():
    cfg = TrainConfig(learning_rate=0.05)
    state = AMSGradState.init([3.0, -4.0])
    for _ in range(2000):
        state = amsgrad_step(state, 2 * state.theta, cfg)
    assert np.abs(state.theta).max() < 0.05
