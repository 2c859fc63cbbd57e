"""AMSGrad on flat parameter vectors."""

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    iterations: int = 4000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")


@dataclass(frozen=True, eq=False)
class AMSGradState:
    theta: np.ndarray
    m: np.ndarray
    v: np.ndarray
    v_hat: np.ndarray
    t: int = 0

    @classmethod
    def init(cls, theta):
        theta = np.array(theta, dtype=float)
        zeros = np.zeros_like(theta)
        return cls(theta, zeros, zeros.copy(), zeros.copy(), 0)


def amsgrad_step(state, grads, config):
    """One AMSGrad update (no bias correction, running max of v)."""
    g = np.asarray(grads, dtype=float)
    m = config.beta1 * state.m + (1.0 - config.beta1) * g
    v = config.beta2 * state.v + (1.0 - config.beta2) * g * g
    v_hat = np.maximum(state.v_hat, v)
    theta = state.theta - config.learning_rate * m / (np.sqrt(v_hat) + config.epsilon)
    return replace(state, theta=theta, m=m, v=v, v_hat=v_hat, t=state.t + 1)
