"""Online optimizers pluggable into the prediction loop.

All of these operate on flat parameter vectors. State objects are owned by
a single training loop and mutated in place; steps are deterministic
functions of (state, inputs).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .numerics import project_fro_ball


def ogd_step(theta, g, t, eta0, diameter):
    """Projected gradient step with the 1/sqrt(t) schedule."""
    if t < 1:
        raise InvalidInputError(f"step counter must be >= 1, got {t}")
    return project_fro_ball(theta - (eta0 / np.sqrt(t)) * g, diameter)


@dataclass
class CocobState:
    """Coin-betting state (the backprop variant), per coordinate.

    alpha caps the bet fraction early on; eps avoids division by zero
    before any gradient mass has arrived.
    """

    w0: np.ndarray
    scale: np.ndarray          # running max |g|
    grad_abs_sum: np.ndarray
    reward: np.ndarray
    neg_grad_sum: np.ndarray
    alpha: float = 100.0

    @classmethod
    def init(cls, theta, alpha=100.0, eps=1e-8):
        theta = np.asarray(theta, dtype=float)
        return cls(
            w0=theta.copy(),
            scale=np.full_like(theta, eps),
            grad_abs_sum=np.zeros_like(theta),
            reward=np.zeros_like(theta),
            neg_grad_sum=np.zeros_like(theta),
            alpha=alpha,
        )


def cocob_step(state, theta, g):
    """One coin-betting update; returns (state, new theta)."""
    g = np.asarray(g, dtype=float)
    state.scale = np.maximum(state.scale, np.abs(g))
    state.grad_abs_sum += np.abs(g)
    state.reward = np.maximum(state.reward - g * (theta - state.w0), 0.0)
    state.neg_grad_sum -= g
    bet = state.neg_grad_sum / (
        state.scale
        * np.maximum(state.grad_abs_sum + state.scale, state.alpha * state.scale)
    )
    return state, state.w0 + bet * (state.scale + state.reward)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def init(cls, theta):
        theta = np.asarray(theta, dtype=float)
        return cls(m=np.zeros_like(theta), v=np.zeros_like(theta))


def adam_step(state, theta, g, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Standard bias-corrected update; returns (state, new theta)."""
    g = np.asarray(g, dtype=float)
    state.t += 1
    state.m = beta1 * state.m + (1 - beta1) * g
    state.v = beta2 * state.v + (1 - beta2) * g * g
    m_hat = state.m / (1 - beta1**state.t)
    v_hat = state.v / (1 - beta2**state.t)
    return state, theta - lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class AvwState:
    """Forward-regularized ridge state for the square loss.

    cov accumulates lam*I + sum x x^T including the current feature;
    cross accumulates sum x y^T over strictly past steps, so the weights
    at each step are cov^-1 cross with the current target still unseen.
    """

    cov: np.ndarray
    cross: np.ndarray
    lam: float
    t: int = 0

    @classmethod
    def init(cls, dim, d_out, lam=1.0):
        if lam <= 0:
            raise InvalidInputError("AVW regularizer must be positive")
        return cls(cov=lam * np.eye(dim), cross=np.zeros((dim, d_out)), lam=lam)


def avw_weights(state, x):
    """Absorb the current feature into cov and return prediction weights."""
    x = np.asarray(x, dtype=float)
    state.cov += np.outer(x, x)
    state.t += 1
    return np.linalg.solve(state.cov, state.cross)


def avw_absorb(state, x, y):
    """Record the revealed target for the feature x."""
    state.cross += np.outer(np.asarray(x, float), np.asarray(y, float))


def avw_step(state, x, y, lam=None):
    """One-shot forecaster step: returns (state, weights used at this step).

    Prediction for this step is weights.T @ x; the pair (x, y) is then
    absorbed for future steps. lam is fixed at init and accepted here only
    for signature compatibility.
    """
    if lam is not None and lam != state.lam:
        raise InvalidInputError("lam is fixed when the state is initialized")
    w = avw_weights(state, x)
    avw_absorb(state, x, y)
    return state, w


class GradientOptimizer:
    """Uniform step interface over ogd / cocob / adam for the run loops."""

    def __init__(self, kind, dim, *, eta0=0.1, diameter=1e6, alpha=100.0,
                 lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.kind = kind
        self.t = 0
        self._hp = dict(eta0=eta0, diameter=diameter, lr=lr,
                        beta1=beta1, beta2=beta2, eps=eps)
        zeros = np.zeros(dim)
        if kind == "ogd":
            self._state = None
        elif kind == "cocob":
            self._state = CocobState.init(zeros, alpha=alpha)
        elif kind == "adam":
            self._state = AdamState.init(zeros)
        else:
            raise InvalidInputError(f"unknown optimizer {kind!r}")

    def step(self, theta, g):
        self.t += 1
        if self.kind == "ogd":
            return ogd_step(theta, g, self.t, self._hp["eta0"], self._hp["diameter"])
        if self.kind == "cocob":
            _, theta = cocob_step(self._state, theta, g)
            return theta
        _, theta = adam_step(
            self._state, theta, g, self._hp["lr"],
            self._hp["beta1"], self._hp["beta2"], self._hp["eps"],
        )
        return theta
