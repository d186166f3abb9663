"""The filtered autoregressive predictor, its loss, and exact gradients.

The learnable block is Theta = (J, M, P, N): input lags, filtered input
features, observation lags, and filtered observation features. Prediction
is linear in Theta before the final clip to the radius-R ball, so both
supported losses are convex in Theta.

Modes restrict which blocks are live:

  full               J, M, P, N        (inputs and observations)
  open_loop          J, M, P           (no observation filters)
  observations_only  P, N              (autonomous systems)
  regression_only    P                 (pure lag regression)
  chebyshev          N + a fixed lag-polynomial preconditioning term

Masked blocks are never touched by gradients, so they stay exactly zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError
from .filters import filtered_features
from .numerics import project_fro_ball

MODES = ("full", "open_loop", "observations_only", "regression_only", "chebyshev")

# which of (J, M, P, N) are learnable per mode
_MODE_MASK = {
    "full": (True, True, True, True),
    "open_loop": (True, True, True, False),
    "observations_only": (False, False, True, True),
    "regression_only": (False, False, True, False),
    "chebyshev": (False, False, False, True),
}


@dataclass
class PredictorConfig:
    T: int                    # filter-bank horizon (window length T-1)
    m: int                    # autoregressive count; J gets m-1 lags, P gets m
    h: int                    # filter count
    R: float                  # prediction clip radius
    D: float                  # optimizer constraint diameter
    mode: str = "full"
    d_in: int = 1
    d_out: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown mode {self.mode!r}")
        if self.R <= 0 or self.D <= 0:
            raise InvalidInputError("R and D must be positive")
        if self.m < 0:
            raise InvalidInputError("m must be >= 0")
        if self.mode == "regression_only" and self.m < 1:
            raise InvalidInputError("regression_only needs m >= 1")

    @property
    def n_j(self):
        return max(self.m - 1, 0)

    @property
    def feature_dim(self):
        """Length of the stacked feature vector the predictor is linear in."""
        return (
            (self.n_j + self.h) * self.d_in + (self.m + self.h) * self.d_out
        )


@dataclass
class OsfParams:
    """Stacked parameter blocks; shapes (count, d_out, d_in or d_out)."""

    J: np.ndarray
    M: np.ndarray
    P: np.ndarray
    N: np.ndarray

    @classmethod
    def zeros(cls, cfg):
        return cls(
            J=np.zeros((cfg.n_j, cfg.d_out, cfg.d_in)),
            M=np.zeros((cfg.h, cfg.d_out, cfg.d_in)),
            P=np.zeros((cfg.m, cfg.d_out, cfg.d_out)),
            N=np.zeros((cfg.h, cfg.d_out, cfg.d_out)),
        )

    def blocks(self):
        return (self.J, self.M, self.P, self.N)

    def flat(self):
        return np.concatenate([b.ravel() for b in self.blocks()])

    def norm(self):
        return float(np.linalg.norm(self.flat()))

    def with_flat(self, flat):
        out, i = [], 0
        for b in self.blocks():
            out.append(flat[i : i + b.size].reshape(b.shape))
            i += b.size
        return OsfParams(*out)

    def as_matrix(self):
        """Horizontal stack (d_out, feature_dim) matching stacked_features."""
        d_out = self.M.shape[1]
        parts = [b.transpose(1, 0, 2).reshape(d_out, -1) for b in self.blocks()]
        return np.concatenate(parts, axis=1)


def matrix_to_params(W, cfg):
    """Inverse of OsfParams.as_matrix for a given configuration."""
    d_in, d_out = cfg.d_in, cfg.d_out
    sizes = [cfg.n_j * d_in, cfg.h * d_in, cfg.m * d_out, cfg.h * d_out]
    if W.shape != (d_out, sum(sizes)):
        raise InvalidInputError(f"weight matrix has shape {W.shape}")
    cuts = np.cumsum(sizes)[:-1]
    j, m_, p, n_ = np.split(W, cuts, axis=1)
    shape = lambda b, cnt, d: b.reshape(d_out, cnt, d).transpose(1, 0, 2)
    return OsfParams(
        J=shape(j, cfg.n_j, d_in),
        M=shape(m_, cfg.h, d_in),
        P=shape(p, cfg.m, d_out),
        N=shape(n_, cfg.h, d_out),
    )


def mode_mask_flat(cfg):
    """0/1 vector over the flat parameter layout; masked entries stay zero."""
    mj, mm, mp, mn = _MODE_MASK[cfg.mode]
    return np.concatenate(
        [
            np.full(cfg.n_j * cfg.d_out * cfg.d_in, float(mj)),
            np.full(cfg.h * cfg.d_out * cfg.d_in, float(mm)),
            np.full(cfg.m * cfg.d_out * cfg.d_out, float(mp)),
            np.full(cfg.h * cfg.d_out * cfg.d_out, float(mn)),
        ]
    )


def _lag_stack(hist, count, dim):
    """First `count` rows of a newest-first history, zero-padded."""
    out = np.zeros((count, dim))
    if count and hist is not None and len(hist):
        k = min(count, hist.shape[0])
        out[:k] = hist[:k]
    return out


def _as_hist(hist, dim, name):
    if hist is None:
        return np.zeros((0, dim))
    hist = np.asarray(hist, dtype=float)
    if hist.ndim == 1:
        hist = hist[:, None]
    if hist.ndim != 2 or hist.shape[1] != dim:
        raise InvalidInputError(f"{name} must be (length, {dim}), got {hist.shape}")
    return hist


def stacked_features(cfg, bank, u_hist, y_hist):
    """Stacked feature vector x with prediction = Theta_matrix @ x (+ cheb).

    Histories are newest-first: u_hist[0] is u_{t-1} and y_hist[0] is
    y_{t-1}. The filtered input window starts one step deeper (u_{t-2})
    than the filtered observation window (y_{t-1}), preserving the
    off-by-one alignment of the update rule. Windows truncate to the
    filter length T-1 with implicit zero padding.
    """
    u_hist = _as_hist(u_hist, cfg.d_in, "u_hist")
    y_hist = _as_hist(y_hist, cfg.d_out, "y_hist")
    w = bank.T - 1
    u_lags = _lag_stack(u_hist, cfg.n_j, cfg.d_in)
    u_feats = filtered_features(bank, u_hist[1 : 1 + w])
    y_lags = _lag_stack(y_hist, cfg.m, cfg.d_out)
    y_feats = filtered_features(bank, y_hist[:w])
    return np.concatenate(
        [u_lags.ravel(), u_feats.ravel(), y_lags.ravel(), y_feats.ravel()]
    )


def _cheb_term(cfg, y_hist):
    """Fixed preconditioning term of chebyshev mode: -sum_j c_j y_{t-j}."""
    n = max(int(np.ceil(np.log2(cfg.T))), 1)
    c = chebyshev_coeffs(n)
    lags = _lag_stack(_as_hist(y_hist, cfg.d_out, "y_hist"), n, cfg.d_out)
    return -(c[:, None] * lags).sum(axis=0)


def predict(params, cfg, bank, u_hist, y_hist):
    """One prediction, Euclidean-clipped to radius R."""
    x = stacked_features(cfg, bank, u_hist, y_hist)
    yhat = params.as_matrix() @ x
    if cfg.mode == "chebyshev":
        yhat = yhat + _cheb_term(cfg, y_hist)
    return project_fro_ball(yhat, cfg.R)


def loss(yhat, y, kind="l2"):
    yhat, y = np.asarray(yhat, float), np.asarray(y, float)
    if yhat.shape != y.shape:
        raise InvalidInputError(f"shape mismatch {yhat.shape} vs {y.shape}")
    err = float(np.linalg.norm(yhat - y))
    if kind == "l2":
        return err
    if kind == "squared":
        return err * err
    raise InvalidInputError(f"unknown loss kind {kind!r}")


def gradient(params, cfg, bank, u_hist, y_hist, y_t, kind="l2"):
    """Exact (sub)gradient of the loss at the unclipped prediction.

    Gradients are taken through the linear predictor even when the clip
    was active, which keeps the optimization convex; the l2 subgradient
    at zero error is zero.
    """
    x = stacked_features(cfg, bank, u_hist, y_hist)
    yhat = params.as_matrix() @ x
    if cfg.mode == "chebyshev":
        yhat = yhat + _cheb_term(cfg, y_hist)
    e = yhat - np.asarray(y_t, float).reshape(cfg.d_out)
    if kind == "squared":
        u = 2.0 * e
    elif kind == "l2":
        nrm = np.linalg.norm(e)
        u = e / nrm if nrm > 0 else np.zeros_like(e)
    else:
        raise InvalidInputError(f"unknown loss kind {kind!r}")
    grad = matrix_to_params(np.outer(u, x), cfg)
    mj, mm, mp, mn = _MODE_MASK[cfg.mode]
    for live, block in zip((mj, mm, mp, mn), grad.blocks()):
        if not live:
            block[...] = 0.0
    return grad


@lru_cache(maxsize=None)
def _monic_chebyshev(n):
    # ascending coefficient arrays of T_k via the three-term recurrence
    t_prev, t_cur = np.array([1.0]), np.array([0.0, 1.0])
    if n == 0:
        return t_prev
    for _ in range(n - 1):
        shifted = np.concatenate([[0.0], 2.0 * t_cur])
        shifted[: len(t_prev)] -= t_prev
        t_prev, t_cur = t_cur, shifted
    return t_cur / 2.0 ** (n - 1)


def chebyshev_coeffs(n):
    """Lag coefficients c_1..c_n from the monic degree-n Chebyshev polynomial.

    c_j is the coefficient of x^(n-j), so the fixed preconditioning term
    -sum_j c_j y_{t-j} applies the polynomial to the lag operator.
    """
    if n < 1:
        raise InvalidInputError(f"degree must be >= 1, got {n}")
    asc = _monic_chebyshev(int(n))
    return np.array([asc[n - j] for j in range(1, n + 1)])


# ---------------------------------------------------------------------------
# parameter checkpoints
# ---------------------------------------------------------------------------

def checkpoint_dict(params, cfg):
    return {
        "m": cfg.m,
        "h": cfg.h,
        "dims": {"d_in": cfg.d_in, "d_out": cfg.d_out},
        "J": params.J.ravel().tolist(),
        "M": params.M.ravel().tolist(),
        "P": params.P.ravel().tolist(),
        "N": params.N.ravel().tolist(),
        "config": {"T": cfg.T, "R": cfg.R, "D": cfg.D, "mode": cfg.mode},
    }


def save_checkpoint(path, params, cfg):
    with open(path, "w") as fh:
        json.dump(checkpoint_dict(params, cfg), fh, indent=1)


def load_checkpoint(path):
    """Returns (params, cfg); config defaults are used for missing fields."""
    with open(path) as fh:
        d = json.load(fh)
    extra = d.get("config", {})
    cfg = PredictorConfig(
        T=int(extra.get("T", 1024)),
        m=int(d["m"]),
        h=int(d["h"]),
        R=float(extra.get("R", 1e6)),
        D=float(extra.get("D", 1e6)),
        mode=extra.get("mode", "full"),
        d_in=int(d["dims"]["d_in"]),
        d_out=int(d["dims"]["d_out"]),
    )
    params = OsfParams.zeros(cfg)
    for key, block in zip("JMPN", params.blocks()):
        block[...] = np.asarray(d[key], dtype=float).reshape(block.shape)
    return params, cfg
