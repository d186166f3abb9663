"""Streaming comparator predictors behind one observe/predict interface.

The protocol is strict alternation: call predict_next() to get the forecast
for the upcoming step, then observe() the realized values. Predictions are
always Euclidean-clipped to the configured radius, are zero before any
data has arrived, and are causal: a prediction depends only on the
configuration, the seed, and previously observed values.

For exogenous sequences (all experiments here; predictions never feed back
into the system) each predictor accepts begin_sequence(), which precomputes
the filtered convolutions with an FFT. That is a speed device only: the
per-step numbers are identical to the streaming path, and a test pins that.
"""

from __future__ import annotations

import numpy as np

from . import predictor as pred_mod
from .errors import InvalidInputError, ProtocolError
from .filters import filter_bank, filtered_features, filtered_sequence
from .numerics import lstsq, project_fro_ball
from .optimizers import AvwState, GradientOptimizer, avw_absorb
from .predictor import OsfParams, PredictorConfig, matrix_to_params
from .lifting import fit_rbf_dictionary

BLOWUP_LIMIT = 1e6


class StreamingPredictor:
    """Base class: clipping, alternation enforcement, step counting."""

    name = "base"

    def __init__(self, d_in, d_out, clip_radius):
        self.d_in = d_in
        self.d_out = d_out
        self.R = float(clip_radius)
        self.t = 0
        self._awaiting_observe = False
        self._last_prediction = np.zeros(d_out)

    def reset(self):
        """Factory reset: forget learned parameters and all history."""
        self.t = 0
        self._awaiting_observe = False
        self._last_prediction = np.zeros(self.d_out)
        self._reset()

    def clear_history(self):
        """Forget observed history but keep learned parameters (for
        frozen rollouts from a trained snapshot)."""
        self.t = 0
        self._awaiting_observe = False
        self._last_prediction = np.zeros(self.d_out)
        self._clear_history()

    def predict_next(self):
        yhat = project_fro_ball(np.asarray(self._predict(), float), self.R)
        self._awaiting_observe = True
        self._last_prediction = yhat
        return yhat

    def observe(self, y, u=None, learn=True):
        if not self._awaiting_observe:
            raise ProtocolError("observe() without a preceding predict_next()")
        y = np.asarray(y, dtype=float).reshape(self.d_out)
        u_vec = None
        if u is not None:
            u_vec = np.asarray(u, dtype=float).reshape(self.d_in)
        self._learn(y, u_vec, learn)
        self.t += 1
        self._awaiting_observe = False

    def begin_sequence(self, y_seq, u_seq=None):
        """Optional fast path; default is a no-op."""

    # subclass hooks
    def _reset(self):
        raise NotImplementedError

    def _clear_history(self):
        self._reset()

    def _predict(self):
        raise NotImplementedError

    def _learn(self, y, u, learn):
        raise NotImplementedError


class CopyLastPredictor(StreamingPredictor):
    """Persistence baseline: predict the previous observation."""

    name = "copylast"

    def __init__(self, d_out, clip_radius=1e6, d_in=1):
        super().__init__(d_in, d_out, clip_radius)
        self._prev = np.zeros(d_out)

    def _reset(self):
        self._prev = np.zeros(self.d_out)

    def _predict(self):
        return self._prev

    def _learn(self, y, u, learn):
        self._prev = y


class OsfPredictor(StreamingPredictor):
    """Filtered autoregressive predictor with a pluggable online optimizer.

    optimizer is a dict like {"kind": "cocob", "alpha": 100.0}; kinds are
    ogd / cocob / adam / avw. The avw kind replaces gradient steps with the
    forward-regularized ridge forecaster over the stacked features (meant
    for small feature dimensions).
    """

    def __init__(self, cfg: PredictorConfig, optimizer=None, loss_kind="l2",
                 bank=None, name="sf"):
        super().__init__(cfg.d_in, cfg.d_out, cfg.R)
        self.name = name
        self.cfg = cfg
        self.bank = bank if bank is not None else filter_bank(cfg.T, cfg.h)
        self.loss_kind = loss_kind
        self._opt_spec = dict(optimizer or {"kind": "cocob"})
        self._fmask = pred_mod.mode_mask_flat(cfg)
        self._feat_mask = self._feature_mask()
        self._reset()

    def _feature_mask(self):
        cfg = self.cfg
        live = pred_mod._MODE_MASK[cfg.mode]
        return np.concatenate([
            np.full(cfg.n_j * cfg.d_in, float(live[0])),
            np.full(cfg.h * cfg.d_in, float(live[1])),
            np.full(cfg.m * cfg.d_out, float(live[2])),
            np.full(cfg.h * cfg.d_out, float(live[3])),
        ])

    def _reset(self):
        cfg = self.cfg
        self.params = OsfParams.zeros(cfg)
        kind = self._opt_spec.get("kind", "cocob")
        hp = {k: v for k, v in self._opt_spec.items() if k != "kind"}
        self._avw = None
        self._opt = None
        if kind == "avw":
            self._avw = AvwState.init(
                cfg.feature_dim, cfg.d_out, lam=hp.get("lam", 1.0)
            )
        else:
            hp.setdefault("diameter", cfg.D)
            self._opt = GradientOptimizer(kind, self.params.flat().size, **hp)
        self._clear_history()

    def _clear_history(self):
        cfg = self.cfg
        w = cfg.T - 1
        self._ybuf = np.zeros((w, cfg.d_out))
        # the filtered input window starts at lag 2, so keep one extra slot
        self._ubuf = np.zeros((w + 1, cfg.d_in))
        self._ylen = 0
        self._ulen = 0
        self._seq = None
        self._x = None

    # -- fast path ---------------------------------------------------------
    def begin_sequence(self, y_seq, u_seq=None):
        y_seq = np.asarray(y_seq, dtype=float)
        if y_seq.ndim == 1:
            y_seq = y_seq[:, None]
        u_seq = None if u_seq is None else np.asarray(u_seq, dtype=float)
        if u_seq is not None and u_seq.ndim == 1:
            u_seq = u_seq[:, None]
        self._seq = {
            "y": y_seq,
            "u": u_seq,
            "fy": filtered_sequence(self.bank, y_seq),
            "fu": None if u_seq is None else filtered_sequence(self.bank, u_seq),
        }

    def _stacked_from_seq(self):
        cfg, t = self.cfg, self.t
        s = self._seq
        u_lags = np.zeros((cfg.n_j, cfg.d_in))
        for j in range(1, cfg.n_j + 1):
            if t - j >= 0 and s["u"] is not None:
                u_lags[j - 1] = s["u"][t - j]
        u_feats = (
            s["fu"][t - 2]
            if (s["fu"] is not None and t >= 2)
            else np.zeros((cfg.h, cfg.d_in))
        )
        y_lags = np.zeros((cfg.m, cfg.d_out))
        for j in range(1, cfg.m + 1):
            if t - j >= 0:
                y_lags[j - 1] = s["y"][t - j]
        y_feats = s["fy"][t - 1] if t >= 1 else np.zeros((cfg.h, cfg.d_out))
        return np.concatenate(
            [u_lags.ravel(), u_feats.ravel(), y_lags.ravel(), y_feats.ravel()]
        )

    # -- shared ------------------------------------------------------------
    def _stacked(self):
        if self._seq is not None:
            return self._stacked_from_seq()
        return pred_mod.stacked_features(
            self.cfg, self.bank,
            self._ubuf[: self._ulen], self._ybuf[: self._ylen],
        )

    def _cheb(self):
        if self.cfg.mode != "chebyshev":
            return 0.0
        if self._seq is not None:
            t = self.t
            n = max(int(np.ceil(np.log2(self.cfg.T))), 1)
            c = pred_mod.chebyshev_coeffs(n)
            out = np.zeros(self.cfg.d_out)
            for j in range(1, n + 1):
                if t - j >= 0:
                    out -= c[j - 1] * self._seq["y"][t - j]
            return out
        return pred_mod._cheb_term(self.cfg, self._ybuf[: self._ylen])

    def _predict(self):
        x = self._stacked()
        self._x = x
        self._pred_raw = self.params.as_matrix() @ x + self._cheb()
        if self._avw is not None:
            xm = x * self._feat_mask
            cov = self._avw.cov + np.outer(xm, xm)
            W = np.linalg.solve(cov, self._avw.cross)
            self._pred_raw = W.T @ xm + self._cheb()
            self._avw_xm = xm
        return self._pred_raw

    def _learn(self, y, u, learn):
        if learn:
            if self._avw is not None:
                self._avw.cov += np.outer(self._avw_xm, self._avw_xm)
                self._avw.t += 1
                avw_absorb(self._avw, self._avw_xm, y)
                W = np.linalg.solve(self._avw.cov, self._avw.cross)
                self.params = matrix_to_params(W.T, self.cfg)
            else:
                e = self._pred_raw - y
                if self.loss_kind == "squared":
                    uvec = 2.0 * e
                else:
                    nrm = np.linalg.norm(e)
                    uvec = e / nrm if nrm > 0 else np.zeros_like(e)
                grad = matrix_to_params(np.outer(uvec, self._x), self.cfg)
                flat = self._opt.step(
                    self.params.flat(), grad.flat() * self._fmask
                )
                self.params = self.params.with_flat(flat * self._fmask)
        if self._seq is None:
            self._ybuf[1:] = self._ybuf[:-1]
            self._ybuf[0] = y
            self._ylen = min(self._ylen + 1, self._ybuf.shape[0])
            if u is not None:
                self._ubuf[1:] = self._ubuf[:-1]
                self._ubuf[0] = u
                self._ulen = min(self._ulen + 1, self._ubuf.shape[0])

    def checkpoint(self, path):
        pred_mod.save_checkpoint(path, self.params, self.cfg)


class DirectLdsLearner(StreamingPredictor):
    """Recurrent observer model s' = A s + B y, yhat = C s, trained by
    truncated backpropagation with Adam on the squared next-step error.

    This baseline is known to be fragile; a non-finite or oversized state
    sets the diverged flag, freezes the last finite prediction, and stops
    all updates.
    """

    name = "lds"

    def __init__(self, d_out, d_h=64, lr=1e-3, w_bptt=32, seed=0,
                 clip_radius=1e6):
        super().__init__(d_out, d_out, clip_radius)
        self.d_h = d_h
        self.lr = lr
        self.w_bptt = w_bptt
        self.seed = seed
        self._reset()

    def _reset(self):
        rng = np.random.default_rng(self.seed)
        sc = 0.1 / np.sqrt(self.d_h)
        self.A = sc * rng.standard_normal((self.d_h, self.d_h))
        self.B = sc * rng.standard_normal((self.d_h, self.d_out))
        self.C = sc * rng.standard_normal((self.d_out, self.d_h))
        self.x0 = sc * rng.standard_normal(self.d_h)
        dim = self.A.size + self.B.size + self.C.size + self.x0.size
        self._opt = GradientOptimizer("adam", dim, lr=self.lr)
        self._clear_history()

    def _clear_history(self):
        self.s = self.x0.copy()
        self._states = [self.s.copy()]   # s_k for the truncation window
        self._inputs = []                # y_k aligned with transitions
        self._slid = False               # window no longer reaches x0
        self.diverged = False
        self._frozen = np.zeros(self.d_out)

    def _predict(self):
        if self.diverged:
            return self._frozen
        return self.C @ self.s

    def _grads(self, e):
        gC = 2.0 * np.outer(e, self.s)
        delta = self.C.T @ (2.0 * e)
        gA = np.zeros_like(self.A)
        gB = np.zeros_like(self.B)
        gx0 = np.zeros_like(self.x0)
        lo = max(0, len(self._inputs) - self.w_bptt)
        for k in range(len(self._inputs) - 1, lo - 1, -1):
            gA += np.outer(delta, self._states[k])
            gB += np.outer(delta, self._inputs[k])
            delta = self.A.T @ delta
        if lo == 0 and not self._slid:
            gx0 = delta
        return gA, gB, gC, gx0

    def _learn(self, y, u, learn):
        if self.diverged:
            return
        if learn:
            e = self.C @ self.s - y
            gA, gB, gC, gx0 = self._grads(e)
            flat = np.concatenate(
                [self.A.ravel(), self.B.ravel(), self.C.ravel(), self.x0]
            )
            gflat = np.concatenate([gA.ravel(), gB.ravel(), gC.ravel(), gx0])
            flat = self._opt.step(flat, gflat)
            i = 0
            for arr in (self.A, self.B, self.C):
                arr[...] = flat[i : i + arr.size].reshape(arr.shape)
                i += arr.size
            self.x0[...] = flat[i:]
        self.s = self.A @ self.s + self.B @ y
        self._states.append(self.s.copy())
        self._inputs.append(y.copy())
        if len(self._inputs) > self.w_bptt:
            self._states.pop(0)
            self._inputs.pop(0)
            self._slid = True
        if not np.all(np.isfinite(self.s)) or np.max(np.abs(self.s)) > BLOWUP_LIMIT:
            self.diverged = True
            self._frozen = project_fro_ball(
                np.nan_to_num(self._last_prediction), self.R
            )


class EdmdPredictor(StreamingPredictor):
    """Online dictionary regression: thin-plate lift of each observation,
    least-squares (A, C) refit every total_T/10 steps on all history.

    Predictions are zero until the first fit; between refits the last
    model is reused and prediction is readout(A z).
    """

    name = "edmd"

    def __init__(self, d_out, total_T, k_rbf=20, seed=0, clip_radius=1e6):
        super().__init__(d_out, d_out, clip_radius)
        self.total_T = total_T
        self.k_rbf = k_rbf
        self.seed = seed
        self._reset()

    def _reset(self):
        self.dictionary = None
        self.model = None
        self._CA = None
        n = self.d_out + self.k_rbf
        self.warmup = max(self.total_T // 10, n + 2, self.k_rbf + 1)
        self._clear_history()

    def _clear_history(self):
        self._ys = []
        self._z_prev = None

    def _predict(self):
        if self._CA is None or self._z_prev is None:
            return np.zeros(self.d_out)
        return self._CA @ self._z_prev

    def _refit(self):
        from .lifting import edmd_fit

        Y = np.asarray(self._ys)
        if self.dictionary is None:
            self.dictionary = fit_rbf_dictionary(
                Y[: self.warmup], k=self.k_rbf, seed=self.seed
            )
        Z = self.dictionary.lift_seq(Y)
        self.model = edmd_fit(Z, Y)
        self._CA = self.model.C @ self.model.A

    def _learn(self, y, u, learn):
        self._ys.append(y.copy())
        t = len(self._ys)
        if learn and t >= self.warmup and t % self.warmup == 0:
            self._refit()
        if self.dictionary is not None:
            self._z_prev = self.dictionary.lift(y)


class SfeDmdPredictor(StreamingPredictor):
    """Spectral filtering over the thin-plate lifted sequence, solved by
    least squares at the same total_T/10 cadence as the dictionary baseline.

    The running normal equations (Gram and cross-moment of the filtered
    features) make refits cheap; solving them with a minimum-norm solve
    matches the direct least-squares fit.
    """

    name = "sfedmd"

    def __init__(self, d_out, total_T, bank, k_rbf=20, seed=0, clip_radius=1e6):
        super().__init__(d_out, d_out, clip_radius)
        self.total_T = total_T
        self.bank = bank
        self.k_rbf = k_rbf
        self.seed = seed
        self._reset()

    def _reset(self):
        self.dictionary = None
        self.W = None                      # (h n, d_out)
        self._gram = None
        self._xty = None
        n = self.d_out + self.k_rbf
        self.warmup = max(self.total_T // 10, self.bank.h * n + 1, self.k_rbf + 1)
        self._clear_history()

    def _clear_history(self):
        self._ys = []
        self._zbuf = None                  # newest-first lifted window
        self._zlen = 0
        self._g_prev = None                # feature that predicts the next step
        if self.dictionary is not None:
            self._zbuf = np.zeros((self.bank.T - 1, self.dictionary.size))

    def _feature(self):
        if self._zlen == 0:
            return None
        feats = filtered_features(self.bank, self._zbuf[: self._zlen])
        return feats.ravel()

    def _predict(self):
        if self.W is None or self._g_prev is None:
            return np.zeros(self.d_out)
        return self.W.T @ self._g_prev

    def _learn(self, y, u, learn):
        if self._g_prev is not None and learn:
            self._gram += np.outer(self._g_prev, self._g_prev)
            self._xty += np.outer(self._g_prev, y)
        self._ys.append(y.copy())
        t = len(self._ys)
        if self.dictionary is None and t >= self.warmup:
            self.dictionary = fit_rbf_dictionary(
                np.asarray(self._ys)[: self.warmup], k=self.k_rbf, seed=self.seed
            )
            n = self.dictionary.size
            w = self.bank.T - 1
            self._zbuf = np.zeros((w, n))
            self._gram = np.zeros((self.bank.h * n, self.bank.h * n))
            self._xty = np.zeros((self.bank.h * n, self.d_out))
            # backfill the lifted window and normal equations from history
            Z = self.dictionary.lift_seq(np.asarray(self._ys))
            feats = filtered_sequence(self.bank, Z)
            G = feats.reshape(t, -1)
            self._gram += G[: t - 1].T @ G[: t - 1]
            self._xty += G[: t - 1].T @ np.asarray(self._ys)[1:]
            k = min(w, t)
            self._zbuf[:k] = Z[::-1][:k]
            self._zlen = k
        elif self.dictionary is not None:
            z = self.dictionary.lift(y)
            self._zbuf[1:] = self._zbuf[:-1]
            self._zbuf[0] = z
            self._zlen = min(self._zlen + 1, self._zbuf.shape[0])
        if self.dictionary is not None and learn and t % self.warmup == 0:
            self.W = lstsq(self._gram, self._xty)
        self._g_prev = self._feature()


def autoregressive_rollout(predictor, context, steps):
    """Self-feeding rollout from a frozen predictor.

    The context is replayed without learning, then each prediction is fed
    back as the next observation. Returns (predictions, diverged) where
    diverged means 100 consecutive predictions pinned at the clip radius.
    """
    context = np.asarray(context, dtype=float)
    if context.ndim == 1:
        context = context[:, None]
    predictor.clear_history()
    for y in context:
        predictor.predict_next()
        predictor.observe(y, learn=False)
    preds = np.empty((steps, predictor.d_out))
    pinned = 0
    diverged = False
    for i in range(steps):
        yhat = predictor.predict_next()
        preds[i] = yhat
        if np.linalg.norm(yhat) >= predictor.R * (1 - 1e-9):
            pinned += 1
            if pinned >= 100:
                diverged = True
        else:
            pinned = 0
        predictor.observe(yhat, learn=False)
    return preds, diverged


def make_predictor(name, *, d_out, d_in=1, total_T=None, bank_T=1024, h=24,
                   m=1, clip_radius=1e6, diameter=1e6, optimizer=None,
                   loss_kind="l2", seed=0, d_h=64, lr=1e-3, w_bptt=32,
                   k_rbf=20):
    """Registry keyed by the comparator labels used in the experiments."""
    osf_modes = {
        "sf": "observations_only",
        "sf_obs": "full",
        "sf_open": "open_loop",
        "sf_regression": "regression_only",
        "sf_chebyshev": "chebyshev",
    }
    if name in osf_modes:
        cfg = PredictorConfig(
            T=bank_T, m=m, h=h, R=clip_radius, D=diameter,
            mode=osf_modes[name], d_in=d_in, d_out=d_out,
        )
        return OsfPredictor(cfg, optimizer=optimizer, loss_kind=loss_kind,
                            name=name)
    if name == "lds":
        return DirectLdsLearner(d_out, d_h=d_h, lr=lr, w_bptt=w_bptt,
                                seed=seed, clip_radius=clip_radius)
    if name in ("edmd", "sfedmd"):
        if total_T is None:
            raise InvalidInputError(f"{name} needs total_T for its refit cadence")
        if name == "edmd":
            return EdmdPredictor(d_out, total_T, k_rbf=k_rbf, seed=seed,
                                 clip_radius=clip_radius)
        return SfeDmdPredictor(d_out, total_T, filter_bank(bank_T, h),
                               k_rbf=k_rbf, seed=seed, clip_radius=clip_radius)
    if name == "copylast":
        return CopyLastPredictor(d_out, clip_radius=clip_radius, d_in=d_in)
    raise InvalidInputError(f"unknown predictor {name!r}")
