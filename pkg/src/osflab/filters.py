"""Hankel spectral filter bank and filtered features of histories.

The bank holds the top eigenpairs (sigma_j, phi_j) of the fixed
(T-1)-dimensional Hankel matrix with entries 2 / ((i+j)^3 - (i+j)).
Features of a history are sigma^(1/4)-weighted inner products with the
filters; histories are stored newest-first and implicitly zero-padded,
so early-time features are well defined.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import InvalidInputError
from .numerics import sym_eigh


def hankel_matrix(T):
    """The (T-1) x (T-1) positive definite Hankel matrix of the filter bank.

    Entry (i, j), 1-indexed, is 2 / ((i+j)^3 - (i+j)).
    """
    if T < 3:
        raise InvalidInputError(f"horizon T must be >= 3, got {T}")
    s = np.add.outer(np.arange(1, T), np.arange(1, T)).astype(float)
    return 2.0 / (s**3 - s)


@dataclass(frozen=True)
class FilterBank:
    """Immutable bank of spectral filters for a fixed horizon.

    phi has the filters as columns (length T-1, newest-lag first);
    phi_scaled carries the sigma^(1/4) weighting used by features.
    """

    T: int
    h: int
    sigma: np.ndarray
    phi: np.ndarray
    phi_scaled: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.phi_scaled is None:
            object.__setattr__(
                self, "phi_scaled", self.phi * self.sigma[None, :] ** 0.25
            )


_CACHE: dict[tuple[int, int], FilterBank] = {}
_CACHE_LOCK = threading.Lock()


def filter_bank(T, h):
    """Top-h eigenpairs of hankel_matrix(T), cached per (T, h)."""
    if not 1 <= h <= T - 1:
        raise InvalidInputError(f"need 1 <= h <= T-1, got h={h}, T={T}")
    key = (int(T), int(h))
    with _CACHE_LOCK:
        bank = _CACHE.get(key)
    if bank is not None:
        return bank
    vals, vecs = sym_eigh(hankel_matrix(T), top=h)
    if vals[-1] <= 0:
        raise InvalidInputError(
            f"non-positive Hankel eigenvalue at index {h}; reduce h"
        )
    bank = FilterBank(T=int(T), h=int(h), sigma=vals, phi=vecs)
    with _CACHE_LOCK:
        _CACHE.setdefault(key, bank)
    return bank


def filtered_features(bank, history):
    """Feature matrix (h, d) of a newest-first history of length <= T-1.

    feature_i = sigma_i^(1/4) * sum_k phi_i[k] * history[k]; a short
    history behaves as if zero-padded out to T-1.
    """
    history = np.asarray(history, dtype=float)
    if history.ndim == 1:
        history = history[:, None]
    if history.ndim != 2:
        raise InvalidInputError("history must be a (length, dim) array")
    k = history.shape[0]
    if k > bank.T - 1:
        raise InvalidInputError(
            f"history length {k} exceeds filter length {bank.T - 1}"
        )
    return bank.phi_scaled[:k].T @ history


def filtered_sequence(bank, seq):
    """Features of every trailing window of a full sequence at once.

    Returns an array of shape (T, h, d) whose slice [t] equals
    filtered_features(bank, seq[t::-1][: bank.T - 1]): the window whose
    newest element is seq[t]. FFT convolution makes this O(h d T log T),
    which is what lets the experiment harness run long horizons.
    """
    seq = np.asarray(seq, dtype=float)
    if seq.ndim == 1:
        seq = seq[:, None]
    n = seq.shape[0]
    out = np.empty((n, bank.h, seq.shape[1]))
    for i in range(bank.h):
        kern = bank.phi_scaled[:, i : i + 1]
        out[:, i, :] = fftconvolve(seq, kern, axes=0)[:n]
    return out
