"""Observer-design tooling: observability, pole placement, and the
conditioning program over closed-loop gains.

The central quantity is the spectral condition number of the closed loop
A - L C under an eigenvalue constraint set. The exact infimum over
diagonalizers is not computable in general; everything here reports the
standard upper bound cond2(H) with H the unit-column-normalized
eigenvector matrix, and +inf for defective closed loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedError, InvalidInputError
from .numerics import cond2, eig_general, eig_vectors

OBS_COND_WARN = 1e12      # observability matrix conditioning warning level
REAL_TOL = 1e-9


def observability_matrix(A, C):
    """Stacked [C; CA; ...; C A^(d-1)] and its numerical rank."""
    A = np.asarray(A, float)
    C = np.atleast_2d(np.asarray(C, float))
    d = A.shape[0]
    if A.shape != (d, d) or C.shape[1] != d:
        raise InvalidInputError("A must be square and C must have d columns")
    blocks, row = [], C
    for _ in range(d):
        blocks.append(row)
        row = row @ A
    obs = np.vstack(blocks)
    s = np.linalg.svd(obs, compute_uv=False)
    rank = int(np.sum(s > 1e-8 * s[0])) if s[0] > 0 else 0
    return obs, rank


@dataclass
class GainPlacement:
    """Pole-placement result; obs_cond flags an ill-conditioned inversion."""

    L: np.ndarray
    obs_cond: float

    @property
    def ill_conditioned(self):
        return self.obs_cond > OBS_COND_WARN


def _charpoly(targets):
    targets = np.asarray(targets, dtype=complex)
    p = np.poly(targets)
    if np.max(np.abs(p.imag)) > 1e-9 * max(1.0, np.max(np.abs(p.real))):
        raise InvalidInputError("targets must be closed under conjugation")
    return p.real


def _poly_apply(p, A):
    # Horner: p[0] A^n + ... + p[n] I
    out = np.zeros_like(A)
    for coef in p:
        out = out @ A + coef * np.eye(A.shape[0])
    return out


def ackermann_gain(A, c, targets):
    """Single-output observer gain placing eig(A - L c) at the targets.

    L = p(A) O^{ -1} e_d with p the monic polynomial having the target
    roots and O the observability matrix of (A, c).
    """
    A = np.asarray(A, float)
    c = np.atleast_2d(np.asarray(c, float))
    d = A.shape[0]
    if c.shape != (1, d):
        raise InvalidInputError(f"c must be a 1 x {d} row, got {c.shape}")
    targets = np.asarray(targets, dtype=complex).ravel()
    if targets.size != d:
        raise InvalidInputError(f"need exactly {d} target poles")
    obs, rank = observability_matrix(A, c)
    if rank < d:
        raise InvalidInputError(f"(A, c) not observable: rank {rank} < {d}")
    p = _charpoly(targets)
    e_d = np.zeros(d)
    e_d[-1] = 1.0
    L = (_poly_apply(p, A) @ np.linalg.solve(obs, e_d))[:, None]
    return GainPlacement(L=L, obs_cond=cond2(obs))


@dataclass
class ObserverSolution:
    L: np.ndarray
    eigenvalues: np.ndarray
    kappa: float
    gain_norm: float


def eval_qstar(A, C, L):
    """Conditioning of the closed loop A - L C for a candidate gain."""
    A = np.asarray(A, float)
    C = np.atleast_2d(np.asarray(C, float))
    L = np.asarray(L, float).reshape(A.shape[0], C.shape[0])
    closed = A - L @ C
    evals = eig_general(closed)
    try:
        _, H = eig_vectors(closed)
        kappa = cond2(H)
    except IllConditionedError:
        kappa = float("inf")
    return ObserverSolution(
        L=L, eigenvalues=evals, kappa=kappa,
        gain_norm=float(np.linalg.norm(L)),
    )


@dataclass
class SpectralConstraint:
    """Union of the real interval [0, 1-rho], optionally {1}, and the
    complex disk of radius 1-gamma. Requires 0 <= rho <= gamma <= 1."""

    rho: float
    gamma: float
    include_one: bool = True

    def __post_init__(self):
        if not 0.0 <= self.rho <= self.gamma <= 1.0:
            raise InvalidInputError(
                f"need 0 <= rho <= gamma <= 1, got rho={self.rho}, gamma={self.gamma}"
            )

    def contains(self, lam, tol=1e-9):
        lam = complex(lam)
        if abs(lam.imag) <= tol:
            re = lam.real
            if -tol <= re <= 1.0 - self.rho + tol:
                return True
            if self.include_one and abs(re - 1.0) <= tol:
                return True
        return abs(lam) <= 1.0 - self.gamma + tol


@dataclass
class QstarSearchResult:
    best: ObserverSolution
    trials: list = field(default_factory=list)   # (targets, kappa) per feasible trial
    n_feasible: int = 0

    @property
    def failed(self):
        return self.best is None


def _sample_trial(rng, n_move, constraint):
    """One candidate multiset for the movable poles, or None if infeasible.

    Draws come from a constraint-independent master distribution (reals on
    [0, 1] with a point mass at 1, conjugate pairs on the unit disk) and a
    trial is feasible only if every draw lands in the constraint set. With
    per-trial counter seeding this makes trials for nested constraint sets
    nested too, so enlarging the set never hurts the search.
    """
    n_pairs = rng.integers(0, n_move // 2 + 1)
    draws = []
    for _ in range(n_pairs):
        z = complex(*rng.uniform(-1.0, 1.0, size=2))
        while abs(z) > 1.0:
            z = complex(*rng.uniform(-1.0, 1.0, size=2))
        if abs(z) > 1.0 - constraint.gamma:
            return None
        draws.extend([z, z.conjugate()])
    for _ in range(n_move - 2 * n_pairs):
        if rng.uniform() < 0.1:
            x = 1.0
            if not constraint.include_one:
                return None
        else:
            x = rng.uniform(0.0, 1.0)
            if x > 1.0 - constraint.rho:
                return None
        draws.append(complex(x))
    return draws


def qstar_search(A, C, constraint, trials=200, seed=0):
    """Randomized multi-start search for a well-conditioned placement.

    Eigenvalues of A already inside the constraint set are kept as targets;
    only the rest are re-sampled. Single-output only (the placement route
    is Ackermann). Candidates whose poles are too clustered to place are
    skipped; defective closed loops score +inf rather than failing.
    """
    A = np.asarray(A, float)
    C = np.atleast_2d(np.asarray(C, float))
    if C.shape[0] != 1:
        raise InvalidInputError("search supports single-output systems only")
    eigs = eig_general(A)
    keep = [lam for lam in eigs if constraint.contains(lam)]
    n_move = A.shape[0] - len(keep)
    result = QstarSearchResult(best=None)
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, trial]))
        sampled = _sample_trial(rng, n_move, constraint)
        if sampled is None:
            continue
        targets = np.array(keep + sampled, dtype=complex)
        gaps = np.abs(targets[:, None] - targets[None, :])
        np.fill_diagonal(gaps, np.inf)
        if targets.size > 1 and gaps.min() < 1e-8:
            continue
        try:
            placement = ackermann_gain(A, C, targets)
            sol = eval_qstar(A, C, placement.L)
        except InvalidInputError:
            continue
        result.n_feasible += 1
        result.trials.append((targets, sol.kappa))
        if result.best is None or sol.kappa < result.best.kappa:
            result.best = sol
    return result


def permutation_closed_form(n, targets):
    """Gain norm and conditioning for placement on the cyclic permutation
    system (read-out on the first coordinate), without forming the gain.

    The squared gain norm is the mean of |p(w^k)|^2 over the n-th roots of
    unity w^k, with p the monic target polynomial (a discrete Parseval
    identity). The conditioning equals that of the row-rescaled Vandermonde
    diag(1/(1 - lambda^n)) V(lambda). Targets on a root of unity sit on a
    pole of the formula and are rejected.
    """
    targets = np.asarray(targets, dtype=complex).ravel()
    if targets.size != n:
        raise InvalidInputError(f"need exactly {n} targets")
    gaps = np.abs(targets[:, None] - targets[None, :])
    np.fill_diagonal(gaps, np.inf)
    if n > 1 and gaps.min() < 1e-12:
        raise InvalidInputError("targets must be distinct")
    lam_n = targets**n
    if np.min(np.abs(lam_n - 1.0)) < 1e-12:
        raise InvalidInputError("target is an n-th root of unity (formula pole)")
    p = _charpoly(targets)
    omega = np.exp(2j * np.pi * np.arange(n) / n)
    gain_norm = float(np.sqrt(np.mean(np.abs(np.polyval(p, omega)) ** 2)))
    V = np.vander(targets, N=n, increasing=True)
    kappa = cond2(np.diag(1.0 / (1.0 - lam_n)) @ V)
    return gain_norm, float(kappa)


def observer_rollout(A, B, C, L, x0, u, y):
    """Roll the observer x' = (A - L C) x + B u + L y, returning (x, yhat)."""
    A = np.asarray(A, float)
    C = np.atleast_2d(np.asarray(C, float))
    L = np.asarray(L, float).reshape(A.shape[0], C.shape[0])
    y = np.asarray(y, float)
    if y.ndim == 1:
        y = y[:, None]
    T = y.shape[0]
    closed = A - L @ C
    x = np.asarray(x0, float).copy()
    xs = np.empty((T, A.shape[0]))
    yhat = np.empty((T, C.shape[0]))
    for t in range(T):
        xs[t] = x
        yhat[t] = C @ x
        x = closed @ x + L @ y[t]
        if B is not None and u is not None:
            x = x + np.asarray(B, float) @ np.asarray(u[t], float).reshape(-1)
    return xs, yhat
