"""Global linearization machinery.

Two constructions live here. The first is the finite-state Markov-chain
linearization: a uniform lattice epsilon-net over the radius-R ball, a
nearest-point projection, and the induced one-hot linear dynamics whose
outputs track any 1-Lipschitz system to within an epsilon-per-step drift.
The second is the dictionary lifting used by the regression baselines:
identity coordinates augmented with thin-plate radial basis functions
whose centers are fitted to data by k-means.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (
    DomainEscapeError,
    DuplicateCenterError,
    InvalidInputError,
    ResourceError,
)
from .filters import filtered_sequence
from .numerics import load_matrix, lstsq, save_matrix

NET_POINT_CAP = 10**7


@dataclass
class EpsNet:
    """Uniform lattice covering the radius-R ball at resolution eps.

    Lattice spacing is 2 eps / sqrt(d), so rounding any point of the ball
    to the lattice moves it by at most eps, and the rounded point (norm at
    most R + eps) is always a member. Projection is O(1) by rounding; ties
    at cell boundaries follow round-half-to-even, a fixed deterministic
    rule (any tie rule satisfies the covering property). Note the lattice
    can exceed the (2R/eps)^d covering-number bound by a constant factor
    in dimension 3 and up.
    """

    dim: int
    radius: float
    eps: float
    spacing: float
    points: np.ndarray
    _index: dict = field(repr=False, default_factory=dict)

    @property
    def size(self):
        return self.points.shape[0]

    def project(self, x):
        """Index of the nearest net point for any x with |x| <= R + eps.

        Points of the R-ball resolve by O(1) lattice rounding; points in
        the outer eps shell (images of boundary net points under a
        norm-preserving map) can round outside the stored set and fall
        back to an exact nearest-neighbor scan. Anything further out is a
        domain escape.
        """
        x = np.asarray(x, dtype=float).ravel()
        key = tuple(int(k) for k in np.rint(x / self.spacing))
        idx = self._index.get(key)
        if idx is not None:
            return idx
        if np.linalg.norm(x) <= self.radius + self.eps + 1e-9:
            return int(np.argmin(((self.points - x) ** 2).sum(axis=1)))
        raise DomainEscapeError(
            f"point {x} escaped the radius-{self.radius + self.eps} ball",
            point=x,
        )


def build_eps_net(R, eps, d):
    """Lattice epsilon-net of the radius-R ball in dimension d (d <= 4)."""
    if eps <= 0 or R <= 0:
        raise InvalidInputError("R and eps must be positive")
    if not 1 <= d <= 4:
        raise InvalidInputError(f"dimension must be in [1, 4], got {d}")
    spacing = 2.0 * eps / np.sqrt(d)
    kmax = int(np.floor((R + eps) / spacing))
    if (2 * kmax + 1) ** d > NET_POINT_CAP:
        raise ResourceError(
            f"net would need about {(2 * kmax + 1) ** d:.2e} lattice sites; "
            f"covering bound (2R/eps)^d = {(2 * R / eps) ** d:.2e}"
        )
    axes = [np.arange(-kmax, kmax + 1)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    pts = grid * spacing
    keep = np.linalg.norm(pts, axis=1) <= R + eps + 1e-12
    grid, pts = grid[keep], pts[keep]
    index = {tuple(int(k) for k in row): i for i, row in enumerate(grid)}
    return EpsNet(dim=d, radius=float(R), eps=float(eps),
                  spacing=float(spacing), points=pts, _index=index)


@dataclass
class DiscreteLift:
    """Finite linear system over net indicators: z' = A z, y = C z.

    A is column-wise: deterministic lifts have exactly one 1 per column,
    stochastic lifts column-stochastic probabilities. C's column j is the
    observation at net point j.
    """

    net: EpsNet
    Aprime: sp.csc_matrix
    Cprime: np.ndarray
    stochastic: bool = False


def markov_lift(f, h, net):
    """Deterministic transition lift: column j holds the indicator of
    the projected image of net point j; readout column j is h(point j)."""
    N = net.size
    cols = np.empty(N, dtype=np.int64)
    obs = []
    for j in range(N):
        cols[j] = net.project(np.asarray(f(net.points[j]), dtype=float))
        obs.append(np.asarray(h(net.points[j]), dtype=float).ravel())
    A = sp.csc_matrix(
        (np.ones(N), (cols, np.arange(N))), shape=(N, N)
    )
    return DiscreteLift(net=net, Aprime=A, Cprime=np.array(obs).T)


def markov_lift_stochastic(f, h, net, noise_sampler, samples, seed=0):
    """Empirical transition probabilities under additive noise.

    Column j is the frequency histogram of project(f(s_j) + w) over
    `samples` draws w = noise_sampler(rng, n). Columns sum to one exactly.
    """
    if samples < 100:
        raise InvalidInputError("need at least 100 Monte Carlo samples")
    rng = np.random.default_rng(seed)
    N = net.size
    rows, cols, vals = [], [], []
    obs = []
    for j in range(N):
        base = np.asarray(f(net.points[j]), dtype=float)
        draws = np.asarray(noise_sampler(rng, samples), dtype=float)
        if draws.ndim == 1:
            draws = draws[:, None]
        hits = np.bincount(
            [net.project(base + w) for w in draws], minlength=N
        )
        nz = np.nonzero(hits)[0]
        rows.extend(nz)
        cols.extend([j] * len(nz))
        vals.extend(hits[nz] / samples)
        obs.append(np.asarray(h(net.points[j]), dtype=float).ravel())
    A = sp.csc_matrix((vals, (rows, cols)), shape=(N, N))
    return DiscreteLift(net=net, Aprime=A, Cprime=np.array(obs).T, stochastic=True)


def lift_rollout(lift, x0, T):
    """Output sequence of the lifted system started at the nearest net point.

    Deterministic lifts keep z one-hot forever; stochastic lifts evolve a
    probability vector, so outputs are expected observations.
    """
    x0 = np.asarray(x0, dtype=float)
    if np.linalg.norm(x0) > lift.net.radius + 1e-12:
        raise InvalidInputError("x0 must lie in the radius-R ball")
    z = np.zeros(lift.net.size)
    z[lift.net.project(x0)] = 1.0
    out = np.empty((T, lift.Cprime.shape[0]))
    for t in range(T):
        out[t] = lift.Cprime @ z
        z = lift.Aprime @ z
    return out


# ---------------------------------------------------------------------------
# thin-plate dictionary for the regression baselines
# ---------------------------------------------------------------------------

def _kmeans(data, k, rng, iters=20):
    # plain Lloyd iterations from a seeded distinct-point init
    centers = data[rng.choice(len(data), size=k, replace=False)].copy()
    for _ in range(iters):
        d2 = ((data[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        assign = d2.argmin(axis=1)
        for j in range(k):
            members = data[assign == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    return centers


@dataclass
class RbfDictionary:
    """Identity coordinates plus thin-plate bumps r^2 log r at k centers."""

    centers: np.ndarray

    @property
    def k(self):
        return self.centers.shape[0]

    @property
    def base_dim(self):
        return self.centers.shape[1]

    @property
    def size(self):
        return self.base_dim + self.k

    def lift(self, y):
        return self.lift_seq(np.asarray(y, float)[None, :])[0]

    def lift_seq(self, Y):
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        d2 = ((Y[:, None, :] - self.centers[None, :, :]) ** 2).sum(-1)
        # r^2 log r = d2 log(d2) / 2, continuously 0 at r = 0
        with np.errstate(divide="ignore", invalid="ignore"):
            tp = 0.5 * d2 * np.log(d2)
        tp[d2 == 0.0] = 0.0
        return np.concatenate([Y, tp], axis=1)


def fit_rbf_dictionary(data, k=20, seed=0, iters=20):
    """Fit k thin-plate centers to observed points by seeded k-means."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if len(data) < k:
        raise InvalidInputError(f"need at least {k} data points, got {len(data)}")
    if len(np.unique(data, axis=0)) < k:
        raise DuplicateCenterError(
            f"fewer than {k} distinct points; centers would collide"
        )
    rng = np.random.default_rng(seed)
    return RbfDictionary(centers=_kmeans(data, k, rng, iters=iters))


# ---------------------------------------------------------------------------
# least-squares dynamics fits over lifted snapshots
# ---------------------------------------------------------------------------

@dataclass
class EdmdModel:
    A: np.ndarray            # n x n lifted dynamics
    C: np.ndarray            # d_Y x n readout
    rank: int
    rank_deficient: bool

    def predict_next(self, z):
        return self.C @ (self.A @ z)


def edmd_fit(Z, Y):
    """Fit z_{t+1} = A z_t and y_t = C z_t by least squares.

    Z stacks lifted snapshots as rows (t, n); Y stacks observations (t, d).
    Rank-deficient snapshot matrices fall back to the minimum-norm solution
    and set the rank_deficient flag.
    """
    Z = np.asarray(Z, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    t, n = Z.shape
    if t < n + 1:
        raise InvalidInputError(f"need at least n+1 = {n + 1} snapshots, got {t}")
    rank = int(np.linalg.matrix_rank(Z[:-1]))
    A = lstsq(Z[:-1], Z[1:]).T
    C = lstsq(Z, Y).T
    return EdmdModel(A=A, C=C, rank=rank, rank_deficient=rank < n)


def sfedmd_fit(bank, lifted, targets):
    """Least-squares filter coefficients over a lifted sequence.

    The regression feature for the step-t target is the stack of filtered
    windows of the lifted sequence ending at step t-1; the returned block
    N has shape (h, d_Y, n) with prediction sum_i N_i @ feature_i.
    """
    lifted = np.asarray(lifted, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    T, n = lifted.shape
    if targets.shape[0] != T:
        raise InvalidInputError("lifted sequence and targets must align")
    feats = filtered_sequence(bank, lifted)          # (T, h, n)
    X = feats[: T - 1].reshape(T - 1, bank.h * n)    # predicts step t+1
    Yt = targets[1:]
    if X.shape[0] < X.shape[1]:
        raise InvalidInputError(
            f"need more than {X.shape[1]} steps to determine the fit"
        )
    W = lstsq(X, Yt)                                 # (h n, d_Y)
    d_out = Yt.shape[1]
    return W.T.reshape(d_out, bank.h, n).transpose(1, 0, 2)


def sfedmd_predict(bank, N, lifted_history):
    """Prediction from filter blocks N and a newest-first lifted history."""
    from .filters import filtered_features

    feats = filtered_features(bank, lifted_history)  # (h, n)
    return np.einsum("hdn,hn->d", N, feats)


# ---------------------------------------------------------------------------
# persistence: net metadata JSON + sparse triplets + dense readout
# ---------------------------------------------------------------------------

def save_lift(prefix, lift):
    prefix = str(prefix)
    meta = {
        "dim": lift.net.dim, "radius": lift.net.radius, "eps": lift.net.eps,
        "spacing": lift.net.spacing, "stochastic": lift.stochastic,
        "points": lift.net.points.tolist(),
    }
    with open(prefix + ".net.json", "w") as fh:
        json.dump(meta, fh)
    coo = lift.Aprime.tocoo()
    with open(prefix + ".aprime.txt", "w") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
    save_matrix(prefix + ".cprime.txt", lift.Cprime)


def load_lift(prefix):
    prefix = str(prefix)
    with open(prefix + ".net.json") as fh:
        meta = json.load(fh)
    pts = np.asarray(meta["points"], dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    grid = np.rint(pts / meta["spacing"]).astype(int)
    net = EpsNet(
        dim=meta["dim"], radius=meta["radius"], eps=meta["eps"],
        spacing=meta["spacing"], points=pts,
        _index={tuple(int(k) for k in row): i for i, row in enumerate(grid)},
    )
    with open(prefix + ".aprime.txt") as fh:
        rows_head = fh.readline().split()
        shape = (int(rows_head[0]), int(rows_head[1]))
        trip = [line.split() for line in fh if line.strip()]
    A = sp.csc_matrix(
        (
            [float(v) for _, _, v in trip],
            ([int(i) for i, _, _ in trip], [int(j) for _, j, _ in trip]),
        ),
        shape=shape,
    )
    return DiscreteLift(
        net=net, Aprime=A, Cprime=load_matrix(prefix + ".cprime.txt").real,
        stochastic=bool(meta["stochastic"]),
    )
