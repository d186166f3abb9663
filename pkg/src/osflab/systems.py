"""Ground-truth data generators.

Linear systems (random Gaussian, cyclic permutation, with disturbances),
the block-sign adversary used for the prediction lower bound, and three
nonlinear simulators: Lorenz (explicit Euler), a planar cart with a double
pendulum (RK4), and overdamped Langevin dynamics (Euler-Maruyama).

Every generator is a pure function of (arguments, seed); identical seeds
reproduce identical trajectories. Any state entry exceeding BLOWUP_LIMIT
aborts with a SimulationError carrying the step index.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SimulationError

BLOWUP_LIMIT = 1e6


@dataclass
class LdsSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    x0: np.ndarray
    normalized: bool = False

    @property
    def d_h(self):
        return self.A.shape[0]

    @property
    def d_in(self):
        return self.B.shape[1]

    @property
    def d_out(self):
        return self.C.shape[0]


@dataclass
class Trajectory:
    u: np.ndarray            # (T, d_in); zero column when autonomous
    y: np.ndarray            # (T, d_out)
    w: np.ndarray = None     # (T, d_h) disturbances when recorded
    seed: int = None
    meta: dict = field(default_factory=dict)

    @property
    def T(self):
        return self.y.shape[0]


def simulate_lds(sys, u=None, w=None, T=None):
    """Exact rollout x_{t+1} = A x_t + B u_t + w_t, y_t = C x_t."""
    if T is None:
        if u is None and w is None:
            raise InvalidInputError("T required when no input/disturbance given")
        T = len(u) if u is not None else len(w)
    u_arr = np.zeros((T, sys.d_in)) if u is None else np.asarray(u, float)
    if u_arr.ndim == 1:
        u_arr = u_arr[:, None]
    if u_arr.shape != (T, sys.d_in):
        raise InvalidInputError(f"u must be ({T}, {sys.d_in}), got {u_arr.shape}")
    w_arr = None if w is None else np.asarray(w, float)
    if w_arr is not None and w_arr.shape != (T, sys.d_h):
        raise InvalidInputError(f"w must be ({T}, {sys.d_h}), got {w_arr.shape}")
    x = sys.x0.astype(float).copy()
    y = np.empty((T, sys.d_out))
    for t in range(T):
        y[t] = sys.C @ x
        x = sys.A @ x + sys.B @ u_arr[t]
        if w_arr is not None:
            x += w_arr[t]
        if np.max(np.abs(x)) > BLOWUP_LIMIT:
            raise SimulationError(f"LDS state blow-up at step {t}", step=t)
    return Trajectory(u=u_arr, y=y, w=w_arr,
                      meta={"kind": "lds", "d_h": sys.d_h})


def gen_gaussian_lds(d_h=128, seed=0, d_in=1, d_out=1):
    """Dense Gaussian system with A rescaled to unit spectral norm."""
    if d_h < 1:
        raise InvalidInputError("d_h must be >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d_h, d_h))
    A /= np.linalg.norm(A, 2)
    return LdsSystem(
        A=A,
        B=rng.standard_normal((d_h, d_in)),
        C=rng.standard_normal((d_out, d_h)),
        x0=rng.standard_normal(d_h),
        normalized=True,
    )


def permutation_matrix(n):
    """Cyclic permutation with ones on the superdiagonal (and corner)."""
    A = np.zeros((n, n))
    A[np.arange(n), (np.arange(n) + 1) % n] = 1.0
    return A


def gen_permutation_lds(n=16, seed=0):
    """Cyclic permutation dynamics with Gaussian B, C, x0."""
    if n < 2:
        raise InvalidInputError("permutation size must be >= 2")
    rng = np.random.default_rng(seed)
    return LdsSystem(
        A=permutation_matrix(n),
        B=rng.standard_normal((n, 1)),
        C=rng.standard_normal((1, n)),
        x0=rng.standard_normal(n),
    )


def sinusoid_disturbance(t, d_h, amplitude=0.1, time_scale=10.0):
    """Correlated disturbance amplitude * sin(3 pi t / time_scale) * ones.

    At time_scale=1 the raw formula vanishes identically on integer steps,
    so the step index is rescaled; the scale is an explicit knob because
    no single value is canonical.
    """
    if t < 0:
        raise InvalidInputError("t must be >= 0")
    return amplitude * np.sin(3.0 * np.pi * t / time_scale) * np.ones(d_h)


def adversarial_lowerbound_stream(d, T, seed):
    """Block-sign adversary on the size-d permutation system, C = e1, B = 0.

    Noise is injected during each length-d block at the coordinate that
    rotates into the read-out position at the next multiple of d, with a
    per-block magnitude chosen so the observation there is exactly +-d
    (equal magnitude within a block, sign uniform per block). Observations
    at all other steps are zero. Returns the trajectory together with the
    noise-seeing clairvoyant predictions, which have zero loss.
    """
    if d < 2:
        raise InvalidInputError("d must be >= 2")
    if T % d != 0:
        raise InvalidInputError(f"T={T} must be a multiple of d={d}")
    rng = np.random.default_rng(seed)
    n_blocks = T // d
    eps = rng.choice([-1.0, 1.0], size=n_blocks)
    A = permutation_matrix(d)
    x = np.zeros(d)
    y = np.empty((T, 1))
    w = np.zeros((T, d))
    for t in range(T):
        y[t, 0] = x[0]
        k = t // d
        beta = eps[k] - (eps[k - 1] if k > 0 else 0.0)
        # coordinate that lands on coordinate 1 at the next test step (k+1)*d
        c = ((k + 1) * d - t) % d
        w[t, c - 1 if c > 0 else d - 1] = beta
        x = A @ x + w[t]
    traj = Trajectory(u=np.zeros((T, 1)), y=y, w=w, seed=seed,
                      meta={"kind": "lowerbound", "d": d})
    clairvoyant = y.copy()
    return traj, clairvoyant


# ---------------------------------------------------------------------------
# Lorenz
# ---------------------------------------------------------------------------

def lorenz_simulate(x0, T, dt=0.01, sigma=10.0, rho=28.0, beta=8.0 / 3.0):
    """Explicit Euler integration of the Lorenz equations; returns (T, 3)."""
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (3,) or not np.all(np.isfinite(x)):
        raise InvalidInputError("x0 must be a finite 3-vector")
    out = np.empty((T, 3))
    for t in range(T):
        out[t] = x
        dx = np.array([
            sigma * (x[1] - x[0]),
            x[0] * (rho - x[2]) - x[1],
            x[0] * x[1] - beta * x[2],
        ])
        x = x + dt * dx
        if np.max(np.abs(x)) > BLOWUP_LIMIT:
            raise SimulationError(f"Lorenz blow-up at step {t}", step=t)
    return out


# ---------------------------------------------------------------------------
# cart + double pendulum
# ---------------------------------------------------------------------------
# Generalized coordinates q = (cart position, joint angle 1, joint angle 2)
# with angles measured from the upright vertical; all masses and lengths 1,
# no friction. The cart rides a finite rail modeled as a stiff spring that
# engages beyond |cart| > rail_limit (conservative, so energy checks hold).
# The recorded state is the 8-vector
#   [sin a1, cos a1, sin a2, cos a2, w1, w2, cart, cart velocity].

def _pendulum_rhs(s, u, gravity, rail_stiffness, rail_limit):
    x, a1, a2, vx, w1, w2 = s
    c1, c2 = np.cos(a1), np.cos(a2)
    s1, s2 = np.sin(a1), np.sin(a2)
    c12, s12 = np.cos(a1 - a2), np.sin(a1 - a2)
    mass = np.array([
        [3.0, 2.0 * c1, c2],
        [2.0 * c1, 2.0, c12],
        [c2, c12, 1.0],
    ])
    rail = 0.0
    if abs(x) > rail_limit:
        rail = -rail_stiffness * (abs(x) - rail_limit) * np.sign(x)
    rhs = np.array([
        u + rail + 2.0 * w1 * w1 * s1 + w2 * w2 * s2,
        2.0 * gravity * s1 - w2 * w2 * s12,
        gravity * s2 + w1 * w1 * s12,
    ])
    acc = np.linalg.solve(mass, rhs)
    return np.concatenate([[vx, w1, w2], acc])


def pendulum_energy(s, gravity=9.81, rail_stiffness=100.0, rail_limit=3.0):
    """Total mechanical energy (kinetic + gravity + rail spring)."""
    x, a1, a2, vx, w1, w2 = s
    c1, c2, c12 = np.cos(a1), np.cos(a2), np.cos(a1 - a2)
    kinetic = (
        1.5 * vx * vx + w1 * w1 + 0.5 * w2 * w2
        + 2.0 * vx * w1 * c1 + vx * w2 * c2 + w1 * w2 * c12
    )
    potential = gravity * (2.0 * c1 + c2)
    if abs(x) > rail_limit:
        potential += 0.5 * rail_stiffness * (abs(x) - rail_limit) ** 2
    return kinetic + potential


def pendulum_observe(s):
    x, a1, a2, vx, w1, w2 = s
    return np.array([np.sin(a1), np.cos(a1), np.sin(a2), np.cos(a2),
                     w1, w2, x, vx])


def pendulum_simulate(x0, K, T, dt=0.01, gravity=9.81, force_limit=1.0,
                      substeps=5, rail_stiffness=100.0, rail_limit=3.0):
    """RK4 rollout of the cart double pendulum under linear feedback.

    x0 is the 6-vector of generalized coordinates and velocities
    (cart, a1, a2, cart velocity, w1, w2). The scalar cart force is
    u = K @ observed_state, saturated at force_limit (the actuator is
    bounded, like the physics environment this stands in for); pass
    K=None for the unforced system. Returns the (T, 8) observed states.
    """
    s = np.asarray(x0, dtype=float).copy()
    if s.shape != (6,) or not np.all(np.isfinite(s)):
        raise InvalidInputError("x0 must be a finite 6-vector")
    if substeps < 1:
        raise InvalidInputError("substeps must be >= 1")
    out = np.empty((T, 8))
    hh = dt / substeps
    for t in range(T):
        obs = pendulum_observe(s)
        out[t] = obs
        u = 0.0
        if K is not None:
            u = float(np.asarray(K).ravel() @ obs)
            if force_limit is not None:
                u = float(np.clip(u, -force_limit, force_limit))
        for _ in range(substeps):
            k1 = _pendulum_rhs(s, u, gravity, rail_stiffness, rail_limit)
            k2 = _pendulum_rhs(s + 0.5 * hh * k1, u, gravity, rail_stiffness, rail_limit)
            k3 = _pendulum_rhs(s + 0.5 * hh * k2, u, gravity, rail_stiffness, rail_limit)
            k4 = _pendulum_rhs(s + hh * k3, u, gravity, rail_stiffness, rail_limit)
            s = s + (hh / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(s)) or np.max(np.abs(s)) > BLOWUP_LIMIT:
            raise SimulationError(f"pendulum blow-up at step {t}", step=t)
    return out


# ---------------------------------------------------------------------------
# Langevin dynamics
# ---------------------------------------------------------------------------

def langevin_potential(x, coupling=-0.2):
    """Per-coordinate asymmetric double wells plus a pairwise x_i^2 x_j^2 term.

    With the default coupling the potential is unbounded below for d >= 2
    (the pairwise term outgrows the quartic wells along diagonal rays), so
    simulations escape to infinity; see langevin_simulate for the knob the
    experiment recipes use.
    """
    x = np.asarray(x, dtype=float)
    s2 = float(np.sum(x * x))
    wells = float(np.sum(0.05 * x**4 - x**2 + 0.1 * x))
    pairs = 0.5 * (s2 * s2 - float(np.sum(x**4)))
    return wells + coupling * pairs


def langevin_grad(x, coupling=-0.2):
    """Closed-form gradient of langevin_potential."""
    x = np.asarray(x, dtype=float)
    s2 = np.sum(x * x)
    return 0.2 * x**3 - 2.0 * x + 0.1 + 2.0 * coupling * x * (s2 - x * x)


def langevin_simulate(x0, T, eta=0.01, seed=0, coupling=-0.2, noise_scale=1.0):
    """Euler-Maruyama steps X' = X - eta grad V + sqrt(2 eta) w, w ~ N(0, I).

    noise_scale=0 gives the deterministic gradient flow (test mode). The
    coupling coefficient is exposed because the default value makes the
    potential non-confining in d >= 2; recipes use a weak scaled coupling
    that keeps the per-coordinate wells intact and trajectories bounded.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise InvalidInputError("x0 must be a finite vector")
    rng = np.random.default_rng(seed)
    out = np.empty((T, x.size))
    for t in range(T):
        out[t] = x
        x = x - eta * langevin_grad(x, coupling)
        if noise_scale:
            x = x + noise_scale * np.sqrt(2.0 * eta) * rng.standard_normal(x.size)
        if np.max(np.abs(x)) > BLOWUP_LIMIT:
            raise SimulationError(f"Langevin blow-up at step {t}", step=t)
    return out


# ---------------------------------------------------------------------------
# trajectory files: CSV with "t, u_0.., y_0.." plus a JSON metadata sidecar
# ---------------------------------------------------------------------------

def save_trajectory(path, traj):
    path = str(path)
    d_in, d_out = traj.u.shape[1], traj.y.shape[1]
    header = ["t"] + [f"u_{i}" for i in range(d_in)] + [f"y_{i}" for i in range(d_out)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(traj.T):
            writer.writerow(
                [t] + [f"{v:.17g}" for v in traj.u[t]] + [f"{v:.17g}" for v in traj.y[t]]
            )
    meta = dict(traj.meta)
    meta.update({"seed": traj.seed, "d_in": d_in, "d_out": d_out, "T": traj.T})
    with open(path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=1)


def load_trajectory(path):
    path = str(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d_in = sum(1 for c in header if c.startswith("u_"))
    d_out = sum(1 for c in header if c.startswith("y_"))
    data = np.array([[float(v) for v in r[1:]] for r in body])
    meta = {}
    try:
        with open(path + ".meta.json") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        pass
    return Trajectory(
        u=data[:, :d_in], y=data[:, d_in : d_in + d_out],
        seed=meta.get("seed"), meta=meta,
    )
