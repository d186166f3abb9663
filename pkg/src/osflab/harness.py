"""Experiment orchestration: seed sweeps, loss recording, smoothing,
decile summaries, spectral gaps, and the named experiment recipes.

Recorded losses are always the squared Euclidean error, matching the
figures, regardless of the loss the predictors train on (both are kept in
the record). Sweeps are reproducible: every trajectory and predictor is
seeded from (base seed, seed index) counters, so a config hash plus seed
pins the whole record.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import systems
from .baselines import make_predictor
from .errors import InvalidInputError, SimulationError

DEFAULT_SEEDS = 12          # sweep width used by the shipped recipes
LANGEVIN_COUPLING_SCALE = -0.01   # recipe coupling is this over (d-1)


@dataclass
class ExperimentConfig:
    name: str = "custom"
    system: dict = field(default_factory=dict)       # kind + parameters
    predictors: tuple = ("sf",)
    T: int = 10000
    seeds: int = 4
    seed0: int = 0
    smoothing_window: int = 100
    bank_T: int = 1024
    h: int = 24
    m: int = 1
    optimizer: dict = field(default_factory=lambda: {"kind": "cocob"})
    loss_kind: str = "l2"
    clip_radius: float = 1e6
    threads: int = 1
    predictor_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.seeds < 1:
            raise InvalidInputError("seeds must be >= 1")
        if self.T < self.smoothing_window:
            raise InvalidInputError("T must be >= smoothing window")

    def hash(self):
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RunRecord:
    config: ExperimentConfig
    losses: dict                 # name -> (seeds, T) squared losses
    smoothed: dict               # name -> (seeds, T - w + 1)
    summary: dict                # name -> decile summary and flags
    diverged: dict               # name -> list of per-seed flags
    wall_time: float
    config_hash: str


def smooth(losses, window):
    """Trailing moving average; output length is T - window + 1."""
    losses = np.asarray(losses, dtype=float)
    if window < 1:
        raise InvalidInputError("window must be >= 1")
    if window > losses.shape[-1]:
        raise InvalidInputError("window exceeds sequence length")
    kernel = np.ones(window) / window
    return np.convolve(losses, kernel, mode="valid")


def decile_summary(losses):
    """Means of the first and last tenth, and their ratio."""
    losses = np.asarray(losses, dtype=float)
    n = losses.shape[-1] // 10
    if n < 1:
        raise InvalidInputError("need at least 10 samples")
    first, last = float(losses[:n].mean()), float(losses[-n:].mean())
    ratio = last / first if first > 0 else float("inf")
    return first, last, ratio


def spectral_gap(eigenvalues):
    """One minus the second-largest eigenvalue magnitude."""
    mags = np.sort(np.abs(np.asarray(eigenvalues, dtype=complex)))
    if mags.size < 2:
        raise InvalidInputError("spectral gap needs at least two eigenvalues")
    return float(1.0 - mags[-2])


# ---------------------------------------------------------------------------
# trajectory generation per system kind
# ---------------------------------------------------------------------------

def _observation_row(rng, d_state):
    return rng.standard_normal((1, d_state))


def generate_trajectory(system, T, rng):
    """One (u, y) record for a system spec dict; pure in (spec, rng)."""
    kind = system.get("kind")
    if kind == "lds_gaussian":
        sys_ = systems.gen_gaussian_lds(
            d_h=system.get("d_h", 128), seed=rng.integers(2**63),
        )
        u = rng.standard_normal((T, 1))
        w = None
        if system.get("disturbance") == "sinusoid":
            scale = system.get("time_scale", 10.0)
            w = np.stack([
                systems.sinusoid_disturbance(t, sys_.d_h, time_scale=scale)
                for t in range(T)
            ])
        return systems.simulate_lds(sys_, u=u, w=w, T=T)
    if kind == "lds_permutation":
        sys_ = systems.gen_permutation_lds(
            n=system.get("n", 16), seed=rng.integers(2**63)
        )
        u = rng.standard_normal((T, 1))
        return systems.simulate_lds(sys_, u=u, T=T)
    if kind == "lowerbound":
        traj, clair = systems.adversarial_lowerbound_stream(
            system.get("d", 8), T, seed=rng.integers(2**63)
        )
        traj.meta["clairvoyant"] = clair
        return traj
    if kind in ("lorenz", "pendulum", "langevin"):
        states = _nonlinear_states(system, T, rng)
        if system.get("observation", "full") == "partial":
            C = _observation_row(rng, states.shape[1])
            y = states @ C.T
        else:
            y = states
        return systems.Trajectory(u=np.zeros((T, 1)), y=y,
                                  meta={"kind": kind})
    raise InvalidInputError(f"unknown system kind {kind!r}")


def _nonlinear_states(system, T, rng):
    kind = system["kind"]
    if kind == "lorenz":
        x0 = rng.standard_normal(3)
        return systems.lorenz_simulate(x0, T, dt=system.get("dt", 0.01))
    if kind == "pendulum":
        K = rng.standard_normal(8)
        x0 = np.array([0.0, np.pi, np.pi, 0.0, 0.0, 0.0])
        x0[1:3] += 0.1 * rng.standard_normal(2)   # hanging, slightly perturbed
        return systems.pendulum_simulate(
            x0, K, T, dt=system.get("dt", 0.01),
            force_limit=system.get("force_limit", 1.0),
            substeps=system.get("substeps", 5),
        )
    d = system.get("d", 64)
    coupling = system.get("coupling", LANGEVIN_COUPLING_SCALE / max(d - 1, 1))
    return systems.langevin_simulate(
        np.zeros(d), T, eta=system.get("eta", 0.01),
        seed=int(rng.integers(2**63)), coupling=coupling,
    )


# ---------------------------------------------------------------------------
# the sweep itself
# ---------------------------------------------------------------------------

def seed_trajectory(cfg, seed_idx):
    """The trajectory every predictor sees at this seed index."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed0, seed_idx]))
    return generate_trajectory(cfg.system, cfg.T, rng)


def stream_predictor(cfg, name, traj, seed_idx):
    """Run one predictor over one trajectory; returns squared losses."""
    kw = dict(
        d_out=traj.y.shape[1], d_in=traj.u.shape[1], total_T=cfg.T,
        bank_T=cfg.bank_T, h=cfg.h, m=cfg.m, clip_radius=cfg.clip_radius,
        optimizer=dict(cfg.optimizer), loss_kind=cfg.loss_kind,
        seed=seed_idx,
    )
    kw.update(cfg.predictor_overrides.get(name, {}))
    predictor = make_predictor(name, **kw)
    has_input = cfg.system.get("kind", "").startswith("lds")
    predictor.begin_sequence(traj.y, traj.u if has_input else None)
    losses = np.empty(cfg.T)
    for t in range(cfg.T):
        yhat = predictor.predict_next()
        err = yhat - traj.y[t]
        losses[t] = float(err @ err)
        predictor.observe(traj.y[t], traj.u[t] if has_input else None)
    return losses, bool(getattr(predictor, "diverged", False)), predictor


def run_experiment(cfg, keep_predictors=False):
    """Sweep every predictor over every seed and aggregate the record."""
    t_start = time.time()
    losses = {}
    diverged = {}
    kept = {}

    def gen(s):
        return seed_trajectory(cfg, s)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            trajectories = list(pool.map(gen, range(cfg.seeds)))
    else:
        trajectories = [gen(s) for s in range(cfg.seeds)]

    jobs = [(name, s) for name in cfg.predictors for s in range(cfg.seeds)]

    def work(job):
        name, s = job
        try:
            return job, stream_predictor(cfg, name, trajectories[s], s)
        except SimulationError:
            return job, (np.full(cfg.T, np.nan), True, None)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = dict(pool.map(work, jobs))
    else:
        results = dict(map(work, jobs))
    for name in cfg.predictors:
        losses[name] = np.stack([results[(name, s)][0] for s in range(cfg.seeds)])
        diverged[name] = [results[(name, s)][1] for s in range(cfg.seeds)]
        if keep_predictors:
            kept[name] = [results[(name, s)][2] for s in range(cfg.seeds)]
    smoothed = {
        name: np.stack([smooth(row, cfg.smoothing_window) for row in arr])
        for name, arr in losses.items()
    }
    summary = {}
    for name in cfg.predictors:
        mean_curve = np.nanmean(smoothed[name], axis=0)
        first, last, ratio = decile_summary(mean_curve)
        summary[name] = {
            "first_decile": first, "final_decile": last, "decile_ratio": ratio,
            "diverged_seeds": int(sum(diverged[name])),
        }
    record = RunRecord(
        config=cfg, losses=losses, smoothed=smoothed, summary=summary,
        diverged=diverged, wall_time=time.time() - t_start,
        config_hash=cfg.hash(),
    )
    if keep_predictors:
        record.predictors = kept
    return record


def mean_smoothed(record, name):
    return np.nanmean(record.smoothed[name], axis=0)


# ---------------------------------------------------------------------------
# named recipes mirroring the reported experiments at desk scale
# ---------------------------------------------------------------------------

RECIPES = {
    "lds_gaussian_noise": dict(
        system={"kind": "lds_gaussian", "d_h": 128, "disturbance": "sinusoid",
                "time_scale": 1000.0},
        predictors=("sf_open", "sf_obs"), T=20000, seeds=DEFAULT_SEEDS,
        smoothing_window=100, m=2, loss_kind="l2",
        optimizer={"kind": "cocob"},
    ),
    "lds_permutation": dict(
        system={"kind": "lds_permutation", "n": 16},
        predictors=("sf_open", "sf_obs"), T=50000, seeds=DEFAULT_SEEDS,
        smoothing_window=1000, m=1, loss_kind="l2",
        optimizer={"kind": "cocob"},
    ),
    "lorenz_full": dict(
        system={"kind": "lorenz", "observation": "full"},
        predictors=("sf", "lds", "edmd", "sfedmd"), T=50000,
        seeds=DEFAULT_SEEDS, smoothing_window=1000, m=1,
        clip_radius=500.0, optimizer={"kind": "cocob"},
    ),
    "lorenz_partial": dict(
        system={"kind": "lorenz", "observation": "partial"},
        predictors=("sf", "lds", "edmd", "sfedmd"), T=50000,
        seeds=DEFAULT_SEEDS, smoothing_window=1000, m=1,
        clip_radius=500.0, optimizer={"kind": "cocob"},
    ),
    "pendulum_full": dict(
        system={"kind": "pendulum", "observation": "full"},
        predictors=("sf", "lds", "edmd", "sfedmd"), T=20000,
        seeds=DEFAULT_SEEDS, smoothing_window=1000, m=1,
        clip_radius=200.0, optimizer={"kind": "cocob"},
    ),
    "pendulum_partial": dict(
        system={"kind": "pendulum", "observation": "partial"},
        predictors=("sf", "lds", "edmd", "sfedmd"), T=20000,
        seeds=DEFAULT_SEEDS, smoothing_window=1000, m=1,
        clip_radius=200.0, optimizer={"kind": "cocob"},
    ),
    "langevin64": dict(
        system={"kind": "langevin", "d": 64, "observation": "full"},
        predictors=("sf", "lds", "edmd"), T=20000, seeds=DEFAULT_SEEDS,
        smoothing_window=200, m=1, clip_radius=100.0,
        optimizer={"kind": "cocob"},
    ),
    "lowerbound_adversary": dict(
        system={"kind": "lowerbound", "d": 8},
        predictors=("sf",), T=8000, seeds=200, smoothing_window=100,
        m=1, clip_radius=100.0, optimizer={"kind": "cocob"},
    ),
}


def make_config(recipe=None, **overrides):
    """Build a config from a named recipe plus field overrides."""
    base = {}
    if recipe is not None:
        if recipe not in RECIPES:
            raise InvalidInputError(
                f"unknown recipe {recipe!r}; known: {sorted(RECIPES)}"
            )
        base.update({k: dict(v) if isinstance(v, dict) else v
                     for k, v in RECIPES[recipe].items()})
        base["name"] = recipe
    for key, val in overrides.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict):
            base[key].update(val)            # partial dict overrides merge
        else:
            base[key] = val
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

def write_losses_csv(path, record):
    cfg = record.config
    with open(path, "w") as fh:
        fh.write("step,predictor,seed,loss,smoothed\n")
        w = cfg.smoothing_window
        for name in cfg.predictors:
            for s in range(cfg.seeds):
                raw = record.losses[name][s]
                sm = record.smoothed[name][s]
                for t in range(cfg.T):
                    sval = sm[t - w + 1] if t >= w - 1 else ""
                    sstr = f"{sval:.10g}" if sval != "" else ""
                    fh.write(f"{t},{name},{s},{raw[t]:.10g},{sstr}\n")


def write_summary_json(path, record, extra=None):
    payload = {
        "config_hash": record.config_hash,
        "wall_time": record.wall_time,
        "predictors": record.summary,
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
