"""Flat key = value experiment configs.

One typed key per line, '#' comments, unknown keys rejected with the line
number. Overrides (--set key=value) reuse the same schema and are applied
after the file parse. The schema is the single source of truth for what a
run config can contain.
"""

from __future__ import annotations

from .errors import ConfigError
from .harness import RECIPES

_BOOLS = {"true": True, "false": False, "1": True, "0": False}


def _parse_predictors(v):
    return tuple(p.strip() for p in v.split(",") if p.strip())


# key -> (parser, description)
KEY_SCHEMA = {
    "recipe": (str, f"named recipe, one of {sorted(RECIPES)}"),
    "name": (str, "label written into artifacts"),
    "system": (str, "system kind when not using a recipe"),
    "system.d_h": (int, "hidden dimension for lds_gaussian"),
    "system.n": (int, "size of the permutation system"),
    "system.d": (int, "state dimension (langevin / lowerbound)"),
    "system.observation": (str, "full or partial"),
    "system.disturbance": (str, "none or sinusoid"),
    "system.time_scale": (float, "sinusoid disturbance step rescale"),
    "system.coupling": (float, "langevin pairwise coupling coefficient"),
    "system.eta": (float, "langevin step size"),
    "system.dt": (float, "integrator step for lorenz/pendulum"),
    "system.force_limit": (float, "pendulum actuator saturation"),
    "predictors": (_parse_predictors, "comma list of predictor names"),
    "T": (int, "horizon (steps per trajectory)"),
    "seeds": (int, "number of sweep seeds"),
    "seed0": (int, "base seed"),
    "smoothing_window": (int, "trailing moving-average length"),
    "bank_T": (int, "filter-bank horizon"),
    "h": (int, "filter count"),
    "m": (int, "autoregressive count"),
    "optimizer": (str, "ogd | cocob | adam | avw"),
    "optimizer.eta0": (float, "ogd base step size"),
    "optimizer.lr": (float, "adam learning rate"),
    "optimizer.alpha": (float, "cocob bet cap"),
    "optimizer.lam": (float, "avw ridge regularizer"),
    "loss_kind": (str, "l2 | squared training loss"),
    "clip_radius": (float, "prediction clip radius"),
    "threads": (int, "seed-level worker threads"),
}


def parse_value(key, raw, line=None):
    if key not in KEY_SCHEMA:
        raise ConfigError(f"unknown config key {key!r}", line=line)
    parser = KEY_SCHEMA[key][0]
    try:
        if parser is bool:
            return _BOOLS[raw.strip().lower()]
        return parser(raw.strip())
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})", line=line)


def parse_config_file(path):
    """Parse a flat config file into a {key: typed value} dict."""
    out = {}
    with open(path) as fh:
        for lineno, raw_line in enumerate(fh, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(
                    f"expected 'key = value', got {line!r}", line=lineno
                )
            key, raw = line.split("=", 1)
            out[key.strip()] = parse_value(key.strip(), raw, line=lineno)
    return out


def parse_overrides(pairs):
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        out[key.strip()] = parse_value(key.strip(), raw)
    return out


def to_experiment_kwargs(flat):
    """Regroup flat keys into make_config keyword arguments."""
    flat = dict(flat)
    kwargs = {}
    recipe = flat.pop("recipe", None)
    system = {}
    optimizer = {}
    if "system" in flat:
        system["kind"] = flat.pop("system")
    if "optimizer" in flat:
        optimizer["kind"] = flat.pop("optimizer")
    for key in list(flat):
        if key.startswith("system."):
            system[key.split(".", 1)[1]] = flat.pop(key)
        elif key.startswith("optimizer."):
            optimizer[key.split(".", 1)[1]] = flat.pop(key)
    if system:
        kwargs["system"] = system
    if optimizer:
        kwargs["optimizer"] = optimizer
    kwargs.update(flat)
    return recipe, kwargs
