"""Experiment configuration files.

TOML, schema "emrates-experiment/1". Unknown keys are errors, not
warnings: silent config drift would invalidate reproducibility claims,
so every key must be recognized.
"""

from __future__ import annotations

import math
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import experiments, models, oracle, rates
from .errors import ConfigError

SCHEMA = "emrates-experiment/1"

STUDIES = ("fluctuation", "stabilization", "consistency")

_MISSING = object()


def _load_toml(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as handle:
            return tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc


class _Section:
    """Dict wrapper that tracks key consumption so leftovers can be
    reported as unknown-key errors."""

    def __init__(self, name: str, data: dict):
        if not isinstance(data, dict):
            raise ConfigError(f"[{name}] must be a table")
        self.name = name
        self.data = dict(data)

    def take(self, key, expected=None, default=_MISSING):
        if key not in self.data:
            if default is _MISSING:
                raise ConfigError(f"missing required key {self.name}.{key}")
            return default
        value = self.data.pop(key)
        if expected is not None:
            types = expected if isinstance(expected, tuple) else (expected,)
            # bool is an int subclass; reject it for numeric keys
            if not isinstance(value, types) or (
                isinstance(value, bool) and bool not in types
            ):
                raise ConfigError(
                    f"{self.name}.{key} must be of type "
                    + "/".join(t.__name__ for t in types)
                )
        return value

    def finish(self):
        if self.data:
            keys = ", ".join(f"{self.name}.{k}" for k in sorted(self.data))
            raise ConfigError(f"unknown config keys: {keys}")


def _float_list(section: _Section, key):
    raw = section.take(key, list)
    if not raw or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw
    ):
        raise ConfigError(f"{section.name}.{key} must be a nonempty number list")
    return np.array([float(v) for v in raw])


def load_experiment_config(path) -> tuple[str, experiments.ExperimentConfig]:
    """Parse a config file; returns (study name, ExperimentConfig)."""
    raw = _load_toml(path)
    top = _Section("top-level", raw)

    schema = top.take("schema", str)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported schema {schema!r}, expected {SCHEMA!r}")
    study = top.take("study", str)
    if study not in STUDIES:
        raise ConfigError(f"study must be one of {', '.join(STUDIES)}")

    model_sec = _Section("model", top.take("model", dict))
    kind_name = model_sec.take("kind", str)
    try:
        kind = models.ModelKind(kind_name.upper())
    except ValueError:
        raise ConfigError("model.kind must be one of GMM, MLR, RMC") from None
    theta_star = _float_list(model_sec, "theta_star")
    sigma = float(model_sec.take("sigma", (int, float)))
    eps_miss = float(model_sec.take("eps_miss", (int, float), 0.0))
    model_sec.finish()
    model = models.ModelSpec(
        kind=kind, theta_star=theta_star, sigma=sigma, epsilon_miss=eps_miss
    )

    design = _Section("design", top.take("design", dict))
    sizes = design.take("sample_sizes", list)
    if not sizes or not all(isinstance(v, int) for v in sizes):
        raise ConfigError("design.sample_sizes must be a nonempty integer list")
    replicates = design.take("replicates", int)
    master_seed = design.take("master_seed", int, 0)
    threads = design.take("threads", int, 0)
    design.finish()

    theta0_sec = _Section("theta0", top.take("theta0", dict))
    policy_name = theta0_sec.take("policy", str)
    if policy_name == "fixed_offset":
        policy = experiments.FixedOffset(_float_list(theta0_sec, "offset"))
    elif policy_name == "random_in_ball":
        policy = experiments.RandomInBall(
            float(theta0_sec.take("radius", (int, float)))
        )
    else:
        raise ConfigError(
            "theta0.policy must be fixed_offset or random_in_ball"
        )
    theta0_sec.finish()

    ball_sec = _Section("ball", top.take("ball", dict))
    r = float(ball_sec.take("r", (int, float)))
    big_r = float(ball_sec.take("R", (int, float), math.inf))
    ball_sec.finish()
    ball = rates.BallSpec(r=r, R=big_r, center=model.theta_star)

    em_sec = _Section("em", top.take("em", dict, {}))
    max_iters = em_sec.take("max_iters", int, 50)
    param_tol = float(em_sec.take("param_tol", (int, float), 0.0))
    em_sec.finish()

    rates_sec = _Section("rates", top.take("rates", dict, {}))
    directions = rates_sec.take("directions", int, 16)
    radii = rates_sec.take("radii", int, 12)
    refine_steps = rates_sec.take("refine_steps", int, 8)
    rates_sec.finish()
    budget = rates.SearchBudget(directions, radii, refine_steps)

    oracle_sec = _Section("oracle", top.take("oracle", dict, {}))
    delta = float(oracle_sec.take("delta", (int, float), 0.05))
    ceiling = oracle_sec.take("ceiling", str, "auto")
    proxy_n = oracle_sec.take("proxy_n", int, 10**6)
    constants = oracle.BoundConstants(
        c=float(oracle_sec.take("c", (int, float), 1.0)),
        c1=float(oracle_sec.take("c1", (int, float), 1.0)),
        c2=float(oracle_sec.take("c2", (int, float), 1.0)),
        c3=float(oracle_sec.take("c3", (int, float), 1.0)),
        mlr_epsilon=float(oracle_sec.take("mlr_epsilon", (int, float), 0.01)),
    )
    oracle_sec.finish()

    fit_sec = _Section("rate_fit", top.take("rate_fit", dict, {}))
    tail_fraction = float(fit_sec.take("tail_fraction", (int, float), 0.2))
    floor_multiplier = float(fit_sec.take("floor_multiplier", (int, float), 3.0))
    fit_sec.finish()

    top.finish()

    cfg = experiments.ExperimentConfig(
        model=model,
        sample_sizes=tuple(sizes),
        replicates=replicates,
        theta0_policy=policy,
        ball=ball,
        master_seed=master_seed,
        max_iters=max_iters,
        param_tol=param_tol,
        budget=budget,
        delta=delta,
        constants=constants,
        ceiling_source=ceiling,
        proxy_n=proxy_n,
        tail_fraction=tail_fraction,
        floor_multiplier=floor_multiplier,
        threads=threads or None,
    )
    return study, cfg


def load_constants(path) -> oracle.BoundConstants:
    """Flat TOML file overriding the bound constants (keys c, c1, c2,
    c3, mlr_epsilon; all optional)."""
    raw = _load_toml(path)
    sec = _Section("constants", raw)
    constants = oracle.BoundConstants(
        c=float(sec.take("c", (int, float), 1.0)),
        c1=float(sec.take("c1", (int, float), 1.0)),
        c2=float(sec.take("c2", (int, float), 1.0)),
        c3=float(sec.take("c3", (int, float), 1.0)),
        mlr_epsilon=float(sec.take("mlr_epsilon", (int, float), 0.01)),
    )
    sec.finish()
    return constants
