"""Replicate studies over sample size.

Three study designs, all built from the same per-replicate pipeline
(draw dataset, run EM, fit the trajectory rate, compute the dataset's
convergence quantities):

- fluctuation: one sample size, many replicates; shows the spread of
  realized rates across datasets.
- stabilization: several sample sizes; tracks how the dispersion of the
  estimated optimal rate shrinks as n grows.
- consistency: several sample sizes spanning decades; tracks how the
  final error after convergence scales with n, and how often a dataset's
  realized rate beats the population-level rate.

Replicate (n, r) draws its dataset from seed mix(master_seed, n, r), so
runs are deterministic and no two records share data. Replicates execute
in a thread pool; records are gathered in sorted (n, r) order before
aggregation, so the worker count never affects results.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import models, oracle, rates
from ._rng import STREAM_THETA0, mix64, normal_columns, uniform_block
from .em import RateEstimate, estimate_rate, run_em
from .errors import TooFewPoints, ValidationError


@dataclass(frozen=True)
class FixedOffset:
    """Start every replicate at theta_star + offset."""

    offset: np.ndarray

    def __post_init__(self):
        off = np.asarray(self.offset, dtype=np.float64).copy()
        if off.ndim != 1:
            raise ValidationError("offset must be a vector")
        off.setflags(write=False)
        object.__setattr__(self, "offset", off)


@dataclass(frozen=True)
class RandomInBall:
    """Start each replicate at theta_star + (radius/2) * u with u a
    seeded random unit direction (half-radius keeps the start strictly
    inside the ball)."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError("radius must be positive")


Theta0Policy = Union[FixedOffset, RandomInBall]


@dataclass(frozen=True)
class ExperimentConfig:
    model: models.ModelSpec
    sample_sizes: tuple
    replicates: int
    theta0_policy: Theta0Policy
    ball: rates.BallSpec
    master_seed: int = 0
    max_iters: int = 50
    param_tol: float = 0.0
    budget: rates.SearchBudget = field(
        default_factory=lambda: rates.SearchBudget(16, 12, 8)
    )
    delta: float = 0.05
    constants: oracle.BoundConstants = field(default_factory=oracle.BoundConstants)
    ceiling_source: str = "auto"  # auto | closed_form | mc
    proxy_n: int = 10**6
    tail_fraction: float = 0.2
    floor_multiplier: float = 3.0
    threads: Optional[int] = None

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sample_sizes)
        object.__setattr__(self, "sample_sizes", sizes)
        if len(sizes) == 0 or any(n < 1 for n in sizes):
            raise ValidationError("sample sizes must be positive integers")
        if any(b >= a for a, b in zip(sizes[1:], sizes)):
            raise ValidationError("sample sizes must be strictly increasing")
        if self.replicates < 2:
            raise ValidationError("need at least 2 replicates")
        if self.ceiling_source not in ("auto", "closed_form", "mc"):
            raise ValidationError(
                "ceiling_source must be one of auto, closed_form, mc"
            )
        if isinstance(self.theta0_policy, FixedOffset):
            if self.theta0_policy.offset.shape != (self.model.p,):
                raise ValidationError("theta0 offset has the wrong dimension")


@dataclass(frozen=True)
class RunRecord:
    """One (sample size, replicate) outcome."""

    n: int
    replicate: int
    seed: int
    theta0: np.ndarray
    rate: Optional[RateEstimate]
    empirical: rates.EmpiricalRates
    final_error: float
    errors: np.ndarray
    stopped_reason: str

    @property
    def rate_skipped(self) -> bool:
        return self.rate is None


@dataclass(frozen=True)
class AggregateRow:
    """Per-sample-size summary across replicates."""

    n: int
    replicates: int
    mean_rate: float
    std_rate: float
    mean_k_bar: float
    std_k_bar: float
    mean_final_error: float
    rate_skipped: int


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    records: tuple
    aggregates: tuple
    ceiling_params: oracle.ContractionParams
    dispersion_slope: Optional[float] = None
    error_slope: Optional[float] = None
    kappa_proxy: Optional[float] = None
    kappa_proxy_stderr: Optional[float] = None
    fraction_beating_proxy: Optional[float] = None


def replicate_seed(master_seed: int, n: int, replicate: int) -> int:
    return mix64(master_seed, n, replicate)


def _theta0_for(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    policy = cfg.theta0_policy
    star = cfg.model.theta_star
    if isinstance(policy, FixedOffset):
        return star + policy.offset
    p = cfg.model.p
    pairs = 2 * ((p + 1) // 2)
    u = uniform_block(seed, STREAM_THETA0, 1, pairs)
    z = normal_columns(u, p)[0]
    direction = z / np.linalg.norm(z)
    return star + 0.5 * policy.radius * direction


def resolve_ceiling_params(cfg: ExperimentConfig) -> oracle.ContractionParams:
    """The population (gamma, nu) pair the per-n rate ceiling is built
    from: closed form when available, Monte-Carlo proxy otherwise (or
    when the config insists)."""
    if cfg.ceiling_source == "mc":
        return oracle.mc_population_grv_bound(
            cfg.model, cfg.ball, cfg.proxy_n, cfg.budget, seed=cfg.master_seed
        )
    try:
        return oracle.closed_form_bounds(cfg.model, cfg.ball, cfg.constants)
    except oracle.OutOfRegime:
        if cfg.ceiling_source == "closed_form":
            raise
        return oracle.mc_population_grv_bound(
            cfg.model, cfg.ball, cfg.proxy_n, cfg.budget, seed=cfg.master_seed
        )


def _kappa_ceiling(cfg: ExperimentConfig, params, n: int) -> float:
    bounds = oracle.epsilon_bounds(
        cfg.model, cfg.delta, cfg.ball, n, cfg.constants, params
    )
    return bounds.kappa_n


def _run_one(cfg: ExperimentConfig, ceiling: float, n: int, r: int) -> RunRecord:
    seed = replicate_seed(cfg.master_seed, n, r)
    data = models.sample_dataset(cfg.model, n, seed)
    theta0 = _theta0_for(cfg, seed)
    traj = run_em(cfg.model, data, theta0, cfg.max_iters, cfg.param_tol)
    try:
        rate = estimate_rate(traj, cfg.tail_fraction, cfg.floor_multiplier)
    except TooFewPoints:
        rate = None
    empirical = rates.compute_empirical_rates(
        cfg.model, data, cfg.ball, cfg.budget, ceiling
    )
    return RunRecord(
        n=n,
        replicate=r,
        seed=seed,
        theta0=theta0,
        rate=rate,
        empirical=empirical,
        final_error=float(traj.errors[-1]),
        errors=np.asarray(traj.errors),
        stopped_reason=traj.stopped_reason.value,
    )


def _run_grid(cfg: ExperimentConfig, params) -> tuple:
    jobs = [(n, r) for n in cfg.sample_sizes for r in range(cfg.replicates)]
    ceilings = {n: _kappa_ceiling(cfg, params, n) for n in cfg.sample_sizes}
    workers = cfg.threads or os.cpu_count() or 1
    if workers == 1:
        results = {key: _run_one(cfg, ceilings[key[0]], *key) for key in jobs}
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                key: pool.submit(_run_one, cfg, ceilings[key[0]], *key)
                for key in jobs
            }
            results = {key: fut.result() for key, fut in futures.items()}
    return tuple(results[key] for key in sorted(results))


def _aggregate(cfg: ExperimentConfig, records) -> tuple:
    rows = []
    for n in cfg.sample_sizes:
        group = [rec for rec in records if rec.n == n]
        fitted = [rec.rate.rate for rec in group if rec.rate is not None]
        k_bars = np.array([rec.empirical.k_bar_n for rec in group])
        finals = np.array([rec.final_error for rec in group])
        if fitted:
            arr = np.array(fitted)
            mean_rate = float(arr.mean())
            std_rate = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        else:
            mean_rate = math.nan
            std_rate = math.nan
        rows.append(
            AggregateRow(
                n=n,
                replicates=len(group),
                mean_rate=mean_rate,
                std_rate=std_rate,
                mean_k_bar=float(k_bars.mean()),
                std_k_bar=float(k_bars.std(ddof=1)) if len(k_bars) > 1 else 0.0,
                mean_final_error=float(finals.mean()),
                rate_skipped=sum(1 for rec in group if rec.rate is None),
            )
        )
    return tuple(rows)


def _loglog_slope(xs, ys) -> float:
    x = np.log(np.asarray(xs, dtype=np.float64))
    y = np.log(np.asarray(ys, dtype=np.float64))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def run_rate_fluctuation_study(cfg: ExperimentConfig) -> ExperimentResult:
    """Single sample size: the spread of realized rates across datasets."""
    if len(cfg.sample_sizes) != 1:
        raise ValidationError("fluctuation study takes exactly one sample size")
    params = resolve_ceiling_params(cfg)
    records = _run_grid(cfg, params)
    return ExperimentResult(
        config=cfg,
        records=records,
        aggregates=_aggregate(cfg, records),
        ceiling_params=params,
    )


def run_rate_stabilization_study(cfg: ExperimentConfig) -> ExperimentResult:
    """Several sample sizes: dispersion of the estimated optimal rate
    versus n, with the log-log slope of std(k_bar_n) against n."""
    if len(cfg.sample_sizes) < 3:
        raise ValidationError("stabilization study needs at least 3 sample sizes")
    params = resolve_ceiling_params(cfg)
    records = _run_grid(cfg, params)
    aggregates = _aggregate(cfg, records)
    stds = [row.std_k_bar for row in aggregates]
    slope = None
    if all(s > 0 for s in stds):
        slope = _loglog_slope(cfg.sample_sizes, stds)
    return ExperimentResult(
        config=cfg,
        records=records,
        aggregates=aggregates,
        ceiling_params=params,
        dispersion_slope=slope,
    )


def run_consistency_study(cfg: ExperimentConfig) -> ExperimentResult:
    """Sample sizes spanning at least two decades: scaling of the final
    error with n, plus how often realized rates beat the population
    proxy rate."""
    if len(cfg.sample_sizes) < 4:
        raise ValidationError("consistency study needs at least 4 sample sizes")
    if max(cfg.sample_sizes) < 100 * min(cfg.sample_sizes):
        raise ValidationError("sample sizes must span at least two decades")
    params = resolve_ceiling_params(cfg)
    records = _run_grid(cfg, params)
    aggregates = _aggregate(cfg, records)
    error_slope = _loglog_slope(
        cfg.sample_sizes, [row.mean_final_error for row in aggregates]
    )
    proxy = oracle.mc_population_grv_bound(
        cfg.model, cfg.ball, cfg.proxy_n, cfg.budget, seed=cfg.master_seed
    )
    fitted = [rec for rec in records if rec.rate is not None]
    frac = None
    if fitted:
        beating = sum(1 for rec in fitted if rec.rate.rate < proxy.kappa)
        frac = beating / len(fitted)
    return ExperimentResult(
        config=cfg,
        records=records,
        aggregates=aggregates,
        ceiling_params=params,
        error_slope=error_slope,
        kappa_proxy=proxy.kappa,
        kappa_proxy_stderr=proxy.mc_stderr,
        fraction_beating_proxy=frac,
    )
