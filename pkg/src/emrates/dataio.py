"""File formats: datasets, trajectories, rate records, run manifests.

All CSV floats are emitted at 17 significant digits so write -> read ->
write round-trips byte-identically. Dataset files carry their generating
configuration in a JSON comment line, making every file self-describing.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ValidationError
from .models import Dataset, ModelKind, ModelSpec

DATASET_FORMAT = "emrates-dataset/1"
MANIFEST_FORMAT = "emrates-manifest/1"


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _open_writer(handle):
    return csv.writer(handle, lineterminator="\n")


def dataset_columns(model: ModelSpec) -> list[str]:
    p = model.p
    kind = ModelKind(model.kind)
    if kind is ModelKind.GMM:
        return [f"y_{j}" for j in range(p)]
    if kind is ModelKind.MLR:
        return ["y"] + [f"x_{j}" for j in range(p)]
    return (
        ["y"]
        + [f"x_{j}" for j in range(p)]
        + [f"mask_{j}" for j in range(p)]
    )


def save_dataset(data: Dataset, path) -> Path:
    path = Path(path)
    model = data.model
    meta = {
        "format": DATASET_FORMAT,
        "model": ModelKind(model.kind).value,
        "theta_star": [float(v) for v in model.theta_star],
        "sigma": float(model.sigma),
        "epsilon_miss": float(model.epsilon_miss),
        "n": int(data.n),
        "seed": int(data.seed),
    }
    kind = ModelKind(model.kind)
    with path.open("w", newline="") as handle:
        handle.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        writer = _open_writer(handle)
        writer.writerow(dataset_columns(model))
        if kind is ModelKind.GMM:
            for row in data.y:
                writer.writerow([_fmt(v) for v in row])
        elif kind is ModelKind.MLR:
            for yk, xk in zip(data.y, data.x):
                writer.writerow([_fmt(yk)] + [_fmt(v) for v in xk])
        else:
            for yk, xk, mk in zip(data.y, data.x, data.mask):
                writer.writerow(
                    [_fmt(yk)]
                    + [_fmt(v) for v in xk]
                    + ["%d" % int(v) for v in mk]
                )
    return path


def load_dataset(path) -> Dataset:
    path = Path(path)
    with path.open("r", newline="") as handle:
        first = handle.readline()
        if not first.startswith("# "):
            raise ValidationError(f"{path}: missing dataset metadata line")
        try:
            meta = json.loads(first[2:])
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: bad metadata JSON: {exc}") from exc
        if meta.get("format") != DATASET_FORMAT:
            raise ValidationError(
                f"{path}: unsupported format {meta.get('format')!r}"
            )
        model = ModelSpec(
            kind=ModelKind(meta["model"]),
            theta_star=np.array(meta["theta_star"], dtype=np.float64),
            sigma=meta["sigma"],
            epsilon_miss=meta["epsilon_miss"],
        )
        reader = csv.reader(handle)
        header = next(reader)
        if header != dataset_columns(model):
            raise ValidationError(f"{path}: header does not match the model")
        rows = [row for row in reader if row]
    n, p = meta["n"], model.p
    if len(rows) != n:
        raise ValidationError(f"{path}: expected {n} rows, found {len(rows)}")
    arr = np.array([[float(v) for v in row] for row in rows])
    kind = ModelKind(model.kind)
    if kind is ModelKind.GMM:
        return Dataset(model=model, n=n, seed=meta["seed"], y=arr)
    if kind is ModelKind.MLR:
        return Dataset(
            model=model, n=n, seed=meta["seed"], y=arr[:, 0], x=arr[:, 1:]
        )
    return Dataset(
        model=model,
        n=n,
        seed=meta["seed"],
        y=arr[:, 0],
        x=arr[:, 1 : 1 + p],
        mask=arr[:, 1 + p :],
    )


def save_trajectory(traj, path, include_iterates: bool = False) -> Path:
    """Columns t, error, loglik, q_gain (empty at t=0: the gain belongs
    to the transition landing at t), plus iterate coordinates on request."""
    path = Path(path)
    p = traj.iterates.shape[1]
    header = ["t", "error", "loglik", "q_gain"]
    if include_iterates:
        header += [f"theta_{j}" for j in range(p)]
    with path.open("w", newline="") as handle:
        writer = _open_writer(handle)
        writer.writerow(header)
        for t in range(len(traj.errors)):
            row = [
                "%d" % t,
                _fmt(traj.errors[t]),
                _fmt(traj.loglik[t]),
                "" if t == 0 else _fmt(traj.q_gains[t - 1]),
            ]
            if include_iterates:
                row += [_fmt(v) for v in traj.iterates[t]]
            writer.writerow(row)
    return path


def empirical_rates_record(emp) -> dict:
    """Flat dict form of an EmpiricalRates, budget and flags included."""
    return {
        "gamma_bar_n": emp.gamma_bar_n,
        "v_bar_n": emp.v_bar_n,
        "e_bar_n": emp.e_bar_n,
        "k_bar_n": emp.k_bar_n,
        "kappa_n_ceiling": emp.kappa_n_ceiling,
        "floor_bound": emp.floor_bound,
        "budget_directions": emp.budget.directions,
        "budget_radii": emp.budget.radii,
        "budget_refine_steps": emp.budget.refine_steps,
        "gamma_is_lower_bound": emp.gamma_is_lower_bound,
        "v_is_upper_bound": emp.v_is_upper_bound,
        "search_warning": emp.search_warning,
    }


def contraction_params_record(params) -> dict:
    return {
        "gamma": params.gamma,
        "nu": params.nu,
        "kappa": params.kappa,
        "provenance": params.provenance.value,
        "mc_stderr": params.mc_stderr,
        "is_contraction": params.is_contraction,
    }


def epsilon_bounds_record(bounds) -> dict:
    rec = {
        "eps1": bounds.eps1,
        "eps2": bounds.eps2,
        "eps_s": bounds.eps_s,
        "delta": bounds.delta,
        "constants": asdict(bounds.constants),
        "gamma_n": bounds.gamma_n,
        "nu_n": bounds.nu_n,
        "kappa_n": bounds.kappa_n,
    }
    return rec


def save_json(record: dict, path) -> Path:
    path = Path(path)
    with path.open("w") as handle:
        json.dump(record, handle, indent=2, sort_keys=True, allow_nan=True)
        handle.write("\n")
    return path


RECORD_COLUMNS = [
    "n",
    "replicate",
    "seed",
    "stopped_reason",
    "rate",
    "rate_floor",
    "rate_r_squared",
    "fit_first",
    "fit_last",
    "gamma_bar_n",
    "v_bar_n",
    "e_bar_n",
    "k_bar_n",
    "kappa_n_ceiling",
    "floor_bound",
    "final_error",
    "search_warning",
]


def write_records_csv(result, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = _open_writer(handle)
        writer.writerow(RECORD_COLUMNS)
        for rec in result.records:
            emp = rec.empirical
            if rec.rate is None:
                rate_fields = ["", "", "", "", ""]
            else:
                rate_fields = [
                    _fmt(rec.rate.rate),
                    _fmt(rec.rate.floor),
                    _fmt(rec.rate.r_squared),
                    "%d" % rec.rate.fit_window[0],
                    "%d" % rec.rate.fit_window[1],
                ]
            writer.writerow(
                [
                    "%d" % rec.n,
                    "%d" % rec.replicate,
                    "%d" % rec.seed,
                    rec.stopped_reason,
                ]
                + rate_fields
                + [
                    _fmt(emp.gamma_bar_n),
                    _fmt(emp.v_bar_n),
                    _fmt(emp.e_bar_n),
                    _fmt(emp.k_bar_n),
                    _fmt(emp.kappa_n_ceiling),
                    "" if emp.floor_bound is None else _fmt(emp.floor_bound),
                    _fmt(rec.final_error),
                    emp.search_warning or "",
                ]
            )
    return path


AGGREGATE_COLUMNS = [
    "n",
    "replicates",
    "mean_rate",
    "std_rate",
    "mean_k_bar",
    "std_k_bar",
    "mean_final_error",
    "rate_skipped",
]


def write_aggregates_csv(result, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = _open_writer(handle)
        writer.writerow(AGGREGATE_COLUMNS)
        for row in result.aggregates:
            writer.writerow(
                [
                    "%d" % row.n,
                    "%d" % row.replicates,
                    _fmt(row.mean_rate),
                    _fmt(row.std_rate),
                    _fmt(row.mean_k_bar),
                    _fmt(row.std_k_bar),
                    _fmt(row.mean_final_error),
                    "%d" % row.rate_skipped,
                ]
            )
    return path


def write_plotdata(result, directory) -> list[Path]:
    """Per-trajectory log-error series, one file per (n, replicate)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for rec in result.records:
        path = directory / f"n{rec.n}_r{rec.replicate}.csv"
        with path.open("w", newline="") as handle:
            writer = _open_writer(handle)
            writer.writerow(["t", "log_error"])
            for t, err in enumerate(rec.errors):
                log_err = math.log(err) if err > 0 else -math.inf
                writer.writerow(["%d" % t, _fmt(log_err)])
        written.append(path)
    return written


def experiment_summary_record(result) -> dict:
    rec = {
        "ceiling_params": contraction_params_record(result.ceiling_params),
        "aggregates": [asdict(row) for row in result.aggregates],
        "dispersion_slope": result.dispersion_slope,
        "error_slope": result.error_slope,
        "kappa_proxy": result.kappa_proxy,
        "kappa_proxy_stderr": result.kappa_proxy_stderr,
        "fraction_beating_proxy": result.fraction_beating_proxy,
        "n_records": len(result.records),
    }
    return rec


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ManifestTimer:
    """Collects named wall-clock phases for the run manifest."""

    def __init__(self):
        self.timings: dict[str, float] = {}
        self._starts: dict[str, float] = {}

    def start(self, phase: str):
        self._starts[phase] = time.monotonic()

    def stop(self, phase: str):
        self.timings[phase] = time.monotonic() - self._starts.pop(phase)


def write_manifest(
    out_dir,
    config_snapshot: dict,
    master_seed,
    files,
    timings: dict | None = None,
) -> Path:
    """Write manifest.json listing every emitted file with its checksum."""
    out_dir = Path(out_dir)
    listed = {}
    for f in sorted(Path(f) for f in files):
        try:
            rel = str(f.relative_to(out_dir))
        except ValueError:
            rel = str(f)
        listed[rel] = sha256_of(f)
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": __version__,
        "master_seed": master_seed,
        "config": config_snapshot,
        "files": listed,
        "timings_seconds": timings or {},
    }
    path = out_dir / "manifest.json"
    with path.open("w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path
