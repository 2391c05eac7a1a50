"""Command-line interface.

Subcommands: simulate, run-em, rates, oracle, experiment. Every run
writes its outputs plus a manifest.json listing each emitted file with
a sha256 checksum, the configuration snapshot, and wall-clock timings.

Exit codes: 0 success, 2 validation/configuration error, 3 numerical
failure. The default output directory is the EMRATES_OUT environment
variable when set, else the working directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, config, dataio, em, experiments, models, oracle, rates
from .errors import (
    EmratesError,
    OutOfRegime,
    SingularSystem,
    TooFewPoints,
    ValidationError,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _default_out() -> str:
    return os.environ.get("EMRATES_OUT", ".")


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated floats, got {text!r}"
        ) from None


def _model_kind(text: str) -> str:
    return text.upper()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emrates",
        description="EM convergence-rate estimation on three latent-variable models",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate and persist a dataset")
    sim.add_argument("--model", required=True, type=_model_kind, choices=[k.value for k in models.ModelKind])
    sim.add_argument("--p", type=int, default=None, help="dimension check against --theta-star")
    sim.add_argument("--theta-star", type=_vector, required=True)
    sim.add_argument("--sigma", type=float, default=1.0)
    sim.add_argument("--eps-miss", type=float, default=0.0)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=_default_out())

    rem = sub.add_parser("run-em", help="run EM on a stored dataset")
    rem.add_argument("--data", required=True)
    rem.add_argument("--theta0", type=_vector, required=True)
    rem.add_argument("--max-iters", type=int, default=50)
    rem.add_argument("--tol", type=float, default=0.0)
    rem.add_argument("--include-iterates", action="store_true")
    rem.add_argument("--out", default=_default_out())

    rat = sub.add_parser("rates", help="estimate the dataset convergence quantities")
    rat.add_argument("--data", required=True)
    rat.add_argument("--r", type=float, required=True)
    rat.add_argument("--R", type=float, default=math.inf)
    rat.add_argument("--directions", type=int, default=32)
    rat.add_argument("--radii", type=int, default=16)
    rat.add_argument("--refine-steps", type=int, default=8)
    rat.add_argument("--delta", type=float, default=0.05)
    rat.add_argument("--ceiling", choices=["auto", "closed_form", "mc"], default="auto")
    rat.add_argument("--mc-n", type=int, default=10**5)
    rat.add_argument("--constants-file", default=None)
    rat.add_argument("--out", default=_default_out())

    orc = sub.add_parser("oracle", help="population bounds and sample-size conditions")
    orc.add_argument("--model", required=True, type=_model_kind, choices=[k.value for k in models.ModelKind])
    orc.add_argument("--theta-star", type=_vector, required=True)
    orc.add_argument("--sigma", type=float, default=1.0)
    orc.add_argument("--eps-miss", type=float, default=0.0)
    orc.add_argument("--r", type=float, required=True)
    orc.add_argument("--R", type=float, default=math.inf)
    orc.add_argument("--delta", type=float, default=0.05)
    orc.add_argument("--n", type=int, default=10**4, help="sample size for the deviation bounds")
    orc.add_argument("--mc-n", type=int, default=0, help="population-proxy draws; 0 skips the Monte-Carlo estimate")
    orc.add_argument("--directions", type=int, default=32)
    orc.add_argument("--radii", type=int, default=16)
    orc.add_argument("--refine-steps", type=int, default=8)
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--constants-file", default=None)
    orc.add_argument("--out", default=_default_out())

    exp = sub.add_parser("experiment", help="run a study from a config file")
    exp.add_argument("--config", required=True)
    exp.add_argument("--threads", type=int, default=None)
    exp.add_argument("--no-plots", action="store_true")
    exp.add_argument("--out", default=_default_out())

    return parser


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _snapshot(args) -> dict:
    snap = {}
    for key, value in sorted(vars(args).items()):
        if key == "command":
            continue
        if isinstance(value, np.ndarray):
            value = [float(v) for v in value]
        snap[key] = value
    snap["command"] = args.command
    return snap


def _model_from_args(args) -> models.ModelSpec:
    model = models.ModelSpec(
        kind=models.ModelKind(args.model),
        theta_star=args.theta_star,
        sigma=args.sigma,
        epsilon_miss=args.eps_miss,
    )
    if args.p is not None and args.p != model.p:
        raise ValidationError(
            f"--p {args.p} contradicts --theta-star of length {model.p}"
        )
    return model


def _cmd_simulate(args) -> int:
    out = _out_dir(args)
    if args.n < 1:
        raise ValidationError("n must be >= 1")
    model = _model_from_args(args)
    timer = dataio.ManifestTimer()
    timer.start("simulate")
    data = models.sample_dataset(model, args.n, args.seed)
    name = f"{args.model}_n{args.n}_seed{args.seed}.csv"
    written = dataio.save_dataset(data, out / name)
    timer.stop("simulate")
    dataio.write_manifest(out, _snapshot(args), args.seed, [written], timer.timings)
    print(f"wrote {written}")
    return EXIT_OK


def _cmd_run_em(args) -> int:
    out = _out_dir(args)
    data = dataio.load_dataset(args.data)
    timer = dataio.ManifestTimer()
    timer.start("run_em")
    traj = em.run_em(data.model, data, args.theta0, args.max_iters, args.tol)
    timer.stop("run_em")
    written = dataio.save_trajectory(
        traj, out / "trajectory.csv", include_iterates=args.include_iterates
    )
    dataio.write_manifest(out, _snapshot(args), data.seed, [written], timer.timings)
    print(
        f"wrote {written} ({traj.n_steps} steps, "
        f"stopped: {traj.stopped_reason.value}, final error "
        f"{traj.errors[-1]:.6g})"
    )
    return EXIT_OK


def _cmd_rates(args) -> int:
    out = _out_dir(args)
    data = dataio.load_dataset(args.data)
    model = data.model
    ball = rates.BallSpec(r=args.r, R=args.R, center=model.theta_star)
    budget = rates.SearchBudget(args.directions, args.radii, args.refine_steps)
    constants = (
        config.load_constants(args.constants_file)
        if args.constants_file
        else oracle.BoundConstants()
    )
    timer = dataio.ManifestTimer()
    timer.start("ceiling")
    params = None
    if args.ceiling in ("auto", "closed_form"):
        try:
            params = oracle.closed_form_bounds(model, ball, constants)
        except OutOfRegime:
            if args.ceiling == "closed_form":
                raise
    if params is None:
        params = oracle.mc_population_grv_bound(model, ball, args.mc_n, budget)
    bounds = oracle.epsilon_bounds(model, args.delta, ball, data.n, constants, params)
    timer.stop("ceiling")

    timer.start("rates")
    emp = rates.compute_empirical_rates(model, data, ball, budget, bounds.kappa_n)
    timer.stop("rates")

    record = dataio.empirical_rates_record(emp)
    record["ball_r"] = args.r
    record["ball_R"] = args.R
    record["ceiling_params"] = dataio.contraction_params_record(params)
    record["epsilon_bounds"] = dataio.epsilon_bounds_record(bounds)
    written = dataio.save_json(record, out / "rates.json")
    dataio.write_manifest(out, _snapshot(args), data.seed, [written], timer.timings)
    print(
        f"wrote {written} (gamma_bar_n {emp.gamma_bar_n:.6g}, v_bar_n "
        f"{emp.v_bar_n:.6g}, e_bar_n {emp.e_bar_n:.6g}, k_bar_n {emp.k_bar_n:.6g})"
    )
    if emp.search_warning:
        print(f"warning: {emp.search_warning}", file=sys.stderr)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    out = _out_dir(args)
    model = models.ModelSpec(
        kind=models.ModelKind(args.model),
        theta_star=args.theta_star,
        sigma=args.sigma,
        epsilon_miss=args.eps_miss,
    )
    ball = rates.BallSpec(r=args.r, R=args.R, center=model.theta_star)
    budget = rates.SearchBudget(args.directions, args.radii, args.refine_steps)
    constants = (
        config.load_constants(args.constants_file)
        if args.constants_file
        else oracle.BoundConstants()
    )
    timer = dataio.ManifestTimer()
    record: dict = {"closed_form": None, "closed_form_error": None, "mc": None}

    timer.start("closed_form")
    params = None
    try:
        params = oracle.closed_form_bounds(model, ball, constants)
        record["closed_form"] = dataio.contraction_params_record(params)
    except OutOfRegime as exc:
        record["closed_form_error"] = str(exc)
    timer.stop("closed_form")

    if args.mc_n > 0:
        timer.start("mc")
        mc = oracle.mc_population_grv_bound(
            model, ball, args.mc_n, budget, seed=args.seed
        )
        record["mc"] = dataio.contraction_params_record(mc)
        timer.stop("mc")
        if params is None:
            params = mc

    if params is None:
        raise OutOfRegime(
            "no contraction parameters available: closed form out of regime "
            "and --mc-n 0; rerun with --mc-n to enable the Monte-Carlo estimate"
        )
    bounds = oracle.epsilon_bounds(model, args.delta, ball, args.n, constants, params)
    record["epsilon_bounds"] = dataio.epsilon_bounds_record(bounds)
    report = oracle.check_sample_size_conditions(model, params, bounds, ball)
    record["sample_size_conditions"] = {
        "main_margin": report.main_margin,
        "main_ok": report.main_ok,
        "eps2_margin": report.eps2_margin,
        "eps2_ok": report.eps2_ok,
        "nu_n": report.nu_n,
        "nu_n_ok": report.nu_n_ok,
        "unsatisfiable": report.unsatisfiable,
        "all_ok": report.all_ok,
    }
    written = dataio.save_json(record, out / "oracle.json")
    dataio.write_manifest(out, _snapshot(args), args.seed, [written], timer.timings)
    print(f"wrote {written}")
    return EXIT_OK


_STUDY_RUNNERS = {
    "fluctuation": experiments.run_rate_fluctuation_study,
    "stabilization": experiments.run_rate_stabilization_study,
    "consistency": experiments.run_consistency_study,
}


def _cmd_experiment(args) -> int:
    out = _out_dir(args)
    study, cfg = config.load_experiment_config(args.config)
    if args.threads is not None:
        cfg = dataclasses.replace(cfg, threads=args.threads)
    timer = dataio.ManifestTimer()
    timer.start("study")
    result = _STUDY_RUNNERS[study](cfg)
    timer.stop("study")

    timer.start("write")
    written = [
        dataio.write_records_csv(result, out / "records.csv"),
        dataio.write_aggregates_csv(result, out / "aggregates.csv"),
    ]
    written += dataio.write_plotdata(result, out / "plotdata")
    summary = dataio.experiment_summary_record(result)
    summary["study"] = study
    written.append(dataio.save_json(summary, out / "summary.json"))
    if not args.no_plots:
        from . import plotting

        written += plotting.render_experiment_figures(result, study, out)
    timer.stop("write")

    with open(args.config, "rb") as handle:
        config_bytes = handle.read()
    snapshot = _snapshot(args)
    snapshot["config_sha256"] = dataio.sha256_of(args.config)
    snapshot["config_text"] = config_bytes.decode("utf-8", errors="replace")
    dataio.write_manifest(out, snapshot, cfg.master_seed, written, timer.timings)
    print(
        f"wrote {len(written)} files to {out} "
        f"({len(result.records)} records, study: {study})"
    )
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "run-em": _cmd_run_em,
    "rates": _cmd_rates,
    "oracle": _cmd_oracle,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SingularSystem, TooFewPoints, OutOfRegime) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except EmratesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
