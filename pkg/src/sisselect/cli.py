"""``sisselect`` command line.

Exit codes: 0 on success, 2 for configuration or input errors, 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import ExperimentConfig, emit_figure_data, run_experiment
from .core import read_dataset_csv, standardize
from .exceptions import NumericalError, SisError, StageError
from .pipelines import PipelineSpec, resolve_size, run_pipeline
from .rng import make_rng
from .screening import RIDGE_INF, IsisConfig, ItrrsConfig, isis_select, itrrs_screen, sis_screen
from .simgen import SimulationSpec, generate, write_instance
from .theory import (eigen_concentration_check, ks_critical, max_spurious_corr,
                     min_model_size_to_cover, projection_diag_check)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_screen(args) -> int:
    data = read_dataset_csv(args.data)
    sd = standardize(data)
    d = resolve_size(args.d, sd.n)
    if args.method == "sis":
        selected = sis_screen(sd, d).selected
    elif args.method == "itrrs":
        lam = RIDGE_INF if args.ridge_lambda == "inf" else float(args.ridge_lambda)
        selected = itrrs_screen(sd, ItrrsConfig(lam=lam, delta=args.delta, d_final=d)).selected
    else:
        selected = isis_select(sd, IsisConfig.for_n(sd.n, d_total=d)).selected
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(sd.p))
    result = {"method": args.method, "d": d, "selected": [int(j) + 1 for j in selected],
              "names": [names[j] for j in selected]}
    if args.out:
        _dump(result, _out_dir(args) / "screen.json")
    print(json.dumps(result))
    return EXIT_OK


def cmd_fit(args) -> int:
    data = read_dataset_csv(args.data)
    if args.config:
        spec = PipelineSpec.from_dict(_load_json(args.config))
    else:
        spec = PipelineSpec(args.method)
    out = run_pipeline(data, spec, sigma=args.sigma)
    est = out.final_estimate
    result = {
        "method": spec.label,
        "lambda": out.lam,
        "support": [int(j) + 1 for j in est.support],
        "beta": [float(est.beta[j]) for j in est.support],
        "beta_raw": [float(out.beta_raw[j]) for j in est.support],
        "stages": {name: [int(j) + 1 for j in idx] for name, idx in out.stage_trace},
    }
    if args.out:
        _dump(result, _out_dir(args) / "fit.json")
    print(json.dumps(result))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if not args.config:
        raise ConfigError("simulate needs --config")
    spec = SimulationSpec.from_dict(_load_json(args.config))
    seed = spec.seed if args.seed is None else args.seed
    out = _out_dir(args)
    for r in range(args.reps or 1):
        inst = generate(spec, make_rng(seed, r, "data"))
        write_instance(inst, out / f"data_{r:04d}.csv", out / f"truth_{r:04d}.csv")
    return EXIT_OK


def cmd_bench(args) -> int:
    if not args.config:
        raise ConfigError("bench needs --config")
    cfg = ExperimentConfig.from_dict(_load_json(args.config))
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.reps is not None:
        changes["n_reps"] = args.reps
    if args.out is not None:
        changes["output_dir"] = args.out
    if changes:
        cfg = replace(cfg, **changes)
    if cfg.output_dir is None:
        cfg = replace(cfg, output_dir=".")
    report = run_experiment(cfg, jobs=args.jobs or 1)
    for method, stats in report.per_method.items():
        print(f"{method}: size {stats['median_model_size']} l2 {stats['median_l2_error']:.4f} "
              f"acc {stats['inclusion_accuracy']:.3f}")
    return EXIT_OK


def cmd_theory(args) -> int:
    seed = 0 if args.seed is None else args.seed
    out = _out_dir(args)
    draws = args.reps or 1000
    rng = make_rng(seed, 0, f"theory:{args.check}")
    if args.check == "projection":
        rep = projection_diag_check(args.n, args.p, draws, rng)
        extra = {"ks_critical_0.01": ks_critical(draws)}
    elif args.check == "eigen":
        rep = eigen_concentration_check(args.n, args.p, draws, rng)
        extra = {}
    elif args.check == "spurious":
        rep = max_spurious_corr(args.n, args.p, draws, rng, pairwise=args.pairwise)
        extra = {}
    else:
        if not args.config:
            raise ConfigError("theory cover needs --config with a simulation spec")
        spec = SimulationSpec.from_dict(_load_json(args.config))
        sizes = [min_model_size_to_cover(generate(spec, make_rng(seed, r, "data")))
                 for r in range(draws)]
        emit_figure_data(np.array(sizes), "sorted", out / "cover_sorted.csv")
        emit_figure_data(np.array(sizes), "histogram", out / "cover_hist.csv")
        summary = {"n_draws": draws, "median": float(np.median(sizes)),
                   "p_le_50": float(np.mean(np.array(sizes) <= 50))}
        _dump(summary, out / "cover.json")
        print(json.dumps(summary))
        return EXIT_OK
    emit_figure_data(rep, "sorted", out / f"{args.check}_sorted.csv")
    summary = {"reference": rep.reference, "params": rep.params, "ks": rep.ks_statistic,
               "n_draws": rep.n_draws, "median": rep.median, "redraws": rep.redraws,
               **rep.summary, **extra}
    _dump(summary, out / f"{args.check}.json")
    print(json.dumps(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="base seed (overrides the config)")
    common.add_argument("--jobs", type=int, default=None, help="worker processes")
    common.add_argument("--out", help="output directory")
    common.add_argument("--reps", type=int, help="replicates or Monte Carlo draws")

    parser = argparse.ArgumentParser(prog="sisselect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("screen", parents=[common], help="screen one dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=("sis", "itrrs", "isis"), default="sis")
    p.add_argument("-d", "--d", default="n/log n", type=_size_arg)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--ridge-lambda", default="inf")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("fit", parents=[common], help="run one pipeline on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--method", default="SIS_SCAD")
    p.add_argument("--sigma", type=float, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", parents=[common], help="write simulated instances")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", parents=[common], help="run a Monte Carlo experiment")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("theory", parents=[common], help="distributional checks")
    p.add_argument("check", choices=("projection", "eigen", "spurious", "cover"))
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--pairwise", action="store_true")
    p.set_defaults(func=cmd_theory)
    return parser


def _size_arg(text: str):
    return int(text) if text.strip().lstrip("-").isdigit() else text


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.jobs is not None and args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc.cause, NumericalError) else EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, SisError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
