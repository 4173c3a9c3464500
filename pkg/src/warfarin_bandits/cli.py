"""Command-line entry point: ``validate``, ``run`` and ``synth``.

Exit codes: 0 success, 1 user/config error, 2 data error, 3 internal numeric error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .config import ExperimentConfig, apply_overrides, load_config, read_parser
from .dataset import (
    WarfarinDataset,
    generate_synthetic_records,
    read_patient_table,
    resolve_schema,
    write_patient_table,
)
from .errors import ConfigurationError, DataError, WarfarinBanditsError
from .evaluation import METRICS, ExperimentResult, fit_oracle, run_experiment, write_curves_csv

log = logging.getLogger("warfarin_bandits")


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def summary_line(res: ExperimentResult) -> str:
    parts = [f"policy={res.policy}", f"runs={len(res.traces)}", f"t={len(res.traces[0])}"]
    for metric in METRICS:
        mean, lo, hi = res.final(metric)
        parts += [f"{metric}={_fmt(mean)}", f"{metric}_ci_low={_fmt(lo)}", f"{metric}_ci_high={_fmt(hi)}"]
    return " ".join(parts)


def build_dataset(cfg: ExperimentConfig):
    if cfg.data_path is not None:
        records, report = read_patient_table(cfg.data_path, cfg.schema)
        if not records:
            raise DataError(f"{cfg.data_path}: no patients with a therapeutic dose")
        return WarfarinDataset.from_records(records, cfg.manifest), report
    s = cfg.synthetic
    records = generate_synthetic_records(s.n, s.seed, noise_sd=s.noise_sd, manifest=cfg.manifest)
    return WarfarinDataset.from_records(records, cfg.manifest), None


def cmd_validate(args) -> int:
    parser = read_parser(args.config)
    apply_overrides(parser, args.set)
    schema = resolve_schema(dict(parser["schema"]) if parser.has_section("schema") else None)
    path = Path(args.dataset)
    if not path.is_file():
        raise ConfigurationError(f"cannot read dataset: {path}")
    _, report = read_patient_table(path, schema)
    sys.stdout.write(report.to_text())
    return 0 if report.retained > 0 else DataError.exit_code


def cmd_run(args) -> int:
    overrides = list(args.set)
    for flag, key in (("n_runs", "experiment.n_runs"), ("seed", "experiment.seed"),
                      ("output_dir", "experiment.output_dir"), ("jobs", "experiment.n_jobs"),
                      ("stride", "experiment.stride"), ("dataset", "data.path")):
        value = getattr(args, flag)
        if value is not None:
            overrides.append(f"{key}={value}")
    if args.episodes:
        overrides.append("experiment.episode_csv=true")
    cfg = load_config(args.config, overrides)

    dataset, report = build_dataset(cfg)
    oracle = fit_oracle(dataset.X, dataset.buckets, cfg.reward)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)

    print(f"backend={BACKEND} patients={len(dataset)} reward={cfg.reward.label} "
          f"runs={cfg.n_runs} seed={cfg.seed}")
    if report is not None:
        print(f"rows_read={report.rows_read} retained={report.retained} dropped={report.dropped}")
    for spec in cfg.policies:
        res = run_experiment(
            lambda: spec.build(cfg.manifest),
            dataset,
            cfg.reward,
            oracle,
            n_runs=cfg.n_runs,
            seed=cfg.seed,
            level=cfg.level,
            n_jobs=cfg.n_jobs,
            policy_name=spec.name,
        )
        with open(out / f"curves_{spec.name}.csv", "w", encoding="utf-8", newline="") as fh:
            write_curves_csv([res], fh, stride=cfg.stride)
        if cfg.episode_csv:
            ep_dir = out / "episodes"
            ep_dir.mkdir(exist_ok=True)
            for r, trace in enumerate(res.traces):
                with open(ep_dir / f"{spec.name}_run{r:03d}.csv", "w", encoding="utf-8", newline="") as fh:
                    trace.write_csv(fh)
        print(summary_line(res))
    return 0


def cmd_synth(args) -> int:
    if args.n <= 0:
        raise ConfigurationError("n must be positive")
    if args.noise < 0:
        raise ConfigurationError("noise must be non-negative")
    records = generate_synthetic_records(args.n, args.seed, noise_sd=args.noise)
    try:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            write_patient_table(records, fh, delimiter="\t" if args.tab else ",")
    except OSError as exc:
        raise ConfigurationError(f"cannot write {args.output}: {exc.strerror}") from None
    doses = np.array([r.therapeutic_dose_mg_per_week for r in records])
    print(f"wrote={args.output} n={len(records)} seed={args.seed} noise={args.noise} "
          f"mean_dose={_fmt(float(doses.mean()))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="warfarin-bandits", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="ingest a patient table and print the ingest report")
    v.add_argument("dataset")
    v.add_argument("--config", help="config file whose [schema] section maps column names")
    v.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="run every configured policy and write curve CSVs")
    r.add_argument("config")
    r.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config key; repeatable")
    r.add_argument("--dataset")
    r.add_argument("--n-runs", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--output-dir")
    r.add_argument("--jobs", type=int)
    r.add_argument("--stride", type=int)
    r.add_argument("--episodes", action="store_true", help="also write one CSV per episode")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("synth", help="write a synthetic patient table")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.0, help="dose noise sd in mg/week")
    s.add_argument("--tab", action="store_true", help="tab-delimited output")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except WarfarinBanditsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
