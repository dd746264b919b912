"""Command-line batch runner.

    mollified-qft --list
    mollified-qft --experiment moments --out results/
    mollified-qft --config run.ini

Each experiment writes its CSV tables into ``<out>/<experiment>/`` and a
``summary.json`` with pass/fail per criterion.  Exit status is 0 iff every
selected criterion passes, 1 on a failed criterion and 2 on a usage error.
The only environment variable consulted is MOLLIFIED_QFT_THREADS, which caps
the BLAS thread pool.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
from pathlib import Path

from .errors import ArtifactError, UsageError

THREADS_ENV = "MOLLIFIED_QFT_THREADS"


def _limit_threads():
    n = os.environ.get(THREADS_ENV)
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def build_parser():
    p = argparse.ArgumentParser(prog="mollified-qft", description="Run regularized-field experiments.")
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--experiment", help="experiment name (overrides the config); 'all' runs every one")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--list", action="store_true", help="list experiment names and exit")
    p.add_argument("--write-default-config", metavar="PATH", help="write the default configuration and exit")
    return p


def _criterion_dict(c):
    return {"key": c.key, "description": c.description, "passed": c.passed, "value": c.value,
            "threshold": c.threshold}


def run(cfg, stream=None) -> int:
    stream = stream or sys.stdout
    from .config import EXPERIMENTS
    from .experiments import run_experiment
    from .io import write_csv, write_json

    names = EXPERIMENTS if cfg.experiment.name == "all" else (cfg.experiment.name,)
    out = Path(cfg.experiment.out)
    summary = {"started": _dt.datetime.now(_dt.timezone.utc).isoformat(), "experiments": {}}
    all_ok = True
    for name in names:
        res = run_experiment(name, cfg)
        for table, (header, rows) in res.tables.items():
            write_csv(out / name / f"{table}.csv", header, rows)
        block = {"passed": res.passed, "runtime_s": res.runtime, "info": res.info,
                 "criteria": [_criterion_dict(c) for c in res.criteria]}
        write_json(out / name / "summary.json", block)
        summary["experiments"][name] = block
        all_ok &= res.passed
        for c in res.criteria:
            print(f"[{'PASS' if c.passed else 'FAIL'}] {name} {c.key}: {c.description}", file=stream)
    summary["passed"] = all_ok
    write_json(out / "summary.json", summary)
    return 0 if all_ok else 1


def main(argv=None) -> int:
    _limit_threads()
    from .config import EXPERIMENTS, ExperimentConfig, load_config, validate, write_config

    args = build_parser().parse_args(argv)
    if args.list:
        for name in EXPERIMENTS + ("all",):
            print(name)
        return 0
    try:
        if args.write_default_config:
            Path(args.write_default_config).write_text(write_config(ExperimentConfig()), encoding="utf-8")
            return 0
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.experiment:
            cfg.experiment.name = args.experiment
        if args.out:
            cfg.experiment.out = args.out
        validate(cfg)
        return run(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
