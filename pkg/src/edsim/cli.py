"""Command-line experiment runner.

Precedence: built-in defaults < scenario preset < --config file < flags.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .config import ConfigFileError, ExperimentConfig, config_from_dict, parse_config
from .runner import simulate, write_outputs
from .scenarios import PRESETS

log = logging.getLogger("edsim")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edsim", description="Emergency department patient-flow simulator")
    ap.add_argument("--config", help="experiment config file (JSON)")
    ap.add_argument("--scenario", choices=PRESETS, help="scenario preset")
    ap.add_argument("--reps", type=int, help="number of replications")
    ap.add_argument("--days", type=float, help="measured days per replication (after warm-up)")
    ap.add_argument("--warmup-hours", type=float, help="warm-up length in hours")
    ap.add_argument("--seed", type=int, help="base random seed")
    ap.add_argument("--workers", type=int, help="parallel worker processes")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--patients", action="store_true", help="also write patients.csv")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve_config(args) -> ExperimentConfig:
    base = parse_config(args.config).model_dump(exclude_unset=True) if args.config else {}
    if args.scenario:
        base["scenario"] = args.scenario
    reps = dict(base.get("replications") or {})
    for flag, key in ((args.reps, "reps"), (args.days, "days"),
                      (args.warmup_hours, "warmup_hours"), (args.seed, "seed")):
        if flag is not None:
            reps[key] = flag
    if reps:
        base["replications"] = reps
    if args.workers is not None:
        base["workers"] = args.workers
    output = dict(base.get("output") or {})
    if args.out:
        output["dir"] = args.out
    if args.patients:
        output["patients_csv"] = True
    if output:
        base["output"] = output
    return config_from_dict(base)


def run_experiment(cfg: ExperimentConfig) -> dict:
    scenario = cfg.scenario_config()
    model = cfg.model_config_for(scenario)
    report, results = simulate(scenario, model, workers=cfg.workers)
    write_outputs(report, cfg.output.dir, results, cfg.output.patients_csv)
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigFileError as exc:
        print(f"edsim: config error: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        report = run_experiment(cfg)
    except Exception as exc:  # any replication failure is fatal for the batch
        print(f"edsim: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    log.info("finished %s in %.1fs", report["metadata"]["scenario"]["name"], time.perf_counter() - t0)
    for row in report["kpis"]:
        if row["mean"] is not None:
            hw = "n/a" if row["ci_halfwidth"] is None else f"{row['ci_halfwidth']:.2f}"
            print(f"{row['tag']:>6} {row['metric']}: {row['mean']:9.2f} +/- {hw}")
    print(f"wrote {cfg.output.dir}/report.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
