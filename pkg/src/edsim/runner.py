"""Replication batches and report files."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .flow import ModelConfig, ReplicationResult, run_replication
from .metrics import build_report
from .scenarios import ScenarioConfig

log = logging.getLogger(__name__)

KPI_COLUMNS = ("scenario", "grouping", "tag", "metric", "mean", "ci_halfwidth", "replications", "patients")
OUTCOME_COLUMNS = ("scenario", "tag", "outcome", "mean", "ci_halfwidth", "replications")
UTILIZATION_COLUMNS = ("scenario", "view", "area", "hour", "value")
PATIENT_COLUMNS = ("replication", "id", "triage_tag", "discharge_tag", "outcome", "fate", "area",
                   "via_ambulance_critical", "t0", "t1", "t2", "t3", "t4", "t5")

# column -> parser used when reading the tables back
CSV_SCHEMAS = {
    "kpis.csv": {"scenario": str, "grouping": str, "tag": str, "metric": str, "mean": float,
                 "ci_halfwidth": float, "replications": int, "patients": int},
    "outcomes.csv": {"scenario": str, "tag": str, "outcome": str, "mean": float,
                     "ci_halfwidth": float, "replications": int},
    "utilization.csv": {"scenario": str, "view": str, "area": str, "hour": int, "value": float},
    "patients.csv": {"replication": int, "id": int, "triage_tag": str, "discharge_tag": str,
                     "outcome": str, "fate": str, "area": str, "via_ambulance_critical": int,
                     "t0": float, "t1": float, "t2": float, "t3": float, "t4": float, "t5": float},
}


def _one(args) -> ReplicationResult:
    config, seed, rep = args
    return run_replication(config, seed, rep)


def run_replications(config: ModelConfig, seed: int, reps: int, workers: int = 1) -> list[ReplicationResult]:
    """Run replications 0..reps-1; the worker count never changes the results."""
    jobs = [(config, seed, r) for r in range(reps)]
    if workers <= 1 or reps == 1:
        results = [_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, jobs))
    return sorted(results, key=lambda r: r.replication)


def simulate(scenario: ScenarioConfig, config: ModelConfig, workers: int = 1):
    """Run a scenario; returns (report, results)."""
    reps = scenario.replications
    results = run_replications(config, reps.seed, reps.reps, workers)
    peak = scenario.peak_day
    meta = {
        "scenario": scenario.to_dict(),
        "seed": reps.seed,
        "days": reps.days,
        "warmup_hours": reps.warmup_hours,
        "run_minutes": config.run_minutes,
        "utilization_mode": config.utilization_mode,
    }
    report = build_report(results, meta, peak_day=None if peak is None else peak - 1)
    return report, results


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    if hasattr(v, "label"):
        return v.label
    if hasattr(v, "value"):
        return v.value
    return v


def _write_csv(path: Path, columns, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])


def write_outputs(report: dict, out_dir: str | Path, results=None, patients_csv: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = report["metadata"]["scenario"]["name"]
    paths = []

    p = out / "report.json"
    p.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    paths.append(p)

    rows = [{"scenario": name, "grouping": "triage", **r} for r in report["kpis"]]
    rows += [{"scenario": name, "grouping": "discharge", **r} for r in report["kpis_by_discharge_tag"]]
    _write_csv(out / "kpis.csv", KPI_COLUMNS, rows)
    _write_csv(out / "outcomes.csv", OUTCOME_COLUMNS, [{"scenario": name, **r} for r in report["outcomes"]])
    urows = []
    for view, series in report["utilization"].items():
        for area, values in series.items():
            for hour, v in enumerate(values):
                urows.append({"scenario": name, "view": view, "area": area, "hour": hour, "value": v})
    _write_csv(out / "utilization.csv", UTILIZATION_COLUMNS, urows)
    paths += [out / "kpis.csv", out / "outcomes.csv", out / "utilization.csv"]

    if patients_csv and results is not None:
        prow = []
        for r in results:
            for pt in r.patients:
                prow.append({
                    "replication": r.replication, "id": pt.id, "triage_tag": pt.triage_tag,
                    "discharge_tag": pt.discharge_tag, "outcome": pt.outcome, "fate": pt.fate,
                    "area": pt.area, "via_ambulance_critical": pt.via_ambulance_critical,
                    "t0": pt.t0, "t1": pt.t1, "t2": pt.t2, "t3": pt.t3, "t4": pt.t4, "t5": pt.t5,
                })
        _write_csv(out / "patients.csv", PATIENT_COLUMNS, prow)
        paths.append(out / "patients.csv")
    return paths


def read_csv_table(path: str | Path) -> list[dict]:
    """Parse an emitted CSV back into typed rows; empty cells become None."""
    path = Path(path)
    schema = CSV_SCHEMAS[path.name]
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != tuple(schema):
            raise ValueError(f"{path.name}: columns {reader.fieldnames} do not match schema {list(schema)}")
        return [{k: (None if row[k] == "" else schema[k](row[k])) for k in schema} for row in reader]
