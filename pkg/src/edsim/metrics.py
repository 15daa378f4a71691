"""Output analysis: warm-up truncation, per-tag KPIs, utilisation, replication CIs."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np
from scipy import special

from .arrivals import Fate, Patient
from .flow import TREATMENT_AREAS, Area, ReplicationResult
from .tables import OUTCOMES, TAGS, Tag

CONFIDENCE = 0.95
REPORT_SCHEMA_VERSION = 1
MEASURED_FATES = (Fate.NORMAL, Fate.LEAVES_DURING_EXAMS)


@dataclass(frozen=True)
class Aggregate:
    mean: float | None
    ci_halfwidth: float | None
    n: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "ci_halfwidth": self.ci_halfwidth, "replications": self.n}


@dataclass(frozen=True)
class KpiStat:
    tag: Tag
    metric: str  # "WT" or "TT"
    mean: float | None
    ci_halfwidth: float | None
    n: int  # replications with data
    patients: int


def t_quantile(df: int, confidence: float = CONFIDENCE) -> float:
    """Two-sided Student-t critical value.

    Inverted through the incomplete beta function: ``stats.t.ppf`` is only
    good to about 1e-10 for small df.
    """
    if df < 1:
        raise ValueError("df must be at least 1")
    x = special.betaincinv(df / 2.0, 0.5, 1.0 - confidence)
    return float(math.sqrt(df * (1.0 - x) / x))


def aggregate(values, confidence: float = CONFIDENCE) -> Aggregate:
    """Mean of replication values with a Student-t half-width.

    The half-width is None for fewer than two values.
    """
    vals = [float(v) for v in values if v is not None]
    n = len(vals)
    if n == 0:
        return Aggregate(None, None, 0)
    mean = math.fsum(vals) / n
    if n < 2:
        return Aggregate(mean, None, n)
    s = float(np.std(vals, ddof=1))
    return Aggregate(mean, t_quantile(n - 1, confidence) * s / math.sqrt(n), n)


def truncate_warmup(records: list[Patient], warmup_minutes: float) -> list[Patient]:
    """Keep patients arriving at or after the end of the warm-up."""
    if warmup_minutes <= 0:
        return list(records)
    return [p for p in records if p.t0 >= warmup_minutes]


def truncate_samples(samples: list, warmup_minutes: float) -> list:
    day_minutes = 1440.0
    return [s for s in samples if s[0] * day_minutes + s[1] * 60.0 >= warmup_minutes]


def compute_kpis(records: list[Patient], by: str = "triage") -> dict:
    """Per-tag mean WT and TT for one replication.

    Only patients who completed the pathway (Normal or leaves-during-exams
    fate) count. Tags without such patients map to None. ``by`` selects the
    grouping tag: "triage" (default) or "discharge".
    """
    groups: dict[Tag, list[Patient]] = defaultdict(list)
    lwbs = Counter()
    diverted = Counter()
    censored = Counter()
    for p in records:
        if p.fate is Fate.DIVERTED:
            diverted[p.triage_tag] += 1
        elif p.t5 is None:
            censored[p.triage_tag] += 1
        elif p.fate is Fate.LWBS:
            lwbs[p.triage_tag] += 1
        elif p.fate in MEASURED_FATES:
            key = p.triage_tag if by == "triage" else p.discharge_tag
            groups[key].append(p)
    out = {}
    for tag in TAGS:
        g = groups.get(tag, [])
        if not g:
            out[tag] = None
            continue
        out[tag] = {
            "WT": math.fsum(p.t2 - p.t1 for p in g) / len(g),
            "TT": math.fsum(p.t5 - p.t1 for p in g) / len(g),
            "n": len(g),
        }
    out["lwbs"] = dict(lwbs)
    out["diverted"] = dict(diverted)
    out["censored"] = dict(censored)
    return out


def outcome_counts(records: list[Patient]) -> Counter:
    """Discharged patients by (discharge tag, outcome)."""
    return Counter((p.discharge_tag, p.outcome) for p in records
                   if p.t5 is not None and p.outcome is not None)


def utilization_series(samples, days=None) -> dict[str, list[float | None]]:
    """Hour-of-day profile of busy/capacity, averaged over replications and days.

    ``samples`` holds (day, hour, area, busy, capacity) tuples, possibly from
    several replications; ``days`` restricts the average to those day indices.
    """
    acc = {a.value: [[0.0, 0] for _ in range(24)] for a in TREATMENT_AREAS}
    wanted = None if days is None else set(days)
    for day, hour, area, busy, cap in samples:
        if wanted is not None and day not in wanted:
            continue
        cell = acc[area][hour]
        cell[0] += busy / cap
        cell[1] += 1
    return {area: [(s / n if n else None) for s, n in cells] for area, cells in acc.items()}


def _tag_counts(counter_dicts, tag) -> list[int]:
    return [d.get(tag, 0) for d in counter_dicts]


def build_report(results: list[ReplicationResult], metadata: dict,
                 peak_day: int | None = None) -> dict:
    """Aggregate replication results into the JSON-ready report."""
    results = sorted(results, key=lambda r: r.replication)
    per_rep_kpis, per_rep_kpis_d, per_rep_outcomes = [], [], []
    triage_counts, all_samples = [], []
    area_visits = []
    for r in results:
        recs = truncate_warmup(r.patients, r.warmup_minutes)
        per_rep_kpis.append(compute_kpis(recs))
        per_rep_kpis_d.append(compute_kpis(recs, by="discharge"))
        per_rep_outcomes.append(outcome_counts([p for p in recs if p.fate is not Fate.DIVERTED]))
        triage_counts.append(Counter(p.triage_tag for p in recs))
        all_samples.extend(truncate_samples(r.utilization, r.warmup_minutes))
        area_visits.append(r.visit_starts)

    def kpi_rows(per_rep):
        rows = []
        for tag in TAGS:
            for metric in ("WT", "TT"):
                vals = [k[tag][metric] for k in per_rep if k[tag] is not None]
                agg = aggregate(vals)
                rows.append({
                    "tag": tag.label, "metric": metric, "mean": agg.mean,
                    "ci_halfwidth": agg.ci_halfwidth, "replications": agg.n,
                    "patients": sum(k[tag]["n"] for k in per_rep if k[tag] is not None),
                })
        return rows

    outcome_rows = []
    discharged = {}
    for tag in TAGS:
        totals = [sum(n for (t, _), n in c.items() if t == tag) for c in per_rep_outcomes]
        discharged[tag.label] = aggregate(totals).to_dict()
        for o in OUTCOMES:
            agg = aggregate([c.get((tag, o), 0) for c in per_rep_outcomes])
            outcome_rows.append({"tag": tag.label, "outcome": o.value, "mean": agg.mean,
                                 "ci_halfwidth": agg.ci_halfwidth, "replications": agg.n})

    total_arrivals = sum(sum(c.values()) for c in triage_counts)
    triage_mix = {}
    for tag in TAGS:
        counts = [c.get(tag, 0) for c in triage_counts]
        share = sum(counts) / total_arrivals if total_arrivals else None
        triage_mix[tag.label] = {**aggregate(counts).to_dict(), "share": share}

    tallies = {}
    for name in ("lwbs", "diverted", "censored"):
        tallies[name] = {
            tag.label: aggregate(_tag_counts([k[name] for k in per_rep_kpis], tag)).to_dict()
            for tag in TAGS
        }
    tallies["arrivals"] = aggregate([sum(c.values()) for c in triage_counts]).to_dict()
    tallies["preemptions"] = aggregate([r.preemptions for r in results]).to_dict()

    visits = defaultdict(list)
    night_yellow = 0
    for vs in area_visits:
        per = Counter()
        for (area, tag, night), n in vs.items():
            per[(area, tag)] += n
            if area == Area.YELLOW.value and night:
                night_yellow += n
        for area in TREATMENT_AREAS:
            for tag in TAGS:
                visits[(area.value, tag.label)].append(per.get((area.value, tag.label), 0))
    area_rows = [{"area": a, "tag": t, **aggregate(v).to_dict()} for (a, t), v in visits.items()]

    utilization = {"all_days": utilization_series(all_samples)}
    if peak_day is not None:
        utilization["peak_day"] = utilization_series(all_samples, days=[peak_day])

    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "metadata": {**metadata, "replications": len(results), "peak_day_index": peak_day},
        "kpis": kpi_rows(per_rep_kpis),
        "kpis_by_discharge_tag": kpi_rows(per_rep_kpis_d),
        "outcomes": outcome_rows,
        "discharged": discharged,
        "triage_mix": triage_mix,
        "tallies": tallies,
        "area_visits": area_rows,
        "night_yellow_visit_starts": night_yellow,
        "utilization": utilization,
        "notes": [
            "WT/TT group by triage tag and exclude LWBS, diverted and in-system (censored) patients",
            "leaves-during-exams patients are included in TT with t5 at the moment they leave",
        ],
    }


def kpi_lookup(report: dict, tag: str, metric: str, key: str = "kpis") -> float | None:
    for row in report[key]:
        if row["tag"] == tag and row["metric"] == metric:
            return row["mean"]
    raise KeyError((tag, metric))


def outcome_lookup(report: dict, tag: str, outcome: str) -> dict:
    for row in report["outcomes"]:
        if row["tag"] == tag and row["outcome"] == outcome:
            return row
    raise KeyError((tag, outcome))
