"""Patient arrivals: piecewise-constant hourly rates sampled by thinning."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .kernel import MINUTES_PER_DAY, MINUTES_PER_HOUR, Event, RngStream
from .tables import BASELINE_TAG_MIX, TAGS, Outcome, Tag

PROFILE_SCHEMA_VERSION = 1
MIX_TOLERANCE = 1e-9


class RatePlanError(ValueError):
    pass


def validate_rates(rates, where: str = "rates") -> list[float]:
    rates = list(rates)
    if len(rates) != 24:
        raise RatePlanError(f"{where}: expected 24 hourly rates, got {len(rates)}")
    out = []
    for i, r in enumerate(rates):
        try:
            r = float(r)
        except (TypeError, ValueError):
            raise RatePlanError(f"{where}[{i}]: not a number: {r!r}") from None
        if not np.isfinite(r) or r < 0:
            raise RatePlanError(f"{where}[{i}]: rate must be a non-negative number, got {r!r}")
        out.append(r)
    return out


def validate_mix(mix, where: str = "tag mix") -> tuple[float, float, float, float]:
    mix = tuple(float(p) for p in mix)
    if len(mix) != 4:
        raise RatePlanError(f"{where}: expected 4 probabilities (White, Green, Yellow, Red)")
    if any(p < 0 or not np.isfinite(p) for p in mix):
        raise RatePlanError(f"{where}: probabilities must be non-negative, got {mix}")
    if abs(sum(mix) - 1.0) > MIX_TOLERANCE:
        raise RatePlanError(f"{where}: probabilities sum to {sum(mix)!r}, not 1")
    return mix


@dataclass
class RatePlan:
    """Hourly arrival rates (patients/hour) and tag mix for each simulated day.

    Day ``d`` covers minutes ``[1440 d, 1440 (d + 1))``; slot ``h`` of a day
    is the hour ``[h:00, h+1:00)``.
    """

    slots: np.ndarray
    tag_mix: np.ndarray

    def __post_init__(self):
        self.slots = np.array(self.slots, dtype=float)
        self.tag_mix = np.array(self.tag_mix, dtype=float)
        if self.slots.ndim != 2 or self.slots.shape[1] != 24 or self.slots.shape[0] < 1:
            raise RatePlanError(f"slots must have shape (days, 24), got {self.slots.shape}")
        if self.tag_mix.shape != (self.slots.shape[0], 4):
            raise RatePlanError(
                f"tag_mix must have shape ({self.slots.shape[0]}, 4), got {self.tag_mix.shape}"
            )
        for d in range(self.horizon_days):
            validate_rates(self.slots[d], f"day {d} rates")
            validate_mix(self.tag_mix[d], f"day {d} tag mix")
        # plain lists: per-event lookups are much cheaper than ndarray indexing
        self._rates_per_min = (self.slots / MINUTES_PER_HOUR).tolist()
        self._lmax_per_min = [max(day) for day in self._rates_per_min]

    @classmethod
    def from_profile(cls, rates, days: int, mix=BASELINE_TAG_MIX,
                     day_overrides: dict[int, list[float]] | None = None) -> RatePlan:
        rates = validate_rates(rates)
        slots = np.tile(np.asarray(rates, dtype=float), (days, 1))
        for d, override in (day_overrides or {}).items():
            if 0 <= int(d) < days:
                slots[int(d)] = validate_rates(override, f"day_overrides[{d}]")
        mix = validate_mix(mix)
        return cls(slots, np.tile(np.asarray(mix, dtype=float), (days, 1)))

    @property
    def horizon_days(self) -> int:
        return int(self.slots.shape[0])

    @property
    def horizon_minutes(self) -> float:
        return self.horizon_days * MINUTES_PER_DAY

    def lambda_max(self, day: int) -> float:
        """Largest hourly rate of ``day`` (patients/hour)."""
        return float(self.slots[day].max())

    def rate_at(self, t: float) -> float:
        """Arrival rate at minute ``t`` in patients/hour."""
        day, slot = _day_slot(t)
        if day >= self.horizon_days:
            return 0.0
        return float(self.slots[day, slot])

    def mix_on(self, day: int) -> tuple[float, ...]:
        day = min(max(day, 0), self.horizon_days - 1)
        return tuple(self.tag_mix[day])

    def copy(self) -> RatePlan:
        return RatePlan(self.slots.copy(), self.tag_mix.copy())

    def __eq__(self, other):
        if not isinstance(other, RatePlan):
            return NotImplemented
        return (self.slots.shape == other.slots.shape
                and np.array_equal(self.slots, other.slots)
                and np.array_equal(self.tag_mix, other.tag_mix))


def _day_slot(t: float) -> tuple[int, int]:
    day = int(t // MINUTES_PER_DAY)
    slot = int((t - day * MINUTES_PER_DAY) // MINUTES_PER_HOUR)
    return day, min(slot, 23)


def thinning_accepts(t: float, u: float, plan: RatePlan) -> bool:
    """Accept a candidate at ``t`` generated at the day's peak rate.

    The acceptance probability is ``rate(t) / lambda_max(day)``.
    """
    day, slot = _day_slot(t)
    lmax = plan._lmax_per_min[day]
    return u * lmax < plan._rates_per_min[day][slot]


def next_arrival_time(now: float, plan: RatePlan, stream: RngStream) -> float | None:
    """Next arrival epoch strictly after ``now``; None once the plan is exhausted."""
    gen = stream.generator
    t = now
    day = int(t // MINUTES_PER_DAY)
    rates = plan._rates_per_min
    lmaxes = plan._lmax_per_min
    while day < plan.horizon_days:
        lmax = lmaxes[day]
        day_end = (day + 1) * MINUTES_PER_DAY
        if lmax <= 0.0:
            t, day = day_end, day + 1
            continue
        t += gen.exponential(1.0 / lmax)
        if t >= day_end:
            # memoryless: restart the candidate stream at the boundary
            t, day = day_end, day + 1
            continue
        slot = min(int((t - day * MINUTES_PER_DAY) // MINUTES_PER_HOUR), 23)
        if gen.random() * lmax < rates[day][slot]:
            return t
    return None


def assign_triage_tag(mix, u: float) -> Tag:
    """Map a uniform draw onto the cumulative White, Green, Yellow, Red bins."""
    acc = 0.0
    for tag, p in zip(TAGS, mix):
        acc += p
        if u < acc:
            return tag
    for tag in reversed(TAGS):  # only reached through rounding at u close to 1
        if mix[tag] > 0:
            return tag
    raise ValueError("tag mix has no mass")


class Fate(Enum):
    NORMAL = "Normal"
    LWBS = "LWBS"
    LEAVES_DURING_EXAMS = "LeavesDuringExams"
    DIVERTED = "Diverted"


@dataclass(eq=False)
class Patient:
    """One patient and the timestamps of the pathway.

    t0 arrival, t1 end of triage, t2 start of visit, t3 end of visit,
    t4 end of exams and reassessment, t5 discharge.
    """

    id: int
    t0: float
    triage_tag: Tag
    via_ambulance_critical: bool = False
    t1: float | None = None
    t2: float | None = None
    t3: float | None = None
    t4: float | None = None
    t5: float | None = None
    discharge_tag: Tag | None = None
    outcome: Outcome | None = None
    fate: Fate = Fate.NORMAL
    lwbs_assigned: bool = False
    area: str | None = None
    # bookkeeping during the run
    abandon_event: Event | None = field(default=None, repr=False)
    waiting: bool = field(default=False, repr=False)
    service_event: Event | None = field(default=None, repr=False)
    remaining: float | None = field(default=None, repr=False)  # left over after preemption

    @property
    def waiting_time(self) -> float | None:
        if self.t1 is None or self.t2 is None:
            return None
        return self.t2 - self.t1

    @property
    def total_time(self) -> float | None:
        if self.t1 is None or self.t5 is None:
            return None
        return self.t5 - self.t1

    def timestamps_ordered(self) -> bool:
        ts = [t for t in (self.t0, self.t1, self.t2, self.t3, self.t4, self.t5) if t is not None]
        return all(a <= b for a, b in zip(ts, ts[1:]))


def spawn_patient(pid: int, t0: float, tag: Tag, stream: RngStream,
                  bypass_prob: float = 1.0) -> Patient:
    """Create a patient; critical ambulance arrivals skip triage (t1 = t0)."""
    patient = Patient(pid, t0, tag)
    if tag is Tag.RED and bypass_prob > 0:
        if bypass_prob >= 1 or stream.uniform() < bypass_prob:
            patient.via_ambulance_critical = True
            patient.t1 = t0
    return patient


def load_profile(path: str | Path | None = None) -> dict:
    """Read and validate a rate-profile document; None loads the shipped one."""
    if path is None:
        text = resources.files("edsim").joinpath("data/baseline_profile.json").read_text()
        where = "baseline_profile.json"
    else:
        text = Path(path).read_text()
        where = str(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RatePlanError(f"{where}: invalid JSON: {exc}") from None
    if isinstance(doc, list):
        doc = {"schema_version": PROFILE_SCHEMA_VERSION, "rates": doc}
    if not isinstance(doc, dict):
        raise RatePlanError(f"{where}: expected an object or an array of 24 rates")
    unknown = set(doc) - {"schema_version", "units", "description", "rates", "day_overrides"}
    if unknown:
        raise RatePlanError(f"{where}: unknown keys {sorted(unknown)}")
    if doc.get("schema_version", PROFILE_SCHEMA_VERSION) != PROFILE_SCHEMA_VERSION:
        raise RatePlanError(f"{where}: unsupported schema_version {doc['schema_version']!r}")
    rates = validate_rates(doc.get("rates", []), f"{where}: rates")
    overrides = {}
    for key, value in (doc.get("day_overrides") or {}).items():
        overrides[int(key)] = validate_rates(value, f"{where}: day_overrides[{key}]")
    return {"schema_version": PROFILE_SCHEMA_VERSION, "rates": rates, "day_overrides": overrides}
