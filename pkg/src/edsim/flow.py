"""ED patient flow: triage, priority queues, treatment areas, staff shifts.

A patient needs one physician, one nurse and one seat in an area to be
visited. After the visit the patient either leaves or goes for additional
exams (holding no ED resource) and then waits for a physician-only
reassessment. New visits are dispatched before reassessments.
"""

from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .arrivals import Fate, Patient, RatePlan, next_arrival_time, assign_triage_tag, spawn_patient
from .kernel import (
    MINUTES_PER_DAY,
    MINUTES_PER_HOUR,
    DistributionSpec,
    EventCalendar,
    EventKind,
    RngStream,
    SimClock,
    StreamId,
    sample,
)
from .tables import (
    EXAM_TIME,
    LWBS_RATE,
    NURSE_SHIFTS,
    OUTCOME_COUNTS,
    OUTCOMES,
    PHYSICIAN_SHIFTS,
    TAGS,
    TRIAGE_COUNTS,
    VISIT_TIME,
    Outcome,
    Tag,
    leaves_during_exams_rate,
)

log = logging.getLogger(__name__)

PRIORITY_ORDER = (Tag.RED, Tag.YELLOW, Tag.GREEN, Tag.WHITE)
NIGHT_START_HOUR = 21
NIGHT_END_HOUR = 8


class Area(str, Enum):
    GREEN = "GreenArea"
    YELLOW = "YellowArea"
    SHOCK = "ShockRoom"
    TRIAGE = "TriageStation"


TREATMENT_AREAS = (Area.GREEN, Area.YELLOW, Area.SHOCK)
DEFAULT_CAPACITY = {Area.GREEN: 1, Area.YELLOW: 1, Area.SHOCK: 2, Area.TRIAGE: 1}
DIVERTED = "Diverted"


def is_night(hour: float) -> bool:
    return hour >= NIGHT_START_HOUR or hour < NIGHT_END_HOUR


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PeimafPlan:
    """Maxi-emergency plan active from ``start_hour`` of ``day`` until midnight.

    ``day`` is an absolute day index (day 0 starts at t = 0).
    """

    day: int
    start_hour: int = 10
    staff_multiplier: float = 2.0
    divert_low_acuity: bool = True
    open_areas_to_red: bool = True

    def active(self, t: float) -> bool:
        start = self.day * MINUTES_PER_DAY + self.start_hour * MINUTES_PER_HOUR
        return start <= t < (self.day + 1) * MINUTES_PER_DAY


@dataclass
class StaffCalendar:
    """Physician and nurse head-counts as a step function of time."""

    physician_shifts: tuple = PHYSICIAN_SHIFTS
    nurse_shifts: tuple = NURSE_SHIFTS
    peimaf: PeimafPlan | None = None

    def __post_init__(self):
        for start, end, *counts in self.physician_shifts + self.nurse_shifts:
            if any(c < 1 for c in counts):
                raise ConfigError("every shift needs at least one staff member on duty")
        for name, shifts in (("physician", self.physician_shifts), ("nurse", self.nurse_shifts)):
            covered = set()
            for start, end, *_ in shifts:
                covered.update(_hours_between(start, end))
            if covered != set(range(24)):
                raise ConfigError(f"{name} shifts do not cover all 24 hours")

    def on_duty(self, clock: SimClock, t: float) -> tuple[int, int]:
        day = clock.day_index(t)
        hour = int(clock.hour_of_day(t))
        holiday = clock.is_holiday(day)
        physicians = nurses = 0
        for start, end, weekday_n, holiday_n in self.physician_shifts:
            if hour in _hours_between(start, end):
                physicians = holiday_n if holiday else weekday_n
                break
        for start, end, n in self.nurse_shifts:
            if hour in _hours_between(start, end):
                nurses = n
                break
        if self.peimaf is not None and self.peimaf.active(t):
            m = self.peimaf.staff_multiplier
            physicians = int(round(physicians * m))
            nurses = int(round(nurses * m))
        return physicians, nurses


def _hours_between(start: int, end: int) -> range | list[int]:
    if start < end:
        return range(start, end)
    return list(range(start, 24)) + list(range(0, end))


def staff_on_duty(clock: SimClock, calendar: StaffCalendar, t: float | None = None) -> tuple[int, int]:
    return calendar.on_duty(clock, clock.now if t is None else t)


class TagTransitionMatrix:
    """Row-stochastic triage-tag -> discharge-tag matrix, adjacent moves only."""

    def __init__(self, matrix):
        m = np.array(matrix, dtype=float)
        if m.shape != (4, 4):
            raise ConfigError(f"transition matrix must be 4x4, got {m.shape}")
        if (m < 0).any():
            raise ConfigError("transition matrix has negative entries")
        for i in range(4):
            if abs(m[i].sum() - 1.0) > 1e-9:
                raise ConfigError(f"transition matrix row {TAGS[i].label} sums to {m[i].sum()!r}")
            for j in range(4):
                if abs(i - j) > 1 and m[i, j] != 0:
                    raise ConfigError(
                        f"transition {TAGS[i].label}->{TAGS[j].label} skips a tag level")
        self.matrix = m
        self._cum = np.cumsum(m, axis=1).tolist()

    def sample(self, tag: Tag, u: float) -> Tag:
        row = self._cum[tag]
        for j, c in enumerate(row):
            if u < c and self.matrix[tag, j] > 0:
                return TAGS[j]
        return TAGS[max(j for j in range(4) if self.matrix[tag, j] > 0)]

    def tolist(self) -> list[list[float]]:
        return self.matrix.tolist()


def derive_transition_matrix(lwbs=LWBS_RATE) -> np.ndarray:
    """Minimum-movement adjacent-only matrix reproducing the discharge marginals.

    Sources are the triage counts of patients completing the pathway (LWBS
    and leaves-during-exams patients keep their triage tag and are removed
    from both sides). Targets are the discharge-tag column totals of those
    patients, rescaled to the same total. On a chain of four tags the
    minimum-movement flow across each boundary is the cumulative surplus.
    """
    o6 = leaves_during_exams_rate()
    sources = np.array([TRIAGE_COUNTS[t] * (1.0 - lwbs[t] - o6[t]) for t in TAGS])
    targets = np.array([
        sum(n for o, n in OUTCOME_COUNTS[t].items() if o not in (Outcome.O6, Outcome.O7))
        for t in TAGS
    ], dtype=float)
    targets *= sources.sum() / targets.sum()
    flows = np.zeros((4, 4))
    surplus = 0.0
    for i in range(3):
        surplus += sources[i] - targets[i]
        if surplus > 0:
            flows[i, i + 1] = surplus
        else:
            flows[i + 1, i] = -surplus
    m = np.zeros((4, 4))
    for i in range(4):
        out = flows[i].sum()
        m[i] = flows[i] / sources[i]
        m[i, i] = 1.0 - out / sources[i]
    return m


class OutcomeTable:
    """Outcome probabilities per discharge tag."""

    def __init__(self, probabilities: dict):
        self.probs: dict[Tag, dict[Outcome, float]] = {}
        for tag in TAGS:
            row = {Outcome(o): float(p) for o, p in probabilities[tag].items() if float(p) > 0}
            total = sum(row.values())
            if abs(total - 1.0) > 1e-9:
                raise ConfigError(f"outcome probabilities for {tag.label} sum to {total!r}")
            self.probs[tag] = row
        self._restricted: dict = {}

    @classmethod
    def from_counts(cls, counts=OUTCOME_COUNTS) -> OutcomeTable:
        probs = {}
        for tag in TAGS:
            total = sum(counts[tag].values())
            probs[tag] = {o: n / total for o, n in counts[tag].items()}
        return cls(probs)

    def restricted(self, tag: Tag, exclude=(Outcome.O6, Outcome.O7)) -> list[tuple[Outcome, float]]:
        """Cumulative distribution over the outcomes of ``tag`` not in ``exclude``."""
        key = (tag, tuple(exclude))
        if key not in self._restricted:
            row = [(o, p) for o, p in self.probs[tag].items() if o not in exclude]
            total = sum(p for _, p in row)
            if total <= 0:
                raise ConfigError(f"no admissible outcome for discharge tag {tag.label}")
            acc, cum = 0.0, []
            for o, p in sorted(row, key=lambda x: OUTCOMES.index(x[0])):
                acc += p / total
                cum.append((o, acc))
            self._restricted[key] = cum
        return self._restricted[key]

    def sample(self, tag: Tag, u: float, exclude=(Outcome.O6, Outcome.O7)) -> Outcome:
        cum = self.restricted(tag, exclude)
        for o, c in cum:
            if u < c:
                return o
        return cum[-1][0]

    def to_dict(self) -> dict:
        return {t.label: {o.value: p for o, p in self.probs[t].items()} for t in TAGS}


# Fate probabilities for LWBS are tuned so that, after patients whose visit
# starts within their patience are reclaimed, the realised LWBS share under
# the baseline profile matches the observed one (scripts/calibrate_lwbs.py).
DEFAULT_LWBS_FATE = {Tag.WHITE: 0.163, Tag.GREEN: 0.0852, Tag.YELLOW: 0.062, Tag.RED: 0.0}
DEFAULT_EXAM_PROB = {Tag.WHITE: 0.30, Tag.GREEN: 0.50, Tag.YELLOW: 0.80, Tag.RED: 0.90}


@dataclass
class FlowParams:
    visit_time: dict = field(default_factory=lambda: dict(VISIT_TIME))
    exam_time: dict = field(default_factory=lambda: dict(EXAM_TIME))
    exam_prob: dict = field(default_factory=lambda: dict(DEFAULT_EXAM_PROB))
    reassessment_scale: float = 0.5
    triage_time: DistributionSpec = field(default_factory=lambda: DistributionSpec.uniform(2.0, 8.0))
    bypass_prob: float = 1.0
    lwbs_prob: dict = field(default_factory=lambda: dict(DEFAULT_LWBS_FATE))
    leave_exam_prob: dict = field(default_factory=leaves_during_exams_rate)
    patience: DistributionSpec = field(default_factory=lambda: DistributionSpec.exponential(60.0))
    transitions: TagTransitionMatrix = field(
        default_factory=lambda: TagTransitionMatrix(derive_transition_matrix()))
    outcomes: OutcomeTable = field(default_factory=OutcomeTable.from_counts)
    capacity: dict = field(default_factory=lambda: dict(DEFAULT_CAPACITY))
    # a Red patient with a free seat interrupts lower-tag work when no staff is free
    red_preemption: bool = True

    def validate(self):
        for tag in TAGS:
            for name, table in (("exam_prob", self.exam_prob), ("lwbs_prob", self.lwbs_prob),
                                ("leave_exam_prob", self.leave_exam_prob)):
                p = table[tag]
                if not 0.0 <= p <= 1.0:
                    raise ConfigError(f"{name}[{tag.label}] = {p!r} is not a probability")
            if self.lwbs_prob[tag] + self.leave_exam_prob[tag] > 1.0:
                raise ConfigError(f"lwbs_prob + leave_exam_prob exceeds 1 for {tag.label}")
        if not 0.0 <= self.bypass_prob <= 1.0:
            raise ConfigError("bypass_prob must be a probability")
        if self.reassessment_scale < 0:
            raise ConfigError("reassessment_scale must be non-negative")
        for area in Area:
            if self.capacity.get(area, 0) < 1:
                raise ConfigError(f"capacity of {area.value} must be at least 1")


@dataclass
class ModelConfig:
    """Everything one replication needs."""

    plan: RatePlan
    warmup_minutes: float = 1440.0
    run_minutes: float = 29 * MINUTES_PER_DAY
    flow: FlowParams = field(default_factory=FlowParams)
    staff: StaffCalendar = field(default_factory=StaffCalendar)
    start_weekday: int = 0
    sunday_is_holiday: bool = True
    extra_holidays: tuple = ()
    utilization_mode: str = "instant"

    def validate(self):
        if self.warmup_minutes < 0:
            raise ConfigError("warm-up must be non-negative")
        if self.run_minutes <= self.warmup_minutes:
            raise ConfigError("run length must exceed the warm-up")
        if self.run_minutes > self.plan.horizon_minutes + 1e-9:
            raise ConfigError(
                f"rate plan covers {self.plan.horizon_days} days, run needs {self.run_minutes / MINUTES_PER_DAY:g}")
        if self.utilization_mode not in ("instant", "time-average"):
            raise ConfigError(f"unknown utilization_mode {self.utilization_mode!r}")
        if not 0 <= self.start_weekday <= 6:
            raise ConfigError("start_weekday must be in 0..6")
        self.flow.validate()

    @property
    def peimaf(self) -> PeimafPlan | None:
        return self.staff.peimaf


@dataclass
class ReplicationResult:
    replication: int
    seed: int
    warmup_minutes: float
    run_minutes: float
    patients: list
    utilization: list  # (day, hour, area value, busy, capacity)
    visit_starts: Counter  # (area value, tag label, night flag) -> count
    preemptions: int = 0
    trace: list | None = None


class PriorityViolation(AssertionError):
    pass


def route_after_triage(patient: Patient, t: float, hour: float, peimaf: PeimafPlan | None):
    """Initial destination of a triaged patient: an Area or ``DIVERTED``."""
    tag = patient.triage_tag
    if (peimaf is not None and peimaf.divert_low_acuity and tag is not Tag.RED
            and peimaf.active(t)):
        return DIVERTED
    if tag is Tag.RED:
        return Area.SHOCK
    if tag is Tag.YELLOW:
        return Area.GREEN if is_night(hour) else Area.YELLOW
    return Area.GREEN


def eligible_areas(tag: Tag, t: float, hour: float, peimaf: PeimafPlan | None) -> tuple[Area, ...]:
    """Areas where a visit for ``tag`` may start at time ``t``, in preference order."""
    if tag is Tag.RED:
        if peimaf is not None and peimaf.open_areas_to_red and peimaf.active(t):
            return (Area.SHOCK, Area.GREEN, Area.YELLOW)
        return (Area.SHOCK,)
    if tag is Tag.YELLOW:
        return (Area.GREEN,) if is_night(hour) else (Area.YELLOW,)
    return (Area.GREEN,)


def resolve_fate(patient: Patient, u: float, flow: FlowParams) -> Fate:
    tag = patient.triage_tag
    p_lwbs = flow.lwbs_prob[tag]
    if u < p_lwbs:
        return Fate.LWBS
    if u < p_lwbs + flow.leave_exam_prob[tag]:
        return Fate.LEAVES_DURING_EXAMS
    return Fate.NORMAL


def discharge_labels(patient: Patient, flow: FlowParams, u_tag: float, u_outcome: float):
    """(discharge tag, outcome) consistent with the patient's fate."""
    if patient.fate is Fate.LWBS:
        return patient.triage_tag, Outcome.O7
    if patient.fate is Fate.LEAVES_DURING_EXAMS:
        return patient.triage_tag, Outcome.O6
    dtag = flow.transitions.sample(patient.triage_tag, u_tag)
    return dtag, flow.outcomes.sample(dtag, u_outcome)


class EDSimulation:
    """One replication of the ED model."""

    def __init__(self, config: ModelConfig, seed: int, replication: int = 0,
                 record_trace: bool = False, check_invariants: bool = True):
        config.validate()
        self.config = config
        self.flow = config.flow
        self.seed = seed
        self.replication = replication
        self.check = check_invariants
        self.clock = SimClock(config.start_weekday, config.sunday_is_holiday, config.extra_holidays)
        self.calendar = EventCalendar(self.clock, record_trace=record_trace)
        self.streams = {sid: RngStream(seed, sid, replication) for sid in StreamId}
        self.peimaf = config.staff.peimaf
        self.capacity = {a: int(config.flow.capacity[a]) for a in Area}
        self.busy = {a: 0 for a in Area}
        self.visit_queues = {tag: deque() for tag in TAGS}
        self.reassess_queues = {tag: deque() for tag in TAGS}
        self.triage_queue: deque = deque()
        self.phys_busy = 0
        self.nurse_busy = 0
        self.phys_cap, self.nurse_cap = config.staff.on_duty(self.clock, 0.0)
        self.patients: list[Patient] = []
        self.utilization: list = []
        self.visit_starts: Counter = Counter()
        self.in_visit: dict[int, Patient] = {}
        self.in_reassessment: dict[int, Patient] = {}
        self.preemptions = 0
        self._next_id = 0
        # time-weighted busy seat integrals, for the time-average utilisation view
        self._area_area = {a: 0.0 for a in TREATMENT_AREAS}
        self._area_last = 0.0

    # -- resources -------------------------------------------------------
    def _accumulate(self):
        dt = self.clock.now - self._area_last
        if dt > 0:
            for a in TREATMENT_AREAS:
                self._area_area[a] += self.busy[a] * dt
        self._area_last = self.clock.now

    def _seize_seat(self, area: Area):
        self._accumulate()
        assert self.busy[area] < self.capacity[area], f"{area.value} over capacity"
        self.busy[area] += 1

    def _release_seat(self, area: Area):
        self._accumulate()
        self.busy[area] -= 1
        assert self.busy[area] >= 0

    # -- event loop ------------------------------------------------------
    def run(self) -> ReplicationResult:
        cal = self.calendar
        end = self.config.run_minutes
        self._schedule_next_arrival(0.0)
        self._schedule_hourly_events()
        if self.config.warmup_minutes > 0:
            cal.schedule(self.config.warmup_minutes, EventKind.END_OF_WARMUP)
        cal.schedule(end, EventKind.END_OF_RUN)
        handlers = {
            EventKind.ARRIVAL: self._on_arrival,
            EventKind.TRIAGE_DONE: self._on_triage_done,
            EventKind.VISIT_DONE: self._on_visit_done,
            EventKind.EXAMS_DONE: self._on_exams_done,
            EventKind.REASSESSMENT_DONE: self._on_reassessment_done,
            EventKind.ABANDONMENT: self._on_abandonment,
            EventKind.SHIFT_CHANGE: self._on_shift_change,
            EventKind.UTILIZATION_SAMPLE: self._on_sample,
            EventKind.END_OF_WARMUP: lambda ev: None,
        }
        last = 0.0
        while True:
            ev = cal.pop_next()
            if ev is None or ev.kind is EventKind.END_OF_RUN:
                break
            if self.check:
                assert ev.fire_time >= last
                last = ev.fire_time
            handlers[ev.kind](ev)
        for p in self.patients:
            p.abandon_event = None
            p.service_event = None
            p.waiting = False
        return ReplicationResult(
            replication=self.replication,
            seed=self.seed,
            warmup_minutes=self.config.warmup_minutes,
            run_minutes=end,
            patients=self.patients,
            utilization=self.utilization,
            visit_starts=self.visit_starts,
            preemptions=self.preemptions,
            trace=cal.trace,
        )

    def _schedule_next_arrival(self, now: float):
        t = next_arrival_time(now, self.config.plan, self.streams[StreamId.ARRIVALS])
        if t is not None and t < self.config.run_minutes:
            self.calendar.schedule(t, EventKind.ARRIVAL)

    def _regime(self, t: float):
        hour = self.clock.hour_of_day(t)
        peimaf_on = self.peimaf is not None and self.peimaf.active(t)
        return self.config.staff.on_duty(self.clock, t), is_night(hour), peimaf_on

    def _schedule_hourly_events(self):
        n_hours = int(self.config.run_minutes // MINUTES_PER_HOUR)
        prev = self._regime(0.0)
        for k in range(1, n_hours + 1):
            t = k * MINUTES_PER_HOUR
            if t < self.config.run_minutes:
                regime = self._regime(t)
                if regime != prev:
                    self.calendar.schedule(t, EventKind.SHIFT_CHANGE)
                    prev = regime
            if self.config.warmup_minutes <= t <= self.config.run_minutes:
                self.calendar.schedule(t, EventKind.UTILIZATION_SAMPLE)
        if self.config.warmup_minutes == 0:
            self.calendar.schedule(0.0, EventKind.UTILIZATION_SAMPLE)

    # -- handlers --------------------------------------------------------
    def _on_arrival(self, ev):
        now = self.clock.now
        self._schedule_next_arrival(now)
        mix = self.config.plan.mix_on(self.clock.day_index(now))
        tag = assign_triage_tag(mix, self.streams[StreamId.TRIAGE_TAGS].uniform())
        patient = spawn_patient(self._next_id, now, tag, self.streams[StreamId.TRIAGE_TAGS],
                                self.flow.bypass_prob)
        self._next_id += 1
        self.patients.append(patient)
        if patient.via_ambulance_critical:
            self._after_triage(patient)
        else:
            self.triage_queue.append(patient)
            self._try_triage()

    def _try_triage(self):
        cap = self.capacity[Area.TRIAGE]
        while self.triage_queue and self.busy[Area.TRIAGE] < cap:
            patient = self.triage_queue.popleft()
            self.busy[Area.TRIAGE] += 1
            d = sample(self.flow.triage_time, self.streams[StreamId.TRIAGE_TIMES])
            self.calendar.schedule(self.clock.now + d, EventKind.TRIAGE_DONE, patient)

    def _on_triage_done(self, ev):
        patient = ev.payload
        patient.t1 = self.clock.now
        self.busy[Area.TRIAGE] -= 1
        self._try_triage()
        self._after_triage(patient)

    def _after_triage(self, patient: Patient):
        now = self.clock.now
        dest = route_after_triage(patient, now, self.clock.hour_of_day(now), self.peimaf)
        if dest == DIVERTED:
            patient.fate = Fate.DIVERTED
            patient.area = DIVERTED
            return
        u = self.streams[StreamId.ABANDONMENT].uniform()
        patient.fate = resolve_fate(patient, u, self.flow)
        if patient.fate is Fate.LWBS:
            patient.lwbs_assigned = True
            patience = sample(self.flow.patience, self.streams[StreamId.ABANDONMENT])
            patient.abandon_event = self.calendar.schedule(now + patience, EventKind.ABANDONMENT, patient)
        patient.waiting = True
        self.visit_queues[patient.triage_tag].append(patient)
        self.try_start_visits()

    def _on_abandonment(self, ev):
        patient = ev.payload
        if not patient.waiting:
            return
        patient.waiting = False  # lazily dropped from its queue
        patient.abandon_event = None
        now = self.clock.now
        patient.t5 = now
        patient.discharge_tag, patient.outcome = patient.triage_tag, Outcome.O7

    def _head(self, tag: Tag):
        q = self.visit_queues[tag]
        while q and not q[0].waiting:
            q.popleft()
        return q[0] if q else None

    def try_start_visits(self) -> list[Patient]:
        """Start every visit and reassessment the free staff and seats allow."""
        started = self._dispatch()
        if self.flow.red_preemption:
            while self._preempt_for_red():
                started += self._dispatch()
        return started

    def _free_area(self, tag: Tag, now: float, hour: float) -> Area | None:
        return next((a for a in eligible_areas(tag, now, hour, self.peimaf)
                     if self.busy[a] < self.capacity[a]), None)

    def _dispatch(self) -> list[Patient]:
        started = []
        now = self.clock.now
        hour = self.clock.hour_of_day(now)
        while self.phys_busy < self.phys_cap:
            launched = False
            if self.nurse_busy < self.nurse_cap:
                for tag in PRIORITY_ORDER:
                    patient = self._head(tag)
                    if patient is None:
                        continue
                    area = self._free_area(tag, now, hour)
                    if area is None:
                        continue
                    if self.check:
                        self._check_priority(tag, area, now, hour)
                    self.visit_queues[tag].popleft()
                    self._start_visit(patient, area, hour)
                    started.append(patient)
                    launched = True
                    break
            if launched:
                continue
            for tag in PRIORITY_ORDER:
                q = self.reassess_queues[tag]
                if q:
                    self._start_reassessment(q.popleft())
                    launched = True
                    break
            if not launched:
                break
        return started

    def _preempt_for_red(self) -> bool:
        """Interrupt the least urgent non-Red job so a waiting Red can start.

        Returns True if something was interrupted.
        """
        now = self.clock.now
        if self._head(Tag.RED) is None or self._free_area(Tag.RED, now, self.clock.hour_of_day(now)) is None:
            return False
        need_phys = self.phys_busy >= self.phys_cap
        need_nurse = self.nurse_busy >= self.nurse_cap
        if not (need_phys or need_nurse):
            return False
        if need_phys and not need_nurse:
            victim = _least_urgent(self.in_reassessment.values())
            if victim is not None:
                self._interrupt_reassessment(victim)
                return True
        victim = _least_urgent(self.in_visit.values())
        if victim is None:
            return False
        self._interrupt_visit(victim)
        return True

    def _interrupt_visit(self, patient: Patient):
        now = self.clock.now
        ev = patient.service_event
        self.calendar.cancel(ev)
        patient.remaining = ev.fire_time - now
        patient.service_event = None
        del self.in_visit[patient.id]
        self.phys_busy -= 1
        self.nurse_busy -= 1
        self._release_seat(Area(patient.area))
        patient.waiting = True
        self.visit_queues[patient.triage_tag].appendleft(patient)
        self.preemptions += 1

    def _interrupt_reassessment(self, patient: Patient):
        ev = patient.service_event
        self.calendar.cancel(ev)
        patient.remaining = ev.fire_time - self.clock.now
        patient.service_event = None
        del self.in_reassessment[patient.id]
        self.phys_busy -= 1
        self.reassess_queues[patient.triage_tag].appendleft(patient)
        self.preemptions += 1

    def _check_priority(self, tag: Tag, area: Area, now: float, hour: float):
        for higher in PRIORITY_ORDER:
            if higher <= tag:
                break
            if self._head(higher) is not None and area in eligible_areas(higher, now, hour, self.peimaf):
                raise PriorityViolation(
                    f"{tag.label} started in {area.value} while {higher.label} waits for it")

    def _start_visit(self, patient: Patient, area: Area, hour: float):
        now = self.clock.now
        patient.waiting = False
        if patient.abandon_event is not None:
            self.calendar.cancel(patient.abandon_event)
            patient.abandon_event = None
            patient.fate = Fate.NORMAL
        if patient.t2 is None:
            patient.t2 = now
        patient.area = area.value
        self.phys_busy += 1
        self.nurse_busy += 1
        self._seize_seat(area)
        self.visit_starts[(area.value, patient.triage_tag.label, is_night(hour))] += 1
        if patient.remaining is not None:
            d, patient.remaining = patient.remaining, None
        else:
            d = sample(self.flow.visit_time[patient.triage_tag], self.streams[StreamId.VISIT_TIMES])
        patient.service_event = self.calendar.schedule(now + d, EventKind.VISIT_DONE, patient)
        self.in_visit[patient.id] = patient

    def _on_visit_done(self, ev):
        patient = ev.payload
        now = self.clock.now
        patient.t3 = now
        patient.service_event = None
        del self.in_visit[patient.id]
        self.phys_busy -= 1
        self.nurse_busy -= 1
        self._release_seat(Area(patient.area))
        tag = patient.triage_tag
        u = self.streams[StreamId.ROUTING].uniform()
        if patient.fate is Fate.LEAVES_DURING_EXAMS or u < self.flow.exam_prob[tag]:
            delay = sample(self.flow.exam_time[tag], self.streams[StreamId.EXAM_TIMES])
            if patient.fate is Fate.LEAVES_DURING_EXAMS:
                delay *= self.streams[StreamId.ROUTING].uniform()
            self.calendar.schedule(now + delay, EventKind.EXAMS_DONE, patient)
        else:
            patient.t4 = now
            self._discharge(patient)
        self.try_start_visits()

    def _on_exams_done(self, ev):
        patient = ev.payload
        if patient.fate is Fate.LEAVES_DURING_EXAMS:
            patient.t4 = self.clock.now
            self._discharge(patient)
            return
        self.reassess_queues[patient.triage_tag].append(patient)
        self.try_start_visits()

    def _start_reassessment(self, patient: Patient):
        self.phys_busy += 1
        if patient.remaining is not None:
            d, patient.remaining = patient.remaining, None
        else:
            spec = self.flow.visit_time[patient.triage_tag]
            d = sample(spec, self.streams[StreamId.VISIT_TIMES]) * self.flow.reassessment_scale
        patient.service_event = self.calendar.schedule(self.clock.now + d, EventKind.REASSESSMENT_DONE, patient)
        self.in_reassessment[patient.id] = patient

    def _on_reassessment_done(self, ev):
        patient = ev.payload
        patient.service_event = None
        del self.in_reassessment[patient.id]
        self.phys_busy -= 1
        patient.t4 = self.clock.now
        self._discharge(patient)
        self.try_start_visits()

    def _discharge(self, patient: Patient):
        patient.t5 = self.clock.now
        patient.discharge_tag, patient.outcome = discharge_labels(
            patient, self.flow,
            self.streams[StreamId.TAG_TRANSITIONS].uniform(),
            self.streams[StreamId.OUTCOMES].uniform(),
        )

    def _on_shift_change(self, ev):
        self.phys_cap, self.nurse_cap = self.config.staff.on_duty(self.clock, self.clock.now)
        self.try_start_visits()

    def _on_sample(self, ev):
        now = self.clock.now
        if now >= self.config.run_minutes:
            if self.config.utilization_mode != "time-average":
                return
        day = self.clock.day_index(now)
        hour = int(self.clock.hour_of_day(now))
        if self.config.utilization_mode == "instant":
            for a in TREATMENT_AREAS:
                self.utilization.append((day, hour, a.value, self.busy[a], self.capacity[a]))
        else:
            # average over the hour that just ended, labelled with its start hour
            self._accumulate()
            start = now - MINUTES_PER_HOUR
            if start >= self.config.warmup_minutes:
                sday = self.clock.day_index(start)
                shour = int(self.clock.hour_of_day(start))
                for a in TREATMENT_AREAS:
                    self.utilization.append(
                        (sday, shour, a.value, self._area_area[a] / MINUTES_PER_HOUR, self.capacity[a]))
            for a in TREATMENT_AREAS:
                self._area_area[a] = 0.0


def _least_urgent(patients) -> Patient | None:
    """Lowest-priority non-Red patient; the latest started among equals."""
    best = None
    for p in patients:
        if p.triage_tag is Tag.RED:
            continue
        if best is None or p.triage_tag < best.triage_tag or (
                p.triage_tag == best.triage_tag and p.service_event.seq > best.service_event.seq):
            best = p
    return best


def run_replication(config: ModelConfig, seed: int, replication: int = 0,
                    record_trace: bool = False) -> ReplicationResult:
    """Simulate one replication; deterministic in (config, seed, replication)."""
    return EDSimulation(config, seed, replication, record_trace=record_trace).run()
