"""Event calendar, simulation clock and seeded random variate streams.

Time is a continuous count of minutes since the start of a replication.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

MINUTES_PER_HOUR = 60.0
MINUTES_PER_DAY = 1440.0


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


class EventKind(Enum):
    ARRIVAL = "arrival"
    TRIAGE_DONE = "triage-done"
    VISIT_START_ATTEMPT = "visit-start-attempt"
    VISIT_DONE = "visit-done"
    EXAMS_DONE = "exams-done"
    REASSESSMENT_DONE = "reassessment-done"
    ABANDONMENT = "abandonment"
    SHIFT_CHANGE = "shift-change"
    UTILIZATION_SAMPLE = "utilization-sample"
    END_OF_WARMUP = "end-of-warmup"
    END_OF_RUN = "end-of-run"


@dataclass(eq=False)
class Event:
    """A scheduled occurrence; the object itself is the cancellation handle."""

    fire_time: float
    seq: int
    kind: EventKind
    payload: Any = None
    cancelled: bool = False

    def sort_key(self) -> tuple[float, int]:
        return (self.fire_time, self.seq)


class SimClock:
    """Simulation clock plus the calendar facts derived from it.

    ``start_weekday`` is the weekday of day 0 (0 = Monday). Sundays are
    public holidays unless ``sunday_is_holiday`` is false; further holidays
    can be listed as absolute day indices.
    """

    def __init__(self, start_weekday: int = 0, sunday_is_holiday: bool = True,
                 extra_holidays: tuple[int, ...] = ()):
        self.now = 0.0
        self.start_weekday = start_weekday
        self.sunday_is_holiday = sunday_is_holiday
        self.extra_holidays = frozenset(extra_holidays)

    def day_index(self, t: float | None = None) -> int:
        t = self.now if t is None else t
        return int(t // MINUTES_PER_DAY)

    def hour_of_day(self, t: float | None = None) -> float:
        t = self.now if t is None else t
        return (t % MINUTES_PER_DAY) / MINUTES_PER_HOUR

    def weekday(self, day: int) -> int:
        return (self.start_weekday + day) % 7

    def is_holiday(self, day: int) -> bool:
        if day in self.extra_holidays:
            return True
        return self.sunday_is_holiday and self.weekday(day) == 6


class EventCalendar:
    """Future event list ordered by ``(fire_time, seq)``.

    Cancelled events stay in the heap and are discarded when they surface.
    """

    def __init__(self, clock: SimClock | None = None, record_trace: bool = False):
        self.clock = clock if clock is not None else SimClock()
        self._heap: list[tuple[float, int, Event]] = []
        self._seq = 0
        self._live = 0
        self.trace: list[tuple[float, int, str]] | None = [] if record_trace else None

    @property
    def now(self) -> float:
        return self.clock.now

    def __len__(self) -> int:
        return self._live

    def schedule(self, fire_time: float, kind: EventKind, payload: Any = None) -> Event:
        if fire_time < self.clock.now:
            raise SchedulingError(
                f"cannot schedule {kind.value} at t={fire_time!r} before now={self.clock.now!r}"
            )
        event = Event(float(fire_time), self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, (event.fire_time, event.seq, event))
        self._live += 1
        return event

    def cancel(self, event: Event) -> None:
        if not event.cancelled:
            event.cancelled = True
            self._live -= 1

    def pop_next(self) -> Event | None:
        """Remove and return the earliest live event, or None when exhausted."""
        while self._heap:
            t, _, event = heapq.heappop(self._heap)
            if event.cancelled:
                continue
            assert t >= self.clock.now, "event calendar went backwards"
            self.clock.now = t
            self._live -= 1
            if self.trace is not None:
                self.trace.append((t, event.seq, event.kind.value))
            return event
        return None


class Family(Enum):
    LOGNORMAL = "Lognormal"
    NORMAL = "Normal"
    EXPONENTIAL = "Exponential"
    SHIFTED_GAMMA = "ShiftedGamma"
    WEIBULL = "Weibull"
    CONSTANT = "Constant"
    UNIFORM = "Uniform"


_ARITY = {
    Family.LOGNORMAL: 2,
    Family.NORMAL: 2,
    Family.EXPONENTIAL: 1,
    Family.SHIFTED_GAMMA: 3,
    Family.WEIBULL: 2,
    Family.CONSTANT: 1,
    Family.UNIFORM: 2,
}


@dataclass(frozen=True)
class DistributionSpec:
    """A random duration in minutes.

    Parameter conventions:

    * Lognormal: (mean, std) of the lognormal variate itself
    * Normal: (mean, std); draws below ``floor`` are clamped to ``floor``
    * Exponential: (mean,)
    * ShiftedGamma: (shift, scale, shape)
    * Weibull: (scale, shape)
    * Constant: (value,)
    * Uniform: (low, high)
    """

    family: Family
    params: tuple[float, ...]
    floor: float = 0.1

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if len(params) != _ARITY[family]:
            raise ValueError(f"{family.value} takes {_ARITY[family]} parameters, got {len(params)}")
        if any(not math.isfinite(p) for p in params):
            raise ValueError(f"{family.value} parameters must be finite: {params}")
        if family in (Family.LOGNORMAL, Family.NORMAL):
            if family is Family.LOGNORMAL and params[0] <= 0:
                raise ValueError("Lognormal mean must be positive")
            if params[1] <= 0:
                raise ValueError(f"{family.value} std must be positive")
        elif family is Family.EXPONENTIAL:
            if params[0] <= 0:
                raise ValueError("Exponential mean must be positive")
        elif family is Family.SHIFTED_GAMMA:
            if params[0] < 0 or params[1] <= 0 or params[2] <= 0:
                raise ValueError("ShiftedGamma needs shift >= 0 and positive scale, shape")
        elif family is Family.WEIBULL:
            if params[0] <= 0 or params[1] <= 0:
                raise ValueError("Weibull scale and shape must be positive")
        elif family is Family.CONSTANT:
            if params[0] < 0:
                raise ValueError("Constant duration must be non-negative")
        elif family is Family.UNIFORM:
            if not 0 <= params[0] <= params[1]:
                raise ValueError("Uniform needs 0 <= low <= high")
        if self.floor < 0:
            raise ValueError("floor must be non-negative")

    @classmethod
    def lognormal(cls, mean: float, std: float) -> DistributionSpec:
        return cls(Family.LOGNORMAL, (mean, std))

    @classmethod
    def normal(cls, mean: float, std: float, floor: float = 0.1) -> DistributionSpec:
        return cls(Family.NORMAL, (mean, std), floor)

    @classmethod
    def exponential(cls, mean: float) -> DistributionSpec:
        return cls(Family.EXPONENTIAL, (mean,))

    @classmethod
    def shifted_gamma(cls, shift: float, scale: float, shape: float) -> DistributionSpec:
        return cls(Family.SHIFTED_GAMMA, (shift, scale, shape))

    @classmethod
    def weibull(cls, scale: float, shape: float) -> DistributionSpec:
        return cls(Family.WEIBULL, (scale, shape))

    @classmethod
    def constant(cls, value: float) -> DistributionSpec:
        return cls(Family.CONSTANT, (value,))

    @classmethod
    def uniform(cls, low: float, high: float) -> DistributionSpec:
        return cls(Family.UNIFORM, (low, high))

    def scaled(self, factor: float) -> DistributionSpec:
        """The same family with every time parameter multiplied by ``factor``.

        Shape parameters are left alone, so the result is the distribution of
        ``factor * X``.
        """
        p = self.params
        if self.family is Family.SHIFTED_GAMMA:
            new = (p[0] * factor, p[1] * factor, p[2])
        elif self.family is Family.WEIBULL:
            new = (p[0] * factor, p[1])
        else:
            new = tuple(x * factor for x in p)
        return DistributionSpec(self.family, new, self.floor * factor)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> DistributionSpec:
        return cls(Family(d["family"]), tuple(d["params"]), d.get("floor", 0.1))


class StreamId(Enum):
    ARRIVALS = 0
    TRIAGE_TAGS = 1
    VISIT_TIMES = 2
    EXAM_TIMES = 3
    OUTCOMES = 4
    TAG_TRANSITIONS = 5
    ABANDONMENT = 6
    TRIAGE_TIMES = 7
    ROUTING = 8


class RngStream:
    """Independent random stream keyed by (seed, replication, purpose)."""

    def __init__(self, seed: int, stream_id: StreamId, replication: int = 0):
        self.seed = int(seed)
        self.stream_id = stream_id
        self.replication = int(replication)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.replication, stream_id.value))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def uniform(self) -> float:
        return float(self.generator.random())


def _draw(spec: DistributionSpec, rng: np.random.Generator, size=None):
    p = spec.params
    fam = spec.family
    if fam is Family.LOGNORMAL:
        mean, std = p
        sigma2 = math.log1p((std / mean) ** 2)
        mu = math.log(mean) - 0.5 * sigma2
        return rng.lognormal(mu, math.sqrt(sigma2), size)
    if fam is Family.NORMAL:
        return np.maximum(rng.normal(p[0], p[1], size), spec.floor)
    if fam is Family.EXPONENTIAL:
        return rng.exponential(p[0], size)
    if fam is Family.SHIFTED_GAMMA:
        return p[0] + rng.gamma(p[2], p[1], size)
    if fam is Family.WEIBULL:
        return p[0] * rng.weibull(p[1], size)
    if fam is Family.UNIFORM:
        return rng.uniform(p[0], p[1], size)
    if fam is Family.CONSTANT:
        return p[0] if size is None else np.full(size, p[0])
    raise ValueError(f"unknown family {fam}")  # pragma: no cover


def sample(spec: DistributionSpec, stream: RngStream) -> float:
    """Draw one duration (minutes) from ``spec``."""
    return float(_draw(spec, stream.generator))


def sample_many(spec: DistributionSpec, stream: RngStream, n: int) -> np.ndarray:
    """Vectorised version of :func:`sample` for bulk statistical checks."""
    return np.asarray(_draw(spec, stream.generator, n), dtype=float)
