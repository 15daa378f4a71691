"""Scenario transforms over the baseline rate plan and staffing.

Days are numbered from 1: Day 1 starts at t = 0 and, with the default 24 h
warm-up, is the warm-up day. Transforms compose left to right.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .arrivals import RatePlan, load_profile, validate_mix
from .flow import FlowParams, ModelConfig, PeimafPlan, StaffCalendar
from .kernel import MINUTES_PER_DAY
from .tables import BASELINE_TAG_MIX, Tag

# (start hour, end hour, percent increase) per day, 1-based days
MILD_SURGE_TABLE = {
    2: ((0, 8, 5.0), (8, 14, 10.0), (14, 20, 15.0), (20, 24, 20.0)),
    3: ((0, 8, 20.0), (8, 14, 25.0), (14, 20, 25.0), (20, 24, 20.0)),
    4: ((0, 8, 20.0), (8, 14, 15.0), (14, 20, 10.0), (20, 24, 5.0)),
}
PEAK_DAY = 2
PEAK_HOUR = 10


class ScenarioError(ValueError):
    pass


def red_heavy_mix(red_share: float = 0.5, base=BASELINE_TAG_MIX) -> tuple[float, ...]:
    """Baseline mix with the Red share replaced and the rest rescaled."""
    rest = 1.0 - base[Tag.RED]
    scale = (1.0 - red_share) / rest
    mix = [base[Tag.WHITE] * scale, base[Tag.GREEN] * scale, base[Tag.YELLOW] * scale, red_share]
    mix[Tag.GREEN] = 1.0 - mix[Tag.WHITE] - mix[Tag.YELLOW] - mix[Tag.RED]
    return tuple(mix)


def _day_index(plan: RatePlan, day: int) -> int:
    if not 1 <= day <= plan.horizon_days:
        raise ScenarioError(f"day {day} outside the {plan.horizon_days}-day horizon")
    return day - 1


def apply_uniform_increase(plan: RatePlan, pct: float) -> RatePlan:
    if pct <= -100:
        raise ScenarioError("percentage increase must exceed -100")
    out = plan.copy()
    out.slots *= 1.0 + pct / 100.0
    return RatePlan(out.slots, out.tag_mix)


def apply_slot_increase(plan: RatePlan, day: int, table) -> RatePlan:
    """Raise the hourly slots ``[start, end)`` of ``day`` by the given percents."""
    d = _day_index(plan, day)
    out = plan.copy()
    for start, end, pct in table:
        if not 0 <= start < end <= 24:
            raise ScenarioError(f"bad slot range {start}-{end}")
        if pct <= -100:
            raise ScenarioError("percentage increase must exceed -100")
        out.slots[d, int(start):int(end)] *= 1.0 + pct / 100.0
    return RatePlan(out.slots, out.tag_mix)


def apply_mild_surge(plan: RatePlan) -> RatePlan:
    if plan.horizon_days < 5:
        raise ScenarioError("the mild surge needs a horizon of at least 5 days")
    for day, table in MILD_SURGE_TABLE.items():
        plan = apply_slot_increase(plan, day, table)
    return plan


def apply_peak_surge(plan: RatePlan, day: int, magnitude_pct: float) -> RatePlan:
    if magnitude_pct <= 0:
        raise ScenarioError("surge magnitude must be positive")
    return apply_slot_increase(plan, day, ((0, 24, magnitude_pct),))


def apply_tag_mix_override(plan: RatePlan, day: int, mix) -> RatePlan:
    d = _day_index(plan, day)
    mix = validate_mix(mix, f"tag mix for day {day}")
    out = plan.copy()
    out.tag_mix[d] = mix
    return RatePlan(out.slots, out.tag_mix)


def apply_peimaf(config: ModelConfig, start_day: int = PEAK_DAY, start_hour: int = PEAK_HOUR,
                 staff_multiplier: float = 2.0, divert_low_acuity: bool = True,
                 open_areas_to_red: bool = True) -> ModelConfig:
    """Activate the maxi-emergency plan from ``start_hour`` of ``start_day`` to midnight.

    Only staffing and routing change; the rate plan is untouched.
    """
    d = _day_index(config.plan, start_day)
    if not 0 <= start_hour < 24:
        raise ScenarioError("start_hour must be in 0..23")
    if staff_multiplier < 1:
        raise ScenarioError("staff_multiplier must be at least 1")
    plan = PeimafPlan(d, start_hour, staff_multiplier, divert_low_acuity, open_areas_to_red)
    return replace(config, staff=replace(config.staff, peimaf=plan))


@dataclass(frozen=True)
class UniformIncrease:
    pct: float
    kind: str = "UniformIncrease"


@dataclass(frozen=True)
class SlotIncrease:
    day: int
    slots: tuple  # ((start_hour, end_hour, pct), ...)
    kind: str = "SlotIncrease"


@dataclass(frozen=True)
class MildSurge:
    kind: str = "MildSurge"


@dataclass(frozen=True)
class PeakSurge:
    day: int
    magnitude_pct: float
    kind: str = "PeakSurge"


@dataclass(frozen=True)
class TagMixOverride:
    day: int
    mix: tuple
    kind: str = "TagMixOverride"


@dataclass(frozen=True)
class Peimaf:
    start_day: int = PEAK_DAY
    start_hour: int = PEAK_HOUR
    staff_multiplier: float = 2.0
    divert_low_acuity: bool = True
    open_areas_to_red: bool = True
    kind: str = "Peimaf"


TRANSFORMS = {cls.__name__: cls for cls in
              (UniformIncrease, SlotIncrease, MildSurge, PeakSurge, TagMixOverride, Peimaf)}


def transform_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in TRANSFORMS:
        raise ScenarioError(f"unknown transform kind {kind!r}; expected one of {sorted(TRANSFORMS)}")
    cls = TRANSFORMS[kind]
    if cls is SlotIncrease and "slots" in d:
        d["slots"] = tuple(tuple(s) for s in d["slots"])
    if cls is TagMixOverride and "mix" in d:
        d["mix"] = tuple(d["mix"])
    try:
        return cls(**d)
    except TypeError as exc:
        raise ScenarioError(f"{kind}: {exc}") from None


def transform_to_dict(t) -> dict:
    d = asdict(t)
    if "slots" in d:
        d["slots"] = [list(s) for s in d["slots"]]
    if "mix" in d:
        d["mix"] = list(d["mix"])
    return d


@dataclass(frozen=True)
class ReplicationPlan:
    reps: int = 10
    days: int = 5
    warmup_hours: float = 24.0
    seed: int = 42

    def __post_init__(self):
        if self.reps < 1:
            raise ScenarioError("reps must be at least 1")
        if self.days <= 0:
            raise ScenarioError("days must be positive")
        if self.warmup_hours < 0:
            raise ScenarioError("warmup_hours must be non-negative")

    @property
    def warmup_minutes(self) -> float:
        return self.warmup_hours * 60.0

    @property
    def run_minutes(self) -> float:
        return self.warmup_minutes + self.days * MINUTES_PER_DAY

    @property
    def horizon_days(self) -> int:
        return int(math.ceil(self.run_minutes / MINUTES_PER_DAY - 1e-9))


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    transforms: tuple = ()
    replications: ReplicationPlan = field(default_factory=ReplicationPlan)

    @property
    def peak_day(self) -> int | None:
        """1-based day reported separately in the utilisation output."""
        for t in self.transforms:
            if isinstance(t, (PeakSurge, TagMixOverride)):
                return t.day
            if isinstance(t, Peimaf):
                return t.start_day
        return None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "transforms": [transform_to_dict(t) for t in self.transforms],
            "replications": asdict(self.replications),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioConfig:
        return cls(
            name=d["name"],
            transforms=tuple(transform_from_dict(t) for t in d.get("transforms", [])),
            replications=ReplicationPlan(**d.get("replications", {})),
        )

    def with_replications(self, **kw) -> ScenarioConfig:
        return replace(self, replications=replace(self.replications, **kw))


def apply_rate_transforms(plan: RatePlan, transforms) -> RatePlan:
    for t in transforms:
        if isinstance(t, UniformIncrease):
            plan = apply_uniform_increase(plan, t.pct)
        elif isinstance(t, SlotIncrease):
            plan = apply_slot_increase(plan, t.day, t.slots)
        elif isinstance(t, MildSurge):
            plan = apply_mild_surge(plan)
        elif isinstance(t, PeakSurge):
            plan = apply_peak_surge(plan, t.day, t.magnitude_pct)
        elif isinstance(t, TagMixOverride):
            plan = apply_tag_mix_override(plan, t.day, t.mix)
    return plan


def build_model_config(scenario: ScenarioConfig, profile: dict | None = None,
                       flow: FlowParams | None = None, staff: StaffCalendar | None = None,
                       **model_kw) -> ModelConfig:
    """Effective model configuration for ``scenario`` on top of the base profile."""
    profile = profile if profile is not None else load_profile()
    reps = scenario.replications
    plan = RatePlan.from_profile(profile["rates"], reps.horizon_days,
                                 day_overrides=profile.get("day_overrides"))
    plan = apply_rate_transforms(plan, scenario.transforms)
    config = ModelConfig(
        plan=plan,
        warmup_minutes=reps.warmup_minutes,
        run_minutes=reps.run_minutes,
        flow=flow if flow is not None else FlowParams(),
        staff=staff if staff is not None else StaffCalendar(),
        **model_kw,
    )
    for t in scenario.transforms:
        if isinstance(t, Peimaf):
            config = apply_peimaf(config, t.start_day, t.start_hour, t.staff_multiplier,
                                  t.divert_low_acuity, t.open_areas_to_red)
    return config


VALIDATION_REPS = ReplicationPlan(reps=50, days=28, warmup_hours=24.0, seed=42)
SURGE_REPS = ReplicationPlan(reps=10, days=5, warmup_hours=24.0, seed=42)
MONTH_REPS = ReplicationPlan(reps=10, days=28, warmup_hours=24.0, seed=42)


def preset(name: str) -> ScenarioConfig:
    """Named experiment presets."""
    if name == "baseline":
        return ScenarioConfig("baseline", (), VALIDATION_REPS)
    if name == "uniform10":
        return ScenarioConfig("uniform10", (UniformIncrease(10.0),), MONTH_REPS)
    if name == "mild":
        return ScenarioConfig("mild", (MildSurge(),), SURGE_REPS)
    if name.startswith("extreme"):
        try:
            mag = float(name[len("extreme"):])
        except ValueError:
            raise ScenarioError(f"unknown scenario {name!r}") from None
        if mag not in (100, 200, 300, 400):
            raise ScenarioError(f"unknown scenario {name!r}")
        return ScenarioConfig(name, (PeakSurge(PEAK_DAY, mag),), SURGE_REPS)
    if name in ("peimaf-a1", "peimaf-a1a2"):
        transforms = [PeakSurge(PEAK_DAY, 400.0), TagMixOverride(PEAK_DAY, red_heavy_mix(0.5))]
        if name == "peimaf-a1a2":
            transforms.append(Peimaf(PEAK_DAY, PEAK_HOUR, 2.0, True, True))
        return ScenarioConfig(name, tuple(transforms), SURGE_REPS)
    raise ScenarioError(f"unknown scenario {name!r}; expected one of {PRESETS}")


PRESETS = ("baseline", "uniform10", "mild", "extreme100", "extreme200", "extreme300",
           "extreme400", "peimaf-a1", "peimaf-a1a2")


def effective_plan_equal(a: RatePlan, b: RatePlan) -> bool:
    return a.slots.shape == b.slots.shape and bool(
        np.array_equal(a.slots, b.slots) and np.array_equal(a.tag_mix, b.tag_mix))
