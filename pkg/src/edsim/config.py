"""Experiment configuration file (JSON) and its validation.

Every field is optional; omitted fields take the documented defaults.
Command-line flags override file values.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .arrivals import RatePlanError, load_profile, validate_mix, validate_rates
from .flow import (
    Area,
    ConfigError,
    FlowParams,
    ModelConfig,
    OutcomeTable,
    StaffCalendar,
    TagTransitionMatrix,
)
from .kernel import DistributionSpec
from .scenarios import (
    PRESETS,
    ScenarioConfig,
    ScenarioError,
    build_model_config,
    preset,
    transform_from_dict,
)
from .tables import TAGS, Tag

CONFIG_SCHEMA_VERSION = 1


class ConfigFileError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DistributionModel(_Strict):
    family: Literal["Lognormal", "Normal", "Exponential", "ShiftedGamma", "Weibull", "Constant", "Uniform"]
    params: list[float]
    floor: float = 0.1

    def build(self) -> DistributionSpec:
        return DistributionSpec.from_dict(self.model_dump())


TagTable = dict[Literal["White", "Green", "Yellow", "Red"], float]
TagDists = dict[Literal["White", "Green", "Yellow", "Red"], DistributionModel]


class FlowModel(_Strict):
    visit_time: Optional[TagDists] = None
    exam_time: Optional[TagDists] = None
    exam_prob: Optional[TagTable] = None
    reassessment_scale: float = 0.5
    triage_time: Optional[DistributionModel] = None
    bypass_prob: float = Field(1.0, ge=0.0, le=1.0)
    lwbs_prob: Optional[TagTable] = None
    leave_exam_prob: Optional[TagTable] = None
    patience: Optional[DistributionModel] = None
    transition_matrix: Optional[list[list[float]]] = None
    outcome_table: Optional[dict[Literal["White", "Green", "Yellow", "Red"], dict[str, float]]] = None
    capacity: Optional[dict[Literal["GreenArea", "YellowArea", "ShockRoom", "TriageStation"], int]] = None
    red_preemption: bool = True

    def build(self) -> FlowParams:
        flow = FlowParams()
        for name in ("visit_time", "exam_time"):
            table = getattr(self, name)
            if table:
                cur = getattr(flow, name)
                cur.update({Tag.parse(k): v.build() for k, v in table.items()})
        for name in ("exam_prob", "lwbs_prob", "leave_exam_prob"):
            table = getattr(self, name)
            if table:
                getattr(flow, name).update({Tag.parse(k): float(v) for k, v in table.items()})
        flow.reassessment_scale = self.reassessment_scale
        flow.bypass_prob = self.bypass_prob
        flow.red_preemption = self.red_preemption
        if self.triage_time:
            flow.triage_time = self.triage_time.build()
        if self.patience:
            flow.patience = self.patience.build()
        if self.transition_matrix is not None:
            flow.transitions = TagTransitionMatrix(self.transition_matrix)
        if self.outcome_table is not None:
            probs = flow.outcomes.to_dict()
            probs.update(self.outcome_table)
            flow.outcomes = OutcomeTable({Tag.parse(k): v for k, v in probs.items()})
        if self.capacity:
            flow.capacity.update({Area(k): v for k, v in self.capacity.items()})
        return flow


class StaffModel(_Strict):
    physician_shifts: Optional[list[tuple[int, int, int, int]]] = None
    nurse_shifts: Optional[list[tuple[int, int, int]]] = None

    def build(self) -> StaffCalendar:
        kw = {}
        if self.physician_shifts is not None:
            kw["physician_shifts"] = tuple(tuple(s) for s in self.physician_shifts)
        if self.nurse_shifts is not None:
            kw["nurse_shifts"] = tuple(tuple(s) for s in self.nurse_shifts)
        return StaffCalendar(**kw)


class CalendarModel(_Strict):
    start_weekday: int = Field(0, ge=0, le=6)
    sunday_is_holiday: bool = True
    extra_holidays: list[int] = []


class ReplicationModel(_Strict):
    reps: Optional[int] = Field(None, ge=1)
    days: Optional[float] = Field(None, gt=0)
    warmup_hours: Optional[float] = Field(None, ge=0)
    seed: Optional[int] = None


class OutputModel(_Strict):
    dir: str = "out"
    patients_csv: bool = False


class ExperimentConfig(_Strict):
    schema_version: Literal[1] = CONFIG_SCHEMA_VERSION
    scenario: str = "baseline"
    transforms: list[dict[str, Any]] = []
    replications: ReplicationModel = ReplicationModel()
    rate_profile: Union[None, str, list[float]] = None
    flow: FlowModel = FlowModel()
    staff: StaffModel = StaffModel()
    calendar: CalendarModel = CalendarModel()
    utilization_mode: Literal["instant", "time-average"] = "instant"
    output: OutputModel = OutputModel()
    workers: int = Field(1, ge=1)

    @field_validator("scenario")
    @classmethod
    def _known_scenario(cls, v):
        if v not in PRESETS:
            raise ValueError(f"unknown scenario {v!r}; expected one of {', '.join(PRESETS)}")
        return v

    @field_validator("rate_profile")
    @classmethod
    def _rates(cls, v):
        if isinstance(v, list):
            validate_rates(v, "rates")
        return v

    @field_validator("transforms")
    @classmethod
    def _transforms(cls, v):
        for i, t in enumerate(v):
            try:
                tr = transform_from_dict(t)
            except ScenarioError as exc:
                raise ValueError(f"[{i}] {exc}") from None
            if getattr(tr, "mix", None) is not None:
                try:
                    validate_mix(tr.mix, f"[{i}] mix")
                except RatePlanError as exc:
                    raise ValueError(str(exc)) from None
        return v

    # -- derived objects -------------------------------------------------
    def scenario_config(self) -> ScenarioConfig:
        base = preset(self.scenario)
        transforms = base.transforms + tuple(transform_from_dict(t) for t in self.transforms)
        overrides = {k: v for k, v in self.replications.model_dump().items() if v is not None}
        sc = ScenarioConfig(base.name if not self.transforms else f"{base.name}+custom", transforms,
                            base.replications)
        return sc.with_replications(**overrides) if overrides else sc

    def profile(self) -> dict:
        if isinstance(self.rate_profile, list):
            return {"rates": validate_rates(self.rate_profile), "day_overrides": {}}
        return load_profile(self.rate_profile)

    def model_config_for(self, scenario: ScenarioConfig) -> ModelConfig:
        cfg = build_model_config(
            scenario,
            profile=self.profile(),
            flow=self.flow.build(),
            staff=self.staff.build(),
            start_weekday=self.calendar.start_weekday,
            sunday_is_holiday=self.calendar.sunday_is_holiday,
            extra_holidays=tuple(self.calendar.extra_holidays),
            utilization_mode=self.utilization_mode,
        )
        cfg.validate()
        return cfg


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def config_from_dict(doc: dict) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigFileError(_format_validation_error(exc)) from None
    # build once so cross-field problems surface before any event runs
    try:
        cfg.model_config_for(cfg.scenario_config())
    except (ConfigError, ScenarioError, RatePlanError) as exc:
        raise ConfigFileError(str(exc)) from None
    return cfg


def parse_config(path: str | Path) -> ExperimentConfig:
    """Read, validate and default-fill an experiment config file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigFileError(f"{path}: cannot read: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f"{path}: malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigFileError(f"{path}: top level must be an object")
    return config_from_dict(doc)


def tag_table(d: dict) -> dict:
    return {t.label: d[t] for t in TAGS}
