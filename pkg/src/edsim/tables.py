"""Observed February 2018 data for the modelled ED and parameters fitted to it.

Counts cover 28 days and 2046 arrivals. Distribution parameters are minutes.
"""

from __future__ import annotations

from enum import Enum, IntEnum

from .kernel import DistributionSpec


class Tag(IntEnum):
    """Colour tag; the integer value is the treatment priority (higher first)."""

    WHITE = 0
    GREEN = 1
    YELLOW = 2
    RED = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, value) -> Tag:
        if isinstance(value, Tag):
            return value
        if isinstance(value, int):
            return cls(value)
        return cls[str(value).upper()]


TAGS = (Tag.WHITE, Tag.GREEN, Tag.YELLOW, Tag.RED)


class Outcome(str, Enum):
    O1 = "O1"  # discharged home
    O2 = "O2"  # home with referral to outpatient facilities / family physician
    O3 = "O3"  # ward admission
    O4 = "O4"  # transfer to another hospital
    O5 = "O5"  # refuses hospitalisation
    O6 = "O6"  # leaves during examinations
    O7 = "O7"  # leaves without being seen
    O8 = "O8"  # dies in the ED
    O9 = "O9"  # dead on arrival


OUTCOMES = tuple(Outcome)

OBSERVED_DAYS = 28
OBSERVED_ARRIVALS = 2046

TRIAGE_COUNTS = {Tag.WHITE: 149, Tag.GREEN: 1448, Tag.YELLOW: 434, Tag.RED: 15}
BASELINE_TAG_MIX = (0.0728, 0.7077, 0.2121, 0.0074)

# Red column includes the two deceased patients.
DISCHARGE_COUNTS = {Tag.WHITE: 171, Tag.GREEN: 1612, Tag.YELLOW: 243, Tag.RED: 20}

# Leaves-without-being-seen percentage by triage tag.
LWBS_RATE = {Tag.WHITE: 0.0465, Tag.GREEN: 0.0161, Tag.YELLOW: 0.0041, Tag.RED: 0.0}

# Patients by discharge tag and outcome; missing cells are empty in the source.
OUTCOME_COUNTS: dict[Tag, dict[Outcome, int]] = {
    Tag.WHITE: {Outcome.O1: 121, Outcome.O2: 39, Outcome.O6: 3, Outcome.O7: 8},
    Tag.GREEN: {Outcome.O1: 1025, Outcome.O2: 496, Outcome.O3: 29, Outcome.O5: 19,
                Outcome.O6: 17, Outcome.O7: 26},
    Tag.YELLOW: {Outcome.O1: 23, Outcome.O2: 21, Outcome.O3: 182, Outcome.O4: 4,
                 Outcome.O5: 10, Outcome.O6: 2, Outcome.O7: 1},
    Tag.RED: {Outcome.O3: 14, Outcome.O4: 4, Outcome.O8: 2},
}

# Simulated outcome counts (mean, 95% half-width) reported for the validated model.
VALIDATION_TARGETS: dict[tuple[Tag, Outcome], tuple[float, float]] = {
    (Tag.WHITE, Outcome.O1): (120.53, 2.22),
    (Tag.GREEN, Outcome.O1): (1019.74, 5.88),
    (Tag.YELLOW, Outcome.O1): (23.35, 0.91),
    (Tag.WHITE, Outcome.O2): (39.41, 1.29),
    (Tag.GREEN, Outcome.O2): (489.85, 4.69),
    (Tag.YELLOW, Outcome.O2): (21.45, 1.02),
    (Tag.GREEN, Outcome.O3): (28.83, 1.15),
    (Tag.YELLOW, Outcome.O3): (179.18, 3.08),
    (Tag.RED, Outcome.O3): (13.51, 0.73),
    (Tag.YELLOW, Outcome.O4): (3.79, 0.42),
    (Tag.RED, Outcome.O4): (4.18, 0.41),
    (Tag.GREEN, Outcome.O5): (18.14, 0.87),
    (Tag.YELLOW, Outcome.O5): (10.24, 0.65),
    (Tag.WHITE, Outcome.O6): (3.15, 0.32),
    (Tag.GREEN, Outcome.O6): (16.93, 0.76),
    (Tag.YELLOW, Outcome.O6): (2.09, 0.28),
    (Tag.WHITE, Outcome.O7): (7.06, 0.60),
    (Tag.GREEN, Outcome.O7): (23.63, 1.0),
    (Tag.YELLOW, Outcome.O7): (1.64, 0.28),
    (Tag.RED, Outcome.O8): (2.16, 0.30),
}

VISIT_TIME = {
    Tag.WHITE: DistributionSpec.lognormal(7.87, 9.76),
    Tag.GREEN: DistributionSpec.lognormal(11.7, 10.6),
    Tag.YELLOW: DistributionSpec.normal(15.2, 7.72),
    Tag.RED: DistributionSpec.shifted_gamma(8.0, 10.2, 1.49),
}

EXAM_TIME = {
    Tag.WHITE: DistributionSpec.exponential(44.4),
    Tag.GREEN: DistributionSpec.exponential(80.4),
    Tag.YELLOW: DistributionSpec.weibull(236.0, 0.731),
    Tag.RED: DistributionSpec.weibull(86.9, 0.678),
}

# Physicians: (start hour, end hour, weekday count, holiday count)
PHYSICIAN_SHIFTS = ((8, 14, 2, 1), (14, 21, 2, 1), (21, 8, 1, 1))
# Nurses: (start hour, end hour, count), the same every day
NURSE_SHIFTS = ((7, 14, 3), (14, 22, 3), (22, 7, 2))


def leaves_during_exams_rate() -> dict[Tag, float]:
    """O6 count per triage-tag patient, attributing O6 to the observed tag."""
    return {
        tag: OUTCOME_COUNTS[tag].get(Outcome.O6, 0) / TRIAGE_COUNTS[tag] for tag in TAGS
    }
