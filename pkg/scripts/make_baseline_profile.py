"""Write the shipped baseline hourly arrival profile.

The observed hourly rates are only available as a plot, so the shipped
profile is a stand-in: a hand-drawn diurnal shape (quiet overnight, steep
morning ramp, maximum in the 10:00 slot, a long afternoon plateau) rescaled
so one day carries 2046 / 28 arrivals.

    python scripts/make_baseline_profile.py
"""

import json
from pathlib import Path

SHAPE = [
    1.6, 1.3, 1.1, 1.0, 0.9, 1.0, 1.3, 2.0,
    3.4, 4.8, 5.6, 5.3, 4.6, 4.0, 3.8, 3.9,
    3.9, 3.7, 3.6, 3.4, 3.1, 2.6, 2.2, 1.9,
]
DAILY_TOTAL = 2046 / 28

OUT = Path(__file__).resolve().parents[1] / "src" / "edsim" / "data" / "baseline_profile.json"


def main():
    scale = DAILY_TOTAL / sum(SHAPE)
    rates = [round(v * scale, 6) for v in SHAPE]
    doc = {
        "schema_version": 1,
        "units": "patients/hour",
        "description": "Stand-in diurnal arrival profile; daily total 2046/28, peak slot 10:00.",
        "rates": rates,
        "day_overrides": {},
    }
    OUT.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {OUT} (daily total {sum(rates):.4f}, peak {max(rates):.4f}/h)")


if __name__ == "__main__":
    main()
