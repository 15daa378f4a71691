import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edsim.arrivals import Fate, Patient
from edsim.metrics import (
    aggregate,
    compute_kpis,
    outcome_counts,
    t_quantile,
    truncate_warmup,
    utilization_series,
)
from edsim.tables import Outcome, Tag


# -- Student-t oracle ------------------------------------------------------
# Closed-form 0.975 quantiles:
#   df=1: tan(pi (p - 1/2));  df=2: (2p-1) / sqrt(2 p (1-p));
#   df=4: 2 sqrt(cos(acos(sqrt(a))/3) / sqrt(a) - 1) with a = 4p(1-p)
# and mpmath root-finding on the regularised incomplete beta for other df.

def t975_closed(df):
    p = 0.975
    if df == 1:
        return math.tan(math.pi * (p - 0.5))
    if df == 2:
        return (2 * p - 1) / math.sqrt(2 * p * (1 - p))
    if df == 4:
        a = 4 * p * (1 - p)
        return 2 * math.sqrt(math.cos(math.acos(math.sqrt(a)) / 3) / math.sqrt(a) - 1)
    raise ValueError(df)


def t975_mpmath(df):
    mpmath.mp.dps = 40
    nu = mpmath.mpf(df)

    def cdf(x):  # upper tail through the incomplete beta function
        return 1 - mpmath.betainc(nu / 2, mpmath.mpf(1) / 2, 0, nu / (nu + x * x), regularized=True) / 2

    return float(mpmath.findroot(lambda x: cdf(x) - mpmath.mpf("0.975"), 2.0))


def halfwidth_oracle(values, tq):
    n = len(values)
    m = math.fsum(values) / n
    s = math.sqrt(math.fsum((v - m) ** 2 for v in values) / (n - 1))
    return tq * s / math.sqrt(n)


@pytest.mark.parametrize("df", [1, 2, 4])
def test_t_quantile_matches_closed_forms(df):
    assert t_quantile(df) == pytest.approx(t975_closed(df), abs=1e-12)


@pytest.mark.parametrize("df", [3, 9, 29, 49])
def test_t_quantile_matches_mpmath(df):
    assert t_quantile(df) == pytest.approx(t975_mpmath(df), abs=1e-10)


def test_three_value_ci():
    agg = aggregate([10.0, 12.0, 14.0])
    assert agg.mean == 12.0
    expected = 0.95 / math.sqrt(0.04875) * 2.0 / math.sqrt(3)
    assert abs(agg.ci_halfwidth - expected) < 1e-9
    assert agg.ci_halfwidth == pytest.approx(4.968, abs=1e-3)


@pytest.mark.parametrize("values", [
    [1.0, 2.0],
    [1000.0, 5000.0],
    [250.0, -40.0, 900.0],
    [3.5, 3.5, 3.5, 3.6, 3.4],
    list(np.linspace(-5, 20, 10)),
    [0.1 * k * k for k in range(30)],
])
def test_halfwidth_matches_oracle(values):
    df = len(values) - 1
    tq = t975_closed(df) if df in (1, 2, 4) else t975_mpmath(df)
    assert abs(aggregate(values).ci_halfwidth - halfwidth_oracle(values, tq)) < 1e-9


def test_degenerate_aggregates():
    assert aggregate([]).mean is None
    single = aggregate([4.0])
    assert single.mean == 4.0 and single.ci_halfwidth is None and single.n == 1
    assert aggregate([2.0, None, 4.0]).n == 2
    assert aggregate([7.0] * 5).ci_halfwidth == 0.0


@settings(max_examples=60)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=40), st.randoms())
def test_aggregate_is_order_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a, b = aggregate(values), aggregate(shuffled)
    assert a.mean == pytest.approx(b.mean, abs=1e-9)
    assert a.ci_halfwidth == pytest.approx(b.ci_halfwidth, rel=1e-9, abs=1e-9)
    assert min(values) - 1e-9 <= a.mean <= max(values) + 1e-9


# -- KPIs ------------------------------------------------------------------

def patient(pid, tag, t0, t1, t2, t5, fate=Fate.NORMAL, dtag=None, outcome=Outcome.O1):
    p = Patient(pid, t0, tag)
    p.t1, p.t2, p.t5 = t1, t2, t5
    p.t3 = t2
    p.t4 = t5
    p.fate = fate
    p.discharge_tag = dtag if dtag is not None else tag
    p.outcome = outcome if t5 is not None else None
    return p


def test_kpis_by_triage_tag():
    recs = [
        patient(0, Tag.GREEN, 0, 5, 15, 45),
        patient(1, Tag.GREEN, 0, 5, 25, 65),
        patient(2, Tag.GREEN, 0, 5, None, 50, fate=Fate.LWBS, outcome=Outcome.O7),
        patient(3, Tag.GREEN, 0, 5, 10, None),  # still in the system
        patient(4, Tag.YELLOW, 0, 2, 3, 30, fate=Fate.LEAVES_DURING_EXAMS, outcome=Outcome.O6),
        patient(5, Tag.WHITE, 0, None, None, None, fate=Fate.DIVERTED),
    ]
    k = compute_kpis(recs)
    assert k[Tag.GREEN] == {"WT": 15.0, "TT": 50.0, "n": 2}
    assert k[Tag.YELLOW]["WT"] == 1.0 and k[Tag.YELLOW]["TT"] == 28.0
    assert k[Tag.RED] is None and k[Tag.WHITE] is None
    assert k["lwbs"] == {Tag.GREEN: 1}
    assert k["censored"] == {Tag.GREEN: 1}
    assert k["diverted"] == {Tag.WHITE: 1}


def test_kpis_by_discharge_tag():
    recs = [patient(0, Tag.GREEN, 0, 5, 15, 45, dtag=Tag.YELLOW)]
    assert compute_kpis(recs, by="discharge")[Tag.YELLOW]["n"] == 1
    assert compute_kpis(recs)[Tag.GREEN]["n"] == 1


def test_outcome_counts_use_discharge_tag():
    recs = [patient(0, Tag.GREEN, 0, 5, 15, 45, dtag=Tag.YELLOW, outcome=Outcome.O3),
            patient(1, Tag.GREEN, 0, 5, 15, None)]
    assert outcome_counts(recs) == {(Tag.YELLOW, Outcome.O3): 1}


def test_truncate_warmup_keeps_later_arrivals():
    recs = [patient(i, Tag.GREEN, t0, t0, t0, t0 + 1) for i, t0 in enumerate((0, 1439.9, 1440, 2000))]
    assert [p.id for p in truncate_warmup(recs, 1440)] == [2, 3]
    assert len(truncate_warmup(recs, 0)) == 4


def test_utilisation_profile():
    samples = [(1, 10, "GreenArea", 1, 1), (2, 10, "GreenArea", 0, 1), (1, 10, "ShockRoom", 1, 2)]
    prof = utilization_series(samples)
    assert prof["GreenArea"][10] == 0.5
    assert prof["ShockRoom"][10] == 0.5
    assert prof["GreenArea"][11] is None
    assert utilization_series(samples, days=[1])["GreenArea"][10] == 1.0
