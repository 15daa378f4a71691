"""Fit the LWBS fate probabilities to the observed leave-without-being-seen rates.

A patient tagged to abandon is reclaimed if the visit starts before the
patience timer fires, so the realised LWBS share is lower than the fate
probability. This runs the baseline, measures the realised share per tag
and rescales the fate probability; a few fixed-point rounds are enough.

    python scripts/calibrate_lwbs.py --reps 400 --rounds 3
"""

import argparse
from collections import Counter

from edsim.arrivals import Fate
from edsim.flow import FlowParams, run_replication
from edsim.metrics import truncate_warmup
from edsim.scenarios import build_model_config, preset
from edsim.tables import LWBS_RATE, TAGS


def realised_rates(lwbs_prob, reps, seed):
    scenario = preset("baseline")
    flow = FlowParams(lwbs_prob=dict(lwbs_prob))
    cfg = build_model_config(scenario, flow=flow)
    arrivals, lwbs = Counter(), Counter()
    for r in range(reps):
        res = run_replication(cfg, seed, r)
        for p in truncate_warmup(res.patients, cfg.warmup_minutes):
            arrivals[p.triage_tag] += 1
            if p.fate is Fate.LWBS:
                lwbs[p.triage_tag] += 1
    return {t: lwbs[t] / arrivals[t] for t in TAGS}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=400)
    ap.add_argument("--rounds", type=int, default=3)
    ap.add_argument("--seed", type=int, default=20180201)
    args = ap.parse_args()

    prob = dict(LWBS_RATE)
    for k in range(args.rounds):
        got = realised_rates(prob, args.reps, args.seed + k)
        for t in TAGS:
            if LWBS_RATE[t] > 0 and got[t] > 0:
                prob[t] = min(prob[t] * LWBS_RATE[t] / got[t], 0.95)
        print(f"round {k}: realised " + ", ".join(f"{t.label}={got[t]:.5f}" for t in TAGS))
        print("         fate     " + ", ".join(f"{t.label}={prob[t]:.5f}" for t in TAGS))
    got = realised_rates(prob, args.reps, args.seed + 99)
    print("check:   realised " + ", ".join(f"{t.label}={got[t]:.5f}" for t in TAGS))


if __name__ == "__main__":
    main()
