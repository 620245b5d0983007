#!/usr/bin/env python3
"""Monte Carlo check of planned first rounds against the analytics.

Simulates the planned 90% first round for a few states, both under the
announced tallies and under the hardest wrong outcome (a tie among the
relevant ballots).  The announced-mode stop rate should sit a little above
0.9, the tie-mode rate below the 0.1 risk limit, and their ratio above 10.
Writes stop/risk/ratio rows as plot data.
"""

import argparse
import csv

from rlapoll import AuditConfig, Rule, RoundSchedule, SimSpec, TrueOutcome, load_bundled_2016
from rlapoll.planner import next_round_size
from rlapoll.simulate import simulate_batch

parser = argparse.ArgumentParser()
parser.add_argument("--states", default="Alaska,Ohio,Texas")
parser.add_argument("--trials", type=int, default=10_000)
parser.add_argument("--seed", type=int, default=424_242)
parser.add_argument("--out", default="simulation_check.csv")
args = parser.parse_args()

contests = {c.name: c for c in load_bundled_2016()}
rows = []
for name in args.states.split(","):
    contest = contests[name]
    cfg = AuditConfig(alpha=0.1, p=contest.p, rule=Rule.MINERVA)
    planned = next_round_size(0.9, None, cfg, contest=contest)
    schedule = RoundSchedule((planned.scaled_draws,))
    base = dict(contest=contest, cfg=cfg, schedule=schedule, trials=args.trials)
    announced = simulate_batch(SimSpec(seed=args.seed, hypothesis=TrueOutcome.AS_ANNOUNCED, **base))
    tied = simulate_batch(SimSpec(seed=args.seed + 1, hypothesis=TrueOutcome.TIE, **base))
    ratio = announced.stop_rate / tied.stop_rate
    rows.append(
        {
            "state": name,
            "margin": round(contest.margin, 4),
            "round_draws": planned.scaled_draws,
            "stop_rate": announced.stop_rate,
            "risk": tied.stop_rate,
            "stop_to_risk": round(ratio, 2),
        }
    )
    print(
        f"{name:<10s} draws={planned.scaled_draws:6d} stop={announced.stop_rate:.4f} "
        f"risk={tied.stop_rate:.4f} ratio={ratio:5.1f}"
    )

with open(args.out, "w", newline="") as fh:
    writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
print(f"wrote {args.out}")
