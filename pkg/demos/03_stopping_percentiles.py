#!/usr/bin/env python3
"""Ballot-by-ballot stopping-time table across margins.

For each margin the audit tests after every single draw; the exact
stopping-time distribution comes from propagating the winner-count pmf one
draw at a time out to six expected-sample-numbers.  Expected ballots land
just under the Wald estimate because the propagation is finite and
discrete.
"""

import csv
import sys

from rlapoll.planner import bravo_table

MARGINS = [0.4, 0.3, 0.2, 0.1, 0.04]

rows = bravo_table(MARGINS, alpha=0.1)
header = f"{'margin':>7s} {'25th':>6s} {'50th':>6s} {'75th':>6s} {'90th':>6s} {'99th':>7s} {'expected':>9s} {'asn':>9s}"
print(header)
for row in rows:
    print(
        f"{row['margin']:7.2f} {row['pct_25']:6d} {row['pct_50']:6d} {row['pct_75']:6d} "
        f"{row['pct_90']:6d} {row['pct_99']:7d} {row['expected_ballots']:9.2f} {row['asn']:9.2f}"
    )

out = sys.argv[1] if len(sys.argv) > 1 else "stopping_percentiles.csv"
with open(out, "w", newline="") as fh:
    writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
print(f"\nwrote {out}")
