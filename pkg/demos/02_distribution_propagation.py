#!/usr/bin/env python3
"""How the winner-count distribution evolves across rounds.

After a round's decision, the mass at and above kmin is removed (those
samples stopped the audit), so the distribution entering round two is
sub-normalized and capped below kmin.  Drawing more ballots convolves it
with a fresh binomial.  The removed tails are exactly the round's
stopping probability (alternative) and risk (null) — watch the running
risk stay under alpha times the running stopping probability.
"""

from rlapoll import Hypothesis, Rule, AuditConfig, TallyPmf, convolve_round, truncate_above
from rlapoll.rules import kmin_for_round

P, ALPHA = 0.75, 0.1
SCHEDULE = (50, 100, 150)

cfg = AuditConfig(alpha=ALPHA, p=P, rule=Rule.MINERVA)
h0 = TallyPmf.fresh(Hypothesis.null())
ha = TallyPmf.fresh(Hypothesis.alt(P))

cum_stop = cum_risk = 0.0
prev = 0
for n in SCHEDULE:
    h0 = convolve_round(h0, n - prev)
    ha = convolve_round(ha, n - prev)
    prev = n
    kmin = kmin_for_round(h0, ha, cfg)
    print(f"round at n={n}: support 0..{ha.support_max}, kmin={kmin}")
    h0, risk = truncate_above(h0, kmin)
    ha, stop = truncate_above(ha, kmin)
    cum_stop += stop
    cum_risk += risk
    print(
        f"  removed tails: stop={stop:.5f} risk={risk:.6f} "
        f"(risk/stop={risk / stop:.4f} <= alpha)"
    )
    print(
        f"  surviving mass: alt={ha.total_mass():.5f} null={h0.total_mass():.5f}; "
        f"support now 0..{ha.support_max}"
    )
print(f"\ncumulative: stop={cum_stop:.5f} risk={cum_risk:.6f} (alpha={ALPHA})")
assert cum_risk <= ALPHA * cum_stop
