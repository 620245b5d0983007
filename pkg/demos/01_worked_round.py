#!/usr/bin/env python3
"""A single 50-ballot audit round, three stopping rules side by side.

An election announced at 75% for the winner is audited at risk limit 0.1.
The first round draws 50 ballots and finds 32 for the winner.  The
per-draw likelihood-ratio rule wants 34; the tail-ratio rule is satisfied
from 31 up; the combined rule (delta = 1) from 32.  So the same sample
confirms the outcome or not depending on the rule in force.
"""

from rlapoll import (
    AuditConfig,
    AuditState,
    RoundObservation,
    RoundSchedule,
    Rule,
    binom_tail,
    execute_round,
    sigma,
)

P, ALPHA, N, K = 0.75, 0.1, 50, 32

print(f"announced winner fraction p={P}, risk limit alpha={ALPHA}")
print(f"round: {N} ballots drawn, {K} for the winner\n")

print(f"likelihood ratio sigma({K}) = {sigma(K, P, N):.4f}  (needs >= {1/ALPHA:.0f})")
ha_tail = binom_tail(K, N, P)
h0_tail = binom_tail(K, N, 0.5)
print(f"tail ratio = {ha_tail:.4f} / {h0_tail:.4f} = {ha_tail / h0_tail:.2f}\n")

for rule in (Rule.EOR_BRAVO, Rule.MINERVA, Rule.ATHENA):
    cfg = AuditConfig(alpha=ALPHA, p=P, rule=rule, delta=1.0)
    state = AuditState(config=cfg, schedule=RoundSchedule((N, 2 * N)))
    _, ev = execute_round(state, RoundObservation(draws=N, winner_relevant=K, loser_relevant=N - K))
    print(
        f"{rule.value:>10s}: kmin={ev.kmin:3d}  decision={ev.decision.value:12s} "
        f"p-value analog={ev.p_value_analog:.4f}  status={state.status.value}"
    )
