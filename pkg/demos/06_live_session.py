#!/usr/bin/env python3
"""A live audit session end to end, with tamper-evident persistence.

Creates an audit, plans the first round, enters a disappointing round,
asks the planner for a conditional second round, enters it, and saves the
session after each step.  Reloading replays every observation through a
fresh engine: doctoring the file breaks the load.
"""

import json
import tempfile
from pathlib import Path

from rlapoll import (
    AuditConfig,
    AuditState,
    ContestRecord,
    RoundObservation,
    RoundSchedule,
    Rule,
    execute_round,
)
from rlapoll.planner import next_round_size
from rlapoll.sessions import SessionDocument, TamperError, load_session, save_session

contest = ContestRecord.from_tallies("Springfield Mayor", {"Quimby": 7400, "Burns": 2600}, 10400)
cfg = AuditConfig(alpha=0.1, p=contest.p, rule=Rule.MINERVA)

plan = next_round_size(0.9, None, cfg, contest=contest)
print(f"planned first round: {plan.scaled_draws} draws "
      f"({plan.relevant_round_size} relevant, stop prob {plan.achieved_stop_prob:.4f})")

state = AuditState(config=cfg, schedule=RoundSchedule((plan.relevant_round_size, plan.relevant_round_size * 2)))
doc = SessionDocument(audit_id="springfield-01", contest=contest, config=cfg, state=state)

workdir = Path(tempfile.mkdtemp())
session_path = workdir / "session.json"

# A weak first round: winner underperforms the announcement.
n1 = plan.relevant_round_size
w1 = int(n1 * 0.63)
_, ev = execute_round(state, RoundObservation(draws=n1, winner_relevant=w1, loser_relevant=n1 - w1))
doc.log_action("round", f"n={n1} k={w1}")
save_session(doc, session_path)
print(f"round 1: k={w1}/{n1} kmin={ev.kmin} -> {ev.decision.value}; saved {session_path}")

nxt = next_round_size(0.9, state, cfg, contest=contest)
print(f"planner: draw {nxt.scaled_draws} more (to n={nxt.relevant_round_size} relevant) "
      f"for a {nxt.achieved_stop_prob:.2%} conditional finish")

# Amend the schedule to the recommendation and run a strong second round.
d2 = nxt.relevant_round_size - state.relevant_drawn
w2 = int(d2 * 0.74)
_, ev = execute_round(
    state,
    RoundObservation(draws=d2, winner_relevant=w2, loser_relevant=d2 - w2),
    allow_amend=True,
)
doc.log_action("round", f"n={nxt.relevant_round_size} (amended)")
save_session(doc, session_path)
print(f"round 2: k={w2}/+{d2} kmin={ev.kmin} -> {ev.decision.value}; status={state.status.value}")

reloaded = load_session(session_path)
print(f"reload + replay OK, hash {reloaded.content_hash()[:16]}...")

raw = json.loads(session_path.read_text())
raw["rounds"][0]["observation"]["winner_relevant"] += 1
raw["rounds"][0]["observation"]["loser_relevant"] -= 1
session_path.write_text(json.dumps(raw))
try:
    load_session(session_path)
except TamperError as exc:
    print(f"doctored file rejected: {exc}")
