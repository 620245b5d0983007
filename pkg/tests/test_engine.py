"""Audit state machine: rounds, schedules, accounting, selection order."""

import json
import math

import pytest

from rlapoll.engine import (
    AuditState,
    AuditStatus,
    RoundObservation,
    RoundSchedule,
    ScheduleViolation,
    StateError,
    escalate,
    evaluate_selection_ordered,
    execute_round,
    likelihood_ratio_residual,
    risk_report,
)
from rlapoll.prob import binom_tail
from rlapoll.rules import AuditConfig, Decision, Rule, bravo_kmin


def make_state(rule, p=0.75, alpha=0.1, sizes=(50, 100), delta=1.0):
    cfg = AuditConfig(alpha=alpha, p=p, rule=rule, delta=delta)
    return AuditState(config=cfg, schedule=RoundSchedule(tuple(sizes)))


def obs(winner, loser, irrelevant=0):
    return RoundObservation(
        draws=winner + loser + irrelevant,
        winner_relevant=winner,
        loser_relevant=loser,
        irrelevant=irrelevant,
    )


class TestWorkedExample:
    def test_minerva_stops_at_32(self):
        state = make_state(Rule.MINERVA)
        _, ev = execute_round(state, obs(32, 18))
        assert ev.kmin == 31
        assert ev.decision is Decision.CORRECT
        assert state.status is AuditStatus.STOPPED_CORRECT

    def test_eor_bravo_continues_at_32(self):
        state = make_state(Rule.EOR_BRAVO)
        _, ev = execute_round(state, obs(32, 18))
        assert ev.kmin == 34
        assert ev.decision is Decision.UNDETERMINED
        assert state.status is AuditStatus.IN_PROGRESS

    def test_athena_stops_at_32(self):
        state = make_state(Rule.ATHENA)
        _, ev = execute_round(state, obs(32, 18))
        assert ev.kmin == 32
        assert ev.decision is Decision.CORRECT

    def test_two_draw_round(self):
        # tail ratio at k=2 after two draws is p^2 / 0.25 = 2.25 >= 1/0.5.
        state = make_state(Rule.MINERVA, alpha=0.5, sizes=(2,))
        _, ev = execute_round(state, obs(2, 0))
        assert ev.decision is Decision.CORRECT
        assert ev.ratio_at_k == pytest.approx(0.75**2 / 0.25, rel=1e-12)


class TestScheduleHandling:
    def test_violation_raises(self):
        state = make_state(Rule.MINERVA)
        with pytest.raises(ScheduleViolation):
            execute_round(state, obs(30, 18))

    def test_amendment_rebuilds_round(self):
        state = make_state(Rule.MINERVA)
        _, ev = execute_round(state, obs(29, 19), allow_amend=True)  # 48 relevant, not 50
        assert state.schedule.version == 1
        assert state.schedule.sizes[0] == 48
        assert state.schedule.amended_from == (50, 100)
        assert state.relevant_drawn == 48
        # Threshold recomputed at the actual size, not the planned one.
        assert ev.kmin <= 31

    def test_round_after_terminal_rejected(self):
        state = make_state(Rule.MINERVA)
        execute_round(state, obs(32, 18))
        with pytest.raises(StateError):
            execute_round(state, obs(30, 20))

    def test_schedule_exhaustion(self):
        state = make_state(Rule.MINERVA, sizes=(50,))
        execute_round(state, obs(25, 25))
        assert state.status is AuditStatus.SCHEDULE_EXHAUSTED
        # Exhaustion does not auto-escalate; that is an operator action.
        escalate(state)
        assert state.status is AuditStatus.ESCALATED_HAND_COUNT

    def test_escalate_after_confirmation_rejected(self):
        state = make_state(Rule.MINERVA)
        execute_round(state, obs(32, 18))
        with pytest.raises(StateError):
            escalate(state)

    def test_irrelevant_ballots_do_not_move_the_test(self):
        with_irr = make_state(Rule.MINERVA)
        execute_round(with_irr, obs(32, 18, irrelevant=7))
        without = make_state(Rule.MINERVA)
        execute_round(without, obs(32, 18))
        assert with_irr.cum_risk == without.cum_risk
        assert with_irr.rounds[0][1] == without.rounds[0][1]

    def test_geometric_schedule(self):
        sched = RoundSchedule.geometric(100, 1.5, 4)
        assert sched.sizes[0] == 100
        diffs = [b - a for a, b in zip(sched.sizes, sched.sizes[1:])]
        assert diffs == [150, 225, 338]

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            RoundSchedule((50, 50))
        with pytest.raises(ValueError):
            RoundSchedule(())
        with pytest.raises(ValueError):
            RoundSchedule((0, 10))


class TestAccounting:
    def test_empty_report(self):
        state = make_state(Rule.MINERVA)
        rep = risk_report(state)
        assert rep.rows == ()
        assert rep.cum_risk == 0.0
        assert rep.cum_stop == 0.0

    def test_first_round_tails(self):
        state = make_state(Rule.MINERVA)
        execute_round(state, obs(25, 25))  # does not stop
        rep = risk_report(state)
        row = rep.rows[0]
        assert row["kmin"] == 31
        assert row["stop_prob"] == pytest.approx(binom_tail(31, 50, 0.75), rel=1e-12)
        assert row["risk"] == pytest.approx(binom_tail(31, 50, 0.5), rel=1e-12)
        assert row["risk"] <= 0.1 * row["stop_prob"]

    @pytest.mark.parametrize("rule", [Rule.MINERVA, Rule.ATHENA, Rule.EOR_BRAVO])
    @pytest.mark.parametrize("p", [0.6, 0.75])
    def test_risk_budget_holds_across_rounds(self, rule, p):
        state = make_state(rule, p=p, sizes=(20, 45, 75, 110))
        wins = {20: 11, 25: 13, 30: 16, 35: 18}
        prev = 0
        for size in (20, 45, 75, 110):
            if state.status in (AuditStatus.STOPPED_CORRECT, AuditStatus.ESCALATED_HAND_COUNT):
                break
            d = size - prev
            prev = size
            w = wins.get(d, (d + 1) // 2)
            execute_round(state, obs(w, d - w))
        rep = risk_report(state)
        assert rep.cum_risk <= state.config.alpha
        assert rep.cum_risk <= state.config.alpha * max(rep.cum_stop, 1e-300)
        for row in rep.rows:
            if row["stop_prob"] > 0:
                assert row["risk"] <= state.config.alpha * row["stop_prob"] * (1 + 1e-12)

    def test_likelihood_ratio_identity_each_round(self):
        state = make_state(Rule.MINERVA, sizes=(50, 100, 150))
        for w, l in ((25, 25), (27, 23), (26, 24)):
            execute_round(state, obs(w, l))
            assert likelihood_ratio_residual(state) < 1e-9

    def test_determinism(self):
        def run():
            state = make_state(Rule.ATHENA, sizes=(50, 100))
            execute_round(state, obs(28, 22))
            execute_round(state, obs(33, 17))
            rep = risk_report(state)
            return json.dumps(
                {
                    "rows": [
                        {k: (v if isinstance(v, (int, str)) else v.hex() if v == v else "nan")
                         for k, v in row.items()}
                        for row in rep.rows
                    ],
                    "risk": rep.cum_risk.hex(),
                    "stop": rep.cum_stop.hex(),
                },
                sort_keys=True,
            )

        assert run() == run()


class TestSelectionOrdered:
    CFG = AuditConfig(alpha=0.1, p=0.75, rule=Rule.SB_BRAVO)

    def test_all_winner_sequence_stops_at_six(self):
        res = evaluate_selection_ordered([True] * 10, self.CFG)
        assert res.stopped_at == 6

    def test_all_loser_sequence_never_stops(self):
        res = evaluate_selection_ordered([False] * 100, self.CFG)
        assert res.stopped_at is None

    def test_stop_mid_round_consumes_full_round(self):
        # Greedy sequence that first reaches the per-draw threshold at 22,
        # inside the second 20-ballot round: the audit still draws all 40.
        seq = []
        k = 0
        for n in range(1, 23):
            kmin = bravo_kmin(n, 0.75, 0.1)
            if n == 22:
                take = True
            else:
                take = (k + 1) < kmin
            seq.append(take)
            k += take
        res = evaluate_selection_ordered(seq, self.CFG, schedule=RoundSchedule((20, 40, 60)))
        assert res.stopped_at == 22
        assert res.ballots_drawn == 40
        assert res.round_index == 1
        # No earlier prefix satisfied the rule.
        running = 0
        for n, take in enumerate(seq[:-1], start=1):
            running += take
            assert running < bravo_kmin(n, 0.75, 0.1)

    def test_empty_sequence_rejected(self):
        with pytest.raises(ValueError):
            evaluate_selection_ordered([], self.CFG)

    def test_kmin_trace_matches_line(self):
        res = evaluate_selection_ordered([True, False, True], self.CFG)
        assert res.kmin_trace == tuple(bravo_kmin(n, 0.75, 0.1) for n in (1, 2, 3))


class TestObservationValidation:
    def test_counts_must_balance(self):
        with pytest.raises(ValueError):
            RoundObservation(draws=10, winner_relevant=5, loser_relevant=4, irrelevant=2)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            RoundObservation(draws=1, winner_relevant=2, loser_relevant=-1)
