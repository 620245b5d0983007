"""Multi-round audit state machine.

An audit carries a paired pair of pmfs (null and alternative) forward
through rounds: each executed round convolves both by the round's relevant
draws, finds the rule's kmin, records the two removed tails as the round's
stopping probability S_j and risk R_j, truncates, and decides.

The risk-accounting identity that makes the tail-ratio rules risk-limiting
is enforced as an invariant: R_j <= alpha * S_j for every executed round,
hence cum_risk <= alpha * cum_stop <= alpha.

The round schedule must be fixed before the audit begins; the risk
guarantees are proven only for pre-determined schedules.  A round whose
observed relevant draws differ from the scheduled size is refused unless
the caller explicitly amends, which rebuilds the round at the actual size
and permanently marks the schedule as amended.
"""

from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field

from .prob import Hypothesis, TallyPmf, convolve_round, truncate_above
from .rules import (
    AuditConfig,
    Decision,
    Rule,
    StoppingEvaluation,
    bravo_kmin,
    evaluate_round,
    sigma,
)

__all__ = [
    "AuditError",
    "ScheduleViolation",
    "StateError",
    "RiskAccountingError",
    "RoundSchedule",
    "RoundObservation",
    "AuditStatus",
    "AuditState",
    "execute_round",
    "escalate",
    "SelectionOrderedResult",
    "evaluate_selection_ordered",
    "RiskReport",
    "risk_report",
]


class AuditError(Exception):
    pass


class ScheduleViolation(AuditError):
    """Observed draws are inconsistent with the pre-determined schedule."""


class StateError(AuditError):
    """Operation not valid in the audit's current status."""


class RiskAccountingError(AuditError):
    """A round broke R_j <= alpha * S_j; indicates an engine defect."""


@dataclass(frozen=True)
class RoundSchedule:
    """Strictly increasing cumulative relevant-draw counts n_1 < n_2 < ...

    version > 0 marks a schedule amended after the audit began; the
    risk-limiting guarantees are proven only for version 0.
    """

    sizes: tuple[int, ...]
    version: int = 0
    amended_from: tuple[int, ...] | None = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if not sizes:
            raise ValueError("schedule needs at least one round")
        if sizes[0] < 1:
            raise ValueError("first round size must be >= 1")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"round sizes must be strictly increasing: {sizes}")

    @classmethod
    def geometric(cls, first: int, multiplier: float, rounds: int) -> "RoundSchedule":
        """n_1 = first, each increment multiplier times the previous one."""
        if multiplier < 1.0:
            raise ValueError("multiplier must be >= 1")
        sizes = [first]
        step = float(first)
        for _ in range(rounds - 1):
            step *= multiplier
            sizes.append(sizes[-1] + max(1, round(step)))
        return cls(tuple(sizes))

    def amend(self, round_index: int, actual_size: int) -> "RoundSchedule":
        """Replace size at round_index with what was actually drawn.

        amended_from always keeps the original (version 0) sizes, so any
        chain of amendments stays traceable to the pre-determined plan.
        """
        sizes = list(self.sizes)
        sizes[round_index] = actual_size
        # Later rounds must stay strictly increasing past the new size.
        for i in range(round_index + 1, len(sizes)):
            if sizes[i] <= sizes[i - 1]:
                sizes[i] = sizes[i - 1] + 1
        original = self.amended_from if self.amended_from is not None else self.sizes
        return RoundSchedule(tuple(sizes), version=self.version + 1, amended_from=original)


@dataclass(frozen=True)
class RoundObservation:
    """Ballots drawn in one round, split by what was on them."""

    draws: int
    winner_relevant: int
    loser_relevant: int
    irrelevant: int = 0

    def __post_init__(self):
        parts = (self.winner_relevant, self.loser_relevant, self.irrelevant)
        if any(v < 0 for v in parts) or self.draws < 0:
            raise ValueError("ballot counts must be non-negative")
        if sum(parts) != self.draws:
            raise ValueError(
                f"winner + loser + irrelevant = {sum(parts)} != draws = {self.draws}"
            )

    @property
    def relevant(self) -> int:
        return self.winner_relevant + self.loser_relevant


class AuditStatus(enum.Enum):
    PLANNED = "planned"
    IN_PROGRESS = "in-progress"
    STOPPED_CORRECT = "stopped-correct"
    ESCALATED_HAND_COUNT = "escalated-hand-count"
    SCHEDULE_EXHAUSTED = "schedule-exhausted"


_TERMINAL = (AuditStatus.STOPPED_CORRECT, AuditStatus.ESCALATED_HAND_COUNT)


@dataclass
class AuditState:
    """Everything one audit has seen and decided so far.

    Single-writer: all mutation goes through execute_round / escalate, one
    round at a time.  Snapshots (copies) may be shared freely.
    """

    config: AuditConfig
    schedule: RoundSchedule
    h0: TallyPmf = field(repr=False, default=None)  # type: ignore[assignment]
    ha: TallyPmf = field(repr=False, default=None)  # type: ignore[assignment]
    rounds: list[tuple[RoundObservation, StoppingEvaluation]] = field(default_factory=list)
    cum_risk: float = 0.0
    cum_stop: float = 0.0
    status: AuditStatus = AuditStatus.PLANNED

    def __post_init__(self):
        if self.h0 is None:
            self.h0 = TallyPmf.fresh(Hypothesis.null())
        if self.ha is None:
            self.ha = TallyPmf.fresh(Hypothesis.alt(self.config.p))

    @property
    def rounds_executed(self) -> int:
        return len(self.rounds)

    @property
    def relevant_drawn(self) -> int:
        return self.h0.draws_total

    @property
    def winner_total(self) -> int:
        return sum(obs.winner_relevant for obs, _ in self.rounds)

    def snapshot(self) -> "AuditState":
        return copy.deepcopy(self)


def execute_round(
    state: AuditState, obs: RoundObservation, allow_amend: bool = False
) -> tuple[AuditState, StoppingEvaluation]:
    """Run one round of the audit in place.

    The cumulative relevant draws after obs must hit the next scheduled
    size exactly.  Real audits over- and under-pull; passing
    allow_amend=True accepts the actual count, rebuilds the round there,
    and flags the schedule as amended (the pre-determination premise of
    the risk guarantee no longer holds, which the caller must surface).
    """
    if state.status in _TERMINAL:
        raise StateError(f"audit already terminal ({state.status.value})")
    j = state.rounds_executed
    if j >= len(state.schedule.sizes):
        raise StateError("schedule exhausted; amend the schedule or escalate")
    scheduled = state.schedule.sizes[j]
    actual = state.relevant_drawn + obs.relevant
    if actual != scheduled:
        if not allow_amend:
            raise ScheduleViolation(
                f"round {j + 1} brings relevant draws to {actual}, schedule says {scheduled}; "
                "re-submit with allow_amend=True to rebuild at the actual size"
            )
        if obs.relevant < 1:
            raise ScheduleViolation("a round must contain at least one relevant ballot")
        state.schedule = state.schedule.amend(j, actual)

    new_relevant = obs.relevant
    h0 = convolve_round(state.h0, new_relevant)
    ha = convolve_round(state.ha, new_relevant)
    k_total = state.winner_total + obs.winner_relevant
    ev = evaluate_round(h0, ha, state.config, k_total)

    h0, risk_j = truncate_above(h0, ev.kmin)
    ha, stop_j = truncate_above(ha, ev.kmin)
    if stop_j > 0.0 and risk_j > state.config.alpha * stop_j * (1.0 + 1e-12):
        raise RiskAccountingError(
            f"round {j + 1}: R_j={risk_j} exceeds alpha*S_j={state.config.alpha * stop_j}"
        )

    state.h0, state.ha = h0, ha
    state.cum_risk += risk_j
    state.cum_stop += stop_j
    state.rounds.append((obs, ev))
    if ev.decision is Decision.CORRECT:
        state.status = AuditStatus.STOPPED_CORRECT
    elif state.rounds_executed == len(state.schedule.sizes):
        state.status = AuditStatus.SCHEDULE_EXHAUSTED
    else:
        state.status = AuditStatus.IN_PROGRESS
    return state, ev


def escalate(state: AuditState) -> AuditState:
    """Operator decision to proceed to a full hand count."""
    if state.status is AuditStatus.STOPPED_CORRECT:
        raise StateError("audit already confirmed the outcome")
    state.status = AuditStatus.ESCALATED_HAND_COUNT
    return state


@dataclass(frozen=True)
class SelectionOrderedResult:
    stopped_at: int | None
    ballots_drawn: int
    round_index: int | None
    kmin_trace: tuple[int, ...]


def evaluate_selection_ordered(
    sequence: list[bool] | tuple[bool, ...],
    cfg: AuditConfig,
    schedule: RoundSchedule | None = None,
) -> SelectionOrderedResult:
    """Apply the per-draw rule to every prefix of a relevant-ballot sequence.

    sequence holds one entry per relevant ballot in selection order, True
    for the announced winner.  Returns the first prefix length at which
    the cumulative winner count reaches the per-draw kmin, plus — when a
    schedule is given — the round that prefix fell in and the full round's
    ballot count (the audit always finishes the round it is in).
    """
    if len(sequence) == 0:
        raise ValueError("sequence must contain at least one ballot")
    line_kmins = []
    k = 0
    stopped_at = None
    for n, is_winner in enumerate(sequence, start=1):
        k += bool(is_winner)
        kmin = bravo_kmin(n, cfg.p, cfg.alpha)
        line_kmins.append(kmin)
        if stopped_at is None and k >= kmin:
            stopped_at = n
    if stopped_at is None:
        return SelectionOrderedResult(None, len(sequence), None, tuple(line_kmins))
    if schedule is None:
        return SelectionOrderedResult(stopped_at, stopped_at, None, tuple(line_kmins))
    for idx, size in enumerate(schedule.sizes):
        if stopped_at <= size:
            return SelectionOrderedResult(stopped_at, size, idx, tuple(line_kmins))
    return SelectionOrderedResult(stopped_at, schedule.sizes[-1], len(schedule.sizes) - 1, tuple(line_kmins))


@dataclass(frozen=True)
class RiskReport:
    """Per-round and cumulative stopping/risk accounting."""

    rows: tuple[dict, ...]
    cum_stop: float
    cum_risk: float
    alpha: float

    @property
    def within_budget(self) -> bool:
        return self.cum_risk <= self.alpha


def risk_report(state: AuditState) -> RiskReport:
    """Recompute each round's (n_j, kmin_j, S_j, R_j) from first principles.

    Replays the distribution propagation at the executed schedule, so the
    report is independent of the running totals kept on the state; the two
    are asserted to agree.  For tail-ratio rules the per-round inequality
    R_j <= alpha * S_j is checked and a violation raises.
    """
    cfg = state.config
    h0 = TallyPmf.fresh(Hypothesis.null())
    ha = TallyPmf.fresh(Hypothesis.alt(cfg.p))
    rows = []
    cum_s = 0.0
    cum_r = 0.0
    for j, (obs, ev) in enumerate(state.rounds):
        h0 = convolve_round(h0, obs.relevant)
        ha = convolve_round(ha, obs.relevant)
        h0, r_j = truncate_above(h0, ev.kmin)
        ha, s_j = truncate_above(ha, ev.kmin)
        cum_s += s_j
        cum_r += r_j
        if cfg.rule.uses_tails and s_j > 0.0 and r_j > cfg.alpha * s_j * (1.0 + 1e-12):
            raise RiskAccountingError(f"round {j + 1}: R_j={r_j} > alpha*S_j={cfg.alpha * s_j}")
        rows.append(
            {
                "round": j + 1,
                "n": h0.draws_total,
                "kmin": ev.kmin,
                "stop_prob": s_j,
                "risk": r_j,
                "risk_to_stop": (r_j / s_j) if s_j > 0.0 else math.nan,
                "decision": ev.decision.value,
            }
        )
    if abs(cum_r - state.cum_risk) > 1e-12 or abs(cum_s - state.cum_stop) > 1e-12:
        raise RiskAccountingError("replayed totals disagree with the state's running totals")
    return RiskReport(tuple(rows), cum_stop=cum_s, cum_risk=cum_r, alpha=cfg.alpha)


def likelihood_ratio_residual(state: AuditState) -> float:
    """Max relative deviation of ha/h0 per-bin ratios from sigma(k, p, n).

    The per-bin likelihood ratio of the propagated pair equals
    sigma(k, p, n_j) exactly in real arithmetic, whatever the truncation
    history; this measures how far float64 propagation has drifted.
    """
    n = state.relevant_drawn
    worst = 0.0
    for k in range(state.ha.support_max + 1):
        s = state.ha.mass[k]
        r = state.h0.mass[k]
        if s <= 0.0 or r <= 0.0:
            continue
        expect = sigma(k, state.config.p, n)
        worst = max(worst, abs(s / r - expect) / expect)
    return worst
