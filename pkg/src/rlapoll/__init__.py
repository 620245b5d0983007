"""Round-by-round risk-limiting ballot-polling audits.

Exact stopping rules (per-draw likelihood ratio, tail ratio, and the
combined rule), distribution propagation by truncate-and-convolve,
round-size planning, Monte Carlo validation, and an operational surface
(sessions, CLI, HTTP service) for running live audits.
"""

from .contest import ContestRecord, DataError, ingest_2016_dataset, load_bundled_2016
from .engine import (
    AuditState,
    AuditStatus,
    RoundObservation,
    RoundSchedule,
    ScheduleViolation,
    StateError,
    escalate,
    evaluate_selection_ordered,
    execute_round,
    risk_report,
)
from .planner import (
    PlannerMethod,
    PlannerResult,
    asn,
    bravo_percentiles,
    expected_distinct,
    gaussian_round_size,
    next_round_size,
    stop_prob_at,
)
from .prob import Hypothesis, TallyPmf, binom_pmf, binom_tail, convolve_round, truncate_above
from .rules import (
    AuditConfig,
    BravoLine,
    Decision,
    Rule,
    StoppingEvaluation,
    athena_kmin,
    bravo_kmin,
    minerva_kmin,
    sigma,
    tail_ratio,
)
from .simulate import SimSpec, TrueOutcome, empirical_vs_analytic, simulate_batch

__version__ = "0.1.0"

__all__ = [
    "AuditConfig",
    "AuditState",
    "AuditStatus",
    "BravoLine",
    "ContestRecord",
    "DataError",
    "Decision",
    "Hypothesis",
    "PlannerMethod",
    "PlannerResult",
    "RoundObservation",
    "RoundSchedule",
    "Rule",
    "ScheduleViolation",
    "SimSpec",
    "StateError",
    "StoppingEvaluation",
    "TallyPmf",
    "TrueOutcome",
    "asn",
    "athena_kmin",
    "binom_pmf",
    "binom_tail",
    "bravo_kmin",
    "bravo_percentiles",
    "convolve_round",
    "empirical_vs_analytic",
    "escalate",
    "evaluate_selection_ordered",
    "execute_round",
    "expected_distinct",
    "gaussian_round_size",
    "ingest_2016_dataset",
    "load_bundled_2016",
    "minerva_kmin",
    "next_round_size",
    "risk_report",
    "sigma",
    "simulate_batch",
    "stop_prob_at",
    "tail_ratio",
    "truncate_above",
]
