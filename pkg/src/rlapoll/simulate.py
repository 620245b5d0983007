"""Monte Carlo validation of the analytic stopping and risk numbers.

Each trial draws whole rounds of ballots with replacement from the
announced tallies (or from a tied version of them), counts the winner and
loser ballots among them, and applies the configured stopping rule at the
realized relevant sample sizes.  Because irrelevant ballots are part of
every draw, the relevant sample size varies trial to trial; thresholds are
computed per realized size and memoized.

Randomness is counter-based: trial t derives its own Philox stream from
(seed, t), so serial and parallel execution, or any re-run of a subset of
trials, reproduce identical draws.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .contest import ContestRecord
from .engine import RoundSchedule
from .prob import Hypothesis, TallyPmf, convolve_round, truncate_above
from .rules import AuditConfig, kmin_for_round

__all__ = [
    "TrueOutcome",
    "SimSpec",
    "SimResult",
    "simulate_batch",
    "ComparisonReport",
    "empirical_vs_analytic",
]


class TrueOutcome(enum.Enum):
    AS_ANNOUNCED = "as-announced"
    TIE = "tie"


@dataclass(frozen=True)
class SimSpec:
    """One simulation campaign.

    schedule holds cumulative *total* draw counts (ballots pulled,
    irrelevant included).  Under TIE the relevant fraction of the contest
    is kept but split evenly between winner and loser, the hardest wrong
    outcome; the stopping rule still tests against the announced p.
    """

    contest: ContestRecord
    cfg: AuditConfig
    schedule: RoundSchedule
    trials: int
    seed: int
    hypothesis: TrueOutcome = TrueOutcome.AS_ANNOUNCED

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.contest.p >= 1.0:
            raise ValueError("degenerate contest: announced winner fraction must be < 1")

    def draw_fractions(self) -> tuple[float, float, float]:
        c = self.contest
        f_w = c.winner_votes / c.total_ballots
        f_l = c.loser_votes / c.total_ballots
        if self.hypothesis is TrueOutcome.TIE:
            half = (f_w + f_l) / 2.0
            f_w = f_l = half
        return f_w, f_l, max(0.0, 1.0 - f_w - f_l)


@dataclass(frozen=True)
class SimResult:
    spec: SimSpec
    stop_rate: float
    per_round_rates: tuple[float, ...]
    mean_relevant_draws: float
    trials: int

    def stderr(self) -> float:
        r = self.stop_rate
        return math.sqrt(max(r * (1.0 - r), 1e-12) / self.trials)


class _KminCache:
    """Thresholds per realized cumulative relevant sizes (n_1, ..., n_j).

    The realized relevant schedule differs trial to trial, so thresholds
    are computed on demand by propagating the paired pmfs along the
    realized sizes, and memoized: simulations revisit the same handful of
    realized schedules constantly.
    """

    def __init__(self, cfg: AuditConfig):
        self.cfg = cfg
        self._pmfs: dict[tuple[int, ...], tuple] = {
            (): (TallyPmf.fresh(Hypothesis.null()), TallyPmf.fresh(Hypothesis.alt(cfg.p)))
        }
        self._kmin: dict[tuple[int, ...], int] = {}

    def kmin(self, realized: tuple[int, ...]) -> int:
        hit = self._kmin.get(realized)
        if hit is not None:
            return hit
        h0, ha = self._pmfs[realized[:-1]]
        prev = realized[-2] if len(realized) > 1 else 0
        h0 = convolve_round(h0, realized[-1] - prev)
        ha = convolve_round(ha, realized[-1] - prev)
        kmin = kmin_for_round(h0, ha, self.cfg)
        h0, _ = truncate_above(h0, kmin)
        ha, _ = truncate_above(ha, kmin)
        self._pmfs[realized] = (h0, ha)
        self._kmin[realized] = kmin
        return kmin


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(trial,))))


def simulate_batch(spec: SimSpec) -> SimResult:
    """Run the audit spec.trials times; deterministic given spec.seed."""
    f_w, f_l, f_irr = spec.draw_fractions()
    probs = [f_w, f_l, f_irr]
    sizes = spec.schedule.sizes
    cache = _KminCache(spec.cfg)
    stops_by_round = np.zeros(len(sizes), dtype=np.int64)
    relevant_total = 0
    for t in range(spec.trials):
        rng = _trial_rng(spec.seed, t)
        k = 0
        n_rel = 0
        realized: tuple[int, ...] = ()
        prev_total = 0
        for j, total in enumerate(sizes):
            w, l, _ = rng.multinomial(total - prev_total, probs)
            prev_total = total
            k += int(w)
            n_rel += int(w + l)
            relevant_total += int(w + l)
            prev_rel = realized[-1] if realized else 0
            if n_rel == prev_rel:
                # A round with zero relevant ballots cannot move the test.
                continue
            realized = realized + (n_rel,)
            if k >= cache.kmin(realized):
                stops_by_round[j] += 1
                break
    stopped = int(stops_by_round.sum())
    return SimResult(
        spec=spec,
        stop_rate=stopped / spec.trials,
        per_round_rates=tuple(stops_by_round / spec.trials),
        mean_relevant_draws=relevant_total / spec.trials,
        trials=spec.trials,
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Simulated versus analytic per-round stopping mass."""

    analytic_per_round: tuple[float, ...]
    simulated_per_round: tuple[float, ...]
    standard_errors: tuple[float, ...]
    deviations_in_se: tuple[float, ...]
    flagged_rounds: tuple[int, ...]
    stop_to_risk_ratio: float | None

    @property
    def consistent(self) -> bool:
        return not self.flagged_rounds


def _analytic_per_round(cfg: AuditConfig, relevant_sizes: tuple[int, ...], null: bool) -> tuple[float, ...]:
    h0 = TallyPmf.fresh(Hypothesis.null())
    ha = TallyPmf.fresh(Hypothesis.alt(cfg.p))
    out = []
    prev = 0
    for n in relevant_sizes:
        h0 = convolve_round(h0, n - prev)
        ha = convolve_round(ha, n - prev)
        prev = n
        kmin = kmin_for_round(h0, ha, cfg)
        h0, r_j = truncate_above(h0, kmin)
        ha, s_j = truncate_above(ha, kmin)
        out.append(r_j if null else s_j)
    return tuple(out)


def empirical_vs_analytic(spec: SimSpec, se_limit: float = 4.0) -> ComparisonReport:
    """Compare a simulation against the exact per-round stopping masses.

    The analytic masses are evaluated at the expected relevant sizes
    (scheduled draws times the relevant fraction); simulated rates are
    flagged when they deviate by more than se_limit binomial standard
    errors.  For the tail-ratio rules the first-round simulated
    stop-to-risk ratio must exceed 1/alpha, so both hypotheses are run.
    """
    if spec.trials < 1000:
        raise ValueError("need at least 1000 trials for a meaningful comparison")
    f_w, f_l, _ = spec.draw_fractions()
    f_rel = f_w + f_l  # identical under both hypotheses; the tie keeps it fixed
    relevant_sizes = tuple(max(1, round(total * f_rel)) for total in spec.schedule.sizes)
    analytic = _analytic_per_round(spec.cfg, relevant_sizes, null=spec.hypothesis is TrueOutcome.TIE)
    sim = simulate_batch(spec)
    ses = []
    devs = []
    flagged = []
    for j, (a, s) in enumerate(zip(analytic, sim.per_round_rates)):
        se = math.sqrt(max(a * (1.0 - a), 1.0 / spec.trials) / spec.trials)
        dev = abs(s - a) / se
        ses.append(se)
        devs.append(dev)
        if dev > se_limit:
            flagged.append(j)
    ratio = None
    if spec.cfg.rule.uses_tails:
        announced = simulate_batch(
            SimSpec(spec.contest, spec.cfg, spec.schedule, spec.trials, spec.seed, TrueOutcome.AS_ANNOUNCED)
        )
        tied = simulate_batch(
            SimSpec(spec.contest, spec.cfg, spec.schedule, spec.trials, spec.seed + 1, TrueOutcome.TIE)
        )
        if tied.per_round_rates[0] > 0.0:
            ratio = announced.per_round_rates[0] / tied.per_round_rates[0]
            if ratio <= 1.0 / spec.cfg.alpha:
                flagged.append(0)
        else:
            ratio = math.inf
    return ComparisonReport(
        analytic_per_round=analytic,
        simulated_per_round=sim.per_round_rates,
        standard_errors=tuple(ses),
        deviations_in_se=tuple(devs),
        flagged_rounds=tuple(sorted(set(flagged))),
        stop_to_risk_ratio=ratio,
    )
