"""Stopping rules for ballot-polling audits.

Three families of rules share one structure: each round has a minimum
winner count kmin, and the round's sample confirms the outcome iff the
observed winner count reaches it.

* The per-draw likelihood-ratio rule compares
  sigma(k, p, n) = p^k (1-p)^(n-k) / (1/2)^n against 1/alpha.  Its kmin is
  the discretized line ceil(m*n + c).
* The tail-ratio rule compares the ratio of the upper tails of the paired
  alternative/null pmfs against 1/alpha.
* The combined rule takes the tail-ratio threshold and additionally
  requires sigma(k, p, n) >= 1/delta, i.e. the sample itself must be at
  least 1/delta times as likely under the announced outcome as under a
  tie.

Ratio comparisons are exact >= on float64, with no epsilon: integer kmin
outputs make any boundary sensitivity visible instead of hiding it.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .prob import TallyPmf

__all__ = [
    "Rule",
    "AuditConfig",
    "BravoLine",
    "Decision",
    "StoppingEvaluation",
    "sigma",
    "bravo_kmin",
    "tail_ratio",
    "tail_ratio_curve",
    "minerva_kmin",
    "athena_kmin",
    "kmin_for_round",
    "evaluate_round",
]


class Rule(enum.Enum):
    B2_BRAVO = "b2-bravo"
    EOR_BRAVO = "eor-bravo"
    SB_BRAVO = "sb-bravo"
    MINERVA = "minerva"
    ATHENA = "athena"

    @property
    def uses_tails(self) -> bool:
        return self in (Rule.MINERVA, Rule.ATHENA)


@dataclass(frozen=True)
class AuditConfig:
    """Parameters fixed for the lifetime of one audit.

    alpha is the risk limit, p the announced winner fraction among the
    relevant (winner + loser) ballots, and delta the lower bound parameter
    of the combined rule (ignored by the others).  delta < alpha makes the
    likelihood condition stricter than the risk limit itself, which is
    almost never wanted; it is refused unless allow_small_delta is set.
    """

    alpha: float
    p: float
    rule: Rule
    delta: float = 1.0
    allow_small_delta: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.5 < self.p < 1.0:
            raise ValueError(f"announced winner fraction must be in (0.5, 1), got {self.p}")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.rule is Rule.ATHENA and self.delta < self.alpha:
            if not self.allow_small_delta:
                raise ValueError(
                    f"delta={self.delta} below alpha={self.alpha} makes the combined rule "
                    "stricter than the risk limit; pass allow_small_delta=True to override"
                )
            warnings.warn(
                f"delta={self.delta} < alpha={self.alpha}: the likelihood-ratio bound "
                "now dominates the stopping condition",
                stacklevel=2,
            )


@dataclass(frozen=True)
class BravoLine:
    """kmin(n) = ceil(slope * n + intercept) for the likelihood-ratio rule."""

    slope: float
    intercept: float

    @classmethod
    def from_params(cls, p: float, alpha: float) -> "BravoLine":
        log_ratio = math.log(p / (1.0 - p))
        return cls(
            slope=math.log(0.5 / (1.0 - p)) / log_ratio,
            intercept=-math.log(alpha) / log_ratio,
        )

    def kmin(self, n: int) -> int:
        k = math.ceil(self.slope * n + self.intercept)
        return k if k <= n else n + 1


class Decision(enum.Enum):
    CORRECT = "correct"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class StoppingEvaluation:
    """Result of testing one round's stopping condition at the observed count.

    kmin uses the sentinel n + 1 when no count could stop the round.
    ratio_at_k is the governing ratio (sigma for the per-draw rules, the
    tail ratio otherwise) evaluated at the observed k; p_value_analog is
    its reciprocal clamped to [0, 1].  For rounds after the first this is
    reported as a diagnostic, not a calibrated p-value.
    """

    kmin: int
    ratio_at_k: float
    sigma_at_k: float
    decision: Decision
    p_value_analog: float


def sigma(k: int, p: float, n: int) -> float:
    """Likelihood ratio p^k (1-p)^(n-k) / (1/2)^n, via log space.

    Strictly increasing in k for p > 0.5; sigma(0, p, 0) = 1 for the empty
    sample.
    """
    if k < 0 or k > n:
        raise ValueError(f"winner count {k} outside [0, {n}]")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    return math.exp(k * math.log(2.0 * p) + (n - k) * math.log(2.0 * (1.0 - p)))


def bravo_kmin(n: int, p: float, alpha: float) -> int:
    """Smallest k with sigma(k, p, n) >= 1/alpha, or the sentinel n + 1."""
    if n < 1:
        raise ValueError(f"draw count must be >= 1, got {n}")
    return BravoLine.from_params(p, alpha).kmin(n)


def _check_pair(h0: TallyPmf, ha: TallyPmf) -> None:
    if h0.draws_total != ha.draws_total or h0.support_max != ha.support_max:
        raise ValueError(
            "pmf pair out of step: "
            f"draws {h0.draws_total}/{ha.draws_total}, "
            f"support {h0.support_max}/{ha.support_max}"
        )
    if not h0.hypothesis.is_null or ha.hypothesis.is_null:
        raise ValueError("tail_ratio expects (null pmf, alternative pmf)")


def tail_ratio(h0: TallyPmf, ha: TallyPmf, k: int) -> float:
    """Upper-tail ratio S(k)/R(k) of the paired pmfs at count k.

    Returns +inf when the null tail is zero but the alternative tail is
    not (the null cannot produce the observation at all), and NaN when
    both tails are zero.
    """
    _check_pair(h0, ha)
    if k < 0 or k > h0.support_max + 1:
        raise ValueError(f"k={k} outside [0, {h0.support_max + 1}]")
    s = ha.tail(k)
    r = h0.tail(k)
    if r == 0.0:
        return math.inf if s > 0.0 else math.nan
    return s / r


def _upper_tails(mass: np.ndarray) -> np.ndarray:
    return np.cumsum(mass[::-1])[::-1]


def tail_ratio_curve(h0: TallyPmf, ha: TallyPmf) -> np.ndarray:
    """tail_ratio at every k in 0..support_max, as one vectorized pass."""
    _check_pair(h0, ha)
    s = _upper_tails(ha.mass)
    r = _upper_tails(h0.mass)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0.0, s / r, np.where(s > 0.0, np.inf, np.nan))


def minerva_kmin(h0: TallyPmf, ha: TallyPmf, alpha: float) -> int:
    """Smallest k whose tail ratio reaches 1/alpha; sentinel n + 1 if none.

    The ratio is non-decreasing in k over the bins that carry alternative
    mass, so the first satisfying index is the threshold.  Bins beyond the
    last alternative-tail mass (both tails zero, possible in float64 for
    very large rounds) cannot carry stopping probability and are excluded.
    """
    _check_pair(h0, ha)
    s = _upper_tails(ha.mass)
    r = _upper_tails(h0.mass)
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = np.where(r > 0.0, s / r >= 1.0 / alpha, s > 0.0)
    idx = np.nonzero(ok)[0]
    if idx.size == 0:
        return h0.draws_total + 1
    return int(idx[0])


def athena_kmin(h0: TallyPmf, ha: TallyPmf, cfg: AuditConfig) -> int:
    """Combined-rule threshold: tail-ratio kmin raised to the likelihood bound.

    The second condition sigma(k, p, n) >= 1/delta is itself a discretized
    line (the alpha -> delta substitution in the per-draw rule), so the
    threshold is the max of the two.  Sentinel n + 1 when either side is
    unsatisfiable.
    """
    n = h0.draws_total
    k_tail = minerva_kmin(h0, ha, cfg.alpha)
    log_ratio = math.log(cfg.p / (1.0 - cfg.p))
    k_sigma = math.ceil(
        math.log(0.5 / (1.0 - cfg.p)) / log_ratio * n - math.log(cfg.delta) / log_ratio
    )
    k_sigma = max(k_sigma, 0)
    if k_tail > n or k_sigma > n:
        return n + 1
    return max(k_tail, k_sigma)


def kmin_for_round(h0: TallyPmf, ha: TallyPmf, cfg: AuditConfig) -> int:
    """The configured rule's threshold for the current (post-draw) pmf pair."""
    if cfg.rule is Rule.MINERVA:
        return minerva_kmin(h0, ha, cfg.alpha)
    if cfg.rule is Rule.ATHENA:
        return athena_kmin(h0, ha, cfg)
    return bravo_kmin(h0.draws_total, cfg.p, cfg.alpha)


def evaluate_round(h0: TallyPmf, ha: TallyPmf, cfg: AuditConfig, k_observed: int) -> StoppingEvaluation:
    """Apply the configured rule to an observed winner count."""
    n = h0.draws_total
    if k_observed < 0 or k_observed > n:
        raise ValueError(f"observed winner count {k_observed} outside [0, {n}]")
    kmin = kmin_for_round(h0, ha, cfg)
    sig = sigma(k_observed, cfg.p, n)
    if cfg.rule.uses_tails:
        ratio = tail_ratio(h0, ha, min(k_observed, h0.support_max + 1))
    else:
        ratio = sig
    decision = Decision.CORRECT if k_observed >= kmin else Decision.UNDETERMINED
    if math.isnan(ratio):
        p_analog = math.nan
    elif math.isinf(ratio):
        p_analog = 0.0
    else:
        p_analog = min(1.0, 1.0 / ratio) if ratio > 0 else 1.0
    return StoppingEvaluation(
        kmin=kmin,
        ratio_at_k=ratio,
        sigma_at_k=sig,
        decision=decision,
        p_value_analog=p_analog,
    )
