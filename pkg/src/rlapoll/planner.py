"""Round-size planning and stopping-probability tables.

First rounds of a fresh audit need no convolution machinery: the paired
distributions are plain binomials, so thresholds and stopping probabilities
come straight from binomial tail functions and stay cheap at any realistic
contest size.  Rounds after the first run through the exact
truncate-and-convolve propagation.  Contests too large even for binomial
planning (support beyond ~5e5) route through a Gaussian approximation and
are flagged as such.

A wrinkle worth knowing: the stopping probability of a round is *not*
monotone in the round size, because kmin climbs in integer steps.  Round
sizes returned here are conservative: the smallest n such that every size
in a trailing scan window also meets the target.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import bdtrc, ndtr

from .contest import ContestRecord
from .engine import AuditState
from .prob import convolve_round
from .rules import AuditConfig, BravoLine, Rule, kmin_for_round

__all__ = [
    "PlannerMethod",
    "PlannerResult",
    "PercentileRow",
    "asn",
    "expected_distinct",
    "fresh_round_kmin",
    "stop_prob_at",
    "next_round_size",
    "gaussian_round_size",
    "bravo_percentiles",
    "bravo_table",
    "first_round_table",
]

# Above this projected support the exact binomial path hands over to the
# Gaussian approximation.
EXACT_SUPPORT_LIMIT = 500_000

DEFAULT_QUANTILES = (0.25, 0.50, 0.75, 0.90, 0.99)


class PlannerMethod(enum.Enum):
    EXACT_CONVOLUTION = "exact-convolution"
    GAUSSIAN_APPROX = "gaussian-approx"


@dataclass(frozen=True)
class PlannerResult:
    """A recommended round size and what it buys.

    relevant_round_size counts winner+loser ballots (the statistical
    sample); scaled_draws inflates it by the contest's irrelevant-ballot
    ratio; expected_distinct discounts with-replacement repeats.
    """

    relevant_round_size: int
    scaled_draws: int
    expected_distinct: int
    achieved_stop_prob: float
    method: PlannerMethod


def asn(p: float, alpha: float) -> float:
    """Expected ballot-by-ballot sample size under the announced tally.

    Wald's expected-sample-number estimate for the one-sided test of a
    tie against winner fraction p:
    (ln(1/alpha) + z_w/2) / (p*z_w + (1-p)*z_l), z_w = ln 2p, z_l = ln 2(1-p).
    """
    if not 0.5 < p < 1.0:
        raise ValueError(f"p must be in (0.5, 1), got {p}")
    z_w = math.log(2.0 * p)
    z_l = math.log(2.0 * (1.0 - p))
    return (math.log(1.0 / alpha) + z_w / 2.0) / (p * z_w + (1.0 - p) * z_l)


def expected_distinct(draws: int, population: int) -> int:
    """Expected distinct ballots among `draws` with-replacement draws.

    round(N * (1 - (1 - 1/N)^d)); equals d to rounding when d << N.
    """
    if population < 1:
        raise ValueError(f"population must be >= 1, got {population}")
    if draws < 0:
        raise ValueError(f"draws must be >= 0, got {draws}")
    if draws == 0:
        return 0
    n = float(population)
    return round(n * -math.expm1(draws * math.log1p(-1.0 / n)))


# ---------------------------------------------------------------------------
# Fresh-round thresholds from binomial tails


def _fresh_tail_kmin(n: int, p: float, alpha: float) -> int:
    """Tail-ratio threshold for a first round of size n, binomial tails."""
    inv = 1.0 / alpha

    def satisfied(k: int) -> bool:
        r = float(bdtrc(k - 1, n, 0.5))
        s = float(bdtrc(k - 1, n, p))
        if r == 0.0:
            return s > 0.0
        return s / r >= inv

    # Cap the search below the float64 underflow zone of the alternative
    # tail; bins beyond it carry no stopping probability.
    hi = n if n <= 1000 else min(n, math.ceil(n * p + 20.0 * math.sqrt(n * p * (1.0 - p))))
    if not satisfied(hi):
        return n + 1
    lo = 0
    while lo < hi:
        mid = (lo + hi) // 2
        if satisfied(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def fresh_round_kmin(n: int, cfg: AuditConfig) -> int:
    """The configured rule's threshold for a first round of size n."""
    line = BravoLine.from_params(cfg.p, cfg.alpha)
    if cfg.rule is Rule.MINERVA:
        return _fresh_tail_kmin(n, cfg.p, cfg.alpha)
    if cfg.rule is Rule.ATHENA:
        k_tail = _fresh_tail_kmin(n, cfg.p, cfg.alpha)
        log_ratio = math.log(cfg.p / (1.0 - cfg.p))
        k_sigma = max(0, math.ceil(line.slope * n - math.log(cfg.delta) / log_ratio))
        return n + 1 if (k_tail > n or k_sigma > n) else max(k_tail, k_sigma)
    return line.kmin(n)


def _fresh_stop_prob(n: int, cfg: AuditConfig) -> float:
    kmin = fresh_round_kmin(n, cfg)
    if kmin > n:
        return 0.0
    return float(bdtrc(kmin - 1, n, cfg.p))


def stop_prob_at(n: int, prior_state: AuditState | None, cfg: AuditConfig) -> float:
    """Probability (under the announced tally) that a round of cumulative
    size n stops the audit, given the rounds already executed.

    Does not mutate prior_state: the propagation to n is hypothetical.
    """
    if prior_state is None or prior_state.rounds_executed == 0:
        if n < 1:
            raise ValueError(f"round size must be >= 1, got {n}")
        return _fresh_stop_prob(n, cfg)
    drawn = prior_state.relevant_drawn
    if n <= drawn:
        raise ValueError(f"cumulative size {n} not beyond the {drawn} already drawn")
    h0 = convolve_round(prior_state.h0, n - drawn)
    ha = convolve_round(prior_state.ha, n - drawn)
    kmin = kmin_for_round(h0, ha, cfg)
    return float(ha.tail(kmin)) if kmin <= ha.support_max else 0.0


def _sb_cumulative_stop(p: float, alpha: float, rho: float, hard_cap: int = 10_000_000) -> tuple[int, float]:
    """Smallest n whose ballot-by-ballot cumulative stopping mass reaches rho."""
    line = BravoLine.from_params(p, alpha)
    f = np.array([1.0])
    cum = 0.0
    n = 0
    while cum < rho:
        n += 1
        if n > hard_cap:
            raise RuntimeError(f"no ballot-by-ballot size below {hard_cap} reaches {rho}")
        g = np.empty(f.size + 1)
        g[0] = f[0] * (1.0 - p)
        if f.size > 1:
            g[1:-1] = f[1:] * (1.0 - p) + f[:-1] * p
        g[-1] = f[-1] * p
        kmin = math.ceil(line.slope * n + line.intercept)
        if kmin < g.size:
            cum += float(g[kmin:].sum())
            g = g[:kmin].copy()
        f = g
    return n, cum


def _conservative_scan(stop_at, rho: float, start: int, window: int | None) -> int:
    """Smallest n with stop_at(m) >= rho for every m in [n, n + W]."""
    n = max(1, start)
    guard = 0
    while stop_at(n) < rho:
        n += 1 if n < 100 else max(1, n // 50)
        guard += 1
        if guard > 10_000:
            raise RuntimeError(f"no round size found reaching stopping probability {rho}")
    while n > 1 and stop_at(n - 1) >= rho:
        n -= 1
    while True:
        w = window if window is not None else max(100, math.ceil(0.02 * n))
        failed = None
        for m in range(n, n + w + 1):
            if stop_at(m) < rho:
                failed = m
                break
        if failed is None:
            return n
        n = failed + 1
        while stop_at(n) < rho:
            n += 1


def _result(relevant: int, achieved: float, method: PlannerMethod, contest: ContestRecord | None) -> PlannerResult:
    if contest is None:
        scaled = relevant
        distinct = relevant
    else:
        scaled = math.ceil(relevant * contest.scale)
        distinct = expected_distinct(scaled, contest.total_ballots)
    return PlannerResult(
        relevant_round_size=relevant,
        scaled_draws=scaled,
        expected_distinct=distinct,
        achieved_stop_prob=achieved,
        method=method,
    )


def next_round_size(
    target: float,
    prior_state: AuditState | None,
    cfg: AuditConfig,
    contest: ContestRecord | None = None,
    window: int | None = None,
) -> PlannerResult:
    """Smallest (conservative) round size stopping with probability >= target.

    For selection-ordered planning the target is the cumulative
    ballot-by-ballot stopping probability, which is monotone, so no scan
    window applies.  Contest scaling is applied to the result only; the
    search itself runs on relevant ballots.
    """
    if not 0.0 < target < 1.0:
        raise ValueError(f"target stopping probability must be in (0, 1), got {target}")
    fresh = prior_state is None or prior_state.rounds_executed == 0
    if cfg.rule is Rule.SB_BRAVO:
        if not fresh:
            raise ValueError("selection-ordered planning is defined for the first round only")
        n, cum = _sb_cumulative_stop(cfg.p, cfg.alpha, target)
        return _result(n, cum, PlannerMethod.EXACT_CONVOLUTION, contest)
    if fresh:
        projected = gaussian_round_size(cfg.p, cfg.alpha, target, cfg.rule, cfg.delta, contest=None)
        if projected.relevant_round_size > EXACT_SUPPORT_LIMIT:
            return _result(
                projected.relevant_round_size,
                projected.achieved_stop_prob,
                PlannerMethod.GAUSSIAN_APPROX,
                contest,
            )
        start = max(1, int(projected.relevant_round_size * 0.5))
        n = _conservative_scan(lambda m: _fresh_stop_prob(m, cfg), target, start, window)
        return _result(n, _fresh_stop_prob(n, cfg), PlannerMethod.EXACT_CONVOLUTION, contest)
    # Mid-audit the meaningful target is conditional on having survived the
    # rounds so far: stop_prob_at returns the joint (survive-and-stop) tail,
    # which is bounded by the surviving mass, so normalize by it.
    drawn = prior_state.relevant_drawn
    surviving = prior_state.ha.total_mass()
    n = _conservative_scan(
        lambda m: stop_prob_at(m, prior_state, cfg) / surviving, target, drawn + 1, window
    )
    # relevant_round_size is the cumulative schedule entry n_j; scaled_draws
    # is the scaled increment still to be pulled.
    increment = n - drawn
    if contest is None:
        scaled, distinct = increment, increment
    else:
        scaled = math.ceil(increment * contest.scale)
        distinct = expected_distinct(scaled, contest.total_ballots)
    return PlannerResult(
        relevant_round_size=n,
        scaled_draws=scaled,
        expected_distinct=distinct,
        achieved_stop_prob=stop_prob_at(n, prior_state, cfg) / surviving,
        method=PlannerMethod.EXACT_CONVOLUTION,
    )


# ---------------------------------------------------------------------------
# Gaussian approximation for very large contests


def _norm_sf(x: float, mu: float, sd: float) -> float:
    return float(ndtr((mu - x) / sd))


def _gauss_stop(n: float, p: float, alpha: float, rule: Rule, delta: float) -> float:
    """Continuity-corrected normal estimate of the first-round stopping
    probability at (possibly fractional) round size n."""
    mu0, sd0 = n / 2.0, math.sqrt(n) / 2.0
    mua, sda = n * p, math.sqrt(n * p * (1.0 - p))
    line = BravoLine.from_params(p, alpha)
    if rule in (Rule.EOR_BRAVO, Rule.B2_BRAVO):
        kmin = line.slope * n + line.intercept
        return _norm_sf(kmin - 0.5, mua, sda)
    lo, hi = mu0, mua + 12.0 * sda
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        r = _norm_sf(mid - 0.5, mu0, sd0)
        s = _norm_sf(mid - 0.5, mua, sda)
        if r == 0.0 or s / r >= 1.0 / alpha:
            hi = mid
        else:
            lo = mid
    kmin = hi
    if rule is Rule.ATHENA:
        log_ratio = math.log(p / (1.0 - p))
        kmin = max(kmin, line.slope * n - math.log(delta) / log_ratio)
    return _norm_sf(kmin - 0.5, mua, sda)


def gaussian_round_size(
    p: float,
    alpha: float,
    rho: float,
    rule: Rule,
    delta: float = 1.0,
    contest: ContestRecord | None = None,
) -> PlannerResult:
    """Normal-approximation first-round size for a target stopping probability.

    Meant for contests whose exact-path support would exceed
    EXACT_SUPPORT_LIMIT; the result is flagged GAUSSIAN_APPROX.  Within a
    few percent of the exact path at moderate margins (see tests).
    """
    if rule is Rule.SB_BRAVO:
        raise ValueError("no Gaussian path for selection-ordered planning")
    if not 0.0 < rho < 1.0:
        raise ValueError(f"target stopping probability must be in (0, 1), got {rho}")
    lo, hi = 4.0, 1e10
    for _ in range(120):
        mid = math.sqrt(lo * hi)
        if _gauss_stop(mid, p, alpha, rule, delta) >= rho:
            hi = mid
        else:
            lo = mid
    n = math.ceil(hi)
    return _result(n, _gauss_stop(n, p, alpha, rule, delta), PlannerMethod.GAUSSIAN_APPROX, contest)


# ---------------------------------------------------------------------------
# Ballot-by-ballot stopping-time tables


@dataclass(frozen=True)
class PercentileRow:
    """Stopping-time quantiles of the ballot-by-ballot audit under the
    announced tally, distributions propagated out to `horizon` draws."""

    margin: float
    p: float
    alpha: float
    horizon: int
    quantiles: dict[float, int]
    expected_ballots: float
    asn: float
    residual_mass: float


def _b2_stopping_masses(p: float, alpha: float, horizon: int) -> tuple[np.ndarray, float]:
    """Per-draw stopping mass S_n under the announced tally for the
    ballot-by-ballot rule, n = 0..horizon, plus the residual mass."""
    line = BravoLine.from_params(p, alpha)
    f = np.array([1.0])
    masses = np.zeros(horizon + 1)
    for n in range(1, horizon + 1):
        g = np.empty(f.size + 1)
        g[0] = f[0] * (1.0 - p)
        if f.size > 1:
            g[1:-1] = f[1:] * (1.0 - p) + f[:-1] * p
        g[-1] = f[-1] * p
        kmin = math.ceil(line.slope * n + line.intercept)
        if kmin < g.size:
            masses[n] = float(g[kmin:].sum())
            g = g[:kmin].copy()
        f = g
    return masses, float(f.sum())


def bravo_percentiles(
    p: float,
    alpha: float,
    quantiles: tuple[float, ...] = DEFAULT_QUANTILES,
    horizon: int | None = None,
) -> PercentileRow:
    """Quantiles and expectation of the ballot-by-ballot stopping time.

    The propagation runs to `horizon` draws (default six times the
    expected sample number); the expectation charges the residual
    never-stopped-by-horizon mass the full horizon, i.e. it is
    E[min(T, horizon)].
    """
    expected_n = asn(p, alpha)
    if horizon is None:
        horizon = math.ceil(6.0 * expected_n)
    masses, residual = _b2_stopping_masses(p, alpha, horizon)
    cum = np.cumsum(masses)
    qs = {}
    for q in quantiles:
        idx = int(np.searchsorted(cum, q))
        qs[q] = idx if idx <= horizon else -1
    expected = float((np.arange(horizon + 1) * masses).sum() + horizon * residual)
    return PercentileRow(
        margin=2.0 * p - 1.0,
        p=p,
        alpha=alpha,
        horizon=horizon,
        quantiles=qs,
        expected_ballots=expected,
        asn=expected_n,
        residual_mass=residual,
    )


def bravo_table(
    margins: list[float],
    alpha: float = 0.1,
    quantiles: tuple[float, ...] = DEFAULT_QUANTILES,
) -> list[dict]:
    """Percentile rows for several margins, as flat dicts ready for CSV/JSON."""
    rows = []
    for margin in margins:
        row = bravo_percentiles((1.0 + margin) / 2.0, alpha, quantiles)
        flat = {"margin": margin, "alpha": alpha}
        for q in quantiles:
            flat[f"pct_{int(round(q * 100))}"] = row.quantiles[q]
        flat["expected_ballots"] = round(row.expected_ballots, 2)
        flat["asn"] = round(row.asn, 2)
        rows.append(flat)
    return rows


def first_round_table(
    contests: list[ContestRecord],
    alpha: float = 0.1,
    target: float = 0.9,
    delta: float = 1.0,
    rules: tuple[Rule, ...] = (Rule.EOR_BRAVO, Rule.ATHENA, Rule.SB_BRAVO),
    sb_margin_floor: float = 0.01,
) -> list[dict]:
    """First-round sizes per contest and rule, scaled draws and distinct counts.

    Selection-ordered sizes are skipped below sb_margin_floor (the
    ballot-by-ballot propagation grows quadratically as margins shrink).
    """
    rows = []
    for contest in sorted(contests, key=lambda c: c.name):
        row: dict = {"state": contest.name, "margin": round(contest.margin, 4)}
        for rule in rules:
            key = rule.value.replace("-", "_")
            if rule is Rule.SB_BRAVO and contest.margin < sb_margin_floor:
                for suffix in ("relevant", "draws", "distinct", "method"):
                    row[f"{key}_{suffix}"] = None
                continue
            cfg = AuditConfig(alpha=alpha, p=contest.p, rule=rule, delta=delta)
            res = next_round_size(target, None, cfg, contest=contest)
            row[f"{key}_relevant"] = res.relevant_round_size
            row[f"{key}_draws"] = res.scaled_draws
            row[f"{key}_distinct"] = res.expected_distinct
            row[f"{key}_method"] = res.method.value
        eor, athena, sb = (
            row.get("eor_bravo_draws"),
            row.get("athena_draws"),
            row.get("sb_bravo_draws"),
        )
        row["athena_to_eor"] = round(athena / eor, 4) if eor and athena else None
        row["athena_to_sb"] = round(athena / sb, 4) if sb and athena else None
        rows.append(row)
    return rows
