"""Exact probability primitives for round-by-round ballot-polling audits.

The number of winner ballots seen so far in an audit is tracked as a dense
probability mass function over counts 0..support_max.  Between rounds the
mass at and above the round's decision threshold is zeroed ("lopped off"),
so the pmf is in general sub-normalized; the removed tail is exactly the
probability that the audit stopped in that round.  Drawing the next round
convolves the truncated pmf with the binomial pmf of the new draws.

All sampling is with replacement, so draw outcomes are i.i.d. Bernoulli
with success probability 0.5 under the null (tied election) and p under
the alternative (election as announced).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import bdtrc, gammaln

__all__ = [
    "Hypothesis",
    "TallyPmf",
    "binom_pmf",
    "binom_pmf_vector",
    "binom_tail",
    "truncate_above",
    "convolve_round",
]

# Largest n for which binom_tail uses the explicit compensated summation;
# above this the regularized incomplete beta function is used instead.
_TAIL_SUM_LIMIT = 4096


@dataclass(frozen=True)
class Hypothesis:
    """One side of the audit's binary hypothesis test.

    ``null()`` is the hardest-to-detect wrong outcome, a tied election, and
    always draws winner ballots with probability exactly 0.5.  ``alt(p)``
    is the election as announced, with winner fraction p among the ballots
    relevant to the audited pair.
    """

    q: float
    is_null: bool

    @classmethod
    def null(cls) -> "Hypothesis":
        return cls(0.5, True)

    @classmethod
    def alt(cls, p: float) -> "Hypothesis":
        if not 0.0 < p < 1.0:
            raise ValueError(f"winner fraction must be in (0, 1), got {p}")
        return cls(float(p), False)

    def __post_init__(self):
        if self.is_null and self.q != 0.5:
            raise ValueError("null hypothesis draws at probability exactly 0.5")


@dataclass(frozen=True)
class TallyPmf:
    """Probability mass over winner-ballot counts under one hypothesis.

    ``mass[k]`` is the probability of having seen exactly k winner ballots
    after ``draws_total`` draws *and* not having satisfied the stopping
    condition in any earlier round.  After truncation the total mass is
    below 1 by exactly the stopping/risk mass removed so far.
    """

    draws_total: int
    mass: np.ndarray = field(repr=False)
    hypothesis: Hypothesis

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=np.float64)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("mass must be a non-empty 1-d array")
        if m.size - 1 > self.draws_total:
            raise ValueError("support cannot exceed the number of draws")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "mass", m)

    @classmethod
    def fresh(cls, hypothesis: Hypothesis) -> "TallyPmf":
        """The point mass at zero winner ballots, before any draws."""
        return cls(0, np.array([1.0]), hypothesis)

    @property
    def support_max(self) -> int:
        return self.mass.size - 1

    def total_mass(self) -> float:
        return float(math.fsum(self.mass))

    def tail(self, k: int) -> float:
        """Mass at counts >= k, summed smallest-addends-first."""
        if k < 0:
            raise ValueError(f"k must be non-negative, got {k}")
        if k > self.support_max:
            return 0.0
        return float(math.fsum(self.mass[k:][::-1]))


def _check_binom_args(k: int, n: int, q: float) -> None:
    if n < 0:
        raise ValueError(f"draw count must be non-negative, got {n}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"success probability must be in [0, 1], got {q}")
    if k < 0 or k > n:
        raise ValueError(f"winner count {k} outside [0, {n}]")


def binom_pmf(k: int, n: int, q: float) -> float:
    """P[Binomial(n, q) = k], computed in log space for stability."""
    _check_binom_args(k, n, q)
    if q == 0.0:
        return 1.0 if k == 0 else 0.0
    if q == 1.0:
        return 1.0 if k == n else 0.0
    log_c = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return math.exp(log_c + k * math.log(q) + (n - k) * math.log1p(-q))


def binom_pmf_vector(n: int, q: float) -> np.ndarray:
    """The full pmf of Binomial(n, q) as a dense array of length n + 1."""
    if n < 0:
        raise ValueError(f"draw count must be non-negative, got {n}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"success probability must be in [0, 1], got {q}")
    if q == 0.0 or q == 1.0:
        out = np.zeros(n + 1)
        out[n if q == 1.0 else 0] = 1.0
        return out
    k = np.arange(n + 1)
    log_c = gammaln(n + 1) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    return np.exp(log_c + k * math.log(q) + (n - k) * math.log1p(-q))


def binom_tail(k: int, n: int, q: float) -> float:
    """P[Binomial(n, q) >= k]; tail(0) = 1 and tail(n + 1) = 0.

    For moderate n the tail is summed term by term from x = n inward so
    the smallest addends accumulate first, with Kahan compensation.  For
    large n the regularized incomplete beta function is used; the two
    paths agree to ~1e-14 relative on their overlap.
    """
    if k < 0 or k > n + 1:
        raise ValueError(f"winner count {k} outside [0, {n + 1}]")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"success probability must be in [0, 1], got {q}")
    if k == 0:
        return 1.0
    if k == n + 1:
        return 0.0
    if n > _TAIL_SUM_LIMIT:
        return float(bdtrc(k - 1, n, q))
    total = 0.0
    comp = 0.0
    for x in range(n, k - 1, -1):
        y = binom_pmf(x, n, q) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return min(total, 1.0)


def truncate_above(pmf: TallyPmf, kmin: int) -> tuple[TallyPmf, float]:
    """Zero all mass at counts >= kmin, returning (pmf, removed mass).

    The removed mass is the round's stopping probability (alternative) or
    risk (null) when kmin is the round's decision threshold.  kmin may be
    support_max + 1 or larger, in which case nothing is removed.
    """
    if kmin < 0:
        raise ValueError(f"kmin must be non-negative, got {kmin}")
    if kmin > pmf.support_max:
        return pmf, 0.0
    removed = pmf.tail(kmin)
    if kmin == 0:
        # Fully lopped: keep an explicit zero bin so the support stays valid.
        return TallyPmf(pmf.draws_total, np.zeros(1), pmf.hypothesis), removed
    return TallyPmf(pmf.draws_total, pmf.mass[:kmin], pmf.hypothesis), removed


def convolve_round(pmf: TallyPmf, new_draws: int, use_fft: bool = False) -> TallyPmf:
    """Distribution of the winner count after drawing new_draws more ballots.

    g(k) = sum over k1 of f(k1) * P[Binomial(new_draws, q) = k - k1], with q
    taken from the pmf's hypothesis.  The support grows by new_draws and
    the total mass is preserved (to well within 1e-12 relative).

    The direct product-sum is the default; ``use_fft`` switches to an FFT
    convolution that must (and does, see tests) agree to 1e-9 relative.
    """
    if new_draws < 1:
        raise ValueError(f"new_draws must be >= 1, got {new_draws}")
    kernel = binom_pmf_vector(new_draws, pmf.hypothesis.q)
    if use_fft:
        from scipy.signal import fftconvolve

        out = fftconvolve(pmf.mass, kernel)
        out = np.clip(out, 0.0, None)
    else:
        out = np.convolve(pmf.mass, kernel)
    return TallyPmf(pmf.draws_total + new_draws, out, pmf.hypothesis)
