"""Probability primitives: pmf/tail values, truncation, convolution."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom as scipy_binom

from rlapoll.prob import (
    Hypothesis,
    TallyPmf,
    binom_pmf,
    binom_pmf_vector,
    binom_tail,
    convolve_round,
    truncate_above,
)


def exact_pmf(k, n, q: Fraction) -> Fraction:
    return math.comb(n, k) * q**k * (1 - q) ** (n - k)


def exact_tail(k, n, q: Fraction) -> Fraction:
    return sum(exact_pmf(x, n, q) for x in range(k, n + 1))


class TestBinomPmf:
    def test_single_draw_symmetry(self):
        assert binom_pmf(1, 2, 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_all_losers(self):
        assert binom_pmf(0, 3, 0.75) == pytest.approx(0.015625, abs=1e-15)

    def test_worked_example_bin(self):
        # Exact rational: C(50,32) (3/4)^32 (1/4)^18
        want = float(exact_pmf(32, 50, Fraction(3, 4)))
        got = binom_pmf(32, 50, 0.75)
        assert got == pytest.approx(want, rel=1e-12)
        assert got == pytest.approx(0.0264, abs=5e-5)

    @pytest.mark.parametrize("n", [1, 7, 40, 200])
    @pytest.mark.parametrize("q", [0.0, 0.1, 0.5, 0.75, 1.0])
    def test_against_scipy(self, n, q):
        ks = range(n + 1)
        ours = [binom_pmf(k, n, q) for k in ks]
        ref = scipy_binom.pmf(list(ks), n, q)
        np.testing.assert_allclose(ours, ref, rtol=1e-12, atol=1e-300)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            binom_pmf(5, 4, 0.5)
        with pytest.raises(ValueError):
            binom_pmf(-1, 4, 0.5)
        with pytest.raises(ValueError):
            binom_pmf(2, 4, 1.5)

    def test_vector_matches_scalar(self):
        vec = binom_pmf_vector(60, 0.6)
        for k in (0, 1, 30, 59, 60):
            assert vec[k] == pytest.approx(binom_pmf(k, 60, 0.6), rel=1e-12)


class TestBinomTail:
    def test_worked_example_tails(self):
        want_a = float(exact_tail(32, 50, Fraction(3, 4)))
        want_0 = float(exact_tail(32, 50, Fraction(1, 2)))
        assert binom_tail(32, 50, 0.75) == pytest.approx(want_a, rel=1e-13)
        assert binom_tail(32, 50, 0.5) == pytest.approx(want_0, rel=1e-13)
        # The two shaded-tail figures for the worked 50-ballot round.
        assert binom_tail(32, 50, 0.75) == pytest.approx(0.9713, abs=5e-5)
        assert binom_tail(32, 50, 0.5) == pytest.approx(0.0325, abs=5e-5)

    def test_boundaries(self):
        assert binom_tail(0, 17, 0.3) == 1.0
        assert binom_tail(18, 17, 0.3) == 0.0

    @pytest.mark.parametrize("n", [3, 29, 100, 4000, 5000, 250_000])
    def test_against_scipy_sf(self, n):
        # Deep tails (~1e-280) differ between special-function implementations
        # at the 1e-10 relative level; useful magnitudes agree far tighter.
        rel = 1e-11 if n <= 5000 else 1e-9
        for q in (0.3, 0.5, 0.504, 0.75):
            for k in (0, 1, n // 3, n // 2, (3 * n) // 4, n):
                ref = float(scipy_binom.sf(k - 1, n, q))
                assert binom_tail(k, n, q) == pytest.approx(ref, rel=rel, abs=1e-300)

    @given(
        n=st.integers(min_value=1, max_value=300),
        q=st.floats(min_value=0.01, max_value=0.99),
    )
    @settings(max_examples=60, deadline=None)
    def test_tail_non_increasing(self, n, q):
        tails = [binom_tail(k, n, q) for k in range(n + 2)]
        assert all(a >= b for a, b in zip(tails, tails[1:]))

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            binom_tail(7, 5, 0.5)
        with pytest.raises(ValueError):
            binom_tail(1, 5, -0.1)


@pytest.fixture
def round_one_pair():
    h0 = convolve_round(TallyPmf.fresh(Hypothesis.null()), 50)
    ha = convolve_round(TallyPmf.fresh(Hypothesis.alt(0.75)), 50)
    return h0, ha


class TestTruncate:
    def test_noop_above_support(self, round_one_pair):
        _, ha = round_one_pair
        out, removed = truncate_above(ha, ha.support_max + 1)
        assert removed == 0.0
        assert out.support_max == ha.support_max
        np.testing.assert_array_equal(out.mass, ha.mass)

    def test_worked_example_supports(self, round_one_pair):
        _, ha = round_one_pair
        # Per-draw rule threshold 34 leaves counts 0..33; tail rule's 31 leaves 0..30.
        bravo_trunc, _ = truncate_above(ha, 34)
        assert bravo_trunc.support_max == 33
        minerva_trunc, _ = truncate_above(ha, 31)
        assert minerva_trunc.support_max == 30

    def test_removed_equals_tail(self, round_one_pair):
        h0, _ = round_one_pair
        for kmin in (0, 10, 25, 50):
            out, removed = truncate_above(h0, kmin)
            assert removed == pytest.approx(float(exact_tail(kmin, 50, Fraction(1, 2))), rel=1e-12)
            assert out.total_mass() + removed == pytest.approx(1.0, abs=1e-14)

    def test_mass_is_immutable(self, round_one_pair):
        h0, _ = round_one_pair
        with pytest.raises(ValueError):
            h0.mass[0] = 1.0


class TestConvolve:
    def test_support_growth_after_truncation(self, round_one_pair):
        _, ha = round_one_pair
        bravo_trunc, _ = truncate_above(ha, 34)
        assert convolve_round(bravo_trunc, 50).support_max == 83
        minerva_trunc, _ = truncate_above(ha, 31)
        assert convolve_round(minerva_trunc, 50).support_max == 80

    def test_single_draw_recurrence(self, round_one_pair):
        h0, _ = round_one_pair
        trunc, _ = truncate_above(h0, 26)
        out = convolve_round(trunc, 1)
        f = trunc.mass
        q = 0.5
        assert out.mass[0] == pytest.approx(f[0] * (1 - q), rel=1e-14)
        for k in range(1, len(f)):
            assert out.mass[k] == pytest.approx(f[k] * (1 - q) + f[k - 1] * q, rel=1e-13)
        assert out.mass[len(f)] == pytest.approx(f[-1] * q, rel=1e-14)

    def test_direct_formula_equivalence(self):
        # g(k) = sum over k1 in [max(0, k-d), min(kmin-1, k)] of f(k1) * pmf(k-k1)
        ha = convolve_round(TallyPmf.fresh(Hypothesis.alt(0.75)), 50)
        trunc, _ = truncate_above(ha, 31)
        d = 50
        out = convolve_round(trunc, d)
        for k in (0, 17, 40, 63, 80):
            lo = max(0, k - d)
            hi = min(30, k)
            want = math.fsum(
                trunc.mass[k1] * binom_pmf(k - k1, d, 0.75) for k1 in range(lo, hi + 1)
            )
            assert out.mass[k] == pytest.approx(want, rel=1e-12, abs=1e-300)

    @given(
        draws=st.integers(min_value=1, max_value=60),
        kmin=st.integers(min_value=1, max_value=40),
        extra=st.integers(min_value=1, max_value=60),
        p=st.floats(min_value=0.5, max_value=0.95),
    )
    @settings(max_examples=60, deadline=None)
    def test_mass_conservation(self, draws, kmin, extra, p):
        pmf = convolve_round(TallyPmf.fresh(Hypothesis.alt(p)), draws)
        trunc, removed = truncate_above(pmf, kmin)
        before = trunc.total_mass()
        after = convolve_round(trunc, extra).total_mass()
        assert after == pytest.approx(before, rel=1e-12)
        assert before + removed == pytest.approx(1.0, rel=1e-12)

    def test_draws_accumulate(self, round_one_pair):
        h0, _ = round_one_pair
        assert convolve_round(h0, 25).draws_total == 75

    def test_zero_draws_rejected(self, round_one_pair):
        h0, _ = round_one_pair
        with pytest.raises(ValueError):
            convolve_round(h0, 0)

    def test_fft_path_matches_direct(self, round_one_pair):
        h0, _ = round_one_pair
        trunc, _ = truncate_above(h0, 26)
        direct = convolve_round(trunc, 80, use_fft=False)
        fft = convolve_round(trunc, 80, use_fft=True)
        np.testing.assert_allclose(fft.mass, direct.mass, rtol=1e-9, atol=1e-16)


class TestHypothesis:
    def test_null_is_exactly_half(self):
        assert Hypothesis.null().q == 0.5
        with pytest.raises(ValueError):
            Hypothesis(0.6, True)

    def test_alt_range(self):
        with pytest.raises(ValueError):
            Hypothesis.alt(1.0)
        assert Hypothesis.alt(0.75).q == 0.75
