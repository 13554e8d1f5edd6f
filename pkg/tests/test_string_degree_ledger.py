import itertools
import warnings
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from closed_geodesics import index_spectrum as isp
from closed_geodesics import string_degree_ledger as sdl
from closed_geodesics.errors import (InsufficientHorizonError, MalformedHypothesisError,
                                     PreconditionError)

H, C = sdl.Kind.HOMOLOGY, sdl.Kind.COHOMOLOGY


def sphere_hyp(M=6):
    return sdl.SpectrumHypothesis(2, [2 * m - 1 for m in range(1, M + 1)], [2] * M)


class TestDegreeMaps:
    def test_cs_examples(self):
        for n in range(1, 8):
            assert sdl.cs_degree(n, n, n) == n
            assert sdl.cs_degree(n, 5, n) == 5

    @pytest.mark.parametrize("i, j, k, n", list(itertools.product(range(4), range(4), range(4), range(1, 4))))
    def test_cs_associative(self, i, j, k, n):
        assert sdl.cs_degree(sdl.cs_degree(i, j, n), k, n) == sdl.cs_degree(i, sdl.cs_degree(j, k, n), n)

    def test_gh_examples(self):
        assert sdl.gh_degree(0, 0, 1) == 0
        assert sdl.gh_degree(1, 1, 2) == 3
        assert all(sdl.gh_degree(i, j, 3) == sdl.gh_degree(j, i, 3) for i in range(5) for j in range(5))

    def test_power_examples(self):
        assert sdl.cs_power_degree(4, 3, 2) == 8 == sdl.cs_degree(sdl.cs_degree(4, 4, 2), 4, 2)
        assert sdl.gh_power_degree(1, 4, 2) == 7
        assert sdl.cs_power_degree(7, 1, 3) == sdl.gh_power_degree(7, 1, 3) == 7

    def test_fold_exhaustive(self):
        for kind, m, j, n in itertools.product(sdl.Kind, range(1, 11), range(21), range(1, 7)):
            assert sdl.power_degree(kind, j, m, n) == sdl.fold_degree(kind, j, m, n)

    @pytest.mark.parametrize("m", [0, -2, 1.5])
    def test_invalid_power(self, m):
        with pytest.raises(ValueError):
            sdl.cs_power_degree(3, m, 2)

    def test_kind_from_string(self):
        assert sdl.power_degree("cohomology", 1, 4, 2) == 7


class TestDegreeClass:
    def test_levels_add(self):
        x = sdl.DegreeClass(3, Fraction(1, 2))
        y = sdl.DegreeClass(4, Fraction(2, 3))
        z = sdl.product(x, y, 2)
        assert (z.degree, z.level) == (5, Fraction(7, 6))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 30), st.integers(0, 30), st.fractions(0, 10), st.fractions(0, 10),
           st.integers(1, 6), st.sampled_from(list(sdl.Kind)))
    def test_level_additivity(self, i, j, a, b, n, kind):
        assume(a > 0 and b > 0)
        assume(kind is C or i + j >= n)
        z = sdl.product(sdl.DegreeClass(i, a, kind), sdl.DegreeClass(j, b, kind), n)
        assert z.level == a + b
        op = sdl.cs_degree if kind is H else sdl.gh_degree
        assert z.degree == op(i, j, n)

    def test_negative_degree_vanishes(self):
        with pytest.raises(ValueError, match="vanishes"):
            sdl.product(sdl.DegreeClass(0, 1), sdl.DegreeClass(1, 1), 2)

    def test_power_level(self):
        z = sdl.power(sdl.DegreeClass(1, 2, C), 4, 2)
        assert (z.degree, z.level) == (7, 8)

    def test_level_zero_flagged(self):
        with pytest.warns(sdl.LevelZeroWarning):
            z = sdl.product(sdl.DegreeClass(2, 0), sdl.DegreeClass(2, 1), 2)
        assert z.level == 1

    def test_positive_levels_do_not_warn(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            sdl.product(sdl.DegreeClass(2, 1), sdl.DegreeClass(2, 1), 2)

    def test_mixed_kinds(self):
        with pytest.raises(ValueError):
            sdl.product(sdl.DegreeClass(1, 1, H), sdl.DegreeClass(1, 1, C), 2)

    @pytest.mark.parametrize("degree, level", [(-1, 1), (1, -1)])
    def test_invariants(self, degree, level):
        with pytest.raises(ValueError):
            sdl.DegreeClass(degree, level)

    def test_coefficient_tag_is_metadata(self):
        z = sdl.product(sdl.DegreeClass(2, 1, coeff="Z"), sdl.DegreeClass(2, 1, coeff="Z2"), 2)
        assert z.degree == 2 and z.coeff == "Z2"


class TestWindows:
    def test_examples(self):
        assert sdl.gm_interval(0, 0) == sdl.Window(0, 1)
        assert list(sdl.gm_interval(1, 2)) == [1, 2, 3, 4]
        assert 4 in sdl.gm_interval(1, 2) and 5 not in sdl.gm_interval(1, 2)

    @pytest.mark.parametrize("lam", [0, 1, 5])
    def test_nondegenerate_ranks(self, lam):
        ranks = sdl.local_ranks_nondegenerate(lam)
        assert ranks == {lam: 1, lam + 1: 1}
        assert set(ranks) == set(sdl.gm_interval(lam, 0))

    def test_negative(self):
        with pytest.raises(ValueError):
            sdl.gm_interval(-1, 0)
        with pytest.raises(ValueError):
            sdl.local_ranks_nondegenerate(-1)


class TestHypothesis:
    def test_properties(self):
        hyp = sphere_hyp(3)
        assert (hyp.lambda1, hyp.nullity1, hyp.M) == (1, 2, 3)

    @pytest.mark.parametrize("n, lam, nu", [
        (2, [1, 5], [0, 0]),            # index grows too fast
        (2, [1, 2], [0, 3]),            # nullity above 2(n - 1)
        (2, [1], [0, 0]),               # lengths differ
        (2, [], []),
        (2, [-1], [0]),
        (0, [1], [0]),
    ])
    def test_malformed(self, n, lam, nu):
        with pytest.raises(MalformedHypothesisError):
            sdl.SpectrumHypothesis(n, lam, nu)


class TestConsistency:
    def test_sphere_homology(self):
        hyp = sphere_hyp(12)
        cons = sdl.nonnilpotent_consistency(hyp, 4, H)
        assert cons.consistent and cons.checked == 12
        # the power degrees sit on the upper window edge
        assert all(sdl.cs_power_degree(4, m, 2) == 2 * m + 2 for m in range(1, 13))

    def test_sphere_cohomology(self):
        cons = sdl.nonnilpotent_consistency(sphere_hyp(12), 1, C)
        assert cons.consistent
        assert all(sdl.gh_power_degree(1, m, 2) == 2 * m - 1 for m in range(1, 13))

    def test_torus_cohomology_fails(self):
        torus = sdl.SpectrumHypothesis(2, [0] * 6, [1] * 6)
        cons = sdl.nonnilpotent_consistency(torus, 0, C)
        assert (cons.consistent, cons.failed_m, cons.side, cons.degree) == (False, 4, "upper", 3)
        assert cons.window == sdl.Window(0, 2)

    def test_lower_side(self):
        cons = sdl.nonnilpotent_consistency(sphere_hyp(4), 3, H)
        assert (cons.failed_m, cons.side) == (4, "lower")


class TestDerive:
    def test_sphere_homology(self):
        out = sdl.derive_conclusion(sphere_hyp(), 4, H)
        assert out.forced_j == 4
        assert out.predicted == tuple(2 * m + 1 for m in range(1, 7))
        assert out.matches and out.law == "minimal_sum"

    def test_sphere_cohomology(self):
        out = sdl.derive_conclusion(sphere_hyp(), 1, C)
        assert out.forced_j == 1
        assert out.predicted == tuple(2 * m - 1 for m in range(1, 7))
        assert out.matches and out.law == "maximal_index"

    def test_amplification_certificate(self):
        # minimal-sum law 2m + 1 exceeded by C = 1 at k = 2
        hyp = sdl.SpectrumHypothesis(2, [3, 5, 7, 9], [0, 1, 0, 0])
        out = sdl.derive_conclusion(hyp, 4, H)
        assert not out.matches
        (cert,) = out.certificates
        assert (cert.k, cert.deviation, cert.r, cert.iterate) == (2, 1, 4, 8)
        assert cert.r * cert.deviation > 2 * (2 - 1) + 1
        assert (cert.bound, cert.required) == (19, 18)

    def test_cohomology_certificate(self):
        # maximal law 3m - 1 for n = 2, lam1 = 2; lam_3 = 7 falls short by 1
        hyp = sdl.SpectrumHypothesis(2, [2, 5, 7, 11], [0, 0, 1, 0])
        out = sdl.derive_conclusion(hyp, 2, C)
        (cert,) = out.certificates
        assert (cert.k, cert.deviation, cert.r, cert.iterate) == (3, 1, 4, 12)
        assert cert.required > cert.bound

    def test_precondition(self):
        with pytest.raises(PreconditionError) as info:
            sdl.derive_conclusion(sdl.SpectrumHypothesis(2, [0] * 6, [1] * 6), 0, C)
        assert info.value.m == 4

    def test_short_horizon(self):
        with pytest.raises(InsufficientHorizonError, match="M >= 4"):
            sdl.derive_conclusion(sphere_hyp(2), 3, H)
        assert sdl.horizon_needed(2) == 4

    @settings(max_examples=150, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 6), st.integers(0, 6), st.sampled_from(list(sdl.Kind)),
           st.integers(-3, 3), st.integers(0, 4), st.randoms(use_true_random=False))
    def test_success_forces_degree(self, n, lam1, nu1, kind, offset, extra, rnd):
        nu1 = min(nu1, 2 * (n - 1))
        target = lam1 + nu1 + 1 if kind is H else lam1
        j = target + offset
        assume(j >= 0)
        M = sdl.horizon_needed(n) + extra
        sets = [sdl.consistent_pairs(n, lam1, nu1, j, kind, m) for m in range(1, M + 1)]
        if not all(sets):
            return  # no consistent hypothesis of length M exists for this j
        pairs = [(lam1, nu1)] + [rnd.choice(s) for s in sets[1:]]
        hyp = sdl.SpectrumHypothesis(n, [p[0] for p in pairs], [p[1] for p in pairs])
        out = sdl.derive_conclusion(hyp, j, kind)
        assert out.forced_j == j == target
        for cert in out.certificates:
            assert cert.r * cert.deviation > 2 * (n - 1) + 1
            if kind is H:
                assert cert.bound > cert.required
            else:
                assert cert.required > cert.bound


class TestExtremality:
    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 10), st.integers(0, 10), st.integers(1, 10))
    def test_maximal_law_saturates_index_inequality(self, n, lam1, nu1, M):
        nu1 = min(nu1, 2 * (n - 1))
        spec = isp.SequenceSpectrum(n, tuple(isp.maximal_index_law(m, lam1, n) for m in range(1, M + 1)), (nu1,) * M)
        assert all(r.index_slack == 0 for r in isp.check_bott(spec).rows)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 10), st.integers(0, 10), st.integers(1, 10))
    def test_minimal_law_saturates_sum_inequality(self, n, lam1, nu1, M):
        nu1 = min(nu1, 2 * (n - 1))
        sums = [isp.minimal_sum_law(m, lam1, nu1, n) for m in range(1, M + 1)]
        spec = isp.SequenceSpectrum(n, tuple(s - nu1 for s in sums), (nu1,) * M)
        assert all(r.sum_slack == 0 for r in isp.check_bott(spec).rows)


class TestConsistentPairs:
    @pytest.mark.parametrize("n, lam1, nu1, j, kind", [
        (2, 1, 2, 4, H), (2, 1, 2, 1, C), (2, 0, 1, 0, C), (3, 2, 1, 4, H), (1, 3, 0, 3, C),
    ])
    def test_matches_brute_force(self, n, lam1, nu1, j, kind):
        """Row m of check_bott depends only on entries 1 and m, so it is an independent oracle."""
        for m in range(2, 7):
            want = set()
            for lam, nu in itertools.product(range(0, 40), range(0, 2 * n + 2)):
                seq = isp.SequenceSpectrum(n, (lam1,) + (0,) * (m - 2) + (lam,), (nu1,) + (0,) * (m - 2) + (nu,))
                if not isp.check_bott(seq).rows[m - 1].holds:
                    continue
                if sdl.power_degree(kind, j, m, n) in sdl.gm_interval(lam, nu):
                    want.add((lam, nu))
            assert set(sdl.consistent_pairs(n, lam1, nu1, j, kind, m)) == want

    def test_first_iterate(self):
        assert sdl.consistent_pairs(2, 1, 2, 4, H, 1) == [(1, 2)]
        assert sdl.consistent_pairs(2, 1, 2, 5, H, 1) == []
