import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uqsa.divergence import (
    AnalyticCGF, DiscreteDist, EmpiricalCGF, SolverError, check_representation, chi2_comparison_bound,
    chi_squared, ckp_bound, legendre_transform, linearized_xi, psi_sharp_bound, relative_entropy,
    solve_c_star, total_variation, uq_sandwich, xi_bounds,
)

# (probs, support, rho2, xi_plus, -xi_minus, c_plus, c_minus) from
# tests/oracles/goal_divergence_mp.py (direct minimization at 50 digits)
ORACLE = [
    ([0.5, 0.5], [0, 1], 0.01, 0.070592570273494298201, 0.070592570273494298201,
     0.284269229921077, 0.284269229921077),
    ([0.5, 0.5], [0, 1], 0.1, 0.21979462616140973122, 0.21979462616140973122,
     0.943443117577844, 0.943443117577844),
    ([0.5, 0.5], [0, 1], 0.5, 0.45181125415639606771, 0.45181125415639606771,
     2.9832412476221, 2.9832412476221),
    ([0.2, 0.5, 0.3], [-1, 0, 2], 0.3, 0.8807993688964486547, 0.77852209312343823049,
     0.69592402802088, 0.902758387956353),
    ([0.1, 0.6, 0.3], [0, 1, 5], 0.05, 0.62764200208049484623, 0.57668999483134108801,
     0.155553791895333, 0.185165509346019),
]


def probs_strategy(max_size=5):
    return st.lists(st.floats(0.01, 1.0), min_size=2, max_size=max_size).map(
        lambda w: np.array(w) / np.sum(w))


class TestDiscreteDist:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            DiscreteDist([0.5, 0.6])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            DiscreteDist([1.2, -0.2])

    def test_moments(self):
        p = DiscreteDist([0.25, 0.75], [0.0, 2.0])
        assert p.expect(lambda x: x) == pytest.approx(1.5)
        assert p.variance(lambda x: x) == pytest.approx(0.75)


class TestDivergences:
    def test_bernoulli_values(self):
        p = DiscreteDist([0.5, 0.5])
        q = DiscreteDist([0.25, 0.75])
        kl = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
        assert relative_entropy(q, p) == pytest.approx(kl, rel=1e-14)
        assert chi_squared(q, p) == pytest.approx(0.25, rel=1e-14)
        assert total_variation(q, p) == pytest.approx(0.25, rel=1e-14)

    def test_absolute_continuity_failure(self):
        p = DiscreteDist([1.0, 0.0])
        q = DiscreteDist([0.5, 0.5])
        assert relative_entropy(q, p) == math.inf
        assert chi_squared(q, p) == math.inf

    @settings(max_examples=60, deadline=None)
    @given(probs_strategy(), probs_strategy())
    def test_pinsker_and_chi2_dominate(self, a, b):
        n = min(a.size, b.size)
        p = DiscreteDist(a[:n] / a[:n].sum())
        q = DiscreteDist(b[:n] / b[:n].sum())
        kl = relative_entropy(q, p)
        assert kl >= 0
        assert total_variation(q, p) <= math.sqrt(kl / 2) + 1e-12
        assert kl <= math.log1p(chi_squared(q, p)) + 1e-12


class TestEmpiricalCGF:
    def test_two_point_closed_form(self):
        h = EmpiricalCGF(np.array([-1.0, 1.0]))
        np.testing.assert_allclose(h.cgf(0.5), math.log(math.cosh(0.5)), rtol=1e-14)
        np.testing.assert_allclose(h.dcgf(0.5), math.tanh(0.5), rtol=1e-14)

    def test_large_argument_is_finite(self):
        h = EmpiricalCGF(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
        assert math.isfinite(h.cgf(800.0))
        assert h.cgf(800.0) == pytest.approx(800.0 - 0.5 * 800.0 - math.log(2.0), rel=1e-12)

    def test_phi_supremum_is_minus_log_top_mass(self):
        h = EmpiricalCGF(np.array([0.0, 1.0, 3.0]), np.array([0.5, 0.3, 0.2]))
        assert h.phi_sup == pytest.approx(-math.log(0.2))
        assert h.phi(5.0) < h.phi_sup
        assert h.phi(60.0) <= h.phi_sup


class TestGoalDivergence:
    @pytest.mark.parametrize("probs,support,rho2,up,lo,cu,cl", ORACLE)
    def test_against_oracle(self, probs, support, rho2, up, lo, cu, cl):
        h = EmpiricalCGF(np.array(support, float), np.array(probs))
        gd = xi_bounds(h, rho2)
        np.testing.assert_allclose(gd.xi_plus, up, rtol=1e-12)
        np.testing.assert_allclose(-gd.xi_minus, lo, rtol=1e-12)
        np.testing.assert_allclose(gd.c_star_plus, cu, rtol=1e-9)
        np.testing.assert_allclose(gd.c_star_minus, cl, rtol=1e-9)

    def test_gaussian_closed_form(self):
        gd = xi_bounds(AnalyticCGF.gaussian(2.0, 1.0), 0.125)
        assert gd.xi_plus == pytest.approx(1.0, rel=1e-12)
        assert gd.xi_minus == pytest.approx(-1.0, rel=1e-12)
        assert gd.c_star_plus == pytest.approx(0.25, rel=1e-10)

    def test_zero_budget(self):
        gd = xi_bounds(EmpiricalCGF(np.array([0.0, 1.0])), 0.0)
        assert gd.xi_plus == 0.0 and gd.xi_minus == 0.0

    def test_negative_budget_rejected(self):
        with pytest.raises(ValueError):
            xi_bounds(EmpiricalCGF(np.array([0.0, 1.0])), -1e-3)

    def test_saturation_gives_range_gap(self):
        h = EmpiricalCGF(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
        gd = xi_bounds(h, 0.8)
        assert gd.saturated_plus and gd.saturated_minus
        assert gd.xi_plus == pytest.approx(0.5)
        assert gd.xi_minus == pytest.approx(-0.5)

    def test_just_below_saturation_is_solved(self):
        h = EmpiricalCGF(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
        gd = xi_bounds(h, math.log(2.0) - 1e-3)
        assert not gd.saturated_plus
        assert 0.45 < gd.xi_plus < 0.5

    def test_constant_observable(self):
        gd = xi_bounds(EmpiricalCGF(np.full(4, 3.0)), 0.7)
        assert gd.xi_plus == 0.0 and gd.xi_minus == 0.0

    def test_solve_c_star_reports_saturation(self):
        h = EmpiricalCGF(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
        assert solve_c_star(h, 5.0) == (None, True)

    def test_infinite_domain_edge(self):
        # exponential(1) centered CGF: -log(1 - c) - c on c < 1
        h = AnalyticCGF(lambda c: -math.log1p(-c) - c, lambda c: 1.0 / (1.0 - c) - 1.0,
                        domain=(-math.inf, 1.0), mean=0.0)
        gd = xi_bounds(h, 0.2)
        check_representation(h, gd)
        c = gd.c_star_plus
        assert c < 1.0
        assert h.phi(c) == pytest.approx(0.2, rel=1e-9)

    def test_representation_check_detects_tampering(self):
        h = EmpiricalCGF(np.array([0.0, 1.0, 2.0]))
        gd = xi_bounds(h, 0.1)
        bad = type(gd)(**{**gd.__dict__, "xi_plus": gd.xi_plus * 1.01})
        with pytest.raises(SolverError):
            check_representation(h, bad)

    @settings(max_examples=80, deadline=None)
    @given(probs_strategy(), st.lists(st.floats(-5, 5), min_size=5, max_size=5),
           st.floats(1e-6, 3.0))
    def test_xi_sign_property(self, probs, values, rho2):
        h = EmpiricalCGF(np.array(values[:probs.size]), probs)
        gd = xi_bounds(h, rho2)
        assert gd.xi_plus >= 0 >= gd.xi_minus

    @settings(max_examples=80, deadline=None)
    @given(probs_strategy(), probs_strategy(5), st.lists(st.floats(-3, 3), min_size=5, max_size=5))
    def test_sandwich_property(self, p, q, f):
        n = min(p.size, q.size)
        P = DiscreteDist(p[:n] / p[:n].sum())
        Q = DiscreteDist(q[:n] / q[:n].sum())
        table = np.array(f[:n])
        lo, gap, hi = uq_sandwich(P, Q, table)
        assert lo - 1e-8 <= gap <= hi + 1e-8

    @settings(max_examples=60, deadline=None)
    @given(probs_strategy(4), st.floats(1e-3, 0.5), st.sampled_from([1e-8, 1e-3, 1e3, 1e8]))
    def test_scale_equivariance(self, probs, rho2, a):
        vals = np.array([0.0, 1.0, -0.5, 3.0])[:probs.size]
        base = xi_bounds(EmpiricalCGF(vals, probs), rho2)
        scaled = xi_bounds(EmpiricalCGF(a * vals, probs), rho2)
        assert scaled.saturated_plus == base.saturated_plus
        np.testing.assert_allclose([scaled.xi_plus, scaled.xi_minus],
                                   [a * base.xi_plus, a * base.xi_minus], rtol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(1e-4, 2.0), st.floats(1e-4, 2.0))
    def test_monotone_in_budget(self, r1, r2):
        h = EmpiricalCGF(np.array([-1.0, 0.0, 2.5]), np.array([0.3, 0.3, 0.4]))
        lo, hi = sorted((r1, r2))
        assert xi_bounds(h, lo).xi_plus <= xi_bounds(h, hi).xi_plus + 1e-12


class TestComparisonBounds:
    def test_values(self):
        assert ckp_bound(2.0, 0.5) == pytest.approx(2.0)
        assert chi2_comparison_bound(4.0, 0.25) == pytest.approx(1.0)
        assert linearized_xi(4.0, 0.125) == pytest.approx(1.0)

    @settings(max_examples=60, deadline=None)
    @given(probs_strategy(), probs_strategy(5), st.lists(st.floats(-3, 3), min_size=5, max_size=5))
    def test_chi2_bound_is_valid(self, p, q, f):
        n = min(p.size, q.size)
        P = DiscreteDist(p[:n] / p[:n].sum())
        Q = DiscreteDist(q[:n] / q[:n].sum())
        vals = np.array(f[:n])
        gap = abs(Q.probs @ vals - P.probs @ vals)
        assert gap <= chi2_comparison_bound(P.variance(vals), chi_squared(Q, P)) + 1e-9

    def test_chi2_bound_can_beat_goal_divergence(self):
        # on two-point laws Cauchy-Schwarz is attained, so the chi2 bound equals |gap|;
        # xi_minus is attained too (Q is a tilt of P) but xi_plus is not
        P, Q = DiscreteDist([0.6, 0.4]), DiscreteDist([0.95, 0.05])
        f = np.array([0.0, 1.0])
        lo, gap, hi = uq_sandwich(P, Q, f)
        chi2 = chi2_comparison_bound(P.variance(f), chi_squared(Q, P))
        assert chi2 == pytest.approx(abs(gap), rel=1e-12)
        assert lo == pytest.approx(gap, rel=1e-9)
        assert chi2 < 0.9 * hi

    def test_negative_inputs_rejected(self):
        for fn in (ckp_bound, chi2_comparison_bound, linearized_xi):
            with pytest.raises(ValueError):
                fn(-1.0, 0.1)

    @settings(max_examples=60, deadline=None)
    @given(probs_strategy(), probs_strategy(5), st.lists(st.floats(-3, 3), min_size=5, max_size=5))
    def test_goal_divergence_beats_ckp(self, p, q, f):
        n = min(p.size, q.size)
        P = DiscreteDist(p[:n] / p[:n].sum())
        Q = DiscreteDist(q[:n] / q[:n].sum())
        vals = np.array(f[:n])
        rho2 = relative_entropy(Q, P)
        gd = xi_bounds(EmpiricalCGF(vals, P.probs), rho2)
        sup = float(np.max(np.abs(vals - P.probs @ vals)))
        assert gd.xi_plus <= ckp_bound(sup, rho2) + 1e-9


class TestLegendre:
    def test_quadratic(self):
        psi = lambda c: 0.5 * c * c
        assert legendre_transform(psi, 1.5) == pytest.approx(1.125, rel=1e-9)
        assert psi_sharp_bound(psi, 0.5) == pytest.approx(1.0, rel=1e-9)

    def test_sharp_bound_matches_goal_divergence_for_exact_cgf(self):
        h = EmpiricalCGF(np.array([0.0, 1.0, 4.0]), np.array([0.5, 0.3, 0.2]))
        psi = h.cgf  # already centered
        gd = xi_bounds(h, 0.2)
        assert psi_sharp_bound(psi, 0.2) == pytest.approx(gd.xi_plus, rel=1e-7)
