import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uqsa.static_sensitivity import (
    FisherMatrix, expfam_sufficient_bound, fim_monte_carlo, relative_entropy_family,
    relent_quadratic_check, sensitivity_bound_static, sensitivity_index_fd, sensitivity_index_lr,
    unit,
)
from uqsa.zoo import BirthDeath, OUModel, TwoStateChain, poisson_expfam


def exact_index(fam, theta, v, fvals):
    """Cov(f, v . score) by summation over a finite support."""
    x = fam.support
    w = np.exp(fam.log_density(theta, x))
    s = fam.grad_log_density(theta, x) @ v
    m = w @ fvals
    return float(w @ ((fvals - m) * s)), float(w @ (fvals - m) ** 2)


class TestFisherMatrix:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            FisherMatrix([[1.0, 0.5], [0.0, 1.0]])

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            FisherMatrix([[1.0, 2.0], [2.0, 1.0]])

    def test_rejects_unknown_provenance(self):
        with pytest.raises(ValueError):
            FisherMatrix(np.eye(2), provenance="guess")

    def test_infinite_direction(self):
        f = FisherMatrix(np.diag([1.0, math.inf]), provenance="path")
        assert f.quad([1.0, 0.0]) == 1.0
        assert f.quad([0.0, 1.0]) == math.inf
        assert f.quad([1.0, 1e-9]) == math.inf
        assert f.entries[0, 1] == 0.0

    def test_entries_are_read_only(self):
        f = FisherMatrix(np.eye(2))
        with pytest.raises(ValueError):
            f.entries[0, 0] = 3.0


class TestUnit:
    def test_normalizes(self):
        np.testing.assert_allclose(unit([3.0, 4.0]), [0.6, 0.8])

    @pytest.mark.parametrize("v", [[0.0, 0.0], [math.nan, 1.0], [math.inf, 0.0]])
    def test_rejects(self, v):
        with pytest.raises(ValueError):
            unit(v)


class TestFisherMonteCarlo:
    def test_birth_death_stationary(self):
        bd = BirthDeath(2.0, 1.0)
        fam = bd.stationary_family()
        est = fim_monte_carlo(fam, bd.theta, 200_000, seed=11)
        exact = fam.fisher(bd.theta)
        assert np.all(np.abs(est.entries - exact) <= 4 * est.stderr + 1e-12)

    def test_ou_stationary_is_singular_in_alpha_gamma(self):
        ou = OUModel()
        F = ou.stationary_family().fisher(ou.theta)
        block = F[np.ix_([0, 2], [0, 2])]
        assert abs(np.linalg.det(block)) < 1e-14

    def test_thread_count_does_not_change_result(self):
        bd = BirthDeath()
        fam = bd.stationary_family()
        a = fim_monte_carlo(fam, bd.theta, 10_000, seed=5, workers=4, threads=1)
        b = fim_monte_carlo(fam, bd.theta, 10_000, seed=5, workers=4, threads=4)
        np.testing.assert_array_equal(a.entries, b.entries)
        np.testing.assert_array_equal(a.stderr, b.stderr)


class TestRelativeEntropy:
    def test_poisson_against_closed_form(self):
        fam = poisson_expfam().parametric_family()
        t0, t1 = np.array([0.3]), np.array([0.45])
        l0, l1 = math.exp(0.3), math.exp(0.45)
        kl = l1 * math.log(l1 / l0) - l1 + l0
        assert relative_entropy_family(fam, t1, t0) == pytest.approx(kl, rel=1e-10)

    def test_ou_quadrature_against_gaussian_kl(self):
        fam = OUModel().stationary_family()
        t0, t1 = np.array([1.0, 0.0, 1.0]), np.array([1.2, 0.3, 1.0])
        s0, s1 = 0.5, 1.0 / 2.4
        kl = 0.5 * (s1 / s0 + 0.3 ** 2 / s0 - 1.0 + math.log(s0 / s1))
        assert relative_entropy_family(fam, t1, t0) == pytest.approx(kl, rel=1e-9)

    def test_quadratic_behaviour(self):
        bd = BirthDeath()
        fam = bd.stationary_family()
        v = np.array([1.0, 0.0])
        ratios = []
        for eps in (1e-1, 1e-2, 1e-3):
            re, quad = relent_quadratic_check(fam, bd.theta, v, eps)
            ratios.append(re / quad)
        errs = np.abs(np.array(ratios) - 1.0)
        assert errs[-1] < 1e-2
        assert errs[0] > errs[1] > errs[2]

    def test_null_direction_of_singular_fim(self):
        # moving along (k1, k2) keeps the Poisson mean fixed
        bd = BirthDeath()
        re, quad = relent_quadratic_check(bd.stationary_family(), bd.theta, [1.0, 0.5], 1e-2)
        assert quad == pytest.approx(0.0, abs=1e-15)
        assert re == pytest.approx(0.0, abs=1e-15)

    def test_zero_eps(self):
        bd = BirthDeath()
        assert relent_quadratic_check(bd.stationary_family(), bd.theta, [1, 0], 0.0) == (0.0, 0.0)


class TestSensitivityIndex:
    def test_lr_and_fd_against_analytic(self):
        bd = BirthDeath(2.0, 1.0)
        fam = bd.stationary_family()
        f = bd.observables()["f1"]
        lr = sensitivity_index_lr(fam, bd.theta, [0.0, 1.0], f, 200_000, seed=2)
        fd = sensitivity_index_fd(fam, bd.theta, [0.0, 1.0], f, 1e-3, 200_000, seed=2)
        assert abs(lr.value + 2.0) < 4 * lr.stderr
        assert abs(fd.value + 2.0) < 4 * fd.stderr + 1e-3

    def test_bound_static_birth_death(self):
        bd = BirthDeath(2.0, 1.0)
        F = FisherMatrix(bd.stationary_family().fisher(bd.theta))
        assert sensitivity_bound_static(2.0, F, [1.0, 0.0]) == pytest.approx(1.0)
        assert sensitivity_bound_static(10.0, F, [1.0, 0.0]) == pytest.approx(math.sqrt(5.0))

    def test_bound_rejects_negative_variance(self):
        with pytest.raises(ValueError):
            sensitivity_bound_static(-1.0, FisherMatrix(np.eye(1)), [1.0])

    @settings(max_examples=80, deadline=None)
    @given(st.floats(0.02, 0.98), st.floats(0.02, 0.98), st.floats(-5, 5), st.floats(-5, 5),
           st.floats(-1, 1), st.floats(-1, 1))
    def test_bound_dominates_exact_index(self, a, b, f0, f1, v0, v1):
        if abs(v0) + abs(v1) < 1e-3:
            return
        chain = TwoStateChain(a, b)
        fam = chain.stationary_family()
        v = unit([v0, v1])
        idx, var = exact_index(fam, chain.theta, v, np.array([f0, f1]))
        bound = sensitivity_bound_static(var, FisherMatrix(fam.fisher(chain.theta)), v)
        assert abs(idx) <= bound * (1 + 1e-10) + 1e-12


class TestExpfamBound:
    def test_diagonal_equality_flag(self):
        h = np.array([[2.0, 0.5], [0.5, 8.0]])
        assert expfam_sufficient_bound(h, 0, 0) == (2.0, True)
        assert expfam_sufficient_bound(h, 0, 1) == (4.0, False)

    def test_rejects_negative_diagonal(self):
        with pytest.raises(ValueError):
            expfam_sufficient_bound(np.array([[-1.0]]), 0, 0)
