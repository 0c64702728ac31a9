"""Kernel identities, reductions, positivity and the PV quadrature."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import anisomp as a
from anisomp import FourthCumulantProfile as K4

BETA_HAT_44 = 0.05500734439491026  # 2 m'(4) / (16 (1+m(4))^4), Sigma = I, d = 1/2


def _pop(n=6, N=12, sig=None):
    if sig is None:
        model = a.PopulationModel.identity(n)
    else:
        model = a.PopulationModel.from_diagonal(np.asarray(sig))
    return a.Population(model, N)


def _unit(n, k=0):
    v = np.zeros(n)
    v[k] = 1.0
    return v


class TestTestFunction:
    def test_bump_support_and_smoothness(self):
        f = a.TestFunction(kind="bump", center=1.0, width=0.5)
        assert f(0.4999) == 0.0
        assert f(1.5001) == 0.0
        assert f(1.0) == pytest.approx(1.0)
        x = np.linspace(0.5, 1.5, 501)
        fd = np.gradient(f(x), x)
        assert np.max(np.abs(fd - f.derivative(x))) < 1e-2

    def test_poly_gauss_positive_halfline(self):
        f = a.TestFunction(kind="poly_gauss", center=2.0, width=0.5, poly_coeffs=(0.0, 1.0))
        assert f(-1.0) == 0.0
        assert f(2.5) == pytest.approx(1.0 * math.exp(-1.0))

    def test_json_round_trip(self):
        f = a.TestFunction(kind="bump", center=1.2, width=0.3)
        g = a.TestFunction.from_dict(f.to_dict())
        assert g == f


class TestAlphaKernel:
    def test_gaussian_zero(self):
        pop = _pop()
        v = _unit(6)
        assert a.alpha_kernel(1.0, 1.5, v, v, pop, K4.gaussian()) == 0.0

    def test_outside_zero(self):
        pop = _pop()
        v = _unit(6)
        assert a.alpha_kernel(4.0, 1.0, v, v, pop, K4.rademacher()) == 0.0

    def test_rademacher_term_by_term(self):
        # independent re-computation of the cumulant kernel, coordinatewise
        pop = _pop()
        n = 6
        v1, v2 = _unit(n, 0), _unit(n, 1)
        x1 = x2 = 1.0
        m = a.null_mp_m2c(1.0, 0.5)
        phi1 = np.zeros(n, dtype=complex)
        phi1[0] = 1.0 / (1.0 + m)
        phi2 = np.zeros(n, dtype=complex)
        phi2[1] = 1.0 / (1.0 + m)
        want = sum(
            (-2.0)
            * np.imag(m / x1 * phi1[i] ** 2)
            * np.imag(m / x2 * phi2[i] ** 2)
            for i in range(n)
        )
        got = a.alpha_kernel(x1, x2, v1, v2, pop, K4.rademacher())
        assert got == pytest.approx(float(want), abs=1e-12)
        got_same = a.alpha_kernel(x1, x2, v1, v1, pop, K4.rademacher())
        phi_sq = np.imag(m / (1.0 + m) ** 2) ** 2
        assert got_same == pytest.approx(-2.0 * float(phi_sq), abs=1e-12)


class TestBetaKernel:
    def test_diagonal_zero(self):
        pop = _pop()
        rng = np.random.default_rng(1)
        for _ in range(5):
            v = rng.standard_normal(6)
            v /= np.linalg.norm(v)
            E = rng.uniform(0.2, 2.8)
            assert abs(a.beta_kernel(E, E, v, v, pop)) < 1e-12

    def test_both_outside_zero(self):
        pop = _pop()
        v = _unit(6)
        assert a.beta_kernel(3.5, 4.5, v, v, pop) == pytest.approx(0.0, abs=1e-12)

    def test_bulk_reduction(self):
        # beta(x1,x2,v,v)/(x1-x2) = -2 d^-3 Im m(x1) Im m(x2) for Sigma = I
        pop = _pop()
        d = 0.5
        v = np.full(6, 1 / math.sqrt(6))
        rng = np.random.default_rng(3)
        for _ in range(20):
            x1, x2 = rng.uniform(0.2, 2.8, size=2)
            if abs(x1 - x2) < 1e-3:
                continue
            lhs = a.beta_kernel(x1, x2, v, v, pop) / (x1 - x2)
            rhs = (
                -2.0
                / d**3
                * a.null_mp_m2c(x1, d).imag
                * a.null_mp_m2c(x2, d).imag
            )
            assert lhs == pytest.approx(rhs, abs=1e-8)


class TestHatKernels:
    def test_alpha_hat_gaussian_zero(self):
        pop = _pop()
        v = _unit(6)
        assert a.alpha_hat(1 + 1j, 2 + 1j, v, v, pop, K4.gaussian()) == 0.0

    def test_alpha_hat_null_specialization(self):
        # Sigma = I: alpha_hat = kappa m1 m2 / (z1 z2 (1+m1)^2 (1+m2)^2) * sum v1_i^2 v2_i^2
        pop = _pop()
        rng = np.random.default_rng(7)
        v1 = rng.standard_normal(6)
        v1 /= np.linalg.norm(v1)
        v2 = rng.standard_normal(6)
        v2 /= np.linalg.norm(v2)
        z1, z2 = 1.2 + 0.8j, 2.5 + 0.4j
        kap = 3.3
        m1, m2 = a.null_mp_m2c(z1, 0.5), a.null_mp_m2c(z2, 0.5)
        want = (
            kap
            * m1
            * m2
            / (z1 * z2 * (1 + m1) ** 2 * (1 + m2) ** 2)
            * np.sum(v1**2 * v2**2)
        )
        got = a.alpha_hat(z1, z2, v1, v2, pop, K4.constant(kap))
        assert abs(got - want) < 1e-10

    def test_alpha_hat_conjugation(self):
        pop = _pop()
        v = _unit(6)
        z1, z2 = 1.1 + 0.9j, 0.7 + 0.2j
        x = a.alpha_hat(z1, z2, v, v, pop, K4.rademacher())
        y = a.alpha_hat(np.conj(z1), np.conj(z2), v, v, pop, K4.rademacher())
        assert abs(x - np.conj(y)) < 1e-14

    def test_beta_hat_equal_argument_limit(self):
        pop = _pop()
        v = _unit(6)
        z = 1.0 + 0.7j
        exact = a.beta_hat(z, z, v, v, pop)
        limit = a.beta_hat(z, z + 1e-6, v, v, pop)
        assert abs(exact - limit) < 1e-4 * abs(exact)

    def test_beta_hat_swap_symmetry(self):
        pop = _pop(sig=(2.0, 1.5, 1.0, 1.0, 0.7, 0.5))
        rng = np.random.default_rng(5)
        v1 = rng.standard_normal(6)
        v1 /= np.linalg.norm(v1)
        v2 = rng.standard_normal(6)
        v2 /= np.linalg.norm(v2)
        z1, z2 = 0.9 + 0.5j, 2.2 + 0.1j
        assert abs(
            a.beta_hat(z1, z2, v1, v2, pop) - a.beta_hat(z2, z1, v2, v1, pop)
        ) < 1e-13

    def test_beta_hat_outside_value(self):
        pop = _pop()
        got = a.beta_hat(4.0, 4.0, _unit(6), _unit(6), pop)
        assert got.real == pytest.approx(BETA_HAT_44, abs=1e-10)
        assert got.imag == pytest.approx(0.0, abs=1e-14)


class TestKernelSymmetries:
    @given(
        seed=st.integers(0, 10_000),
        kap=st.floats(-2.0, 6.0),
        x1=st.floats(0.3, 2.8),
        x2=st.floats(0.3, 2.8),
    )
    @settings(max_examples=40, deadline=None)
    def test_joint_swap(self, seed, kap, x1, x2):
        rng = np.random.default_rng(seed)
        sig = rng.uniform(0.5, 2.0, size=5)
        pop = a.Population(a.PopulationModel.from_diagonal(sig), 10)
        v1 = rng.standard_normal(5)
        v1 /= np.linalg.norm(v1)
        v2 = rng.standard_normal(5)
        v2 /= np.linalg.norm(v2)
        prof = K4.constant(kap)
        assert a.alpha_kernel(x1, x2, v1, v2, pop, prof) == pytest.approx(
            a.alpha_kernel(x2, x1, v2, v1, pop, prof), abs=1e-12
        )
        # beta flips sign under the joint swap: beta/(x1-x2) is the symmetric
        # object (cf. the bulk reduction above)
        assert a.beta_kernel(x1, x2, v1, v2, pop) == pytest.approx(
            -a.beta_kernel(x2, x1, v2, v1, pop), abs=1e-12
        )


class TestResolventCovariance:
    def test_global_matches_isotropic_closed_form(self):
        pop = _pop()
        d = 0.5
        v = np.full(6, 1 / math.sqrt(6))
        rng = np.random.default_rng(11)
        for _ in range(20):
            z1 = complex(rng.uniform(0.3, 4.0), rng.uniform(0.05, 2.0))
            z2 = complex(rng.uniform(0.3, 4.0), rng.uniform(0.05, 2.0))
            if abs(z1 - z2) < 1e-3:
                continue
            got = a.resolvent_covariance(
                "global", pop, v, v, kappa=K4.gaussian(), z1=z1, z2=z2
            )
            m1, m2 = a.null_mp_m2c(z1, d), a.null_mp_m2c(z2, d)
            want = (
                2.0
                * (z1 * m1 - z2 * m2) ** 2
                / (d**2 * z1 * z2 * (z1 - z2) * (m1 - m2))
            )
            assert abs(got - want) < 1e-8

    def test_local_same_side_zero(self):
        pop = _pop()
        v = _unit(6)
        got = a.resolvent_covariance("local", pop, v, v, E=1.0, w1=1j, w2=0.5 + 2j)
        assert got == 0.0

    def test_local_opposite_side_value(self):
        pop = _pop()
        v = _unit(6)
        E, w1, w2 = 1.0, 1j, 1 - 1j
        got = a.resolvent_covariance("local", pop, v, v, E=E, w1=w1, w2=w2)
        m = a.null_mp_m2c(E, 0.5)
        c = 1.0 / abs(1 + m) ** 2
        want = 4j * m.imag / (E**2 * (w1 - w2)) * c**2
        assert abs(got - want) < 1e-10

    def test_outside_value_and_domain(self):
        pop = _pop()
        v = _unit(6)
        got = a.resolvent_covariance("outside", pop, v, v, kappa=K4.gaussian(), E=4.0)
        assert got == pytest.approx(BETA_HAT_44, abs=1e-10)
        with pytest.raises(a.OutsideDomain):
            a.resolvent_covariance("outside", pop, v, v, kappa=K4.gaussian(), E=1.0)


class TestVariancePositivity:
    def test_gaussian_equals_beta_hat(self):
        pop = _pop()
        v = _unit(6)
        got = a.variance_positivity(4.0, v, pop, K4.gaussian())
        assert got == pytest.approx(BETA_HAT_44, abs=1e-12)
        assert got > 0.0

    def test_cauchy_schwarz_outside(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            sig = rng.uniform(0.4, 2.5, size=4)
            pop = a.Population(a.PopulationModel.from_diagonal(sig), 8)
            edges = a.support_edges(pop.spectrum)
            E = edges[0] + rng.uniform(0.3, 2.0)
            m = a.solve_m2c(complex(E, 0.0), pop.spectrum).m.real
            mp = a.m2c_derivative(complex(E, 0.0), pop.spectrum).real
            assert m**2 <= mp + 1e-12

    @given(seed=st.integers(0, 100_000), kap=st.floats(-2.0, 6.0))
    @settings(max_examples=50, deadline=None)
    def test_random_draws_nonnegative(self, seed, kap):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 8))
        sig = rng.uniform(0.4, 2.5, size=n)
        N = int(rng.integers(n + 1, 4 * n + 2))
        pop = a.Population(a.PopulationModel.from_diagonal(sig), N)
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        lam_plus = a.support_edges(pop.spectrum)[0]
        E = lam_plus + rng.uniform(0.2, 3.0)
        val = a.variance_positivity(E, v, pop, K4.constant(kap))
        assert val >= -1e-12


class TestPVIntegral:
    def test_linear_difference(self):
        val, err = a.pv_double_integral(lambda x1, x2: x1 - x2, (0, 1, 0, 1))
        assert val == pytest.approx(1.0, abs=1e-3)
        assert abs(val - 1.0) <= err + 1e-4

    def test_constant_odd_kernel(self):
        val, err = a.pv_double_integral(
            lambda x1, x2: np.ones_like(x1 * x2), (-1, 1, -1, 1)
        )
        assert abs(val) < 1e-10

    def test_product_antisymmetric(self):
        # brute-force delta-regularized oracle at delta = 1e-4 gives 0
        val, err = a.pv_double_integral(lambda x1, x2: x1 * x2, (-1, 1, -1, 1))
        assert abs(val) < 1e-10

    def test_error_estimate_consistency(self):
        # halving the base delta moves the value by less than the estimate
        f = lambda x1, x2: np.exp(-(x1**2)) * (x1 - x2 + 0.3 * x2**2)
        v1, e1 = a.pv_double_integral(f, (0, 2, 0, 2), base_delta=0.08)
        v2, e2 = a.pv_double_integral(f, (0, 2, 0, 2), base_delta=0.04)
        assert abs(v1 - v2) <= e1


class TestLinearStatCovariance:
    def setup_method(self):
        self.pop = _pop(n=8, N=16)
        self.v = np.full(8, 1 / math.sqrt(8))
        self.fi = a.TestFunction(kind="bump", center=1.0, width=0.6)
        self.fj = a.TestFunction(kind="bump", center=1.8, width=0.7)

    @staticmethod
    def _simple_reduction(f1, f2, d=0.5):
        from scipy.integrate import quad

        lp, lm = a.null_mp_edges(d)

        def rho_c(x):
            return math.sqrt(max((x - lm) * (lp - x), 0.0)) / (2 * math.pi * d * x)

        t1 = quad(lambda x: f1(x) * f2(x) * rho_c(x), lm, lp, limit=400)[0]
        a1 = quad(lambda x: f1(x) * rho_c(x), lm, lp, limit=400)[0]
        a2 = quad(lambda x: f2(x) * rho_c(x), lm, lp, limit=400)[0]
        return 2.0 / d * (t1 - a1 * a2)

    def test_global_null_reduction(self):
        for f1, f2 in ((self.fi, self.fj), (self.fi, self.fi)):
            got = a.linear_stat_covariance(
                "global", f1, f2, self.v, self.v, 0.0, 1.0, self.pop, K4.gaussian()
            )
            want = self._simple_reduction(f1, f2)
            assert got.value == pytest.approx(want, rel=1e-4)

    def test_local_formula(self):
        from scipy.integrate import quad

        E = 1.0
        got = a.linear_stat_covariance(
            "local", self.fi, self.fi, self.v, self.v, E, 0.02, self.pop, K4.gaussian()
        )
        m = a.null_mp_m2c(E, 0.5)
        rho = m.imag / math.pi
        ff = quad(lambda u: self.fi(u) ** 2, *self.fi.support)[0]
        want = 2.0 * rho / E**2 * (1.0 / abs(1 + m) ** 2) ** 2 * ff
        assert got.value == pytest.approx(want, rel=1e-6)

    def test_local_zero_function(self):
        zero = a.TestFunction(kind="poly_gauss", center=1.0, width=0.5, poly_coeffs=(0.0,))
        got = a.linear_stat_covariance(
            "local", self.fi, zero, self.v, self.v, 1.0, 0.02, self.pop, K4.gaussian()
        )
        assert got.value == 0.0

    def test_local_outside_support_zero(self):
        got = a.linear_stat_covariance(
            "local", self.fi, self.fi, self.v, self.v, 4.0, 0.02, self.pop, K4.gaussian()
        )
        assert got.value == 0.0
