import math

import numpy as np
import pytest
from scipy.integrate import quad

from densecell.analytic import (
    LOS,
    NLOS,
    CoverageQuery,
    ase,
    coverage_case1,
    coverage_general,
    coverage_values,
    laplace_case1_los,
    laplace_case1_nlos_far,
    laplace_case1_nlos_near,
    laplace_general,
    nearest_pdf_los,
    nearest_pdf_nlos,
)
from densecell.errors import DomainError, UsageError
from densecell.model import NetworkEnvironment, preset_single_slope

# coverage of the 3GPP Case 1 preset from an independent nested scipy.quad
# evaluation of the coverage integral (no code shared with the package)
ORACLE_COVERAGE = {
    (1, 1): 0.12647056119541075,
    (1, 10): 0.08977669517737528,
    (10, 1): 0.5044583879068281,
    (10, 10): 0.336819758490258,
    (100, 1): 0.3653595077110388,
    (100, 10): 0.06235251795349189,
    (1000, 1): 0.21263046765010907,
    (1000, 10): 0.026120438970497265,
    (10000, 1): 0.15164893244152247,
    (10000, 10): 0.01778091548536635,
}

# (lambda, r, s) -> Laplace transform, same independent oracle
ORACLE_LAPLACE = [
    (10, 0.05, 182325.4562711096, 0.8972880395274907),
    (100, 0.2, 33026494843.054, 5.170453742116435e-27),
    (5, 0.01, 63095.734448019364, 0.9630531851596751),
    (300, 0.02, 587303.3576515958, 0.0001346887656484167),
]


class TestNearestPdf:
    @pytest.mark.parametrize("lam", [0.5, 10.0, 1e3])
    def test_normalised(self, case1_env, lam):
        total = quad(lambda r: nearest_pdf_los(case1_env, lam, 1, r) + nearest_pdf_nlos(case1_env, lam, 1, r),
                     0.0, 0.3, epsabs=1e-13, limit=200)[0]
        total += quad(lambda r: nearest_pdf_nlos(case1_env, lam, 2, r), 0.3, math.inf, epsabs=1e-13)[0]
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_far_segment_has_no_los(self, case1_env):
        assert nearest_pdf_los(case1_env, 10.0, 2, 0.5) == 0.0

    def test_outside_segment(self, case1_env):
        with pytest.raises(DomainError):
            nearest_pdf_los(case1_env, 10.0, 1, 0.5)
        with pytest.raises(DomainError):
            nearest_pdf_nlos(case1_env, 10.0, 3, 0.5)


class TestLaplace:
    @pytest.mark.parametrize("lam, r, s, expected", ORACLE_LAPLACE)
    def test_general_matches_oracle(self, case1_env, lam, r, s, expected):
        assert laplace_general(case1_env, lam, r, s) == pytest.approx(expected, rel=1e-9)

    def test_zero_argument(self, case1_env):
        assert laplace_general(case1_env, 10.0, 0.1, 0.0) == 1.0

    def test_decreasing_in_density(self, case1_env):
        values = [laplace_general(case1_env, lam, 0.05, 1e5) for lam in (1, 10, 100)]
        assert values[0] > values[1] > values[2]

    @pytest.mark.parametrize("lam, gamma, r", [(10, 1.0, 0.05), (300, 10.0, 0.01), (3, 1.0, 0.29)])
    def test_los_lemma(self, case1_env, lam, gamma, r):
        seg = case1_env.model.segments[0]
        s = gamma * r**seg.alpha_los / (case1_env.tx_power * seg.a_los)
        assert laplace_case1_los(case1_env, lam, gamma, r) == pytest.approx(
            laplace_general(case1_env, lam, r, s), rel=1e-9)

    @pytest.mark.parametrize("lam, gamma, r", [(10, 1.0, 0.05), (300, 10.0, 0.01), (3, 1.0, 0.29)])
    def test_nlos_near_lemma(self, case1_env, lam, gamma, r):
        seg = case1_env.model.segments[0]
        s = gamma * r**seg.alpha_nlos / (case1_env.tx_power * seg.a_nlos)
        assert laplace_case1_nlos_near(case1_env, lam, gamma, r) == pytest.approx(
            laplace_general(case1_env, lam, r, s), rel=1e-9)

    @pytest.mark.parametrize("lam, gamma, r", [(1, 1.0, 0.4), (10, 10.0, 0.31), (0.5, 1.0, 2.0)])
    def test_nlos_far_lemma(self, case1_env, lam, gamma, r):
        seg = case1_env.model.segments[1]
        s = gamma * r**seg.alpha_nlos / (case1_env.tx_power * seg.a_nlos)
        assert laplace_case1_nlos_far(case1_env, lam, gamma, r) == pytest.approx(
            laplace_general(case1_env, lam, r, s), rel=1e-9)

    def test_lemma_domains(self, case1_env):
        with pytest.raises(DomainError):
            laplace_case1_los(case1_env, 10.0, 1.0, 0.5)
        with pytest.raises(DomainError):
            laplace_case1_nlos_far(case1_env, 10.0, 1.0, 0.2)

    def test_closed_form_needs_case1(self, single_slope_env):
        with pytest.raises(UsageError):
            laplace_case1_los(single_slope_env, 10.0, 1.0, 0.1)


class TestCoverage:
    @pytest.mark.parametrize("lam, gamma", sorted(ORACLE_COVERAGE))
    def test_general_matches_oracle(self, case1_env, lam, gamma):
        result = coverage_general(case1_env, CoverageQuery(lam, gamma))
        assert result.value == pytest.approx(ORACLE_COVERAGE[lam, gamma], abs=1e-9)

    @pytest.mark.parametrize("lam, gamma", sorted(ORACLE_COVERAGE))
    def test_closed_form_matches_oracle(self, case1_env, lam, gamma):
        result = coverage_case1(case1_env, CoverageQuery(lam, gamma))
        assert result.value == pytest.approx(ORACLE_COVERAGE[lam, gamma], abs=1e-9)

    def test_term_breakdown(self, case1_env):
        result = coverage_case1(case1_env, CoverageQuery(30.0, 1.0))
        assert result.term(2, LOS) == 0.0
        parts = [result.term(1, LOS), result.term(1, NLOS), result.term(2, NLOS)]
        assert sum(parts) == pytest.approx(result.value, abs=1e-15)
        assert all(p >= 0 for p in parts)
        general = coverage_general(case1_env, CoverageQuery(30.0, 1.0))
        for seg, branch in ((1, LOS), (1, NLOS), (2, NLOS), (2, LOS)):
            assert general.term(seg, branch) == pytest.approx(result.term(seg, branch), abs=1e-12)

    def test_vectorised_matches_scalar(self, case1_env):
        gammas = [0.5, 1.0, 10.0]
        values, errors = coverage_values(case1_env, 50.0, gammas)
        for g, v in zip(gammas, values):
            assert v == pytest.approx(coverage_case1(case1_env, CoverageQuery(50.0, g)).value, abs=1e-13)
        assert np.all(errors < 1e-7)

    def test_noise_free_single_slope_closed_form(self):
        # interference-limited single-slope coverage: 1 / (1 + g^(2/a) * int_{g^(-2/a)}^inf du / (1 + u^(a/2)))
        base = preset_single_slope(3.75, 10**-3.29)
        env = NetworkEnvironment(base.tx_power, 0.0, base.model)
        for gamma in (0.3, 1.0, 10.0):
            a = 3.75
            rho = gamma ** (2 / a) * quad(lambda u: 1 / (1 + u ** (a / 2)), gamma ** (-2 / a), math.inf,
                                          epsabs=1e-14, epsrel=1e-13)[0]
            for lam in (1.0, 1e3):
                value = coverage_general(env, CoverageQuery(lam, gamma)).value
                assert value == pytest.approx(1 / (1 + rho), abs=1e-9)

    def test_high_threshold_vanishes(self, case1_env):
        values, _ = coverage_values(case1_env, 10.0, [1e12])
        assert values[0] < 1e-6

    def test_query_validation(self):
        with pytest.raises(DomainError):
            CoverageQuery(0.0, 1.0)
        with pytest.raises(DomainError):
            CoverageQuery(1.0, -1.0)

    def test_unknown_method(self, case1_env):
        with pytest.raises(UsageError):
            coverage_values(case1_env, 1.0, [1.0], method="spline")


class TestAse:
    def test_matches_density_form(self, case1_env):
        # lambda * int log2(1+x) f(x) dx with f = -dp/dx: differentiate the coverage curve in
        # y = ln(1+x), then Richardson-extrapolate the O(h^2) difference/trapezoid error
        lam, g0 = 100.0, 1.0
        y = np.linspace(math.log1p(g0), 45.0, 801)
        p, _ = coverage_values(case1_env, lam, np.expm1(y))

        def direct(y, p):
            f = y / math.log(2.0) * -np.gradient(p, y)
            return lam * np.sum((f[1:] + f[:-1]) * np.diff(y)) / 2.0

        fine, coarse = direct(y, p), direct(y[::2], p[::2])
        assert ase(case1_env, lam, g0).value == pytest.approx((4.0 * fine - coarse) / 3.0, rel=1e-6)

    def test_engines_agree(self, case1_env):
        a = ase(case1_env, 30.0, 10.0, method="case1").value
        b = ase(case1_env, 30.0, 10.0, method="general").value
        assert a == pytest.approx(b, rel=1e-9)

    def test_zero_density(self, case1_env):
        assert ase(case1_env, 0.0, 1.0).value == 0.0

    def test_rejects_bad_threshold(self, case1_env):
        with pytest.raises(DomainError):
            ase(case1_env, 1.0, 0.0)
