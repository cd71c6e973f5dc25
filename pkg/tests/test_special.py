import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from densecell.errors import DomainError, ParameterError
from densecell.special import hyp2f1_nonpos, rho1, rho2


def full_integral(alpha, beta, t):
    """Integral of u^beta/(1 + t u^alpha) over (0, inf)."""
    p = beta + 1.0
    return t ** (-p / alpha) * math.pi / (alpha * math.sin(math.pi * p / alpha))


class TestHyp2f1:
    def test_log_identity(self):
        # 2F1(1, 1; 2; -x) = ln(1 + x) / x
        for x in (1e-3, 0.5, 1.0, 30.0, 1e6):
            assert hyp2f1_nonpos(1, 1, 2, -x) == pytest.approx(math.log1p(x) / x, rel=1e-13)

    def test_atan_identity(self):
        # 2F1(1/2, 1; 3/2; -x^2) = atan(x) / x
        for x in (0.1, 2.0, 1e4):
            assert hyp2f1_nonpos(0.5, 1, 1.5, -x * x) == pytest.approx(math.atan(x) / x, rel=1e-13)

    def test_zero_argument(self):
        assert hyp2f1_nonpos(2.3, 0.7, 3.1, 0.0) == 1.0

    def test_minus_infinity(self):
        assert hyp2f1_nonpos(1.0, 0.5, 1.5, -math.inf) == 0.0

    @pytest.mark.parametrize("z", [-1e30, -1e12, -7.5, -0.2])
    def test_against_mpmath(self, z):
        for a, b, c in ((1.0, 0.53, 1.53), (2.3, 0.7, 3.1), (0.5, 1.5, 2.2)):
            ref = float(mp.hyp2f1(a, b, c, z))
            assert hyp2f1_nonpos(a, b, c, z) == pytest.approx(ref, rel=1e-12)

    def test_broadcasts_and_keeps_shape(self):
        z = -np.logspace(-2, 6, 12).reshape(3, 4)
        out = hyp2f1_nonpos(1.0, 0.4, 1.4, z)
        assert out.shape == (3, 4)
        assert out[1, 2] == pytest.approx(hyp2f1_nonpos(1.0, 0.4, 1.4, z[1, 2]), rel=1e-15)

    def test_positive_argument_rejected(self):
        with pytest.raises(DomainError):
            hyp2f1_nonpos(1, 1, 2, 0.5)

    def test_pole_in_c_rejected(self):
        with pytest.raises(DomainError):
            hyp2f1_nonpos(1, 1, -2.0, -0.5)


class TestRho:
    @pytest.mark.parametrize("alpha, beta", [(2.09, 1), (3.75, 1), (3.75, 2), (2.09, 2)])
    def test_zero_t_is_power(self, alpha, beta):
        for d in (1e-3, 0.3, 7.0):
            expected = d ** (beta + 1) / (beta + 1)
            assert abs(rho1(alpha, beta, 0.0, d) - expected) <= 2 * np.spacing(expected)

    def test_zero_width(self):
        assert rho1(3.0, 1.0, 2.0, 0.0) == 0.0

    def test_infinite_start(self):
        assert rho2(3.75, 1.0, 2.0, math.inf) == 0.0

    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(2.05, 4.5),
        st.sampled_from([1.0, 2.0]),
        st.floats(-4, 4),
        st.floats(-3, 1),
    )
    def test_halves_sum_to_full_integral(self, alpha, beta, log_t, log_d):
        if alpha - beta - 1 < 0.05:
            return
        t, d = 10.0**log_t, 10.0**log_d
        total = rho1(alpha, beta, t, d) + rho2(alpha, beta, t, d)
        assert total == pytest.approx(full_integral(alpha, beta, t), rel=1e-11)

    def test_divergent_tail_rejected(self):
        with pytest.raises(DomainError):
            rho2(2.0, 1.0, 1.0, 1.0)

    def test_near_pole_flagged(self):
        with pytest.raises(ParameterError):
            rho2(2.0 + 1e-8, 1.0, 1.0, 1.0)

    def test_negative_inputs_rejected(self):
        with pytest.raises(DomainError):
            rho1(3.0, 1.0, -1.0, 1.0)
        with pytest.raises(DomainError):
            rho2(3.0, 1.0, 1.0, 0.0)
