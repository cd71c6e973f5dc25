import math

import numpy as np
import pytest
from scipy.integrate import quad

from densecell.errors import NumericalError
from densecell.quadrature import (
    GAUSS_WEIGHTS,
    KRONROD_WEIGHTS,
    NODES,
    integrate,
    integrate_batch,
    power_tail,
    rational_tail,
)


class TestRule:
    def test_weights_sum_to_interval_length(self):
        assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
        assert GAUSS_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)

    def test_gauss_nodes_are_legendre(self):
        x, _ = np.polynomial.legendre.leggauss(10)
        np.testing.assert_allclose(np.sort(NODES[GAUSS_WEIGHTS > 0]), x, atol=1e-15)

    @pytest.mark.parametrize("degree", range(0, 32))
    def test_kronrod_exact_to_degree_31(self, degree):
        exact = 0.0 if degree % 2 else 2.0 / (degree + 1)
        assert KRONROD_WEIGHTS @ NODES**degree == pytest.approx(exact, abs=1e-14)


class TestIntegrate:
    @pytest.mark.parametrize(
        "f, pts, exact",
        [
            (np.exp, [0.0, 1.0], math.e - 1.0),
            (lambda x: np.sqrt(x), [0.0, 1.0], 2.0 / 3.0),
            (lambda x: 1.0 / (1.0 + x * x), [-50.0, 0.0, 50.0], 2.0 * math.atan(50.0)),
            (lambda x: np.abs(x - 0.3), [0.0, 0.3, 1.0], 0.29),
        ],
    )
    def test_known_integrals(self, f, pts, exact):
        value, err = integrate(f, pts, abs_tol=1e-13, rel_tol=1e-13)
        assert value == pytest.approx(exact, abs=1e-12)
        assert err < 1e-11

    def test_matches_scipy(self):
        f = lambda x: np.sin(30 * x) * np.exp(-x)
        value, _ = integrate(f, [0.0, 3.0], abs_tol=1e-13)
        ref, _ = quad(f, 0.0, 3.0, epsabs=1e-14, limit=200)
        assert value == pytest.approx(ref, abs=1e-12)

    def test_strict_failure_carries_estimate(self):
        with pytest.raises(NumericalError) as info:
            integrate(lambda x: np.sin(1.0 / x), [1e-9, 1.0], abs_tol=1e-15, max_rounds=3)
        assert info.value.estimate is not None

    def test_non_strict_returns(self):
        value, err = integrate(lambda x: np.sin(1.0 / x), [1e-9, 1.0], abs_tol=1e-15, max_rounds=3,
                               strict=False)
        assert math.isfinite(value) and err > 0


class TestBatch:
    def test_independent_owners(self):
        k = np.array([1.0, 2.0, 5.0])

        def f(x, o):
            return np.cos(k[o][:, None] * x)

        res = integrate_batch(f, np.zeros(3), np.full(3, math.pi / 3), np.arange(3), 3, abs_tol=1e-13)
        np.testing.assert_allclose(res.value, np.sin(k * math.pi / 3) / k, atol=1e-13)
        assert res.converged.all()

    def test_owner_spread_over_intervals(self):
        lo = np.array([0.0, 1.0, 0.0])
        hi = np.array([1.0, 2.0, 2.0])
        res = integrate_batch(lambda x, o: x * x, lo, hi, np.array([0, 0, 1]), 2)
        np.testing.assert_allclose(res.value, [8.0 / 3.0, 8.0 / 3.0], atol=1e-14)


class TestTailMaps:
    def test_rational_tail(self):
        def f(v):
            x, jac = rational_tail(v, 1.0, 2.0)
            return np.exp(-x) * jac

        # the right end is never sampled by the open Gauss-Kronrod nodes
        value, _ = integrate(f, [0.0, 0.5, 1.0], abs_tol=1e-13)
        assert value == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_power_tail(self):
        # integral of x^-3.5 over [2, inf) with q = 1/(alpha - 2), alpha = 3.5 + 1
        q = 1.0 / 2.5

        def f(v):
            x, jac = power_tail(v, 2.0, q)
            return x**-3.5 * jac

        value, _ = integrate(f, [1e-300, 1.0], abs_tol=1e-14)
        assert value == pytest.approx(2.0**-2.5 / 2.5, rel=1e-12)
