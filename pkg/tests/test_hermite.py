import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.hermite_e import hermegauss

from gmlab.hermite import (
    Basis,
    PolySpec,
    hermite_eval,
    hermite_scaled,
    mehler_cov,
    multiplication_expand,
    poly_eval,
    small_variance_expansion,
)
from gmlab.rng import substream

# Independent oracle: explicit monomial expansions for low orders.
MONOMIAL_FORMS = {
    0: lambda x: np.ones_like(x),
    1: lambda x: x,
    2: lambda x: x**2 - 1,
    3: lambda x: x**3 - 3 * x,
    4: lambda x: x**4 - 6 * x**2 + 3,
    5: lambda x: x**5 - 10 * x**3 + 15 * x,
}


def gauss_weight_integral(func, nodes=60):
    """Quadrature oracle for E[func(Z)], Z ~ N(0,1), via probabilists' Gauss-Hermite."""
    x, w = hermegauss(nodes)
    w = w / math.sqrt(2 * math.pi)
    return math.fsum(wi * fi for wi, fi in zip(w, func(x)))


class TestHermiteEval:
    def test_order_zero_is_constant(self):
        assert hermite_eval(0, 3.7) == 1.0

    def test_h2_at_zero(self):
        assert hermite_eval(2, 0.0) == -1.0

    def test_h3_at_two(self):
        # oracle: x^3 - 3x at x=2 gives 8 - 6 = 2
        assert hermite_eval(3, 2.0) == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("q", range(6))
    def test_matches_monomial_forms(self, q):
        x = np.linspace(-5, 5, 201)
        expected = MONOMIAL_FORMS[q](x)
        got = hermite_eval(q, x)
        scale = np.maximum(1.0, np.abs(expected))
        assert np.max(np.abs(got - expected) / scale) < 1e-10

    def test_vector_input_shape(self):
        x = np.ones((3, 4))
        assert hermite_eval(2, x).shape == (3, 4)

    def test_order_guard(self):
        with pytest.raises(ValueError, match="exceeds"):
            hermite_eval(65, 0.0)
        with pytest.raises(ValueError, match="non-negative"):
            hermite_eval(-1, 0.0)

    @pytest.mark.parametrize("a", range(9))
    @pytest.mark.parametrize("b", range(9))
    def test_orthogonality_under_gaussian_weight(self, a, b):
        value = gauss_weight_integral(lambda x: hermite_eval(a, x) * hermite_eval(b, x))
        expected = math.factorial(a) if a == b else 0.0
        assert abs(value - expected) < 1e-9

    @given(st.integers(0, 20), st.floats(-5, 5))
    @settings(max_examples=80, deadline=None)
    def test_parity(self, q, x):
        sign = -1.0 if q % 2 else 1.0
        assert hermite_eval(q, -x) == pytest.approx(sign * hermite_eval(q, x), rel=1e-12, abs=1e-9)


class TestHermiteScaled:
    def test_unit_variance_collapses(self):
        assert hermite_scaled(2, 1.0, 1.0) == pytest.approx(0.0, abs=1e-14)

    def test_quadratic_scaled(self):
        # 2^2 * H_2(0) = -4
        assert hermite_scaled(2, 4.0, 0.0) == pytest.approx(-4.0, abs=1e-12)

    def test_linear_scaled(self):
        # sigma^q H_q(x/sigma) with q=1, sigma=3, x=3: 3 * H_1(1) = 3
        assert hermite_scaled(1, 9.0, 3.0) == pytest.approx(3.0, abs=1e-12)

    def test_variance_guard(self):
        with pytest.raises(ValueError, match="positive"):
            hermite_scaled(2, 0.0, 1.0)

    def test_second_moment_matches_orthogonality_weight(self):
        # E[H_q(X; v)^2] = q! v^q for X ~ N(0, v); reduce to a standard-normal integral
        v = 2.5
        q = 3
        value = gauss_weight_integral(lambda z: hermite_scaled(q, v, math.sqrt(v) * z) ** 2)
        assert value == pytest.approx(math.factorial(q) * v**q, rel=1e-10)


class TestPolySpec:
    def test_rank_and_top_order(self):
        spec = PolySpec({1: 2.0, 3: 1.0})
        assert spec.m == 1 and spec.p == 3

    def test_zero_coefficients_dropped(self):
        spec = PolySpec({1: 0.0, 2: 1.0})
        assert spec.coeffs == {2: 1.0}
        assert spec.m == 2

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            PolySpec({1: 0.0})

    def test_order_cap(self):
        with pytest.raises(ValueError, match="cap"):
            PolySpec({9: 1.0})

    @given(st.dictionaries(st.integers(0, 8), st.floats(-3, 3, allow_nan=False), min_size=1))
    @settings(max_examples=60, deadline=None)
    def test_invariants_hold_when_constructible(self, coeffs):
        try:
            spec = PolySpec(coeffs)
        except ValueError:
            return
        assert spec.m <= spec.p
        assert spec.coeffs[spec.m] != 0.0 and spec.coeffs[spec.p] != 0.0


class TestPolyEval:
    def test_fixed_ignores_variance(self):
        spec = PolySpec({2: 1.0}, Basis.FIXED)
        assert poly_eval(spec, 0.0, current_variance=5.0) == -1.0

    def test_adapted_scales(self):
        spec = PolySpec({2: 1.0}, Basis.ADAPTED)
        assert poly_eval(spec, 0.0, current_variance=5.0) == pytest.approx(-5.0, abs=1e-12)

    def test_mixed_orders(self):
        spec = PolySpec({1: 2.0, 3: 1.0}, Basis.FIXED)
        # 2*H_1(1) + H_3(1) = 2 + (1 - 3) = 0
        assert poly_eval(spec, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_vectorized_matches_termwise(self):
        spec = PolySpec({0: 0.5, 2: -1.0, 5: 0.25})
        x = np.linspace(-3, 3, 50)
        expected = 0.5 - hermite_eval(2, x) + 0.25 * hermite_eval(5, x)
        assert np.allclose(poly_eval(spec, x), expected, atol=1e-12)

    def test_adapted_matches_termwise(self):
        spec = PolySpec({1: 1.0, 4: 2.0}, Basis.ADAPTED)
        x = np.linspace(-3, 3, 33)
        v = 0.7
        expected = hermite_scaled(1, v, x) + 2.0 * hermite_scaled(4, v, x)
        assert np.allclose(poly_eval(spec, x, v), expected, atol=1e-12)


class TestMehlerCov:
    def test_exact_values(self):
        assert mehler_cov(2, 0.5) == pytest.approx(0.5, abs=1e-15)  # 2! * 0.25
        assert mehler_cov(3, 0.0) == 0.0
        assert mehler_cov(1, 1.0) == 1.0

    def test_domain_guard(self):
        with pytest.raises(ValueError, match=r"\[-1, 1\]"):
            mehler_cov(2, 1.5)

    @pytest.mark.parametrize("rho", [-0.9, -0.5, 0.0, 0.5, 0.9])
    @pytest.mark.parametrize("q", [1, 2, 3, 4])
    def test_monte_carlo_oracle(self, q, rho):
        n = 1_000_000
        rng = substream(2024, 500 + 10 * q + round(10 * rho))
        z1 = rng.standard_normal(n)
        z2 = rho * z1 + math.sqrt(1 - rho**2) * rng.standard_normal(n)
        prod = hermite_eval(q, z1) * hermite_eval(q, z2)
        est = prod.mean()
        # batch-means standard error: the raw product has enormous kurtosis
        # at q = 4 and the plain sample SE is itself too noisy
        batches = prod.reshape(1000, -1).mean(axis=1)
        se = batches.std(ddof=1) / math.sqrt(batches.size)
        assert abs(est - mehler_cov(q, rho)) <= 4 * se + 1e-12


class TestMultiplicationExpand:
    def test_unit_variance_identity(self):
        assert multiplication_expand(2, 1.0) == [(2, 1.0)]

    def test_q2_v4(self):
        # H_2(2z) = 4 z^2 - 1 = 4 H_2(z) + 3
        assert multiplication_expand(2, 4.0) == [(2, 4.0), (0, 3.0)]

    def test_q3_v4(self):
        # pointwise oracle: H_3(2z) = 8z^3 - 6z = 8 H_3(z) + 18 H_1(z)
        terms = dict(multiplication_expand(3, 4.0))
        assert terms == {3: 8.0, 1: 18.0}
        for z in (0.0, 0.5, 1.0):
            lhs = hermite_eval(3, 2 * z)
            rhs = sum(c * hermite_eval(r, z) for r, c in terms.items())
            assert lhs == pytest.approx(rhs, abs=1e-12)

    @pytest.mark.parametrize("v", [0.25, 1.0, 4.0])
    @pytest.mark.parametrize("q", range(1, 7))
    def test_pointwise_identity(self, q, v):
        z = substream(99, q).standard_normal(100) * 2.0
        lhs = hermite_eval(q, math.sqrt(v) * z)
        rhs = np.zeros_like(z)
        for order, coeff in multiplication_expand(q, v):
            rhs += coeff * hermite_eval(order, z)
        assert np.max(np.abs(lhs - rhs)) < 1e-9 * max(1.0, np.max(np.abs(lhs)))

    def test_variance_guard(self):
        with pytest.raises(ValueError, match="positive"):
            multiplication_expand(3, -1.0)

    @given(st.integers(1, 8), st.floats(0.05, 5.0))
    @settings(max_examples=60, deadline=None)
    def test_second_moment_consistency(self, q, v):
        # Var H_q(X) for X ~ N(0, v) equals the coefficient-weighted sum of r!
        terms = multiplication_expand(q, v)
        var_expanded = sum(c**2 * math.factorial(r) for r, c in terms if r >= 1)
        value = gauss_weight_integral(lambda z: hermite_eval(q, math.sqrt(v) * z) ** 2)
        mean = gauss_weight_integral(lambda z: hermite_eval(q, math.sqrt(v) * z))
        assert var_expanded == pytest.approx(value - mean**2, rel=1e-8, abs=1e-8)


class TestSmallVarianceExpansion:
    def test_pure_h2(self):
        exp = small_variance_expansion(PolySpec({2: 1.0}))
        assert exp.leading_power == 2
        assert exp.coeff[2, 2] == 1.0
        assert np.all(exp.coeff[1, :] == 0.0)

    def test_pure_h3(self):
        # H_3(dZ) = d^3 H_3(Z) + 3 d (d^2 - 1) H_1(Z): leading power d^1, coefficient -3
        exp = small_variance_expansion(PolySpec({3: 1.0}))
        assert exp.leading_power == 1
        assert exp.coeff[1, 1] == -3.0
        assert exp.coeff[1, 3] == 3.0 and exp.coeff[3, 3] == 1.0

    def test_pure_h1(self):
        exp = small_variance_expansion(PolySpec({1: 1.0}))
        assert exp.leading_power == 1
        assert exp.coeff[1, 1] == 1.0

    def test_basis_guard(self):
        with pytest.raises(ValueError, match="FIXED"):
            small_variance_expansion(PolySpec({2: 1.0}, Basis.ADAPTED))

    @given(
        st.dictionaries(st.integers(1, 5), st.sampled_from([-2.0, -1.0, 0.5, 1.0, 3.0]), min_size=1)
    )
    @settings(max_examples=80, deadline=None)
    def test_full_table_reconstructs_observable(self, coeffs):
        # The whole table is an exact identity: f(dZ) - Ef = sum_w d^w sum_r coeff[r,w] H_r(Z).
        spec = PolySpec(coeffs)
        exp = small_variance_expansion(spec)
        delta = 0.3
        z = np.linspace(-2.5, 2.5, 21)
        lhs = poly_eval(spec, delta * z)
        mean = gauss_weight_integral(lambda u: poly_eval(spec, delta * u))
        rhs = np.zeros_like(z)
        for w in range(1, spec.p + 1):
            for r in range(1, w + 1):
                if exp.coeff[r, w]:
                    rhs += delta**w * exp.coeff[r, w] * hermite_eval(r, z)
        scale = max(1.0, float(np.max(np.abs(lhs))))
        assert np.max(np.abs(lhs - mean - rhs)) < 1e-8 * scale

    @pytest.mark.parametrize("delta", [1e-2, 1e-3])
    def test_leading_term_dominates(self, delta):
        # ratio of empirical L2 norms: remainder after subtracting the leading
        # term is one power of delta smaller
        spec = PolySpec({2: 1.0, 3: 1.5})
        exp = small_variance_expansion(spec)
        z = substream(7, 1).standard_normal(100_000)
        f_vals = poly_eval(spec, delta * z)
        mean = gauss_weight_integral(lambda u: poly_eval(spec, delta * u))
        lead = np.zeros_like(z)
        for r, c in exp.leading_coeffs().items():
            lead += c * hermite_eval(r, z)
        lead *= delta**exp.leading_power
        centered = f_vals - mean
        resid_norm = np.sqrt(np.mean((centered - lead) ** 2))
        lead_norm = np.sqrt(np.mean(lead**2))
        assert resid_norm / lead_norm < 10 * delta
