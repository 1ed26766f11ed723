import math

import numpy as np
import pytest

from gdirichlet.errors import CertificateError, ContractError, DomainError, ExtrapolationError
from gdirichlet.weights import (
    DirichletExponent,
    DualApprox,
    Power,
    PowerLog,
    PowerLogDecay,
    ProductWeight,
    ScaledPower,
    StepFunction,
    TabulatedApprox,
    TabulatedPiecewiseLinear,
    WeightSystem,
    breakpoint_set,
    certify_quasimultiplicative,
    changing_weights_rows,
    emit_changing_weights_csv,
    f1,
    gamma_functions,
    hat_linearize,
    merge_certificates,
    nearest_integer_distance,
    predicted_ratio_bounds,
    regularize_continuity,
    strictify,
    weighted_norm,
)


class TestEvaluation:
    def test_normalization(self):
        assert Power(0.5)(1.0) == 1.0

    def test_reflection(self):
        assert Power(2 / 3)(1 / 8) == pytest.approx(0.25, rel=1e-12)

    def test_zero_and_negative(self):
        assert Power(0.3)(0.0) == 0.0
        with pytest.raises(DomainError):
            Power(0.3)(-1.0)

    def test_gamma1_at_square_of_five(self):
        g1, _ = gamma_functions()
        assert g1(math.exp(25.0)) == pytest.approx(math.exp(25.0 / 3.0), rel=1e-9)

    def test_inverse_examples(self):
        assert Power(0.5).inverse(3.0) == pytest.approx(9.0, rel=1e-12)
        g1, _ = gamma_functions()
        assert g1.inverse(math.exp(25.0 / 3.0)) == pytest.approx(math.exp(25.0), rel=1e-9)

    @pytest.mark.parametrize("h", [Power(0.3), PowerLog([1.0, 1.0]), gamma_functions()[0],
                                   TabulatedPiecewiseLinear([[2.0, 3.0], [10.0, 50.0]]),
                                   ProductWeight([Power(0.5), gamma_functions()[1]])])
    def test_round_trip(self, h):
        T = np.geomspace(1e-6, 1e6, 301)
        back = np.asarray(h.inverse(h(T)))
        np.testing.assert_allclose(back, T, rtol=1e-9)

    def test_reflection_rule_general(self):
        for h in (PowerLog([1.0, 2.0]), gamma_functions()[1]):
            T = np.geomspace(1e-4, 1e4, 50)
            np.testing.assert_allclose(h(T) * h(1 / T), 1.0, rtol=1e-12)

    def test_product_of_powers_is_closed_form(self):
        p = ProductWeight([Power(0.25), Power(0.75)])
        assert p(7.0) == pytest.approx(7.0, rel=1e-14)


class TestNorms:
    def test_zero(self):
        assert weighted_norm([0.0, 0.0], [Power(0.5), Power(0.5)]) == 0.0

    def test_example(self):
        assert weighted_norm([0.5, 0.25], [Power(0.5), Power(0.5)]) == pytest.approx(0.25)

    def test_unit_vectors(self):
        w = [Power(0.2), gamma_functions()[0], PowerLog([1.0, 1.0])]
        assert weighted_norm([1.0, -1.0, 1.0], w) == pytest.approx(1.0)

    def test_distance(self):
        assert nearest_integer_distance([3.0, -2.0], [Power(1), Power(1)]) == 0.0
        assert nearest_integer_distance([2.3], [Power(1.0)]) == pytest.approx(0.3)
        assert nearest_integer_distance([1.5, 0.1], [Power(0.5)] * 2) == pytest.approx(0.25)

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            weighted_norm([1.0, 2.0], [Power(1.0)])


class TestCertificates:
    def test_power(self):
        cert = certify_quasimultiplicative(Power(0.4), 3.0, (-10, 10))
        assert cert.c1 == pytest.approx(3 ** 0.4, rel=1e-12)
        assert cert.c2 == pytest.approx(3 ** 0.4, rel=1e-12)

    def test_beta1_changing_weights(self):
        cert = certify_quasimultiplicative(gamma_functions()[0], math.e, (1, 40))
        assert cert.c1 == pytest.approx(math.exp(0.25), abs=1e-9)
        assert cert.c2 == pytest.approx(math.exp(0.75), abs=1e-9)

    def test_powerlog_ratios(self):
        h = PowerLog([1.0, 1.0])
        for k in (10, 20, 40):
            ratio = h(math.e ** (k + 1)) / h(math.e ** k)
            assert ratio == pytest.approx(math.e * (k + 1) / k, rel=1e-9)
        cert = certify_quasimultiplicative(h, math.e, (10, 40))
        assert math.e <= cert.c1 <= cert.c2 <= math.e * 11 / 10 + 1e-12

    def test_not_quasimultiplicative(self):
        with pytest.raises(CertificateError):
            certify_quasimultiplicative(Power(1e-18), math.e, (0, 3))

    def test_merge_and_predict(self):
        a = certify_quasimultiplicative(Power(0.3), math.e, (0, 10))
        b = certify_quasimultiplicative(Power(0.6), math.e, (2, 12))
        m = merge_certificates([a, b])
        assert m.k_range == (2, 10)
        assert m.c1 == pytest.approx(math.exp(0.3)) and m.c2 == pytest.approx(math.exp(0.6))
        lo, hi = predicted_ratio_bounds("product", a, b)
        assert lo == pytest.approx(math.exp(0.9)) and hi == pytest.approx(math.exp(0.9))
        assert predicted_ratio_bounds("reciprocal", a)[0] == pytest.approx(math.exp(-0.3))

    def test_compose_bounds_contain_actual(self):
        outer = certify_quasimultiplicative(Power(0.5), math.e, (-40, 40))
        inner = certify_quasimultiplicative(Power(1.5), math.e, (-40, 40))
        lo, hi = predicted_ratio_bounds("compose", outer, inner)
        actual = math.exp(0.75)
        assert lo <= actual <= hi


class TestHatLinearization:
    def test_power_nodes(self):
        h = Power(0.5)
        cert = certify_quasimultiplicative(h, 2.0, (0, 10))
        hat = hat_linearize(h, cert)
        nodes = 2.0 ** np.arange(0, 12)
        np.testing.assert_allclose(hat(nodes) / h(nodes), 1.0, rtol=1e-12)
        T = np.linspace(1, 2 ** 11, 2000)
        c2 = cert.c2
        assert np.all(hat(T) / c2 <= h(T) * (1 + 1e-12))
        assert np.all(h(T) <= c2 * hat(T) * (1 + 1e-12))

    def test_extrapolation_refused(self):
        h = Power(0.5)
        hat = hat_linearize(h, certify_quasimultiplicative(h, 2.0, (0, 4)))
        with pytest.raises(ExtrapolationError):
            hat(1000.0)

    def _beta1_slopes(self):
        h = gamma_functions()[0]
        cert = certify_quasimultiplicative(h, math.e, (1, 40))
        hat = hat_linearize(h, cert)
        T = np.exp(np.linspace(1.0, 41.0, 20001))
        return hat, T * hat.derivative(T) / hat(T)

    def test_beta1_lower_slope_bound(self):
        hat, log_slope = self._beta1_slopes()
        lam1, _ = hat.slope_bounds()
        assert lam1 == pytest.approx((math.exp(0.25) - 1) / (math.e - 1))
        assert log_slope.min() >= lam1 - 1e-12

    def test_beta1_upper_slope_needs_sharp_constant(self):
        # the usual (c2 - 1)/(M - 1) is exceeded when c2 < M; the sharp bound holds
        hat, log_slope = self._beta1_slopes()
        _, lam2 = hat.slope_bounds()
        assert lam2 == pytest.approx((math.exp(0.75) - 1) / (math.e - 1))
        assert log_slope.max() > lam2 + 0.1
        _, sharp = hat.sharp_slope_bounds()
        assert log_slope.max() <= sharp + 1e-12


class TestApproxFunctions:
    def test_f1_self_dual(self):
        g = f1().dual()
        T = np.geomspace(0.1, 100, 11)
        np.testing.assert_allclose(g(T), 1 / T, rtol=1e-12)

    def test_dual_of_scaled(self):
        # 1 / f^{-1}(1/T) with f = b/T is T^{-1}/b
        g = ScaledPower(2.0, 1.0).dual()
        assert g(3.0) == pytest.approx(1 / 6)
        g = DualApprox(ScaledPower(2.0, 1.0))
        assert g(3.0) == pytest.approx(1 / 6)

    def test_dual_of_square(self):
        assert ScaledPower(1.0, 2.0).dual()(4.0) == pytest.approx(0.5)
        assert DualApprox(ScaledPower(1.0, 2.0))(4.0) == pytest.approx(0.5)

    def test_dual_involution(self):
        g = PowerLogDecay(1.0, 1.0, 2.0)
        gg = DualApprox(DualApprox(g))
        T = np.geomspace(2, 1e8, 40)
        np.testing.assert_allclose(gg(T), g(T), rtol=1e-9)

    def test_dirichlet_exponent_powers(self):
        g = DirichletExponent(WeightSystem.powers([0.3, 0.7], [0.5, 0.5]))
        T = np.geomspace(1e-3, 1e6, 20)
        np.testing.assert_allclose(g(T), 1 / T, rtol=1e-12)
        g = DirichletExponent(WeightSystem([Power(2.0)], [Power(2.0)]))
        np.testing.assert_allclose(g(T), 1 / T, rtol=1e-12)

    def test_dirichlet_exponent_changing_weights(self):
        g = DirichletExponent(WeightSystem.changing_weights())
        T = np.geomspace(1, 1e12, 40)
        np.testing.assert_allclose(g(T), 1 / T, rtol=1e-9)

    def test_dirichlet_exponent_duality(self):
        ws = WeightSystem([Power(0.5), PowerLog([0.5, 1.0])], [gamma_functions()[0]])
        g = DirichletExponent(ws)
        g_t = DirichletExponent(ws.transpose())
        T = np.geomspace(1e-3, 1e3, 31)
        np.testing.assert_allclose(g_t(T), DualApprox(g)(T), rtol=1e-8)

    def test_powerlog_decay_level_sets(self):
        g = PowerLogDecay(1.0, 1.0, -1.0)
        v = np.geomspace(1e-9, 0.5, 30)
        np.testing.assert_allclose(g(g.level_set_sup(v)), v, rtol=1e-9)

    def test_step_function_level_sets(self):
        s = StepFunction([2.0, 5.0], [1.0, 0.5, 0.1])
        assert s(1.0) == 1.0 and s(2.0) == 0.5 and s.left_limit(2.0) == 1.0
        assert s.level_set_sup(0.5) == 5.0
        assert s.level_set_sup(0.05) == math.inf
        assert s.level_set_sup(2.0) == 0.0

    def test_step_function_has_no_dual(self):
        with pytest.raises(ContractError):
            StepFunction([2.0], [1.0, 0.5]).dual()


class TestRegularization:
    def test_breakpoints_sqrt(self):
        W = breakpoint_set([Power(0.5)], 30.0)
        for k in range(1, 31):
            assert k in W
        assert np.all(np.isin([1.0, 4.0, 9.0, 16.0, 25.0], W))

    def test_breakpoints_changing(self):
        b1, b2 = gamma_functions()
        W = breakpoint_set([b1, b2], 200.0)
        pts = np.asarray(b1.inverse(np.arange(1, math.floor(b1(200.0)) + 1)))
        assert np.all(np.isin(np.round(pts, 9), np.round(W, 9)))

    def test_step_values_on_W(self):
        rng = np.random.default_rng(3)
        jumps = np.sort(rng.uniform(1.5, 60.0, 8))
        values = np.sort(rng.uniform(0.01, 1.0, 9))[::-1]
        g = StepFunction(jumps, values)
        beta = [Power(0.5)]
        h = regularize_continuity(g, beta, 60.0)
        W = breakpoint_set(beta, 60.0)
        np.testing.assert_allclose(h(W[:-1]), g.left_limit(W[:-1]))

    def test_continuous_input_unchanged_on_W(self):
        g = PowerLogDecay(1.0, 1.0, 2.0)
        h = regularize_continuity(g, [Power(1.0)], 100.0)
        W = breakpoint_set([Power(1.0)], 100.0)
        np.testing.assert_allclose(h(W), g(W), rtol=1e-12)

    def test_strictify_strict_input(self):
        g = PowerLogDecay(1.0, 1.0, 2.0)
        hm, hp = strictify(g, 50.0)
        ls = np.arange(2, 51, dtype=float)
        np.testing.assert_allclose(hm(ls), g(ls + 1))
        np.testing.assert_allclose(hp(ls), g(ls - 1))

    def test_strictify_plateau(self):
        # h(3) = h(4) = h(5): minus at l = 4 becomes the midpoint of h(5), h(6)
        jumps = [2.0, 3.0, 6.0, 7.0]
        values = [1.0, 0.8, 0.5, 0.3, 0.2]
        h = StepFunction(jumps, values)
        hm, hp = strictify(h, 8.0)
        assert hm(4.0) == pytest.approx(0.5 * (h(5.0) + h(6.0)))
        assert hm.strict and hp.strict

    def test_strictify_sandwich(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            h = random_plateau_function(rng, 200)
            hm, hp = strictify(h, 200.0)
            T = np.linspace(1.0, 200.0, 1000)
            assert np.all(hm(T) <= h(T)) and np.all(h(T) <= hp(T))
            assert np.all(np.diff(hm(T)) < 0) and np.all(np.diff(hp(T)) < 0)


def random_plateau_function(rng, n):
    """Continuous nonincreasing piecewise-linear function on [1, n + 1] with plateaus."""
    steps = rng.exponential(1.0, n) * (rng.random(n) < 0.6)
    vals = 1.0 + steps[::-1].cumsum()[::-1]
    ts = np.arange(1, n + 2, dtype=float)
    return TabulatedApprox(ts=ts, vs=np.append(vals, 1.0))


class TestChangingWeightsData:
    def test_sum_is_t(self):
        t, g1, g2, _, _ = changing_weights_rows(625.0, 1001)
        np.testing.assert_allclose(g1 + g2, t, atol=1e-9)

    def test_touch_points(self):
        b1, _ = gamma_functions()
        for k in range(0, 4):
            assert b1.log_eval(np.array([5.0 ** (2 * k)]))[0] == pytest.approx(5.0 ** (2 * k) / 3)
            t = 5.0 ** (2 * k + 1)
            assert b1.log_eval(np.array([t]))[0] == pytest.approx(2 * t / 3)

    def test_values_at_25_and_125(self):
        b1, _ = gamma_functions()
        assert b1.log_eval(np.array([25.0]))[0] == pytest.approx(25 / 3)
        assert b1.log_eval(np.array([125.0]))[0] == pytest.approx(250 / 3)

    def test_between_the_lines(self):
        t, g1, _, phi1, phi2 = changing_weights_rows(625.0, 2001)
        assert np.all(g1 >= phi1 - 1e-9) and np.all(g1 <= phi2 + 1e-9)

    def test_csv_round_trip(self):
        text = emit_changing_weights_csv(625.0, 11)
        lines = text.strip().splitlines()
        assert lines[0] == "t,gamma1,gamma2,phi1,phi2"
        rows = [[float(x) for x in ln.split(",")] for ln in lines[1:]]
        cols = changing_weights_rows(625.0, 11)
        for r, row in enumerate(rows):
            assert row == [float(c[r]) for c in cols]


def test_tabulated_approx_rejects_increasing():
    with pytest.raises(ContractError):
        TabulatedApprox([[1.0, 0.5], [2.0, 0.7]])
