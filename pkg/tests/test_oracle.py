import math

import numpy as np
import pytest

from conftest import GOLDEN, brute_solvable
from gdirichlet.badapprox import liouville_theta
from gdirichlet.errors import BudgetError, ContractError
from gdirichlet.geometry import AffinePair
from gdirichlet.oracle import (
    approx_witnesses,
    dirichlet_constant_scan,
    dirichlet_on_window,
    iter_q_box,
    witness_interval,
)
from gdirichlet.weights import (
    DirichletExponent,
    Scaled,
    ScaledPower,
    StepFunction,
    TabulatedApprox,
    WeightSystem,
    f1,
    regularize_continuity,
)

WS11 = WeightSystem.powers([1.0], [1.0])


def fibonacci(limit):
    a, b = 1, 2
    out = []
    while a <= limit:
        out.append(a)
        a, b = b, a + b
    return out


class TestWitnessInterval:
    def test_integer_matrix(self):
        l, r = witness_interval(AffinePair([[0.0]]), [1], WS11, f1())
        assert l == 1.0 and r == math.inf

    def test_golden_q1(self):
        l, r = witness_interval(AffinePair([[0.618034]]), [1], WS11, f1())
        assert l == 1.0 and r == pytest.approx(1 / 0.381966, rel=1e-12)

    def test_golden_q2(self):
        l, r = witness_interval(AffinePair([[0.618034]]), [2], WS11, f1())
        assert l == 2.0 and r == pytest.approx(1 / 0.236068, rel=1e-12)

    def test_empty_interval(self):
        assert witness_interval(AffinePair([[GOLDEN]]), [1], WS11, ScaledPower(0.2, 1.0)) is None

    def test_zero_q_rejected(self):
        with pytest.raises(ContractError):
            witness_interval(AffinePair([[0.3]]), [0], WS11, f1())

    def test_weighted_left_end(self):
        ws = WeightSystem.powers([1.0], [0.5, 0.5])
        l, _ = witness_interval(AffinePair([[0.0, 0.0]]), [3, -2], ws, f1())
        assert l == pytest.approx(9.0)


class TestWindowVerdicts:
    def test_golden_dirichlet(self):
        rep = dirichlet_on_window(AffinePair([[GOLDEN]]), WS11, f1(), (1.0, 1e3))
        assert rep.verdict == "dirichlet_on_window" and rep.gaps == []

    def test_golden_small_constant_fails(self):
        # min_q q ||q theta|| is 0.382 at q = 1, so no interval for 0.2/T is ever nonempty
        rep = dirichlet_on_window(AffinePair([[GOLDEN]]), WS11, ScaledPower(0.2, 1.0), (1.0, 1e3))
        assert rep.verdict == "fails_on_window"
        assert rep.gaps == [(1.0, 1e3)]
        fib = fibonacci(1000)
        assert min(q * abs(q * GOLDEN - round(q * GOLDEN)) for q in fib) > 0.2

    def test_golden_half_constant_gaps_match_convergents(self):
        # 0.45/T: only convergents with q ||q theta|| <= 0.45 give intervals [q, 0.45/||q theta||]
        g = ScaledPower(0.45, 1.0)
        rep = dirichlet_on_window(AffinePair([[GOLDEN]]), WS11, g, (1.0, 1e3))
        ivals = []
        for q in range(1, 1001):
            r = abs(q * GOLDEN - round(q * GOLDEN))
            if q * r <= 0.45:
                ivals.append((float(q), 0.45 / r))
        assert {int(l) for l, _ in ivals} <= set(fibonacci(1000))
        ivals.sort()
        gaps, reach = [], 1.0
        for l, r in ivals:
            if l > reach:
                gaps.append((reach, l))
            reach = max(reach, r)
        if reach < 1e3:
            gaps.append((reach, 1e3))
        assert len(rep.gaps) == len(gaps)
        for (a, b), (c, d) in zip(rep.gaps, gaps):
            assert a == pytest.approx(c, rel=1e-12) and b == pytest.approx(d, rel=1e-12)

    def test_homogeneous_any_theta(self):
        rng = np.random.default_rng(7)
        ws = WeightSystem.powers([0.4, 0.6], [0.7, 0.3])
        g = DirichletExponent(ws)
        for _ in range(5):
            assert dirichlet_on_window(AffinePair(rng.random((2, 2))), ws, g, (1.0, 500.0)).ok

    def test_restrict_matches_fresh_run(self):
        rng = np.random.default_rng(8)
        g = ScaledPower(0.3, 1.0)
        for _ in range(20):
            pair = AffinePair(rng.random((1, 1)), rng.random(1))
            big = dirichlet_on_window(pair, WS11, g, (2.0, 1e4))
            for t in (1e2, 1e3):
                small = dirichlet_on_window(pair, WS11, g, (2.0, t))
                assert big.restrict(t).gaps == small.gaps

    def test_covers_against_brute_force(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            pair = AffinePair(rng.random((1, 2)), rng.random(1))
            ws = WeightSystem.powers([1.0], [0.5, 0.5])
            g = Scaled(0.5, DirichletExponent(ws))
            rep = dirichlet_on_window(pair, ws, g, (1.0, 400.0))
            for T in np.exp(rng.uniform(0, math.log(400.0), 10)):
                assert rep.covers(T) == brute_solvable(pair.theta, pair.eta, ws, g, T)

    def test_exact_hits_reported(self):
        rep = dirichlet_on_window(AffinePair([[0.5]]), WS11, f1(), (1.0, 10.0))
        assert (2,) in rep.exact_hits and rep.ok

    def test_window_validation(self):
        with pytest.raises(ContractError):
            dirichlet_on_window(AffinePair([[0.3]]), WS11, f1(), (0.5, 10.0))
        with pytest.raises(ContractError):
            dirichlet_on_window(AffinePair([[0.3]]), WS11, f1(), (10.0, 5.0))

    def test_budget(self):
        with pytest.raises(BudgetError) as info:
            dirichlet_on_window(AffinePair([[0.3]]), WS11, f1(), (1.0, 1e6), n_max=1000)
        assert info.value.attempted == 2_000_000

    def test_tabulated_needs_breakpoints(self):
        g = TabulatedApprox(ts=[1.0, 2.5, 10.0], vs=[1.0, 0.4, 0.1])
        with pytest.raises(ContractError):
            dirichlet_on_window(AffinePair([[0.3]]), WS11, g, (1.0, 10.0))
        h = regularize_continuity(StepFunction([2.5, 6.5], [1.0, 0.4, 0.1]), WS11.beta, 10.0)
        dirichlet_on_window(AffinePair([[0.3]]), WS11, h, (1.0, 10.0))

    def test_report_json(self, schema):
        rep = dirichlet_on_window(AffinePair([[0.0]]), WS11, f1(), (1.0, 50.0))
        out = rep.to_json()
        schema(out, "check_report")
        assert out["witnesses"][0]["interval"][1] == 50.0


def test_iter_q_box_enumerates_once():
    qs = np.concatenate(list(iter_q_box(np.array([2, 1, 3]), chunk=7)))
    assert len(qs) == 5 * 3 * 7 - 1
    assert len({tuple(q) for q in qs}) == len(qs)
    assert not np.any(np.all(qs == 0, axis=1))


class TestApproxWitnesses:
    def test_rational(self):
        wl = approx_witnesses(AffinePair([[1 / 3]]), WS11, f1(), 30.0)
        zero = {int(y[0]) for y, d in zip(wl.y, wl.distances) if d < 1e-12}
        assert zero == {3, 6, 9, 12, 15, 18, 21, 24, 27, 30}

    def test_golden_fibonacci(self):
        wl = approx_witnesses(AffinePair([[GOLDEN]]), WS11, f1(), 1000.0)
        ys = {int(y[0]) for y in wl.y}
        assert set(fibonacci(1000)) <= ys
        assert 2 in ys and wl.distances[list(wl.y[:, 0]).index(2)] == pytest.approx(0.236068,
                                                                                     abs=1e-6)

    def test_golden_small_constant(self):
        wl = approx_witnesses(AffinePair([[GOLDEN]]), WS11, ScaledPower(0.2, 1.0), 1e4)
        assert len(wl) == 0

    def test_separation(self):
        wl = approx_witnesses(AffinePair([[GOLDEN]]), WS11, f1(), 1e4, separation=10.0)
        assert np.all(wl.norms[1:] >= 10 * wl.norms[:-1])


class TestConstantScan:
    def test_golden_flip(self):
        grid = np.round(np.arange(0.30, 0.61, 0.01), 2)
        scan = dirichlet_constant_scan(AffinePair([[GOLDEN]]), WS11, (1.0, 1e4), grid)
        assert abs(scan.approx_flip - 1 / math.sqrt(5)) <= 0.01
        assert scan.to_json()["approx_flip"] == scan.approx_flip

    def test_half(self):
        scan = dirichlet_constant_scan(AffinePair([[0.5]]), WS11, (1.0, 100.0), [0.01, 0.1, 1.0])
        assert scan.approximable == [True, True, True]

    def test_liouville_flip_at_floor(self):
        theta = float(liouville_theta(3))
        grid = [0.01, 0.05, 0.1, 0.5]
        scan = dirichlet_constant_scan(AffinePair([[theta]]), WS11, (1.0, 100.0), grid,
                                       Y_max=2e6)
        assert scan.approx_flip == grid[0]
