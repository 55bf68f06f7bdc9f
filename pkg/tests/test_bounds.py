import itertools
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from svmcomplexity.bounds import (
    PolyDeviationInputs,
    VapnikBoundInputs,
    a_of_p,
    chebyshev_deviation_bound,
    check_inf_swap,
    clipped_poly_deviation_bound,
    curly_E,
    curly_E_peak,
    estimate_J,
    estimate_moments,
    estimate_tau,
    info_complexity_asymptotic,
    info_complexity_numeric,
    poly_risk_deviation_bound,
    terms_in_gy,
    terms_in_x,
    vapnik_relative_bound,
    vc_dim_affine,
    vc_dim_hinge_loss_family,
    vc_dim_polynomial,
)
from svmcomplexity.exceptions import InvalidInputError
from svmcomplexity.model import AffineSeparator, Dataset, Hinge

mp.mp.dps = 40


def mp_a(p):
    p = mp.mpf(p)
    return mp.power(2, -1 / p) * mp.power((p - 1) / (p - 2), (p - 1) / p)


def mp_E(n, h, delta):
    n, h, delta = mp.mpf(n), mp.mpf(h), mp.mpf(delta)
    return 4 * (h * (mp.log(2 * n / h) + 1) - mp.log(delta / 8)) / n


# -- a(p) and E -------------------------------------------------------------


def test_a_of_p_values():
    assert a_of_p(3) == pytest.approx(2 ** (1 / 3), rel=1e-12)
    assert a_of_p(4) == pytest.approx(float(mp_a(4)), rel=1e-12)
    assert a_of_p(4) == pytest.approx(1.139754, abs=1e-6)


def test_a_of_p_limit_from_above():
    vals = [a_of_p(p) for p in (10, 100, 1000)]
    assert all(v > 1 for v in vals)
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] - 1 < 1e-2


@given(st.floats(2.0001, 1e6))
def test_a_of_p_finite_and_above_floor(p):
    a = a_of_p(p)
    assert math.isfinite(a) and a > 2 ** (-1 / p)


def test_a_of_p_rejects_p_two():
    with pytest.raises(InvalidInputError):
        a_of_p(2)


def test_curly_E_value():
    assert curly_E(1000, 10, 0.05) == pytest.approx(float(mp_E(1000, 10, 0.05)), rel=1e-12)
    assert curly_E(1000, 10, 0.05) == pytest.approx(0.272233, abs=1e-6)


def test_curly_E_monotone_and_vanishing():
    h, delta = 10, 0.05
    start = math.ceil(curly_E_peak(h, delta))
    grid = [curly_E(n, h, delta) for n in range(max(start, 1), 2000)]
    assert all(a > b for a, b in zip(grid, grid[1:]))
    tail = [curly_E(2**j, h, delta) for j in range(5, 41)]
    assert all(a > b for a, b in zip(tail, tail[1:]))
    assert tail[-1] < 1e-6
    assert curly_E(1000, h, 0.001) > curly_E(1000, h, 0.05)


# -- VC dimensions ----------------------------------------------------------


def test_vc_dims():
    assert (vc_dim_affine(9), vc_dim_hinge_loss_family(9)) == (10, 11)
    assert (vc_dim_affine(1), vc_dim_hinge_loss_family(1)) == (2, 3)
    assert vc_dim_polynomial(9, 1) == vc_dim_hinge_loss_family(9)


def separable(X, labels):
    """Is there (w, b) with label_i (w . x_i + b) >= 1 for all i?"""
    n, d = X.shape
    A = -labels[:, None] * np.c_[X, np.ones(n)]
    res = linprog(np.zeros(d + 1), A_ub=A, b_ub=-np.ones(n),
                  bounds=[(None, None)] * (d + 1), method="highs")
    return res.status == 0


def shattered(X):
    return all(separable(X, np.array(lab)) for lab in itertools.product([-1.0, 1.0], repeat=len(X)))


def test_affine_shattering_in_the_plane():
    rng = np.random.default_rng(0)
    assert shattered(rng.normal(size=(3, 2)))
    for _ in range(50):
        assert not shattered(rng.normal(size=(4, 2)))


# -- relative bound ----------------------------------------------------------


def test_bound_out_of_regime_and_zero_J():
    rep = vapnik_relative_bound(VapnikBoundInputs(100, 50, 0.05, 4, 2, 0.3))
    assert rep.bound_value == math.inf and not rep.in_valid_regime
    rep = vapnik_relative_bound(VapnikBoundInputs(10**6, 3, 0.05, 4, 2, 0.0))
    assert rep.bound_value == 0.0 and rep.in_valid_regime


def test_bound_matches_high_precision():
    rep = vapnik_relative_bound(VapnikBoundInputs(10**6, 3, 0.05, 4, 2, 0.1))
    x = 2 * mp_a(4) * mp.sqrt(mp_E(10**6, 3, 0.05))
    expected = mp.mpf("0.1") * x / (1 - x)
    assert rep.in_valid_regime
    assert rep.bound_value == pytest.approx(float(expected), rel=1e-12)
    assert str(rep).startswith("bound=") and "dropped=O(1/n)" in str(rep)


def test_bound_nonincreasing_on_tail():
    vals = [vapnik_relative_bound(VapnikBoundInputs(n, 11, 0.05, 4, 2, 0.5)).bound_value
            for n in range(2000, 200000, 997)]
    finite = [v for v in vals if math.isfinite(v)]
    assert finite and all(a >= b for a, b in zip(finite, finite[1:]))


def test_invalid_tau():
    with pytest.raises(InvalidInputError):
        VapnikBoundInputs(100, 3, 0.05, 4, 0.5, 0.1)


# -- inversion ----------------------------------------------------------------


def bound(n, h, delta, p, tau, J):
    return vapnik_relative_bound(VapnikBoundInputs(n, h, delta, p, tau, J)).bound_value


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.03, 0.01])
def test_inversion_definition(eps):
    n = info_complexity_numeric(eps, 0.05, 11, 1.0, 2.0, 4.0)
    assert bound(n, 11, 0.05, 4, 2, 1) <= eps < bound(n - 1, 11, 0.05, 4, 2, 1)


def test_inversion_monotone_in_eps():
    ns = [info_complexity_numeric(e, 0.05, 5, 0.5, 2.0, 4.0) for e in np.geomspace(0.5, 0.005, 12)]
    assert all(a <= b for a, b in zip(ns, ns[1:]))


def test_inversion_huge_eps_stops_at_regime_entry():
    # E(1, h, delta) > 1 for every valid input, so n = 1 is never in regime;
    # any eps is met at the first in-regime n.
    n = info_complexity_numeric(1e9, 0.05, 3, 0.0, 1.0, 4.0)
    assert bound(n, 3, 0.05, 4, 1, 0) == 0.0
    assert bound(n - 1, 3, 0.05, 4, 1, 0) == math.inf


@given(st.integers(500, 10**7))
def test_inversion_round_trip(n_star):
    b = bound(n_star, 5, 0.05, 4, 1.5, 0.2)
    if math.isfinite(b):
        assert info_complexity_numeric(b, 0.05, 5, 0.2, 1.5, 4.0) <= n_star


def test_asymptotic_value_and_scaling():
    expected = 3 * (4 * mp_a(4)) ** 2 * (2 * mp.log(10) + mp.log(mp.log(10))) / mp.mpf("0.01")
    got = info_complexity_asymptotic(0.1, 0.05, 1, 1.0, 2.0, 4.0)
    assert got == pytest.approx(float(expected), rel=1e-12)
    assert got == pytest.approx(3.39e4, rel=1e-2)
    # d + 2 doubles from 3 to 6
    assert info_complexity_asymptotic(0.1, 0.05, 4, 1.0, 2.0, 4.0) == pytest.approx(2 * got, rel=1e-14)
    assert info_complexity_asymptotic(0.5, 0.05, 1, 1.0, 2.0, 4.0) is None


def test_asymptotic_dominated_by_leading_term():
    ratios = []
    for eps in (1e-2, 1e-4, 1e-8, 1e-16):
        L = math.log(1 / eps)
        ratios.append((2 * L + math.log(L)) / (2 * L))
    assert all(a > b for a, b in zip(ratios, ratios[1:]))


def test_numeric_to_asymptotic_ratio_trend():
    r = [info_complexity_numeric(e, 0.05, 3, 1.0, 2.0, 4.0)
         / info_complexity_asymptotic(e, 0.05, 1, 1.0, 2.0, 4.0) for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(abs(a - 1) > abs(b - 1) for a, b in zip(r, r[1:]))


# -- deviation bounds ------------------------------------------------------------


def test_chebyshev():
    assert chebyshev_deviation_bound(2, 0.04, 10000) == pytest.approx(0.1)
    assert chebyshev_deviation_bound(0, 0.04, 10) == 0.0
    assert chebyshev_deviation_bound(1, 0.1, 400) == pytest.approx(
        2 * chebyshev_deviation_bound(1, 0.1, 1600)
    )


def test_poly_bound_constant_loss():
    b = poly_risk_deviation_bound(PolyDeviationInputs({(0, 0): -3.0}, 1.0, (1.0,), 0.05, 100, 1))
    assert b.value == pytest.approx(3 / math.sqrt(5))
    assert b.confidence == pytest.approx(0.95)


def test_poly_bound_term_scaling_with_M():
    coeffs = {(1, 0): 1.0}
    one = poly_risk_deviation_bound(PolyDeviationInputs(coeffs, 1.0, (1.0, 4.0), 0.05, 100, 2))
    two = poly_risk_deviation_bound(PolyDeviationInputs(coeffs, 2.0, (1.0, 4.0), 0.05, 100, 2))
    assert two.value == pytest.approx(2 * one.value)
    sq = {(2, 0): 1.0}
    one = poly_risk_deviation_bound(PolyDeviationInputs(sq, 1.0, (1.0, 4.0, 9.0), 0.05, 100, 2))
    two = poly_risk_deviation_bound(PolyDeviationInputs(sq, 2.0, (1.0, 4.0, 9.0), 0.05, 100, 2))
    assert two.value == pytest.approx(4 * one.value)


def test_poly_bound_squared_term_expansion():
    moments = (1.0, 2.5, 9.0)
    M, delta, n = 1.5, 0.01, 400
    expected = (1 * 3.0 * (2 * M) ** 2 + 2 * math.sqrt(2.5) * (2 * M) + 1) / math.sqrt(delta * n)
    coeffs = {(2, 0): 1.0, (1, 1): -2.0, (0, 2): 1.0}
    got = poly_risk_deviation_bound(PolyDeviationInputs(coeffs, M, moments, delta, n, 6))
    assert got.value == pytest.approx(expected, rel=1e-14)
    assert got.confidence == pytest.approx(0.94)


def test_poly_bound_vacuous_confidence():
    b = poly_risk_deviation_bound(PolyDeviationInputs({(1, 0): 1.0}, 1.0, (1.0, 4.0), 0.5, 100, 3))
    assert b.vacuous and b.confidence == 0.0


def test_clipped_bound_examples():
    zero = clipped_poly_deviation_bound({(0, 0): 2.0}, 1.0, 2.0, 0.05, 100)
    assert zero.value == 0.0
    b = clipped_poly_deviation_bound({(2, 0): 1.0}, 1.0, 0.0, 0.01, 10**4)
    assert b.value == pytest.approx(0.1)
    assert b.confidence == pytest.approx(0.99)


def test_term_counts():
    sq = {(2, 0): 1.0, (1, 1): -2.0, (0, 2): 1.0}
    assert terms_in_gy(sq) == 3
    assert terms_in_x(sq, 1) == 3
    assert terms_in_x(sq, 9) == 55


def test_estimate_moments():
    zeros = Dataset(np.zeros((5, 3)), np.ones(5))
    np.testing.assert_array_equal(estimate_moments(zeros, 3), [1, 1, 1, 1])
    unit = Dataset([[0.6, 0.8]], [1.0])
    np.testing.assert_allclose(estimate_moments(unit, 3), [1, 4, 16, 64])
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 2))
    got = estimate_moments(Dataset(X, np.ones(30)), 2)
    brute = [sum((math.hypot(*x) + 1) ** (2 * i) for x in X) / 30 for i in range(3)]
    np.testing.assert_allclose(got, brute, rtol=1e-12)


# -- checkable inequalities-----------------------------------------------------------


def test_inf_swap_examples():
    f = np.array([3.0, 1.0, 2.0])
    same = check_inf_swap(f, f)
    assert same.holds and same.lhs == 0.0 and same.rhs == 0.0
    shifted = check_inf_swap(f, f + 0.7)
    assert shifted.lhs == 0.0 and shifted.rhs == pytest.approx(1.4)
    with pytest.raises(InvalidInputError):
        check_inf_swap([1.0], [1.0, 2.0])


def test_inf_swap_randomized_1e5():
    rng = np.random.default_rng(2024)
    for _ in range(100_000):
        m = int(rng.integers(1, 101))
        f = rng.normal(size=m)
        g = f + rng.normal(scale=rng.uniform(0, 2), size=m)
        assert check_inf_swap(f, g).holds


def test_sigma_subadditivity_1e4():
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        support = int(rng.integers(2, 12))
        k = int(rng.integers(1, 5))
        probs = rng.dirichlet(np.ones(support))
        F = rng.normal(size=(k, support))
        c = rng.normal(size=k)

        def sigma(v):
            mean = probs @ v
            return math.sqrt(max(probs @ (v - mean) ** 2, 0.0))

        lhs = sigma(c @ F)
        rhs = sum(abs(ci) * sigma(fi) for ci, fi in zip(c, F))
        assert lhs <= rhs + 1e-9


def test_plug_in_tau_and_J():
    data = Dataset([[-1.0], [1.0], [0.5], [-0.2]], [-1.0, 1.0, -1.0, 1.0])
    seps = [AffineSeparator([1.0], 0.0), AffineSeparator([0.5], 0.1)]
    loss = Hinge()
    J = estimate_J(loss, data, seps)
    risks = [np.mean(loss.value(s.decision_function(data.X), data.y)) for s in seps]
    assert J == pytest.approx(min(risks))
    tau = estimate_tau(loss, data, seps, 4.0)
    assert tau >= 1.0
