"""Acceptance criteria, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL ...`` line; the lines are
printed as they happen and again in the terminal summary.
"""

import itertools
import math
import time

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate
from scipy.optimize import minimize
from scipy.stats import norm

from conftest import ACCEPTANCE_LINES, WISCONSIN
from svmcomplexity.bounds import (
    PolyDeviationInputs,
    VapnikBoundInputs,
    a_of_p,
    chebyshev_deviation_bound,
    check_inf_swap,
    clipped_poly_deviation_bound,
    curly_E,
    estimate_J,
    estimate_tau,
    info_complexity_asymptotic,
    info_complexity_numeric,
    poly_risk_deviation_bound,
    terms_in_gy,
    terms_in_x,
    vapnik_relative_bound,
    vc_dim_affine,
    vc_dim_hinge_loss_family,
)
from svmcomplexity.datasets import REFERENCE_RATES, PIPELINES, ExperimentConfig, reproduce_table
from svmcomplexity.experiments import rate_optimality_check, scale_search, squared_loss_rate_experiment
from svmcomplexity.gaussian import (
    GaussianPair,
    QuadraticSurface,
    _mixture_moments,
    bayes_quadratic_surface,
    hinge_risk_exact,
    sample_pair,
    sigma_criterion,
    weighted_risk_mc,
    weighted_risks_mc,
)
from svmcomplexity.model import AffineSeparator, Dataset, Hinge, Squared, lift, monomial_count
from svmcomplexity.solver import SolverConfig, train_linear, train_polynomial

pytestmark = pytest.mark.slow


def record(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# 1 ---------------------------------------------------------------------------


def test_criterion_01_wisconsin_table():
    start = time.perf_counter()
    report = reproduce_table(ExperimentConfig(dataset_path=str(WISCONSIN), repetitions=10))
    elapsed = time.perf_counter() - start
    print(report.format())
    m = report.medians
    near = report.within_tolerance(0.05)
    detail = (
        f"medians nonlinear-3={m[PIPELINES[2]]:.4f} linear-9={m[PIPELINES[0]]:.4f} "
        f"linear-3={m[PIPELINES[1]]:.4f} (reference {REFERENCE_RATES[PIPELINES[2]]}/"
        f"{REFERENCE_RATES[PIPELINES[0]]}/{REFERENCE_RATES[PIPELINES[1]]}); ordering={report.ordering_holds} "
        f"within 0.05={all(near.values())}; {elapsed:.0f}s"
    )
    record(1, report.ordering_holds and all(near.values()) and elapsed <= 300, detail)


# 2 ---------------------------------------------------------------------------


def test_criterion_02_squared_loss_rate():
    start = time.perf_counter()
    rep = squared_loss_rate_experiment(trials=200, seed=0)
    elapsed = time.perf_counter() - start
    print(rep.to_csv())
    fit = rep.excess_fit
    detail = (
        f"excess-risk exponent={fit.exponent:.3f} r2={fit.r_squared:.4f} window [-0.65,-0.35]; "
        f"generalization-gap exponent={rep.gap_fit.exponent:.3f}; {elapsed:.0f}s"
    )
    record(2, rep.passed and elapsed <= 600, detail)


# 3 ---------------------------------------------------------------------------


def test_criterion_03_rate_lower_bound():
    exps = [rate_optimality_check(trials=200, seed=s).fit.exponent for s in range(20)]
    record(3, min(exps) >= -0.6,
           f"deviation exponents over 20 seeds in [{min(exps):.3f}, {max(exps):.3f}], need >= -0.6")


# 4 ---------------------------------------------------------------------------


TRIALS = 2000


def binomial_slack(level):
    return 3 * math.sqrt(level * (1 - level) / TRIALS)


def partial_moments(a, b):
    """E[Z^k 1{a < Z < b}] for k = 0, 1, 2 with Z standard normal."""
    Pa, Pb = norm.cdf(a), norm.cdf(b)
    pa, pb = norm.pdf(a), norm.pdf(b)
    m0 = Pb - Pa
    m1 = pa - pb
    m2 = m0 + np.nan_to_num(a * pa) - np.nan_to_num(b * pb)
    return m0, m1, m2


def clipped_squared_risk(pair, W, B, M0, C):
    """Exact risk of the clipped (g - y)^2 loss for affine g = W x + B (1-D, |y| = 1)."""
    total = 0.0
    for cls, pi, y in ((pair.pos, pair.pi1, 1.0), (pair.neg, pair.pi2, -1.0)):
        m = W * cls.mean[0] + B
        s = np.abs(W) * math.sqrt(cls.cov[0, 0])
        a, b = (-M0 - m) / s, (M0 - m) / s
        m0, m1, m2 = partial_moments(a, b)
        t = m - y
        inside = t**2 * m0 + 2 * t * s * m1 + s**2 * m2
        total = total + pi * (inside + C * (1 - m0))
    return total


def test_criterion_04_deviation_bounds_valid():
    rng = np.random.default_rng(44)
    results = []

    # Chebyshev: fixed g(x) = x, x uniform on {-1, 1}, labels flipped w.p. q; loss in {0, 2}
    q, n, delta = 0.2, 200, 0.05
    sigma = 2 * math.sqrt(q * (1 - q))
    bnd = chebyshev_deviation_bound(sigma, delta, n)
    flips = rng.binomial(n, q, size=TRIALS)
    freq = float(np.mean(np.abs(2 * flips / n - 2 * q) > bnd))
    results.append(("chebyshev", freq, delta))

    # polynomial loss: squared loss over {|w| + |b| <= 2M}, d = 1, known Gaussian pair
    pair = GaussianPair.from_arrays([0.5], [[1.0]], [-0.5], [[1.5]])
    coeffs = {(2, 0): 1.0, (1, 1): -2.0, (0, 2): 1.0}
    M, delta_p = 1.0, 0.01

    def moment(i):
        f = lambda x: (abs(x) + 1) ** (2 * i) * (  # noqa: E731
            pair.pi1 * norm.pdf(x, 0.5, 1.0) + pair.pi2 * norm.pdf(x, -0.5, math.sqrt(1.5)))
        return integrate.quad(f, -np.inf, np.inf)[0]

    moments = (1.0, moment(1), moment(2))
    l_terms = terms_in_x(coeffs, 1)
    poly = poly_risk_deviation_bound(PolyDeviationInputs(coeffs, M, moments, delta_p, n, l_terms))
    S, r = _mixture_moments(pair)
    t = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    radii = np.linspace(0, 2 * M, 9)[1:]
    V = np.concatenate([[[0.0, 0.0]]] + [
        rad * np.c_[np.cos(t), np.sin(t)] / (np.abs(np.cos(t)) + np.abs(np.sin(t)))[:, None]
        for rad in radii
    ])
    viol = 0
    for s in range(TRIALS):
        d = sample_pair(pair, n, rng.integers(2**63))
        Z = np.c_[d.X, np.ones(n)]
        dS = Z.T @ Z / n - S
        dr = Z.T @ d.y / n - r
        dev = np.einsum("ij,jk,ik->i", V, dS, V) - 2 * V @ dr
        viol += np.max(np.abs(dev)) > poly.value
    results.append(("poly (L1 ball)", viol / TRIALS, l_terms * delta_p))

    # clipped squared loss, sup over a grid of affine g
    M0, C = 1.5, 1.0
    m_terms = terms_in_gy(coeffs)
    clipped = clipped_poly_deviation_bound(coeffs, M0, C, delta_p, n, m_terms)
    w_grid = np.linspace(-3, 3, 30)  # even count keeps w = 0 out
    b_grid = np.linspace(-3, 3, 31)
    W, B = (a.ravel() for a in np.meshgrid(w_grid, b_grid))
    exact = clipped_squared_risk(pair, W, B, M0, C)
    viol = 0
    for s in range(TRIALS):
        d = sample_pair(pair, n, rng.integers(2**63))
        G = d.X[:, 0][:, None] * W + B
        inside = np.abs(G) <= M0
        emp = np.where(inside, (G - d.y[:, None]) ** 2, C).mean(axis=0)
        viol += np.max(np.abs(emp - exact)) > clipped.value
    results.append(("clipped", viol / TRIALS, m_terms * delta_p))

    ok = all(freq <= level + binomial_slack(level) for _, freq, level in results)
    detail = "; ".join(f"{name} violation {freq:.4f} vs level {level:.3f}" for name, freq, level in results)
    record(4, ok, detail + f" ({TRIALS} trials each)")


# 5 ---------------------------------------------------------------------------


def test_criterion_05_relative_bound_coverage():
    pair = GaussianPair.from_arrays([1.0], [[1.0]], [-1.0], [[2.0]])
    f = lambda v: hinge_risk_exact(pair, AffineSeparator(v[:1], v[1]))  # noqa: E731
    opt = minimize(f, [0.5, 0.0], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
    inf_risk = opt.fun
    n, delta, p, h = 10_000, 0.05, 4.0, vc_dim_hinge_loss_family(1)
    covered = in_regime = 0
    trials = 1000
    cfg = SolverConfig(max_iterations=1000)
    for s in range(trials):
        data = sample_pair(pair, n, 50_000 + s)
        model = train_linear(data, Hinge(), cfg)
        tau = estimate_tau(Hinge(), data, [model.separator], p)
        J = estimate_J(Hinge(), data, [model.separator])
        rep = vapnik_relative_bound(VapnikBoundInputs(n, h, delta, p, tau, J))
        excess = hinge_risk_exact(pair, model.separator) - inf_risk
        if rep.in_valid_regime:
            in_regime += 1
            covered += rep.bound_value >= excess
        else:
            assert rep.bound_value == math.inf
    if in_regime == trials:
        ok = covered / trials >= 0.95
        detail = f"coverage {covered}/{trials} = {covered / trials:.3f} (need >= 0.95), all in regime"
    else:
        ok = in_regime == 0
        detail = f"{trials - in_regime} trials out of regime, reported as inf"
    record(5, ok, detail)


# 6 ---------------------------------------------------------------------------


def test_criterion_06_complexity_inversion():
    delta, d, J, tau, p = 0.05, 3, 1.0, 2.0, 4.0
    h = vc_dim_hinge_loss_family(d)

    def bound(n):
        return vapnik_relative_bound(VapnikBoundInputs(n, h, delta, p, tau, J)).bound_value

    grid = np.geomspace(0.5, 1e-3, 20)
    round_trip = True
    for eps in grid:
        n = info_complexity_numeric(eps, delta, h, J, tau, p)
        round_trip &= bound(n) <= eps < bound(n - 1)
    ratios = [info_complexity_numeric(e, delta, h, J, tau, p) / info_complexity_asymptotic(e, delta, d, J, tau, p)
              for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    trend = all(abs(a - 1) > abs(b - 1) for a, b in zip(ratios, ratios[1:]))
    record(6, round_trip and trend,
           f"round trip on 20-point grid={round_trip}; ratios {', '.join(f'{r:.3f}' for r in ratios)}")


# 7 ---------------------------------------------------------------------------


def competitor_suite(pair, bayes, rng):
    d = pair.dim
    suite = []
    for i in range(5):
        data = sample_pair(pair, 200, rng.integers(2**63))
        cfg = SolverConfig(max_iterations=1000, seed=i)
        suite.append(train_linear(data, Hinge(), cfg).separator)
        suite.append(train_polynomial(data, 2, Hinge(), cfg).separator)
    while len(suite) < 50:
        scale = rng.choice([0.05, 0.2, 0.5])
        E = rng.normal(scale=scale, size=(d, d))
        suite.append(QuadraticSurface(bayes.A + 0.5 * (E + E.T),
                                      bayes.b + rng.normal(scale=scale, size=d),
                                      bayes.c + rng.normal(scale=scale)))
        w = -bayes.b + rng.normal(scale=0.5, size=d)
        suite.append(AffineSeparator(w, float(-bayes.c + rng.normal(scale=0.5))))
    return suite[:50]


def test_criterion_07_gaussian_optimality():
    rng = np.random.default_rng(7)
    worst = math.inf
    ok = True
    for i in range(10):
        d = int(rng.integers(1, 4))
        A1, A2 = rng.normal(size=(d, d)), rng.normal(size=(d, d))
        pair = GaussianPair.from_arrays(rng.normal(size=d), A1 @ A1.T + 0.3 * np.eye(d),
                                        rng.normal(size=d), A2 @ A2.T + 0.3 * np.eye(d),
                                        beta1=float(rng.uniform(0.2, 0.8)))
        bayes = bayes_quadratic_surface(pair)
        suite = competitor_suite(pair, bayes, rng)
        est, _, cov, _, _ = weighted_risks_mc(pair, [bayes] + suite, 100_000, 1000 + i)
        for j in range(1, len(suite) + 1):
            se = math.sqrt(max(cov[0, 0] + cov[j, j] - 2 * cov[0, j], 0.0))
            margin = est[j] + 3 * se - est[0]
            worst = min(worst, margin)
            ok &= margin >= 0
    sym = GaussianPair.from_arrays([1.0], [[1.0]], [-1.0], [[1.0]])
    r = weighted_risk_mc(sym, bayes_quadratic_surface(sym), 100_000, 0)
    phi = norm.cdf(-1)
    sym_ok = abs(r.estimate - phi) <= 3 * r.standard_error
    record(7, ok and sym_ok,
           f"Bayes dominates 10 pairs x 50 competitors (smallest slack {worst:.2e}); "
           f"symmetric 1-D risk {r.estimate:.6f} vs {phi:.6f} (se {r.standard_error:.1e})")


# 8 ---------------------------------------------------------------------------


def test_criterion_08_equal_covariance_reduction():
    rng = np.random.default_rng(8)
    S = rng.normal(size=(2, 2))
    S = S @ S.T + 0.5 * np.eye(2)
    eq_pair = GaussianPair.from_arrays([1.0, 0.0], S, [-1.0, 0.5], S)
    normA = float(np.linalg.norm(bayes_quadratic_surface(eq_pair).A, "fro"))
    eq_k = scale_search(eq_pair, None, 10_000, 3, trials=10, seed=0).best_k
    un_pair = GaussianPair.from_arrays([1.0, 0.0], np.eye(2), [-1.0, 0.0], [[0.4, 0.0], [0.0, 2.5]])
    crit = sigma_criterion(un_pair)
    un_k = scale_search(un_pair, None, 10_000, 3, trials=10, seed=0).best_k
    ok = normA <= 1e-10 and eq_k == 1 and crit >= 0.5 and un_k == 2
    record(8, ok, f"||A||_F={normA:.1e}; equal-cov best_k={eq_k}; criterion={crit:.3f} best_k={un_k}")


# 9 ---------------------------------------------------------------------------


def test_criterion_09_formula_units():
    mp.mp.dps = 40
    checks = {
        "a(3)": (a_of_p(3), mp.cbrt(2)),
        "a(4)": (a_of_p(4), mp.mpf(2) ** mp.mpf("-0.25") * mp.mpf("1.5") ** mp.mpf("0.75")),
        "E(1000,10,0.05)": (curly_E(1000, 10, 0.05),
                            4 * (10 * (mp.log(200) + 1) - mp.log(mp.mpf("0.05") / 8)) / 1000),
        "monomial_count(9,2)": (monomial_count(9, 2),
                                sum(1 for a in itertools.product(range(3), repeat=9) if sum(a) <= 2)),
        "vc_affine(7)": (vc_dim_affine(7), 8),
        "vc_hinge(7)": (vc_dim_hinge_loss_family(7), 9),
    }
    bad = [k for k, (got, want) in checks.items() if abs(got - float(want)) > 1e-9 * abs(float(want))]
    e_ok = abs(curly_E(1000, 10, 0.05) - 0.272233) < 1e-6
    record(9, not bad and e_ok, "all unit checks within 1e-9 relative" if not bad else f"mismatch: {bad}")


# 10 --------------------------------------------------------------------------


def test_criterion_10_property_suites():
    rng = np.random.default_rng(10)
    swap_ok = all(
        check_inf_swap(f, f + rng.normal(scale=rng.uniform(0, 2), size=f.size)).holds
        for f in (rng.normal(size=int(rng.integers(1, 101))) for _ in range(100_000))
    )

    sub = True
    for _ in range(10_000):
        m, k = int(rng.integers(2, 12)), int(rng.integers(1, 5))
        probs = rng.dirichlet(np.ones(m))
        F, c = rng.normal(size=(k, m)), rng.normal(size=k)

        def sigma(v):
            return math.sqrt(max(probs @ (v - probs @ v) ** 2, 0.0))

        sub &= sigma(c @ F) <= sum(abs(ci) * sigma(fi) for ci, fi in zip(c, F)) + 1e-9

    lift_ok = all(len(lift(np.ones(d), k)) == monomial_count(d, k) for d in range(1, 7) for k in range(1, 6))

    X = rng.normal(size=(40, 3))
    y = X @ [1.0, -2.0, 0.5] + rng.normal(size=40)
    data = Dataset(X, y)
    cfg = SolverConfig(max_iterations=5000, seed=3)
    m1, m2 = train_linear(data, Squared(), cfg), train_linear(data, Squared(), cfg)
    det = np.array_equal(m1.separator.w, m2.separator.w) and m1.separator.b == m2.separator.b
    A = np.c_[X, np.ones(40)]
    best = np.mean((A @ np.linalg.lstsq(A, y, rcond=None)[0] - y) ** 2)
    gap = m1.final_empirical_risk - best
    ok = swap_ok and sub and lift_ok and det and gap <= 1e-4
    record(10, ok, f"inf-swap 1e5={swap_ok} sigma-subadditivity 1e4={sub} lift={lift_ok} "
                   f"determinism={det} lstsq gap={gap:.1e}")
