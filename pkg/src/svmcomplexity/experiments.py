"""Seeded experiment harnesses: error decomposition, rate fits, and k-vs-n search.

Every trial gets its own seed spawned from the caller's seed and trials run
in index order, so a rerun with the same seed reproduces every number.
Risk differences are estimated on shared Monte Carlo draws (common random
numbers), which keeps the decomposition identity exact for the point
estimates and shrinks the standard errors of differences.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from .bounds import VapnikBoundInputs, vapnik_relative_bound
from .exceptions import InvalidInputError
from .gaussian import (
    GaussianPair,
    _seed_sequence,
    bayes_quadratic_surface,
    sample_pair,
    squared_risk_exact,
    squared_risk_minimizer,
    weighted_risks_mc,
)
from .model import Hinge, Loss, Squared, monomial_count
from .solver import SolverConfig, train_linear, train_polynomial

log = logging.getLogger(__name__)

CSV_FIELDS = ("n", "k", "e_inf", "e_inf_se", "e_alg", "e_alg_se", "e_total", "e_total_se", "bound")


@dataclass(frozen=True)
class RateFit:
    exponent: float
    intercept: float
    r_squared: float
    points: tuple

    def predict(self, n):
        return math.exp(self.intercept) * np.asarray(n, dtype=float) ** self.exponent


def fit_rate(points) -> RateFit:
    """Least-squares line through ``(ln n, ln error)``; the slope is the rate exponent."""
    pts = tuple((float(n), float(e)) for n, e in points)
    if len(pts) < 4:
        raise InvalidInputError("need at least 4 points")
    ns = np.array([p[0] for p in pts])
    errs = np.array([p[1] for p in pts])
    if np.any(ns < 1) or len(set(ns)) != len(ns):
        raise InvalidInputError("sample sizes must be distinct and at least 1")
    if not np.all(errs > 0) or not np.all(np.isfinite(errs)):
        raise InvalidInputError("errors must be positive and finite for a log-log fit")
    res = linregress(np.log(ns), np.log(errs))
    r2 = min(max(float(res.rvalue) ** 2, 0.0), 1.0)
    return RateFit(float(res.slope), float(res.intercept), r2, pts)


def _train(data, k, loss, config):
    if k == 1:
        return train_linear(data, loss, config)
    return train_polynomial(data, k, loss, config)


def theorem61_bound(d, n, k, delta, p, tau_k, J_k, e_alg_k, h=None) -> float:
    """Relative VC bound for degree-``k`` polynomials plus the algorithmic error.

    ``h`` defaults to ``monomial_count(d, k) + 1``, which is ``d + 2`` at
    ``k = 1``.  The ``O(1/n)`` remainder is dropped.  Out of regime gives ``inf``.
    """
    if k < 1:
        raise InvalidInputError("k must be at least 1")
    if e_alg_k < 0:
        raise InvalidInputError("e_alg must be non-negative")
    h = monomial_count(d, k) + 1 if h is None else h
    report = vapnik_relative_bound(VapnikBoundInputs(n, h, delta, p, tau_k, J_k))
    return report.bound_value + e_alg_k


def zero_one_tau(J: float, p: float) -> float:
    """``||L||_p / ||L||_1`` for a 0-1 loss of mean ``J``: ``J^(1/p - 1)``."""
    if J <= 0:
        return 1.0
    return max(J ** (1.0 / p - 1.0), 1.0)


@dataclass(frozen=True)
class DecompositionReport:
    n: int
    k: int
    e_inf_hat: float
    e_inf_se: float
    e_alg_hat: float
    e_alg_se: float
    e_total_hat: float
    e_total_se: float
    bound_rhs: float
    trial_risks: tuple = field(repr=False, default=())
    reference_risk: float = math.nan
    bayes_risk: float = math.nan

    @property
    def identity_gap(self) -> float:
        return abs(self.e_total_hat - (self.e_inf_hat + self.e_alg_hat))

    def row(self) -> dict:
        return {
            "n": self.n, "k": self.k,
            "e_inf": self.e_inf_hat, "e_inf_se": self.e_inf_se,
            "e_alg": self.e_alg_hat, "e_alg_se": self.e_alg_se,
            "e_total": self.e_total_hat, "e_total_se": self.e_total_se,
            "bound": self.bound_rhs,
        }


def estimate_error_decomposition(
    pair: GaussianPair,
    loss: Loss | None,
    n: int,
    k: int,
    trials: int = 200,
    n_mc: int = 100_000,
    seed=0,
    n_reference: int = 100_000,
    config: SolverConfig | None = None,
    delta: float = 0.05,
    p: float = 4.0,
) -> DecompositionReport:
    """Estimate ``e_inf(n, k)``, ``e_alg(k)`` and their sum for one ``(n, k)``.

    ``e_inf`` is an ERM proxy: the mean risk of models trained on ``n``
    points minus the risk of a model trained on ``n_reference`` points.
    """
    if trials < 10:
        raise InvalidInputError("need at least 10 trials")
    if k < 1 or n < 2:
        raise InvalidInputError("need k >= 1 and n >= 2")
    loss = loss or Hinge()
    config = config or SolverConfig(max_iterations=3_000)
    # Spawn tree: [reference, MC, trial_0 .. trial_{T-1}], independent of k.
    children = _seed_sequence(seed).spawn(trials + 2)
    ref_model = _train(sample_pair(pair, n_reference, children[0]), k, loss, config)
    models = [_train(sample_pair(pair, n, s), k, loss, config).separator for s in children[2:]]
    bayes = bayes_quadratic_surface(pair)
    est, _, cov, _, _ = weighted_risks_mc(pair, models + [ref_model.separator, bayes], n_mc, children[1])

    T = trials
    trial_risks = est[:T]
    r_ref, r_bayes = est[T], est[T + 1]

    def mc_var(a):
        return float(max(a @ cov @ a, 0.0))

    mean_w = np.zeros(T + 2)
    mean_w[:T] = 1.0 / T
    between = float(np.var(trial_risks, ddof=1)) / T
    a_inf = mean_w.copy()
    a_inf[T] = -1.0
    a_alg = np.zeros(T + 2)
    a_alg[T], a_alg[T + 1] = 1.0, -1.0
    a_tot = mean_w.copy()
    a_tot[T + 1] = -1.0

    e_inf = float(trial_risks.mean() - r_ref)
    e_alg = float(r_ref - r_bayes)
    e_total = float(trial_risks.mean() - r_bayes)
    J_k = float(r_ref)
    bound = theorem61_bound(pair.dim, n, k, delta, p, zero_one_tau(J_k, p), J_k, max(e_alg, 0.0))
    log.info("n=%d k=%d e_inf=%.4g e_alg=%.4g e_total=%.4g", n, k, e_inf, e_alg, e_total)
    return DecompositionReport(
        n, k,
        e_inf, math.sqrt(between + mc_var(a_inf)),
        e_alg, math.sqrt(mc_var(a_alg)),
        e_total, math.sqrt(between + mc_var(a_tot)),
        bound, tuple(float(r) for r in trial_risks), float(r_ref), float(r_bayes),
    )


@dataclass(frozen=True)
class ScaleResult:
    best_k: int
    table: tuple

    def to_csv(self) -> str:
        return reports_to_csv(self.table)


def scale_search(pair, loss, n, k_max, trials=20, seed=0, n_mc=100_000,
                 n_reference=100_000, config=None) -> ScaleResult:
    """Estimate ``e(n, k)`` for ``k = 1..k_max`` and pick the best degree.

    The pick is the smallest ``k`` whose total error lies within one
    combined standard error of the minimum, so statistical ties go to the
    simpler model.
    """
    if k_max < 1:
        raise InvalidInputError("k_max must be at least 1")
    monomial_count(pair.dim, k_max)
    table = tuple(
        estimate_error_decomposition(pair, loss, n, k, trials, n_mc, seed, n_reference, config)
        for k in range(1, k_max + 1)
    )
    totals = np.array([r.e_total_hat for r in table])
    i_min = int(np.argmin(totals))
    se_min = table[i_min].e_total_se
    for r in table:
        if r.e_total_hat <= totals[i_min] + math.hypot(r.e_total_se, se_min):
            return ScaleResult(r.k, table)
    return ScaleResult(table[i_min].k, table)  # pragma: no cover


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        row = r.row() if hasattr(r, "row") else dict(r)
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


@dataclass(frozen=True)
class RateOptimalityReport:
    fit: RateFit
    threshold: float
    passed: bool
    noise: float


def rate_optimality_check(
    ns=(128, 256, 512, 1024, 2048, 4096, 8192, 16384),
    trials: int = 200,
    noise: float = 0.2,
    seed=0,
    threshold: float = -0.6,
) -> RateOptimalityReport:
    """Deviation ``|R(g) - R_hat(g)|`` of a fixed non-constant loss, fitted against ``n``.

    ``x`` is uniform on ``{-1, +1}``, ``y = x`` flipped with probability
    ``noise``, ``g(x) = x`` and the hinge loss takes the values 0 and 2, so
    ``R(g) = 2 * noise`` exactly.
    """
    if not 0 < noise < 1:
        raise InvalidInputError("noise must lie in (0, 1) so the loss is non-constant")
    loss = Hinge()
    true_risk = 2.0 * noise
    children = _seed_sequence(seed).spawn(len(ns))
    points = []
    for n, ss in zip(ns, children):
        rng = np.random.default_rng(ss)
        x = rng.choice([-1.0, 1.0], size=(trials, n))
        flip = rng.random((trials, n)) < noise
        y = np.where(flip, -x, x)
        emp = loss.value(x, y).mean(axis=1)
        points.append((n, float(np.mean(np.abs(emp - true_risk)))))
    fit = fit_rate(points)
    return RateOptimalityReport(fit, threshold, fit.exponent >= threshold, noise)


@dataclass(frozen=True)
class SquaredRateReport:
    excess_fit: RateFit
    gap_fit: RateFit
    rows: tuple
    window: tuple = (-0.65, -0.35)

    @property
    def passed(self) -> bool:
        lo, hi = self.window
        return lo <= self.excess_fit.exponent <= hi and self.excess_fit.r_squared >= 0.9

    def to_csv(self) -> str:
        return reports_to_csv(self.rows)


def squared_loss_rate_experiment(
    pair: GaussianPair | None = None,
    ns=(128, 256, 512, 1024, 2048, 4096, 8192, 16384),
    trials: int = 200,
    seed=0,
    config: SolverConfig | None = None,
) -> SquaredRateReport:
    """Squared-loss affine ERM on a Gaussian pair: fitted decay of the excess risk.

    Both risks are exact (closed form), so the only randomness is the
    training sample.  The fit of the generalization gap
    ``|R(g_hat) - R_hat(g_hat)|`` is reported alongside.
    """
    if pair is None:
        pair = GaussianPair.from_arrays([1.0], [[1.0]], [-1.0], [[2.0]])
    config = config or SolverConfig(max_iterations=2_000)
    loss = Squared()
    r_star = squared_risk_exact(pair, squared_risk_minimizer(pair))
    children = _seed_sequence(seed).spawn(len(ns))
    rows, excess_pts, gap_pts = [], [], []
    for n, ss in zip(ns, children):
        excess, gap = [], []
        for ts in ss.spawn(trials):
            data = sample_pair(pair, n, ts)
            model = train_linear(data, loss, config)
            risk = squared_risk_exact(pair, model.separator)
            excess.append(risk - r_star)
            gap.append(abs(risk - model.final_empirical_risk))
        excess = np.array(excess)
        gap = np.array(gap)
        m, se = float(excess.mean()), float(excess.std(ddof=1) / math.sqrt(trials))
        rows.append({"n": n, "k": 1, "e_inf": m, "e_inf_se": se, "e_alg": 0.0, "e_alg_se": 0.0,
                     "e_total": m, "e_total_se": se, "bound": math.nan})
        excess_pts.append((n, m))
        gap_pts.append((n, float(gap.mean())))
        log.info("n=%d excess=%.4g gap=%.4g", n, m, gap.mean())
    return SquaredRateReport(fit_rate(excess_pts), fit_rate(gap_pts), tuple(rows))
