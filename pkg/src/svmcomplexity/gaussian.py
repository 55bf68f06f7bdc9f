"""Two-Gaussian laboratory: sampling, the Bayes quadric, and weighted risks.

Class +1 is ``N(mu_1, Sigma_1)`` and class -1 is ``N(mu_2, Sigma_2)``.  The
risk weights ``beta`` enter only the weighted risk
``beta_1 P_1(g < 0) + beta_2 P_2(g > 0)``; the sampling priors ``pi`` (default
equal to ``beta``) only decide how labelled training sets are drawn.

Random numbers come from NumPy's PCG64 generator (``default_rng(seed)``);
Monte Carlo estimates draw in fixed blocks whose seeds are spawned from the
caller's seed, so results do not depend on how blocks are scheduled.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import InvalidDistributionError, InvalidInputError, NotApplicableError
from .model import AffineSeparator, Dataset, Hinge, Loss, check_labels, decision_values
from .solver import SolverConfig, train_linear, train_polynomial

log = logging.getLogger(__name__)

MC_BLOCK = 65_536
MAX_DIM = 64


@dataclass(frozen=True)
class GaussianClass:
    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        d = mean.size
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        if cov.size == d * d:
            cov = cov.reshape(d, d)
        if mean.ndim != 1 or cov.shape != (d, d):
            raise InvalidDistributionError(f"covariance must be {d}x{d}")
        if d > MAX_DIM:
            raise InvalidInputError(f"dimension {d} exceeds the cap of {MAX_DIM}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidDistributionError("mean and covariance must be finite")
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise InvalidDistributionError("covariance is not symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise InvalidDistributionError("covariance is not positive definite") from None
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def precision(self) -> np.ndarray:
        return np.linalg.inv(self.cov)

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def logpdf(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        z = np.linalg.solve(self.chol, (X - self.mean).T)
        maha = np.sum(z * z, axis=0)
        return -0.5 * (maha + self.logdet + self.dim * math.log(2.0 * math.pi))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.mean + rng.standard_normal((n, self.dim)) @ self.chol.T


@dataclass(frozen=True)
class GaussianPair:
    """Class-conditional Gaussians with risk weights and sampling priors."""

    pos: GaussianClass
    neg: GaussianClass
    beta1: float = 0.5
    beta2: float | None = None
    pi1: float | None = None
    pi2: float | None = None

    def __post_init__(self):
        if self.pos.dim != self.neg.dim:
            raise InvalidInputError("both classes must live in the same dimension")
        beta2 = 1.0 - self.beta1 if self.beta2 is None else float(self.beta2)
        pi1 = self.beta1 if self.pi1 is None else float(self.pi1)
        pi2 = 1.0 - pi1 if self.pi2 is None else float(self.pi2)
        for a, b, what in ((self.beta1, beta2, "risk weights"), (pi1, pi2, "priors")):
            if not (0 <= a <= 1 and 0 <= b <= 1) or abs(a + b - 1.0) > 1e-12:
                raise InvalidInputError(f"{what} must lie in [0, 1] and sum to 1")
        object.__setattr__(self, "beta1", float(self.beta1))
        object.__setattr__(self, "beta2", beta2)
        object.__setattr__(self, "pi1", pi1)
        object.__setattr__(self, "pi2", pi2)

    @classmethod
    def from_arrays(cls, mean_pos, cov_pos, mean_neg, cov_neg, beta1=0.5, pi1=None):
        return cls(GaussianClass(mean_pos, cov_pos), GaussianClass(mean_neg, cov_neg),
                   beta1=beta1, pi1=pi1)

    @property
    def dim(self) -> int:
        return self.pos.dim


@dataclass(frozen=True)
class QuadraticSurface:
    """``q(x) = x^T A x + b . x + c``; points with ``q(x) <= 0`` are labelled +1."""

    A: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape != (b.size, b.size):
            raise InvalidInputError("A must be d x d with d = len(b)")
        if np.max(np.abs(A - A.T), initial=0.0) > 1e-12:
            raise InvalidInputError("A must be symmetric")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def input_dim(self) -> int:
        return self.b.size

    def q(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.einsum("ij,jk,ik->i", X, self.A, X) + X @ self.b + self.c

    def decision_function(self, X) -> np.ndarray:
        # Sign flipped so that the shared ">= 0 means +1" rule applies.
        return -self.q(X)

    def dumps(self) -> str:
        fmt = lambda v: format(float(v), ".17g")  # noqa: E731
        lines = [f"quad d={self.input_dim}"]
        lines += [" ".join(fmt(v) for v in row) for row in self.A]
        lines.append(" ".join(fmt(v) for v in self.b))
        lines.append(fmt(self.c))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "QuadraticSurface":
        from .exceptions import ParseError

        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("quad d="):
            raise ParseError("expected header 'quad d=<d>'", 1)
        d = int(lines[0].split("=", 1)[1])
        if len(lines) != d + 3:
            raise ParseError(f"expected {d + 3} lines, found {len(lines)}")
        A = np.array([[float(v) for v in ln.split()] for ln in lines[1 : d + 1]])
        b = np.array([float(v) for v in lines[d + 1].split()])
        return cls(A, b, float(lines[d + 2]))


def sample_pair(pair: GaussianPair, n: int, seed) -> Dataset:
    """Draw ``n`` labelled points: label from the priors, then ``x`` via Cholesky."""
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < pair.pi1, 1.0, -1.0)
    z = rng.standard_normal((n, pair.dim))
    X = np.empty((n, pair.dim))
    pos = y > 0
    X[pos] = pair.pos.mean + z[pos] @ pair.pos.chol.T
    X[~pos] = pair.neg.mean + z[~pos] @ pair.neg.chol.T
    return Dataset(X, y)


def bayes_quadratic_surface(pair: GaussianPair) -> QuadraticSurface:
    """The surface ``beta_1 rho_1(x) = beta_2 rho_2(x)`` written as ``q(x) = 0``.

    ``q(x) <= 0`` exactly when ``beta_1 rho_1(x) >= beta_2 rho_2(x)``.
    """
    P1, P2 = pair.pos.precision, pair.neg.precision
    m1, m2 = pair.pos.mean, pair.neg.mean
    A = P1 - P2
    A = 0.5 * (A + A.T)
    b = -2.0 * (P1 @ m1 - P2 @ m2)
    if pair.beta1 == 0 or pair.beta2 == 0:
        raise NotApplicableError("a zero risk weight makes the optimal surface degenerate")
    c = (
        m1 @ P1 @ m1
        - m2 @ P2 @ m2
        + 2.0 * math.log(pair.beta2) - 2.0 * math.log(pair.beta1)
        + pair.pos.logdet - pair.neg.logdet
    )
    return QuadraticSurface(A, b, c)


def bayes_log_ratio(pair: GaussianPair, X) -> np.ndarray:
    """``log(beta_1 rho_1(x)) - log(beta_2 rho_2(x))``, computed in log space."""
    with np.errstate(divide="ignore"):
        return (math.log(pair.beta1) + pair.pos.logpdf(X)) - (
            math.log(pair.beta2) + pair.neg.logpdf(X)
        )


@dataclass(frozen=True)
class RiskEstimate:
    estimate: float
    standard_error: float
    p_false_neg: float
    p_false_pos: float

    def __iter__(self):
        yield self.estimate
        yield self.standard_error


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _block_seeds(seed, n_mc):
    blocks = -(-n_mc // MC_BLOCK)
    return _seed_sequence(seed).spawn(blocks)


def _class_error_counts(cls: GaussianClass, seps, n_mc, seed, wrong_if_positive):
    """Misclassification counts of each separator on ``n_mc`` draws from ``cls``."""
    counts = np.zeros(len(seps), dtype=np.int64)
    paired = np.zeros((len(seps), len(seps)), dtype=np.int64)
    for i, ss in enumerate(_block_seeds(seed, n_mc)):
        size = min(MC_BLOCK, n_mc - i * MC_BLOCK)
        X = cls.sample(size, np.random.default_rng(ss))
        wrong = []
        for sep in seps:
            g = decision_values(sep, X)
            wrong.append(g >= 0 if wrong_if_positive else g < 0)
        W = np.array(wrong, dtype=np.int64)
        counts += W.sum(axis=1)
        paired += W @ W.T
    return counts, paired


def _mc_seeds(seed):
    pos_seed, neg_seed = _seed_sequence(seed).spawn(2)
    return pos_seed, neg_seed


def weighted_risks_mc(pair: GaussianPair, separators, n_mc: int, seed):
    """Weighted risks of several separators on shared draws (common random numbers).

    Returns ``(estimates, standard_errors, covariance)`` where ``covariance``
    is the estimated covariance matrix of the estimates; use it for the
    standard error of a difference between two separators.
    """
    if n_mc < 100:
        raise InvalidInputError("n_mc must be at least 100")
    seps = list(separators)
    pos_seed, neg_seed = _mc_seeds(seed)
    c1, s1 = _class_error_counts(pair.pos, seps, n_mc, pos_seed, wrong_if_positive=False)
    c2, s2 = _class_error_counts(pair.neg, seps, n_mc, neg_seed, wrong_if_positive=True)
    p1, p2 = c1 / n_mc, c2 / n_mc
    cov1 = (s1 / n_mc - np.outer(p1, p1)) / n_mc
    cov2 = (s2 / n_mc - np.outer(p2, p2)) / n_mc
    cov = pair.beta1**2 * cov1 + pair.beta2**2 * cov2
    est = pair.beta1 * p1 + pair.beta2 * p2
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return est, se, cov, p1, p2


def weighted_risk_mc(pair: GaussianPair, sep, n_mc: int, seed) -> RiskEstimate:
    """Monte Carlo ``beta_1 P_1(g < 0) + beta_2 P_2(g >= 0)`` with ``n_mc`` draws per class."""
    est, se, _, p1, p2 = weighted_risks_mc(pair, [sep], n_mc, seed)
    return RiskEstimate(float(est[0]), float(se[0]), float(p1[0]), float(p2[0]))


def _affine_class_errors(pair: GaussianPair, sep: AffineSeparator):
    w, b = sep.w, sep.b
    if w.size != pair.dim:
        raise InvalidInputError("separator dimension does not match the pair")
    s1 = math.sqrt(float(w @ pair.pos.cov @ w))
    s2 = math.sqrt(float(w @ pair.neg.cov @ w))
    m1 = float(w @ pair.pos.mean + b)
    m2 = float(w @ pair.neg.mean + b)
    if s1 == 0 or s2 == 0:
        return float(m1 < 0), float(m2 >= 0)
    return float(norm.cdf(-m1 / s1)), float(norm.sf(-m2 / s2))


def gaussian_linear_risk_exact(pair: GaussianPair, sep: AffineSeparator) -> float:
    """Exact weighted risk of an affine separator when both covariances agree."""
    if np.max(np.abs(pair.pos.cov - pair.neg.cov)) > 1e-10:
        raise NotApplicableError("closed form needs equal class covariances")
    if not np.any(sep.w != 0):
        raise NotApplicableError("closed form needs a non-zero weight vector")
    p1, p2 = _affine_class_errors(pair, sep)
    return pair.beta1 * p1 + pair.beta2 * p2


def _mixture_moments(pair: GaussianPair):
    """Second-moment matrix of ``(x, 1)`` and cross moment with ``y`` under the priors."""
    d = pair.dim
    S = np.zeros((d + 1, d + 1))
    r = np.zeros(d + 1)
    for cls, pi, label in ((pair.pos, pair.pi1, 1.0), (pair.neg, pair.pi2, -1.0)):
        z = np.append(cls.mean, 1.0)
        S += pi * (np.outer(z, z))
        S[:d, :d] += pi * cls.cov
        r += pi * label * z
    return S, r


def squared_risk_exact(pair: GaussianPair, sep: AffineSeparator) -> float:
    """``E (w.x + b - y)^2`` with labels drawn from the sampling priors."""
    S, r = _mixture_moments(pair)
    v = np.append(sep.w, sep.b)
    return float(v @ S @ v - 2.0 * r @ v + 1.0)


def squared_risk_minimizer(pair: GaussianPair) -> AffineSeparator:
    """Affine function of least squared risk (population normal equations)."""
    S, r = _mixture_moments(pair)
    v = np.linalg.solve(S, r)
    return AffineSeparator(v[:-1], float(v[-1]))


def hinge_risk_exact(pair: GaussianPair, sep: AffineSeparator) -> float:
    """``E (1 - y g(x))_+`` for an affine ``g`` with labels drawn from the priors.

    Under each class ``y g(x)`` is Gaussian with mean ``m`` and sd ``s``, and
    ``E (1 - Z)_+ = (1 - m) Phi(u) + s phi(u)`` with ``u = (1 - m) / s``.
    """
    total = 0.0
    for cls, pi, label in ((pair.pos, pair.pi1, 1.0), (pair.neg, pair.pi2, -1.0)):
        m = label * float(sep.w @ cls.mean + sep.b)
        s = math.sqrt(float(sep.w @ cls.cov @ sep.w))
        if s == 0:
            total += pi * max(1.0 - m, 0.0)
            continue
        u = (1.0 - m) / s
        total += pi * ((1.0 - m) * norm.cdf(u) + s * norm.pdf(u))
    return float(total)


def sigma_criterion(pair: GaussianPair, norm_kind: str = "frobenius") -> float:
    """``||Sigma_1^-1 - Sigma_2^-1||`` (Frobenius by default, or spectral)."""
    diff = pair.pos.precision - pair.neg.precision
    if norm_kind == "frobenius":
        return float(np.linalg.norm(diff, "fro"))
    if norm_kind == "spectral":
        return float(np.linalg.norm(diff, 2))
    raise InvalidInputError(f"unknown norm {norm_kind!r}")


@dataclass(frozen=True)
class AlgorithmicErrorReport:
    k: int
    raw: float
    standard_error: float
    risk_k: float
    risk_k_se: float
    bayes_risk: float
    bayes_risk_se: float
    separator: object = field(repr=False)

    @property
    def clamped(self) -> float:
        return max(self.raw, 0.0)


def default_lab_config() -> SolverConfig:
    return SolverConfig(max_iterations=3_000)


def _train(data, k, loss, config):
    if k == 1:
        return train_linear(data, loss, config)
    return train_polynomial(data, k, loss, config)


def algorithmic_error_report(
    pair: GaussianPair,
    k: int,
    n_train: int = 100_000,
    n_mc: int = 100_000,
    seed=0,
    loss: Loss | None = None,
    config: SolverConfig | None = None,
) -> AlgorithmicErrorReport:
    """Risk of a degree-``k`` model trained on ``n_train`` points minus the Bayes risk.

    Both risks use the same Monte Carlo draws, so the reported standard
    error is that of the paired difference.
    """
    if k < 1:
        raise InvalidInputError("k must be at least 1")
    loss = loss or Hinge()
    config = config or default_lab_config()
    train_seed, mc_seed = _seed_sequence(seed).spawn(2)
    data = sample_pair(pair, n_train, train_seed)
    model = _train(data, k, loss, config)
    bayes = bayes_quadratic_surface(pair)
    est, se, cov, _, _ = weighted_risks_mc(pair, [model.separator, bayes], n_mc, mc_seed)
    raw = float(est[0] - est[1])
    diff_se = math.sqrt(max(cov[0, 0] + cov[1, 1] - 2 * cov[0, 1], 0.0))
    log.info("e_alg(k=%d) raw estimate %.6g (se %.2g)", k, raw, diff_se)
    return AlgorithmicErrorReport(k, raw, diff_se, float(est[0]), float(se[0]),
                                  float(est[1]), float(se[1]), model.separator)


def algorithmic_error_estimate(pair, k, n_train=100_000, n_mc=100_000, seed=0, loss=None,
                               config=None) -> float:
    """``max(R(g_k) - R(g_0), 0)`` estimated by training on a large sample."""
    return algorithmic_error_report(pair, k, n_train, n_mc, seed, loss, config).clamped


def taylor_alg_error_bound(A_deriv: float, r: float, K: int) -> float:
    """Taylor remainder bound ``A r^(K+1) / (K+1)!``."""
    if A_deriv < 0 or r < 0 or K < 0:
        raise InvalidInputError("need A >= 0, r >= 0 and K >= 0")
    return A_deriv * r ** (K + 1) / math.factorial(K + 1)


class BayesQuadraticClassifier(ClassifierMixin, BaseEstimator):
    """Plug-in Bayes quadric: fit class means and covariances, then classify.

    Parameters
    ----------
    beta1 : float or None
        Weight on missed positives.  ``None`` uses the positive-class
        frequency of the training labels.
    reg : float
        Ridge added to both covariance estimates.
    """

    def __init__(self, beta1=None, reg=0.0):
        self.beta1 = beta1
        self.reg = reg

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        y = check_labels(y)
        self.classes_ = np.array([-1.0, 1.0])
        d = X.shape[1]
        parts = []
        for label in (1.0, -1.0):
            Xc = X[y == label]
            if len(Xc) < 2:
                raise InvalidInputError("each class needs at least two samples")
            cov = np.atleast_2d(np.cov(Xc, rowvar=False)) + self.reg * np.eye(d)
            parts.append(GaussianClass(Xc.mean(axis=0), 0.5 * (cov + cov.T)))
        beta1 = float(np.mean(y > 0)) if self.beta1 is None else self.beta1
        self.pair_ = GaussianPair(parts[0], parts[1], beta1=beta1)
        self.surface_ = bayes_quadratic_surface(self.pair_)
        self.n_features_in_ = d
        return self

    def decision_function(self, X):
        check_is_fitted(self, "surface_")
        return self.surface_.decision_function(check_array(X, dtype=float))

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, 1.0, -1.0)
