"""Empirical risk minimization over affine and polynomial separators.

The optimizer is averaged projected subgradient descent with step
``step_scale / (S * sqrt(t))``, where ``S`` is the largest eigenvalue of the
(augmented) second-moment matrix times the loss curvature.  When the L1 bound
is unbounded, columns are centred and whitened before descent; affine ERM is
invariant under that reparametrization, so the minimizer set is unchanged.
With a finite bound the iterates stay in raw coordinates and are projected
onto ``{|w|_1 + |b| <= 2M}`` after every step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import DimensionCapError, InvalidInputError
from .model import (
    AffineSeparator,
    Dataset,
    Hinge,
    Loss,
    PolynomialSeparator,
    Squared,
    _lift_matrix,
    check_labels,
    decision_values,
    empirical_risk,
    labels_from_decision,
    monomial_count,
)

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
_STALL_WINDOW = 200
_EIG_LIMIT = 2000


def derive_seed(seed: int, index: int) -> int:
    """``seed XOR splitmix64(index)``: stable per-fold / per-candidate seeds."""
    z = (int(index) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return (int(seed) ^ z) & _MASK64


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 50_000
    step_scale: float = 1.0
    l1_bound: float = math.inf
    seed: int = 0
    tolerance: float = 1e-8
    max_lifted_dim: int = 100_000
    keep_trace: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be positive")
        if not self.step_scale > 0:
            raise InvalidInputError("step_scale must be positive")
        if not self.l1_bound > 0:
            raise InvalidInputError("l1_bound must be positive (use inf for unbounded)")
        if not self.tolerance > 0:
            raise InvalidInputError("tolerance must be positive")
        if not 0 <= self.seed <= _MASK64:
            raise InvalidInputError("seed must be an unsigned 64-bit integer")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.l1_bound)


@dataclass
class TrainedModel:
    separator: AffineSeparator | PolynomialSeparator
    final_empirical_risk: float
    iterations_used: int
    converged: bool
    best_effort: bool = False
    objective_trace: list[float] | None = field(default=None, repr=False)

    def summary(self) -> str:
        return (
            f"risk={self.final_empirical_risk!r} iters={self.iterations_used} "
            f"converged={str(self.converged).lower()}"
        )

    def decision_function(self, X):
        return self.separator.decision_function(X)


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{u : |u|_1 <= radius}`` (sort-based)."""
    if np.sum(np.abs(v)) <= radius:
        return v
    u = np.sort(np.abs(v))[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, u.size + 1)
    rho = np.nonzero(u * ks > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    out = np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)
    # Rounding can leave the sum a few ulps above the radius.
    excess = np.sum(np.abs(out)) - radius
    if excess > 0:
        out *= radius / (radius + excess)
    return out


def _curvature(loss: Loss) -> float:
    if isinstance(loss, Squared):
        return 2.0
    coeffs = getattr(loss, "coeffs", None)
    if coeffs:
        return max(1.0, 2.0 * abs(coeffs.get((2, 0), 0.0)))
    return 1.0


def _step_normalizer(A: np.ndarray) -> float:
    n, D = A.shape
    if D <= _EIG_LIMIT:
        gram = (A.T @ A) / n
        top = float(np.linalg.eigvalsh(gram)[-1])
    else:
        top = float(np.einsum("ij,ij->", A, A) / n)
    return max(top, 1e-12)


def _descend(X: np.ndarray, y: np.ndarray, loss: Loss, config: SolverConfig):
    """Minimize mean loss of ``X @ w + b``; returns (w, b, iters, converged, trace)."""
    n, D = X.shape
    shift = np.zeros(D)
    basis = np.eye(D)
    if not config.bounded:
        shift = X.mean(axis=0)
        centred = X - shift
        if D <= _EIG_LIMIT:
            # Whitening: ERM over affine maps is invariant under invertible
            # affine reparametrization; null directions of the data are dropped.
            evals, evecs = np.linalg.eigh(centred.T @ centred / n)
            keep = evals > max(evals[-1], 1e-300) * 1e-12
            basis = evecs[:, keep] / np.sqrt(evals[keep])
        else:
            sd = centred.std(axis=0)
            sd[sd == 0.0] = 1.0
            basis = np.diag(1.0 / sd)
        Z = centred @ basis
    else:
        Z = X
    r = Z.shape[1]
    A = np.empty((n, r + 1))
    A[:, :r] = Z
    A[:, r] = 1.0

    eta0 = config.step_scale / (_step_normalizer(A) * _curvature(loss))
    radius = 2.0 * config.l1_bound
    theta = np.zeros(r + 1)
    avg = theta.copy()
    best = theta.copy()
    best_f = math.inf
    window_best = math.inf
    trace = [] if config.keep_trace else None
    converged = False
    t = 0
    for t in range(1, config.max_iterations + 1):
        g = A @ theta
        f = float(np.mean(loss.value(g, y)))
        if trace is not None:
            trace.append(f)
        if f < best_f:
            best_f = f
            best = theta.copy()
        if best_f == 0.0:
            converged = True
            break
        grad = A.T @ loss.derivative(g, y) / n
        theta = theta - (eta0 / math.sqrt(t)) * grad
        if config.bounded:
            theta = project_l1_ball(theta, radius)
        avg += (theta - avg) / t
        if t % _STALL_WINDOW == 0:
            if window_best - best_f <= config.tolerance * max(1.0, abs(best_f)):
                converged = True
                break
            window_best = best_f

    f_avg = float(np.mean(loss.value(A @ avg, y)))
    chosen = avg if f_avg <= best_f else best
    w = basis @ chosen[:r]
    b = float(chosen[r] - np.dot(w, shift))
    return w, b, t, converged, trace


def _check_training_data(data: Dataset, loss: Loss):
    if len(data) == 0:
        raise InvalidInputError("cannot train on an empty dataset")
    if loss.classification:
        check_labels(data.y)


def train_linear(data: Dataset, loss: Loss, config: SolverConfig | None = None) -> TrainedModel:
    """Affine empirical risk minimizer (over ``G_1``, or its L1 ball if bounded)."""
    config = config or SolverConfig()
    _check_training_data(data, loss)
    w, b, iters, converged, trace = _descend(data.X, data.y, loss, config)
    sep = AffineSeparator(w, b)
    return TrainedModel(
        separator=sep,
        final_empirical_risk=empirical_risk(data, sep, loss),
        iterations_used=iters,
        converged=converged,
        best_effort=not loss.convex,
        objective_trace=trace,
    )


def train_polynomial(
    data: Dataset, k: int, loss: Loss, config: SolverConfig | None = None
) -> TrainedModel:
    """Degree-``k`` polynomial ERM via explicit monomial lifting."""
    config = config or SolverConfig()
    _check_training_data(data, loss)
    if k < 1:
        raise InvalidInputError("degree k must be at least 1")
    size = monomial_count(data.dim, k)
    if size > config.max_lifted_dim:
        raise DimensionCapError(
            f"lifted dimension {size} exceeds cap {config.max_lifted_dim}"
        )
    lifted = _lift_matrix(data.X, k, include_constant=False)
    w, b, iters, converged, trace = _descend(lifted, data.y, loss, config)
    sep = PolynomialSeparator(k, np.concatenate([[b], w]), data.dim)
    return TrainedModel(
        separator=sep,
        final_empirical_risk=empirical_risk(data, sep, loss),
        iterations_used=iters,
        converged=converged,
        best_effort=not loss.convex,
        objective_trace=trace,
    )


def kfold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle split into ``folds`` nearly equal parts."""
    if folds < 2 or folds > n:
        raise InvalidInputError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    order = np.random.default_rng(seed).permutation(n)
    return np.array_split(order, folds)


def cross_validated_risk(
    data: Dataset, loss: Loss, config: SolverConfig, folds: int = 5, k: int = 1
) -> float:
    parts = kfold_indices(len(data), folds, config.seed)
    total = 0.0
    for i, held in enumerate(parts):
        mask = np.ones(len(data), dtype=bool)
        mask[held] = False
        cfg = replace(config, seed=derive_seed(config.seed, i))
        train = data.subset(rows=mask)
        if k == 1:
            model = train_linear(train, loss, cfg)
        else:
            model = train_polynomial(train, k, loss, cfg)
        total += empirical_risk(data.subset(rows=held), model.separator, loss) * len(held)
    return total / len(data)


def select_features(
    data: Dataset,
    target_count: int,
    loss: Loss,
    config: SolverConfig | None = None,
    folds: int = 5,
) -> list[int]:
    """Greedy forward selection of ``target_count`` columns (0-based, in pick order).

    Each round adds the column whose inclusion gives the lowest
    ``folds``-fold cross-validated risk of :func:`train_linear`; all
    candidates share the same seeded folds, and ties go to the lower index.
    """
    config = config or SolverConfig()
    d = data.dim
    if not 1 <= target_count <= d:
        raise InvalidInputError(f"target_count must be in [1, {d}], got {target_count}")
    if folds < 2:
        raise InvalidInputError("folds must be at least 2")
    chosen: list[int] = []
    while len(chosen) < target_count:
        best_j, best_risk = None, math.inf
        for j in range(d):
            if j in chosen:
                continue
            risk = cross_validated_risk(data.subset(columns=chosen + [j]), loss, config, folds)
            log.debug("candidate %s -> cv risk %.6g", chosen + [j], risk)
            if risk < best_risk:
                best_j, best_risk = j, risk
        chosen.append(best_j)
        log.info("selected column %d (cv risk %.6g)", best_j, best_risk)
    return chosen


# ---------------------------------------------------------------------------
# scikit-learn style estimators
# ---------------------------------------------------------------------------

_LOSSES = {"hinge": Hinge, "squared": Squared}


def _resolve_loss(loss) -> Loss:
    if isinstance(loss, Loss):
        return loss
    try:
        return _LOSSES[loss]()
    except KeyError:
        raise InvalidInputError(f"unknown loss {loss!r}; expected one of {sorted(_LOSSES)}") from None


class _ERMBase(BaseEstimator):
    def __init__(
        self,
        loss="hinge",
        degree=1,
        max_iterations=50_000,
        step_scale=1.0,
        l1_bound=math.inf,
        tolerance=1e-8,
        seed=0,
    ):
        self.loss = loss
        self.degree = degree
        self.max_iterations = max_iterations
        self.step_scale = step_scale
        self.l1_bound = l1_bound
        self.tolerance = tolerance
        self.seed = seed

    def _config(self) -> SolverConfig:
        return SolverConfig(
            max_iterations=self.max_iterations,
            step_scale=self.step_scale,
            l1_bound=self.l1_bound,
            tolerance=self.tolerance,
            seed=self.seed,
        )

    def _fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        self.n_features_in_ = X.shape[1]
        data = Dataset(X, y)
        loss = _resolve_loss(self.loss)
        if self.degree == 1:
            self.model_ = train_linear(data, loss, self._config())
        else:
            self.model_ = train_polynomial(data, self.degree, loss, self._config())
        self.separator_ = self.model_.separator
        return self

    def decision_function(self, X):
        check_is_fitted(self, "separator_")
        X = check_array(X, dtype=float)
        return decision_values(self.separator_, X)


class ERMClassifier(ClassifierMixin, _ERMBase):
    """Linear or polynomial SVM fitted by empirical risk minimization.

    Labels must be -1/+1.  ``predict`` returns +1 where the decision value
    is ``>= 0``.
    """

    def fit(self, X, y):
        check_labels(np.asarray(y, dtype=float))
        self.classes_ = np.array([-1.0, 1.0])
        return self._fit(X, y)

    def predict(self, X):
        return labels_from_decision(self.decision_function(X))


class ERMRegressor(RegressorMixin, _ERMBase):
    """Affine or polynomial least-squares (or polynomial-loss) ERM."""

    def __init__(self, loss="squared", degree=1, max_iterations=50_000, step_scale=1.0,
                 l1_bound=math.inf, tolerance=1e-8, seed=0):
        super().__init__(loss, degree, max_iterations, step_scale, l1_bound, tolerance, seed)

    def fit(self, X, y):
        return self._fit(X, y)

    def predict(self, X):
        return self.decision_function(X)


class ForwardFeatureSelector(SelectorMixin, BaseEstimator):
    """Transformer wrapper around :func:`select_features`."""

    def __init__(self, n_features_to_select=3, loss="hinge", folds=5,
                 max_iterations=5_000, step_scale=1.0, seed=0):
        self.n_features_to_select = n_features_to_select
        self.loss = loss
        self.folds = folds
        self.max_iterations = max_iterations
        self.step_scale = step_scale
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        self.n_features_in_ = X.shape[1]
        config = SolverConfig(
            max_iterations=self.max_iterations, step_scale=self.step_scale, seed=self.seed
        )
        self.selected_ = select_features(
            Dataset(X, y), self.n_features_to_select, _resolve_loss(self.loss), config, self.folds
        )
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "selected_")
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.selected_] = True
        return mask
