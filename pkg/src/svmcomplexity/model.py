"""Core vocabulary: datasets, losses, separators, monomial lifting and risks.

Separators follow one sign convention throughout the package: a point is
classified positive when the decision value is ``>= 0``.  Monomials are
enumerated in graded lexicographic order (constant first, then degree one
``x1, x2, ...``, then ``x1^2, x1 x2, ...``) so coefficient vectors are
portable between runs and between the text serialization and memory.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (
    CountOverflowError,
    InvalidInputError,
    ParseError,
    UndefinedClassRiskError,
)

_INT64_MAX = 2**63 - 1


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


class LabeledSample(NamedTuple):
    x: np.ndarray
    y: float


@dataclass(frozen=True)
class Dataset:
    """An ordered sample ``{(x_i, y_i)}`` stored as a design matrix and labels.

    The empirical distribution is implicit: every risk computed on a
    ``Dataset`` weights each row by ``1/n``.
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise InvalidInputError("X must be a 2-D array")
        if X.shape[0] != y.shape[0]:
            raise InvalidInputError(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} labels"
            )
        if X.shape[1] < 1:
            raise InvalidInputError("feature dimension must be at least 1")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidInputError("dataset contains non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample | tuple]) -> "Dataset":
        if not samples:
            raise InvalidInputError("cannot build a dataset from zero samples")
        X = np.array([np.atleast_1d(np.asarray(s[0], dtype=float)) for s in samples])
        y = np.array([float(s[1]) for s in samples])
        return cls(X, y)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def __iter__(self) -> Iterator[LabeledSample]:
        for xi, yi in zip(self.X, self.y):
            yield LabeledSample(xi, float(yi))

    def subset(self, rows=None, columns=None) -> "Dataset":
        X, y = self.X, self.y
        if rows is not None:
            X, y = X[rows], y[rows]
        if columns is not None:
            X = X[:, list(columns)]
        return Dataset(X, y)

    def is_classification(self) -> bool:
        return bool(np.all(np.isin(self.y, (-1.0, 1.0))))


def check_labels(y: np.ndarray) -> np.ndarray:
    """Validate that every label is -1 or +1."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidInputError("classification labels must be -1 or +1")
    return y


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("loss inputs must be finite")


class Loss:
    """Base class for losses ``L(g, y)``; subclasses are vectorized."""

    convex = False
    classification = False

    def value(self, g, y):
        raise NotImplementedError

    def derivative(self, g, y):
        """A (sub)gradient of the loss with respect to ``g``."""
        raise NotImplementedError

    def __call__(self, g, y):
        return self.value(g, y)


@dataclass(frozen=True)
class Hinge(Loss):
    """``(1 - y g)_+``."""

    convex = True
    classification = True

    def value(self, g, y):
        return np.maximum(0.0, 1.0 - np.multiply(y, g))

    def derivative(self, g, y):
        return np.where(np.multiply(y, g) < 1.0, -np.asarray(y, dtype=float), 0.0)


@dataclass(frozen=True)
class Squared(Loss):
    """``(g - y)^2``."""

    convex = True

    def value(self, g, y):
        return np.square(np.subtract(g, y))

    def derivative(self, g, y):
        return 2.0 * np.subtract(g, y)


def _normalize_coeffs(coeffs) -> dict[tuple[int, int], float]:
    out = {}
    for key, c in dict(coeffs).items():
        i, j = (int(key[0]), int(key[1]))
        if i < 0 or j < 0:
            raise InvalidInputError(f"negative exponent in coefficient key {key}")
        c = float(c)
        if not math.isfinite(c):
            raise InvalidInputError("polynomial coefficients must be finite")
        if c != 0.0:
            out[(i, j)] = out.get((i, j), 0.0) + c
    return out


@dataclass(frozen=True)
class Polynomial(Loss):
    """``sum_ij c_ij g^i y^j`` with coefficients keyed by ``(i, j)``."""

    coeffs: dict = field(default_factory=dict)
    degree: int | None = None

    def __post_init__(self):
        coeffs = _normalize_coeffs(self.coeffs)
        top = max((i + j for i, j in coeffs), default=0)
        degree = top if self.degree is None else int(self.degree)
        if degree < top:
            raise InvalidInputError(
                f"degree {degree} is below the total degree {top} of the coefficients"
            )
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "degree", degree)

    @property
    def convex(self):
        # Only the quadratic-in-g case with c_20 >= 0 is certainly convex in g.
        return max((i for i, _ in self.coeffs), default=0) <= 2 and self.coeffs.get(
            (2, 0), 0.0
        ) >= 0.0 and all(i <= 1 or j == 0 for i, j in self.coeffs)

    def value(self, g, y):
        g = np.asarray(g, dtype=float)
        y = np.asarray(y, dtype=float)
        total = np.zeros(np.broadcast(g, y).shape)
        for (i, j), c in self.coeffs.items():
            total = total + c * g**i * y**j
        return total

    def derivative(self, g, y):
        g = np.asarray(g, dtype=float)
        y = np.asarray(y, dtype=float)
        total = np.zeros(np.broadcast(g, y).shape)
        for (i, j), c in self.coeffs.items():
            if i:
                total = total + c * i * g ** (i - 1) * y**j
        return total


@dataclass(frozen=True)
class ClippedPolynomial(Polynomial):
    """Polynomial on ``|g| <= m0, |y| <= y0`` and the constant ``outside`` elsewhere."""

    m0: float = 1.0
    y0: float = 1.0
    outside: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if not self.m0 > 0:
            raise InvalidInputError("m0 must be positive")
        if not self.y0 >= 1:
            raise InvalidInputError("y0 must be at least 1")
        if not math.isfinite(self.outside):
            raise InvalidInputError("outside value must be finite")

    @property
    def convex(self):
        return False

    def inside(self, g, y):
        return (np.abs(g) <= self.m0) & (np.abs(y) <= self.y0)

    def value(self, g, y):
        return np.where(self.inside(g, y), super().value(g, y), self.outside)

    def derivative(self, g, y):
        return np.where(self.inside(g, y), super().derivative(g, y), 0.0)


def squared_as_polynomial() -> Polynomial:
    """``(g - y)^2`` expanded as ``g^2 - 2 g y + y^2``."""
    return Polynomial({(2, 0): 1.0, (1, 1): -2.0, (0, 2): 1.0})


def eval_loss(loss: Loss, g_value, y):
    """Evaluate ``loss`` at ``(g_value, y)``; scalars in, scalar out."""
    _check_finite(g_value, y)
    if isinstance(loss, Hinge):
        check_labels(np.atleast_1d(y))
    out = loss.value(g_value, y)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Monomials
# ---------------------------------------------------------------------------


def monomial_count(d: int, k: int) -> int:
    """Number of multi-indices ``alpha`` in ``d`` variables with ``|alpha| <= k``."""
    if d < 1 or k < 0:
        raise InvalidInputError("monomial_count needs d >= 1 and k >= 0")
    count = math.comb(d + k, d)
    if count > _INT64_MAX:
        raise CountOverflowError(f"monomial count C({d + k}, {d}) overflows int64")
    return count


def multi_indices(d: int, k: int) -> list[tuple[int, ...]]:
    """All exponent tuples with total degree ``<= k`` in graded-lex order."""
    monomial_count(d, k)
    out = []
    for degree in range(k + 1):
        for combo in itertools.combinations_with_replacement(range(d), degree):
            alpha = [0] * d
            for v in combo:
                alpha[v] += 1
            out.append(tuple(alpha))
    return out


def _lift_matrix(X: np.ndarray, k: int, include_constant: bool = True) -> np.ndarray:
    n, d = X.shape
    columns = [np.ones(n)] if include_constant else []
    prev = {(): np.ones(n)}
    for degree in range(1, k + 1):
        cur = {}
        for combo in itertools.combinations_with_replacement(range(d), degree):
            col = prev[combo[:-1]] * X[:, combo[-1]]
            cur[combo] = col
            columns.append(col)
        prev = cur
    if not columns:
        return np.empty((n, 0))
    return np.column_stack(columns)


def lift(x, k: int) -> np.ndarray:
    """Monomial features ``(x^alpha)_{|alpha| <= k}`` of one point or of each row.

    A 1-D ``x`` returns a vector of length ``monomial_count(len(x), k)``; a
    2-D array is lifted row by row.
    """
    if k < 1:
        raise InvalidInputError("lift needs degree k >= 1")
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.size < 1:
            raise InvalidInputError("lift needs d >= 1")
        monomial_count(x.size, k)
        return _lift_matrix(x.reshape(1, -1), k)[0]
    if x.ndim != 2 or x.shape[1] < 1:
        raise InvalidInputError("lift expects a vector or a 2-D array")
    monomial_count(x.shape[1], k)
    return _lift_matrix(x, k)


class MonomialLifter(TransformerMixin, BaseEstimator):
    """Transformer producing all monomials of degree ``<= degree``.

    Parameters
    ----------
    degree : int, default=2
    include_constant : bool, default=True
        Keep the leading all-ones column (the constant monomial).
    max_features : int, default=100_000
        Refuse to build lifted spaces wider than this.
    """

    def __init__(self, degree=2, include_constant=True, max_features=100_000):
        self.degree = degree
        self.include_constant = include_constant
        self.max_features = max_features

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        count = monomial_count(self.n_features_in_, self.degree)
        if count > self.max_features:
            from .exceptions import DimensionCapError

            raise DimensionCapError(
                f"lifted dimension {count} exceeds cap {self.max_features}"
            )
        powers = multi_indices(self.n_features_in_, self.degree)
        self.powers_ = np.array(powers if self.include_constant else powers[1:], dtype=int)
        self.n_output_features_ = len(self.powers_)
        return self

    def transform(self, X):
        check_is_fitted(self, "powers_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return _lift_matrix(X, self.degree, include_constant=self.include_constant)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "powers_")
        names = input_features or [f"x{i + 1}" for i in range(self.n_features_in_)]
        out = []
        for alpha in self.powers_:
            parts = [
                names[i] if a == 1 else f"{names[i]}^{a}" for i, a in enumerate(alpha) if a
            ]
            out.append(" ".join(parts) or "1")
        return np.array(out, dtype=object)


# ---------------------------------------------------------------------------
# Separators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineSeparator:
    """``g(x) = w . x + b``."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w, dtype=float))
        if w.ndim != 1 or not np.all(np.isfinite(w)) or not math.isfinite(self.b):
            raise InvalidInputError("affine separator needs a finite weight vector and offset")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    @property
    def input_dim(self) -> int:
        return self.w.size

    def decision_function(self, X) -> np.ndarray:
        X = _as_points(X, self.input_dim)
        return X @ self.w + self.b

    def to_polynomial(self) -> "PolynomialSeparator":
        return PolynomialSeparator(1, np.concatenate([[self.b], self.w]), self.input_dim)


@dataclass(frozen=True)
class PolynomialSeparator:
    """``g(x) = sum_alpha coeffs[alpha] x^alpha`` over ``|alpha| <= degree``.

    ``coeffs`` is a vector aligned with :func:`multi_indices` (graded-lex);
    a mapping ``{alpha: value}`` is also accepted and missing entries are 0.
    """

    degree: int
    coeffs: np.ndarray
    input_dim: int

    def __post_init__(self):
        if self.degree < 1 or self.input_dim < 1:
            raise InvalidInputError("polynomial separator needs degree >= 1 and d >= 1")
        size = monomial_count(self.input_dim, self.degree)
        coeffs = self.coeffs
        if isinstance(coeffs, dict):
            index = {alpha: i for i, alpha in enumerate(multi_indices(self.input_dim, self.degree))}
            vec = np.zeros(size)
            for alpha, value in coeffs.items():
                alpha = _pad_alpha(alpha, self.input_dim)
                if alpha not in index:
                    raise InvalidInputError(f"multi-index {alpha} exceeds degree {self.degree}")
                vec[index[alpha]] = float(value)
            coeffs = vec
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        if coeffs.size != size:
            raise InvalidInputError(
                f"expected {size} coefficients for d={self.input_dim}, k={self.degree}, "
                f"got {coeffs.size}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise InvalidInputError("polynomial coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def coef_map(self) -> dict[tuple[int, ...], float]:
        return dict(zip(multi_indices(self.input_dim, self.degree), self.coeffs.tolist()))

    def decision_function(self, X) -> np.ndarray:
        X = _as_points(X, self.input_dim)
        return _lift_matrix(X, self.degree) @ self.coeffs

    def as_affine(self) -> AffineSeparator:
        """The equivalent affine separator acting on lifted points (constant dropped)."""
        return AffineSeparator(self.coeffs[1:], self.coeffs[0])


def _pad_alpha(alpha, d):
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) < d:
        alpha = alpha + (0,) * (d - len(alpha))
    return alpha


def _as_points(X, d) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != d:
        raise InvalidInputError(f"expected points of dimension {d}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("points must be finite")
    return X


def decision_values(sep, X) -> np.ndarray:
    """Vector of ``g(x_i)`` for any object exposing ``decision_function``."""
    return np.asarray(sep.decision_function(X), dtype=float).reshape(-1)


def eval_separator(sep, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidInputError("eval_separator takes a single point; use decision_values")
    return float(decision_values(sep, x)[0])


def labels_from_decision(g) -> np.ndarray:
    """Map decision values to labels; ``g >= 0`` (ties included) is +1."""
    return np.where(np.asarray(g) >= 0.0, 1.0, -1.0)


def classify(sep, x) -> int:
    return int(labels_from_decision(eval_separator(sep, x)))


# ---------------------------------------------------------------------------
# Risks
# ---------------------------------------------------------------------------


def empirical_risk(data: Dataset, sep, loss: Loss) -> float:
    """Mean loss of ``sep`` over ``data``."""
    if len(data) == 0:
        raise InvalidInputError("empirical risk of an empty dataset is undefined")
    if loss.classification:
        check_labels(data.y)
    g = decision_values(sep, data.X)
    return float(np.mean(loss.value(g, data.y)))


def weighted_empirical_risk(data: Dataset, sep, beta1: float, beta2: float) -> float:
    """``beta1 * P_hat(g < 0 | y=+1) + beta2 * P_hat(g >= 0 | y=-1)``."""
    if beta1 < 0 or beta2 < 0 or abs(beta1 + beta2 - 1.0) > 1e-12:
        raise InvalidInputError("risk weights must be non-negative and sum to 1")
    y = check_labels(data.y)
    pos, neg = y > 0, y < 0
    if not pos.any() or not neg.any():
        raise UndefinedClassRiskError("both classes must be present")
    pred = labels_from_decision(decision_values(sep, data.X))
    false_neg = np.mean(pred[pos] < 0)
    false_pos = np.mean(pred[neg] > 0)
    return float(beta1 * false_neg + beta2 * false_pos)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def errors(self) -> int:
        return self.fp + self.fn

    @property
    def error_rate(self) -> float:
        return self.errors / self.total if self.total else float("nan")


def confusion(data: Dataset, sep) -> ConfusionCounts:
    y = check_labels(data.y)
    pred = labels_from_decision(decision_values(sep, data.X))
    return ConfusionCounts(
        tp=int(np.sum((pred > 0) & (y > 0))),
        tn=int(np.sum((pred < 0) & (y < 0))),
        fp=int(np.sum((pred > 0) & (y < 0))),
        fn=int(np.sum((pred < 0) & (y > 0))),
    )


# ---------------------------------------------------------------------------
# Text serialization
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _fmt_alpha(alpha) -> str:
    return "(" + ",".join(str(a) for a in alpha) + ")"


def dumps_separator(sep) -> str:
    """Serialize an affine or polynomial separator to the line format."""
    if isinstance(sep, AffineSeparator):
        header = f"affine d={sep.input_dim}"
        coeffs = sep.to_polynomial().coeffs
        indices = multi_indices(sep.input_dim, 1)
    elif isinstance(sep, PolynomialSeparator):
        header = f"poly d={sep.input_dim} k={sep.degree}"
        coeffs = sep.coeffs
        indices = multi_indices(sep.input_dim, sep.degree)
    else:
        raise InvalidInputError(f"cannot serialize {type(sep).__name__}")
    lines = [header] + [f"{_fmt_alpha(a)} {_fmt(c)}" for a, c in zip(indices, coeffs)]
    return "\n".join(lines) + "\n"


def _parse_header(line: str) -> tuple[str, dict[str, int]]:
    parts = line.split()
    if not parts:
        raise ParseError("empty header", 1)
    fields = {}
    for token in parts[1:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise ParseError(f"bad header token {token!r}", 1)
        try:
            fields[key] = int(value)
        except ValueError:
            raise ParseError(f"bad header value {token!r}", 1) from None
    return parts[0], fields


def loads_separator(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty model file", 1)
    kind, fields = _parse_header(lines[0])
    try:
        d = fields["d"]
        k = 1 if kind == "affine" else fields["k"]
    except KeyError as exc:
        raise ParseError(f"missing header field {exc}", 1) from None
    if kind not in ("affine", "poly"):
        raise ParseError(f"unknown separator kind {kind!r}", 1)
    indices = multi_indices(d, k)
    if len(lines) - 1 != len(indices):
        raise ParseError(
            f"expected {len(indices)} coefficient lines, found {len(lines) - 1}", len(lines)
        )
    coeffs = np.empty(len(indices))
    for lineno, (line, alpha) in enumerate(zip(lines[1:], indices), start=2):
        head, _, value = line.strip().partition(" ")
        try:
            got = tuple(int(v) for v in head.strip("()").split(","))
            coeffs[lineno - 2] = float(value)
        except ValueError:
            raise ParseError(f"cannot parse coefficient line {line!r}", lineno) from None
        if got != alpha:
            raise ParseError(f"multi-index {got} out of order, expected {alpha}", lineno)
    poly = PolynomialSeparator(k, coeffs, d)
    if kind == "affine":
        return AffineSeparator(coeffs[1:], coeffs[0])
    return poly


def save_separator(sep, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_separator(sep))


def load_separator(path):
    with open(path) as fh:
        return loads_separator(fh.read())
