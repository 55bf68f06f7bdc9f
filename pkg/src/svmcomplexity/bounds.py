"""VC/PAC bounds, their numeric inversion, and deviation bounds for polynomial losses.

The relative bound below keeps the leading term only; its ``O(1/n)``
remainder has no published constant and is reported as dropped.  Callers
that care about Vapnik's ``eta`` parametrization should pass ``delta = 2*eta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError, UnboundedComplexityError
from .model import Dataset, Loss, _normalize_coeffs, decision_values, monomial_count

DROPPED_NOTE = "O(1/n)"
_MAX_N = 2**62


def a_of_p(p: float) -> float:
    """``2^(-1/p) * ((p-1)/(p-2))^((p-1)/p)`` for moment order ``p > 2``."""
    if not p > 2:
        raise InvalidInputError(f"a(p) needs p > 2, got {p}")
    if math.isinf(p):
        return 1.0
    return 2.0 ** (-1.0 / p) * ((p - 1.0) / (p - 2.0)) ** ((p - 1.0) / p)


def _check_common(n, h, delta):
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    if h < 1:
        raise InvalidInputError("VC dimension h must be at least 1")
    if not 0 < delta < 1:
        raise InvalidInputError("delta must lie in (0, 1)")


def curly_E(n: float, h: float, delta: float) -> float:
    """``4 (h (ln(2n/h) + 1) - ln(delta/8)) / n``."""
    _check_common(n, h, delta)
    return 4.0 * (h * (math.log(2.0 * n / h) + 1.0) - math.log(delta / 8.0)) / n


def curly_E_peak(h: float, delta: float) -> float:
    """Sample size beyond which ``curly_E`` is strictly decreasing in ``n``."""
    return 0.5 * h * math.exp(math.log(delta / 8.0) / h)


def vc_dim_affine(d: int) -> int:
    """VC dimension of affine functions on R^d."""
    if d < 1:
        raise InvalidInputError("d must be at least 1")
    return d + 1


def vc_dim_hinge_loss_family(d: int) -> int:
    """VC bound for ``{(1 - y g(x))_+ : g affine}`` (affine in ``(y x, y)``)."""
    if d < 1:
        raise InvalidInputError("d must be at least 1")
    return d + 2


def vc_dim_polynomial(d: int, k: int) -> int:
    """``D(k) + 1``: monomial count plus one; equals ``d + 2`` at ``k = 1``."""
    return monomial_count(d, k) + 1


@dataclass(frozen=True)
class VapnikBoundInputs:
    n: int
    h: float
    delta: float
    p: float
    tau: float
    J: float

    def __post_init__(self):
        _check_common(self.n, self.h, self.delta)
        if not self.p > 2:
            raise InvalidInputError("p must exceed 2")
        if not self.tau >= 1:
            raise InvalidInputError("tau must be at least 1 (Lyapunov)")
        if not self.J >= 0:
            raise InvalidInputError("J must be non-negative")


@dataclass(frozen=True)
class BoundReport:
    curly_E: float
    a_p: float
    bound_value: float
    in_valid_regime: bool
    dropped_terms_note: str = DROPPED_NOTE

    def __str__(self):
        return (
            f"bound={self.bound_value!r} regime={str(self.in_valid_regime).lower()} "
            f"E={self.curly_E!r} a_p={self.a_p!r} dropped={self.dropped_terms_note}"
        )


def vapnik_relative_bound(inputs: VapnikBoundInputs) -> BoundReport:
    """Absolute form ``J tau a sqrt(E) / (1 - tau a sqrt(E))_+`` of the relative bound.

    Returns ``inf`` (and ``in_valid_regime=False``) once the denominator
    clamps to zero.  A non-positive ``E`` (tiny ``n`` before the entropy
    hump) is likewise reported as out of regime.
    """
    E = curly_E(inputs.n, inputs.h, inputs.delta)
    a = a_of_p(inputs.p)
    if E <= 0:
        return BoundReport(E, a, math.inf, False)
    x = inputs.tau * a * math.sqrt(E)
    if x >= 1.0:
        return BoundReport(E, a, math.inf, False)
    if inputs.J == 0:
        return BoundReport(E, a, 0.0, True)
    return BoundReport(E, a, inputs.J * x / (1.0 - x), True)


def _bound_at(n, h, delta, p, tau, J) -> float:
    return vapnik_relative_bound(VapnikBoundInputs(n, h, delta, p, tau, J)).bound_value


def info_complexity_numeric(eps, delta, h, J, tau, p) -> int:
    """Smallest ``n`` whose relative bound is ``<= eps``.

    The search runs on the tail where ``curly_E`` decreases (there the bound
    is non-increasing): exponential bracketing, then bisection.
    """
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    VapnikBoundInputs(1, h, delta, p, tau, J)
    start = max(1, math.ceil(curly_E_peak(h, delta)))
    if _bound_at(start, h, delta, p, tau, J) <= eps:
        # bound(start - 1) lies before the hump or at n = 0; scan down.
        n = start
        while n > 1 and _bound_at(n - 1, h, delta, p, tau, J) <= eps:
            n -= 1
        return n
    lo, hi = start, start * 2
    while _bound_at(hi, h, delta, p, tau, J) > eps:
        lo, hi = hi, hi * 2
        if hi > _MAX_N:
            raise UnboundedComplexityError(f"no n below 2^62 reaches eps={eps}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _bound_at(mid, h, delta, p, tau, J) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


def info_complexity_asymptotic(eps, delta, d, J, tau, p) -> float | None:
    """Leading terms ``(d+2)(2 J tau a)^2 (2 ln(1/eps) + ln ln(1/eps)) / eps^2``.

    Returns ``None`` outside the asymptotic regime (``eps >= 1/e``), where
    ``ln ln(1/eps)`` is undefined or negative.  ``delta`` enters only the
    dropped lower-order terms, whose uniformity in ``delta`` is not known.
    """
    if not 0 < eps < 1:
        raise InvalidInputError("eps must lie in (0, 1)")
    VapnikBoundInputs(1, d + 2, delta, p, tau, J)
    if eps >= math.exp(-1.0):
        return None
    L = math.log(1.0 / eps)
    return (d + 2) * (2.0 * J * tau * a_of_p(p)) ** 2 * (2.0 * L + math.log(L)) / eps**2


def chebyshev_deviation_bound(sigma: float, delta: float, n: int) -> float:
    """``sigma / sqrt(delta n)``: deviation of one empirical mean at level ``1 - delta``."""
    if sigma < 0:
        raise InvalidInputError("sigma must be non-negative")
    if not 0 < delta < 1 or n < 1:
        raise InvalidInputError("need 0 < delta < 1 and n >= 1")
    return sigma / math.sqrt(delta * n)


@dataclass(frozen=True)
class DeviationBound:
    value: float
    confidence: float
    vacuous: bool

    def __float__(self):
        return self.value


def terms_in_x(coeffs, d: int) -> int:
    """Number of distinct monomials in ``x`` of ``L(w.x + b, y)`` for generic ``(w, b)``."""
    coeffs = _normalize_coeffs(coeffs)
    top = max((i for i, _ in coeffs), default=0)
    return monomial_count(d, top)


def terms_in_gy(coeffs) -> int:
    """Number of non-zero terms ``c_ij g^i y^j``."""
    return len(_normalize_coeffs(coeffs))


@dataclass(frozen=True)
class PolyDeviationInputs:
    coeffs: dict
    M: float
    moments: tuple
    delta: float
    n: int
    l: int

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _normalize_coeffs(self.coeffs))
        object.__setattr__(self, "moments", tuple(float(m) for m in self.moments))
        if not self.M > 0:
            raise InvalidInputError("M must be positive")
        if not 0 < self.delta < 1 or self.n < 1:
            raise InvalidInputError("need 0 < delta < 1 and n >= 1")
        if self.l < 1:
            raise InvalidInputError("term count l must be at least 1")
        if any(m < 1 for m in self.moments):
            raise InvalidInputError("moments (|x|+1)^(2i) are at least 1")
        top = max((i for i, _ in self.coeffs), default=0)
        if len(self.moments) <= top:
            raise InvalidInputError(f"need moments d_0..d_{top}, got {len(self.moments)}")


def poly_risk_deviation_bound(inputs: PolyDeviationInputs) -> DeviationBound:
    """Uniform deviation over the L1 ball: ``sum |c_ij| sqrt(d_i) (2M)^i / sqrt(delta n)``."""
    total = sum(
        abs(c) * math.sqrt(inputs.moments[i]) * (2.0 * inputs.M) ** i
        for (i, _), c in inputs.coeffs.items()
    )
    value = total / math.sqrt(inputs.delta * inputs.n)
    confidence = 1.0 - inputs.l * inputs.delta
    return DeviationBound(value, max(confidence, 0.0), confidence <= 0)


def clipped_poly_deviation_bound(coeffs, M0, C, delta, n, m=None) -> DeviationBound:
    """``(sum_{i+j>=1} |c_ij| M0^i + |c_00 - C| / 2) / sqrt(delta n)``.

    Depends on no moment of the sampling distribution.
    """
    coeffs = _normalize_coeffs(coeffs)
    if not M0 > 0:
        raise InvalidInputError("M0 must be positive")
    if not 0 < delta < 1 or n < 1:
        raise InvalidInputError("need 0 < delta < 1 and n >= 1")
    m = terms_in_gy(coeffs) if m is None else int(m)
    total = sum(abs(c) * M0**i for (i, j), c in coeffs.items() if i + j >= 1)
    total += abs(coeffs.get((0, 0), 0.0) - C) / 2.0
    value = total / math.sqrt(delta * n)
    confidence = 1.0 - m * delta
    return DeviationBound(value, max(confidence, 0.0), confidence <= 0)


def estimate_moments(data: Dataset, k: int) -> np.ndarray:
    """Empirical ``d_i = mean (|x| + 1)^(2i)`` for ``i = 0..k`` (Euclidean norm)."""
    if len(data) == 0:
        raise InvalidInputError("need a non-empty dataset")
    if k < 0:
        raise InvalidInputError("k must be non-negative")
    base = (np.linalg.norm(data.X, axis=1) + 1.0) ** 2
    out = np.array([np.mean(base**i) for i in range(k + 1)])
    out[0] = 1.0
    return out


@dataclass(frozen=True)
class InfSwapCheck:
    holds: bool
    lhs: float
    rhs: float


def check_inf_swap(f_values, g_values) -> InfSwapCheck:
    """Check ``|f(argmin g) - min f| <= 2 max |f - g|`` on a finite set."""
    f = np.asarray(f_values, dtype=float).reshape(-1)
    g = np.asarray(g_values, dtype=float).reshape(-1)
    if f.size == 0 or f.size != g.size:
        raise InvalidInputError("f and g must have the same non-zero length")
    lhs = abs(f[int(np.argmin(g))] - f.min())
    rhs = 2.0 * float(np.max(np.abs(f - g)))
    return InfSwapCheck(bool(lhs <= rhs), float(lhs), rhs)


def estimate_tau(loss: Loss, data: Dataset, separators, p: float) -> float:
    """Plug-in moment ratio: max over candidates of ``||L||_p / ||L||_1`` on ``data``.

    This is local in the sampling distribution; the true quantity is a
    supremum over the whole hypothesis class under the unknown law.
    """
    if not p > 2:
        raise InvalidInputError("p must exceed 2")
    best = 1.0
    for sep in separators:
        losses = loss.value(decision_values(sep, data.X), data.y)
        mean = float(np.mean(losses))
        if mean <= 0:
            continue
        best = max(best, float(np.mean(losses**p)) ** (1.0 / p) / mean)
    return best


def estimate_J(loss: Loss, data: Dataset, separators) -> float:
    """Plug-in minimal risk: smallest empirical risk among the candidates."""
    return min(float(np.mean(loss.value(decision_values(s, data.X), data.y))) for s in separators)
