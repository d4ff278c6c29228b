"""Finite-sample econometrics for regression proxies.

Implements the two parameter-covariance estimators used to compare proxy
calibration strategies (classical homoskedastic and the HC0 sandwich,
without small-sample corrections), the studentized Breusch-Pagan
heteroskedasticity test, asymptotic confidence intervals for proxy
predictions, an interval-length comparison harness and the positive
semidefinite (Loewner) ordering of covariance matrices.

The module is dependency-light on purpose: the standard-normal quantile
uses Acklam's rational approximation polished by one Halley step of the
erfc-based distribution function (absolute error well below 1e-12), and
chi-square tail probabilities come from the regularized incomplete gamma
function evaluated by its power series / continued fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, FitError, NumericalError

__all__ = [
    "CovarianceEstimate",
    "IntervalComparison",
    "LoewnerOrder",
    "normal_cdf",
    "normal_quantile",
    "chi2_sf",
    "xtx_inverse",
    "homoskedastic_cov",
    "white_cov",
    "breusch_pagan",
    "confidence_interval",
    "compare_interval_lengths",
    "loewner_compare",
]

#: Relative tolerance for treating two interval lengths as tied.
TIE_RTOL = 1e-12

#: PSD tolerance (scaled by the largest eigenvalue magnitude).
PSD_RTOL = 1e-10


# ---------------------------------------------------------------------------
# Scalar special functions
# ---------------------------------------------------------------------------


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


# Acklam's coefficients for the inverse normal distribution function.
_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
             6.680131188771972e+01, -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
             3.754408661907416e+00)


def normal_quantile(p: float) -> float:
    """Standard-normal quantile, accurate to better than 1e-12.

    Acklam's rational approximation (absolute error < 1.2e-9) refined by a
    single Halley iteration against the erfc-based distribution function.
    The upper half reflects onto the lower half so the refinement always
    works on the small, cancellation-free tail probability.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile level must be in (0, 1), got {p}")
    if p > 0.5:
        return -normal_quantile(1.0 - p)
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    # Halley refinement on the lower tail (x <= 0, cdf(x) <= 1/2)
    err = normal_cdf(x) - p
    u = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def _gamma_p_series(a: float, x: float) -> float:
    # regularized lower incomplete gamma by power series (x < a + 1)
    term = 1.0 / a
    total = term
    n = a
    for _ in range(500):
        n += 1.0
        term *= x / n
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    # regularized upper incomplete gamma by continued fraction (x >= a + 1),
    # evaluated with the modified Lentz algorithm
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi2_sf(x: float, k: int) -> float:
    """Chi-square survival function with k degrees of freedom."""
    if k < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {k}")
    if x <= 0.0:
        return 1.0
    a = 0.5 * k
    half = 0.5 * x
    if half < a + 1.0:
        return 1.0 - _gamma_p_series(a, half)
    return _gamma_q_contfrac(a, half)


# ---------------------------------------------------------------------------
# Covariance estimators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CovarianceEstimate:
    """Symmetric PSD estimate of the fitted-coefficient covariance."""

    matrix: np.ndarray
    kind: str  # "homoskedastic" | "white"

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if self.kind not in ("homoskedastic", "white"):
            raise DomainError(f"unknown covariance kind {self.kind!r}")
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError("covariance matrix must be square")
        if not np.allclose(m, m.T, rtol=0.0, atol=1e-10 * max(1.0, float(np.abs(m).max()))):
            raise NumericalError("covariance matrix is not symmetric")
        eig = np.linalg.eigvalsh(m)
        if eig.size and eig[0] < -PSD_RTOL * max(1.0, float(eig[-1])):
            raise NumericalError(f"covariance matrix is not PSD (min eigenvalue {eig[0]:.3e})")

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)[::-1]


def xtx_inverse(x: np.ndarray) -> np.ndarray:
    """(X'X)^-1 through the QR factorisation of X (no normal equations).

    Raises :class:`FitError` naming the suspect columns when the design is
    numerically rank deficient.
    """
    x = np.asarray(x, dtype=float)
    n, k1 = x.shape
    if n < k1:
        raise FitError(f"need at least {k1} rows to invert a {k1}-column design, got {n}")
    r = np.linalg.qr(x, mode="r")
    diag = np.abs(np.diag(r))
    col_scale = np.linalg.norm(x, axis=0)
    bad = np.flatnonzero(diag <= 1e-10 * np.maximum(col_scale, 1e-300))
    if bad.size:
        raise FitError(f"rank-deficient design, collinear column indices {bad.tolist()}")
    r_inv = np.linalg.solve(r, np.eye(k1))
    return r_inv @ r_inv.T


def homoskedastic_cov(x: np.ndarray, residuals: np.ndarray, sigma2_hat: float) -> CovarianceEstimate:
    """Classical covariance sigma^2 (X'X)^-1 with the plug-in variance."""
    if sigma2_hat < 0.0:
        raise DomainError("sigma2_hat must be >= 0")
    return CovarianceEstimate(matrix=sigma2_hat * xtx_inverse(x), kind="homoskedastic")


def white_cov(x: np.ndarray, residuals: np.ndarray) -> CovarianceEstimate:
    """Heteroskedasticity-robust sandwich (X'X)^-1 (sum u_n^2 x_n'x_n) (X'X)^-1.

    This is the plain HC0 form; no small-sample degrees-of-freedom or
    leverage corrections are applied.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(residuals, dtype=float)
    if u.shape[0] != x.shape[0]:
        raise DomainError("residual count must match the design rows")
    bread = xtx_inverse(x)
    meat = (x * u[:, None] ** 2).T @ x
    cov = bread @ meat @ bread
    cov = 0.5 * (cov + cov.T)  # symmetrise rounding noise
    return CovarianceEstimate(matrix=cov, kind="white")


def breusch_pagan(x: np.ndarray, residuals: np.ndarray) -> tuple[float, float]:
    """Studentized Breusch-Pagan test of residual homoskedasticity.

    Regresses the squared residuals on the design and returns the Lagrange
    multiplier statistic N * R^2 with its chi-square p-value (degrees of
    freedom = number of non-intercept columns).  Constant squared residuals
    give the well-defined limit (0, 1).
    """
    x = np.asarray(x, dtype=float)
    u2 = np.asarray(residuals, dtype=float) ** 2
    n, k1 = x.shape
    if k1 < 2:
        raise DomainError("the auxiliary regression needs at least one non-intercept column")
    if n <= k1 + 1:
        raise DomainError(f"need more than {k1 + 1} observations, got {n}")
    sst = float(np.sum((u2 - u2.mean()) ** 2))
    if sst <= 1e-30 * max(1.0, float(u2.mean()) ** 2):
        return 0.0, 1.0
    coef, *_ = np.linalg.lstsq(x, u2, rcond=None)
    ssr = float(np.sum((u2 - x @ coef) ** 2))
    r2 = 1.0 - ssr / sst
    stat = n * max(r2, 0.0)
    return stat, chi2_sf(stat, k1 - 1)


# ---------------------------------------------------------------------------
# Confidence intervals
# ---------------------------------------------------------------------------


def confidence_interval(
    row: np.ndarray,
    beta: np.ndarray,
    cov: CovarianceEstimate,
    alpha: float,
) -> tuple[float, float]:
    """Asymptotic interval center +/- q_(1+alpha)/2 * sqrt(row' V row)."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    row = np.asarray(row, dtype=float)
    center = float(row @ beta)
    quad = float(row @ cov.matrix @ row)
    if quad < -PSD_RTOL * max(1.0, float(np.abs(cov.matrix).max())):
        raise NumericalError(f"negative quadratic form {quad:.3e} in interval width")
    half = normal_quantile((1.0 + alpha) / 2.0) * math.sqrt(max(quad, 0.0))
    return center - half, center + half


@dataclass
class IntervalComparison:
    """Tally of which model produces the strictly smaller interval."""

    a_smaller: int
    b_smaller: int
    ties: int
    total: int
    alpha: float
    kind: str
    lengths_a: np.ndarray | None = None
    lengths_b: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.a_smaller + self.b_smaller + self.ties != self.total:
            raise NumericalError("interval comparison counts do not sum to the total")

    def shares(self) -> tuple[float, float]:
        if self.total == 0:
            return 0.0, 0.0
        return self.a_smaller / self.total, self.b_smaller / self.total


def compare_interval_lengths(
    model_a,
    model_b,
    scenarios: np.ndarray,
    alpha: float = 0.95,
    kind: str = "homoskedastic",
    keep_lengths: bool = False,
) -> IntervalComparison:
    """Compare asymptotic interval lengths of two proxies scenario by scenario.

    Models must share the monomial basis; each must expose ``design_row``,
    ``beta_hat`` and ``covariance(kind)``.  Exact ties (within relative
    tolerance) are counted separately rather than allocated to either side.
    """
    if [tuple(m.exponents) for m in model_a.monomials] != [tuple(m.exponents) for m in model_b.monomials]:
        raise DomainError("interval comparison requires a shared monomial basis")
    scenarios = np.atleast_2d(np.asarray(scenarios, dtype=float))
    cov_a = model_a.covariance(kind).matrix
    cov_b = model_b.covariance(kind).matrix
    rows = model_a.design_matrix(scenarios)
    quad_a = np.einsum("ij,jk,ik->i", rows, cov_a, rows)
    quad_b = np.einsum("ij,jk,ik->i", rows, cov_b, rows)
    if min(quad_a.min(initial=0.0), quad_b.min(initial=0.0)) < -PSD_RTOL:
        raise NumericalError("negative quadratic form in interval comparison")
    len_a = 2.0 * normal_quantile((1.0 + alpha) / 2.0) * np.sqrt(np.maximum(quad_a, 0.0))
    len_b = 2.0 * normal_quantile((1.0 + alpha) / 2.0) * np.sqrt(np.maximum(quad_b, 0.0))
    scale = np.maximum(np.maximum(np.abs(len_a), np.abs(len_b)), 1e-300)
    tie = np.abs(len_a - len_b) <= TIE_RTOL * scale
    a_smaller = int(np.sum(~tie & (len_a < len_b)))
    b_smaller = int(np.sum(~tie & (len_b < len_a)))
    return IntervalComparison(
        a_smaller=a_smaller,
        b_smaller=b_smaller,
        ties=int(tie.sum()),
        total=int(scenarios.shape[0]),
        alpha=alpha,
        kind=kind,
        lengths_a=len_a if keep_lengths else None,
        lengths_b=len_b if keep_lengths else None,
    )


# ---------------------------------------------------------------------------
# Loewner (PSD) ordering
# ---------------------------------------------------------------------------


class LoewnerOrder(Enum):
    A_DOMINATES = "a_dominates"  # a has (weakly) smaller variance in every direction
    B_DOMINATES = "b_dominates"
    TIE = "tie"
    INCOMPARABLE = "incomparable"


def loewner_compare(a: CovarianceEstimate, b: CovarianceEstimate) -> LoewnerOrder:
    """Partial order of covariance estimates: a dominates when b - a is PSD."""
    ma, mb = a.matrix, b.matrix
    if ma.shape != mb.shape:
        raise DomainError(f"dimension mismatch {ma.shape} vs {mb.shape}")
    diff = mb - ma
    scale = max(1.0, float(np.abs(ma).max()), float(np.abs(mb).max()))
    eig = np.linalg.eigvalsh(diff)
    a_dom = eig[0] >= -PSD_RTOL * scale  # b - a PSD
    b_dom = eig[-1] <= PSD_RTOL * scale  # a - b PSD
    if a_dom and b_dom:
        return LoewnerOrder.TIE
    if a_dom:
        return LoewnerOrder.A_DOMINATES
    if b_dom:
        return LoewnerOrder.B_DOMINATES
    return LoewnerOrder.INCOMPARABLE
