"""Polynomial proxies of central and shocked net asset values.

A proxy regresses simulated NAV outcomes on monomials of the risk-factor
vector.  Two calibration budgets are supported: many transitions with a
single secondary path each (one noisy outcome per point, "LSMC"), and few
transitions with many secondary paths averaged per point ("CF").  Regressor
selection is backward stepwise under the Akaike criterion on the
penalised Gaussian log-likelihood; the CF fit reuses a previously selected
basis because its small primary sample cannot support selection.

Fits use orthogonal decompositions throughout; the explicit normal-equation
inverse never appears.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from . import econometrics
from .errors import CalibrationError, DataError, DomainError, FitError
from .transitions import as_vector

__all__ = [
    "MonomialSpec",
    "ProxyModel",
    "ValidationReport",
    "ResponseFn",
    "candidate_regressors",
    "build_design",
    "ols_fit",
    "aic",
    "stepwise_select",
    "calibrate_lsmc",
    "calibrate_cf",
    "evaluate",
    "validate",
]

#: Response generator: (transitions (N, J), p, seed) -> outcomes (N, P).
ResponseFn = Callable[[np.ndarray, int, int], np.ndarray]

#: Minimum headroom of calibration points over candidate regressors.
SELECTION_HEADROOM = 10


@dataclass(frozen=True)
class MonomialSpec:
    """One regressor: a product of factor powers."""

    exponents: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "exponents", tuple(int(e) for e in self.exponents))
        if any(e < 0 for e in self.exponents):
            raise DomainError("monomial exponents must be >= 0")
        if self.degree < 1:
            raise DomainError("monomials must have total degree >= 1")

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    def label(self) -> str:
        parts = []
        for j, e in enumerate(self.exponents):
            if e == 1:
                parts.append(f"e{j + 1}")
            elif e > 1:
                parts.append(f"e{j + 1}^{e}")
        return "*".join(parts)


def candidate_regressors(j: int, degree_cap: int = 3) -> list[MonomialSpec]:
    """All monomials in at most two active factors with degree 1..cap.

    Single-factor powers come first (factor by factor), then the crossed
    terms pair by pair; the order is deterministic and deduplicated.
    """
    if j < 1:
        raise DomainError(f"need at least one factor, got {j}")
    if degree_cap < 1:
        raise DomainError(f"degree cap must be >= 1, got {degree_cap}")
    out: list[MonomialSpec] = []
    for i in range(j):
        for power in range(1, degree_cap + 1):
            exp = [0] * j
            exp[i] = power
            out.append(MonomialSpec(tuple(exp)))
    for i, k in combinations(range(j), 2):
        for total in range(2, degree_cap + 1):
            for left in range(total - 1, 0, -1):
                exp = [0] * j
                exp[i] = left
                exp[k] = total - left
                out.append(MonomialSpec(tuple(exp)))
    return out


def build_design(transitions: np.ndarray, monomials: Sequence[MonomialSpec]) -> np.ndarray:
    """Design matrix with a leading intercept column, shape (N, K+1)."""
    transitions = np.atleast_2d(np.asarray(transitions, dtype=float))
    n, j = transitions.shape
    cols = [np.ones(n)]
    for mono in monomials:
        if len(mono.exponents) != j:
            raise DomainError(
                f"monomial {mono.exponents} does not match factor count {j}"
            )
        col = np.ones(n)
        for jx, e in enumerate(mono.exponents):
            if e:
                col = col * transitions[:, jx] ** e
        cols.append(col)
    return np.column_stack(cols)


@dataclass(frozen=True)
class OlsFit:
    beta: np.ndarray
    residuals: np.ndarray
    sigma2: float
    ssr: float


def ols_fit(x: np.ndarray, y: np.ndarray) -> OlsFit:
    """Least squares via SVD with the unbiased residual-variance estimate.

    sigma2 = SSR / (N - K - 1) where K+1 is the column count; requires more
    observations than parameters and a numerically full-rank design.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k1 = x.shape
    if y.shape != (n,):
        raise DomainError(f"response has shape {y.shape}, expected ({n},)")
    if n <= k1:
        raise FitError(f"need more than {k1} observations to fit {k1} parameters, got {n}")
    econometrics.xtx_inverse(x)  # rank check with column diagnostics
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    residuals = y - x @ beta
    ssr = float(residuals @ residuals)
    return OlsFit(beta=beta, residuals=residuals, sigma2=ssr / (n - k1), ssr=ssr)


def aic(n: int, ssr: float, k: int) -> float:
    """Gaussian AIC: N ln(SSR/N) + 2 (K+2), K non-intercept regressors."""
    return n * float(np.log(max(ssr, 1e-300) / n)) + 2.0 * (k + 2)


def stepwise_select(
    x_full: np.ndarray,
    y: np.ndarray,
    monomials: Sequence[MonomialSpec],
) -> tuple[list[MonomialSpec], list[int], list[float]]:
    """Backward stepwise elimination under the Akaike criterion.

    Starting from the full candidate design (intercept + all monomials),
    repeatedly drops the regressor whose removal lowers the criterion most,
    stopping when no removal improves it.  The intercept is never dropped
    and ties break deterministically on column order.  Returns the kept
    monomials, their indices into the candidate list, and the criterion
    trace (full model first).
    """
    x_full = np.asarray(x_full, dtype=float)
    n = x_full.shape[0]
    if x_full.shape[1] != len(monomials) + 1:
        raise DomainError("design must hold the intercept plus one column per monomial")
    keep = list(range(len(monomials)))
    current = ols_fit(x_full, y)
    trace = [aic(n, current.ssr, len(keep))]
    while keep:
        candidate_aics = np.empty(len(keep))
        for pos in range(len(keep)):
            cols = [0] + [1 + m for q, m in enumerate(keep) if q != pos]
            fit = ols_fit(x_full[:, cols], y)
            candidate_aics[pos] = aic(n, fit.ssr, len(keep) - 1)
        best = int(np.argmin(candidate_aics))
        if candidate_aics[best] >= trace[-1]:
            break
        del keep[best]
        trace.append(float(candidate_aics[best]))
    return [monomials[m] for m in keep], keep, trace


# ---------------------------------------------------------------------------
# Proxy model
# ---------------------------------------------------------------------------

_FORMAT_VERSION = 1


@dataclass
class ProxyModel:
    """Fitted polynomial proxy with both covariance estimates attached."""

    monomials: list[MonomialSpec]
    beta_hat: np.ndarray  # (K+1,), intercept first
    residuals: np.ndarray  # (N,)
    sigma2_hat: float
    cov_homo: econometrics.CovarianceEstimate
    cov_white: econometrics.CovarianceEstimate
    method: str  # "LSMC" | "CF"
    n_primary: int
    p_secondary: int
    factor_count: int
    shock_id: str | None = None
    calibration_date: str | None = None
    selection_trace: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.method not in ("LSMC", "CF"):
            raise DomainError(f"method must be LSMC or CF, got {self.method!r}")
        if len(self.beta_hat) != len(self.monomials) + 1:
            raise DomainError("coefficient count must equal monomial count + intercept")

    def design_row(self, eps: np.ndarray) -> np.ndarray:
        return build_design(as_vector(eps, self.factor_count)[None, :], self.monomials)[0]

    def design_matrix(self, transitions: np.ndarray) -> np.ndarray:
        return build_design(transitions, self.monomials)

    def covariance(self, kind: str) -> econometrics.CovarianceEstimate:
        if kind == "homoskedastic":
            return self.cov_homo
        if kind == "white":
            return self.cov_white
        raise DomainError(f"unknown covariance kind {kind!r}")

    def __call__(self, eps: np.ndarray) -> float:
        return evaluate(self, eps)

    def evaluate_batch(self, transitions: np.ndarray) -> np.ndarray:
        return self.design_matrix(transitions) @ self.beta_hat

    def confidence_interval(self, eps, alpha: float = 0.95, kind: str = "homoskedastic"):
        return econometrics.confidence_interval(
            self.design_row(eps), self.beta_hat, self.covariance(kind), alpha
        )

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": _FORMAT_VERSION,
            "method": self.method,
            "factor_count": self.factor_count,
            "monomials": [list(m.exponents) for m in self.monomials],
            "beta_hat": self.beta_hat.tolist(),
            "residuals": self.residuals.tolist(),
            "sigma2_hat": self.sigma2_hat,
            "cov_homo": self.cov_homo.matrix.tolist(),
            "cov_white": self.cov_white.matrix.tolist(),
            "n_primary": self.n_primary,
            "p_secondary": self.p_secondary,
            "shock_id": self.shock_id,
            "calibration_date": self.calibration_date,
            "selection_trace": self.selection_trace,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProxyModel":
        if data.get("format") != _FORMAT_VERSION:
            raise DataError(f"unsupported proxy format {data.get('format')!r}")
        return cls(
            monomials=[MonomialSpec(tuple(e)) for e in data["monomials"]],
            beta_hat=np.asarray(data["beta_hat"], dtype=float),
            residuals=np.asarray(data["residuals"], dtype=float),
            sigma2_hat=float(data["sigma2_hat"]),
            cov_homo=econometrics.CovarianceEstimate(
                np.asarray(data["cov_homo"], dtype=float), "homoskedastic"
            ),
            cov_white=econometrics.CovarianceEstimate(
                np.asarray(data["cov_white"], dtype=float), "white"
            ),
            method=data["method"],
            n_primary=int(data["n_primary"]),
            p_secondary=int(data["p_secondary"]),
            factor_count=int(data["factor_count"]),
            shock_id=data.get("shock_id"),
            calibration_date=data.get("calibration_date"),
            selection_trace=list(data.get("selection_trace", [])),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProxyModel":
        return cls.from_dict(json.loads(text))


def _assemble(
    transitions: np.ndarray,
    responses: np.ndarray,
    monomials: list[MonomialSpec],
    method: str,
    p_secondary: int,
    shock_id: str | None,
    calibration_date: str | None,
    selection_trace: list[float],
) -> ProxyModel:
    x = build_design(transitions, monomials)
    fit = ols_fit(x, responses)
    return ProxyModel(
        monomials=monomials,
        beta_hat=fit.beta,
        residuals=fit.residuals,
        sigma2_hat=fit.sigma2,
        cov_homo=econometrics.homoskedastic_cov(x, fit.residuals, fit.sigma2),
        cov_white=econometrics.white_cov(x, fit.residuals),
        method=method,
        n_primary=transitions.shape[0],
        p_secondary=p_secondary,
        factor_count=transitions.shape[1],
        shock_id=shock_id,
        calibration_date=calibration_date,
        selection_trace=selection_trace,
    )


def calibrate_lsmc(
    transitions: np.ndarray,
    response_fn: ResponseFn,
    seed: int,
    degree_cap: int = 3,
    shock_id: str | None = None,
    calibration_date: str | dt.date | None = None,
) -> ProxyModel:
    """Many-transitions / one-path calibration with stepwise selection."""
    transitions = np.atleast_2d(np.asarray(transitions, dtype=float))
    n, j = transitions.shape
    candidates = candidate_regressors(j, degree_cap)
    if n < len(candidates) + SELECTION_HEADROOM:
        raise CalibrationError(
            f"{n} transitions cannot support selection over {len(candidates)} candidates "
            f"(need >= {len(candidates) + SELECTION_HEADROOM})"
        )
    responses = np.asarray(response_fn(transitions, 1, seed), dtype=float).reshape(n)
    x_full = build_design(transitions, candidates)
    selected, _, trace = stepwise_select(x_full, responses, candidates)
    return _assemble(
        transitions, responses, selected, "LSMC", 1, shock_id,
        None if calibration_date is None else str(calibration_date), trace,
    )


def calibrate_cf(
    transitions: np.ndarray,
    p: int,
    response_fn: ResponseFn,
    monomials: Sequence[MonomialSpec],
    seed: int,
    shock_id: str | None = None,
    calibration_date: str | dt.date | None = None,
) -> ProxyModel:
    """Few-transitions / many-paths calibration on a given regressor basis.

    Responses are per-transition means over ``p`` secondary paths; the basis
    is reused from a selection run rather than re-selected, because the
    small primary sample cannot support its own selection.
    """
    transitions = np.atleast_2d(np.asarray(transitions, dtype=float))
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    outcomes = np.asarray(response_fn(transitions, p, seed), dtype=float)
    if outcomes.shape != (transitions.shape[0], p):
        raise DataError(
            f"response engine returned {outcomes.shape}, expected {(transitions.shape[0], p)}"
        )
    responses = outcomes.mean(axis=1)
    return _assemble(
        transitions, responses, list(monomials), "CF", p, shock_id,
        None if calibration_date is None else str(calibration_date), [],
    )


def evaluate(model: ProxyModel, eps: np.ndarray) -> float:
    """Proxy prediction at one transition."""
    return float(model.design_row(eps) @ model.beta_hat)


# ---------------------------------------------------------------------------
# Out-of-sample validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    """Relative deviations of the proxy against matched full calculations."""

    scenarios: np.ndarray  # (S, J)
    proxy_values: np.ndarray  # (S,)
    full_values: np.ndarray  # (S,)
    deviations: np.ndarray  # (S,), nan where the full value is zero
    undefined: np.ndarray  # (S,) bool

    @property
    def worst_abs_deviation(self) -> float:
        finite = self.deviations[~self.undefined]
        return float(np.max(np.abs(finite))) if finite.size else float("nan")


def validate(
    model: ProxyModel,
    scenarios: np.ndarray,
    full_values: np.ndarray,
) -> ValidationReport:
    """Per-scenario relative deviation (proxy - full) / full."""
    scenarios = np.atleast_2d(np.asarray(scenarios, dtype=float))
    full_values = np.asarray(full_values, dtype=float)
    if full_values.shape[0] != scenarios.shape[0]:
        raise DomainError("scenario and full-calculation counts must match")
    proxy_values = model.evaluate_batch(scenarios)
    undefined = full_values == 0.0
    deviations = np.where(
        undefined, np.nan, (proxy_values - full_values) / np.where(undefined, 1.0, full_values)
    )
    return ValidationReport(
        scenarios=scenarios,
        proxy_values=proxy_values,
        full_values=full_values,
        deviations=deviations,
        undefined=undefined,
    )
