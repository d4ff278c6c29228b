"""Risk factors and economic transitions.

A *transition* summarises the move of the monitored market indicators
between the calibration date and a later date as a J-vector of elementary
risk factors (log return for stock levels, average zero-yield shift for the
rate curve, additive shifts for spreads and volatilities).  This module
defines the factor configuration, turns index histories into realized
transitions, calibrates the probable transition box from history and
samples calibration / validation transitions from it.

Transitions are plain 1-D ``numpy`` float arrays ordered like the factor
configuration; :func:`as_vector` enforces the shape/finiteness contract at
module boundaries.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import CalibrationError, ConfigError, DataError, DomainError

__all__ = [
    "RiskFactorKind",
    "RiskFactorDef",
    "IndexHistory",
    "ProbableSpace",
    "as_vector",
    "validate_defs",
    "compute_stock_factor",
    "compute_rate_factor",
    "compute_spread_factor",
    "realized_transition",
    "factor_series",
    "calibrate_probable_space",
    "sample_transitions",
    "out_of_sample_path",
]


class RiskFactorKind(str, Enum):
    STOCK_LEVEL = "stock_level"
    RATE_LEVEL = "rate_level"
    SPREAD_SOVEREIGN = "spread_sovereign"
    SPREAD_CORPORATE = "spread_corporate"
    STOCK_VOL = "stock_vol"
    ILLIQUIDITY = "illiquidity"


#: Kinds whose transition is an additive shift of the observed level.
_ADDITIVE_KINDS = {
    RiskFactorKind.SPREAD_SOVEREIGN,
    RiskFactorKind.SPREAD_CORPORATE,
    RiskFactorKind.STOCK_VOL,
    RiskFactorKind.ILLIQUIDITY,
}


@dataclass(frozen=True)
class RiskFactorDef:
    """One monitored risk factor and the composite indicator backing it."""

    id: str
    kind: RiskFactorKind
    index_name: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ConfigError("risk factor id must be non-empty")


def validate_defs(defs: Sequence[RiskFactorDef]) -> None:
    """Check configuration invariants: at least one factor, unique ids."""
    if len(defs) < 1:
        raise ConfigError("at least one risk factor must be configured")
    ids = [d.id for d in defs]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate risk factor ids: {sorted(ids)}")


def as_vector(values: Iterable[float], j: int | None = None) -> np.ndarray:
    """Validate and return a transition vector as a float array.

    Raises :class:`DomainError` on non-finite entries or, when ``j`` is
    given, on a length mismatch with the configured factor count.
    """
    vec = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if vec.ndim != 1:
        raise DomainError(f"transition must be 1-D, got shape {vec.shape}")
    if j is not None and vec.shape[0] != j:
        raise DomainError(f"transition has {vec.shape[0]} entries, expected {j}")
    if not np.all(np.isfinite(vec)):
        raise DomainError("transition entries must all be finite")
    return vec


# ---------------------------------------------------------------------------
# Elementary factor formulas
# ---------------------------------------------------------------------------


def compute_stock_factor(s0: float, st: float) -> float:
    """Log return ln(st / s0) of a stock index level."""
    if not (s0 > 0.0 and st > 0.0) or not (math.isfinite(s0) and math.isfinite(st)):
        raise DomainError(f"stock levels must be positive finite, got ({s0}, {st})")
    return math.log(st / s0)


def compute_rate_factor(curve0: Sequence[float], curvet: Sequence[float]) -> float:
    """Average zero-coupon yield shift between two discount curves.

    Both curves are zero-coupon prices at integer-spaced maturities
    1..M (curve index i prices maturity i+1).  The factor is
    (1/M) * sum_m (-1/m) * ln(P_t(m) / P_0(m)), i.e. the mean change of the
    continuously-compounded zero yields; it is positive when rates rise and
    equals the shift exactly for a parallel move.
    """
    p0 = np.asarray(curve0, dtype=float)
    pt = np.asarray(curvet, dtype=float)
    if p0.shape != pt.shape or p0.ndim != 1 or p0.size < 1:
        raise DomainError(f"curves must be equal-length 1-D, got {p0.shape} vs {pt.shape}")
    if np.any(p0 <= 0.0) or np.any(pt <= 0.0) or not (np.all(np.isfinite(p0)) and np.all(np.isfinite(pt))):
        raise DomainError("zero-coupon prices must be positive finite")
    maturities = np.arange(1, p0.size + 1, dtype=float)
    return float(np.mean(-np.log(pt / p0) / maturities))


def compute_spread_factor(spread0: float, spreadt: float) -> float:
    """Additive spread change, in decimal rate units."""
    if not (math.isfinite(spread0) and math.isfinite(spreadt)):
        raise DomainError(f"spreads must be finite, got ({spread0}, {spreadt})")
    return spreadt - spread0


# ---------------------------------------------------------------------------
# Index histories
# ---------------------------------------------------------------------------


@dataclass
class IndexHistory:
    """Observed composite-indicator history for every configured factor.

    ``levels`` maps factor id to a (T,) array of scalar observations;
    ``curves`` maps factor id to a (T, M) array of zero-coupon prices for
    curve-valued factors (maturities 1..M).  Dates are shared and strictly
    increasing.
    """

    dates: list[dt.date]
    levels: dict[str, np.ndarray] = field(default_factory=dict)
    curves: dict[str, np.ndarray] = field(default_factory=dict)
    frequency: str = "daily"  # "daily" or "quarterly"

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("history dates must be strictly increasing")
        t = len(self.dates)
        for fid, arr in self.levels.items():
            if arr.shape != (t,):
                raise DataError(f"level series '{fid}' has shape {arr.shape}, expected ({t},)")
        for fid, arr in self.curves.items():
            if arr.ndim != 2 or arr.shape[0] != t or arr.shape[1] < 1:
                raise DataError(f"curve series '{fid}' has shape {arr.shape}, expected ({t}, M)")
            if np.any(arr <= 0.0):
                raise DataError(f"curve series '{fid}' contains non-positive prices")
        if self.frequency not in ("daily", "quarterly"):
            raise DataError(f"unknown history frequency '{self.frequency}'")

    def index_of(self, date: dt.date) -> int:
        try:
            return self.dates.index(date)
        except ValueError:
            raise DataError(f"date {date.isoformat()} not present in history") from None

    def observation(self, factor_id: str, row: int) -> float | np.ndarray:
        if factor_id in self.levels:
            return float(self.levels[factor_id][row])
        if factor_id in self.curves:
            return self.curves[factor_id][row]
        raise DataError(f"history has no data for factor '{factor_id}'")

    # -- CSV wire format: header `date,factor_id,field,value`; scalar rows
    #    use field="level", curve rows field="m:<maturity>"; ISO dates.

    @classmethod
    def from_csv(cls, path: str, frequency: str | None = None) -> "IndexHistory":
        rows: list[tuple[dt.date, str, str, float]] = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["date", "factor_id", "field", "value"]:
                raise DataError(f"{path}: expected header date,factor_id,field,value, got {header}")
            for lineno, raw in enumerate(reader, start=2):
                if not raw:
                    continue
                try:
                    date = dt.date.fromisoformat(raw[0])
                    rows.append((date, raw[1], raw[2], float(raw[3])))
                except (ValueError, IndexError) as exc:
                    raise DataError(f"{path}:{lineno}: malformed row {raw!r}: {exc}") from None
        if not rows:
            raise DataError(f"{path}: empty history")

        dates = sorted({r[0] for r in rows})
        date_idx = {d: i for i, d in enumerate(dates)}
        scalars: dict[str, np.ndarray] = {}
        curve_cells: dict[str, dict[tuple[int, int], float]] = {}
        curve_mats: dict[str, set[int]] = {}
        for date, fid, fld, value in rows:
            i = date_idx[date]
            if fld == "level":
                scalars.setdefault(fid, np.full(len(dates), np.nan))[i] = value
            elif fld.startswith("m:"):
                m = int(float(fld[2:]))
                curve_cells.setdefault(fid, {})[(i, m)] = value
                curve_mats.setdefault(fid, set()).add(m)
            else:
                raise DataError(f"{path}: unknown field '{fld}' for factor '{fid}'")

        for fid, arr in scalars.items():
            if np.any(np.isnan(arr)):
                missing = dates[int(np.flatnonzero(np.isnan(arr))[0])]
                raise DataError(f"{path}: factor '{fid}' missing on {missing.isoformat()}")
        curves: dict[str, np.ndarray] = {}
        for fid, mats in curve_mats.items():
            ms = sorted(mats)
            if ms != list(range(1, len(ms) + 1)):
                raise DataError(f"{path}: curve '{fid}' maturities must be 1..M, got {ms}")
            grid = np.full((len(dates), len(ms)), np.nan)
            for (i, m), value in curve_cells[fid].items():
                grid[i, m - 1] = value
            if np.any(np.isnan(grid)):
                raise DataError(f"{path}: curve '{fid}' has missing maturities on some dates")
            curves[fid] = grid

        if frequency is None:
            gaps = [(b - a).days for a, b in zip(dates, dates[1:])]
            frequency = "daily" if (gaps and float(np.median(gaps)) <= 7.0) else "quarterly"
        return cls(dates=dates, levels=scalars, curves=curves, frequency=frequency)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date", "factor_id", "field", "value"])
            for i, date in enumerate(self.dates):
                for fid, arr in sorted(self.levels.items()):
                    writer.writerow([date.isoformat(), fid, "level", repr(float(arr[i]))])
                for fid, grid in sorted(self.curves.items()):
                    for m in range(grid.shape[1]):
                        writer.writerow([date.isoformat(), fid, f"m:{m + 1}", repr(float(grid[i, m]))])


def _pair_factor(kind: RiskFactorKind, obs0, obst) -> float:
    if kind == RiskFactorKind.STOCK_LEVEL:
        return compute_stock_factor(float(obs0), float(obst))
    if kind == RiskFactorKind.RATE_LEVEL:
        return compute_rate_factor(obs0, obst)
    if kind in _ADDITIVE_KINDS:
        return compute_spread_factor(float(obs0), float(obst))
    raise ConfigError(f"unhandled factor kind {kind}")


def realized_transition(
    history: IndexHistory,
    defs: Sequence[RiskFactorDef],
    t0: dt.date,
    t: dt.date,
) -> np.ndarray:
    """Transition vector realized between two dates of the history."""
    validate_defs(defs)
    if not t0 < t:
        raise DataError(f"need t0 < t, got {t0} >= {t}")
    i0, i1 = history.index_of(t0), history.index_of(t)
    out = [
        _pair_factor(d.kind, history.observation(d.id, i0), history.observation(d.id, i1))
        for d in defs
    ]
    return as_vector(out, len(defs))


def factor_series(
    history: IndexHistory,
    factor_def: RiskFactorDef,
    window: int | None = None,
) -> np.ndarray:
    """Rolling one-period transition outcomes for one factor.

    ``window`` is the number of observations spanned by one monitoring
    period; windows overlap (stride one) so daily histories yield a large
    sample.  Defaults to 1 for quarterly data and 63 business days (one
    quarter) for daily data.
    """
    if window is None:
        window = 1 if history.frequency == "quarterly" else 63
    if window < 1:
        raise DomainError(f"window must be >= 1, got {window}")
    if factor_def.id in history.levels:
        obs: np.ndarray = history.levels[factor_def.id]
    else:
        obs = history.curves[factor_def.id] if factor_def.id in history.curves else None  # type: ignore[assignment]
        if obs is None:
            raise DataError(f"history has no data for factor '{factor_def.id}'")
    n = obs.shape[0] - window
    if n < 1:
        raise CalibrationError(
            f"factor '{factor_def.id}': {obs.shape[0]} observations cannot span window {window}"
        )
    return np.array([_pair_factor(factor_def.kind, obs[i], obs[i + window]) for i in range(n)])


# ---------------------------------------------------------------------------
# Probable transition space
# ---------------------------------------------------------------------------

#: Minimum factor outcomes required to calibrate an interval from history.
MIN_FACTOR_OUTCOMES = 8


@dataclass(frozen=True)
class ProbableSpace:
    """Per-factor interval box containing the probable one-period transitions."""

    factor_ids: tuple[str, ...]
    lo: np.ndarray
    hi: np.ndarray
    alpha: float
    source_window: tuple[dt.date, dt.date] | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise DomainError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.lo.shape != self.hi.shape or self.lo.shape != (len(self.factor_ids),):
            raise DomainError("probable-space bounds must match the factor count")
        if np.any(self.lo > self.hi):
            raise DomainError("probable-space intervals must satisfy lo <= hi")

    @property
    def j(self) -> int:
        return len(self.factor_ids)

    def contains(self, eps: np.ndarray) -> bool:
        eps = as_vector(eps, self.j)
        return bool(np.all(eps >= self.lo) and np.all(eps <= self.hi))

    def outside_factors(self, eps: np.ndarray) -> list[str]:
        eps = as_vector(eps, self.j)
        mask = (eps < self.lo) | (eps > self.hi)
        return [fid for fid, out in zip(self.factor_ids, mask) if out]


def empirical_quantile(sample: np.ndarray, p: float) -> float:
    """Order-statistic quantile with linear interpolation between ranks."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"quantile level must be in [0, 1], got {p}")
    return float(np.quantile(np.asarray(sample, dtype=float), p, method="linear"))


def calibrate_probable_space(
    history: IndexHistory,
    defs: Sequence[RiskFactorDef],
    alpha: float,
    window: int | None = None,
) -> ProbableSpace:
    """Per-factor [(1-alpha)/2, (1+alpha)/2] historical-quantile box.

    Intervals are calibrated independently per factor (no cross-factor
    correlation), which makes the box prudent: it contains at least the
    requested share of the historical one-period transitions.
    """
    validate_defs(defs)
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must be in (0, 1], got {alpha}")
    lo = np.empty(len(defs))
    hi = np.empty(len(defs))
    for jx, d in enumerate(defs):
        outcomes = factor_series(history, d, window)
        if outcomes.size < MIN_FACTOR_OUTCOMES:
            raise CalibrationError(
                f"factor '{d.id}': only {outcomes.size} outcomes, "
                f"need >= {MIN_FACTOR_OUTCOMES} to calibrate quantiles"
            )
        lo[jx] = empirical_quantile(outcomes, (1.0 - alpha) / 2.0)
        hi[jx] = empirical_quantile(outcomes, (1.0 + alpha) / 2.0)
    return ProbableSpace(
        factor_ids=tuple(d.id for d in defs),
        lo=lo,
        hi=hi,
        alpha=alpha,
        source_window=(history.dates[0], history.dates[-1]),
    )


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_transitions(space: ProbableSpace, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` transitions i.i.d. uniform over the box, as an (n, J) array.

    Uniform independent coordinates maximise design coverage for the
    downstream regressions; the draw is deterministic given the seed.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    u = rng.random((n, space.j))
    return space.lo + u * (space.hi - space.lo)


def out_of_sample_path(
    space: ProbableSpace,
    worst_direction: Sequence[str],
    steps: int = 10,
) -> np.ndarray:
    """Validation scenarios marching from the origin to the worst-case corner.

    ``worst_direction`` holds "lo" or "hi" per factor; scenario k
    (k = 1..steps) is (k/steps) * corner, so the last scenario is the corner
    itself.  Returned as a (steps, J) array.
    """
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")
    if len(worst_direction) != space.j:
        raise ConfigError(f"worst_direction needs {space.j} entries, got {len(worst_direction)}")
    corner = np.empty(space.j)
    for jx, side in enumerate(worst_direction):
        if side == "lo":
            corner[jx] = space.lo[jx]
        elif side == "hi":
            corner[jx] = space.hi[jx]
        else:
            raise ConfigError(f"worst_direction entries must be 'lo' or 'hi', got {side!r}")
    ks = np.arange(1, steps + 1, dtype=float)[:, None]
    return (ks / float(steps)) * corner[None, :]
