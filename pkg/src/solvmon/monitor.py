"""Continuous solvency monitoring on top of calibrated proxies.

A calibration bundle freezes everything produced at a calibration date:
the factor configuration, the probable transition box, the central and
shocked proxies, the capital basis and the frozen sub-module charges.
Monitoring then reduces every new date to one realized transition, a proxy
evaluation per stress, and the standard-formula assembly; what-if analysis
runs the same pipeline on hypothetical transitions.

Evaluation is pure: replaying a date against the same bundle and history
produces bit-identical records.  Persistence is an append-only JSON-lines
record store per bundle version plus an upsert market-data store with an
audit log; no external database is involved.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import solvency
from .errors import ConfigError, DataError, DomainError
from .proxy import ProxyModel
from .solvency import AggregationConfig, CapitalBasis, FrozenEntry, MarginalScrSet, SolvencySnapshot
from .transitions import (
    IndexHistory,
    ProbableSpace,
    RiskFactorDef,
    RiskFactorKind,
    as_vector,
    validate_defs,
)

__all__ = [
    "CalibrationBundle",
    "MonitoringRecord",
    "AttributionResult",
    "SensitivityGrid",
    "MarketDataStore",
    "RecordStore",
    "IngestResult",
    "whatif",
    "evaluate_date",
    "smoothed_sr",
    "sensitivity_grid",
    "marginal_attribution",
    "ingest",
]

_BUNDLE_FORMAT = 1


def _canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


@dataclass
class CalibrationBundle:
    """Everything frozen at a calibration date that monitoring consumes."""

    defs: list[RiskFactorDef]
    space: ProbableSpace
    central: ProxyModel
    shocked: dict[str, ProxyModel]  # keyed by stress id
    basis: CapitalBasis
    frozen: dict[str, FrozenEntry]
    aggregation: AggregationConfig
    calibration_date: dt.date
    #: calibration-date indicator levels (factor id -> level or curve); the
    #: reference point every realized transition is measured against
    calibration_observations: dict[str, object] = field(default_factory=dict)
    config_hash: str = ""
    attribution_order: list[str] = field(default_factory=list)
    smoothing_window: int = 10
    full_calc_nav_central: float | None = None
    version: str = ""
    calibration_snapshot: SolvencySnapshot | None = None

    def __post_init__(self) -> None:
        validate_defs(self.defs)
        ids = [d.id for d in self.defs]
        if tuple(ids) != tuple(self.space.factor_ids):
            raise ConfigError("probable space factors must match the factor configuration")
        missing = [fid for fid in ids if fid not in self.calibration_observations]
        if missing:
            raise ConfigError(f"calibration observations missing for factors {missing}")
        if self.central.factor_count != len(self.defs):
            raise ConfigError("central proxy factor count does not match the configuration")
        dates = {self.central.calibration_date}
        for sid, model in self.shocked.items():
            if model.factor_count != len(self.defs):
                raise ConfigError(f"shocked proxy '{sid}' factor count mismatch")
            dates.add(model.calibration_date)
        stamped = {d for d in dates if d is not None}
        if len(stamped) > 1 or (stamped and stamped != {self.calibration_date.isoformat()}):
            raise ConfigError(f"proxies carry mixed calibration dates {sorted(stamped)}")
        if not self.attribution_order:
            self.attribution_order = list(ids)
        if sorted(self.attribution_order) != sorted(ids):
            raise ConfigError("attribution order must be a permutation of the factor ids")
        if self.smoothing_window < 1:
            raise ConfigError("smoothing window must be >= 1")
        if not self.version:
            self.version = self._content_hash()
        if self.calibration_snapshot is None:
            self.calibration_snapshot = whatif(self, np.zeros(len(self.defs)))

    @property
    def factor_ids(self) -> list[str]:
        return [d.id for d in self.defs]

    def _content_dict(self) -> dict:
        return {
            "format": _BUNDLE_FORMAT,
            "defs": [
                {"id": d.id, "kind": d.kind.value, "index_name": d.index_name} for d in self.defs
            ],
            "calibration_observations": {
                fid: (list(map(float, obs)) if isinstance(obs, (list, tuple, np.ndarray)) else float(obs))
                for fid, obs in sorted(self.calibration_observations.items())
            },
            "space": {
                "factor_ids": list(self.space.factor_ids),
                "lo": self.space.lo.tolist(),
                "hi": self.space.hi.tolist(),
                "alpha": self.space.alpha,
                "source_window": None if self.space.source_window is None else [
                    self.space.source_window[0].isoformat(),
                    self.space.source_window[1].isoformat(),
                ],
            },
            "central": self.central.to_dict(),
            "shocked": {sid: m.to_dict() for sid, m in sorted(self.shocked.items())},
            "basis": {
                "tier_one_of": self.basis.tier_one_of,
                "subordinated_debt": self.basis.subordinated_debt,
                "fin_mgmt_fees": self.basis.fin_mgmt_fees,
                "itr_nb": self.basis.itr_nb,
                "scr_op_0": self.basis.scr_op_0,
                "tax_rate": self.basis.tax_rate,
                "money_places": self.basis.money_places,
            },
            "frozen": {
                key: {
                    "value": e.value, "rule": e.rule,
                    "measure_key": e.measure_key, "level": e.level,
                }
                for key, e in sorted(self.frozen.items())
            },
            "aggregation": {
                "market_order": list(self.aggregation.market_order),
                "market_corr": np.asarray(self.aggregation.market_corr).tolist(),
                "top_order": list(self.aggregation.top_order),
                "top_corr": np.asarray(self.aggregation.top_corr).tolist(),
                "equity_inner_corr": self.aggregation.equity_inner_corr,
                "ir_rule": self.aggregation.ir_rule,
            },
            "calibration_date": self.calibration_date.isoformat(),
            "config_hash": self.config_hash,
            "attribution_order": self.attribution_order,
            "smoothing_window": self.smoothing_window,
            "full_calc_nav_central": self.full_calc_nav_central,
        }

    def _content_hash(self) -> str:
        return hashlib.sha256(_canonical_json(self._content_dict()).encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        data = self._content_dict()
        data["version"] = self.version
        if self.calibration_snapshot is not None:
            data["calibration_snapshot"] = self.calibration_snapshot.to_dict()
        return data

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationBundle":
        if data.get("format") != _BUNDLE_FORMAT:
            raise DataError(f"unsupported bundle format {data.get('format')!r}")
        space = data["space"]
        window = space.get("source_window")
        return cls(
            defs=[
                RiskFactorDef(d["id"], RiskFactorKind(d["kind"]), d.get("index_name", ""))
                for d in data["defs"]
            ],
            space=ProbableSpace(
                factor_ids=tuple(space["factor_ids"]),
                lo=np.asarray(space["lo"], dtype=float),
                hi=np.asarray(space["hi"], dtype=float),
                alpha=float(space["alpha"]),
                source_window=None if window is None else (
                    dt.date.fromisoformat(window[0]), dt.date.fromisoformat(window[1])
                ),
            ),
            calibration_observations=data.get("calibration_observations", {}),
            central=ProxyModel.from_dict(data["central"]),
            shocked={sid: ProxyModel.from_dict(m) for sid, m in data["shocked"].items()},
            basis=CapitalBasis(**data["basis"]),
            frozen={key: FrozenEntry(**e) for key, e in data["frozen"].items()},
            aggregation=AggregationConfig(
                market_order=tuple(data["aggregation"]["market_order"]),
                market_corr=np.asarray(data["aggregation"]["market_corr"], dtype=float),
                top_order=tuple(data["aggregation"]["top_order"]),
                top_corr=np.asarray(data["aggregation"]["top_corr"], dtype=float),
                equity_inner_corr=float(data["aggregation"]["equity_inner_corr"]),
                ir_rule=data["aggregation"]["ir_rule"],
            ),
            calibration_date=dt.date.fromisoformat(data["calibration_date"]),
            config_hash=data.get("config_hash", ""),
            attribution_order=list(data.get("attribution_order", [])),
            smoothing_window=int(data.get("smoothing_window", 10)),
            full_calc_nav_central=data.get("full_calc_nav_central"),
            version=data.get("version", ""),
        )

    @classmethod
    def load(cls, path: str) -> "CalibrationBundle":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Evaluation pipeline
# ---------------------------------------------------------------------------


def whatif(
    bundle: CalibrationBundle,
    eps: np.ndarray,
    volume_measures: Mapping[str, tuple[float, float]] | None = None,
    date: dt.date | None = None,
) -> SolvencySnapshot:
    """Snapshot for a hypothetical transition; never persisted.

    Transitions outside the probable box are evaluated anyway (the proxies
    extrapolate) and flagged, since leaving the box is a recalibration
    trigger rather than a failure.
    """
    eps = as_vector(eps, len(bundle.defs))
    nav_central = float(bundle.central.evaluate_batch(eps[None, :])[0])
    shocked_navs = {
        sid: float(model.evaluate_batch(eps[None, :])[0])
        for sid, model in bundle.shocked.items()
    }
    monitored = solvency.market_scr_values(nav_central, shocked_navs, bundle.aggregation)
    marginals = solvency.update_frozen(
        MarginalScrSet(monitored=monitored, frozen=dict(bundle.frozen)), volume_measures
    )
    breakdown = solvency.aggregate_bscr(marginals, bundle.aggregation)
    snapshot = solvency.solvency_chain(
        nav_central, bundle.basis, breakdown.bscr, marginals=marginals, date=date
    )
    outside = bundle.space.outside_factors(eps)
    if outside:
        snapshot = SolvencySnapshot(
            **{**snapshot.__dict__, "flags": snapshot.flags + ("out_of_space:" + ",".join(outside),)}
        )
    return snapshot


@dataclass(frozen=True)
class MonitoringRecord:
    """One evaluated monitoring date."""

    date: dt.date
    observed: dict[str, object]  # factor id -> level (float) or curve (list)
    transition: np.ndarray
    snapshot: SolvencySnapshot
    validity: str  # "in_space" | "out_of_space"
    bundle_version: str
    smoothed_sr: float | None = None

    def to_dict(self) -> dict:
        return {
            "date": self.date.isoformat(),
            "observed": self.observed,
            "transition": [float(v) for v in self.transition],
            "snapshot": self.snapshot.to_dict(),
            "validity": self.validity,
            "bundle_version": self.bundle_version,
            "smoothed_sr": self.smoothed_sr,
        }


def realized_transition_from_bundle(
    bundle: CalibrationBundle, observed: Mapping[str, object]
) -> np.ndarray:
    """Transition realized since calibration, measured against the bundle.

    The reference levels are the calibration-date observations stored in the
    bundle, so a monitoring feed only needs current data.  Curve snapshots of
    different depth are compared over their common maturities.
    """
    from .transitions import _pair_factor  # elementwise factor formulas

    out = np.empty(len(bundle.defs))
    for jx, d in enumerate(bundle.defs):
        base = bundle.calibration_observations[d.id]
        current = observed[d.id]
        if isinstance(base, (list, tuple, np.ndarray)):
            base_arr = np.asarray(base, dtype=float)
            cur_arr = np.asarray(current, dtype=float)
            m = min(base_arr.size, cur_arr.size)
            if m < 1:
                raise DataError(f"factor '{d.id}': empty curve snapshot")
            out[jx] = _pair_factor(d.kind, base_arr[:m], cur_arr[:m])
        else:
            out[jx] = _pair_factor(d.kind, float(base), float(current))
    return as_vector(out, len(bundle.defs))


def evaluate_date(
    bundle: CalibrationBundle,
    history: IndexHistory,
    t: dt.date,
    volume_measures: Mapping[str, tuple[float, float]] | None = None,
) -> MonitoringRecord:
    """Full pipeline for one date: transition, proxies, assembly, flags."""
    if t < bundle.calibration_date:
        raise DataError(f"monitoring date {t} precedes the calibration date")
    row = history.index_of(t)
    observed: dict[str, object] = {}
    for d in bundle.defs:
        obs = history.observation(d.id, row)
        observed[d.id] = float(obs) if np.isscalar(obs) or getattr(obs, "ndim", 1) == 0 \
            else [float(v) for v in obs]
    if t == bundle.calibration_date:
        eps = np.zeros(len(bundle.defs))
    else:
        eps = realized_transition_from_bundle(bundle, observed)
    snapshot = whatif(bundle, eps, volume_measures, date=t)
    outside = bundle.space.outside_factors(eps)
    return MonitoringRecord(
        date=t,
        observed=observed,
        transition=eps,
        snapshot=snapshot,
        validity="out_of_space" if outside else "in_space",
        bundle_version=bundle.version,
    )


def smoothed_sr(values: Sequence[float], window: int = 10) -> np.ndarray:
    """Trailing moving average; partial windows at the start use what exists."""
    if window < 1:
        raise DomainError(f"window must be >= 1, got {window}")
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    for i in range(values.size):
        out[i] = values[max(0, i - window + 1): i + 1].mean()
    return out


@dataclass(frozen=True)
class SensitivityGrid:
    factor_ids: tuple[str, ...]
    axes: tuple[np.ndarray, ...]
    sr: np.ndarray  # (n1,) or (n1, n2)
    nav: np.ndarray
    bundle_version: str

    def to_dict(self) -> dict:
        return {
            "factors": list(self.factor_ids),
            "axes": [axis.tolist() for axis in self.axes],
            "sr": self.sr.tolist(),
            "nav": self.nav.tolist(),
            "bundle_version": self.bundle_version,
        }


def sensitivity_grid(
    bundle: CalibrationBundle,
    factors: Sequence[str],
    grid: int | Sequence[Sequence[float]] = 11,
) -> SensitivityGrid:
    """Solvency-ratio surface over one or two factors, others held at zero."""
    if not 1 <= len(factors) <= 2:
        raise ConfigError("sensitivity grids take one or two factor ids")
    if len(set(factors)) != len(factors):
        raise ConfigError("sensitivity factors must be distinct")
    ids = bundle.factor_ids
    for fid in factors:
        if fid not in ids:
            raise ConfigError(f"unknown factor id {fid!r}")
    if isinstance(grid, int):
        if grid < 1:
            raise ConfigError("grid size must be >= 1")
        axes = tuple(
            np.linspace(bundle.space.lo[ids.index(f)], bundle.space.hi[ids.index(f)], grid)
            for f in factors
        )
    else:
        if len(grid) != len(factors):
            raise ConfigError("one breakpoint list per factor is required")
        axes = tuple(np.asarray(g, dtype=float) for g in grid)
    shape = tuple(axis.size for axis in axes)
    sr = np.full(shape, np.nan)
    nav = np.full(shape, np.nan)
    for index in np.ndindex(*shape):
        eps = np.zeros(len(ids))
        for fpos, fid in enumerate(factors):
            eps[ids.index(fid)] = axes[fpos][index[fpos]]
        snap = whatif(bundle, eps)
        sr[index] = np.nan if snap.sr is None else snap.sr
        nav[index] = snap.nav_central
    return SensitivityGrid(
        factor_ids=tuple(factors), axes=axes, sr=sr, nav=nav, bundle_version=bundle.version
    )


@dataclass(frozen=True)
class AttributionResult:
    """Stepwise decomposition of the ratio change along the factor order."""

    order: tuple[str, ...]
    base_sr: float
    step_srs: tuple[float, ...]
    deltas: tuple[float, ...]
    total_delta: float
    bundle_version: str

    def to_dict(self) -> dict:
        return {
            "order": list(self.order),
            "base_sr": self.base_sr,
            "step_srs": list(self.step_srs),
            "deltas": list(self.deltas),
            "total_delta": self.total_delta,
            "bundle_version": self.bundle_version,
        }


def marginal_attribution(
    bundle: CalibrationBundle,
    eps: np.ndarray,
    order: Sequence[str] | None = None,
) -> AttributionResult:
    """Apply the factors one by one and log the ratio after each step.

    The deltas telescope exactly to the total change; the decomposition is
    order-dependent, so the order is part of the result.
    """
    eps = as_vector(eps, len(bundle.defs))
    order = list(order) if order is not None else list(bundle.attribution_order)
    ids = bundle.factor_ids
    if sorted(order) != sorted(ids):
        raise ConfigError("attribution order must be a permutation of the factor ids")
    base = whatif(bundle, np.zeros(len(ids)))
    if base.sr is None:
        raise DomainError("attribution undefined: base solvency ratio undefined")
    current = np.zeros(len(ids))
    step_srs: list[float] = []
    deltas: list[float] = []
    prev = base.sr
    for fid in order:
        current[ids.index(fid)] = eps[ids.index(fid)]
        snap = whatif(bundle, current.copy())
        if snap.sr is None:
            raise DomainError(f"attribution step '{fid}' leaves the ratio undefined")
        step_srs.append(snap.sr)
        deltas.append(snap.sr - prev)
        prev = snap.sr
    return AttributionResult(
        order=tuple(order),
        base_sr=base.sr,
        step_srs=tuple(step_srs),
        deltas=tuple(deltas),
        total_delta=prev - base.sr,
        bundle_version=bundle.version,
    )


# ---------------------------------------------------------------------------
# Embedded persistence
# ---------------------------------------------------------------------------


@dataclass
class IngestResult:
    inserted: int
    updated: int
    unchanged: int
    rejected: list[dict]

    @property
    def changed(self) -> bool:
        return bool(self.inserted or self.updated)


class MarketDataStore:
    """Upsert store for market observations keyed by (date, factor, field).

    Backed by one JSON file plus an append-only audit log of every batch.
    """

    def __init__(self, path: str):
        self.path = path
        self.audit_path = path + ".audit"
        self._rows: dict[tuple[str, str, str], float] = {}
        if os.path.exists(path):
            with open(path) as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self._rows[(rec["date"], rec["factor_id"], rec["field"])] = rec["value"]

    def __len__(self) -> int:
        return len(self._rows)

    def upsert(self, rows: Iterable[dict]) -> IngestResult:
        inserted = updated = unchanged = 0
        rejected: list[dict] = []
        for i, row in enumerate(rows):
            try:
                date = dt.date.fromisoformat(str(row["date"])).isoformat()
                fid = str(row["factor_id"])
                fld = str(row["field"])
                value = float(row["value"])
                if not fid or not (fld == "level" or fld.startswith("m:")):
                    raise ValueError(f"bad field {fld!r}")
                if not np.isfinite(value):
                    raise ValueError("value must be finite")
            except (KeyError, ValueError, TypeError) as exc:
                rejected.append({"row": i, "error": str(exc), "data": dict(row)})
                continue
            key = (date, fid, fld)
            if key not in self._rows:
                self._rows[key] = value
                inserted += 1
            elif self._rows[key] != value:
                self._rows[key] = value
                updated += 1
            else:
                unchanged += 1
        result = IngestResult(inserted, updated, unchanged, rejected)
        if result.changed:
            self._flush()
        self._append_audit(result)
        return result

    def _flush(self) -> None:
        with open(self.path, "w") as fh:
            for (date, fid, fld), value in sorted(self._rows.items()):
                fh.write(_canonical_json(
                    {"date": date, "factor_id": fid, "field": fld, "value": value}
                ) + "\n")

    def _append_audit(self, result: IngestResult) -> None:
        with open(self.audit_path, "a") as fh:
            fh.write(_canonical_json({
                "inserted": result.inserted,
                "updated": result.updated,
                "unchanged": result.unchanged,
                "rejected": len(result.rejected),
            }) + "\n")

    def dates(self) -> list[dt.date]:
        return sorted({dt.date.fromisoformat(d) for d, _, _ in self._rows})

    def to_history(self, frequency: str | None = None) -> IndexHistory:
        """Materialise the store as an index history (complete rows only)."""
        if not self._rows:
            raise DataError("market data store is empty")
        dates = self.dates()
        date_idx = {d.isoformat(): i for i, d in enumerate(dates)}
        levels: dict[str, np.ndarray] = {}
        curve_cells: dict[str, dict[tuple[int, int], float]] = {}
        for (date, fid, fld), value in self._rows.items():
            i = date_idx[date]
            if fld == "level":
                levels.setdefault(fid, np.full(len(dates), np.nan))[i] = value
            else:
                curve_cells.setdefault(fid, {})[(i, int(float(fld[2:])))] = value
        for fid, arr in levels.items():
            if np.any(np.isnan(arr)):
                missing = dates[int(np.flatnonzero(np.isnan(arr))[0])]
                raise DataError(f"factor '{fid}' missing on {missing.isoformat()}")
        curves: dict[str, np.ndarray] = {}
        for fid, cells in curve_cells.items():
            mats = sorted({m for _, m in cells})
            grid = np.full((len(dates), len(mats)), np.nan)
            for (i, m), value in cells.items():
                grid[i, mats.index(m)] = value
            if np.any(np.isnan(grid)):
                raise DataError(f"curve '{fid}' has missing maturities on some dates")
            curves[fid] = grid
        if frequency is None:
            gaps = [(b - a).days for a, b in zip(dates, dates[1:])]
            frequency = "daily" if (gaps and float(np.median(gaps)) <= 7.0) else "quarterly"
        return IndexHistory(dates=dates, levels=levels, curves=curves, frequency=frequency)


def ingest(store: MarketDataStore, rows: Iterable[dict]) -> IngestResult:
    """Idempotent upsert of market rows with per-row diagnostics."""
    return store.upsert(rows)


class RecordStore:
    """Append-only JSON-lines store of monitoring records for one bundle."""

    def __init__(self, path: str, bundle_version: str):
        self.path = path
        self.bundle_version = bundle_version
        self._records: list[dict] = []
        if os.path.exists(path):
            with open(path) as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        if rec.get("bundle_version") != bundle_version:
                            raise DataError(
                                f"record store {path} belongs to bundle "
                                f"{rec.get('bundle_version')!r}, not {bundle_version!r}"
                            )
                        self._records.append(rec)

    def __len__(self) -> int:
        return len(self._records)

    def dates(self) -> set[str]:
        return {r["date"] for r in self._records}

    def append(self, record: MonitoringRecord) -> None:
        if record.bundle_version != self.bundle_version:
            raise DataError("record bundle version does not match the store")
        data = record.to_dict()
        with open(self.path, "a") as fh:
            fh.write(_canonical_json(data) + "\n")
        self._records.append(data)

    def records(self) -> list[dict]:
        return sorted(self._records, key=lambda r: r["date"])

    def latest(self) -> dict | None:
        recs = self.records()
        return recs[-1] if recs else None

    def sr_series(self) -> tuple[list[str], list[float]]:
        recs = self.records()
        return [r["date"] for r in recs], [r["snapshot"]["sr"] for r in recs]

    def export_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump({"bundle_version": self.bundle_version, "records": self.records()}, fh, indent=1)
            fh.write("\n")
