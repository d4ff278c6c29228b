"""Run configuration: one structured JSON file drives every command.

The file bundles the factor definitions, market state, portfolio location,
calibration budgets, stress list, capital basis, frozen sub-modules,
correlation setup and monitoring options.  Scalar command-line flags
(seed, output directory) override the file.  A canonical hash of the
parsed content stamps every report for audit replay.

Schema (JSON, all sections optional unless noted):

    {
      "version": 1,
      "seed": 42,
      "output_dir": "out",
      "calibration_date": "2012-12-31",          # required
      "risk_factors": [                           # required
        {"id": "stock", "kind": "stock_level", "index_name": "..."},
        ...
      ],
      "alpha": 0.90,
      "history": {"file": "market.csv", "frequency": null, "window": null},
      "market": {"stock_level": 100.0, "flat_rate": 0.02, "maturities": 30,
                 "zero_curve": [...optional explicit prices...],
                 "sovereign_spread": 0.006, "corporate_spread": 0.013,
                 "stock_vol": 0.2, "rate_vol": 0.008, "mean_reversion": 0.15,
                 "equity_rate_correlation": 0.2, "illiquidity_premium": 0.005},
      "portfolio_file": "portfolio.json",         # required for calibration
      "alm": {"profit_share": 0.85, "fee_rate": 0.007, ...},
      "proxy": {"method": "lsmc", "n_primary": 5000, "p_secondary": 1,
                "degree_cap": 3, "horizon": 30, "control_variates": true,
                "cf": {"n_primary": 50, "p_secondary": 100}},
      "shocks": ["ir_up", "ir_down", "stock_global", "stock_other",
                 "spread", "illiquidity"],
      "validation": {"steps": 10, "p_full": 1000, "ir_display": "ir_down"},
      "capital_basis": {"tier_one_of": ..., ...},  # required for calibration
      "frozen_scr": {"property": {"value": 120.0},
                     "life": {"value": 400.0, "level": "top"}},
      "aggregation": {"ir_rule": "max", "market_ir_direction": "down",
                      "equity_inner_corr": 0.75},
      "compare": {"j_order": ["stock", "rates", ...], "n_cf": 50,
                  "p_cf": 100, "alpha_ci": 0.95},
      "monitor": {"smoothing_window": 10, "attribution_order": null}
    }

The portfolio file schema:

    {"version": 1,
     "model_points": [{"account_value": ..., "guaranteed_rate": ...,
                       "base_lapse_rate": ..., "age_bucket": "..."}],
     "assets": {"stock_global": ..., "stock_other": ..., "cash": ...,
                "bonds": [{"nominal": ..., "coupon": ..., "maturity": ...,
                           "kind": "sovereign"}]}}
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import os
from dataclasses import dataclass
from typing import Any

import numpy as np

from .alm import (
    AlmAssumptions,
    AssetPortfolio,
    Bond,
    LiabilityModelPoint,
    SHOCK_IDS,
    ShockSpec,
    standard_shocks,
)
from .esg import MarketState, flat_curve
from .errors import ConfigError, DataError
from .solvency import (
    AggregationConfig,
    CapitalBasis,
    FrozenEntry,
    market_correlation_matrix,
    top_correlation_matrix,
)
from .transitions import RiskFactorDef, RiskFactorKind, validate_defs

__all__ = ["RunConfig", "load_config", "load_portfolio", "config_hash"]

CONFIG_FORMAT = 1
PORTFOLIO_FORMAT = 1


def config_hash(raw: dict) -> str:
    return hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()[:16]


def load_portfolio(path: str) -> tuple[list[LiabilityModelPoint], AssetPortfolio]:
    if not os.path.exists(path):
        raise ConfigError(f"portfolio file not found: {path}")
    with open(path) as fh:
        data = json.load(fh)
    if data.get("version") != PORTFOLIO_FORMAT:
        raise DataError(f"{path}: unsupported portfolio version {data.get('version')!r}")
    try:
        liabs = [LiabilityModelPoint(**mp) for mp in data["model_points"]]
        assets_raw = dict(data["assets"])
        bonds = tuple(Bond(**b) for b in assets_raw.pop("bonds", []))
        assets = AssetPortfolio(bonds=bonds, **assets_raw)
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed portfolio: {exc}") from None
    if not liabs:
        raise DataError(f"{path}: at least one model point is required")
    return liabs, assets


@dataclass
class RunConfig:
    """Parsed configuration plus the audit hash of its raw content."""

    raw: dict
    hash: str
    base_dir: str
    seed: int
    output_dir: str
    calibration_date: dt.date
    defs: list[RiskFactorDef]
    alpha: float
    history_file: str | None
    history_frequency: str | None
    history_window: int | None
    market: MarketState
    portfolio_file: str | None
    assumptions: AlmAssumptions
    proxy_method: str
    control_variates: bool
    n_primary: int
    p_secondary: int
    degree_cap: int
    horizon: int
    cf_n_primary: int | None
    cf_p_secondary: int | None
    shocks: dict[str, ShockSpec]
    validation_steps: int
    validation_p_full: int
    validation_ir_display: str
    basis: CapitalBasis | None
    frozen: dict[str, FrozenEntry]
    aggregation: AggregationConfig
    compare_j_order: list[str]
    compare_n_cf: int
    compare_p_cf: int
    compare_n_lsmc: int | None
    compare_alpha_ci: float
    smoothing_window: int
    attribution_order: list[str] | None

    def resolve(self, path: str | None) -> str | None:
        if path is None or os.path.isabs(path):
            return path
        return os.path.join(self.base_dir, path)

    def require_portfolio(self) -> tuple[list[LiabilityModelPoint], AssetPortfolio]:
        if not self.portfolio_file:
            raise ConfigError("configuration lacks 'portfolio_file'")
        return load_portfolio(self.resolve(self.portfolio_file))


def _market_state(section: dict) -> MarketState:
    section = dict(section)
    if "zero_curve" in section:
        curve = np.asarray(section.pop("zero_curve"), dtype=float)
        section.pop("flat_rate", None)
        section.pop("maturities", None)
    elif "yields" in section:
        yields = np.asarray(section.pop("yields"), dtype=float)
        curve = np.exp(-yields * np.arange(1, yields.size + 1))
        section.pop("flat_rate", None)
        section.pop("maturities", None)
    else:
        curve = flat_curve(section.pop("flat_rate", 0.02), int(section.pop("maturities", 30)))
    try:
        return MarketState(zero_curve=curve, **section)
    except TypeError as exc:
        raise ConfigError(f"bad 'market' section: {exc}") from None


def _shock_specs(section: Any) -> dict[str, ShockSpec]:
    defaults = standard_shocks()
    if section is None:
        return defaults
    if isinstance(section, list):
        unknown = [s for s in section if s not in SHOCK_IDS]
        if unknown:
            raise ConfigError(f"unknown shock ids {unknown}, expected subset of {SHOCK_IDS}")
        return {sid: defaults[sid] for sid in section}
    if isinstance(section, dict):
        out = {}
        for sid, params in section.items():
            if sid not in SHOCK_IDS:
                raise ConfigError(f"unknown shock id {sid!r}")
            merged = {**defaults[sid].__dict__, **(params or {})}
            if "ir_stress" in merged and merged["ir_stress"]:
                merged["ir_stress"] = tuple(tuple(p) for p in merged["ir_stress"])
            out[sid] = ShockSpec(**merged)
        return out
    raise ConfigError("'shocks' must be a list of ids or a mapping of overrides")


def load_config(path: str, seed: int | None = None, output_dir: str | None = None) -> RunConfig:
    """Parse and validate a run configuration file."""
    if not os.path.exists(path):
        raise ConfigError(f"configuration file not found: {path}")
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if raw.get("version") != CONFIG_FORMAT:
        raise ConfigError(f"{path}: unsupported config version {raw.get('version')!r}")

    try:
        defs = [
            RiskFactorDef(d["id"], RiskFactorKind(d["kind"]), d.get("index_name", ""))
            for d in raw["risk_factors"]
        ]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: bad 'risk_factors': {exc}") from None
    validate_defs(defs)
    if "calibration_date" not in raw:
        raise ConfigError(f"{path}: 'calibration_date' is required")
    calibration_date = dt.date.fromisoformat(raw["calibration_date"])

    history = raw.get("history") or {}
    proxy = raw.get("proxy") or {}
    cf = proxy.get("cf") or {}
    validation = raw.get("validation") or {}
    compare = raw.get("compare") or {}
    monitor = raw.get("monitor") or {}
    agg_raw = raw.get("aggregation") or {}

    basis = None
    if raw.get("capital_basis"):
        try:
            basis = CapitalBasis(**raw["capital_basis"])
        except TypeError as exc:
            raise ConfigError(f"{path}: bad 'capital_basis': {exc}") from None

    frozen = {}
    for key, entry in (raw.get("frozen_scr") or {}).items():
        try:
            frozen[key] = FrozenEntry(**entry)
        except TypeError as exc:
            raise ConfigError(f"{path}: bad frozen entry '{key}': {exc}") from None

    aggregation = AggregationConfig(
        market_corr=np.asarray(
            agg_raw.get("market_corr")
            or market_correlation_matrix(agg_raw.get("market_ir_direction", "down")),
            dtype=float,
        ),
        top_corr=np.asarray(agg_raw.get("top_corr") or top_correlation_matrix(), dtype=float),
        market_order=tuple(agg_raw.get("market_order") or AggregationConfig().market_order),
        top_order=tuple(agg_raw.get("top_order") or AggregationConfig().top_order),
        equity_inner_corr=float(agg_raw.get("equity_inner_corr", 0.75)),
        ir_rule=agg_raw.get("ir_rule", "max"),
    )

    try:
        assumptions = AlmAssumptions(**{
            **(raw.get("alm") or {}),
            **({"lapse_knots": tuple(raw["alm"]["lapse_knots"])}
               if raw.get("alm", {}).get("lapse_knots") else {}),
        })
    except TypeError as exc:
        raise ConfigError(f"{path}: bad 'alm' section: {exc}") from None

    n_primary = int(proxy.get("n_primary", 5000))
    p_secondary = int(proxy.get("p_secondary", 1))
    if n_primary < 1 or p_secondary < 1:
        raise ConfigError("'proxy.n_primary' and 'proxy.p_secondary' must be >= 1")

    cfg = RunConfig(
        raw=raw,
        hash=config_hash(raw),
        base_dir=os.path.dirname(os.path.abspath(path)),
        seed=int(raw.get("seed", 0)) if seed is None else seed,
        output_dir=output_dir or raw.get("output_dir", "out"),
        calibration_date=calibration_date,
        defs=defs,
        alpha=float(raw.get("alpha", 0.90)),
        history_file=history.get("file"),
        history_frequency=history.get("frequency"),
        history_window=history.get("window"),
        market=_market_state(raw.get("market") or {"stock_level": 100.0}),
        portfolio_file=raw.get("portfolio_file"),
        assumptions=assumptions,
        proxy_method=proxy.get("method", "lsmc").lower(),
        control_variates=bool(proxy.get("control_variates", True)),
        n_primary=n_primary,
        p_secondary=p_secondary,
        degree_cap=int(proxy.get("degree_cap", 3)),
        horizon=int(proxy.get("horizon", 30)),
        cf_n_primary=int(cf["n_primary"]) if "n_primary" in cf else None,
        cf_p_secondary=int(cf["p_secondary"]) if "p_secondary" in cf else None,
        shocks=_shock_specs(raw.get("shocks")),
        validation_steps=int(validation.get("steps", 10)),
        validation_p_full=int(validation.get("p_full", 1000)),
        validation_ir_display=validation.get("ir_display", "ir_down"),
        basis=basis,
        frozen=frozen,
        aggregation=aggregation,
        compare_j_order=list(compare.get("j_order") or [d.id for d in defs]),
        compare_n_cf=int(compare.get("n_cf", 50)),
        compare_p_cf=int(compare.get("p_cf", 100)),
        compare_n_lsmc=int(compare["n_lsmc"]) if "n_lsmc" in compare else None,
        compare_alpha_ci=float(compare.get("alpha_ci", 0.95)),
        smoothing_window=int(monitor.get("smoothing_window", 10)),
        attribution_order=monitor.get("attribution_order"),
    )
    if not 0.0 < cfg.alpha <= 1.0:
        raise ConfigError("'alpha' must lie in (0, 1]")
    if cfg.proxy_method not in ("lsmc", "cf"):
        raise ConfigError(f"unknown proxy method {cfg.proxy_method!r}")
    unknown_factors = [f for f in cfg.compare_j_order if f not in [d.id for d in defs]]
    if unknown_factors:
        raise ConfigError(f"'compare.j_order' names unknown factors {unknown_factors}")
    return cfg
