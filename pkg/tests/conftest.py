"""Shared fixtures: a four-factor configuration and a small desk portfolio."""

import datetime as dt

import numpy as np
import pytest

from solvmon.alm import AlmAssumptions, AssetPortfolio, Bond, LiabilityModelPoint
from solvmon.esg import MarketState
from solvmon.monitor import CalibrationBundle
from solvmon.proxy import calibrate_cf, candidate_regressors
from solvmon.solvency import AggregationConfig, CapitalBasis, FrozenEntry
from solvmon.transitions import ProbableSpace, RiskFactorDef, RiskFactorKind


@pytest.fixture(scope="session")
def defs4():
    return [
        RiskFactorDef("stock", RiskFactorKind.STOCK_LEVEL, "EUROSTOXX50"),
        RiskFactorDef("rates", RiskFactorKind.RATE_LEVEL, "EUR swap curve"),
        RiskFactorDef("spread_corp", RiskFactorKind.SPREAD_CORPORATE, "iTraxx 10Y"),
        RiskFactorDef("spread_sov", RiskFactorKind.SPREAD_SOVEREIGN, "sovereign-vs-swap"),
    ]


@pytest.fixture(scope="session")
def market():
    m = np.arange(1, 31)
    yields = 0.012 + 0.018 * (1.0 - np.exp(-m / 9.0))
    return MarketState(
        stock_level=100.0,
        zero_curve=np.exp(-yields * m),
        sovereign_spread=0.006,
        corporate_spread=0.013,
        stock_vol=0.20,
        rate_vol=0.008,
        mean_reversion=0.15,
        equity_rate_correlation=0.2,
        illiquidity_premium=0.005,
    )


@pytest.fixture(scope="session")
def portfolio():
    bonds = tuple(
        Bond(nominal=nom, coupon=cpn, maturity=mat, kind=kind)
        for nom, cpn, mat, kind in [
            (900.0, 0.030, 3, "sovereign"),
            (900.0, 0.035, 6, "sovereign"),
            (900.0, 0.040, 10, "sovereign"),
            (700.0, 0.045, 15, "sovereign"),
            (800.0, 0.040, 5, "corporate"),
            (800.0, 0.045, 8, "corporate"),
            (600.0, 0.050, 12, "corporate"),
        ]
    )
    return AssetPortfolio(stock_global=1400.0, stock_other=400.0, bonds=bonds, cash=900.0)


@pytest.fixture(scope="session")
def liabilities():
    return [
        LiabilityModelPoint(account_value=2600.0, guaranteed_rate=0.000, base_lapse_rate=0.05, age_bucket="young"),
        LiabilityModelPoint(account_value=2300.0, guaranteed_rate=0.010, base_lapse_rate=0.04, age_bucket="mid"),
        LiabilityModelPoint(account_value=1500.0, guaranteed_rate=0.025, base_lapse_rate=0.03, age_bucket="senior"),
    ]


@pytest.fixture(scope="session")
def assumptions():
    return AlmAssumptions()


@pytest.fixture(scope="session")
def space4():
    return ProbableSpace(
        factor_ids=("stock", "rates", "spread_corp", "spread_sov"),
        lo=np.array([-0.35, -0.012, -0.006, -0.004]),
        hi=np.array([0.30, 0.012, 0.008, 0.006]),
        alpha=0.90,
    )


def synthetic_nav_functions():
    """Smooth NAV maps used to build fast, exactly-known proxies."""

    def central(eps):
        s, r, c, v = eps[:, 0], eps[:, 1], eps[:, 2], eps[:, 3]
        return (3000.0 + 1800.0 * s + 9000.0 * r - 6000.0 * c - 4500.0 * v
                - 900.0 * s**2 + 400.0 * s * r + 2500.0 * r**2)

    drops = {
        "ir_up": 60.0, "ir_down": 160.0, "stock_global": 600.0,
        "stock_other": 210.0, "spread": 90.0, "illiquidity": 290.0,
    }

    def shocked(sid):
        def fn(eps):
            s, r = eps[:, 0], eps[:, 1]
            return central(eps) - drops[sid] * (1.0 + 0.25 * s - 0.8 * r)
        return fn

    return central, shocked


def write_market_csv(path, factor_specs, quarters=61, seed=12, start=dt.date(1998, 1, 5)):
    """Synthetic quarterly index history covering the requested factors.

    ``factor_specs`` maps factor id to kind string; curve factors get a
    10-maturity zero-coupon snapshot per date.
    """
    rng = np.random.default_rng(seed)
    dates = [start + dt.timedelta(days=91 * i) for i in range(quarters)]
    lines = ["date,factor_id,field,value"]
    m = np.arange(1, 11)
    for fid, kind in factor_specs.items():
        if kind == "stock_level":
            levels = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(rng.normal(0.01, 0.09, quarters - 1))]))
            for d, v in zip(dates, levels):
                lines.append(f"{d.isoformat()},{fid},level,{float(v)!r}")
        elif kind == "rate_level":
            yields = 0.025 + np.concatenate([[0.0], np.cumsum(rng.normal(0.0, 0.004, quarters - 1))])
            yields = np.clip(yields, 0.002, 0.08)
            for d, y in zip(dates, yields):
                for mat in m:
                    lines.append(f"{d.isoformat()},{fid},m:{mat},{float(np.exp(-y * mat))!r}")
        else:  # spread-like factors: mean-reverting additive series
            level = 0.010 if "corp" in fid else 0.006
            series = [level]
            for _ in range(quarters - 1):
                series.append(max(0.0, series[-1] + rng.normal(0, 0.0012) - 0.1 * (series[-1] - level)))
            for d, v in zip(dates, series):
                lines.append(f"{d.isoformat()},{fid},level,{float(v)!r}")
    path.write_text("\n".join(lines) + "\n")


def write_portfolio_json(path, scale=1.0):
    portfolio = {
        "version": 1,
        "model_points": [
            {"account_value": 2600.0 * scale, "guaranteed_rate": 0.005,
             "base_lapse_rate": 0.05, "age_bucket": "young"},
            {"account_value": 2300.0 * scale, "guaranteed_rate": 0.0175,
             "base_lapse_rate": 0.04, "age_bucket": "mid"},
            {"account_value": 1500.0 * scale, "guaranteed_rate": 0.03,
             "base_lapse_rate": 0.03, "age_bucket": "senior"},
        ],
        "assets": {
            "stock_global": 700.0 * scale,
            "stock_other": 200.0 * scale,
            "cash": 900.0 * scale,
            "bonds": [
                {"nominal": 1100.0 * scale, "coupon": 0.030, "maturity": 3, "kind": "sovereign"},
                {"nominal": 1100.0 * scale, "coupon": 0.035, "maturity": 6, "kind": "sovereign"},
                {"nominal": 1100.0 * scale, "coupon": 0.040, "maturity": 10, "kind": "sovereign"},
                {"nominal": 900.0 * scale, "coupon": 0.045, "maturity": 15, "kind": "sovereign"},
                {"nominal": 1000.0 * scale, "coupon": 0.040, "maturity": 5, "kind": "corporate"},
                {"nominal": 1000.0 * scale, "coupon": 0.045, "maturity": 8, "kind": "corporate"},
                {"nominal": 800.0 * scale, "coupon": 0.050, "maturity": 12, "kind": "corporate"},
            ],
        },
    }
    import json

    path.write_text(json.dumps(portfolio, indent=1) + "\n")


FOUR_FACTORS = {
    "stock": "stock_level",
    "rates": "rate_level",
    "spread_corp": "spread_corporate",
    "spread_sov": "spread_sovereign",
}


def write_workspace(tmp_path, factors=FOUR_FACTORS, n_primary=600, p_secondary=1,
                    horizon=12, p_full=300, cf=None, compare=None, shocks=None,
                    seed=42, extra=None):
    """Write a complete toy run directory: config, portfolio, market data."""
    import json

    write_market_csv(tmp_path / "market.csv", factors)
    write_portfolio_json(tmp_path / "portfolio.json")
    config = {
        "version": 1,
        "seed": seed,
        "output_dir": str(tmp_path / "out"),
        "calibration_date": "2012-12-31",
        "risk_factors": [
            {"id": fid, "kind": kind, "index_name": fid.upper()} for fid, kind in factors.items()
        ],
        "alpha": 0.90,
        "history": {"file": "market.csv", "frequency": "quarterly"},
        "market": {
            "stock_level": 100.0,
            "yields": (0.012 + 0.018 * (1.0 - np.exp(-np.arange(1, 31) / 9.0))).tolist(),
            "sovereign_spread": 0.006,
            "corporate_spread": 0.013,
            "stock_vol": 0.20,
            "rate_vol": 0.008,
            "mean_reversion": 0.15,
            "equity_rate_correlation": 0.2,
            "illiquidity_premium": 0.005,
        },
        "portfolio_file": "portfolio.json",
        "proxy": {
            "method": "lsmc", "n_primary": n_primary, "p_secondary": p_secondary,
            "degree_cap": 3, "horizon": horizon,
            **({"cf": cf} if cf else {}),
        },
        **({"shocks": shocks} if shocks is not None else {}),
        "validation": {"steps": 10, "p_full": p_full, "ir_display": "ir_down"},
        "capital_basis": {
            "tier_one_of": 3300.0, "subordinated_debt": 300.0, "fin_mgmt_fees": 80.0,
            "itr_nb": 40.0, "scr_op_0": 180.0,
        },
        "frozen_scr": {
            "property": {"value": 220.0},
            "concentration": {"value": 90.0},
            "currency": {"value": 40.0},
            "counterparty": {"value": 200.0, "level": "top"},
            "life": {"value": 700.0, "level": "top"},
        },
        **({"compare": compare} if compare else {}),
        "monitor": {"smoothing_window": 10},
    }
    if extra:
        config.update(extra)
    (tmp_path / "config.json").write_text(json.dumps(config, indent=1) + "\n")
    return tmp_path / "config.json"


@pytest.fixture(scope="session")
def small_bundle(defs4, space4):
    """Bundle over exactly-fitted synthetic proxies; fast to evaluate."""
    rng = np.random.default_rng(99)
    eps = rng.uniform(space4.lo, space4.hi, (150, 4))
    monos = candidate_regressors(4, 2)
    central_fn, shocked_fn = synthetic_nav_functions()

    def response(fn):
        return lambda t, p, s: np.tile(fn(t)[:, None], (1, p))

    central = calibrate_cf(eps, 1, response(central_fn), monos, seed=0)
    shocked = {
        sid: calibrate_cf(eps, 1, response(shocked_fn(sid)), monos, seed=0, shock_id=sid)
        for sid in ("ir_up", "ir_down", "stock_global", "stock_other", "spread", "illiquidity")
    }
    return CalibrationBundle(
        defs=list(defs4),
        space=space4,
        central=central,
        shocked=shocked,
        calibration_observations={
            "stock": 100.0,
            "rates": np.exp(-0.02 * np.arange(1, 21)).tolist(),
            "spread_corp": 0.013,
            "spread_sov": 0.006,
        },
        basis=CapitalBasis(tier_one_of=2000.0, subordinated_debt=300.0, fin_mgmt_fees=80.0,
                           itr_nb=40.0, scr_op_0=180.0),
        frozen={
            "property": FrozenEntry(120.0),
            "concentration": FrozenEntry(60.0),
            "currency": FrozenEntry(30.0),
            "counterparty": FrozenEntry(150.0, level="top"),
            "life": FrozenEntry(400.0, level="top"),
        },
        aggregation=AggregationConfig(),
        calibration_date=dt.date(2012, 12, 31),
        config_hash="fixture",
    )
