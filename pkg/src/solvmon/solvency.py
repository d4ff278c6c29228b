"""Standard-formula capital assembly.

Marginal capital charges are net-asset-value drops under prescribed
stresses, floored at zero.  They aggregate in two levels: monitored market
sub-modules (plus frozen market entries) combine under the market
correlation matrix; the resulting market charge then combines with the
frozen top-level modules under the top correlation matrix to give the
basic capital requirement.  A deferred-tax chain turns the approximate
central NAV into own funds and the solvency ratio.

Currency arithmetic in the tax chain runs on decimals quantized at a
configurable precision (cents by default) so that chain results are
exactly reproducible across runs and platforms.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "MARKET_SUBMODULES",
    "TOP_MODULES",
    "market_correlation_matrix",
    "top_correlation_matrix",
    "FrozenEntry",
    "MarginalScrSet",
    "CapitalBasis",
    "SolvencySnapshot",
    "AggregationConfig",
    "BscrBreakdown",
    "marginal_scr",
    "equity_submodule_scr",
    "market_scr_values",
    "aggregate",
    "aggregate_bscr",
    "vif_approx",
    "solvency_chain",
    "update_frozen",
]

logger = logging.getLogger(__name__)

MARKET_SUBMODULES = (
    "interest_rate", "equity", "property", "spread", "currency", "concentration", "illiquidity",
)
TOP_MODULES = ("market", "counterparty", "life", "health", "nonlife")


def market_correlation_matrix(ir_direction: str = "down") -> np.ndarray:
    a = 0.5 if ir_direction == "down" else 0.0
    #          IR    EQ    PROP  SPR   CCY   CONC  ILLIQ
    return np.array([
        [1.00, a,    a,    a,    0.25, 0.00, 0.00],
        [a,    1.00, 0.75, 0.75, 0.25, 0.00, 0.00],
        [a,    0.75, 1.00, 0.50, 0.25, 0.00, 0.00],
        [a,    0.75, 0.50, 1.00, 0.25, 0.00, -0.50],
        [0.25, 0.25, 0.25, 0.25, 1.00, 0.00, 0.00],
        [0.00, 0.00, 0.00, 0.00, 0.00, 1.00, 0.00],
        [0.00, 0.00, 0.00, -0.50, 0.00, 0.00, 1.00],
    ])


def top_correlation_matrix() -> np.ndarray:
    #          MKT   DEF   LIFE  HLTH  NL
    return np.array([
        [1.00, 0.25, 0.25, 0.25, 0.25],
        [0.25, 1.00, 0.25, 0.25, 0.50],
        [0.25, 0.25, 1.00, 0.25, 0.00],
        [0.25, 0.25, 0.25, 1.00, 0.00],
        [0.25, 0.50, 0.00, 0.00, 1.00],
    ])


@dataclass(frozen=True)
class AggregationConfig:
    """Correlation structure and assembly rules for the capital aggregation."""

    market_order: tuple[str, ...] = MARKET_SUBMODULES
    market_corr: np.ndarray = field(default_factory=market_correlation_matrix)
    top_order: tuple[str, ...] = TOP_MODULES
    top_corr: np.ndarray = field(default_factory=top_correlation_matrix)
    equity_inner_corr: float = 0.75  # between the two equity buckets
    ir_rule: str = "max"  # combine up/down charges: "max", "up" or "down"

    def __post_init__(self) -> None:
        _check_correlation(self.market_corr, len(self.market_order), "market")
        _check_correlation(self.top_corr, len(self.top_order), "top-level")
        if self.top_order[0] != "market":
            raise ConfigError("the first top-level module must be 'market'")
        if self.ir_rule not in ("max", "up", "down"):
            raise ConfigError(f"unknown interest-rate rule {self.ir_rule!r}")


def _check_correlation(corr: np.ndarray, dim: int, label: str) -> None:
    corr = np.asarray(corr, dtype=float)
    if corr.shape != (dim, dim):
        raise ConfigError(f"{label} correlation must be {dim}x{dim}, got {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ConfigError(f"{label} correlation must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise ConfigError(f"{label} correlation must have a unit diagonal")
    if np.any(np.abs(corr) > 1.0 + 1e-12):
        raise ConfigError(f"{label} correlation entries must lie in [-1, 1]")


@dataclass(frozen=True)
class FrozenEntry:
    """Sub-module charge that is not recomputed at each monitoring date."""

    value: float
    rule: str = "frozen"  # "frozen" | "proportional"
    measure_key: str | None = None  # volume measure driving proportional updates
    level: str = "market"  # "market" | "top"

    def __post_init__(self) -> None:
        if self.value < 0.0:
            raise DomainError("sub-module charges must be >= 0")
        if self.rule not in ("frozen", "proportional"):
            raise ConfigError(f"unknown update rule {self.rule!r}")
        if self.rule == "proportional" and not self.measure_key:
            raise ConfigError("proportional entries need a volume measure key")
        if self.level not in ("market", "top"):
            raise ConfigError(f"unknown aggregation level {self.level!r}")


@dataclass(frozen=True)
class MarginalScrSet:
    """Monitored market charges plus frozen/proportional companions."""

    monitored: dict[str, float]
    frozen: dict[str, FrozenEntry] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for key, value in self.monitored.items():
            if value < 0.0:
                raise DomainError(f"monitored charge '{key}' must be >= 0, got {value}")


@dataclass(frozen=True)
class CapitalBasis:
    """Calibration-date capital quantities frozen through the monitoring period."""

    tier_one_of: float
    subordinated_debt: float = 0.0
    fin_mgmt_fees: float = 0.0
    itr_nb: float = 0.0
    scr_op_0: float = 0.0
    tax_rate: float = 0.3443
    money_places: int = 2

    def __post_init__(self) -> None:
        if not 0.0 <= self.tax_rate < 1.0:
            raise DomainError(f"tax rate must lie in [0, 1), got {self.tax_rate}")
        if self.money_places < 0:
            raise DomainError("money_places must be >= 0")


@dataclass(frozen=True)
class SolvencySnapshot:
    """One date's approximate capital position."""

    nav_central: float
    vif: float
    dtl: float
    adj: float
    bscr: float
    scr: float
    own_funds: float
    sr: float | None
    marginals: MarginalScrSet | None = None
    date: dt.date | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "nav_central": self.nav_central,
            "vif": self.vif,
            "dtl": self.dtl,
            "adj": self.adj,
            "bscr": self.bscr,
            "scr": self.scr,
            "own_funds": self.own_funds,
            "sr": self.sr,
            "marginals": None if self.marginals is None else {
                "monitored": dict(self.marginals.monitored),
                "frozen": {k: e.value for k, e in self.marginals.frozen.items()},
            },
            "date": None if self.date is None else self.date.isoformat(),
            "flags": list(self.flags),
        }


# ---------------------------------------------------------------------------
# Marginal charges
# ---------------------------------------------------------------------------


def marginal_scr(nav_central: float, nav_shocked: float) -> float:
    """NAV drop under a stress, floored at zero."""
    drop = nav_central - nav_shocked
    if drop < 0.0:
        # routine for the favorable stress direction; the max rule in the
        # aggregation exists precisely because one side usually helps
        logger.debug(
            "shocked NAV %.4f above central %.4f; charge floored at 0", nav_shocked, nav_central
        )
        return 0.0
    return drop


def equity_submodule_scr(global_charge: float, other_charge: float, corr: float = 0.75) -> float:
    """Two-bucket equity aggregation sqrt(g^2 + o^2 + 2 rho g o)."""
    if global_charge < 0.0 or other_charge < 0.0:
        raise DomainError("equity charges must be >= 0")
    return float(np.sqrt(
        global_charge**2 + other_charge**2 + 2.0 * corr * global_charge * other_charge
    ))


def market_scr_values(
    nav_central: float,
    shocked_navs: Mapping[str, float],
    config: AggregationConfig,
) -> dict[str, float]:
    """Monitored market sub-module charges from central and shocked NAVs.

    ``shocked_navs`` is keyed by stress id (ir_up / ir_down / stock_global /
    stock_other / spread / illiquidity); the interest-rate charge follows
    the configured direction rule and the two equity buckets aggregate into
    one equity sub-module.
    """
    out: dict[str, float] = {}
    up = marginal_scr(nav_central, shocked_navs["ir_up"]) if "ir_up" in shocked_navs else None
    down = marginal_scr(nav_central, shocked_navs["ir_down"]) if "ir_down" in shocked_navs else None
    if up is not None or down is not None:
        if config.ir_rule == "up":
            chosen = up
        elif config.ir_rule == "down":
            chosen = down
        else:
            chosen = max(v for v in (up, down) if v is not None)
        if chosen is None:
            raise ConfigError(f"interest-rate rule '{config.ir_rule}' lacks its shocked NAV")
        out["interest_rate"] = chosen
    if "stock_global" in shocked_navs or "stock_other" in shocked_navs:
        g = marginal_scr(nav_central, shocked_navs.get("stock_global", nav_central))
        o = marginal_scr(nav_central, shocked_navs.get("stock_other", nav_central))
        out["equity"] = equity_submodule_scr(g, o, config.equity_inner_corr)
    if "spread" in shocked_navs:
        out["spread"] = marginal_scr(nav_central, shocked_navs["spread"])
    if "illiquidity" in shocked_navs:
        out["illiquidity"] = marginal_scr(nav_central, shocked_navs["illiquidity"])
    return out


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def aggregate(values: np.ndarray, correlation: np.ndarray) -> float:
    """Square-root correlation aggregation sqrt(s' C s)."""
    values = np.asarray(values, dtype=float)
    _check_correlation(correlation, values.shape[0], "aggregation")
    quad = float(values @ correlation @ values)
    if quad < 0.0:
        if quad < -1e-9 * max(1.0, float(values @ values)):
            raise DomainError(f"correlation matrix produced a negative quadratic form {quad:.3e}")
        quad = 0.0
    return float(np.sqrt(quad))


@dataclass(frozen=True)
class BscrBreakdown:
    market_vector: dict[str, float]
    market_scr: float
    top_vector: dict[str, float]
    bscr: float


def aggregate_bscr(marginals: MarginalScrSet, config: AggregationConfig) -> BscrBreakdown:
    """Two-level aggregation: market sub-modules, then top-level modules."""
    market_vec = {}
    for name in config.market_order:
        value = marginals.monitored.get(name, 0.0)
        entry = marginals.frozen.get(name)
        if entry is not None and entry.level == "market":
            if name in marginals.monitored:
                raise ConfigError(f"sub-module '{name}' is both monitored and frozen")
            value = entry.value
        market_vec[name] = value
    unknown = set(marginals.monitored) - set(config.market_order)
    if unknown:
        raise ConfigError(f"monitored sub-modules {sorted(unknown)} missing from the market order")
    market_scr = aggregate(np.array(list(market_vec.values())), config.market_corr)

    top_vec = {"market": market_scr}
    for name in config.top_order[1:]:
        entry = marginals.frozen.get(name)
        if entry is not None and entry.level != "top":
            raise ConfigError(f"frozen entry '{name}' should be level='top'")
        top_vec[name] = entry.value if entry is not None else 0.0
    stray = {
        k for k, e in marginals.frozen.items()
        if (e.level == "top" and k not in config.top_order)
        or (e.level == "market" and k not in config.market_order)
    }
    if stray:
        raise ConfigError(f"frozen entries {sorted(stray)} missing from the aggregation orders")
    bscr = aggregate(np.array(list(top_vec.values())), config.top_corr)
    return BscrBreakdown(
        market_vector=market_vec, market_scr=market_scr, top_vector=top_vec, bscr=bscr
    )


def update_frozen(
    marginals: MarginalScrSet,
    volume_measures: Mapping[str, tuple[float, float]] | None = None,
) -> MarginalScrSet:
    """Scale proportional entries by their volume-measure ratio.

    ``volume_measures`` maps measure key to (base value, current value);
    frozen entries pass through unchanged.
    """
    volume_measures = volume_measures or {}
    updated: dict[str, FrozenEntry] = {}
    for key, entry in marginals.frozen.items():
        if entry.rule == "frozen":
            updated[key] = entry
            continue
        if entry.measure_key not in volume_measures:
            raise ConfigError(
                f"proportional entry '{key}' needs volume measure '{entry.measure_key}'"
            )
        base, current = volume_measures[entry.measure_key]
        if base <= 0.0:
            raise ConfigError(f"volume measure '{entry.measure_key}' has non-positive base {base}")
        updated[key] = replace(entry, value=entry.value * current / base)
    return MarginalScrSet(monitored=dict(marginals.monitored), frozen=updated)


# ---------------------------------------------------------------------------
# Tax chain
# ---------------------------------------------------------------------------


def _money(value: float | Decimal, places: int) -> Decimal:
    quantum = Decimal(1).scaleb(-places)
    return Decimal(repr(value) if isinstance(value, float) else value).quantize(
        quantum, rounding=ROUND_HALF_UP
    )


def vif_approx(nav_central: float, basis: CapitalBasis) -> float:
    """Value of in-force: central NAV minus the frozen capital block."""
    places = basis.money_places
    frozen_block = _money(basis.tier_one_of, places) + _money(basis.subordinated_debt, places) \
        - _money(basis.fin_mgmt_fees, places)
    return float(_money(nav_central, places) - frozen_block)


def solvency_chain(
    nav_central: float,
    basis: CapitalBasis,
    bscr: float,
    marginals: MarginalScrSet | None = None,
    date: dt.date | None = None,
) -> SolvencySnapshot:
    """Deferred-tax chain from central NAV and BSCR to the solvency ratio.

    All currency steps are quantized at the configured precision.  A
    non-positive overall capital requirement leaves the ratio undefined and
    flags the snapshot instead of raising, so monitoring keeps running.
    """
    places = basis.money_places
    tax = Decimal(repr(basis.tax_rate))
    flags: list[str] = []

    vif = _money(vif_approx(nav_central, basis), places)
    if vif < 0:
        flags.append("negative_vif")
    dtl = _money(vif * tax, places)
    adj = _money(basis.itr_nb, places) + dtl
    scr = _money(bscr, places) + _money(basis.scr_op_0, places) - adj
    frozen_block = _money(basis.tier_one_of, places) + _money(basis.subordinated_debt, places) \
        - _money(basis.fin_mgmt_fees, places)
    own_funds = frozen_block + _money(vif * (Decimal(1) - tax), places)
    if scr > 0:
        sr: float | None = float(own_funds / scr)
    else:
        sr = None
        flags.append("scr_not_positive")
    return SolvencySnapshot(
        nav_central=float(_money(nav_central, places)),
        vif=float(vif),
        dtl=float(dtl),
        adj=float(adj),
        bscr=float(_money(bscr, places)),
        scr=float(scr),
        own_funds=float(own_funds),
        sr=sr,
        marginals=marginals,
        date=date,
        flags=tuple(flags),
    )
