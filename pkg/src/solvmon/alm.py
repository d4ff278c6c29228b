"""Stylized participating-savings projection engine.

Projects a closed asset/liability portfolio year by year along simulated
paths: assets earn cash interest, bond total return (valued on the
prevailing model term structure plus issuer spread) and stock total return;
policyholders are credited the larger of their guaranteed rate and a
contractual share of the realized book income (interest, coupons,
dividends), net of a management fee;
lapses combine a base rate with a piecewise-linear add-on driven by the gap
between the credited rate and a market-driven target rate (the prevailing
10-year reference yield); shareholders receive the yearly margin, and the
residual surplus is released when the book is wound up at the horizon.

Shareholder profit accounting is self-financing: each year

    profit = asset income - credited amount + fees,

which pins the conservation identity (credited + profit = income) used by
the balance-sheet closure tests.  The net present value of a path adds an
illiquidity "own-use" adjustment that values policyholder payouts at the
risk-free curve plus the illiquidity premium.

All projection functions are pure; the vectorised kernel operates on
stacked (rows, years) arrays so whole scenario tables project in one call.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import esg
from .errors import ConfigError, DataError, DomainError
from .esg import MarketState, ScenarioPath, ScenarioTable
from .transitions import RiskFactorDef, as_vector

__all__ = [
    "LiabilityModelPoint",
    "Bond",
    "AssetPortfolio",
    "AlmAssumptions",
    "ShockSpec",
    "NpvSample",
    "standard_shocks",
    "project",
    "npv",
    "project_table",
    "npv_table",
    "nav_estimate",
    "batch_nav",
    "apply_sf_shock",
    "shock_market_state",
    "shock_assets",
    "discounted_profits",
]

logger = logging.getLogger(__name__)

ISSUER_KINDS = ("sovereign", "corporate")

SHOCK_IDS = ("ir_up", "ir_down", "stock_global", "stock_other", "spread", "illiquidity")


@dataclass(frozen=True)
class LiabilityModelPoint:
    """Aggregated representative contract of the savings book."""

    account_value: float
    guaranteed_rate: float = 0.0
    base_lapse_rate: float = 0.05
    age_bucket: str = ""

    def __post_init__(self) -> None:
        if self.account_value < 0.0:
            raise DomainError("account value must be >= 0")
        if self.guaranteed_rate < 0.0:
            raise DomainError("guaranteed rate must be >= 0")
        if not 0.0 <= self.base_lapse_rate <= 1.0:
            raise DomainError("base lapse rate must lie in [0, 1]")


@dataclass(frozen=True)
class Bond:
    nominal: float
    coupon: float
    maturity: int  # integer years from the calibration date
    kind: str = "sovereign"

    def __post_init__(self) -> None:
        if self.nominal < 0.0:
            raise DomainError("bond nominal must be >= 0")
        if self.maturity < 1:
            raise DomainError("bond maturity must be >= 1 year")
        if self.kind not in ISSUER_KINDS:
            raise ConfigError(f"bond kind must be one of {ISSUER_KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class AssetPortfolio:
    """Asset side: two stock buckets, a bond ladder and a cash account."""

    stock_global: float
    stock_other: float
    bonds: tuple[Bond, ...]
    cash: float = 0.0

    def __post_init__(self) -> None:
        if self.stock_global < 0.0 or self.stock_other < 0.0:
            raise DomainError("stock pool values must be >= 0")
        object.__setattr__(self, "bonds", tuple(self.bonds))

    @property
    def stock_pool(self) -> float:
        return self.stock_global + self.stock_other


@dataclass(frozen=True)
class AlmAssumptions:
    """Crediting, fee and policyholder-behaviour parameters.

    Crediting is driven by *book-style* income (cash interest, coupons and
    dividends), so unrealized market moves accrue to the shareholder;
    valuation stays market-consistent because profits absorb the full
    economic income.
    """

    profit_share: float = 0.85
    fee_rate: float = 0.007
    dividend_yield: float = 0.03
    # share of the issuer spread charged as expected annual credit loss on
    # the bond book (the rest is carry earned for bearing illiquidity)
    credit_loss_share: float = 0.5
    # piecewise-linear lapse add-on against (credited - target) rate gap,
    # flat at lapse_up below the first knot and at lapse_down above the last
    lapse_knots: tuple[float, float, float, float] = (-0.04, -0.02, 0.01, 0.03)
    lapse_up: float = 0.30
    lapse_down: float = -0.05
    target_rate_floor: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.profit_share <= 1.0:
            raise DomainError("profit share must lie in [0, 1]")
        if self.fee_rate < 0.0:
            raise DomainError("fee rate must be >= 0")
        if not 0.0 <= self.dividend_yield < 1.0:
            raise DomainError("dividend yield must lie in [0, 1)")
        if not 0.0 <= self.credit_loss_share <= 1.0:
            raise DomainError("credit loss share must lie in [0, 1]")
        if list(self.lapse_knots) != sorted(self.lapse_knots):
            raise ConfigError("lapse knots must be non-decreasing")

    def lapse_addon(self, gap: np.ndarray) -> np.ndarray:
        k1, k2, k3, k4 = self.lapse_knots
        return np.interp(gap, [k1, k2, k3, k4], [self.lapse_up, 0.0, 0.0, self.lapse_down])


@dataclass(frozen=True)
class NpvSample:
    """Per-path discounted-margin outcomes behind one NAV estimate."""

    transition: np.ndarray
    outcomes: np.ndarray  # (P,)
    shock_id: str | None = None

    @property
    def mean(self) -> float:
        return float(self.outcomes.mean())

    @property
    def standard_error(self) -> float:
        p = self.outcomes.size
        if p < 2:
            return float("nan")
        return float(self.outcomes.std(ddof=1) / np.sqrt(p))


# ---------------------------------------------------------------------------
# Regulatory shocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShockSpec:
    """One prescribed instantaneous balance-sheet stress.

    Magnitudes are configuration; the defaults in :func:`standard_shocks`
    follow the usual standard-formula calibration (equity -39%/-49%,
    maturity-dependent relative rate stresses with a one-point floor on the
    upward move, spread widening per issuer kind, 65% illiquidity-premium
    cut).
    """

    id: str
    equity_drop: float = 0.0
    ir_stress: tuple[tuple[float, float], ...] = ()
    ir_min_shift: float = 0.0
    spread_widen_corporate: float = 0.0
    spread_widen_sovereign: float = 0.0
    illiquidity_cut: float = 0.0

    def __post_init__(self) -> None:
        if self.id not in SHOCK_IDS:
            raise ConfigError(f"unknown shock id {self.id!r}, expected one of {SHOCK_IDS}")


def standard_shocks() -> dict[str, ShockSpec]:
    up = ((1.0, 0.70), (5.0, 0.55), (10.0, 0.42), (15.0, 0.33), (20.0, 0.26), (30.0, 0.25))
    down = ((1.0, -0.75), (5.0, -0.46), (10.0, -0.31), (15.0, -0.27), (20.0, -0.29), (30.0, -0.30))
    return {
        "ir_up": ShockSpec(id="ir_up", ir_stress=up, ir_min_shift=0.01),
        "ir_down": ShockSpec(id="ir_down", ir_stress=down),
        "stock_global": ShockSpec(id="stock_global", equity_drop=0.39),
        "stock_other": ShockSpec(id="stock_other", equity_drop=0.49),
        "spread": ShockSpec(id="spread", spread_widen_corporate=0.014, spread_widen_sovereign=0.0),
        "illiquidity": ShockSpec(id="illiquidity", illiquidity_cut=0.65),
    }


def shock_market_state(state: MarketState, shock: ShockSpec) -> MarketState:
    """Market-state part of a stress (curve, spreads, illiquidity premium)."""
    if shock.id in ("ir_up", "ir_down"):
        if not shock.ir_stress:
            return state
        yields = esg.prices_to_yields(state.zero_curve)
        m = np.arange(1, yields.size + 1, dtype=float)
        mats = [p[0] for p in shock.ir_stress]
        factors = [p[1] for p in shock.ir_stress]
        rel = np.interp(m, mats, factors)
        stressed = yields * (1.0 + rel)
        if shock.ir_min_shift > 0.0:
            stressed = np.maximum(stressed, yields + shock.ir_min_shift)
        return replace(state, zero_curve=esg.yields_to_prices(stressed))
    if shock.id == "spread":
        return replace(
            state,
            corporate_spread=state.corporate_spread + shock.spread_widen_corporate,
            sovereign_spread=state.sovereign_spread + shock.spread_widen_sovereign,
        )
    if shock.id == "illiquidity":
        return replace(state, illiquidity_premium=state.illiquidity_premium * (1.0 - shock.illiquidity_cut))
    return state  # equity shocks act on the asset portfolio only


def shock_assets(assets: AssetPortfolio, shock: ShockSpec) -> AssetPortfolio:
    """Asset-portfolio part of a stress (equity bucket write-downs)."""
    if shock.id == "stock_global":
        return replace(assets, stock_global=assets.stock_global * (1.0 - shock.equity_drop))
    if shock.id == "stock_other":
        return replace(assets, stock_other=assets.stock_other * (1.0 - shock.equity_drop))
    return assets


def apply_sf_shock(
    liabs: Sequence[LiabilityModelPoint],
    assets: AssetPortfolio,
    state: MarketState,
    shock: ShockSpec,
) -> tuple[Sequence[LiabilityModelPoint], AssetPortfolio, MarketState]:
    """Instantaneous revaluation of the balance sheet under one stress."""
    return liabs, shock_assets(assets, shock), shock_market_state(state, shock)


# ---------------------------------------------------------------------------
# Vectorised projection kernel
# ---------------------------------------------------------------------------


def _bond_values(
    bonds: tuple[Bond, ...],
    t: int,
    cum_fwd: np.ndarray,  # (rows, M+1) cumulative forward integrals
    x_t: np.ndarray,  # (rows,)
    mean_reversion: float,
    sov_spread: np.ndarray,
    corp_spread: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Market value of the live bond ladder at integer time t, per row.

    Bonds are priced on the model term structure: remaining cash flows are
    discounted at the initial forward curve tilted by the current
    mean-reverting state, plus the issuer spread.  Returns the sovereign
    and corporate pool values separately.
    """
    rows = x_t.shape[0]
    values = {"sovereign": np.zeros(rows), "corporate": np.zeros(rows)}
    max_tau = max((b.maturity - t for b in bonds), default=0)
    if max_tau <= 0:
        return values["sovereign"], values["corporate"]
    if t + max_tau > cum_fwd.shape[1] - 1:
        raise DataError(
            f"bond maturity {t + max_tau} exceeds the available curve ({cum_fwd.shape[1] - 1} years)"
        )
    tau = np.arange(1, max_tau + 1, dtype=float)
    loading = (1.0 - np.exp(-mean_reversion * tau)) / mean_reversion
    base = -(cum_fwd[:, t + 1 : t + max_tau + 1] - cum_fwd[:, t : t + 1]) - np.outer(x_t, loading)
    z = {
        "sovereign": np.exp(base - np.outer(sov_spread, tau)),
        "corporate": np.exp(base - np.outer(corp_spread, tau)),
    }
    for bond in bonds:
        remaining = bond.maturity - t
        if remaining <= 0:
            continue
        cf = np.full(remaining, bond.coupon * bond.nominal)
        cf[-1] += bond.nominal
        values[bond.kind] += z[bond.kind][:, :remaining] @ cf
    return values["sovereign"], values["corporate"]


@dataclass
class ProjectionResult:
    """Stacked per-row projection outputs (rows = blocks * paths)."""

    profits: np.ndarray  # (rows, H) shareholder margin per year
    payouts: np.ndarray  # (rows, H) policyholder cash out (surrenders + wind-up)
    income: np.ndarray  # (rows, H) asset financial income
    credited: np.ndarray  # (rows, H) amounts credited to accounts
    fees: np.ndarray  # (rows, H)
    floored_accounts: int  # rows*years*points where the zero floor bit


def _project_rows(
    liabs: Sequence[LiabilityModelPoint],
    assets: AssetPortfolio,
    assumptions: AlmAssumptions,
    stock_rel: np.ndarray,  # (rows, H+1)
    short_rates: np.ndarray,  # (rows, H)
    ou_state: np.ndarray,  # (rows, H)
    fwd10avg: np.ndarray,  # (rows, H)
    yields_ext: np.ndarray,  # (rows, M)
    stock_scale: np.ndarray,  # (rows,)
    sov_spread: np.ndarray,  # (rows,)
    corp_spread: np.ndarray,  # (rows,)
    mean_reversion: float,
) -> ProjectionResult:
    rows, h = short_rates.shape
    if not liabs:
        raise ConfigError("at least one liability model point is required")
    m_ext = yields_ext.shape[1]
    cum_fwd = np.concatenate(
        [np.zeros((rows, 1)), yields_ext * np.arange(1, m_ext + 1)[None, :]], axis=1
    )

    guar = np.array([mp.guaranteed_rate for mp in liabs])
    base_lapse = np.array([mp.base_lapse_rate for mp in liabs])
    accounts = np.tile([mp.account_value for mp in liabs], (rows, 1))  # (rows, n_mp)

    stock_value = assets.stock_pool * stock_scale
    cash = np.full(rows, assets.cash, dtype=float)
    bond_frac = np.ones(rows)  # ladder fraction still held (forced sales shrink it)
    bv_sov, bv_corp = _bond_values(
        assets.bonds, 0, cum_fwd, np.zeros(rows), mean_reversion, sov_spread, corp_spread
    )
    bond_value = bv_sov + bv_corp

    a_loading = (1.0 - np.exp(-10.0 * mean_reversion)) / (10.0 * mean_reversion)

    profits = np.zeros((rows, h))
    payouts = np.zeros((rows, h))
    income_arr = np.zeros((rows, h))
    credited_arr = np.zeros((rows, h))
    fees_arr = np.zeros((rows, h))
    floored = 0

    for t in range(1, h + 1):
        r_prev = short_rates[:, t - 1]
        growth = np.exp(r_prev)
        cash_interest = cash * (growth - 1.0)

        coupons_full = 0.0
        redemptions_full = 0.0
        for bond in assets.bonds:
            if bond.maturity >= t:
                coupons_full += bond.coupon * bond.nominal
            if bond.maturity == t:
                redemptions_full += bond.nominal
        coupons = bond_frac * coupons_full
        redemptions = bond_frac * redemptions_full
        # the tilt at time t uses the end-of-year state x_t; x_h is never
        # simulated, so the wind-up year reuses the last available state
        new_sov, new_corp = _bond_values(
            assets.bonds, t, cum_fwd, ou_state[:, t] if t < h else ou_state[:, h - 1],
            mean_reversion, sov_spread, corp_spread,
        )
        new_sov, new_corp = bond_frac * new_sov, bond_frac * new_corp
        bond_value_new = new_sov + new_corp
        bond_income = bond_value_new - bond_value + coupons + redemptions

        # expected credit losses: a share of the issuer spread is default
        # compensation, charged annually on the exposure held
        credit_loss = assumptions.credit_loss_share * (sov_spread * bv_sov + corp_spread * bv_corp)

        ratio = stock_rel[:, t] / stock_rel[:, t - 1]
        stock_income = stock_value * (ratio - 1.0)  # total return incl. dividends
        dividends = assumptions.dividend_yield * stock_value * ratio

        assets_prev = cash + stock_value + bond_value
        income = cash_interest + bond_income + stock_income - credit_loss
        # crediting base: realized book income only (interest, coupons,
        # dividends, net of credit losses); unrealized marks stay with the
        # shareholder
        book_income = cash_interest + coupons + dividends - credit_loss
        earned = np.where(assets_prev > 1e-9, book_income / np.maximum(assets_prev, 1e-9), 0.0)

        credited_rate = np.maximum(guar[None, :], assumptions.profit_share * earned[:, None])
        credited = (accounts * credited_rate).sum(axis=1)
        fees = assumptions.fee_rate * accounts.sum(axis=1)
        accounts = accounts * (1.0 + credited_rate - assumptions.fee_rate)
        below = accounts < 0.0
        if below.any():
            floored += int(below.sum())
            accounts = np.maximum(accounts, 0.0)

        target = np.maximum(
            assumptions.target_rate_floor,
            fwd10avg[:, t - 1] + a_loading * ou_state[:, t - 1],
        )
        gap = credited_rate - target[:, None]
        lapse = np.clip(base_lapse[None, :] + assumptions.lapse_addon(gap), 0.0, 1.0)
        surrenders = (accounts * lapse).sum(axis=1)
        accounts = accounts * (1.0 - lapse)

        profit = income - credited + fees
        stock_value = stock_value * ratio - dividends
        cash = cash * growth + coupons + redemptions + dividends - credit_loss - surrenders - profit
        bond_value = bond_value_new
        bv_sov, bv_corp = new_sov, new_corp

        # liquidity waterfall: a cash shortfall is funded by selling stock
        # and bonds proportionally at market value, which realises any
        # spread-widened prices; residual shortfalls stay as borrowing
        short = cash < 0.0
        if short.any():
            liquid = stock_value + bond_value
            sell = np.where(short, np.minimum(1.0, -cash / np.maximum(liquid, 1e-9)), 0.0)
            sell = np.where(liquid > 1e-9, sell, 0.0)
            cash = cash + sell * liquid
            stock_value = stock_value * (1.0 - sell)
            bond_frac = bond_frac * (1.0 - sell)
            bond_value = bond_value * (1.0 - sell)
            bv_sov, bv_corp = bv_sov * (1.0 - sell), bv_corp * (1.0 - sell)
        payout = surrenders

        if t == h:
            # wind-up: remaining accounts are paid out, shareholders take
            # the residual surplus
            remaining = accounts.sum(axis=1)
            payout = payout + remaining
            cash = cash - remaining
            residual = cash + stock_value + bond_value
            profit = profit + residual
            accounts = np.zeros_like(accounts)

        profits[:, t - 1] = profit
        payouts[:, t - 1] = payout
        income_arr[:, t - 1] = income
        credited_arr[:, t - 1] = credited
        fees_arr[:, t - 1] = fees

    if floored:
        logger.warning("account value floored at zero in %d point-years", floored)
    return ProjectionResult(
        profits=profits,
        payouts=payouts,
        income=income_arr,
        credited=credited_arr,
        fees=fees_arr,
        floored_accounts=floored,
    )


def discounted_profits(
    profits: np.ndarray,
    payouts: np.ndarray,
    deflators: np.ndarray,
    illiquidity_premium: np.ndarray | float = 0.0,
) -> np.ndarray:
    """Net present value of margins per row.

    Adds the illiquidity own-use adjustment: policyholder payouts are worth
    less when discounted at risk-free plus the illiquidity premium, and the
    difference accrues to the shareholder.
    """
    profits = np.atleast_2d(profits)
    payouts = np.atleast_2d(payouts)
    deflators = np.atleast_2d(deflators)
    h = profits.shape[1]
    disc = deflators[:, 1 : h + 1]
    t = np.arange(1, h + 1, dtype=float)
    ip = np.asarray(illiquidity_premium, dtype=float).reshape(-1, 1)
    adjust = disc * (1.0 - np.exp(-ip * t[None, :])) * payouts
    return (disc * profits).sum(axis=1) + adjust.sum(axis=1)


# ---------------------------------------------------------------------------
# Table-level and single-path entry points
# ---------------------------------------------------------------------------


def project_table(
    liabs: Sequence[LiabilityModelPoint],
    assets: AssetPortfolio,
    table: ScenarioTable,
    assumptions: AlmAssumptions | None = None,
) -> ProjectionResult:
    """Project every (block, path) of a scenario table in one vectorised run."""
    assumptions = assumptions or AlmAssumptions()
    n, p, h = table.n_blocks, table.p_paths, table.horizon
    rep = lambda arr: np.repeat(arr, p)  # block scalars to row scalars
    flat = lambda arr: arr.reshape(n * p, arr.shape[2])
    return _project_rows(
        liabs,
        assets,
        assumptions,
        stock_rel=flat(table.stock_rel),
        short_rates=flat(table.short_rates),
        ou_state=flat(table.ou_state),
        fwd10avg=np.repeat(table.fwd10avg, p, axis=0),
        yields_ext=np.repeat(table.yields_ext, p, axis=0),
        stock_scale=rep(table.stock_scale),
        sov_spread=rep(table.sovereign_spread),
        corp_spread=rep(table.corporate_spread),
        mean_reversion=table.mean_reversion,
    )


def npv_table(
    liabs: Sequence[LiabilityModelPoint],
    assets: AssetPortfolio,
    table: ScenarioTable,
    assumptions: AlmAssumptions | None = None,
) -> np.ndarray:
    """Per-(block, path) net present values of margins, shape (N, P)."""
    n, p, h = table.n_blocks, table.p_paths, table.horizon
    result = project_table(liabs, assets, table, assumptions)
    values = discounted_profits(
        result.profits,
        result.payouts,
        table.deflators.reshape(n * p, h + 1),
        np.repeat(table.illiquidity_premium, p),
    )
    return values.reshape(n, p)


def _project_path(
    liabs: Sequence[LiabilityModelPoint],
    assets: AssetPortfolio,
    path: ScenarioPath,
    assumptions: AlmAssumptions | None,
) -> ProjectionResult:
    assumptions = assumptions or AlmAssumptions()
    one = lambda v: np.asarray([v], dtype=float)
    row = lambda arr: np.asarray(arr, dtype=float)[None, :]
    return _project_rows(
        liabs,
        assets,
        assumptions,
        stock_rel=row(path.stock_rel),
        short_rates=row(path.short_rates),
        ou_state=row(path.ou_state),
        fwd10avg=row(path.fwd10avg),
        yields_ext=row(path.yields_ext),
        stock_scale=one(path.stock_scale),
        sov_spread=one(path.sovereign_spread),
        corp_spread=one(path.corporate_spread),
        mean_reversion=path.mean_reversion,
    )


def project(
    liabs: Sequence[LiabilityModelPoint],
    assets: AssetPortfolio,
    path: ScenarioPath,
    assumptions: AlmAssumptions | None = None,
) -> np.ndarray:
    """Yearly shareholder profits along one scenario path, shape (H,)."""
    return _project_path(liabs, assets, path, assumptions).profits[0]


def npv(
    liabs: Sequence[LiabilityModelPoint],
    assets: AssetPortfolio,
    path: ScenarioPath,
    assumptions: AlmAssumptions | None = None,
) -> float:
    """Net present value of margins along one scenario path."""
    result = _project_path(liabs, assets, path, assumptions)
    value = discounted_profits(
        result.profits, result.payouts, np.asarray(path.deflators)[None, :],
        path.illiquidity_premium,
    )
    return float(value[0])


# ---------------------------------------------------------------------------
# NAV estimation
# ---------------------------------------------------------------------------


def martingale_controls(table: ScenarioTable) -> np.ndarray:
    """Zero-mean control variates per path, shape (N*P, q).

    Deflator deviations from each block's fitted curve and discounted-stock
    deviations from one have exactly zero conditional expectation given the
    block, so projecting them out of the discounted-margin outcomes reduces
    variance without biasing any conditional mean.
    """
    h = table.horizon
    picks = sorted({max(1, h // 3), max(1, 2 * h // 3), h})
    cols = []
    m = np.arange(1, h + 1)
    fitted = np.exp(-table.yields_ext[:, :h] * m)  # (N, H) block curve prices
    for t in picks:
        cols.append((table.deflators[:, :, t] - fitted[:, None, t - 1]).reshape(-1))
        cols.append((table.deflators[:, :, t] * table.stock_rel[:, :, t] - 1.0).reshape(-1))
    return np.column_stack(cols)


def _apply_controls(values: np.ndarray, controls: np.ndarray) -> np.ndarray:
    """Subtract the fitted projection of the outcomes onto the controls.

    The control coefficient is estimated from the same sample, which leaves
    a bias of order 1/rows; with the calibration budgets in use that is
    orders of magnitude below the Monte Carlo noise it removes.
    """
    rows = values.size
    if rows <= controls.shape[1] + 2:
        return values
    centered = values - values.mean()
    coef, *_ = np.linalg.lstsq(controls, centered, rcond=None)
    return values - controls @ coef


def batch_nav(
    liabs: Sequence[LiabilityModelPoint],
    assets: AssetPortfolio,
    base: MarketState,
    defs: Sequence[RiskFactorDef],
    transitions: np.ndarray,
    p: int,
    horizon: int,
    seed: int,
    assumptions: AlmAssumptions | None = None,
    shock: ShockSpec | None = None,
    control_variates: bool = False,
) -> np.ndarray:
    """Discounted-margin outcomes for a batch of transitions, shape (N, P).

    Applies the optional regulatory stress after each transition shift, so
    shocked responses share the calibration transitions of the central run.
    With ``control_variates`` the martingale controls are projected out of
    the outcomes (variance reduction at unchanged conditional means); leave
    it off where the raw per-path error structure is itself under study.
    """
    transitions = np.atleast_2d(np.asarray(transitions, dtype=float))
    post = None
    if shock is not None:
        assets = shock_assets(assets, shock)
        post = lambda state: shock_market_state(state, shock)
    table = esg.generate_table(base, transitions, p, horizon, seed, defs, post_transform=post)
    values = npv_table(liabs, assets, table, assumptions)
    if control_variates:
        flat = _apply_controls(values.reshape(-1), martingale_controls(table))
        values = flat.reshape(values.shape)
    return values


def nav_estimate(
    liabs: Sequence[LiabilityModelPoint],
    assets: AssetPortfolio,
    base: MarketState,
    defs: Sequence[RiskFactorDef],
    transition: np.ndarray,
    p: int,
    seed: int,
    horizon: int = 30,
    assumptions: AlmAssumptions | None = None,
    shock: ShockSpec | None = None,
    control_variates: bool = False,
) -> tuple[float, float, NpvSample]:
    """Monte Carlo net-asset-value estimate at one transition.

    Returns (mean, standard error, sample); with a single secondary path
    the mean is the lone discounted-margin outcome and the standard error
    is not estimable (returned as nan).
    """
    transition = as_vector(transition, len(defs))
    outcomes = batch_nav(
        liabs, assets, base, defs, transition[None, :], p, horizon, seed, assumptions, shock,
        control_variates=control_variates,
    )[0]
    sample = NpvSample(
        transition=transition, outcomes=outcomes,
        shock_id=None if shock is None else shock.id,
    )
    return sample.mean, sample.standard_error, sample
