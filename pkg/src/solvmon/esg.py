"""Risk-neutral economic scenario generation conditioned on a transition.

Each calibration transition defines a shifted market state ("instant shock"
of the calibration-date state).  From every shifted state the generator
simulates P joint annual paths of the stock index and the short rate under
the risk-neutral measure:

* short rate: one-factor mean-reverting Gaussian model whose deterministic
  drift is fitted to the shifted initial curve so that discount factors
  reprice it exactly in expectation (a convexity adjustment on the forward
  rates absorbs the variance of the accumulated state);
* stock: lognormal with drift equal to the prevailing short rate and a
  Brownian driver correlated with the rate innovations, which makes the
  discounted stock price a martingale by construction.

Blocks (one per transition) own independent counter-based random streams
keyed by (seed, block index), so any block is reproducible in isolation and
generation can be parallelised without shared state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NumericalError
from .transitions import RiskFactorDef, RiskFactorKind, as_vector

__all__ = [
    "MarketState",
    "ScenarioPath",
    "ScenarioTable",
    "LeakageReport",
    "flat_curve",
    "prices_to_yields",
    "yields_to_prices",
    "apply_transition",
    "generate_table",
    "martingale_check",
]

#: Extra curve years kept beyond the projection horizon so that a 10-year
#: reference yield can be read at every projection step.
CURVE_TAIL_YEARS = 10


def flat_curve(rate: float, maturities: int) -> np.ndarray:
    """Zero-coupon prices e^(-rate*m) for m = 1..maturities."""
    return np.exp(-rate * np.arange(1, maturities + 1))


def prices_to_yields(prices: np.ndarray) -> np.ndarray:
    """Continuously-compounded zero yields from prices at maturities 1..M."""
    prices = np.asarray(prices, dtype=float)
    if prices.ndim != 1 or prices.size < 1 or np.any(prices <= 0.0):
        raise DomainError("zero-coupon prices must be a 1-D positive array")
    m = np.arange(1, prices.size + 1)
    return -np.log(prices) / m


def yields_to_prices(yields: np.ndarray) -> np.ndarray:
    yields = np.asarray(yields, dtype=float)
    m = np.arange(1, yields.size + 1)
    return np.exp(-yields * m)


@dataclass(frozen=True)
class MarketState:
    """Levels and dynamics parameters of the economic drivers at one date."""

    stock_level: float
    zero_curve: np.ndarray  # prices at maturities 1..M
    sovereign_spread: float = 0.0
    corporate_spread: float = 0.0
    stock_vol: float = 0.20
    rate_vol: float = 0.008
    mean_reversion: float = 0.15
    equity_rate_correlation: float = 0.2
    illiquidity_premium: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "zero_curve", np.asarray(self.zero_curve, dtype=float))
        if not self.stock_level > 0.0:
            raise DomainError(f"stock level must be positive, got {self.stock_level}")
        if self.zero_curve.ndim != 1 or self.zero_curve.size < 1 or np.any(self.zero_curve <= 0.0):
            raise DomainError("zero curve must be a 1-D array of positive prices")
        if abs(self.equity_rate_correlation) > 1.0:
            raise DomainError("equity/rate correlation must lie in [-1, 1]")
        if self.mean_reversion <= 0.0:
            raise DomainError("mean reversion speed must be positive")
        for name in ("sovereign_spread", "corporate_spread", "stock_vol", "rate_vol", "illiquidity_premium"):
            if getattr(self, name) < 0.0:
                raise DomainError(f"{name} must be >= 0")

    @classmethod
    def flat(cls, rate: float, maturities: int = 20, **kwargs) -> "MarketState":
        return cls(stock_level=kwargs.pop("stock_level", 100.0),
                   zero_curve=flat_curve(rate, maturities), **kwargs)


def apply_transition(
    base: MarketState,
    eps: np.ndarray,
    defs: Sequence[RiskFactorDef],
) -> MarketState:
    """Market state induced by a transition: the instant-shock map.

    Stock level is scaled by e^eps, the whole yield curve is shifted by the
    rate factor, spreads / volatilities / illiquidity premium move
    additively (floored at zero so the state invariants keep holding).
    """
    eps = as_vector(eps, len(defs))
    stock = base.stock_level
    yields = prices_to_yields(base.zero_curve)
    sov, corp = base.sovereign_spread, base.corporate_spread
    svol, illiq = base.stock_vol, base.illiquidity_premium
    for value, d in zip(eps, defs):
        if d.kind == RiskFactorKind.STOCK_LEVEL:
            stock *= float(np.exp(value))
        elif d.kind == RiskFactorKind.RATE_LEVEL:
            yields = yields + value
        elif d.kind == RiskFactorKind.SPREAD_SOVEREIGN:
            sov = max(0.0, sov + value)
        elif d.kind == RiskFactorKind.SPREAD_CORPORATE:
            corp = max(0.0, corp + value)
        elif d.kind == RiskFactorKind.STOCK_VOL:
            svol = max(0.0, svol + value)
        elif d.kind == RiskFactorKind.ILLIQUIDITY:
            illiq = max(0.0, illiq + value)
    if not stock > 0.0:
        raise DomainError("transition drives the stock level non-positive")
    return replace(
        base,
        stock_level=stock,
        zero_curve=yields_to_prices(yields),
        sovereign_spread=sov,
        corporate_spread=corp,
        stock_vol=svol,
        illiquidity_premium=illiq,
    )


# ---------------------------------------------------------------------------
# Rate-model plumbing
# ---------------------------------------------------------------------------


def _extend_yields(yields: np.ndarray, target: int) -> np.ndarray:
    """Extend a zero-yield vector to ``target`` maturities by flat forwards."""
    m = yields.size
    if m >= target:
        return yields[:target]
    cum = np.concatenate([[0.0], yields * np.arange(1, m + 1)])  # -ln P at 0..m
    last_fwd = cum[-1] - cum[-2] if m >= 2 else yields[0]
    ext_cum = cum[-1] + last_fwd * np.arange(1, target - m + 1)
    full = np.concatenate([cum[1:], ext_cum])
    return full / np.arange(1, target + 1)


def _forwards(yields_ext: np.ndarray) -> np.ndarray:
    """One-year forward rates f(t), t = 0..M-1, from extended zero yields."""
    cum = np.concatenate([
        np.zeros(yields_ext.shape[:-1] + (1,)),
        yields_ext * np.arange(1, yields_ext.shape[-1] + 1),
    ], axis=-1)
    return np.diff(cum, axis=-1)


def _accumulated_state_variance(a: float, rate_vol: float, horizon: int) -> np.ndarray:
    """Variance of the accumulated mean-reverting state, V[sum_{u<t} x_u].

    The state follows x_t = e^(-a) x_{t-1} + s eps_t with x_0 = 0 and
    s^2 = rate_vol^2 (1 - e^(-2a)) / (2a).  Used for the drift fit: adding
    (V_{t+1} - V_t)/2 to the forward rate makes E[exp(-sum x_u)] cancel.
    """
    kappa = np.exp(-a)
    sig2 = rate_vol**2 * (1.0 - np.exp(-2.0 * a)) / (2.0 * a)
    v = np.zeros(horizon + 1)
    for t in range(2, horizon + 1):
        i = np.arange(1, t)
        w = (1.0 - kappa ** (t - i)) / (1.0 - kappa)
        v[t] = sig2 * np.sum(w**2)
    return v


# ---------------------------------------------------------------------------
# Scenario table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioPath:
    """Single simulated path plus the block-level initial conditions."""

    stock_rel: np.ndarray  # (H+1,) stock index relative to its shifted level
    short_rates: np.ndarray  # (H,) annual short rates
    deflators: np.ndarray  # (H+1,), deflators[0] == 1
    ou_state: np.ndarray  # (H,) mean-reverting state, for reference yields
    fwd10avg: np.ndarray  # (H,) average initial forward over [t, t+10)
    yields_ext: np.ndarray  # (H + CURVE_TAIL_YEARS,) fitted initial zero yields
    stock_scale: float
    sovereign_spread: float
    corporate_spread: float
    illiquidity_premium: float
    mean_reversion: float

    @property
    def horizon(self) -> int:
        return self.short_rates.size

    def reference_yield_10y(self) -> np.ndarray:
        """Model-consistent 10-year zero yield at the start of each year."""
        a = self.mean_reversion
        loading = (1.0 - np.exp(-10.0 * a)) / (10.0 * a)
        return self.fwd10avg + loading * self.ou_state


@dataclass
class ScenarioTable:
    """N blocks of P annual risk-neutral paths sharing one calibration seed."""

    stock_rel: np.ndarray  # (N, P, H+1)
    short_rates: np.ndarray  # (N, P, H)
    ou_state: np.ndarray  # (N, P, H)
    deflators: np.ndarray  # (N, P, H+1)
    transitions: np.ndarray  # (N, J)
    stock_scale: np.ndarray  # (N,) shifted / base stock level
    sovereign_spread: np.ndarray  # (N,)
    corporate_spread: np.ndarray  # (N,)
    illiquidity_premium: np.ndarray  # (N,)
    sigma_stock: np.ndarray  # (N,)
    yields_ext: np.ndarray  # (N, H + CURVE_TAIL_YEARS)
    fwd10avg: np.ndarray  # (N, H)
    horizon: int
    seed: int
    mean_reversion: float
    rate_vol: float
    equity_rate_correlation: float

    @property
    def n_blocks(self) -> int:
        return self.stock_rel.shape[0]

    @property
    def p_paths(self) -> int:
        return self.stock_rel.shape[1]

    def path(self, block: int, sim: int) -> ScenarioPath:
        return ScenarioPath(
            stock_rel=self.stock_rel[block, sim],
            short_rates=self.short_rates[block, sim],
            deflators=self.deflators[block, sim],
            ou_state=self.ou_state[block, sim],
            fwd10avg=self.fwd10avg[block],
            yields_ext=self.yields_ext[block],
            stock_scale=float(self.stock_scale[block]),
            sovereign_spread=float(self.sovereign_spread[block]),
            corporate_spread=float(self.corporate_spread[block]),
            illiquidity_premium=float(self.illiquidity_premium[block]),
            mean_reversion=self.mean_reversion,
        )

    def initial_prices(self, block: int) -> np.ndarray:
        """Zero-coupon prices of the block's fitted initial curve."""
        m = np.arange(1, self.yields_ext.shape[1] + 1)
        return np.exp(-self.yields_ext[block] * m)

    # -- audit/replay serialisation (columnar arrays + JSON header) --------

    def save(self, path: str) -> None:
        header = {
            "format": 1,
            "n_blocks": self.n_blocks,
            "p_paths": self.p_paths,
            "horizon": self.horizon,
            "seed": self.seed,
            "mean_reversion": self.mean_reversion,
            "rate_vol": self.rate_vol,
            "equity_rate_correlation": self.equity_rate_correlation,
        }
        arrays = {
            name: getattr(self, name)
            for name in (
                "stock_rel", "short_rates", "ou_state", "deflators", "transitions",
                "stock_scale", "sovereign_spread", "corporate_spread",
                "illiquidity_premium", "sigma_stock", "yields_ext", "fwd10avg",
            )
        }
        np.savez_compressed(path, header=json.dumps(header, sort_keys=True), **arrays)

    @classmethod
    def load(cls, path: str) -> "ScenarioTable":
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            kwargs = {name: data[name] for name in data.files if name != "header"}
        return cls(
            horizon=int(header["horizon"]),
            seed=int(header["seed"]),
            mean_reversion=float(header["mean_reversion"]),
            rate_vol=float(header["rate_vol"]),
            equity_rate_correlation=float(header["equity_rate_correlation"]),
            **kwargs,
        )


def _block_rng(seed: int, block: int) -> np.random.Generator:
    # Counter-based stream keyed by (seed, block): blocks are independent
    # and reproducible regardless of how many other blocks are generated.
    return np.random.Generator(np.random.Philox(key=np.array([seed, block], dtype=np.uint64)))


def generate_table(
    base: MarketState,
    transitions: np.ndarray,
    p: int,
    h: int,
    seed: int,
    defs: Sequence[RiskFactorDef],
    post_transform: Callable[[MarketState], MarketState] | None = None,
) -> ScenarioTable:
    """Generate the aggregate scenario table over all transitions.

    ``post_transform`` is applied to each block's shifted state before
    simulation; it carries regulatory stresses into shocked-response runs.
    """
    if p < 1 or h < 1:
        raise DomainError(f"need p >= 1 and h >= 1, got p={p}, h={h}")
    transitions = np.atleast_2d(np.asarray(transitions, dtype=float))
    n = transitions.shape[0]
    m_ext = h + CURVE_TAIL_YEARS

    states = []
    for bi in range(n):
        state = apply_transition(base, transitions[bi], defs)
        if post_transform is not None:
            state = post_transform(state)
        states.append(state)

    yields_ext = np.stack([_extend_yields(prices_to_yields(s.zero_curve), m_ext) for s in states])
    fwd = _forwards(yields_ext)  # (N, m_ext)
    window = np.lib.stride_tricks.sliding_window_view(fwd, CURVE_TAIL_YEARS, axis=1)
    fwd10avg = window.mean(axis=2)[:, :h]

    a, rate_vol, rho = base.mean_reversion, base.rate_vol, base.equity_rate_correlation
    v = _accumulated_state_variance(a, rate_vol, h)
    phi = fwd[:, :h] + (np.diff(v) / 2.0)[None, :]  # fitted drift per block

    kappa = float(np.exp(-a))
    sig_eps = rate_vol * float(np.sqrt((1.0 - np.exp(-2.0 * a)) / (2.0 * a)))
    sigma_stock = np.array([s.stock_vol for s in states])

    # one independent stream per block; innovations stacked then evolved
    # jointly so the time recursion is vectorised over (block, path)
    xi = np.empty((n, p, h))
    zeta = np.empty((n, p, h))
    for bi in range(n):
        z = _block_rng(seed, bi).standard_normal((2, p, h))
        xi[bi], zeta[bi] = z[0], z[1]

    x = np.zeros((n, p, h))
    for t in range(1, h):
        x[:, :, t] = kappa * x[:, :, t - 1] + sig_eps * xi[:, :, t - 1]
    rates = phi[:, None, :] + x

    eta = rho * xi + np.sqrt(1.0 - rho**2) * zeta
    sig = sigma_stock[:, None, None]
    log_steps = rates - 0.5 * sig**2 + sig * eta
    stock_rel = np.ones((n, p, h + 1))
    stock_rel[:, :, 1:] = np.exp(np.cumsum(log_steps, axis=2))

    deflators = np.ones((n, p, h + 1))
    deflators[:, :, 1:] = np.exp(-np.cumsum(rates, axis=2))
    if not np.all(np.isfinite(stock_rel)) or not np.all(deflators > 0.0):
        raise NumericalError("scenario generation produced non-finite paths")

    return ScenarioTable(
        stock_rel=stock_rel,
        short_rates=rates,
        ou_state=x,
        deflators=deflators,
        transitions=transitions,
        stock_scale=np.array([s.stock_level / base.stock_level for s in states]),
        sovereign_spread=np.array([s.sovereign_spread for s in states]),
        corporate_spread=np.array([s.corporate_spread for s in states]),
        illiquidity_premium=np.array([s.illiquidity_premium for s in states]),
        sigma_stock=sigma_stock,
        yields_ext=yields_ext,
        fwd10avg=fwd10avg,
        horizon=h,
        seed=seed,
        mean_reversion=a,
        rate_vol=rate_vol,
        equity_rate_correlation=rho,
    )


# ---------------------------------------------------------------------------
# Leakage diagnostics
# ---------------------------------------------------------------------------


@dataclass
class LeakageReport:
    """Per-block relative deviations of the martingale and deflator checks.

    ``stock_dev[n, t-1]`` is E_p[deflator_t * stock_t] - 1 for block n (the
    stock is expressed relative to its shifted initial level, so the
    martingale target is exactly one); ``deflator_dev`` compares E[deflator_t]
    to the block's fitted initial zero-coupon prices.  Standard errors are
    Monte Carlo estimates; a (block, t) cell is flagged when it deviates by
    more than three standard errors.
    """

    stock_dev: np.ndarray  # (N, H)
    stock_se: np.ndarray  # (N, H)
    deflator_dev: np.ndarray  # (N, H)
    deflator_se: np.ndarray  # (N, H)

    #: deterministic cells (zero-volatility or first-year deflators) have a
    #: zero standard error; deviations below this floor are rounding noise
    atol: float = 1e-12

    @property
    def stock_flags(self) -> np.ndarray:
        return np.abs(self.stock_dev) > 3.0 * self.stock_se + self.atol

    @property
    def deflator_flags(self) -> np.ndarray:
        return np.abs(self.deflator_dev) > 3.0 * self.deflator_se + self.atol

    def passed(self) -> bool:
        return not (bool(self.stock_flags.any()) or bool(self.deflator_flags.any()))

    def summary(self) -> dict:
        return {
            "blocks": int(self.stock_dev.shape[0]),
            "horizon": int(self.stock_dev.shape[1]),
            "worst_stock_dev": float(np.max(np.abs(self.stock_dev))),
            "worst_deflator_dev": float(np.max(np.abs(self.deflator_dev))),
            "stock_cells_flagged": int(self.stock_flags.sum()),
            "deflator_cells_flagged": int(self.deflator_flags.sum()),
        }


def martingale_check(table: ScenarioTable) -> LeakageReport:
    """Leakage test of the discounted stock and of the deflators per block."""
    n, p, h = table.n_blocks, table.p_paths, table.horizon
    disc_stock = table.deflators[:, :, 1:] * table.stock_rel[:, :, 1:]  # (N, P, H)
    stock_dev = disc_stock.mean(axis=1) - 1.0
    m = np.arange(1, h + 1)
    target = np.exp(-table.yields_ext[:, :h] * m)  # fitted P(0+, t), (N, H)
    deflator_dev = table.deflators[:, :, 1:].mean(axis=1) / target - 1.0
    if p > 1:
        stock_se = disc_stock.std(axis=1, ddof=1) / np.sqrt(p)
        deflator_se = table.deflators[:, :, 1:].std(axis=1, ddof=1) / np.sqrt(p) / target
    else:
        stock_se = np.full((n, h), np.nan)
        deflator_se = np.full((n, h), np.nan)
    return LeakageReport(
        stock_dev=stock_dev, stock_se=stock_se,
        deflator_dev=deflator_dev, deflator_se=deflator_se,
    )
