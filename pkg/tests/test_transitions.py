"""Tests for risk-factor formulas, realized transitions and the probable box."""

import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solvmon.errors import CalibrationError, ConfigError, DataError, DomainError
from solvmon.transitions import (
    IndexHistory,
    ProbableSpace,
    RiskFactorDef,
    RiskFactorKind,
    calibrate_probable_space,
    compute_rate_factor,
    compute_spread_factor,
    compute_stock_factor,
    empirical_quantile,
    factor_series,
    out_of_sample_path,
    realized_transition,
    sample_transitions,
)

# Frozen via 50-digit decimal arithmetic: ln(61.88 / 100).
LN_0_6188 = -0.479973160283225995829126772939478824


def _dates(n, start=dt.date(2012, 1, 2), step=1):
    return [start + dt.timedelta(days=step * i) for i in range(n)]


class TestStockFactor:
    def test_identity(self):
        assert compute_stock_factor(100.0, 100.0) == 0.0

    def test_closed_form(self):
        assert compute_stock_factor(100.0, 105.0) == pytest.approx(math.log(1.05), abs=1e-15)

    def test_matches_high_precision_log(self):
        assert compute_stock_factor(100.0, 61.88) == pytest.approx(LN_0_6188, abs=1e-14)

    @pytest.mark.parametrize("s0,st", [(0.0, 100.0), (100.0, 0.0), (-1.0, 2.0), (1.0, float("nan"))])
    def test_domain_errors(self, s0, st):
        with pytest.raises(DomainError):
            compute_stock_factor(s0, st)

    @given(
        s0=st.floats(0.01, 1e6),
        st_=st.floats(0.01, 1e6),
        c=st.floats(0.01, 1e4),
    )
    @settings(max_examples=200)
    def test_scale_invariance(self, s0, st_, c):
        base = compute_stock_factor(s0, st_)
        scaled = compute_stock_factor(c * s0, c * st_)
        assert scaled == pytest.approx(base, abs=1e-9)


class TestRateFactor:
    def test_identical_curves(self):
        curve = np.exp(-0.02 * np.arange(1, 11))
        assert compute_rate_factor(curve, curve) == 0.0

    def test_flat_parallel_shift(self):
        m = np.arange(1, 21)
        assert compute_rate_factor(np.exp(-0.02 * m), np.exp(-0.03 * m)) == pytest.approx(0.01, abs=1e-15)

    def test_matches_brute_force_summation(self):
        # Arbitrary 10-point curves; expected value frozen from a 60-digit
        # per-maturity yield-difference average.
        m = np.arange(1, 11)
        y0 = 0.01 + 0.002 * m - 0.0001 * m**2
        yt = y0 + 0.004 - 0.0003 * m
        got = compute_rate_factor(np.exp(-y0 * m), np.exp(-yt * m))
        assert got == pytest.approx(0.00235, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            compute_rate_factor([0.99, 0.98], [0.99])

    def test_nonpositive_price(self):
        with pytest.raises(DomainError):
            compute_rate_factor([0.99, -0.5], [0.99, 0.98])

    @given(shift=st.floats(-0.05, 0.05), rate=st.floats(0.001, 0.08), m_count=st.integers(1, 30))
    @settings(max_examples=100)
    def test_parallel_shift_recovered_exactly(self, shift, rate, m_count):
        m = np.arange(1, m_count + 1)
        got = compute_rate_factor(np.exp(-rate * m), np.exp(-(rate + shift) * m))
        assert got == pytest.approx(shift, abs=1e-12)


class TestSpreadFactor:
    def test_zero(self):
        assert compute_spread_factor(0.010, 0.010) == 0.0

    def test_subtraction(self):
        assert compute_spread_factor(0.010, 0.025) == pytest.approx(0.015, abs=1e-15)

    def test_nonfinite(self):
        with pytest.raises(DomainError):
            compute_spread_factor(float("inf"), 0.01)


@pytest.fixture
def four_factor_defs():
    return [
        RiskFactorDef("stock", RiskFactorKind.STOCK_LEVEL, "EUROSTOXX50"),
        RiskFactorDef("rates", RiskFactorKind.RATE_LEVEL, "EUR swap curve"),
        RiskFactorDef("spread_corp", RiskFactorKind.SPREAD_CORPORATE, "iTraxx 10Y"),
        RiskFactorDef("spread_sov", RiskFactorKind.SPREAD_SOVEREIGN, "OAT-swap average"),
    ]


@pytest.fixture
def synthetic_history(four_factor_defs):
    rng = np.random.default_rng(7)
    t = 40
    m = np.arange(1, 11)
    stock = 100.0 * np.exp(np.cumsum(rng.normal(0.0, 0.05, t)) - 0.0)
    yields = 0.02 + np.cumsum(rng.normal(0.0, 0.002, t))
    curves = np.exp(-np.outer(yields, m) * 1.0)
    corp = 0.012 + np.cumsum(rng.normal(0.0, 0.0005, t))
    sov = 0.006 + np.cumsum(rng.normal(0.0, 0.0004, t))
    return IndexHistory(
        dates=_dates(t, step=91),
        levels={"stock": stock, "spread_corp": corp, "spread_sov": sov},
        curves={"rates": curves},
        frequency="quarterly",
    )


class TestRealizedTransition:
    def test_same_date_rejected(self, synthetic_history, four_factor_defs):
        d = synthetic_history.dates[3]
        with pytest.raises(DataError):
            realized_transition(synthetic_history, four_factor_defs, d, d)

    def test_zero_window_is_zero_vector(self, four_factor_defs):
        # constant history: any pair of dates gives the zero transition
        t = 5
        m = np.arange(1, 11)
        hist = IndexHistory(
            dates=_dates(t),
            levels={
                "stock": np.full(t, 100.0),
                "spread_corp": np.full(t, 0.01),
                "spread_sov": np.full(t, 0.005),
            },
            curves={"rates": np.tile(np.exp(-0.02 * m), (t, 1))},
        )
        eps = realized_transition(hist, four_factor_defs, hist.dates[0], hist.dates[-1])
        np.testing.assert_allclose(eps, np.zeros(4), atol=0.0)

    def test_single_stock_factor(self):
        defs = [RiskFactorDef("stock", RiskFactorKind.STOCK_LEVEL)]
        hist = IndexHistory(dates=_dates(2), levels={"stock": np.array([100.0, 110.0])})
        eps = realized_transition(hist, defs, hist.dates[0], hist.dates[1])
        assert eps[0] == pytest.approx(math.log(1.1), abs=1e-15)

    def test_componentwise_oracle(self, synthetic_history, four_factor_defs):
        t0, t1 = synthetic_history.dates[2], synthetic_history.dates[17]
        eps = realized_transition(synthetic_history, four_factor_defs, t0, t1)
        i0, i1 = 2, 17
        assert eps[0] == compute_stock_factor(
            synthetic_history.levels["stock"][i0], synthetic_history.levels["stock"][i1]
        )
        assert eps[1] == compute_rate_factor(
            synthetic_history.curves["rates"][i0], synthetic_history.curves["rates"][i1]
        )
        assert eps[2] == compute_spread_factor(
            synthetic_history.levels["spread_corp"][i0], synthetic_history.levels["spread_corp"][i1]
        )
        assert eps[3] == compute_spread_factor(
            synthetic_history.levels["spread_sov"][i0], synthetic_history.levels["spread_sov"][i1]
        )

    def test_missing_date(self, synthetic_history, four_factor_defs):
        with pytest.raises(DataError):
            realized_transition(
                synthetic_history, four_factor_defs, dt.date(1999, 1, 1), synthetic_history.dates[-1]
            )


class TestProbableSpace:
    def test_constant_history_degenerate(self, four_factor_defs):
        t = 12
        m = np.arange(1, 11)
        hist = IndexHistory(
            dates=_dates(t, step=91),
            levels={
                "stock": np.full(t, 50.0),
                "spread_corp": np.full(t, 0.01),
                "spread_sov": np.full(t, 0.005),
            },
            curves={"rates": np.tile(np.exp(-0.02 * m), (t, 1))},
            frequency="quarterly",
        )
        space = calibrate_probable_space(hist, four_factor_defs, alpha=0.9)
        np.testing.assert_allclose(space.lo, np.zeros(4), atol=0.0)
        np.testing.assert_allclose(space.hi, np.zeros(4), atol=0.0)

    def test_gaussian_sample_quantiles(self):
        # 1000 iid N(0, 0.1^2) stock outcomes: the 90% box should sit near
        # +/- 1.645 * 0.1, and must match the sort-based quantile exactly.
        rng = np.random.default_rng(123)
        n = 1000
        shocks = rng.normal(0.0, 0.1, n)
        levels = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(shocks)]))
        defs = [RiskFactorDef("stock", RiskFactorKind.STOCK_LEVEL)]
        hist = IndexHistory(
            dates=_dates(n + 1, step=91), levels={"stock": levels}, frequency="quarterly"
        )
        space = calibrate_probable_space(hist, defs, alpha=0.90)
        # sort-based oracle on the same outcome series
        outcomes = np.sort(np.log(levels[1:] / levels[:-1]))

        def sort_quantile(p):
            h = p * (n - 1)
            lo_i, frac = int(np.floor(h)), h - np.floor(h)
            hi_i = min(lo_i + 1, n - 1)
            return outcomes[lo_i] * (1 - frac) + outcomes[hi_i] * frac

        assert space.lo[0] == pytest.approx(sort_quantile(0.05), abs=1e-14)
        assert space.hi[0] == pytest.approx(sort_quantile(0.95), abs=1e-14)
        # sampling-error band around the normal quantiles (~0.013 at n=1000)
        assert space.lo[0] == pytest.approx(-0.1645, abs=0.02)
        assert space.hi[0] == pytest.approx(+0.1645, abs=0.02)

    def test_alpha_one_gives_min_max(self, synthetic_history, four_factor_defs):
        space = calibrate_probable_space(synthetic_history, four_factor_defs, alpha=1.0)
        for jx, d in enumerate(four_factor_defs):
            outcomes = factor_series(synthetic_history, d)
            assert space.lo[jx] == pytest.approx(outcomes.min(), abs=0.0)
            assert space.hi[jx] == pytest.approx(outcomes.max(), abs=0.0)

    def test_interval_widens_with_alpha(self, synthetic_history, four_factor_defs):
        alphas = [0.5, 0.7, 0.9, 0.99, 1.0]
        spaces = [calibrate_probable_space(synthetic_history, four_factor_defs, a) for a in alphas]
        for narrow, wide in zip(spaces, spaces[1:]):
            assert np.all(wide.lo <= narrow.lo + 1e-15)
            assert np.all(wide.hi >= narrow.hi - 1e-15)

    def test_too_short_history(self, four_factor_defs):
        t = 6
        m = np.arange(1, 11)
        hist = IndexHistory(
            dates=_dates(t, step=91),
            levels={
                "stock": np.full(t, 50.0),
                "spread_corp": np.full(t, 0.01),
                "spread_sov": np.full(t, 0.005),
            },
            curves={"rates": np.tile(np.exp(-0.02 * m), (t, 1))},
            frequency="quarterly",
        )
        with pytest.raises(CalibrationError):
            calibrate_probable_space(hist, four_factor_defs, alpha=0.9)


class TestSampling:
    def test_degenerate_box(self):
        space = ProbableSpace(("a", "b"), np.zeros(2), np.zeros(2), 0.9)
        out = sample_transitions(space, 25, seed=1)
        np.testing.assert_allclose(out, np.zeros((25, 2)), atol=0.0)

    def test_uniform_moments(self):
        space = ProbableSpace(("a",), np.array([-1.0]), np.array([1.0]), 0.9)
        out = sample_transitions(space, 10_000, seed=42)
        # CLT: mean of U(-1,1) has SE sqrt(1/3)/sqrt(n); allow 3 SE.
        assert abs(out.mean()) < 3.0 * math.sqrt(1.0 / 3.0 / 10_000)

    def test_determinism(self):
        space = ProbableSpace(("a", "b"), np.array([-1.0, 0.0]), np.array([1.0, 2.0]), 0.9)
        a = sample_transitions(space, 100, seed=7)
        b = sample_transitions(space, 100, seed=7)
        np.testing.assert_array_equal(a, b)

    @given(seed=st.integers(0, 2**31), n=st.integers(1, 200))
    @settings(max_examples=50, deadline=None)
    def test_samples_inside_box(self, seed, n):
        space = ProbableSpace(
            ("a", "b", "c"), np.array([-0.3, -0.01, 0.0]), np.array([0.2, 0.04, 0.0]), 0.9
        )
        out = sample_transitions(space, n, seed=seed)
        assert np.all(out >= space.lo) and np.all(out <= space.hi)


class TestOutOfSamplePath:
    def test_ten_step_construction(self):
        space = ProbableSpace(("stock",), np.array([-0.6]), np.array([0.5]), 0.9)
        path = out_of_sample_path(space, ["hi"], steps=10)
        np.testing.assert_allclose(path[:, 0], np.arange(1, 11) * 0.05, atol=1e-15)

    def test_endpoint_is_corner(self):
        space = ProbableSpace(
            ("a", "b"), np.array([-0.6, -0.02]), np.array([0.5, 0.03]), 0.9
        )
        path = out_of_sample_path(space, ["lo", "hi"], steps=7)
        np.testing.assert_allclose(path[-1], np.array([-0.6, 0.03]), atol=0.0)

    def test_midpoint_is_half_corner(self):
        space = ProbableSpace(
            ("a", "b"), np.array([-0.6, -0.02]), np.array([0.5, 0.03]), 0.9
        )
        path = out_of_sample_path(space, ["lo", "lo"], steps=10)
        np.testing.assert_allclose(path[4], np.array([-0.3, -0.01]), atol=1e-15)

    def test_collinearity(self):
        space = ProbableSpace(
            ("a", "b", "c"),
            np.array([-0.5, -0.1, -0.04]),
            np.array([0.4, 0.2, 0.02]),
            0.95,
        )
        path = out_of_sample_path(space, ["hi", "lo", "hi"], steps=9)
        corner = path[-1]
        for k in range(9):
            np.testing.assert_allclose(path[k], (k + 1) / 9.0 * corner, atol=1e-15)

    def test_bad_direction(self):
        space = ProbableSpace(("a",), np.array([-0.5]), np.array([0.4]), 0.95)
        with pytest.raises(ConfigError):
            out_of_sample_path(space, ["up"])


class TestCsvRoundTrip:
    def test_round_trip(self, tmp_path, synthetic_history):
        path = tmp_path / "history.csv"
        synthetic_history.to_csv(str(path))
        loaded = IndexHistory.from_csv(str(path), frequency="quarterly")
        assert loaded.dates == synthetic_history.dates
        for fid in synthetic_history.levels:
            np.testing.assert_array_equal(loaded.levels[fid], synthetic_history.levels[fid])
        for fid in synthetic_history.curves:
            np.testing.assert_array_equal(loaded.curves[fid], synthetic_history.curves[fid])

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(DataError):
            IndexHistory.from_csv(str(p))

    def test_quantile_convention(self):
        # interpolates between adjacent order statistics at p*(n-1)
        sample = np.array([1.0, 2.0, 3.0, 4.0])
        assert empirical_quantile(sample, 0.5) == pytest.approx(2.5)
        assert empirical_quantile(sample, 0.0) == 1.0
        assert empirical_quantile(sample, 1.0) == 4.0
        assert empirical_quantile(sample, 1.0 / 3.0) == pytest.approx(2.0)
