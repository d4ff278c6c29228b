"""Proxy tests: candidate sets, least squares, selection, calibration."""

import itertools
import time

import numpy as np
import pytest

from solvmon.errors import CalibrationError, DomainError, FitError
from solvmon.proxy import (
    MonomialSpec,
    aic,
    build_design,
    calibrate_cf,
    calibrate_lsmc,
    candidate_regressors,
    evaluate,
    ols_fit,
    stepwise_select,
    validate,
)


def brute_force_candidates(j, cap):
    """Independent enumeration: every exponent tuple with <= 2 active factors."""
    out = set()
    for combo in itertools.product(range(cap + 1), repeat=j):
        active = sum(1 for e in combo if e > 0)
        if 1 <= sum(combo) <= cap and active <= 2:
            out.add(combo)
    return out


class TestCandidateRegressors:
    def test_one_factor(self):
        cands = candidate_regressors(1, 3)
        assert [m.exponents for m in cands] == [(1,), (2,), (3,)]

    def test_two_factors_nine_candidates(self):
        cands = candidate_regressors(2, 3)
        assert len(cands) == 9
        assert {m.exponents for m in cands} == brute_force_candidates(2, 3)

    @pytest.mark.parametrize("j,cap", [(1, 3), (2, 3), (3, 2), (4, 3), (5, 4)])
    def test_matches_brute_force(self, j, cap):
        cands = candidate_regressors(j, cap)
        assert len(cands) == len(set(cands))  # deduplicated
        assert {m.exponents for m in cands} == brute_force_candidates(j, cap)

    def test_four_factors_cap_three_count(self):
        assert len(candidate_regressors(4, 3)) == 30

    def test_deterministic_order(self):
        assert candidate_regressors(3, 3) == candidate_regressors(3, 3)


class TestBuildDesign:
    def test_zero_transition_row(self):
        monos = candidate_regressors(3, 3)
        row = build_design(np.zeros((1, 3)), monos)[0]
        assert row[0] == 1.0
        np.testing.assert_array_equal(row[1:], np.zeros(len(monos)))

    def test_simple_powers(self):
        monos = [MonomialSpec((1,)), MonomialSpec((2,))]
        row = build_design(np.array([[2.0]]), monos)[0]
        np.testing.assert_array_equal(row, [1.0, 2.0, 4.0])

    def test_random_batch_elementwise_oracle(self):
        rng = np.random.default_rng(0)
        eps = rng.normal(0, 1, (20, 4))
        monos = candidate_regressors(4, 3)
        x = build_design(eps, monos)
        for i in range(20):
            for k, mono in enumerate(monos):
                expected = 1.0
                for j, e in enumerate(mono.exponents):
                    expected *= eps[i, j] ** e
                assert x[i, k + 1] == pytest.approx(expected, rel=1e-14)


class TestOlsFit:
    def test_exact_recovery_noiseless(self):
        rng = np.random.default_rng(1)
        eps = rng.uniform(-1, 1, (400, 2))
        monos = candidate_regressors(2, 3)
        x = build_design(eps, monos)
        beta_true = rng.normal(0, 5, x.shape[1])
        fit = ols_fit(x, x @ beta_true)
        np.testing.assert_allclose(fit.beta, beta_true, rtol=1e-10)

    def test_intercept_only_classical_identities(self):
        rng = np.random.default_rng(2)
        y = rng.normal(3.0, 2.0, 101)
        fit = ols_fit(np.ones((101, 1)), y)
        assert fit.beta[0] == pytest.approx(y.mean(), rel=1e-13)
        assert fit.sigma2 == pytest.approx(y.var(ddof=1), rel=1e-12)

    def test_heteroskedastic_matches_extended_precision_solve(self):
        rng = np.random.default_rng(3)
        eps = rng.uniform(-1, 1, (500, 2))
        monos = candidate_regressors(2, 2)
        x = build_design(eps, monos)
        y = x @ rng.normal(0, 1, x.shape[1]) + rng.normal(0, 1, 500) * (1 + eps[:, 0] ** 2)
        fit = ols_fit(x, y)
        xl, yl = x.astype(np.longdouble), y.astype(np.longdouble)
        direct = np.linalg.solve((xl.T @ xl).astype(float), (xl.T @ yl).astype(float))
        np.testing.assert_allclose(fit.beta, direct, rtol=1e-9)

    def test_residual_orthogonality_and_reconstruction(self):
        rng = np.random.default_rng(4)
        eps = rng.uniform(-1, 1, (300, 3))
        x = build_design(eps, candidate_regressors(3, 3))
        y = rng.normal(0, 1, 300)
        fit = ols_fit(x, y)
        gram = np.abs(x.T @ fit.residuals)
        np.testing.assert_array_less(gram, 1e-8 * np.linalg.norm(x, axis=0) * np.linalg.norm(y))
        np.testing.assert_allclose(x @ fit.beta + fit.residuals, y, rtol=1e-12)

    def test_rank_deficiency_raises(self):
        eps = np.ones((50, 1))  # constant factor duplicates the intercept
        x = build_design(eps, [MonomialSpec((1,))])
        with pytest.raises(FitError):
            ols_fit(x, np.zeros(50))

    def test_underdetermined_raises(self):
        x = build_design(np.random.default_rng(5).normal(0, 1, (3, 2)), candidate_regressors(2, 3))
        with pytest.raises(FitError):
            ols_fit(x, np.zeros(3))


class TestStepwise:
    def test_selects_only_active_factor(self):
        rng = np.random.default_rng(6)
        eps = rng.uniform(-1, 1, (4000, 2))
        monos = [MonomialSpec((1, 0)), MonomialSpec((0, 1))]
        x = build_design(eps, monos)
        y = 2.0 + 3.0 * eps[:, 0] + rng.normal(0, 0.5, 4000)
        selected, idx, trace = stepwise_select(x, y, monos)
        assert [m.exponents for m in selected] == [(1, 0)]
        # exhaustive best-subset oracle over all 4 subsets
        best_aic, best_subset = np.inf, None
        for r in range(3):
            for subset in itertools.combinations(range(2), r):
                cols = [0] + [1 + s for s in subset]
                fit = ols_fit(x[:, cols], y)
                a = aic(4000, fit.ssr, len(subset))
                if a < best_aic:
                    best_aic, best_subset = a, subset
        assert best_subset == tuple(idx)

    def test_pure_noise_shrinks_toward_intercept(self):
        sizes = []
        for seed in range(40):
            rng = np.random.default_rng(1000 + seed)
            eps = rng.uniform(-1, 1, (500, 2))
            monos = [MonomialSpec((1, 0)), MonomialSpec((0, 1))]
            x = build_design(eps, monos)
            y = rng.normal(0, 1, 500)
            selected, _, _ = stepwise_select(x, y, monos)
            sizes.append(len(selected))
        assert sum(1 for s in sizes if s == 0) >= 20  # mostly intercept-only
        assert np.mean(sizes) < 1.0

    def test_aic_decreases_along_path(self):
        rng = np.random.default_rng(7)
        eps = rng.uniform(-1, 1, (600, 3))
        monos = candidate_regressors(3, 3)
        x = build_design(eps, monos)
        y = 1.0 + eps[:, 0] - 2.0 * eps[:, 1] ** 2 + rng.normal(0, 0.3, 600)
        _, _, trace = stepwise_select(x, y, monos)
        assert all(b < a for a, b in zip(trace, trace[1:]))

    def test_removal_order_deterministic(self):
        rng = np.random.default_rng(8)
        eps = rng.uniform(-1, 1, (300, 2))
        monos = candidate_regressors(2, 3)
        x = build_design(eps, monos)
        y = eps[:, 0] + rng.normal(0, 1.0, 300)
        runs = [stepwise_select(x, y, monos) for _ in range(3)]
        assert all(r[1] == runs[0][1] for r in runs)
        assert all(r[2] == runs[0][2] for r in runs)


def cubic_response(coeffs, monos):
    """Synthetic NAV: fixed cubic polynomial plus optional evaluation noise."""

    def fn(transitions, p, seed, noise=0.0):
        x = build_design(transitions, monos)
        clean = x @ coeffs
        if noise == 0.0:
            return np.tile(clean[:, None], (1, p))
        rng = np.random.default_rng(seed)
        return clean[:, None] + rng.normal(0, noise, (transitions.shape[0], p))

    return fn


class TestCalibration:
    def test_lsmc_desk_scale_shape_and_runtime(self):
        rng = np.random.default_rng(9)
        eps = rng.uniform(-1, 1, (5000, 4))
        monos = candidate_regressors(4, 3)
        coeffs = np.concatenate([[100.0], rng.normal(0, 10, 30)])
        fn = cubic_response(coeffs, monos)
        noisy = lambda t, p, s: fn(t, p, s, noise=5.0)
        start = time.time()
        model = calibrate_lsmc(eps, noisy, seed=0)
        elapsed = time.time() - start
        assert len(model.beta_hat) <= 31
        assert model.method == "LSMC"
        assert model.n_primary == 5000 and model.p_secondary == 1
        assert elapsed < 30.0

    def test_zero_noise_cubic_recovered_exactly(self):
        rng = np.random.default_rng(10)
        eps = rng.uniform(-1, 1, (200, 2))
        monos = candidate_regressors(2, 3)
        coeffs = np.array([50.0, 3.0, -2.0, 1.0, 0.5, -1.5, 0.8, 2.0, -0.7, 0.4])
        model = calibrate_lsmc(eps, cubic_response(coeffs, monos), seed=1)
        fitted = model.evaluate_batch(eps)
        truth = build_design(eps, monos) @ coeffs
        ss_res = float(np.sum((truth - fitted) ** 2))
        ss_tot = float(np.sum((truth - truth.mean()) ** 2))
        assert 1.0 - ss_res / ss_tot > 1.0 - 1e-12

    def test_same_seed_identical_beta(self):
        rng = np.random.default_rng(11)
        eps = rng.uniform(-1, 1, (300, 2))
        monos = candidate_regressors(2, 3)
        fn = cubic_response(np.concatenate([[10.0], np.ones(9)]), monos)
        noisy = lambda t, p, s: fn(t, p, s, noise=1.0)
        m1 = calibrate_lsmc(eps, noisy, seed=42)
        m2 = calibrate_lsmc(eps, noisy, seed=42)
        np.testing.assert_array_equal(m1.beta_hat, m2.beta_hat)

    def test_too_few_transitions(self):
        eps = np.random.default_rng(12).uniform(-1, 1, (20, 4))
        with pytest.raises(CalibrationError):
            calibrate_lsmc(eps, lambda t, p, s: np.zeros((20, 1)), seed=0)

    def test_cf_with_p_one_degenerates_to_lsmc(self):
        rng = np.random.default_rng(13)
        eps = rng.uniform(-1, 1, (300, 2))
        monos = candidate_regressors(2, 3)
        fn = cubic_response(np.concatenate([[10.0], np.ones(9)]), monos)
        noisy = lambda t, p, s: fn(t, p, s, noise=1.0)
        lsmc = calibrate_lsmc(eps, noisy, seed=7)
        cf = calibrate_cf(eps, 1, noisy, lsmc.monomials, seed=7)
        np.testing.assert_allclose(cf.beta_hat, lsmc.beta_hat, rtol=1e-12)
        np.testing.assert_allclose(cf.residuals, lsmc.residuals, atol=1e-12)

    def test_cf_and_lsmc_recover_shared_truth(self):
        # both estimate the same coefficients; check each against the truth
        # within three reported standard errors
        rng = np.random.default_rng(14)
        monos = candidate_regressors(2, 3)
        coeffs = np.concatenate([[1000.0], rng.normal(0, 50, 9)])
        fn = cubic_response(coeffs, monos)
        noisy = lambda t, p, s: fn(t, p, s, noise=30.0)
        eps_lsmc = rng.uniform(-1, 1, (5000, 2))
        eps_cf = rng.uniform(-1, 1, (100, 2))
        lsmc = calibrate_lsmc(eps_lsmc, noisy, seed=3)
        cf = calibrate_cf(eps_cf, 50, noisy, candidate_regressors(2, 3), seed=4)
        se_cf = np.sqrt(np.diag(cf.cov_homo.matrix))
        np.testing.assert_array_less(np.abs(cf.beta_hat - coeffs), 3.5 * se_cf)
        idx = [0] + [1 + candidate_regressors(2, 3).index(m) for m in lsmc.monomials]
        se_lsmc = np.sqrt(np.diag(lsmc.cov_homo.matrix))
        np.testing.assert_array_less(np.abs(lsmc.beta_hat - coeffs[idx]), 3.5 * se_lsmc + 1e-9)

    def test_paper_protocol_shape(self):
        rng = np.random.default_rng(15)
        monos = candidate_regressors(4, 3)
        coeffs = np.concatenate([[500.0], rng.normal(0, 5, 30)])
        fn = cubic_response(coeffs, monos)
        noisy = lambda t, p, s: fn(t, p, s, noise=10.0)
        eps = rng.uniform(-1, 1, (100, 4))
        model = calibrate_cf(eps, 500, noisy, monos, seed=5)
        assert model.n_primary == 100 and model.p_secondary == 500
        assert model.method == "CF"


class TestEvaluate:
    @pytest.fixture
    def linear_model(self):
        rng = np.random.default_rng(16)
        eps = rng.uniform(-1, 1, (200, 1))
        monos = [MonomialSpec((1,))]
        fn = cubic_response(np.array([5.0, 2.0]), monos)
        return calibrate_cf(eps, 1, fn, monos, seed=0)

    def test_zero_vector_gives_intercept(self, linear_model):
        assert evaluate(linear_model, np.zeros(1)) == pytest.approx(
            linear_model.beta_hat[0], rel=1e-12
        )

    def test_linearity(self, linear_model):
        for v in (-0.5, 0.0, 1.2):
            expected = linear_model.beta_hat[0] + linear_model.beta_hat[1] * v
            assert evaluate(linear_model, np.array([v])) == pytest.approx(expected, rel=1e-12)

    def test_batch_matches_single(self, linear_model):
        eps = np.linspace(-1, 1, 17)[:, None]
        batch = linear_model.evaluate_batch(eps)
        singles = [evaluate(linear_model, row) for row in eps]
        np.testing.assert_allclose(batch, singles, rtol=1e-14)

    def test_no_contribution_above_degree_cap(self):
        # fourth finite difference of a cubic is identically zero
        rng = np.random.default_rng(17)
        eps = rng.uniform(-1, 1, (400, 2))
        monos = candidate_regressors(2, 3)
        fn = cubic_response(np.concatenate([[1.0], rng.normal(0, 1, 9)]), monos)
        model = calibrate_cf(eps, 1, fn, monos, seed=0)
        hgrid = np.arange(5) * 0.37
        vals = np.array([evaluate(model, np.array([v, 0.3])) for v in hgrid])
        fourth_diff = np.diff(vals, n=4)
        assert abs(fourth_diff[0]) < 1e-7 * max(1.0, np.abs(vals).max())


class TestValidateAndPersistence:
    def test_proxy_equals_full_calc(self):
        rng = np.random.default_rng(18)
        eps = rng.uniform(-1, 1, (100, 2))
        monos = candidate_regressors(2, 3)
        fn = cubic_response(np.concatenate([[10.0], np.ones(9)]), monos)
        model = calibrate_cf(eps, 1, fn, monos, seed=0)
        scen = rng.uniform(-1, 1, (10, 2))
        report = validate(model, scen, model.evaluate_batch(scen))
        np.testing.assert_allclose(report.deviations, np.zeros(10), atol=1e-14)

    def test_zero_full_value_flagged(self):
        rng = np.random.default_rng(19)
        eps = rng.uniform(-1, 1, (50, 1))
        monos = [MonomialSpec((1,))]
        model = calibrate_cf(eps, 1, cubic_response(np.array([1.0, 1.0]), monos), monos, seed=0)
        report = validate(model, np.array([[0.5], [0.2]]), np.array([1.5, 0.0]))
        assert not report.undefined[0] and report.undefined[1]
        assert np.isnan(report.deviations[1])

    def test_json_round_trip(self):
        rng = np.random.default_rng(20)
        eps = rng.uniform(-1, 1, (120, 2))
        monos = candidate_regressors(2, 2)
        fn = cubic_response(np.concatenate([[7.0], np.ones(5)]), monos)
        noisy = lambda t, p, s: fn(t, p, s, noise=0.5)
        model = calibrate_lsmc(eps, noisy, seed=2, degree_cap=2, shock_id="spread")
        from solvmon.proxy import ProxyModel

        clone = ProxyModel.from_json(model.to_json())
        np.testing.assert_array_equal(clone.beta_hat, model.beta_hat)
        assert clone.monomials == model.monomials
        assert clone.shock_id == "spread"
        np.testing.assert_array_equal(clone.cov_white.matrix, model.cov_white.matrix)
        assert clone.to_json() == model.to_json()
