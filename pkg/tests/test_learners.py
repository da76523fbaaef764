import itertools

import numpy as np
import pytest

from mps.datasets import DataMatrix, SyntheticSpec, gen_linear, gen_motivating
from mps.learners import (FittedModel, ModelClass, _coordinate_descent,
                          best_next_covariate, cv_forward_depth, fit,
                          forward_select, lasso_cv, loss, oracle_fit)
from mps.tree import count_leaves

OLS = ModelClass("ols")


def _dm(x, y):
    return DataMatrix(x, y, [f"x{j + 1}" for j in range(x.shape[1])])


class TestFit:
    def test_ols_exact_line(self):
        x = np.linspace(-2, 2, 20)[:, None]
        model = fit(OLS, _dm(x, 2.0 * x[:, 0]), [0])
        assert model.coef[0] == pytest.approx(2.0, abs=1e-10)
        assert model.intercept == pytest.approx(0.0, abs=1e-10)

    def test_null_model_is_mean(self):
        rng = np.random.default_rng(0)
        y = rng.normal(3.0, 1.0, 50)
        model = fit(OLS, _dm(rng.normal(size=(50, 2)), y), [])
        assert model.intercept == pytest.approx(y.mean())
        assert model.covariates == ()

    def test_rank_deficient_design_is_finite(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(5, 8))  # more columns than rows
        model = fit(OLS, _dm(x, rng.normal(size=5)), list(range(8)))
        assert np.isfinite(model.coef).all()

    def test_tree_depth_one_recovers_sign(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((1000, 1))
        y = np.sign(x[:, 0])
        model = fit(ModelClass("tree", tree_max_depth=1), _dm(x, y), [0])
        node = model.tree
        assert abs(node["threshold"]) < 0.1
        assert node["left"]["value"] == pytest.approx(-1.0, abs=0.05)
        assert node["right"]["value"] == pytest.approx(1.0, abs=0.05)

    def test_tree_leaf_count_bounded(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((200, 3))
        y = rng.standard_normal(200)
        for depth in (1, 2, 3):
            model = fit(ModelClass("tree", tree_max_depth=depth, tree_min_leaf=2),
                        _dm(x, y), [0, 1, 2])
            assert count_leaves(model.tree) <= 2 ** depth

    def test_logistic_separation_is_clamped(self):
        x = np.linspace(-1, 1, 40)[:, None]
        y = (x[:, 0] > 0).astype(float)
        model = fit(ModelClass("logistic"), _dm(x, y), [0])
        assert np.abs(model.coef).max() <= 30.0
        assert loss(model, _dm(x, y)) < 0.01

    def test_logistic_deviance_monotone_until_tolerance(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((200, 2))
        eta = 0.8 * x[:, 0] - 0.5 * x[:, 1]
        y = (rng.random(200) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
        dm = _dm(x, y)

        def deviance(model):
            p = np.clip(model.predict(x), 1e-12, 1 - 1e-12)
            return -2.0 * float(y @ np.log(p) + (1 - y) @ np.log(1 - p))

        devs, clamped = [], []
        for k in range(1, 9):
            model = fit(ModelClass("logistic", logistic_max_iter=k), dm, [0, 1])
            devs.append(deviance(model))
            clamped.append(np.abs(model.coef).max() >= 30.0
                           or abs(model.intercept) >= 30.0)
        for a, b, was_clamped in zip(devs, devs[1:], clamped):
            if not was_clamped:
                assert b <= a + 1e-9


class TestLoss:
    def test_perfect_fit_zero(self):
        x = np.linspace(0, 1, 10)[:, None]
        dm = _dm(x, 3.0 * x[:, 0] + 1.0)
        assert loss(fit(OLS, dm, [0]), dm) == pytest.approx(0.0, abs=1e-20)

    def test_null_model_gives_biased_variance(self):
        rng = np.random.default_rng(0)
        y = rng.normal(size=40)
        dm = _dm(rng.normal(size=(40, 1)), y)
        assert loss(fit(OLS, dm, []), dm) == pytest.approx(y.var())  # /n variance

    def test_true_coefficients_on_fresh_test_give_noise_variance(self):
        spec = SyntheticSpec(n=100, p=10, s=5, rho=0.0, snr=1.0,
                             beta_type=2, seed=6)
        pair = gen_linear(spec, 50_000)
        model = FittedModel(OLS, tuple(range(10)), intercept=0.0,
                            coef=pair.beta_true)
        assert loss(model, pair.test) == pytest.approx(5.0, rel=0.10)

    def test_out_of_range_covariate(self):
        model = FittedModel(OLS, (5,), intercept=0.0, coef=np.array([1.0]))
        with pytest.raises(IndexError):
            model.predict(np.zeros((3, 2)))


class TestBestNextCovariate:
    def test_exact_predictor_wins(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((50, 3))
        dm = _dm(x, x[:, 2].copy())
        assert best_next_covariate(OLS, dm, [], [0, 1, 2]) == 2

    def test_duplicate_columns_tie_break_to_smaller_index(self):
        rng = np.random.default_rng(1)
        sig = rng.standard_normal(60)
        x = np.column_stack([rng.standard_normal(60), sig, sig.copy()])
        dm = _dm(x, sig + 0.1 * rng.standard_normal(60))
        assert best_next_covariate(OLS, dm, [], [0, 1, 2]) == 1

    def test_invariant_to_candidate_order(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((40, 5))
        dm = _dm(x, x @ np.array([1.0, 0.5, 0, 0, 0.2]) + rng.standard_normal(40))
        winners = {best_next_covariate(OLS, dm, [1], list(order))
                   for order in itertools.permutations([0, 2, 3, 4])}
        assert len(winners) == 1

    def test_degenerate_candidates_rejected(self):
        x = np.column_stack([np.ones(20), np.full(20, 3.0)])
        dm = _dm(x, np.arange(20.0))
        with pytest.raises(ValueError, match="no admissible covariate"):
            best_next_covariate(OLS, dm, [], [0, 1])

    def test_grouped_data_first_pick_is_group_one(self):
        hits = 0
        for seed in range(100):
            pair = gen_motivating(500, 10.0, seed, n_test=10)
            if best_next_covariate(OLS, pair.train, [], list(range(18))) < 3:
                hits += 1
        assert hits >= 95


class TestForwardSelect:
    def test_full_depth_is_permutation(self):
        rng = np.random.default_rng(3)
        dm = _dm(rng.standard_normal((30, 6)), rng.standard_normal(30))
        assert sorted(forward_select(OLS, dm, 6)) == list(range(6))

    def test_training_loss_non_increasing_in_depth(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            dm = _dm(rng.standard_normal((20, 6)), rng.standard_normal(20))
            path = forward_select(OLS, dm, 6)
            losses = [loss(fit(OLS, dm, path[:k]), dm) for k in range(7)]
            assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_high_snr_support_recovery(self):
        hits = 0
        for seed in range(50):
            spec = SyntheticSpec(n=100, p=10, s=5, rho=0.0, snr=4.0,
                                 beta_type=2, seed=seed)
            pair = gen_linear(spec, 10)
            if sorted(forward_select(OLS, pair.train, 5)) == [0, 1, 2, 3, 4]:
                hits += 1
        assert hits >= 45  # 90% of 50 seeds


class TestLasso:
    def test_lambda_max_zeroes_everything(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((60, 8))
        y = x @ np.array([2.0, -1.0] + [0.0] * 6) + rng.standard_normal(60)
        xc = x - x.mean(axis=0)
        yc = y - y.mean()
        lam_max = np.abs(xc.T @ yc).max() / 60
        colsq = (xc * xc).sum(axis=0) / 60
        beta = _coordinate_descent(xc, yc, np.zeros(8), lam_max, colsq, 10_000, 1e-7)
        np.testing.assert_allclose(beta, 0.0, atol=1e-12)

    def test_orthonormal_design_matches_soft_threshold(self):
        rng = np.random.default_rng(1)
        n, p = 64, 6
        # columns orthonormal in the 1/n inner product AND orthogonal to the
        # constant vector, so centering leaves them untouched
        q, _ = np.linalg.qr(np.column_stack([np.ones(n),
                                             rng.standard_normal((n, p))]))
        x = q[:, 1:] * np.sqrt(n)
        y = rng.standard_normal(n)
        xc = x - x.mean(axis=0)
        yc = y - y.mean()
        z = xc.T @ yc / n
        colsq = (xc * xc).sum(axis=0) / n
        lam_max = np.abs(z).max()
        for lam in np.geomspace(lam_max, 1e-3 * lam_max, 100):
            beta = _coordinate_descent(xc, yc, np.zeros(p), lam, colsq,
                                       10_000, 1e-9)
            oracle = np.sign(z) * np.maximum(np.abs(z) - lam, 0.0) / colsq
            np.testing.assert_allclose(beta, oracle, atol=1e-6)

    def test_pure_noise_selects_nearly_nothing(self):
        sparse_runs = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            dm = _dm(rng.standard_normal((100, 10)), rng.standard_normal(100))
            model = lasso_cv(dm, seed=seed)
            if len(model.covariates) <= 2:
                sparse_runs += 1
        assert sparse_runs >= 8

    def test_recovers_strong_signal(self):
        spec = SyntheticSpec(n=200, p=10, s=2, rho=0.0, snr=8.0,
                             beta_type=2, seed=4)
        pair = gen_linear(spec, 10)
        model = lasso_cv(pair.train, seed=0)
        assert {0, 1}.issubset(set(model.covariates))

    def test_non_convergence_reports_lambda(self):
        rng = np.random.default_rng(5)
        base = rng.standard_normal(80)
        x = np.column_stack([base + 1e-4 * rng.standard_normal(80)
                             for _ in range(4)])
        y = base + 0.01 * rng.standard_normal(80)
        xc = x - x.mean(axis=0)
        yc = y - y.mean()
        colsq = (xc * xc).sum(axis=0) / 80
        with pytest.raises(RuntimeError, match="lambda="):
            _coordinate_descent(xc, yc, np.zeros(4), 1e-6, colsq,
                                max_sweeps=1, tol=1e-12)


class TestOracleAndCv:
    def test_oracle_uses_true_support(self):
        spec = SyntheticSpec(n=100, p=10, s=5, rho=0.0, snr=4.0,
                             beta_type=2, seed=0)
        pair = gen_linear(spec, 10)
        assert oracle_fit(pair.train, pair.beta_true).covariates == (0, 1, 2, 3, 4)

    def test_oracle_full_support(self):
        spec = SyntheticSpec(n=100, p=5, s=5, rho=0.0, snr=4.0,
                             beta_type=2, seed=0)
        pair = gen_linear(spec, 10)
        assert oracle_fit(pair.train, pair.beta_true).covariates == (0, 1, 2, 3, 4)

    def test_oracle_zero_beta_gives_null_model(self):
        rng = np.random.default_rng(0)
        dm = _dm(rng.standard_normal((30, 4)), rng.standard_normal(30))
        model = oracle_fit(dm, np.zeros(4))
        assert model.covariates == ()

    def test_cv_depth_in_range_and_deterministic(self):
        spec = SyntheticSpec(n=150, p=8, s=2, rho=0.0, snr=8.0,
                             beta_type=2, seed=2)
        pair = gen_linear(spec, 10)
        d1 = cv_forward_depth(pair.train, max_depth=6, seed=0)
        d2 = cv_forward_depth(pair.train, max_depth=6, seed=0)
        assert d1 == d2 and 1 <= d1 <= 6


class TestFittedModelJson:
    def test_linear_round_trip_fields(self):
        model = FittedModel(OLS, (0, 2), intercept=1.5, coef=np.array([2.0, -1.0]))
        text = model.to_json(names=["a", "b", "c"])
        assert '"covariates": ["a", "c"]' in text
        assert '"intercept": 1.5' in text
