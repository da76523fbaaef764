import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mps.datasets import (CsvFormatError, DataMatrix, SyntheticSpec, gen_linear,
                          gen_motivating, load_csv, make_beta, standardize,
                          toeplitz_cov)

from conftest import write_csv


class TestLoadCsv:
    def test_minimal_two_row_file(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "y"], [[1.0, 2.0], [3.0, 4.0]])
        dm = load_csv(path, "y")
        assert (dm.n, dm.p) == (2, 1)
        assert dm.names == ["a"]
        assert not dm.standardized
        np.testing.assert_allclose(dm.y, [2.0, 4.0])

    def test_standardized_columns_hit_tolerances(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = np.column_stack([rng.normal(5, 3, 50), rng.uniform(0, 1, 50),
                                rng.normal(0, 1, 50)])
        path = write_csv(tmp_path / "t.csv", ["a", "b", "y"], rows)
        dm = load_csv(path, "y", standardize_columns=True)
        assert dm.standardized
        assert np.abs(dm.x.mean(axis=0)).max() < 1e-8
        assert np.abs(dm.x.std(axis=0) - 1.0).max() < 1e-6

    def test_second_order_expansion_with_binary_column_gives_64(self, tmp_path):
        # ten baseline covariates, one of them two-valued: squares skip it,
        # so 10 + 9 + C(10,2) = 64
        rng = np.random.default_rng(1)
        x = rng.normal(size=(30, 10))
        x[:, 1] = rng.integers(1, 3, 30)  # the binary column
        rows = np.column_stack([x, rng.normal(size=30)])
        header = [f"c{j}" for j in range(10)] + ["y"]
        dm = load_csv(write_csv(tmp_path / "t.csv", header, rows), "y",
                      expand_second_order=True)
        assert dm.p == 64
        assert "c1^2" not in dm.names
        assert "c0^2" in dm.names and "c0:c1" in dm.names

    def test_zero_variance_column_is_flagged_not_fatal(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "b", "y"],
                         [[1.0, 7.0, 0.0], [2.0, 7.0, 1.0], [3.0, 7.0, 2.0]])
        dm = load_csv(path, "y", standardize_columns=True)
        assert dm.constant_columns == (1,)
        np.testing.assert_allclose(dm.x[:, 1], 0.0)

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            load_csv("/nonexistent/file.csv", "y")

    def test_non_numeric_cell_reports_row_and_column(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,y\n1.0,2.0\nfoo,3.0\n")
        with pytest.raises(CsvFormatError, match=r"row 3.*column 'a'"):
            load_csv(path, "y")

    def test_duplicate_columns_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,a,y\n1,2,3\n4,5,6\n")
        with pytest.raises(CsvFormatError, match="duplicate"):
            load_csv(path, "y")

    def test_missing_response_rejected(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "y"], [[1, 2], [3, 4]])
        with pytest.raises(CsvFormatError, match="response"):
            load_csv(path, "z")


class TestToeplitz:
    def test_rho_zero_is_identity(self):
        np.testing.assert_array_equal(toeplitz_cov(3, 0.0), np.eye(3))

    def test_two_by_two(self):
        np.testing.assert_allclose(toeplitz_cov(2, 0.35),
                                   [[1.0, 0.35], [0.35, 1.0]])

    def test_corner_entry_is_rho_cubed(self):
        assert toeplitz_cov(4, 0.7)[0, 3] == pytest.approx(0.343)

    @pytest.mark.parametrize("rho", [0.0, 0.35, 0.7, 0.9, 0.99])
    @pytest.mark.parametrize("p", [2, 50, 200])
    def test_symmetric_positive_definite(self, p, rho):
        sigma = toeplitz_cov(p, rho)
        np.testing.assert_array_equal(sigma, sigma.T)
        assert np.linalg.eigvalsh(sigma).min() > 0.0

    def test_invalid_rho(self):
        with pytest.raises(ValueError):
            toeplitz_cov(3, 1.0)
        with pytest.raises(ValueError):
            toeplitz_cov(3, -0.1)


class TestMakeBeta:
    def test_type2_first_positions(self):
        np.testing.assert_array_equal(make_beta(10, 5, 2),
                                      [1, 1, 1, 1, 1, 0, 0, 0, 0, 0])

    def test_type3_arithmetic_sequence(self):
        np.testing.assert_allclose(
            make_beta(10, 5, 3),
            [10.0, 7.625, 5.25, 2.875, 0.5, 0, 0, 0, 0, 0])

    @pytest.mark.parametrize("beta_type", [1, 2, 3])
    def test_single_signal_degenerate_spacing(self, beta_type):
        beta = make_beta(5, 1, beta_type)
        assert np.count_nonzero(beta) == 1

    def test_type1_spans_full_range(self):
        beta = make_beta(10, 5, 1)
        nz = np.flatnonzero(beta)
        assert nz[0] == 0 and nz[-1] == 9
        assert np.count_nonzero(beta) == 5

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 40), st.integers(1, 40), st.sampled_from([1, 2, 3]))
    def test_exactly_s_nonzeros(self, p, s, beta_type):
        if s > p:
            with pytest.raises(ValueError):
                make_beta(p, s, beta_type)
            return
        assert np.count_nonzero(make_beta(p, s, beta_type)) == s


class TestGenLinear:
    def test_noise_variance_matches_signal_over_snr(self):
        spec = SyntheticSpec(n=50_000, p=10, s=5, rho=0.0, snr=1.0,
                             beta_type=2, seed=0)
        pair = gen_linear(spec, 10)
        resid = pair.train.y - pair.train.x @ pair.beta_true
        assert resid.var() == pytest.approx(5.0, rel=0.05)

    def test_noiseless_limit(self):
        spec = SyntheticSpec(n=2_000, p=10, s=5, rho=0.0, snr=1e12,
                             beta_type=2, seed=0)
        pair = gen_linear(spec, 10)
        signal = pair.train.x @ pair.beta_true
        assert np.corrcoef(pair.train.y, signal)[0, 1] > 0.999

    def test_bit_identical_reproducibility(self):
        spec = SyntheticSpec(n=100, p=10, s=5, rho=0.35, snr=2.0,
                             beta_type=1, seed=77)
        a, b = gen_linear(spec, 200), gen_linear(spec, 200)
        np.testing.assert_array_equal(a.train.x, b.train.x)
        np.testing.assert_array_equal(a.train.y, b.train.y)
        np.testing.assert_array_equal(a.test.x, b.test.x)

    def test_empirical_covariance_matches_sigma(self):
        spec = SyntheticSpec(n=50_000, p=8, s=3, rho=0.7, snr=1.0,
                             beta_type=2, seed=3)
        pair = gen_linear(spec, 10)
        emp = np.cov(pair.train.x, rowvar=False)
        assert np.abs(emp - toeplitz_cov(8, 0.7)).max() < 0.03

    def test_achieved_snr_within_ten_percent(self):
        spec = SyntheticSpec(n=50_000, p=10, s=5, rho=0.35, snr=2.0,
                             beta_type=3, seed=5)
        pair = gen_linear(spec, 10)
        signal = pair.train.x @ pair.beta_true
        resid = pair.train.y - signal
        assert signal.var() / resid.var() == pytest.approx(2.0, rel=0.10)

    def test_train_test_sizes(self):
        spec = SyntheticSpec(n=100, p=10, s=5, rho=0.0, snr=4.0,
                             beta_type=2, seed=0)
        pair = gen_linear(spec, 321)
        assert pair.train.n == 100 and pair.test.n == 321

    def test_spec_json_round_trip(self):
        spec = SyntheticSpec(n=100, p=10, s=5, rho=0.35, snr=0.25,
                             beta_type=3, seed=9)
        assert SyntheticSpec.from_json(spec.to_json()) == spec


class TestGenMotivating:
    def test_coefficient_vector(self):
        pair = gen_motivating(100, 10.0, 0, n_test=10)
        np.testing.assert_array_equal(
            pair.beta_true, [3, 3, 3, 2, 2, 2, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0])

    def test_within_group_correlation(self):
        pair = gen_motivating(10_000, 10.0, 1, n_test=10)
        x = pair.train.x
        assert np.corrcoef(x[:, 0], x[:, 1])[0, 1] == pytest.approx(0.9, abs=0.02)

    def test_between_group_independence(self):
        pair = gen_motivating(10_000, 10.0, 1, n_test=10)
        x = pair.train.x
        assert abs(np.corrcoef(x[:, 0], x[:, 3])[0, 1]) < 0.03


class TestDataMatrix:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="non-finite"):
            DataMatrix(np.array([[1.0], [np.nan]]), np.zeros(2), ["a"])

    def test_rejects_duplicate_names(self):
        with pytest.raises(ValueError, match="duplicate"):
            DataMatrix(np.ones((2, 2)) * [[1, 2], [3, 4]], np.zeros(2), ["a", "a"])

    def test_standardization_invariant_enforced(self):
        x = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        with pytest.raises(ValueError, match="standardization"):
            DataMatrix(x, np.zeros(3), ["a", "b"], standardized=True)
        xs, *_ , const = standardize(x)
        DataMatrix(xs, np.zeros(3), ["a", "b"], standardized=True,
                   constant_columns=const)
