import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.signal import lfilter

from swr.autocorr import (
    ArModel,
    _restore_intercept,
    cochrane_orcutt_transform,
    durbin_watson,
    fit_ar,
    fit_with_autocorr,
    smallest_root,
    transform_pair,
)
from swr.errors import DataError, StationarityError
from swr.model import SwrModel, residuals
from swr.sim import ErrorProcess, SimSetup, SyntheticInput, generate
from swr.train import TrainConfig, fit


def ar_noise(phi, n, seed):
    innovations = np.random.default_rng(seed).normal(0.0, 1.0, n)
    return lfilter([1.0], np.concatenate([[1.0], -np.asarray(phi)]), innovations)


class TestDurbinWatson(object):
    def test_alternating_signs(self):
        assert_allclose(durbin_watson([1.0, -1.0, 1.0, -1.0], n_boot=10).statistic, 3.0)

    def test_constant_residuals(self):
        result = durbin_watson([1.0, 1.0, 1.0, 1.0], n_boot=10)
        assert result.statistic == 0.0
        assert result.p_value == 1.0

    def test_statistic_range(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            d = durbin_watson(rng.normal(size=30) * rng.uniform(0.1, 10.0), n_boot=10).statistic
            assert 0.0 <= d <= 4.0

    def test_white_noise_passes(self):
        outcomes = [durbin_watson(np.random.default_rng(seed).normal(size=500), n_boot=200, seed=seed)
                    for seed in range(50)]
        assert sum(r.p_value > 0.1 for r in outcomes) >= 35
        assert sum(1.8 <= r.statistic <= 2.2 for r in outcomes) >= 45

    def test_ar_noise_fails(self):
        result = durbin_watson(ar_noise([0.6], 500, seed=1), n_boot=200)
        assert result.p_value < 0.01
        assert result.statistic < 1.2

    def test_seeded(self):
        errors = np.random.default_rng(3).normal(size=100)
        assert durbin_watson(errors, n_boot=100, seed=9) == durbin_watson(errors, n_boot=100, seed=9)

    def test_statistic_formula(self):
        errors = np.random.default_rng(4).normal(size=200)
        expected = np.sum(np.diff(errors) ** 2) / np.sum(errors ** 2)
        assert_allclose(durbin_watson(errors, n_boot=10).statistic, expected)

    def test_chunked_permutations(self):
        errors = np.random.default_rng(6).normal(size=300)
        whole = durbin_watson(errors, n_boot=500, seed=2, chunk_size=500)
        chunked = durbin_watson(errors, n_boot=500, seed=2, chunk_size=64)
        assert chunked.statistic == whole.statistic
        assert abs(chunked.p_value - whole.p_value) < 0.15
        assert chunked == durbin_watson(errors, n_boot=500, seed=2, chunk_size=64)

    def test_errors(self):
        with pytest.raises(DataError):
            durbin_watson([1.0, 2.0])
        with pytest.raises(DataError):
            durbin_watson(np.zeros(10))
        with pytest.raises(ValueError):
            durbin_watson(np.ones(10), chunk_size=0)


class TestFitAr(object):
    def test_recovers_ar1(self):
        ar = fit_ar(ar_noise([0.6], 20000, seed=2), 1)
        assert_allclose(ar.phi, [0.6], atol=0.03)
        assert_allclose(ar.innovation_sd, 1.0, atol=0.05)

    def test_recovers_ar2(self):
        ar = fit_ar(ar_noise([0.5, 0.3], 20000, seed=3), 2)
        assert_allclose(ar.phi, [0.5, 0.3], atol=0.05)

    def test_white_noise(self):
        ar = fit_ar(np.random.default_rng(4).normal(size=5000), 1)
        assert abs(ar.phi[0]) < 0.05

    def test_trend_is_not_stationary(self):
        with pytest.raises(StationarityError):
            fit_ar(np.arange(1.0, 1001.0), 1)

    def test_errors(self):
        with pytest.raises(DataError):
            fit_ar([1.0, 2.0], 1)
        with pytest.raises(DataError):
            fit_ar(np.zeros(20), 1)
        with pytest.raises(ValueError):
            fit_ar(np.ones(20), 0)


class TestArModel(object):
    def test_rejects_explosive(self):
        with pytest.raises(StationarityError):
            ArModel(phi=(1.1,))
        with pytest.raises(StationarityError):
            ArModel(phi=(1.0,))

    def test_zero_coefficient(self):
        assert smallest_root([0.0]) is None
        assert ArModel(phi=(0.0,)).order == 1

    def test_smallest_root(self):
        assert_allclose(smallest_root([0.5]), 2.0)


class TestTransform(object):
    def test_ar1(self):
        assert_array_equal(cochrane_orcutt_transform([1.0, 2.0, 3.0], ArModel(phi=(0.5,))), [1.5, 2.0])

    def test_zero_phi_drops_first_point(self):
        assert_array_equal(cochrane_orcutt_transform([1.0, 2.0, 3.0], ArModel(phi=(0.0,))), [2.0, 3.0])

    def test_ar2(self):
        out = cochrane_orcutt_transform([1.0, 2.0, 3.0, 4.0, 5.0], ArModel(phi=(0.5, 0.3)))
        assert_allclose(out, [1.7, 1.9, 2.1])

    def test_linear(self):
        rng = np.random.default_rng(5)
        a, b = rng.normal(size=50), rng.normal(size=50)
        ar = ArModel(phi=(0.4, -0.2))
        assert_allclose(
            cochrane_orcutt_transform(2.0 * a + b, ar),
            2.0 * cochrane_orcutt_transform(a, ar) + cochrane_orcutt_transform(b, ar),
        )

    def test_too_short(self):
        with pytest.raises(DataError):
            cochrane_orcutt_transform([1.0, 2.0], ArModel(phi=(0.5, 0.1)))

    def test_true_phi_whitens_residuals(self, one_window_truth):
        setup = SimSetup(truth=one_window_truth, alpha=0.3, error_process=ErrorProcess.ar1(0.7), seed=6,
                         input_spec=SyntheticInput(length=1000))
        simulated = generate(setup)
        transformed = transform_pair(simulated.data, ArModel(phi=(0.7,)))
        assert_array_equal(transformed.index, np.arange(1, 1000))
        start = one_window_truth.max_lag
        assert_allclose(residuals(one_window_truth, transformed), simulated.innovations[start + 1:], atol=1e-10)


class TestRestoreIntercept(object):
    def test_scaled(self):
        model = SwrModel.from_params([1.0], [2.0], [1.0], intercept=0.5)
        assert_allclose(_restore_intercept(model, ArModel(phi=(0.5,))).intercept, 1.0)

    def test_without_intercept(self):
        model = SwrModel.from_params([1.0], [2.0], [1.0])
        assert _restore_intercept(model, ArModel(phi=(0.5,))) is model


class TestFitWithAutocorr(object):
    def test_not_triggered(self, noisy_one_window):
        data = noisy_one_window.head(600)
        config = TrainConfig(k_max=1)
        report = fit_with_autocorr(data, config, dw_alpha=0.0, n_boot=100)
        info = report.autocorr_info
        assert not info.applied
        assert info.stages == []
        assert info.ar is None
        assert report.final_model.to_dict() == fit(data, config).final_model.to_dict()

    def test_corrects_ar1_noise(self, one_window_truth):
        setup = SimSetup(truth=one_window_truth, alpha=0.25, error_process=ErrorProcess.ar1(0.7), seed=8,
                         input_spec=SyntheticInput(length=1500))
        data = generate(setup).data
        report = fit_with_autocorr(data, TrainConfig(k_max=1), max_order=1, n_boot=200)
        info = report.autocorr_info
        assert info.applied
        assert info.dw_before.p_value < 0.01
        assert_allclose(info.ar.phi, [0.7], atol=0.1)
        assert len(report.training_data) == len(data) - 1
        assert_allclose(report.final_model.deltas, [4.0], atol=0.5)
        assert info.to_dict()["order"] == 1

    def test_escalates_on_ar2_noise(self, one_window_truth):
        # an AR(1) filter leaves positive lag-one correlation in these errors
        setup = SimSetup(truth=one_window_truth, alpha=0.5, error_process=ErrorProcess(kind="ar", phi=(0.9, -0.3)),
                         seed=12, input_spec=SyntheticInput(length=1500))
        data = generate(setup).data
        report = fit_with_autocorr(data, TrainConfig(k_max=1), max_order=2, n_boot=200)
        info = report.autocorr_info
        assert info.applied
        first, second = info.stages
        assert first.ar.order == 1
        assert first.durbin_watson.p_value < 0.1
        assert second.ar.order == 2
        assert_allclose(second.ar.phi, [0.9, -0.3], atol=0.1)
        assert len(report.training_data) == len(data) - 2
        assert info.to_dict()["order"] == 2

    def test_zero_phi_refit_reproduces_first_fit(self, noisy_one_window):
        data = noisy_one_window.head(600)
        config = TrainConfig(k_max=1)
        first = fit(data, config).final_model
        refit = fit(transform_pair(data, ArModel(phi=(0.0,))), config).final_model
        assert_allclose(refit.theta, first.theta, atol=1e-3)


@pytest.mark.slow
def test_correction_whitens_ar1_datasets(one_window_truth):
    phi_errors = []
    for seed in range(20):
        setup = SimSetup(truth=one_window_truth, alpha=0.5, error_process=ErrorProcess.ar1(0.5), seed=100 + seed)
        train, _ = generate(setup).data.split(0.75)
        info = fit_with_autocorr(train, TrainConfig(k_max=1), seed=seed).autocorr_info
        assert info.dw_before.p_value < 0.01
        phi_errors.append(abs(info.stages[0].ar.phi[0] - 0.5))
        # white residuals of this length keep d within about three standard errors of 2
        assert abs(info.dw_after.statistic - 2.0) < 0.15
    assert np.mean(phi_errors) <= 0.05
