import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from tvg.exceptions import CholeskyError, ParameterError, ShapeError
from tvg.gpr import (
    EndpointGPR,
    GPRSmoother,
    RBFKernel,
    attention_blend,
    fit,
    gpr_smooth,
    median_length_scale,
    predict_cov_diag,
    predict_mean,
    rbf,
)

from oracles import dense_gpr_cov_diag, dense_gpr_mean, dense_gpr_smooth, gram_loop, median_distance


def rel_err(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300)


class TestRBF:
    def test_zero_distance_gives_signal_variance(self):
        assert rbf([1.0, 2.0], [1.0, 2.0], RBFKernel(0.7, 2.5)) == 2.5

    def test_unit_distance(self):
        assert rbf([0.0], [1.0], RBFKernel(1.0, 1.0)) == pytest.approx(0.6065306597126334, rel=1e-15)

    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
    def test_symmetric_and_bounded(self, a, b):
        k = RBFKernel(1.3, 0.8)
        assert rbf(a, b, k) == rbf(b, a, k)
        assert 0.0 <= rbf(a, b, k) <= 0.8

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            rbf([0.0, 1.0], [0.0])

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.nan])
    def test_rejects_bad_length_scale(self, bad):
        with pytest.raises(ParameterError):
            RBFKernel(bad)

    def test_gram_matches_loop(self):
        rng = np.random.default_rng(0)
        A, B = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
        np.testing.assert_allclose(RBFKernel(0.9, 1.7).gram(A, B), gram_loop(A, B, 0.9, 1.7), rtol=1e-13)

    def test_gram_is_psd(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            X = rng.normal(size=(rng.integers(2, 12), rng.integers(1, 5)))
            eig = np.linalg.eigvalsh(RBFKernel(rng.uniform(0.1, 3)).gram(X))
            assert eig.min() >= -1e-9


class TestFit:
    def test_one_by_one_system(self):
        model = fit(np.array([[0.0]]), np.array([[5.0]]), RBFKernel(1.0), 0.0)
        np.testing.assert_array_equal(model.weights_, [[5.0]])
        assert model.jitter_ == 0.0

    def test_weights_match_direct_solve(self):
        rng = np.random.default_rng(2)
        X, Y = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
        model = fit(X, Y, RBFKernel(1.1), 0.1)
        K = gram_loop(X, X, 1.1)
        direct = np.linalg.solve(K + 0.1 * np.eye(3), Y)
        assert rel_err(model.weights_, direct) < 1e-9

    def test_factor_and_residual_invariants(self):
        rng = np.random.default_rng(3)
        X, Y = rng.normal(size=(8, 4)), rng.normal(size=(8, 4))
        model = fit(X, Y, None, 1e-4)
        A = model.kernel_.gram(X) + (1e-4 + model.jitter_) * np.eye(8)
        assert np.allclose(model.factor_, np.tril(model.factor_))
        assert np.linalg.norm(model.factor_ @ model.factor_.T - A) / np.linalg.norm(A) < 1e-8
        assert np.linalg.norm(A @ model.weights_ - Y) / np.linalg.norm(Y) < 1e-8

    def test_duplicate_inputs_need_jitter(self):
        X = np.array([[0.0, 1.0], [0.0, 1.0], [2.0, -1.0]])
        Y = np.array([[1.0, 0.0], [1.0, 0.0], [3.0, 3.0]])
        model = fit(X, Y, RBFKernel(1.0), 0.0)
        assert model.jitter_ > 0
        assert np.all(np.isfinite(model.weights_))

    def test_mismatched_frames(self):
        with pytest.raises(ShapeError):
            fit(np.zeros((3, 2)), np.zeros((3, 1)))

    def test_negative_noise(self):
        with pytest.raises(ParameterError):
            fit(np.zeros((2, 1)), np.zeros((2, 1)), None, -1.0)

    def test_failure_reports_diagnostics(self, monkeypatch):
        import tvg.gpr as gpr_mod

        def always_fail(*args, **kwargs):
            raise gpr_mod.linalg.LinAlgError("not positive definite")

        monkeypatch.setattr(gpr_mod.linalg, "cholesky", always_fail)
        with pytest.raises(CholeskyError) as info:
            fit(np.eye(3), np.eye(3), RBFKernel(1.0), 0.0)
        assert info.value.jitter == pytest.approx(1e-2)
        assert np.isfinite(info.value.condition)

    def test_median_heuristic(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(7, 3))
        assert median_length_scale(X) == pytest.approx(median_distance(X), rel=1e-14)
        assert median_length_scale(np.zeros((4, 2))) == 1.0
        assert median_length_scale(np.ones((1, 2))) == 1.0


class TestPredict:
    def test_noiseless_interpolation(self):
        rng = np.random.default_rng(5)
        X, Y = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
        model = fit(X, Y, None, 0.0)
        assert rel_err(predict_mean(model, X), Y) < 1e-6

    def test_one_point_closed_form(self):
        model = fit(np.array([[0.0]]), np.array([[5.0]]), RBFKernel(1.0), 0.0)
        assert predict_mean(model, np.array([[1.0]]))[0, 0] == pytest.approx(3.032653298563167, rel=1e-14)

    def test_far_query_reverts_to_zero_mean(self):
        rng = np.random.default_rng(6)
        X, Y = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
        model = fit(X, Y, RBFKernel(1.0), 1e-4)
        far = np.full((3, 2), 100.0)
        assert np.linalg.norm(predict_mean(model, far)) < 1e-6 * np.linalg.norm(Y)
        np.testing.assert_allclose(predict_cov_diag(model, far), 1.0, atol=1e-6)

    def test_cov_vanishes_at_training_points(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(5, 2))
        model = fit(X, rng.normal(size=(5, 2)), None, 0.0)
        cov = predict_cov_diag(model, X)
        assert np.all(cov >= 0) and np.all(cov <= 1e-8)

    def test_cov_matches_dense_formula(self):
        X = np.array([[0.0, 0.5], [1.0, -0.3]])
        Xq = np.array([[0.4, 0.1], [2.0, 2.0], [-0.5, 0.0]])
        model = fit(X, np.ones((2, 2)), RBFKernel(0.8), 0.05)
        np.testing.assert_allclose(predict_cov_diag(model, Xq), dense_gpr_cov_diag(X, Xq, 0.8, 0.05), rtol=1e-9, atol=1e-12)

    def test_channel_mismatch(self):
        model = fit(np.zeros((2, 2)) + [[0, 0], [1, 1]], np.zeros((2, 2)))
        with pytest.raises(ShapeError):
            predict_mean(model, np.zeros((3, 1)))

    @given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(-3, 3))
    def test_noise_shrinks_single_point_mean(self, s1, s2, q):
        lo, hi = sorted((s1, s2))
        X, Y = np.array([[0.0]]), np.array([[2.0]])
        m_lo = predict_mean(fit(X, Y, RBFKernel(1.0), lo), np.array([[q]]))
        m_hi = predict_mean(fit(X, Y, RBFKernel(1.0), hi), np.array([[q]]))
        assert abs(m_hi[0, 0]) <= abs(m_lo[0, 0]) + 1e-15
        k = math.exp(-q * q / 2)
        assert m_lo[0, 0] == pytest.approx(2.0 * k / (1.0 + lo), rel=1e-12)


class TestSmooth:
    def test_two_frames_pass_through(self):
        z = np.random.default_rng(8).normal(size=(2, 4, 3))
        assert np.array_equal(gpr_smooth(z), z)

    def test_identical_frames_fixed_point(self):
        frame = np.random.default_rng(9).normal(size=(5, 2))
        z = np.stack([frame] * 4)
        np.testing.assert_allclose(gpr_smooth(z, None, 0.0), z, rtol=1e-6, atol=1e-9)

    def test_matches_dense_oracle(self):
        z = np.random.default_rng(10).normal(size=(4, 3, 2))
        assert rel_err(gpr_smooth(z), dense_gpr_smooth(z)) < 1e-8

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 8), st.integers(1, 8), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_oracle_equivalence_and_endpoints(self, S, N, P, seed):
        z = np.random.default_rng(seed).normal(size=(S, N, P))
        out = gpr_smooth(z)
        assert np.array_equal(out[0], z[0]) and np.array_equal(out[-1], z[-1])
        ref = dense_gpr_smooth(z)
        assert np.linalg.norm(out - ref) <= 1e-8 * max(np.linalg.norm(ref), 1e-12)


class TestAttentionBlend:
    z = np.random.default_rng(11).normal(size=(5, 4, 2))

    def test_gamma_one_zero_attention_is_identity(self):
        assert np.array_equal(attention_blend(self.z, None, 1.0), self.z)

    def test_gamma_zero_is_gpr(self):
        np.testing.assert_allclose(attention_blend(self.z, None, 0.0), gpr_smooth(self.z), rtol=1e-15)

    def test_identity_attention_formula(self):
        out = attention_blend(self.z, lambda v: v, 0.9)
        expected = self.z + 0.9 * self.z + 0.1 * dense_gpr_smooth(self.z)
        np.testing.assert_allclose(out, expected, rtol=1e-9, atol=1e-12)

    def test_linear_in_attention_output(self):
        attn = lambda v: np.sin(v)
        base = attention_blend(self.z, None, 0.9)
        once = attention_blend(self.z, attn, 0.9) - base
        twice = attention_blend(self.z, lambda v: 2 * attn(v), 0.9) - base
        np.testing.assert_allclose(twice, 2 * once, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("gamma", [-0.1, 1.5])
    def test_gamma_range(self, gamma):
        with pytest.raises(ParameterError):
            attention_blend(self.z, None, gamma)

    def test_shape_changing_hook_rejected(self):
        with pytest.raises(ShapeError):
            attention_blend(self.z, lambda v: v[:, :2], 0.5)


class TestEstimatorAPI:
    def test_get_params_and_clone(self):
        est = EndpointGPR(length_scale=0.5, noise_variance=0.0)
        assert est.get_params() == {"length_scale": 0.5, "signal_variance": 1.0, "noise_variance": 0.0}
        assert clone(est).get_params() == est.get_params()

    def test_fit_predict_matches_functional(self):
        rng = np.random.default_rng(12)
        X, Y, Q = rng.normal(size=(6, 3)), rng.normal(size=(6, 3)), rng.normal(size=(4, 3))
        est = EndpointGPR().fit(X, Y)
        np.testing.assert_allclose(est.predict(Q), dense_gpr_mean(X, Y, Q, median_distance(X), 1e-4), rtol=1e-8)

    def test_score_is_r2(self):
        rng = np.random.default_rng(13)
        X, Y = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
        assert EndpointGPR(noise_variance=0.0).fit(X, Y).score(X, Y) == pytest.approx(1.0, abs=1e-6)

    def test_predict_before_fit(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            EndpointGPR().predict(np.zeros((1, 1)))

    def test_smoother_transform(self):
        z = np.random.default_rng(14).normal(size=(5, 4, 2))
        np.testing.assert_allclose(GPRSmoother().fit_transform(z), gpr_smooth(z), rtol=1e-15)
        sm = GPRSmoother(length_scale=0.7, gamma=0.9)
        ref = 0.9 * z + 0.1 * dense_gpr_smooth(z, 0.7)
        np.testing.assert_allclose(sm.fit(z).transform(z), ref, rtol=1e-8, atol=1e-12)

    def test_smoother_unknown_mode(self):
        with pytest.raises(ParameterError):
            GPRSmoother(length_scale="mean").transform(np.zeros((3, 2, 1)))
