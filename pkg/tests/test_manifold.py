import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pion import linalg as la
from pion import manifold as mf
from pion.errors import DomainError, ShapeError
from pion.rng import Rng

from conftest import skew

W_HAND = np.array([[1.0, 0.0], [0.0, 2.0]])
G_HAND = np.array([[0.0, 1.0], [0.0, 0.0]])


class TestLieGradients:
    def test_zero_gradient(self):
        pair = mf.lie_gradients(W_HAND, np.zeros((2, 2)))
        assert not pair.g_in.any() and not pair.g_out.any()

    def test_identity_weight_symmetric_gradient(self):
        g = np.array([[2.0, 1.0], [1.0, 3.0]])
        pair = mf.lie_gradients(np.eye(2), g)
        assert np.abs(pair.g_in).max() == 0.0
        assert np.abs(pair.g_out).max() == 0.0

    def test_hand_example(self):
        pair = mf.lie_gradients(W_HAND, G_HAND)
        assert pair.g_in.tolist() == [[0.0, 1.0], [-1.0, 0.0]]
        assert pair.g_out.tolist() == [[0.0, 2.0], [-2.0, 0.0]]

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mf.lie_gradients(np.zeros((2, 3)), np.zeros((3, 2)))

    @given(
        seed=st.integers(0, 2**32),
        d_out=st.integers(1, 24),
        d_in=st.integers(1, 24),
    )
    @settings(max_examples=60, deadline=None)
    def test_outputs_always_skew(self, seed, d_out, d_in):
        rng = Rng(seed)
        pair = mf.lie_gradients(
            rng.normal_matrix(d_out, d_in), rng.normal_matrix(d_out, d_in)
        )
        for side in (pair.g_in, pair.g_out):
            assert la.skew_error(side) <= 1e-12 * (1.0 + la.frobenius_norm(side))


class TestDescentPairing:
    def test_zero_gradient(self):
        assert mf.descent_pairing(W_HAND, np.zeros((2, 2))) == (0.0, 0.0)

    def test_hand_example(self):
        first, second = mf.descent_pairing(W_HAND, G_HAND)
        assert first == pytest.approx(1.0, abs=1e-14)
        assert second == pytest.approx(4.0, abs=1e-14)

    def test_identities_on_random_inputs(self):
        rng = Rng(77)
        for _ in range(100):
            w = rng.normal_matrix(9, 13)
            g = rng.normal_matrix(9, 13)
            pair = mf.lie_gradients(w, g)
            a, b = mf.descent_pairing(w, g)
            want_a = 0.5 * la.frobenius_norm(pair.g_in) ** 2
            want_b = 0.5 * la.frobenius_norm(pair.g_out) ** 2
            assert abs(a - want_a) <= 1e-10 * want_a
            assert abs(b - want_b) <= 1e-10 * want_b


class TestStationarity:
    def test_zero_gradient(self):
        assert mf.stationarity_measure(W_HAND, np.zeros((2, 2))) == 0.0

    def test_hand_example(self):
        assert mf.stationarity_measure(W_HAND, G_HAND) == pytest.approx(10.0, abs=1e-12)

    def test_proportional_gradient_is_critical(self):
        w = Rng(5).normal_matrix(6, 6)
        assert mf.stationarity_measure(w, 2.5 * w) <= 1e-24

    def test_predicate(self):
        assert mf.is_first_order_stationary(W_HAND, np.zeros((2, 2)), 1e-6)
        w = Rng(6).normal_matrix(5, 5)
        assert mf.is_first_order_stationary(w, w, 1e-6)
        assert not mf.is_first_order_stationary(W_HAND, G_HAND, 1e-6)
        with pytest.raises(DomainError):
            mf.is_first_order_stationary(W_HAND, G_HAND, 0.0)


class TestRotationAngles:
    def test_planar(self):
        s = np.array([[0.0, 0.3], [-0.3, 0.0]])
        assert mf.rotation_angles(s).tolist() == pytest.approx([0.3], abs=1e-14)

    def test_zero(self):
        assert mf.rotation_angles(np.zeros((4, 4))).tolist() == [0.0, 0.0]

    def test_pairing_on_random_skew(self):
        s = skew(Rng(8), 6)
        sv = la.singular_values(s)
        for j in range(3):
            assert abs(sv[2 * j] - sv[2 * j + 1]) <= 1e-10 * sv[0]
        angles = mf.rotation_angles(s)
        assert len(angles) == 3
        assert np.all(np.diff(angles) <= 0)

    def test_odd_dimension_drops_zero(self):
        s = skew(Rng(9), 7)
        assert len(mf.rotation_angles(s)) == 3

    def test_rejects_non_skew(self):
        with pytest.raises(DomainError):
            mf.rotation_angles(np.array([[1.0, 0.0], [0.0, 1.0]]))

    def test_consistent_with_exponential(self):
        theta = 0.25
        s = np.array([[0.0, theta], [-theta, 0.0]])
        rot = la.exp_taylor(s, 12)
        want = np.array(
            [[math.cos(theta), math.sin(theta)], [-math.sin(theta), math.cos(theta)]]
        )
        assert np.abs(rot - want).max() <= 1e-12


class TestBilateralNormalize:
    def test_norms_after(self):
        rng = Rng(10)
        pair = mf.lie_gradients(rng.normal_matrix(5, 8), rng.normal_matrix(5, 8))
        out = mf.bilateral_normalize(pair)
        assert la.frobenius_norm(out.g_in) == pytest.approx(math.sqrt(8), abs=1e-12)
        assert la.frobenius_norm(out.g_out) == pytest.approx(math.sqrt(5), abs=1e-12)
        assert la.skew_error(out.g_in) <= 1e-12
        assert la.skew_error(out.g_out) <= 1e-12

    def test_idempotent_on_normalized(self):
        rng = Rng(11)
        pair = mf.bilateral_normalize(
            mf.lie_gradients(rng.normal_matrix(4, 6), rng.normal_matrix(4, 6))
        )
        again = mf.bilateral_normalize(pair)
        assert np.abs(again.g_in - pair.g_in).max() <= 1e-14
        assert np.abs(again.g_out - pair.g_out).max() <= 1e-14

    def test_zero_side_passthrough(self):
        rng = Rng(12)
        pair = mf.LiePair(g_in=np.zeros((6, 6)), g_out=skew(rng, 4))
        out = mf.bilateral_normalize(pair)
        assert out.in_passthrough and not out.out_passthrough
        assert not out.g_in.any()


class TestRmsAlpha:
    def test_zero_denominator_path(self):
        w = np.zeros((3, 4))
        a_out = np.zeros((3, 3))
        alpha = mf.rms_alpha(w, None, a_out, c=0.5, eps=1e-8)
        assert alpha == pytest.approx(0.5 * math.sqrt(12) / 1e-8, rel=1e-12)

    def test_post_scaling_contract(self):
        rng = Rng(13)
        w = rng.normal_matrix(5, 9)
        pair = mf.lie_gradients(w, rng.normal_matrix(5, 9))
        a_in, a_out = -pair.g_in, -pair.g_out
        alpha = mf.rms_alpha(w, a_in, a_out, c=0.2)
        scaled = la.frobenius_norm(alpha * (a_out @ w + w @ a_in))
        assert scaled == pytest.approx(0.2 * math.sqrt(45), rel=1e-6)

    def test_hand_example(self):
        pair = mf.lie_gradients(W_HAND, G_HAND)
        alpha = mf.rms_alpha(W_HAND, None, pair.g_out, c=0.2)
        want = 0.2 * 2.0 / (math.sqrt(20.0) + 1e-8)
        assert alpha == pytest.approx(want, rel=1e-12)

    def test_requires_one_side(self):
        with pytest.raises(DomainError):
            mf.rms_alpha(W_HAND, None, None, c=0.2)


class TestSpectrumDrift:
    def test_self_is_zero(self):
        w0 = Rng(14).normal_matrix(5, 8)
        assert mf.spectrum_drift(w0, mf.capture_spectrum(w0)) == 0.0

    def test_orthogonal_equivalence(self):
        rng = Rng(15)
        w0 = rng.normal_matrix(5, 8)
        ref = mf.capture_spectrum(w0)
        q = la.exp_cayley(skew(rng, 5))
        p = la.exp_cayley(skew(rng, 8))
        assert mf.spectrum_drift(q @ w0 @ p.T, ref) <= 1e-12

    def test_doubling(self):
        w0 = Rng(16).normal_matrix(4, 4)
        ref = mf.capture_spectrum(w0)
        assert mf.spectrum_drift(2.0 * w0, ref) == pytest.approx(1.0, rel=1e-12)

    def test_length_mismatch(self):
        w0 = Rng(17).normal_matrix(4, 4)
        ref = mf.capture_spectrum(w0)
        with pytest.raises(ShapeError):
            mf.spectrum_drift(np.zeros((3, 3)), ref)
