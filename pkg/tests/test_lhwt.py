import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import (S2, haar_matrix, horizontal_4x16, inverse_horizontal_4x16,
                     inverse_vertical_4, vertical_4)
from nlh.lhwt import (bi_hard_threshold, haar_forward_1d, haar_forward_2d, haar_inverse_1d,
                      haar_inverse_2d, hard_threshold_level, wiener_gain, wiener_shrink)

def test_forward_1d_examples():
    np.testing.assert_allclose(haar_forward_1d([1, 1, 1, 1]), [2, 0, 0, 0], atol=1e-15)
    a, b = 0.3, -1.7
    np.testing.assert_allclose(haar_forward_1d([a, b]), [(a + b) / S2, (a - b) / S2], atol=1e-15)
    np.testing.assert_allclose(haar_forward_1d([1, 2, 3, 4]),
                               [5, -2, -1 / S2, -1 / S2], atol=1e-15)


def test_inverse_1d_examples():
    np.testing.assert_allclose(haar_inverse_1d([2, 0, 0, 0]), [1, 1, 1, 1], atol=1e-15)
    np.testing.assert_allclose(haar_inverse_1d([5.0]), [5.0])


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16, 32, 64])
def test_matches_matrix_oracle(n, rng):
    H = haar_matrix(n)
    np.testing.assert_allclose(H @ H.T, np.eye(n), atol=1e-13)
    v = rng.standard_normal((5, n))
    np.testing.assert_allclose(haar_forward_1d(v), v @ H.T, atol=1e-12)
    np.testing.assert_allclose(haar_inverse_1d(v), v @ H, atol=1e-12)


@pytest.mark.parametrize("bad", [0, 3, 6, 12])
def test_rejects_non_power_of_two(bad):
    with pytest.raises(ValueError):
        haar_forward_1d(np.ones(bad))
    with pytest.raises(ValueError):
        haar_inverse_1d(np.ones(bad))


def test_2d_rejects_bad_shapes():
    with pytest.raises(ValueError):
        haar_forward_2d(np.ones((3, 16)))
    with pytest.raises(ValueError):
        haar_inverse_2d(np.ones(16))


def test_explicit_4x16_butterflies(rng):
    for _ in range(200):
        Y = rng.standard_normal((4, 16))
        C = horizontal_4x16(Y)
        Ch = vertical_4(C)
        np.testing.assert_allclose(haar_forward_1d(Y), C, atol=1e-12)
        np.testing.assert_allclose(haar_forward_2d(Y), Ch, atol=1e-12)
        back = inverse_horizontal_4x16(inverse_vertical_4(Ch))
        np.testing.assert_allclose(back, Y, atol=1e-12)
        np.testing.assert_allclose(haar_inverse_2d(Ch), back, atol=1e-12)


def test_constant_matrix_is_dc_only():
    a = 0.37
    C = haar_forward_2d(np.full((4, 16), a))
    expected = np.zeros((4, 16))
    expected[0, 0] = 8 * a
    np.testing.assert_allclose(C, expected, atol=1e-14)
    np.testing.assert_allclose(haar_inverse_2d(expected), np.full((4, 16), a), atol=1e-14)


@pytest.mark.parametrize("shape", [(4, 16), (8, 64), (2, 8)])
def test_round_trip_2d(shape, rng):
    Y = rng.standard_normal(shape)
    np.testing.assert_allclose(haar_inverse_2d(haar_forward_2d(Y)), Y, atol=1e-12)


def test_inverse_is_linear(rng):
    C1, C2 = rng.standard_normal((2, 8, 16))
    a, b = 1.7, -0.4
    np.testing.assert_allclose(haar_inverse_2d(a * C1 + b * C2),
                               a * haar_inverse_2d(C1) + b * haar_inverse_2d(C2), atol=1e-12)


pow2 = st.sampled_from([1, 2, 4, 8, 16, 32, 64])
finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_orthonormal_round_trip_property(data):
    q, m = data.draw(pow2), data.draw(pow2)
    Y = data.draw(arrays(np.float64, (q, m), elements=finite))
    C = haar_forward_2d(Y)
    scale = max(1.0, np.abs(Y).max())
    assert abs(np.linalg.norm(C) - np.linalg.norm(Y)) <= 1e-12 * scale * np.sqrt(q * m)
    np.testing.assert_allclose(haar_inverse_2d(C), Y, atol=1e-12 * scale)


def test_threshold_levels():
    assert hard_threshold_level(0.1, 2.0) == pytest.approx(0.02)
    assert hard_threshold_level(0.1, 2.0, "sigma") == pytest.approx(0.2)
    with pytest.raises(ValueError):
        hard_threshold_level(0.1, 2.0, "cubic")


def test_bi_hard_threshold_examples():
    C = np.zeros((4, 16))
    C[0, 3] = 0.015
    assert bi_hard_threshold(C, 0.1, 2.0)[0, 3] == 0.0
    C[0, 3] = 0.05
    assert bi_hard_threshold(C, 0.1, 2.0)[0, 3] == 0.05
    C[3, 2] = 0.05
    assert bi_hard_threshold(C, 0.1, 2.0)[3, 2] == 0.0
    C[3, 0] = 0.05
    assert bi_hard_threshold(C, 0.1, 2.0)[3, 0] == 0.05
    with pytest.raises(ValueError):
        bi_hard_threshold(C, -0.1, 2.0)


def test_bi_hard_threshold_band_layout(rng):
    C = rng.uniform(1, 2, (8, 16))
    out = bi_hard_threshold(C, 0.0, 2.0)
    np.testing.assert_array_equal(out[:6], C[:6])
    np.testing.assert_array_equal(out[6:, 0], C[6:, 0])
    assert not out[6:, 1:].any()


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 16), elements=st.floats(-1, 1)), st.floats(0, 0.5), st.floats(0, 5))
def test_bi_hard_threshold_idempotent(C, sigma, tau):
    once = bi_hard_threshold(C, sigma, tau)
    np.testing.assert_array_equal(bi_hard_threshold(once, sigma, tau), once)


def test_wiener_examples():
    noisy = np.array([[0.3, -0.2], [0.5, 0.1]])
    guide = np.array([[0.0, 0.05], [1.0, 0.0]])
    out = wiener_shrink(noisy, guide, 0.1)
    assert out[0, 0] == 0.0 and out[1, 1] == 0.0
    assert out[0, 1] == pytest.approx(-0.2 / 4)
    np.testing.assert_array_equal(wiener_shrink(noisy, guide, 0.0)[[0, 1], [1, 0]], noisy[[0, 1], [1, 0]])
    np.testing.assert_array_equal(wiener_shrink(noisy, np.ones((2, 2)), 0.0), noisy)
    with pytest.raises(ValueError):
        wiener_shrink(noisy, guide[:1], 0.1)


def test_wiener_zero_over_zero_is_pass_through():
    assert wiener_gain(np.zeros(3), 0.0).tolist() == [1.0, 1.0, 1.0]


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 16), elements=st.floats(-1, 1)),
       arrays(np.float64, (4, 16), elements=st.floats(-1, 1)), st.floats(0, 0.5))
def test_wiener_attenuates(noisy, guide, sigma):
    g = wiener_gain(guide, sigma)
    assert np.all((g >= 0) & (g <= 1))
    assert np.all(np.abs(wiener_shrink(noisy, guide, sigma)) <= np.abs(noisy))
