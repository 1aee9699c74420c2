import numpy as np
import pytest

import holobind


def test_bind_unbind_round_trip():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((16, 16, 3))
    s = holobind.sample_secret([16, 16, 3], 7)
    bound = holobind.bind(x, s)
    assert bound.shape == x.shape
    np.testing.assert_allclose(holobind.unbind(bound, s), x, atol=1e-9)


def test_secret_has_unit_spectrum():
    s = holobind.sample_secret([8, 8], 3)
    np.testing.assert_allclose(np.abs(np.fft.fft2(s)), 1.0, atol=1e-9)
    np.testing.assert_allclose(holobind.project(s), s, atol=1e-12)


def test_bind_matches_numpy_fft():
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal((6, 10)), rng.standard_normal((6, 10))
    expect = np.real(np.fft.ifft2(np.fft.fft2(x) * np.fft.fft2(y)))
    np.testing.assert_allclose(holobind.bind(x, y), expect, atol=1e-10)


def test_cosine_and_errors():
    a = np.arange(1.0, 5.0)
    assert holobind.cosine(a, 2 * a) == pytest.approx(1.0)
    with pytest.raises(holobind.HolobindError):
        holobind.cosine(a, np.zeros(4))
    with pytest.raises(ValueError):
        holobind.bind(np.ones((4, 4)), np.ones((5, 5)))


def test_tensor_container_round_trip():
    x = np.random.default_rng(2).standard_normal((4, 5, 2))
    data = holobind.encode_tensor(x)
    np.testing.assert_array_equal(holobind.decode_tensor(data), x)
    assert holobind.request_wire_size([16, 16, 1]) == 1060
    with pytest.raises(holobind.HolobindError):
        holobind.decode_tensor(b"HBT1")


def test_hilbert_round_trip():
    img = np.random.default_rng(3).standard_normal((28, 28))
    linear = holobind.hilbert_encode(img)
    assert linear.shape == (1024,)
    np.testing.assert_array_equal(holobind.hilbert_decode(linear, 28, 28), img)


def test_ari():
    assert holobind.ari([0, 0, 1, 1], [3, 3, 5, 5]) == pytest.approx(1.0)
    assert holobind.ari([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5)
