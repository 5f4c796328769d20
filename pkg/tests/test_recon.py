import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ghostbench.analysis import greens
from ghostbench.core import BucketVector, Family, MaskEnsemble, NumericalError, Seed
from ghostbench.forward import forward_sums
from ghostbench.masks import (blur_masks, gen_hadamard, gen_pinhole_scan, gen_random_binary,
                              gen_ura_scan)
from ghostbench.recon import (compute_gamma, landweber, pinv_recon, restore_mean, scaled_xc, xc,
                              xc_many)


def buckets(T, ens, scale=1.0):
    return BucketVector(scale * forward_sums(T, ens), photon_scale=scale)


def test_xc_of_constant_buckets_is_zero():
    ens = gen_random_binary(6, 30, 0.5, Seed(0))
    np.testing.assert_allclose(xc(ens, BucketVector(np.full(30, 7.0))), 0.0, atol=1e-12)


def test_xc_of_delta_object_is_greens_function():
    ens = gen_random_binary(8, 200, 0.5, Seed(1))
    T = np.zeros((8, 8))
    T[3, 5] = 1.0
    np.testing.assert_allclose(xc(ens, buckets(T, ens)), greens(ens, 3, 5), atol=1e-10)


def test_xc_j_mismatch():
    with pytest.raises(ValueError):
        xc(gen_random_binary(4, 5, 0.5, Seed(0)), BucketVector(np.ones(4)))


def test_xc_many_matches_columns():
    ens = gen_random_binary(5, 40, 0.5, Seed(2))
    V = np.random.default_rng(0).random((40, 3))
    R = xc_many(ens, V)
    for k in range(3):
        np.testing.assert_allclose(R[k], xc(ens, BucketVector(V[:, k])), atol=1e-12)


def test_gamma_values():
    assert compute_gamma(gen_hadamard(8)) == 16.0
    assert compute_gamma(gen_ura_scan(31)) == pytest.approx(31 * 31 / 4)
    assert compute_gamma(gen_pinhole_scan(4)) == 1.0
    const = MaskEnsemble(4, 5, Family.RANDOM_BINARY, data=np.ones((5, 4, 4)))
    assert compute_gamma(const) == 0.0
    with pytest.raises(ValueError):
        scaled_xc(const, BucketVector(np.ones(5)))


def test_gamma_random_close_to_j_sigma2():
    # gamma = J sigma_A^2 up to sampling error of the mask sums
    ens = gen_random_binary(16, 4000, 0.5, Seed(3))
    assert compute_gamma(ens) == pytest.approx(4000 * 0.25, rel=0.06)


def test_gamma_blurred_closed_form():
    sg = 1.5
    base = gen_random_binary(32, 3000, 0.5, Seed(4))
    ens = blur_masks(base, sg)
    # 4 pi J sigma_g^2 sigma_{A*}^2 with sigma_{A*} the std of the blurred masks
    assert compute_gamma(ens) == pytest.approx(4 * math.pi * 3000 * sg ** 2 * ens.sigma_A ** 2, rel=0.05)


@pytest.mark.parametrize("make", [lambda: gen_hadamard(8), lambda: gen_ura_scan(13),
                                  lambda: gen_pinhole_scan(5)])
def test_orthogonal_sets_invert_exactly(make):
    ens = make()
    T = np.random.default_rng(5).random((ens.n, ens.n))
    rec = scaled_xc(ens, buckets(T, ens, scale=3.7))
    np.testing.assert_allclose(rec, T, atol=1e-10)


def test_constant_sum_mean_restoration():
    ens = gen_ura_scan(7)
    k = ens.constant_sum
    rng = np.random.default_rng(6)
    vals = rng.random(49) * 10
    rec = scaled_xc(ens, BucketVector(vals, photon_scale=2.0))
    assert rec.mean() == pytest.approx(vals.mean() / (k * 2.0), rel=1e-12)
    zero = scaled_xc(ens, BucketVector(np.zeros(49)))
    np.testing.assert_array_equal(zero, 0.0)


def test_restore_mean_without_plan_is_identity():
    ens = gen_random_binary(4, 20, 0.5, Seed(0))
    t = np.arange(16.0).reshape(4, 4)
    np.testing.assert_array_equal(restore_mean(ens, t, 3.0), t)


def test_landweber_fixed_point():
    ens = gen_random_binary(6, 80, 0.5, Seed(7))
    T = np.random.default_rng(7).random((6, 6))
    b = buckets(T, ens)
    rec = landweber(ens, b, alpha=0.5, iters=5, init=T)
    At = ens.mean_corrected().reshape(80, -1)
    # the mean-corrected component is unchanged; only the invisible mean may differ
    np.testing.assert_allclose(At @ rec.ravel(), At @ T.ravel(), atol=1e-12)


def test_landweber_validation_and_guard():
    ens = gen_random_binary(4, 30, 0.5, Seed(8))
    b = buckets(np.ones((4, 4)), ens)
    with pytest.raises(ValueError):
        landweber(ens, b, alpha=0.0)
    with pytest.raises(ValueError):
        landweber(ens, b, iters=0)
    # an undersized gamma makes the step too long and the iteration diverges
    with pytest.raises(NumericalError):
        landweber(ens, buckets(np.random.default_rng(0).random((4, 4)), ens), alpha=1.0,
                  iters=200, gamma=compute_gamma(ens) / 50)


def test_landweber_residual_non_increasing():
    ens = gen_random_binary(6, 60, 0.5, Seed(9))
    T = np.random.default_rng(9).random((6, 6))
    b = buckets(T, ens)
    At = ens.mean_corrected().reshape(60, -1)
    lam_max = np.linalg.eigvalsh(At.T @ At).max()
    g = max(compute_gamma(ens), lam_max / 2)
    bt = b.values - b.values.mean()
    prev = np.inf
    for it in (1, 2, 4, 8, 16, 32):
        r = np.linalg.norm(At @ landweber(ens, b, 1.0, it, gamma=g).ravel() - bt)
        assert r <= prev * (1 + 1e-12)
        prev = r


def test_pinv_limits():
    ens = gen_random_binary(8, 10, 0.5, Seed(0))
    with pytest.raises(ValueError):
        pinv_recon(ens, BucketVector(np.ones(10)), limit=32)
    const = MaskEnsemble(3, 4, Family.RANDOM_BINARY, data=np.ones((4, 3, 3)))
    with pytest.raises(NumericalError):
        pinv_recon(const, BucketVector(np.ones(4)))


def test_pinv_equals_scaled_xc_for_orthogonal_sets():
    ens = gen_ura_scan(7)
    T = np.random.default_rng(1).random((7, 7))
    b = buckets(T, ens)
    np.testing.assert_allclose(pinv_recon(ens, b), scaled_xc(ens, b), atol=1e-8)


def test_pinv_recovers_consistent_overdetermined_system():
    ens = gen_random_binary(6, 100, 0.5, Seed(2))
    T = np.random.default_rng(2).random((6, 6))
    rec = pinv_recon(ens, buckets(T, ens))
    At = ens.mean_corrected().reshape(100, -1)
    # recovered up to the direction the mean-corrected system cannot see
    np.testing.assert_allclose(At @ rec.ravel(), At @ T.ravel(), atol=1e-8)
    d = rec - T
    np.testing.assert_allclose(d - d.mean(), 0.0, atol=1e-6)


@given(st.integers(0, 1000))
def test_pinv_is_least_squares(s):
    ens = gen_random_binary(4, 10, 0.5, Seed(3))
    rng = np.random.default_rng(s)
    b = BucketVector(rng.random(10) * 5)
    rec = pinv_recon(ens, b)
    At = ens.mean_corrected().reshape(10, -1)
    bt = b.values - b.values.mean()
    r0 = np.linalg.norm(At @ rec.ravel() - bt)
    for _ in range(5):
        probe = rng.standard_normal(16)
        assert r0 <= np.linalg.norm(At @ probe - bt) + 1e-9


@given(arrays(np.float64, (8, 8), elements=st.floats(0, 1)))
def test_hadamard_roundtrip_property(T):
    ens = gen_hadamard(8)
    np.testing.assert_allclose(scaled_xc(ens, buckets(T, ens)), T, atol=1e-9)


@given(arrays(np.float64, (7, 7), elements=st.floats(0, 1)), st.floats(0.1, 100))
def test_scaled_xc_constant_sum_mean(T, scale):
    ens = gen_ura_scan(7)
    b = buckets(T, ens, scale)
    assert scaled_xc(ens, b).mean() == pytest.approx(b.values.mean() / (ens.constant_sum * scale),
                                                     rel=1e-12, abs=1e-15)
