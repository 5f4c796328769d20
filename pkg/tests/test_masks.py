import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghostbench.core import Family, Seed
from ghostbench.masks import (blur_masks, gaussian_kernel, gen_hadamard, gen_pinhole_scan,
                              gen_random_binary, gen_random_gray, gen_ura_scan, gram_mean_corrected,
                              gram_numerators, is_prime, largest_prime_at_most, select_masks,
                              ura_base_pattern)
from oracles import hadamard_sylvester, legendre


def test_primes():
    assert [p for p in range(20) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19]
    assert largest_prime_at_most(64) == 61
    assert largest_prime_at_most(31) == 31
    with pytest.raises(ValueError):
        largest_prime_at_most(1)


def test_random_binary_statistics():
    ens = gen_random_binary(32, 400, 0.3, Seed(1))
    m = ens.masks
    assert set(np.unique(m)) <= {0.0, 1.0}
    # 409600 Bernoulli(0.3) samples: std of the mean is 7.2e-4
    assert abs(m.mean() - 0.3) < 5 * math.sqrt(0.21 / m.size)
    assert ens.family is Family.RANDOM_BINARY


def test_random_binary_is_deterministic_and_chunk_independent():
    a = gen_random_binary(8, 600, 0.5, Seed(3))
    b = gen_random_binary(8, 600, 0.5, Seed(3))
    np.testing.assert_array_equal(a.masks, b.masks)
    # ranged access crossing a chunk boundary matches the full array
    np.testing.assert_array_equal(a.get(250, 260), a.masks[250:260])
    assert not np.array_equal(a.masks, gen_random_binary(8, 600, 0.5, Seed(4)).masks)


def test_random_gray_moments_and_bounds():
    ens = gen_random_gray(16, 500, 0.5, 0.2, Seed(0))
    m = ens.masks
    assert m.min() >= 0 and m.max() <= 1
    assert ens.mu_A == pytest.approx(0.5, abs=3e-3)
    assert ens.sigma_A == pytest.approx(0.2, rel=5e-3)
    gen_random_gray(4, 2, 0.5, 0.2887, Seed(0))  # rounded 1/sqrt(12) accepted
    with pytest.raises(ValueError):
        gen_random_gray(4, 2, 0.2, 0.2, Seed(0))


def test_gaussian_kernel_properties():
    k = gaussian_kernel(32, 1.5)
    assert k.sum() == pytest.approx(1.0, rel=1e-14)
    assert k[0, 0] == k.max()
    # periodic symmetry: k(x) = k(-x)
    np.testing.assert_allclose(k, np.roll(k[::-1, ::-1], (1, 1), axis=(0, 1)), atol=1e-16)
    # second moment of a sampled Gaussian is close to sigma^2
    x = np.fft.fftfreq(32, 1 / 32)
    var = float(np.sum(k * x[:, None] ** 2))
    assert var == pytest.approx(1.5 ** 2, rel=1e-3)
    with pytest.raises(ValueError):
        gaussian_kernel(8, 0.0)


def test_blur_preserves_mean_and_constants():
    base = gen_random_binary(16, 50, 0.5, Seed(2))
    blurred = blur_masks(base, 1.0)
    np.testing.assert_allclose(blurred.mask_sums, base.mask_sums, rtol=1e-10)
    assert blurred.family is Family.BLURRED
    const = gen_random_binary(8, 3, 1.0, Seed(0))
    np.testing.assert_array_equal(blur_masks(const, 2.0).masks, np.ones((3, 8, 8)))


def test_hadamard_matches_sylvester_oracle():
    ens = gen_hadamard(4)
    H = hadamard_sylvester(16)
    np.testing.assert_array_equal(ens.matrix(), (H + 1) // 2)
    assert ens.orthogonal_gain == 4.0
    with pytest.raises(ValueError):
        gen_hadamard(6)


def test_ura_base_pattern_against_legendre_oracle():
    p = 11
    base = ura_base_pattern(p)
    r = next(i for i in range(2, p) if legendre(i, p) == -1)
    for x in range(p):
        for y in range(p):
            assert base[x, y] == 1 + legendre(x * x - r * y * y, p)
    assert base[0, 0] == 1


@pytest.mark.parametrize("p", [3, 5, 7, 13, 31, 61])
def test_ura_flat_spectrum(p):
    a = ura_base_pattern(p) / 2.0
    power = np.abs(np.fft.fft2(a)) ** 2
    power[0, 0] = p * p / 4.0
    np.testing.assert_allclose(power, p * p / 4.0, rtol=1e-9)


def test_ura_scan_layout_and_gram():
    p = 7
    ens = gen_ura_scan(p)
    base = ura_base_pattern(p) / 2.0
    np.testing.assert_array_equal(ens.get(3 * p + 5)[0], np.roll(base, (3, 5), axis=(0, 1)))
    assert ens.constant_sum == pytest.approx(p * p / 2.0)
    N, d = gram_numerators(ens)
    J = p * p
    gamma = p * p / 4.0
    # exact: G = gamma * (I - 11^T / J)
    expected = gamma * (J * np.eye(J) - np.ones((J, J))) / J
    np.testing.assert_array_equal(N, np.rint(expected * d).astype(np.int64))


def test_hadamard_exact_gram():
    ens = gen_hadamard(4)
    N, d = gram_numerators(ens)
    J = 16
    expected_num = (J * np.eye(J) - np.ones((J, J))) * (4.0 * d / J)
    np.testing.assert_array_equal(N, np.rint(expected_num).astype(np.int64))


def test_gram_numerators_needs_integer_storage():
    with pytest.raises(TypeError):
        gram_numerators(gen_random_gray(4, 4, 0.5, 0.1, Seed(0)))


def test_gram_float_matches_exact():
    ens = gen_hadamard(4)
    N, d = gram_numerators(ens)
    np.testing.assert_allclose(gram_mean_corrected(ens), N / d, atol=1e-12)


def test_gram_budget_warning():
    ens = gen_hadamard(4)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        gram_mean_corrected(ens, memory_budget=10)
    assert any(issubclass(x.category, ResourceWarning) for x in w)


def test_pinhole_scan():
    ens = gen_pinhole_scan(3)
    np.testing.assert_array_equal(ens.matrix(), np.eye(9))
    assert ens.constant_sum == 1.0


def test_select_masks():
    ens = gen_ura_scan(5)
    assert select_masks(ens, 25) is ens
    first = select_masks(ens, 4)
    np.testing.assert_array_equal(first.masks, ens.masks[:4])
    a = select_masks(ens, 10, Seed(1))
    b = select_masks(ens, 10, Seed(1))
    np.testing.assert_array_equal(a.masks, b.masks)
    assert a.orthogonal_gain == ens.orthogonal_gain
    with pytest.raises(ValueError):
        select_masks(ens, 26)


@given(st.integers(2, 12), st.integers(1, 40), st.floats(0.0, 1.0), st.integers(0, 2**32))
def test_binary_masks_are_binary(n, J, mu, s):
    ens = gen_random_binary(n, J, mu, Seed(s))
    m = ens.masks
    assert m.shape == (J, n, n)
    assert np.all((m == 0) | (m == 1))


@given(st.sampled_from([3, 5, 7, 11, 13]), st.data())
def test_ura_translation_orthogonality(p, data):
    # any two distinct masks of the scan have the same mean-corrected overlap
    ens = gen_ura_scan(p)
    i = data.draw(st.integers(0, p * p - 1))
    j = data.draw(st.integers(0, p * p - 1).filter(lambda k: k != i))
    At = ens.mean_corrected()
    g_ij = float(np.sum(At[i] * At[j]))
    g_ii = float(np.sum(At[i] * At[i]))
    assert g_ij == pytest.approx(-p * p / 4.0 / (p * p), abs=1e-9)
    assert g_ii == pytest.approx(p * p / 4.0 * (1 - 1 / (p * p)), rel=1e-12)
