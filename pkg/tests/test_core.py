import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghostbench.core import (BucketVector, Family, Image, MaskEnsemble, NoiseKind, NoiseSpec, Seed,
                             as_image_array, derive_seed, ensemble_stats, image_stats)


def test_image_defaults_and_validation():
    img = Image(np.ones((4, 4)))
    assert img.n == 4
    assert img.pitch_mm == pytest.approx(0.25)
    np.testing.assert_array_equal(np.asarray(img), np.ones((4, 4)))
    with pytest.raises(ValueError):
        Image(np.ones((3, 4)))
    with pytest.raises(ValueError):
        Image(np.full((3, 3), np.nan))
    with pytest.raises(ValueError):
        Image(-np.ones((3, 3)), transmission=True)
    with pytest.raises(ValueError):
        Image(np.ones((3, 3)), pitch_mm=0.0)


def test_image_is_immutable():
    img = Image(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1.0


def test_as_image_array_rejects_bad_shapes():
    with pytest.raises(ValueError):
        as_image_array(np.zeros(5))
    with pytest.raises(ValueError):
        as_image_array(np.zeros((1, 1)))


def test_seed_derivation_is_deterministic_and_label_sensitive():
    root = Seed(42)
    a = derive_seed(root, "masks")
    assert a == derive_seed(Seed(42), "masks")
    assert a.value != derive_seed(root, "object").value
    assert a.value != derive_seed(Seed(43), "masks").value
    np.testing.assert_array_equal(a.generator().random(5), a.generator().random(5))


def test_seed_range():
    with pytest.raises(ValueError):
        Seed(-1)
    with pytest.raises(ValueError):
        Seed(2**64)
    Seed(2**64 - 1)


@given(st.integers(0, 2**64 - 1), st.text(max_size=20))
def test_derived_seeds_stay_in_range(v, label):
    s = derive_seed(Seed(v), label)
    assert 0 <= s.value < 2**64


def test_noise_spec_flags():
    assert not NoiseSpec.none().has_poisson
    assert NoiseSpec.poisson().has_poisson and not NoiseSpec.poisson().has_gaussian
    assert NoiseSpec.gaussian(1.0).has_gaussian
    b = NoiseSpec.both(1.0, 2.0)
    assert b.has_poisson and b.has_gaussian and b.kind is NoiseKind.BOTH
    assert NoiseSpec("poisson").kind is NoiseKind.POISSON
    with pytest.raises(ValueError):
        NoiseSpec.gaussian(-1.0)


def test_bucket_vector_validation():
    b = BucketVector([1, 2, 3])
    assert b.J == 3
    with pytest.raises(ValueError):
        BucketVector([])
    with pytest.raises(ValueError):
        BucketVector([np.inf])
    with pytest.raises(ValueError):
        BucketVector([1.0], photon_scale=0.0)


def _lazy(data):
    data = np.asarray(data)
    return MaskEnsemble(data.shape[1], data.shape[0], Family.RANDOM_GRAY,
                        source=lambda a, b: data[a:b])


def test_lazy_and_eager_ensembles_agree():
    rng = np.random.default_rng(0)
    d = rng.random((50, 6, 6))
    eager = MaskEnsemble(6, 50, Family.RANDOM_GRAY, data=d)
    lazy = _lazy(d)
    np.testing.assert_array_equal(eager.masks, lazy.masks)
    assert eager.mu_A == pytest.approx(d.mean(), rel=1e-12)
    assert lazy.sigma_A == pytest.approx(d.std(), rel=1e-12)
    np.testing.assert_allclose(lazy.pixel_mean, d.mean(axis=0), rtol=1e-12)
    np.testing.assert_allclose(lazy.pixel_var, d.var(axis=0), rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(lazy.mask_sums, d.sum(axis=(1, 2)), rtol=1e-12)
    assert lazy.value_range == (d.min(), d.max())


def test_ensemble_shape_checks():
    with pytest.raises(ValueError):
        MaskEnsemble(4, 2, Family.RANDOM_BINARY, data=np.zeros((3, 4, 4)))
    with pytest.raises(ValueError):
        MaskEnsemble(4, 2, Family.RANDOM_BINARY)
    ens = MaskEnsemble(2, 3, Family.RANDOM_BINARY, data=np.zeros((3, 2, 2)))
    with pytest.raises(IndexError):
        ens.get(2, 4)


def test_constant_sum_detection():
    d = np.zeros((4, 3, 3))
    for j in range(4):
        d[j].flat[j] = 1.0
        d[j].flat[8] = 1.0
    ens = MaskEnsemble(3, 4, Family.RANDOM_BINARY, data=d)
    assert ens.constant_sum == pytest.approx(2.0)
    d[0, 0, 0] = 0.5
    assert MaskEnsemble(3, 4, Family.RANDOM_BINARY, data=d).constant_sum is None


def test_scale_applies_to_stored_values():
    d = np.array([[[0, 1], [2, 1]]], dtype=np.uint8)
    ens = MaskEnsemble(2, 1, Family.URA_SCAN, data=d, scale=0.5)
    np.testing.assert_array_equal(ens.get(0)[0], [[0, 0.5], [1, 0.5]])
    assert ens.mu_A == pytest.approx(0.5)


def test_subset_preserves_order_and_gain():
    rng = np.random.default_rng(1)
    d = rng.random((10, 4, 4))
    ens = MaskEnsemble(4, 10, Family.HADAMARD, data=d, orthogonal_gain=4.0)
    sub = ens.subset([7, 2, 5])
    np.testing.assert_array_equal(sub.masks, d[[7, 2, 5]])
    assert sub.orthogonal_gain == 4.0
    lazy_sub = _lazy(d).subset([7, 2, 5])
    np.testing.assert_array_equal(lazy_sub.masks, d[[7, 2, 5]])


def test_mean_corrected_sums_to_zero():
    rng = np.random.default_rng(2)
    ens = MaskEnsemble(5, 30, Family.RANDOM_GRAY, data=rng.random((30, 5, 5)))
    np.testing.assert_allclose(ens.mean_corrected().sum(axis=0), 0.0, atol=1e-12)


def test_image_and_ensemble_stats():
    mu, sd = image_stats(np.array([[0.0, 1.0], [0.0, 1.0]]))
    assert (mu, sd) == (0.5, 0.5)
    ens = MaskEnsemble(2, 2, Family.RANDOM_BINARY, data=np.array([np.eye(2), 1 - np.eye(2)]))
    assert ensemble_stats(ens) == (0.5, 0.5, 2.0)
