import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghostbench.core import Seed, image_stats
from ghostbench.objects import glyph_stencil, render_text, rotate_image, uniform_object


def test_render_text_is_binary_and_centred():
    img = render_text(200, "XGI", 0.5)
    assert set(np.unique(img)) == {0.0, 1.0}
    rows = np.flatnonzero(img.any(axis=1))
    # letters span half the field, centred vertically
    assert rows[-1] - rows[0] + 1 == pytest.approx(100, abs=2)
    assert (rows[0] + rows[-1]) / 2 == pytest.approx(99.5, abs=1.5)


def test_render_text_errors():
    with pytest.raises(ValueError):
        render_text(64, "Q")
    with pytest.raises(ValueError):
        render_text(64, "XGIXGI", 0.9)
    np.testing.assert_array_equal(render_text(32, " ", 0.5), 0.0)


def test_glyph_stencil_statistics():
    T = glyph_stencil(31)
    assert set(np.unique(T)) == {0.25, 0.75}
    assert int((T == 0.75).sum()) == round(0.29 * 961)
    mu, sd = image_stats(T)
    assert mu == pytest.approx(0.395, abs=1e-3)
    assert sd == pytest.approx(0.227, abs=1e-3)


def test_rotate_image():
    img = render_text(64, "XGI", 0.5)
    np.testing.assert_array_equal(rotate_image(img, 0.0), img)
    np.testing.assert_array_equal(rotate_image(img, 360.0), img)
    r = rotate_image(img, 60.0)
    assert r.min() >= 0.0 and r.max() <= 1.0
    # area approximately preserved by bilinear resampling
    assert r.sum() == pytest.approx(img.sum(), rel=0.05)


def test_uniform_object():
    T = uniform_object(128, 0.5, 0.2887, Seed(0))
    mu, sd = image_stats(T)
    assert mu == pytest.approx(0.5, abs=0.01)
    assert sd == pytest.approx(0.2887, rel=0.02)
    np.testing.assert_array_equal(T, uniform_object(128, 0.5, 0.2887, Seed(0)))
    with pytest.raises(ValueError):
        uniform_object(8, 0.1, 0.2, Seed(0))


@given(st.floats(0.05, 0.95), st.floats(0.0, 1.0), st.integers(0, 1000))
def test_uniform_object_in_unit_range(mu, frac, s):
    sd = frac * min(mu, 1 - mu) / np.sqrt(3.0)
    T = uniform_object(16, mu, sd, Seed(s))
    assert T.min() >= 0.0 and T.max() <= 1.0
