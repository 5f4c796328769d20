import math

import numpy as np
import pytest

from ghostbench.comparison import ComparisonResult, simulate_comparison, theory_comparison
from ghostbench.core import Seed
from ghostbench.objects import glyph_stencil


def test_theory_comparison_full_set():
    sp, di, spp, dip = theory_comparison(31, 961)
    assert sp == pytest.approx(2 / 31, rel=1e-14)
    assert di == pytest.approx(31.0, rel=1e-14)
    assert spp == pytest.approx(math.sqrt(2), rel=1e-14)
    assert dip == pytest.approx(31.0, rel=1e-14)


def test_ratios_property():
    r = ComparisonResult(2.0, 1.0, 8.0, 4.0, 4.0, 2.0)
    assert r.ratios == (0.5, 4.0, 1.0, 0.5)


def test_simulate_comparison_is_deterministic():
    T = glyph_stencil(31)
    a = simulate_comparison(T, 5767.0, 56.2, Seed(0))
    b = simulate_comparison(T, 5767.0, 56.2, Seed(0))
    assert a == b


def test_simulate_comparison_near_theory():
    T = glyph_stencil(31)
    got = np.mean([simulate_comparison(T, 5767.0, 56.2, Seed(s)).ratios for s in range(4)], axis=0)
    np.testing.assert_allclose(got, theory_comparison(31, 961), rtol=0.15)


def test_simulate_comparison_errors():
    with pytest.raises(ValueError):
        simulate_comparison(np.ones((32, 32)) * 0.5, 100.0, 1.0, Seed(0))
    with pytest.raises(ValueError):
        simulate_comparison(glyph_stencil(31), 0.0, 1.0, Seed(0))
    with pytest.raises(ValueError):
        simulate_comparison(glyph_stencil(31), 10.0, 0.0, Seed(0))
