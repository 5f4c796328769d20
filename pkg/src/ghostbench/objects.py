"""Test objects: procedural glyph stencils and random transmission images.

Glyph geometry
--------------
Each glyph lives in a box of width 0.5 and height 1 (letter-height units,
``y`` pointing up) and is a union of straight strokes of width ``s``:

* ``X``: two diagonals of the box, drawn as capsules and clipped to the box.
* ``G``: left bar, top and bottom bars, right bar over the lower half and an
  inward spur at mid height.
* ``I``: centred vertical bar with full-width top and bottom serifs.

Letters are spaced by 0.1 letter heights and the text block is centred in
the field of view.  A pixel is inside a glyph when its centre is.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .core import _as_seed

__all__ = ["render_text", "glyph_stencil", "uniform_object", "rotate_image"]

_BOX_W = 0.5
_GAP = 0.1


def _inside_glyph(ch: str, x: np.ndarray, y: np.ndarray, s: float) -> np.ndarray:
    box = (x >= 0) & (x <= _BOX_W) & (y >= 0) & (y <= 1)

    def rect(x0, x1, y0, y1):
        return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)

    def seg(ax, ay, bx, by):
        dx, dy = bx - ax, by - ay
        t = np.clip(((x - ax) * dx + (y - ay) * dy) / (dx * dx + dy * dy), 0, 1)
        return (x - ax - t * dx) ** 2 + (y - ay - t * dy) ** 2 <= (s / 2) ** 2

    if ch == "X":
        m = seg(0, 0, _BOX_W, 1) | seg(0, 1, _BOX_W, 0)
    elif ch == "G":
        m = (rect(0, s, 0, 1) | rect(0, _BOX_W, 1 - s, 1) | rect(0, _BOX_W, 0, s)
             | rect(_BOX_W - s, _BOX_W, 0, 0.5) | rect(0.25, _BOX_W, 0.5 - s, 0.5))
    elif ch == "I":
        c = _BOX_W / 2
        m = rect(c - s / 2, c + s / 2, 0, 1) | rect(0.05, _BOX_W - 0.05, 0, s) | rect(0.05, _BOX_W - 0.05, 1 - s, 1)
    elif ch == " ":
        m = np.zeros_like(box)
    else:
        raise ValueError(f"no glyph for {ch!r}")
    return m & box


def render_text(n: int, text: str = "XGI", height_frac: float = 0.5, stroke: float = 0.14) -> np.ndarray:
    """Binary ``n x n`` image of ``text`` in block glyphs.

    Parameters
    ----------
    height_frac : float
        Letter height as a fraction of the field of view.
    stroke : float
        Stroke width in letter heights.
    """
    h = height_frac
    width = h * (len(text) * _BOX_W + (len(text) - 1) * _GAP)
    if width > 1:
        raise ValueError("text does not fit in the field of view")
    c = (np.arange(n) + 0.5) / n  # pixel centres in field units
    # row 0 is the top of the field
    X, Y = np.meshgrid(c, 1.0 - c, indexing="xy")
    x0 = (1 - width) / 2
    y0 = (1 - h) / 2
    out = np.zeros((n, n), dtype=bool)
    for i, ch in enumerate(text):
        lx = (X - x0) / h - i * (_BOX_W + _GAP)
        ly = (Y - y0) / h
        out |= _inside_glyph(ch, lx, ly, stroke)
    return out.astype(np.float64)


def rotate_image(img: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rotate about the centre with bilinear resampling, clamped to [0, 1]."""
    if angle_deg % 360 == 0:
        return np.array(img, dtype=np.float64)
    r = ndimage.rotate(np.asarray(img, dtype=np.float64), angle_deg, reshape=False,
                       order=1, mode="constant", cval=0.0)
    return np.clip(r, 0.0, 1.0)


def glyph_stencil(n: int = 31, low: float = 0.25, high: float = 0.75,
                 open_fraction: float = 0.29, text: str = "GI") -> np.ndarray:
    """Two-level glyph stencil with a prescribed open-area fraction.

    The stroke width is chosen by bisection so the glyph area is as close as
    possible to ``open_fraction``; the remaining few pixels are then added
    (from the glyph boundary outward) or removed in raster order so that
    exactly ``round(open_fraction * n^2)`` pixels are open.  With the defaults
    the mean is 0.395 and the standard deviation 0.227.
    """
    target = int(round(open_fraction * n * n))
    lo, hi = 0.02, 0.45
    for _ in range(40):
        mid = (lo + hi) / 2
        if render_text(n, text, 0.8, mid).sum() < target:
            lo = mid
        else:
            hi = mid
    m = render_text(n, text, 0.8, hi).astype(bool)
    excess = int(m.sum()) - target
    if excess > 0:
        idx = np.flatnonzero(m.ravel())[::-1][:excess]
        m.ravel()[idx] = False
    while excess < 0:
        ring = ndimage.binary_dilation(m) & ~m
        idx = np.flatnonzero(ring.ravel())[: -excess]
        m.ravel()[idx] = True
        excess = int(m.sum()) - target
    return np.where(m, high, low)


def uniform_object(n: int, mu_T: float, sigma_T: float, seed) -> np.ndarray:
    """Uniform random transmission image with the given mean and std.

    Values are ``mu_T + sigma_T*sqrt(12)*(U - 1/2)``; the support must stay in
    [0, 1] (a 1e-3 relative margin admits rounded inputs such as 0.2887).
    """
    half = math.sqrt(3.0) * sigma_T
    if mu_T - half < -1e-3 * half or mu_T + half > 1 + 1e-3 * half:
        raise ValueError(f"(mu_T={mu_T}, sigma_T={sigma_T}) leaves [0, 1]")
    u = _as_seed(seed).generator().random((n, n))
    return np.clip(mu_T + 2 * half * (u - 0.5), 0.0, 1.0)
