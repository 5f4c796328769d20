"""Mask ensemble generators and orthogonality checks."""

from __future__ import annotations

import math
import warnings
from typing import Optional

import numpy as np
import scipy.linalg

from .core import Family, MaskEnsemble, Seed, _as_seed, derive_seed, GEN_CHUNK

__all__ = [
    "gen_random_binary",
    "gen_random_gray",
    "blur_masks",
    "gaussian_kernel",
    "gen_hadamard",
    "gen_ura_scan",
    "ura_base_pattern",
    "gen_pinhole_scan",
    "gram_mean_corrected",
    "gram_numerators",
    "select_masks",
    "is_prime",
    "largest_prime_at_most",
]

GRAM_BUDGET = 2**27  # J*n*n samples above which a Gram request warns


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % d for d in range(2, math.isqrt(p) + 1))


def largest_prime_at_most(n: int) -> int:
    for p in range(n, 2, -1):
        if is_prime(p):
            return p
    raise ValueError(f"no odd prime <= {n}")


class _ChunkedSource:
    """Deterministic lazy mask producer built from per-chunk seeded draws."""

    def __init__(self, n, J, seed: Seed, make_chunk):
        self.n, self.J, self.seed = n, J, seed
        self.make_chunk = make_chunk

    def __call__(self, start, stop):
        c0, c1 = start // GEN_CHUNK, (stop - 1) // GEN_CHUNK
        parts = []
        for c in range(c0, c1 + 1):
            m = min(GEN_CHUNK, self.J - c * GEN_CHUNK)
            rng = derive_seed(self.seed, f"chunk{c}").generator()
            parts.append(self.make_chunk(rng, m))
        out = parts[0] if len(parts) == 1 else np.concatenate(parts)
        off = c0 * GEN_CHUNK
        return out[start - off:stop - off]


def gen_random_binary(n: int, J: int, mu_A: float, seed) -> MaskEnsemble:
    """Random binary masks; each pixel is 1 with probability ``mu_A``.

    Masks are generated lazily in seeded chunks and stored as ``uint8``.
    """
    if not 0.0 <= mu_A <= 1.0:
        raise ValueError("mu_A must lie in [0, 1]")
    if n < 2 or J < 1:
        raise ValueError("need n >= 2 and J >= 1")
    seed = derive_seed(_as_seed(seed), "random_binary")
    thr = np.float64(mu_A)

    def make(rng, m):
        return (rng.random((m, n, n)) < thr).astype(np.uint8)

    return MaskEnsemble(n, J, Family.RANDOM_BINARY,
                        source=_ChunkedSource(n, J, seed, make),
                        params={"mu_A": mu_A, "seed": seed.value})


def gen_random_gray(n: int, J: int, mu_A: float, sigma_A: float, seed) -> MaskEnsemble:
    """Random grey masks drawn from a scaled and offset uniform distribution.

    Values are ``mu_A + sigma_A*sqrt(12)*(U - 1/2)`` with ``U ~ U[0, 1)``,
    so the mean is ``mu_A`` and the standard deviation ``sigma_A``.
    """
    if n < 2 or J < 1:
        raise ValueError("need n >= 2 and J >= 1")
    if not 0.0 <= mu_A <= 1.0 or sigma_A < 0:
        raise ValueError("need mu_A in [0, 1] and sigma_A >= 0")
    bound = min(mu_A, 1.0 - mu_A) / math.sqrt(3.0)
    # the printed value 0.2887 of 1/sqrt(12) must be accepted, so allow a
    # rounding margin and clip the negligible overshoot
    if sigma_A > bound * (1 + 1e-3) + 1e-12:
        raise ValueError(
            f"sigma_A={sigma_A} puts the uniform support outside [0, 1] "
            f"(maximum {bound:.4f} for mu_A={mu_A})")
    seed = derive_seed(_as_seed(seed), "random_gray")
    width = sigma_A * math.sqrt(12.0)

    def make(rng, m):
        u = rng.random((m, n, n))
        return np.clip(mu_A + width * (u - 0.5), 0.0, 1.0)

    return MaskEnsemble(n, J, Family.RANDOM_GRAY,
                        source=_ChunkedSource(n, J, seed, make),
                        params={"mu_A": mu_A, "sigma_A": sigma_A, "seed": seed.value})


def gaussian_kernel(n: int, sigma_px: float) -> np.ndarray:
    """Periodic ``n x n`` Gaussian kernel centred on pixel (0, 0).

    The kernel is truncated at ``6*sigma_px``, wrapped onto the periodic grid
    and normalised to unit sum.
    """
    if not sigma_px > 0:
        raise ValueError("sigma_g must be positive")
    r = int(math.ceil(6.0 * sigma_px))
    off = np.arange(-r, r + 1)
    g = np.exp(-0.5 * (off / sigma_px) ** 2)
    g2 = np.outer(g, g)
    rr = off[:, None] ** 2 + off[None, :] ** 2
    g2[rr > (6.0 * sigma_px) ** 2] = 0.0
    k = np.zeros((n, n))
    np.add.at(k, (off[:, None] % n, off[None, :] % n), g2)
    return k / k.sum()


def blur_masks(ens: MaskEnsemble, sigma_g_px: float) -> MaskEnsemble:
    """Convolve every mask with a normalised periodic Gaussian kernel.

    The returned ensemble is lazy; blurring is redone on each pass unless the
    result fits the cache.
    """
    kern = gaussian_kernel(ens.n, sigma_g_px)
    khat = np.fft.rfft2(kern)
    khat[0, 0] = 1.0  # unit DC gain exactly
    n = ens.n

    def source(start, stop):
        a = ens.get(start, stop)
        out = np.fft.irfft2(np.fft.rfft2(a) * khat, s=(n, n))
        flat = a.reshape(a.shape[0], -1)
        const = flat.max(axis=1) == flat.min(axis=1)
        out[const] = a[const]  # convolution leaves constants unchanged
        return np.clip(out, 0.0, 1.0)

    return MaskEnsemble(n, ens.J, Family.BLURRED, source=source,
                        params={**ens.params, "base_family": ens.family.value,
                                "sigma_g_px": sigma_g_px})


def gen_hadamard(n: int) -> MaskEnsemble:
    """Sylvester-Hadamard masks: rows of ``(H + 1)/2`` reshaped to ``n x n``.

    ``n`` must be a power of two.  The first mask is all ones, so pixel
    (0, 0) is never modulated; its value is recovered from the mean signal
    during reconstruction.
    """
    if n < 2 or n & (n - 1):
        raise ValueError("Hadamard masks need n to be a power of two")
    h = scipy.linalg.hadamard(n * n, dtype=np.int8)
    data = ((h + 1) // 2).astype(np.uint8).reshape(n * n, n, n)
    return MaskEnsemble(n, n * n, Family.HADAMARD, data=data,
                        orthogonal_gain=n * n / 4.0, params={"n": n})


def _quadratic_character(p: int) -> np.ndarray:
    chi = -np.ones(p, dtype=np.int64)
    chi[(np.arange(1, p) ** 2) % p] = 1
    chi[0] = 0
    return chi


def ura_base_pattern(p: int) -> np.ndarray:
    """Base pattern ``2*a`` (values 0, 1, 2) of a translation-orthogonal array.

    ``a(x, y) = (1 + chi(x^2 - r*y^2))/2`` where ``chi`` is the quadratic
    character mod ``p`` and ``r`` a quadratic non-residue.  The form
    ``x^2 - r*y^2`` is the field norm of GF(p^2), so ``a`` is the quadratic
    character of that field lifted to [0, 1].  Its periodic autocorrelation
    is two-valued: every non-zero spatial frequency has power ``p^2/4``.  The
    single origin pixel takes the value 1/2.
    """
    if p < 3 or not is_prime(p):
        raise ValueError("URA side length must be an odd prime")
    chi = _quadratic_character(p)
    r = next(i for i in range(2, p) if chi[i] == -1)
    x = np.arange(p)[:, None]
    y = np.arange(p)[None, :]
    q = (x * x - r * y * y) % p
    return (1 + chi[q]).astype(np.uint8)


def gen_ura_scan(p: int) -> MaskEnsemble:
    """All ``p*p`` cyclic translations of a translation-orthogonal pattern.

    Mask ``j = dx*p + dy`` is the base pattern shifted by ``(dx, dy)``.
    Every mask has sum ``p*p/2`` and the mean-corrected masks have
    ``sum_j A~_j(x) A~_j(x') = (p*p/4)(delta - 1/p^2)``.
    """
    base = ura_base_pattern(p)
    data = np.empty((p * p, p, p), dtype=np.uint8)
    for dx in range(p):
        for dy in range(p):
            data[dx * p + dy] = np.roll(base, (dx, dy), axis=(0, 1))
    return MaskEnsemble(p, p * p, Family.URA_SCAN, data=data, scale=0.5,
                        orthogonal_gain=p * p / 4.0, params={"p": p})


def gen_pinhole_scan(n: int) -> MaskEnsemble:
    """Single-pixel masks; mask ``j`` opens pixel ``j`` in raster order."""
    if n < 2:
        raise ValueError("need n >= 2")
    data = np.eye(n * n, dtype=np.uint8).reshape(n * n, n, n)
    return MaskEnsemble(n, n * n, Family.PINHOLE_SCAN, data=data,
                        orthogonal_gain=1.0, params={"n": n})


def select_masks(ens: MaskEnsemble, J: int, seed: Optional[Seed] = None) -> MaskEnsemble:
    """Subset of ``J`` masks: the first ``J`` or, with a seed, a random draw.

    The orthogonal gain of the parent is kept so that partial orthogonal sets
    stay on the transmission scale.
    """
    if not 1 <= J <= ens.J:
        raise ValueError(f"J must be in [1, {ens.J}]")
    if J == ens.J and seed is None:
        return ens
    if seed is None:
        idx = np.arange(J)
    else:
        idx = np.sort(_as_seed(seed).generator().permutation(ens.J)[:J])
    return ens.subset(idx)


def gram_numerators(ens: MaskEnsemble) -> tuple[np.ndarray, float]:
    """Exact mean-corrected Gram matrix for integer-stored ensembles.

    Returns ``(N, d)`` with integer ``N`` such that ``G = N / d``.  With stored
    integers ``R`` and column sums ``S``, ``J*A~_j = scale*(J*R_j - S)``.
    """
    if ens.data is None or not np.issubdtype(ens.data.dtype, np.integer):
        raise TypeError("exact Gram needs integer-stored masks")
    R = ens.data.reshape(ens.J, -1).astype(np.int64)
    S = R.sum(axis=0)
    D = ens.J * R - S
    N = D @ D.T
    return N, ens.J ** 2 / ens.scale ** 2


def gram_mean_corrected(ens: MaskEnsemble, memory_budget: int = GRAM_BUDGET) -> np.ndarray:
    """``G[i, j] = sum_x A~_i(x) A~_j(x)`` with the per-pixel ensemble mean removed."""
    if ens.J * ens.n * ens.n > memory_budget:
        warnings.warn("Gram matrix request exceeds the memory budget", ResourceWarning)
    At = ens.mean_corrected().reshape(ens.J, -1)
    return At @ At.T
