"""Shared domain types, seeded random streams and basic image statistics.

Images are plain two-dimensional ``float64`` arrays throughout the numerical
code.  :class:`Image` is a thin validated wrapper that also carries the pixel
pitch and is used at the I/O boundary.
"""

from __future__ import annotations

import enum
import hashlib
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, Optional

import numpy as np

__all__ = [
    "Image",
    "Family",
    "MaskEnsemble",
    "NoiseKind",
    "NoiseSpec",
    "BucketVector",
    "Seed",
    "derive_seed",
    "image_stats",
    "ensemble_stats",
    "as_image_array",
    "NumericalError",
]

# Masks are generated in fixed-size chunks so that the content of a lazily
# generated ensemble does not depend on how it is later iterated.
GEN_CHUNK = 256
# Target size of one float64 block handed to consumers.
BLOCK_BYTES = 32 * 2**20
# Ensembles whose compact storage fits under this many bytes are kept in memory
# after the first full pass.
CACHE_BYTES = 600 * 2**20


class NumericalError(RuntimeError):
    """Raised when a numerical procedure fails (divergence, singular system)."""


def as_image_array(img, name="image") -> np.ndarray:
    """Return ``img`` as a square, finite, two-dimensional float64 array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square 2-D array, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ValueError(f"{name} side length must be at least 2")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class Image:
    """Square real-valued image with a physical pixel pitch.

    Parameters
    ----------
    pixels : ndarray
        ``n x n`` finite values.
    pitch_mm : float, optional
        Pixel pitch in millimetres.  Defaults to ``1/n`` (unit field of view).
    transmission : bool
        If true, values must be non-negative.
    """

    pixels: np.ndarray
    pitch_mm: Optional[float] = None
    transmission: bool = False

    def __post_init__(self):
        arr = as_image_array(self.pixels, "Image.pixels")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)
        if self.pitch_mm is None:
            object.__setattr__(self, "pitch_mm", 1.0 / arr.shape[0])
        if not self.pitch_mm > 0:
            raise ValueError("pitch_mm must be positive")
        if self.transmission and arr.min() < 0:
            raise ValueError("transmission images must be non-negative")

    @property
    def n(self) -> int:
        return self.pixels.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.pixels
        return self.pixels.astype(dtype)


# ---------------------------------------------------------------------------
# Seeds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Seed:
    """A 64-bit seed together with the name of the stream it feeds."""

    value: int
    label: str = "root"

    def __post_init__(self):
        if not 0 <= int(self.value) < 2**64:
            raise ValueError("seed value must be a 64-bit unsigned integer")
        object.__setattr__(self, "value", int(self.value))

    def generator(self) -> np.random.Generator:
        """Fresh PCG64 generator seeded from this seed only."""
        return np.random.Generator(np.random.PCG64(self.value))


def derive_seed(root: Seed, label: str) -> Seed:
    """Derive a child seed from ``root`` and a stream label.

    The child value is a BLAKE2b hash of the parent value and label, so the
    same pair always yields the same child and distinct labels give
    unrelated streams.
    """
    h = hashlib.blake2b(digest_size=8, person=b"ghostbench")
    h.update(root.value.to_bytes(8, "little"))
    h.update(label.encode("utf-8"))
    return Seed(int.from_bytes(h.digest(), "little"), f"{root.label}/{label}")


def _as_seed(seed) -> Seed:
    if isinstance(seed, Seed):
        return seed
    return Seed(int(seed))


# ---------------------------------------------------------------------------
# Noise and buckets
# ---------------------------------------------------------------------------


class NoiseKind(str, enum.Enum):
    NONE = "none"
    POISSON = "poisson"
    GAUSSIAN = "gaussian"
    BOTH = "both"


@dataclass(frozen=True)
class NoiseSpec:
    """Noise channel description.

    ``sigma_p`` scales shot noise (variance ``sigma_p**2 * value``) and
    ``sigma_m`` is the standard deviation of additive read noise in photons.
    Each field is ignored unless its kind is active.
    """

    kind: NoiseKind = NoiseKind.NONE
    sigma_p: float = 1.0
    sigma_m: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.sigma_p < 0 or self.sigma_m < 0:
            raise ValueError("noise scales must be non-negative")

    @classmethod
    def none(cls):
        return cls(NoiseKind.NONE)

    @classmethod
    def poisson(cls, sigma_p=1.0):
        return cls(NoiseKind.POISSON, sigma_p=sigma_p)

    @classmethod
    def gaussian(cls, sigma_m):
        return cls(NoiseKind.GAUSSIAN, sigma_m=sigma_m)

    @classmethod
    def both(cls, sigma_p, sigma_m):
        return cls(NoiseKind.BOTH, sigma_p=sigma_p, sigma_m=sigma_m)

    @property
    def has_poisson(self) -> bool:
        return self.kind in (NoiseKind.POISSON, NoiseKind.BOTH)

    @property
    def has_gaussian(self) -> bool:
        return self.kind in (NoiseKind.GAUSSIAN, NoiseKind.BOTH)


@dataclass(frozen=True)
class BucketVector:
    """Bucket signals for one acquisition.

    Attributes
    ----------
    values : ndarray, shape (J,)
        Bucket values in photons.
    exposure_s : float
        Exposure per measurement.
    noise : NoiseSpec or None
        Noise applied so far; ``None`` for expected values.
    photon_scale : float
        Expected photons per unit of ``sum(A_j * T)``.
    """

    values: np.ndarray
    exposure_s: float = 1.0
    noise: Optional[NoiseSpec] = None
    photon_scale: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel().copy()
        if v.size < 1:
            raise ValueError("bucket vector must not be empty")
        if not np.all(np.isfinite(v)):
            raise ValueError("bucket values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if not self.photon_scale > 0:
            raise ValueError("photon_scale must be positive")

    @property
    def J(self) -> int:
        return self.values.size


# ---------------------------------------------------------------------------
# Mask ensembles
# ---------------------------------------------------------------------------


class Family(str, enum.Enum):
    RANDOM_BINARY = "RandomBinary"
    RANDOM_GRAY = "RandomGray"
    BLURRED = "Blurred"
    HADAMARD = "Hadamard"
    URA_SCAN = "UraScan"
    PINHOLE_SCAN = "PinholeScan"


ORTHOGONAL_FAMILIES = (Family.HADAMARD, Family.URA_SCAN, Family.PINHOLE_SCAN)


@dataclass(frozen=True)
class _Stats:
    mu: float
    sigma: float
    pixel_mean: np.ndarray
    pixel_var: np.ndarray
    sums: np.ndarray
    vmin: float
    vmax: float


@dataclass(frozen=True, eq=False)
class MaskEnsemble:
    """Ordered set of ``J`` illumination patterns of side ``n``.

    Masks are either held in memory (``data``) or produced on demand by
    ``source(start, stop)``, which must return the masks with indices
    ``start..stop-1`` as an array of shape ``(stop - start, n, n)``.  Sources
    must be deterministic.  Statistics are computed in one streaming pass the
    first time any of them is requested.

    Parameters
    ----------
    n, J : int
        Mask side length and number of masks.
    family : Family
    data : ndarray, optional
        ``(J, n, n)`` mask values; any real or integer dtype.
    source : callable, optional
        Lazy mask producer, used when ``data`` is not given.
    orthogonal_gain : float, optional
        Exact normalisation of the mean-corrected adjoint for orthogonal
        families (see :func:`ghostbench.recon.compute_gamma`).
    scale : float
        Multiplier applied to stored values (lets half-integer masks be held
        as small integers).
    params : dict
        Generator parameters, for provenance only.
    """

    n: int
    J: int
    family: Family
    data: Optional[np.ndarray] = None
    source: Optional[Callable[[int, int], np.ndarray]] = None
    orthogonal_gain: Optional[float] = None
    scale: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.n < 2 or self.J < 1:
            raise ValueError("ensemble requires n >= 2 and J >= 1")
        if self.data is None and self.source is None:
            raise ValueError("ensemble needs either data or a source")
        if self.data is not None:
            d = np.asarray(self.data).view()  # freeze a view, not the caller's array
            if d.shape != (self.J, self.n, self.n):
                raise ValueError(f"mask data shape {d.shape} != {(self.J, self.n, self.n)}")
            d.flags.writeable = False
            object.__setattr__(self, "data", d)

    # -- access -----------------------------------------------------------

    @property
    def is_lazy(self) -> bool:
        return self.data is None and "_cache" not in self.__dict__

    def _raw(self, start: int, stop: int) -> np.ndarray:
        if self.data is not None:
            return self.data[start:stop]
        cache = self.__dict__.get("_cache")
        if cache is not None:
            return cache[start:stop]
        return self.source(start, stop)

    def get(self, start: int, stop: Optional[int] = None) -> np.ndarray:
        """Masks ``start..stop-1`` as a float64 array."""
        if stop is None:
            stop = start + 1
        if not 0 <= start < stop <= self.J:
            raise IndexError("mask range out of bounds")
        out = np.asarray(self._raw(start, stop), dtype=np.float64)
        if self.scale != 1.0:
            out = out * self.scale
        return out

    def block_size(self) -> int:
        b = max(1, BLOCK_BYTES // (8 * self.n * self.n))
        if b >= GEN_CHUNK:
            b -= b % GEN_CHUNK
        return b

    def blocks(self) -> Iterator[tuple[int, np.ndarray]]:
        """Yield ``(start, masks)`` float64 blocks covering the ensemble in order.

        A lazy ensemble is cached in compact form during its first full pass
        when it fits in the cache budget.
        """
        b = self.block_size()
        fill = None
        if self.data is None and "_cache" not in self.__dict__:
            probe = self.source(0, min(self.J, 1))
            nbytes = probe.dtype.itemsize * self.J * self.n * self.n
            if nbytes <= CACHE_BYTES:
                fill = np.empty((self.J, self.n, self.n), dtype=probe.dtype)
        for start in range(0, self.J, b):
            stop = min(self.J, start + b)
            raw = self._raw(start, stop)
            if fill is not None:
                fill[start:stop] = raw
            out = np.asarray(raw, dtype=np.float64)
            if self.scale != 1.0:
                out = out * self.scale
            yield start, out
        if fill is not None:
            fill.flags.writeable = False
            self.__dict__["_cache"] = fill

    @property
    def masks(self) -> np.ndarray:
        """All masks as a ``(J, n, n)`` float64 array (materialised)."""
        nbytes = 8 * self.J * self.n * self.n
        if nbytes > 4 * CACHE_BYTES:
            warnings.warn(f"materialising {nbytes / 2**30:.1f} GiB of masks", ResourceWarning)
        return self.get(0, self.J)

    def matrix(self) -> np.ndarray:
        """Masks as a ``(J, n*n)`` float64 matrix."""
        return self.masks.reshape(self.J, -1)

    def subset(self, indices) -> "MaskEnsemble":
        """Ensemble of the selected masks, in the given order."""
        idx = np.asarray(indices, dtype=np.int64).ravel()
        if idx.size < 1 or idx.min() < 0 or idx.max() >= self.J:
            raise IndexError("subset indices out of range")
        if self.data is not None or "_cache" in self.__dict__:
            raw = self._raw(0, self.J)[idx]
        else:
            raw = np.empty((idx.size, self.n, self.n))
            for start, blk in self.blocks():
                sel = (idx >= start) & (idx < start + blk.shape[0])
                raw[sel] = blk[idx[sel] - start] / self.scale
        return MaskEnsemble(
            self.n, idx.size, self.family, data=np.ascontiguousarray(raw),
            orthogonal_gain=self.orthogonal_gain, scale=self.scale,
            params={**self.params, "subset_of": self.J},
        )

    # -- statistics -------------------------------------------------------

    @cached_property
    def _stats(self) -> _Stats:
        n2 = self.n * self.n
        count = 0
        mean = 0.0
        m2 = 0.0
        psum = np.zeros((self.n, self.n))
        psq = np.zeros((self.n, self.n))
        sums = np.empty(self.J)
        vmin, vmax = np.inf, -np.inf
        for start, blk in self.blocks():
            flat = blk.reshape(blk.shape[0], n2)
            s = flat.sum(axis=1)
            sums[start:start + blk.shape[0]] = s
            psum += blk.sum(axis=0)
            psq += np.einsum("jxy,jxy->xy", blk, blk)
            nb = flat.size
            bmean = s.sum() / nb
            bm2 = float(np.sum((flat - bmean) ** 2))
            # pairwise (Chan et al.) merge of running moments
            delta = bmean - mean
            tot = count + nb
            mean += delta * nb / tot
            m2 += bm2 + delta * delta * count * nb / tot
            count = tot
            vmin = min(vmin, float(flat.min()))
            vmax = max(vmax, float(flat.max()))
        pixel_mean = psum / self.J
        pixel_var = np.maximum(psq / self.J - pixel_mean ** 2, 0.0)
        for a in (pixel_mean, pixel_var, sums):
            a.flags.writeable = False
        return _Stats(mean, float(np.sqrt(max(m2, 0.0) / count)), pixel_mean,
                      pixel_var, sums, vmin, vmax)

    @property
    def mu_A(self) -> float:
        return self._stats.mu

    @property
    def sigma_A(self) -> float:
        return self._stats.sigma

    @property
    def pixel_mean(self) -> np.ndarray:
        """Per-pixel ensemble mean transmission."""
        return self._stats.pixel_mean

    @property
    def pixel_var(self) -> np.ndarray:
        """Per-pixel ensemble variance of the transmission."""
        return self._stats.pixel_var

    @property
    def mask_sums(self) -> np.ndarray:
        """Total transmission of each mask."""
        return self._stats.sums

    @property
    def value_range(self) -> tuple[float, float]:
        return self._stats.vmin, self._stats.vmax

    @property
    def constant_sum(self) -> Optional[float]:
        """Common mask sum ``k`` if all masks agree within 1e-9 relative."""
        s = self._stats.sums
        k = float(s.mean())
        tol = 1e-9 * max(abs(k), np.finfo(float).tiny)
        if np.all(np.abs(s - k) <= tol):
            return k
        return None

    def mean_corrected(self, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        """Mean-corrected masks ``A_j - <A>(x, y)`` for a range of indices."""
        stop = self.J if stop is None else stop
        return self.get(start, stop) - self.pixel_mean


def image_stats(img) -> tuple[float, float]:
    """Population mean and standard deviation over all pixels."""
    arr = np.asarray(img, dtype=np.float64)
    mu = float(arr.mean())
    return mu, float(np.sqrt(np.mean((arr - mu) ** 2)))


def ensemble_stats(ens: MaskEnsemble) -> tuple[float, float, Optional[float]]:
    """Pooled mean and standard deviation over all ``J*n*n`` samples, and the
    common mask sum if there is one."""
    return ens.mu_A, ens.sigma_A, ens.constant_sum
