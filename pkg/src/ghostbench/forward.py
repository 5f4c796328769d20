"""Photon budget bookkeeping, the bucket forward model and noise channels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (BucketVector, MaskEnsemble, NoiseSpec, Seed, _as_seed,
                   as_image_array, derive_seed)

__all__ = [
    "PhotonBudget",
    "expected_buckets",
    "forward_sums",
    "apply_noise",
    "noise_draw",
    "simulate_direct",
    "simulate_scan_probe",
    "POISSON_GAUSS_SWITCH",
]

# expected counts above which shot noise is drawn from its normal limit
POISSON_GAUSS_SWITCH = 1e6


@dataclass(frozen=True)
class PhotonBudget:
    """Illumination budget of a ghost-imaging experiment.

    Parameters
    ----------
    flux_B : float
        Incident flux, photons/s/mm^2.
    t0_s : float
        Exposure per measurement, s.
    J : int
        Number of measurements.
    pitch_mm : float
        Pixel pitch, mm.
    """

    flux_B: float
    t0_s: float
    J: int
    pitch_mm: float

    def __post_init__(self):
        if not (self.flux_B > 0 and self.t0_s > 0 and self.pitch_mm > 0 and self.J >= 1):
            raise ValueError("photon budget parameters must be positive")

    @property
    def photon_scale(self) -> float:
        """Photons per pixel per measurement at unit transmission."""
        return self.flux_B * self.t0_s * self.pitch_mm ** 2

    @property
    def P(self) -> float:
        """Incident photons per pixel over the whole experiment."""
        return self.flux_B * self.J * self.t0_s * self.pitch_mm ** 2

    @property
    def tau_s(self) -> float:
        return self.J * self.t0_s

    @classmethod
    def constant_tau(cls, flux_B, tau_s, J, pitch_mm):
        """Budget with the total time ``tau_s`` shared across ``J`` measurements."""
        return cls(flux_B, tau_s / J, J, pitch_mm)


def forward_sums(T, ens: MaskEnsemble) -> np.ndarray:
    """``sum_{x,y} A_j(x,y) T(x,y)`` for every mask (unit photon scale)."""
    T = as_image_array(T, "T")
    if T.shape[0] != ens.n:
        raise ValueError(f"object side {T.shape[0]} != mask side {ens.n}")
    t = T.ravel()
    out = np.empty(ens.J)
    for start, blk in ens.blocks():
        out[start:start + blk.shape[0]] = blk.reshape(blk.shape[0], -1) @ t
    return out


def expected_buckets(T, ens: MaskEnsemble, budget: PhotonBudget) -> BucketVector:
    """Noise-free bucket signals in photons."""
    s = budget.photon_scale
    return BucketVector(s * forward_sums(T, ens), exposure_s=budget.t0_s,
                        noise=None, photon_scale=s)


def _poisson(rng: np.random.Generator, lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=np.float64)
    out = np.empty_like(lam)
    big = lam > POISSON_GAUSS_SWITCH
    small = ~big
    out[small] = rng.poisson(lam[small])
    if big.any():
        lb = lam[big]
        out[big] = lb + np.sqrt(lb) * rng.standard_normal(lb.shape)
    return out


def noise_draw(values, noise: NoiseSpec, seed) -> tuple[np.ndarray, np.ndarray]:
    """Separate shot-noise and read-noise perturbations of expected values.

    Returns ``(dp, dm)`` so that the noisy signal is ``values + dp + dm``.
    Shot and read noise use independent derived streams.
    """
    seed = _as_seed(seed)
    v = np.asarray(values, dtype=np.float64)
    dp = np.zeros_like(v)
    dm = np.zeros_like(v)
    if noise.has_poisson:
        if np.any(v < 0):
            raise ValueError("Poisson noise needs non-negative expected values")
        sp2 = noise.sigma_p ** 2
        if sp2 > 0:
            rng = derive_seed(seed, "poisson").generator()
            dp = sp2 * _poisson(rng, v / sp2) - v
    if noise.has_gaussian and noise.sigma_m > 0:
        rng = derive_seed(seed, "gaussian").generator()
        dm = noise.sigma_m * rng.standard_normal(v.shape)
    return dp, dm


def apply_noise(b: BucketVector, noise: NoiseSpec, seed) -> BucketVector:
    """Add shot noise (variance ``sigma_p**2 * value``) and/or read noise."""
    dp, dm = noise_draw(b.values, noise, seed)
    return BucketVector(b.values + dp + dm, exposure_s=b.exposure_s,
                        noise=noise, photon_scale=b.photon_scale)


def _pixel_detector(T, photons, noise, seed, name):
    T = as_image_array(T, "T")
    if not photons > 0:
        raise ValueError(f"{name} must be positive")
    expected = photons * T
    dp, dm = noise_draw(expected, noise, derive_seed(_as_seed(seed), "pixels"))
    return (expected + dp + dm) / photons


def simulate_direct(T, D_px: float, noise: NoiseSpec, seed) -> np.ndarray:
    """Direct image with ``D_px`` incident photons per pixel, in transmission units."""
    return _pixel_detector(T, D_px, noise, seed, "D_px")


def simulate_scan_probe(T, dwell_photons: float, noise: NoiseSpec, seed) -> np.ndarray:
    """Raster-scanned pinhole image, ``dwell_photons`` incident per pixel.

    Each pixel is measured once with its own dwell, which is the same
    per-pixel process as a direct exposure of equal dose.
    """
    return _pixel_detector(T, dwell_photons, noise, seed, "dwell_photons")
