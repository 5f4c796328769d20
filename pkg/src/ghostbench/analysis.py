"""Point-spread and Green's functions, RMSE/SNR, and closed-form SNR laws."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import MaskEnsemble, as_image_array

__all__ = [
    "greens",
    "psf",
    "predict_via_psf",
    "rmse_snr",
    "TheoryParams",
    "theory_snr0_random",
    "theory_snr0_ortho",
    "theory_snr_noise",
    "j_opt",
    "comparison_ratios",
]


def greens(ens: MaskEnsemble, x: int, y: int) -> np.ndarray:
    """Green's function ``sum_j A~_j(x, y) A~_j(., .)`` for source pixel (x, y)."""
    if not (0 <= x < ens.n and 0 <= y < ens.n):
        raise IndexError(f"pixel ({x}, {y}) outside a {ens.n}x{ens.n} grid")
    pm = ens.pixel_mean
    out = np.zeros((ens.n, ens.n))
    for _, blk in ens.blocks():
        at = blk - pm
        out += np.tensordot(at[:, x, y], at, axes=(0, 0))
    return out


def psf(ens: MaskEnsemble) -> np.ndarray:
    """Point-spread function ``(1/n^2) sum_j (A~_j star A~_j)``.

    Periodic autocorrelation, shifted so that zero lag sits at pixel
    ``(n//2, n//2)``.
    """
    n = ens.n
    pm_hat = np.fft.rfft2(ens.pixel_mean)
    acc = np.zeros((n, n // 2 + 1))
    for _, blk in ens.blocks():
        f = np.fft.rfft2(blk) - pm_hat
        acc += np.sum(f.real ** 2 + f.imag ** 2, axis=0)
    corr = np.fft.irfft2(acc, s=(n, n)) / (n * n)
    return np.fft.fftshift(corr)


def predict_via_psf(T, psf_img) -> np.ndarray:
    """Periodic convolution of ``T`` with a centred PSF."""
    T = as_image_array(T, "T")
    p = as_image_array(psf_img, "psf")
    if T.shape != p.shape:
        raise ValueError("T and psf must have the same shape")
    kern = np.fft.ifftshift(p)
    return np.fft.irfft2(np.fft.rfft2(T) * np.fft.rfft2(kern), s=T.shape)


def rmse_snr(T_hat, T) -> tuple[float, float]:
    """Root-mean-square error and ``SNR = 1/RMSE`` (``inf`` when exact)."""
    a = np.asarray(T_hat, dtype=np.float64)
    b = np.asarray(T, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("images must have the same shape")
    rmse = float(np.sqrt(np.mean((a - b) ** 2)))
    return rmse, (math.inf if rmse == 0 else 1.0 / rmse)


@dataclass(frozen=True)
class TheoryParams:
    """Parameters of the closed-form SNR laws.

    ``P`` is the incident photon count per pixel over the experiment,
    ``sigma_p`` the shot-noise scale and ``sigma_m`` the read-noise
    standard deviation in photons.
    """

    J: int
    n: int
    mu_A: float = 0.5
    sigma_A: float = 0.5
    mu_T: float = 0.5
    sigma_T: float = 1.0 / math.sqrt(12.0)
    P: float = math.inf
    sigma_p: float = 0.0
    sigma_m: float = 0.0

    @property
    def binary_bound_violated(self) -> bool:
        """True if ``sigma_A`` exceeds the binary-mask maximum for ``mu_A``."""
        return self.sigma_A > math.sqrt(max(self.mu_A * (1 - self.mu_A), 0.0)) * (1 + 1e-12)


def theory_snr0_random(p: TheoryParams) -> float:
    """Noise-free SNR of the scaled adjoint for random masks."""
    if p.J < 1:
        raise ValueError("J must be >= 1")
    return math.sqrt(p.J / (p.n ** 2 * (p.mu_T ** 2 + p.sigma_T ** 2)))


def theory_snr0_ortho(p: TheoryParams) -> float:
    """Noise-free SNR for a partial orthogonal set; ``inf`` once complete."""
    n2 = p.n ** 2
    if p.J < 1:
        raise ValueError("J must be >= 1")
    if p.J >= n2:
        return math.inf
    if p.sigma_T == 0:
        return math.inf
    return math.sqrt(n2 / ((n2 - p.J) * p.sigma_T ** 2))


def theory_snr_noise(p: TheoryParams, family: Literal["random", "ortho"] = "random"):
    """RMSE components (artefact, shot, read) and the combined SNR.

    For the ``ortho`` family with ``J < n^2`` the adjoint keeps the
    full-set normalisation ``n^2 sigma_A^2``, which scales both noise
    variances by ``(J/n^2)^2`` relative to the random-mask laws; the two
    coincide at ``J = n^2``.
    """
    if not p.P > 0:
        raise ValueError("P must be positive")
    if family == "random":
        snr0 = theory_snr0_random(p)
        fac = 1.0
    elif family == "ortho":
        snr0 = theory_snr0_ortho(p)
        fac = min(p.J / p.n ** 2, 1.0)
    else:
        raise ValueError(f"unknown family {family!r}")
    rmse0 = 0.0 if math.isinf(snr0) else 1.0 / snr0
    if math.isinf(p.P):
        rmsep = rmsem = 0.0
    else:
        rmsep = fac * math.sqrt(p.sigma_p ** 2 * p.mu_A * p.mu_T * p.n ** 2 / (p.P * p.sigma_A ** 2))
        rmsem = fac * math.sqrt(p.J * p.sigma_m ** 2 / (p.P ** 2 * p.sigma_A ** 2))
    tot = math.sqrt(rmse0 ** 2 + rmsep ** 2 + rmsem ** 2)
    return rmse0, rmsep, rmsem, (math.inf if tot == 0 else 1.0 / tot)


def j_opt(p: TheoryParams) -> float:
    """Number of measurements where the artefact and read-noise RMSE are equal
    at fixed total photon budget ``P``."""
    if not p.sigma_m > 0:
        raise ValueError("j_opt needs sigma_m > 0")
    return p.P * p.n * p.sigma_A * math.sqrt(p.mu_T ** 2 + p.sigma_T ** 2) / p.sigma_m


def comparison_ratios(p: TheoryParams) -> tuple[float, float, float, float]:
    """SNR multipliers of conventional imaging relative to ghost imaging.

    Returns ``(scan probe, direct)`` under read noise followed by
    ``(scan probe, direct)`` under shot noise; conventional SNR equals the
    ratio times the ghost-imaging SNR.
    """
    if min(p.J, p.n, p.mu_A, p.sigma_A) <= 0:
        raise ValueError("parameters must be positive")
    sp_gauss = math.sqrt(p.J / (p.n ** 4 * p.sigma_A ** 2))
    di_gauss = math.sqrt(p.J * p.mu_A ** 2 / p.sigma_A ** 2)
    sp_poisson = math.sqrt(p.mu_A / p.sigma_A ** 2)
    di_poisson = math.sqrt(p.n ** 2 * p.mu_A ** 2 / p.sigma_A ** 2)
    return sp_gauss, di_gauss, sp_poisson, di_poisson
