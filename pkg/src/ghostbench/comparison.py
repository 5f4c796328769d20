"""Dose-matched comparison of ghost imaging with scanning-probe and direct imaging.

All three modalities receive ``P`` incident photons per object pixel over the
experiment:

* ghost imaging uses a complete cyclic URA set (``J = p^2``) with
  ``P/J`` photons per pixel per mask;
* the scanning probe dwells on each pixel for ``1/n^2`` of the experiment,
  so each pixel receives ``P/n^2`` photons;
* direct imaging receives the same dose that passes the masks, ``P * mu_A``
  per pixel.

Under read noise each measurement gets the same ``sigma_m``; under shot noise
counts are Poisson.
"""

from __future__ import annotations

from dataclasses import dataclass

from .analysis import TheoryParams, comparison_ratios, rmse_snr
from .core import BucketVector, NoiseSpec, _as_seed, as_image_array, derive_seed
from .forward import forward_sums, noise_draw, simulate_direct, simulate_scan_probe
from .masks import gen_ura_scan, is_prime
from .recon import scaled_xc

__all__ = ["ComparisonResult", "simulate_comparison", "theory_comparison"]


@dataclass(frozen=True)
class ComparisonResult:
    """SNRs of the three modalities and the measured multipliers.

    Ratios are ordered as :func:`ghostbench.analysis.comparison_ratios`:
    ``(sp_gauss, di_gauss, sp_poisson, di_poisson)``.
    """

    snr_gi_gauss: float
    snr_sp_gauss: float
    snr_di_gauss: float
    snr_gi_poisson: float
    snr_sp_poisson: float
    snr_di_poisson: float

    @property
    def ratios(self) -> tuple[float, float, float, float]:
        return (self.snr_sp_gauss / self.snr_gi_gauss, self.snr_di_gauss / self.snr_gi_gauss,
                self.snr_sp_poisson / self.snr_gi_poisson, self.snr_di_poisson / self.snr_gi_poisson)


def theory_comparison(n: int, J: int, mu_A: float = 0.5, sigma_A: float = 0.5):
    """Closed-form multipliers ``(sp_gauss, di_gauss, sp_poisson, di_poisson)``."""
    return comparison_ratios(TheoryParams(J=J, n=n, mu_A=mu_A, sigma_A=sigma_A))


def _bucket_image(ens, T, P, noise, seed):
    s = P / ens.J
    clean = s * forward_sums(T, ens)
    dp, dm = noise_draw(clean, noise, seed)
    return scaled_xc(ens, BucketVector(clean + dp + dm, photon_scale=s))


def simulate_comparison(T, P: float, sigma_m: float, seed, sigma_p: float = 1.0) -> ComparisonResult:
    """Simulate all three modalities at photon budget ``P`` per pixel.

    ``T`` must be ``p x p`` with ``p`` prime.  The read-noise and shot-noise
    cases are simulated separately.
    """
    T = as_image_array(T, "T")
    p = T.shape[0]
    if not is_prime(p):
        raise ValueError("the orthogonal ghost-imaging arm needs a prime image side")
    if not P > 0 or not sigma_m > 0:
        raise ValueError("P and sigma_m must be positive")
    seed = _as_seed(seed)
    ens = gen_ura_scan(p)
    mu_A = ens.mu_A
    gauss = NoiseSpec.gaussian(sigma_m)
    shot = NoiseSpec.poisson(sigma_p)
    out = []
    for label, noise in (("gauss", gauss), ("poisson", shot)):
        gi = _bucket_image(ens, T, P, noise, derive_seed(seed, f"gi/{label}"))
        sp = simulate_scan_probe(T, P / p ** 2, noise, derive_seed(seed, f"sp/{label}"))
        di = simulate_direct(T, P * mu_A, noise, derive_seed(seed, f"di/{label}"))
        out += [rmse_snr(gi, T)[1], rmse_snr(sp, T)[1], rmse_snr(di, T)[1]]
    return ComparisonResult(*out)
