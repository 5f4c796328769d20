"""Monte-Carlo parameter sweeps comparing simulated and predicted SNR."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .analysis import TheoryParams, theory_snr_noise
from .core import BucketVector, MaskEnsemble, NoiseKind, NoiseSpec, Seed, derive_seed, image_stats
from .forward import PhotonBudget, forward_sums, noise_draw
from .masks import (blur_masks, gen_random_binary, gen_random_gray, gen_ura_scan,
                    largest_prime_at_most, select_masks)
from .objects import uniform_object
from .recon import compute_gamma, landweber, scaled_xc_many

__all__ = [
    "SnrRecord",
    "SweepConfig",
    "CSV_FIELDS",
    "VARIABLES",
    "PRESETS",
    "uniform_object",
    "make_ensemble",
    "simulate_point",
    "run_sweep",
]

CSV_FIELDS = ("sweep_name", "varied_param", "value", "family", "recon", "noise", "seed",
              "snr_sim", "snr_theory", "rmse0", "rmsep", "rmsem")
VARIABLES = ("J", "n", "mu_A", "sigma_A", "mu_T", "sigma_T", "P_per_J")
BUDGETS = ("constant_t0", "constant_tau", "noise_free")


@dataclass(frozen=True)
class SnrRecord:
    """One simulated point of a sweep.

    ``rmse0``, ``rmsep`` and ``rmsem`` are the simulated artefact, shot-noise
    and read-noise parts of the error.  They are separated using linearity
    of the reconstruction: each noise draw is reconstructed on its own.
    """

    sweep_name: str
    varied_param: str
    value: float
    family: str
    recon: str
    noise: str
    seed: int
    snr_sim: float
    snr_theory: float
    rmse0: float
    rmsep: float
    rmsem: float

    def as_row(self) -> list[str]:
        out = []
        for f in CSV_FIELDS:
            v = getattr(self, f)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out


@dataclass(frozen=True)
class SweepConfig:
    """Sweep definition.

    One parameter (``vary``) takes each of ``values``; everything else is
    fixed.  ``sigma_A = None`` selects binary random masks, otherwise grey
    masks.  The orthogonal family uses cyclic URA scans on the largest prime
    side not above ``n`` and is skipped above ``ortho_cap * n^2`` masks.
    """

    name: str
    vary: str
    values: tuple
    families: tuple = ("random",)
    noises: tuple = ("none",)
    recons: tuple = ("xc",)
    seeds: int = 10
    root_seed: int = 0
    budget: str = "constant_t0"
    J: int = 4096
    n: int = 64
    mu_A: float = 0.5
    sigma_A: Optional[float] = None
    mu_T: float = 0.5
    sigma_T: float = 1.0 / math.sqrt(12.0)
    flux_B: float = 4.1e5
    t0_s: float = 0.01
    tau_s: float = 82.0
    sigma_p: float = 1.0
    sigma_m: float = 56.2
    sigma_g_px: float = 0.0
    ortho_cap: float = 0.9
    landweber_alpha: float = 0.5
    landweber_iters: int = 0  # 0 selects round(sqrt(n))

    def __post_init__(self):
        if self.vary not in VARIABLES:
            raise ValueError(f"vary must be one of {VARIABLES}, got {self.vary!r}")
        if len(self.values) == 0:
            raise ValueError("sweep needs at least one value")
        if self.budget not in BUDGETS:
            raise ValueError(f"budget must be one of {BUDGETS}")
        for f in self.families:
            if f not in ("random", "ortho"):
                raise ValueError(f"unknown family {f!r}")
        for r in self.recons:
            if r not in ("xc", "landweber"):
                raise ValueError(f"unknown recon {r!r}")
        for k in self.noises:
            NoiseKind(k)
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")

    def at(self, value) -> "SweepConfig":
        """Copy with the varied parameter set to ``value``."""
        if self.vary == "P_per_J":
            return replace(self, t0_s=float(value) * self.n ** 2 / self.flux_B)
        if self.vary in ("J", "n"):
            value = int(round(value))
        return replace(self, **{self.vary: value})


def make_ensemble(cfg: SweepConfig, family: str, seed: Seed) -> MaskEnsemble:
    if family == "ortho":
        p = largest_prime_at_most(cfg.n)
        full = gen_ura_scan(p)
        return select_masks(full, cfg.J, derive_seed(seed, "subset"))
    if cfg.sigma_A is None:
        ens = gen_random_binary(cfg.n, cfg.J, cfg.mu_A, seed)
    else:
        ens = gen_random_gray(cfg.n, cfg.J, cfg.mu_A, cfg.sigma_A, seed)
    if cfg.sigma_g_px > 0:
        ens = blur_masks(ens, cfg.sigma_g_px)
    return ens


def _rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


def simulate_point(cfg: SweepConfig, family: str, seed: Seed) -> list[SnrRecord]:
    """All noise kinds and reconstructions for one grid point and seed.

    Masks, object and noise draws are shared across reconstructions.
    """
    ens = make_ensemble(cfg, family, derive_seed(seed, "masks"))
    n = ens.n
    T = uniform_object(n, cfg.mu_T, cfg.sigma_T, derive_seed(seed, "object"))
    mu_T, sigma_T = image_stats(T)
    pitch = 1.0 / n
    if cfg.budget == "noise_free":
        budget = None
        scale = 1.0
    else:
        t0 = cfg.tau_s / cfg.J if cfg.budget == "constant_tau" else cfg.t0_s
        budget = PhotonBudget(cfg.flux_B, t0, cfg.J, pitch)
        scale = budget.photon_scale
    clean = scale * forward_sums(T, ens)

    noises = ("none",) if budget is None else tuple(cfg.noises)
    cols = [clean]
    parts = {}
    for kind in noises:
        spec = NoiseSpec(NoiseKind(kind), sigma_p=cfg.sigma_p, sigma_m=cfg.sigma_m)
        dp, dm = noise_draw(clean, spec, derive_seed(seed, f"noise/{kind}"))
        parts[kind] = (spec, len(cols), len(cols) + 1)
        cols += [dp, dm]
    V = np.stack(cols, axis=1)
    gamma = compute_gamma(ens)
    theory_family = "ortho" if family == "ortho" else "random"

    records = []
    for recon in cfg.recons:
        if recon == "xc":
            R = scaled_xc_many(ens, V, scale, gamma)
        else:
            iters = cfg.landweber_iters or max(1, int(round(math.sqrt(n))))
            R = np.stack([landweber(ens, BucketVector(V[:, i] + (0 if i == 0 else clean), photon_scale=scale),
                                    cfg.landweber_alpha, iters, gamma=gamma) for i in range(V.shape[1])])
            # components are differences against the clean run (the map is affine)
            R[1:] -= R[0]
        base = R[0]
        for kind in noises:
            spec, ip, im = parts[kind]
            total = base + R[ip] + R[im]
            rmse_tot = _rms(total - T)
            tp = TheoryParams(
                J=ens.J, n=n, mu_A=ens.mu_A, sigma_A=ens.sigma_A, mu_T=mu_T, sigma_T=sigma_T,
                P=math.inf if budget is None else budget.P,
                sigma_p=cfg.sigma_p if spec.has_poisson else 0.0,
                sigma_m=cfg.sigma_m if spec.has_gaussian else 0.0)
            snr_th = theory_snr_noise(tp, theory_family)[3]
            records.append(SnrRecord(
                cfg.name, cfg.vary, 0.0, family, recon, kind, seed.value,
                math.inf if rmse_tot == 0 else 1.0 / rmse_tot, snr_th,
                _rms(base - T), _rms(R[ip]), _rms(R[im])))
    return records


def run_sweep(cfg: SweepConfig) -> list[SnrRecord]:
    """Run the full grid in deterministic order.

    Order is value, family, seed, then noise kind and reconstruction.  Each
    (value, family, seed) point draws from its own derived stream.
    """
    root = Seed(cfg.root_seed, cfg.name)
    out = []
    for value in cfg.values:
        pc = cfg.at(value)
        for family in cfg.families:
            if family == "ortho":
                p = largest_prime_at_most(pc.n)
                if pc.J > pc.ortho_cap * p * p:
                    continue
            for s in range(cfg.seeds):
                seed = derive_seed(root, f"{cfg.vary}={value!r}/{family}/seed{s}")
                for rec in simulate_point(pc, family, seed):
                    out.append(replace(rec, value=float(value)))
    return out


def _grid_J(lo, hi, per_octave=1):
    k = np.arange(lo * per_octave, hi * per_octave + 1) / per_octave
    return tuple(int(round(2.0 ** e)) for e in k)


PRESETS = {
    # constant exposure per mask
    "snr_vs_J_fixed_t0": dict(vary="J", values=_grid_J(8, 16), families=("random", "ortho"),
                  noises=("poisson", "gaussian"), budget="constant_t0"),
    # constant total experiment time
    "snr_vs_J_fixed_tau": dict(vary="J", values=_grid_J(8, 16), families=("random", "ortho"),
                  noises=("poisson", "gaussian"), budget="constant_tau"),
    # noise-free sweeps over each parameter
    "noise_free_J": dict(vary="J", values=_grid_J(8, 16), families=("random", "ortho"),
                  recons=("xc", "landweber"), budget="noise_free"),
    "noise_free_n": dict(vary="n", values=(16, 24, 32, 48, 64, 96), families=("random", "ortho"),
                  budget="noise_free"),
    "noise_free_mu_T": dict(vary="mu_T", values=(0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8),
                  sigma_T=0.1, families=("random", "ortho"), budget="noise_free"),
    "noise_free_sigma_T": dict(vary="sigma_T", values=(0.05, 0.1, 0.15, 0.2, 0.25),
                  families=("random", "ortho"), budget="noise_free"),
    # photons per pixel per measurement under both noise models
    "photons_per_mask": dict(vary="P_per_J", values=(0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0),
                  noises=("poisson", "gaussian"), budget="constant_t0"),
}


def preset(name: str, **overrides) -> SweepConfig:
    """Sweep configuration for a named preset."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return SweepConfig(name=name, **{**PRESETS[name], **overrides})
