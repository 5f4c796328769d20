"""Command-line entry point: ``ghostbench <command> [--config FILE] [--key value ...]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O failure.  ``GHOSTBENCH_THREADS`` caps the BLAS/OpenMP thread pools.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import ccd as ccd_mod
from .analysis import psf as psf_image
from .analysis import rmse_snr
from .config import COMMANDS, ConfigError, RunConfig, apply_overrides, parse_config
from .core import BucketVector, NoiseKind, NoiseSpec, NumericalError, Seed, derive_seed
from .forward import PhotonBudget, expected_buckets, apply_noise
from .io import read_bucket_csv, write_csv, write_manifest, write_pgm
from .masks import (blur_masks, gen_hadamard, gen_pinhole_scan, gen_random_binary,
                    gen_random_gray, gen_ura_scan, select_masks)
from .objects import glyph_stencil, render_text, uniform_object
from .recon import compute_gamma, landweber, pinv_recon, scaled_xc
from .sweep import CSV_FIELDS, SweepConfig, preset, run_sweep

__all__ = ["main", "run", "build_ensemble", "build_object", "parse_overrides"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def build_ensemble(p: dict, seed: Seed):
    """Mask ensemble described by the mask keys of a config."""
    fam, n = p["family"], p["n"]
    J = p.get("J")
    if fam in ("random_binary", "random_gray"):
        J = n * n if J is None else J
        if fam == "random_binary":
            ens = gen_random_binary(n, J, p["mu_A"], seed)
        else:
            mu = p["mu_A"]
            sigma = p.get("sigma_A")
            if sigma is None:
                sigma = min(mu, 1 - mu) / math.sqrt(3.0)
            ens = gen_random_gray(n, J, mu, sigma, seed)
        if p.get("sigma_g_px", 0.0) > 0:
            ens = blur_masks(ens, p["sigma_g_px"])
        return ens
    if p.get("sigma_g_px", 0.0) > 0:
        raise ConfigError("sigma_g_px applies to random families only")
    full = {"hadamard": gen_hadamard, "ura": gen_ura_scan, "pinhole": gen_pinhole_scan}[fam](n)
    if J is None or J == full.J:
        return full
    return select_masks(full, J, derive_seed(seed, "subset"))


def build_object(p: dict, n: int, seed: Seed) -> np.ndarray:
    kind = p["object"]
    if kind == "uniform":
        return uniform_object(n, p["mu_T"], p["sigma_T"], seed)
    if kind == "text":
        return render_text(n, "XGI", 0.5)
    return glyph_stencil(n)


def _buckets(p: dict, ens, T, root: Seed):
    pitch = p.get("pitch_mm") or 1.0 / ens.n
    budget = PhotonBudget(p["flux_B"], p["t0_s"], ens.J, pitch)
    b = expected_buckets(T, ens, budget)
    spec = NoiseSpec(NoiseKind(p["noise"]), sigma_p=p["sigma_p"], sigma_m=p["sigma_m"])
    if spec.kind != NoiseKind.NONE:
        b = apply_noise(b, spec, derive_seed(root, "noise"))
    return b, budget, pitch


def _bucket_rows(b: BucketVector):
    return [(j, repr(float(v))) for j, v in enumerate(b.values)]


def _cmd_masks(cfg: RunConfig, out: Path, root: Seed):
    p = cfg.params
    ens = build_ensemble(p, derive_seed(root, "masks"))
    files = []
    k = min(max(p["export"], 0), ens.J)
    lo, hi = ens.value_range
    for j in range(k):
        files.append(write_pgm(out / f"mask_{j:05d}.pgm", ens.get(j)[0], (min(lo, 0.0), max(hi, 1.0)),
                               1.0 / ens.n))
    return files, {"J": ens.J, "mu_A": ens.mu_A, "sigma_A": ens.sigma_A,
                   "gamma": compute_gamma(ens), "constant_sum": ens.constant_sum}


def _cmd_simulate(cfg: RunConfig, out: Path, root: Seed):
    p = cfg.params
    ens = build_ensemble(p, derive_seed(root, "masks"))
    T = build_object(p, ens.n, derive_seed(root, "object"))
    b, budget, pitch = _buckets(p, ens, T, root)
    files = [write_csv(out / "buckets.csv", ("j", "value"), _bucket_rows(b)),
             write_pgm(out / "object.pgm", T, (0.0, 1.0), pitch)]
    return files, {"J": ens.J, "P": budget.P, "photon_scale": budget.photon_scale}


def _cmd_reconstruct(cfg: RunConfig, out: Path, root: Seed):
    p = cfg.params
    ens = build_ensemble(p, derive_seed(root, "masks"))
    T = build_object(p, ens.n, derive_seed(root, "object"))
    b, budget, pitch = _buckets(p, ens, T, root)
    if p.get("buckets"):
        vals = read_bucket_csv(p["buckets"])
        if vals.size != ens.J:
            raise ConfigError(f"bucket file has {vals.size} values, ensemble has J={ens.J}")
        b = BucketVector(vals, exposure_s=budget.t0_s, photon_scale=budget.photon_scale)
    method = p["method"]
    if method == "xc":
        rec = scaled_xc(ens, b)
    elif method == "landweber":
        rec = landweber(ens, b, p["alpha"], p["iters"])
    else:
        rec = pinv_recon(ens, b)
    rmse, snr = rmse_snr(rec, T)
    files = [write_pgm(out / "recon.pgm", rec, (0.0, 1.0), pitch),
             write_pgm(out / "object.pgm", T, (0.0, 1.0), pitch),
             write_csv(out / "buckets.csv", ("j", "value"), _bucket_rows(b))]
    return files, {"rmse": rmse, "snr": snr, "gamma": compute_gamma(ens), "P": budget.P}


def _cmd_psf(cfg: RunConfig, out: Path, root: Seed):
    ens = build_ensemble(cfg.params, derive_seed(root, "masks"))
    img = psf_image(ens)
    c = ens.n // 2
    files = [write_pgm(out / "psf.pgm", img, None, 1.0 / ens.n)]
    return files, {"gamma": compute_gamma(ens), "psf_sum": float(img.sum()),
                   "psf_center": float(img[c, c])}


_SWEEP_FIELDS = ("families", "noises", "recons", "seeds", "budget", "J", "n", "mu_A", "sigma_A",
                 "mu_T", "sigma_T", "flux_B", "t0_s", "tau_s", "sigma_p", "sigma_m", "sigma_g_px",
                 "ortho_cap", "landweber_alpha", "landweber_iters")


def sweep_config(cfg: RunConfig) -> SweepConfig:
    p = cfg.params
    kw = {k: p[k] for k in _SWEEP_FIELDS if k in p}
    if "vary" in p:
        kw["vary"] = p["vary"]
    if "values" in p:
        kw["values"] = p["values"]
    kw["root_seed"] = cfg.root_seed
    if "preset" in p:
        name = p.get("name", p["preset"])
        try:
            sc = preset(p["preset"], **kw)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        return SweepConfig(**{**sc.__dict__, "name": name})
    return SweepConfig(name=p.get("name", "sweep"), **kw)


def _cmd_sweep(cfg: RunConfig, out: Path, root: Seed):
    sc = sweep_config(cfg)
    recs = run_sweep(sc)
    path = write_csv(out / "sweep.csv", CSV_FIELDS, (r.as_row() for r in recs))
    return [path], {"rows": len(recs)}


def _cmd_zhang(cfg: RunConfig, out: Path, root: Seed):
    p = cfg.params
    res = ccd_mod.run_zhang(p["experiment"], p["shutter"], seed=root, J=p.get("J"), n=p["n"],
                            t0=p.get("t0_s"), mitigation=p["mitigation"], rows=p.get("rows"),
                            dark_rows=p.get("dark_rows"))
    pitch = ccd_mod.FOV_MM / p["n"]
    files = [write_pgm(out / "stencil.pgm", res.stencil, (0.0, 1.0), pitch),
             write_pgm(out / "frame.pgm", res.frame, None)]
    if res.recon is not None:
        files.append(write_pgm(out / "recon.pgm", res.recon, None, pitch))
        files.append(write_csv(out / "buckets.csv", ("j", "value"), _bucket_rows(res.buckets)))
    return files, {"r": res.r, **res.params}


_COMMANDS = {"masks": _cmd_masks, "simulate": _cmd_simulate, "reconstruct": _cmd_reconstruct,
             "psf": _cmd_psf, "sweep": _cmd_sweep, "zhang": _cmd_zhang}


def run(cfg: RunConfig) -> int:
    """Execute a resolved configuration and write its outputs and manifest."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    root = Seed(cfg.root_seed, cfg.command)
    files, results = _COMMANDS[cfg.command](cfg, out, root)
    write_manifest(out / "manifest.json", cfg.as_dict(), files, results)
    return EXIT_OK


def parse_overrides(tokens: Sequence[str]) -> dict:
    """Turn ``--key value``, ``--key=value``, ``--flag`` and ``--no-flag`` into a dict."""
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ConfigError(f"unexpected argument {tok!r}")
        body = tok[2:]
        if "=" in body:
            key, val = body.split("=", 1)
            i += 1
        elif i + 1 < len(tokens) and not (tokens[i + 1].startswith("--")):
            key, val = body, tokens[i + 1]
            i += 2
        elif body.startswith("no-"):
            key, val = body[3:], "false"
            i += 1
        else:
            key, val = body, "true"
            i += 1
        out[key.replace("-", "_")] = val
    return out


def _resolve_config(args, extra) -> RunConfig:
    if args.config:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
        if args.command and args.command != cfg.command:
            raise ConfigError(f"config file is for {cfg.command!r}, not {args.command!r}")
    elif args.command:
        cfg = RunConfig(args.command)
    else:
        raise ConfigError("give a command or --config FILE")
    return apply_overrides(cfg, parse_overrides(extra))


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ghostbench", description="Ghost-imaging simulation and SNR benchmarks.",
        epilog="Any config key can be overridden with --key value (booleans: --key / --no-key).")
    parser.add_argument("command", nargs="?", choices=COMMANDS)
    parser.add_argument("--config", help="configuration file")
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:  # argparse reports usage errors by exiting
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = _resolve_config(args, extra)
        threads = os.environ.get("GHOSTBENCH_THREADS")
        limit = None
        if threads:
            try:
                limit = int(threads)
            except ValueError:
                raise ConfigError(f"GHOSTBENCH_THREADS must be an integer, got {threads!r}") from None
        with threadpool_limits(limits=limit):
            return run(cfg)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"ghostbench: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"ghostbench: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"ghostbench: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
