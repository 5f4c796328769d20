"""Reconstruction: cross-correlation adjoint, normalisation, mean restoration,
Landweber iteration and a pseudo-inverse reference solver."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .core import BucketVector, MaskEnsemble, NumericalError, as_image_array

__all__ = [
    "xc",
    "xc_many",
    "compute_gamma",
    "scaled_xc",
    "scaled_xc_many",
    "restore_mean",
    "landweber",
    "pinv_recon",
    "PINV_LIMIT",
    "RIDGE",
]

PINV_LIMIT = 4096
RIDGE = 1e-10
# a pixel whose ensemble variance is below this is treated as unmodulated
_UNMODULATED_VAR = 1e-12


def _check(ens: MaskEnsemble, b: BucketVector):
    if b.J != ens.J:
        raise ValueError(f"bucket vector has J={b.J}, ensemble has J={ens.J}")


def xc_many(ens: MaskEnsemble, values: np.ndarray) -> np.ndarray:
    """Cross-correlation adjoint for several bucket vectors at once.

    ``values`` has shape ``(J, m)``; returns ``(m, n, n)``.  A single pass
    over the masks serves all columns.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] != ens.J:
        raise ValueError("bucket count does not match the ensemble")
    vt = v - v.mean(axis=0)
    out = np.zeros((v.shape[1], ens.n * ens.n))
    for start, blk in ens.blocks():
        m = blk.shape[0]
        out += vt[start:start + m].T @ blk.reshape(m, -1)
    return out.reshape(v.shape[1], ens.n, ens.n)


def xc(ens: MaskEnsemble, b: BucketVector) -> np.ndarray:
    """``sum_j A_j(x, y) (b_j - <b>)``, without any normalisation."""
    _check(ens, b)
    return xc_many(ens, b.values)[0]


def compute_gamma(ens: MaskEnsemble) -> float:
    """Normalisation between the adjoint and the transmission scale.

    For ensembles generated as complete orthogonal sets (and subsets of them)
    this is the exact gain of the mean-corrected adjoint, ``n^2/4`` for
    Hadamard and URA scans and 1 for the pinhole scan.  Otherwise it is the
    integral of the PSF, evaluated through the identity
    ``sum PSF = (1/n^2) sum_j (sum_x A~_j(x))^2``, i.e. from the spread of
    the per-mask totals.
    """
    if ens.orthogonal_gain is not None:
        return float(ens.orthogonal_gain)
    s = ens.mask_sums
    d = s - s.mean()
    return float(np.dot(d, d) / (ens.n * ens.n))


def _restore_plan(ens: MaskEnsemble):
    """Direction not seen by the mean-corrected operator, if it can be fixed.

    Returns ``("sum", k)`` for constant-sum ensembles, ``("pixel", (x, y))``
    for an orthogonal set with a single unmodulated pixel, else ``None``.
    """
    k = ens.constant_sum
    if k is not None and k > 0:
        return "sum", k
    if ens.orthogonal_gain is not None:
        idx = np.flatnonzero(ens.pixel_var.ravel() <= _UNMODULATED_VAR)
        if idx.size == 1 and ens.pixel_mean.ravel()[idx[0]] > 0:
            return "pixel", int(idx[0])
    return None


def restore_mean(ens: MaskEnsemble, t: np.ndarray, mean_signal: np.ndarray, plan=None) -> np.ndarray:
    """Fix the component of ``t`` invisible to mean-corrected masks.

    ``mean_signal`` is ``<b>/photon_scale`` (one value per image in a stack).
    For constant-sum masks the image mean is set to ``<b>/k``.  For an
    orthogonal set with one unmodulated pixel ``x0``, that pixel is solved
    from ``<b> = sum_x <A>(x) t(x)``.
    """
    plan = _restore_plan(ens) if plan is None else plan
    if plan is None:
        return t
    t = np.array(t, dtype=np.float64, copy=True)
    stack = t.reshape(-1, ens.n * ens.n)
    ms = np.atleast_1d(np.asarray(mean_signal, dtype=np.float64))
    kind, arg = plan
    if kind == "sum":
        stack += (ms / arg - stack.mean(axis=1))[:, None]
    else:
        pm = ens.pixel_mean.ravel()
        rest = stack @ pm - stack[:, arg] * pm[arg]
        stack[:, arg] = (ms - rest) / pm[arg]
    return stack.reshape(t.shape)


def scaled_xc_many(ens: MaskEnsemble, values: np.ndarray, photon_scale: float,
                   gamma: float | None = None) -> np.ndarray:
    """:func:`scaled_xc` for a ``(J, m)`` stack of bucket vectors."""
    g = compute_gamma(ens) if gamma is None else gamma
    if not g > 0:
        raise ValueError("gamma is zero: the ensemble has no mean-corrected energy")
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    t = xc_many(ens, v) / (g * photon_scale)
    return restore_mean(ens, t, v.mean(axis=0) / photon_scale)


def scaled_xc(ens: MaskEnsemble, b: BucketVector, gamma: float | None = None) -> np.ndarray:
    """Adjoint reconstruction in transmission units.

    ``xc / (gamma * photon_scale)`` with the object mean restored from the
    mean bucket where the masks cannot see it.
    """
    _check(ens, b)
    return scaled_xc_many(ens, b.values, b.photon_scale, gamma)[0]


def _system(ens: MaskEnsemble, b: BucketVector):
    At = ens.mean_corrected().reshape(ens.J, -1)
    bt = (b.values - b.values.mean()) / b.photon_scale
    return At, bt


def landweber(ens: MaskEnsemble, b: BucketVector, alpha: float = 1.0, iters: int = 100,
              init=None, gamma: float | None = None, guard: int = 10) -> np.ndarray:
    """Landweber iteration on the mean-corrected system.

    Iterates ``t <- t + (alpha / (2 gamma)) A~^T (b~ - A~ t)`` from ``init``
    (zero image by default), then restores the mean as :func:`scaled_xc`.

    Raises
    ------
    NumericalError
        If the residual norm grows for ``guard`` consecutive iterations.
    """
    _check(ens, b)
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    g = compute_gamma(ens) if gamma is None else gamma
    if not g > 0:
        raise ValueError("gamma is zero: the ensemble has no mean-corrected energy")
    At, bt = _system(ens, b)
    n = ens.n
    t = np.zeros(n * n) if init is None else as_image_array(init, "init").ravel().copy()
    step = alpha / (2.0 * g)
    prev = np.inf
    growing = 0
    for _ in range(iters):
        r = bt - At @ t
        rn = float(np.dot(r, r))
        if rn > prev:
            growing += 1
            if growing >= guard:
                raise NumericalError("Landweber residual grew for %d consecutive iterations" % guard)
        else:
            growing = 0
        prev = rn
        t += step * (At.T @ r)
    return restore_mean(ens, t.reshape(n, n), b.values.mean() / b.photon_scale)


def pinv_recon(ens: MaskEnsemble, b: BucketVector, limit: int = PINV_LIMIT,
               ridge: float = RIDGE) -> np.ndarray:
    """Regularised least-squares solution of ``A~ t = b~``.

    Solves ``(A~^T A~ + eps I) t = A~^T b~`` with
    ``eps = ridge * trace(A~^T A~) / n^2``, which tends to the minimum-norm
    least-squares solution, then restores the mean as :func:`scaled_xc`.
    """
    _check(ens, b)
    n2 = ens.n * ens.n
    if n2 > limit:
        raise ValueError(f"n^2 = {n2} exceeds the pseudo-inverse limit {limit}")
    At, bt = _system(ens, b)
    M = At.T @ At
    eps = ridge * np.trace(M) / n2
    if not eps > 0:
        raise NumericalError("mean-corrected system is identically zero")
    M[np.diag_indices_from(M)] += eps
    try:
        cf = scipy.linalg.cho_factor(M, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"normal equations singular beyond ridge tolerance: {exc}") from exc
    t = scipy.linalg.cho_solve(cf, At.T @ bt)
    return restore_mean(ens, t.reshape(ens.n, ens.n), b.values.mean() / b.photon_scale)
