"""Cyclic Jacobi eigensolver for small real-symmetric or complex-Hermitian matrices.

Works on stacks of matrices of shape (..., d, d): every matrix in the stack is
rotated with the same pivot sequence but its own rotation angles, so a batch of
density matrices costs about as much Python overhead as a single one.
"""

from __future__ import annotations

import numpy as np

from .errors import EigensolverNonConvergence

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def _off_norm(a: np.ndarray) -> np.ndarray:
    d = a.shape[-1]
    mask = ~np.eye(d, dtype=bool)
    return np.sqrt(np.sum(np.abs(a[..., mask]) ** 2, axis=-1))


def jacobi_eigh(a, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigen-decomposition ``a = V diag(w) V^H`` by cyclic Jacobi rotations.

    Parameters
    ----------
    a : array_like, shape (..., d, d)
        Real symmetric or complex Hermitian matrices.
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm is below
        ``tol * max(1, ||a||_F)`` for every matrix in the stack.
    max_sweeps : int
        Sweep budget; exceeding it raises :class:`EigensolverNonConvergence`.

    Returns
    -------
    w : ndarray, shape (..., d)
        Real eigenvalues in ascending order.
    v : ndarray, shape (..., d, d)
        Orthonormal eigenvectors as columns, same dtype kind as ``a``.
    """
    a = np.array(a, copy=True)
    if not np.iscomplexobj(a):
        a = a.astype(float)
    d = a.shape[-1]
    if a.shape[-2] != d:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    batch = a.shape[:-2]
    v = np.broadcast_to(np.eye(d, dtype=a.dtype), a.shape).copy()
    scale = np.maximum(1.0, np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1))))

    for _ in range(max_sweeps):
        if np.all(_off_norm(a) <= tol * scale):
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                b = a[..., p, q]
                absb = np.abs(b)
                live = absb > 1e-300
                safe = np.where(live, absb, 1.0)
                with np.errstate(over="ignore"):
                    theta = (a[..., q, q].real - a[..., p, p].real) / (2.0 * safe)
                    t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
                t = np.where(live, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ph = np.where(live, np.conj(b) / safe, 1.0)
                c_ = c[..., None]
                s_ = s[..., None]
                ph_ = ph[..., None]

                ap = a[..., :, p].copy()
                aq = a[..., :, q]
                a[..., :, p] = c_ * ap - s_ * ph_ * aq
                a[..., :, q] = s_ * ap + c_ * ph_ * aq
                rp = a[..., p, :].copy()
                rq = a[..., q, :]
                a[..., p, :] = c_ * rp - s_ * np.conj(ph_) * rq
                a[..., q, :] = s_ * rp + c_ * np.conj(ph_) * rq
                a[..., p, q] = 0.0
                a[..., q, p] = 0.0

                vp = v[..., :, p].copy()
                vq = v[..., :, q]
                v[..., :, p] = c_ * vp - s_ * ph_ * vq
                v[..., :, q] = s_ * vp + c_ * ph_ * vq
    else:
        if not np.all(_off_norm(a) <= tol * scale):
            raise EigensolverNonConvergence(
                f"eigensolver non-convergence after {max_sweeps} Jacobi sweeps"
            )

    w = np.real(np.diagonal(a, axis1=-2, axis2=-1)).copy()
    order = np.argsort(w, axis=-1)
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[..., None, :], axis=-1)
    if batch == () and w.ndim != 1:
        w = w.reshape(d)
    return w, v
