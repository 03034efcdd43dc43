"""Adaptive Dormand-Prince 5(4) integrator with quartic dense output.

Handles complex state arrays of any shape. Steps are taken with the fifth-order
solution and controlled by the embedded fourth-order estimate; output points are
interpolated with Shampine's continuous extension instead of forcing the step
sequence onto the output grid.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import StepUnderflow

MIN_STEP = 1e-12

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between the 5th and 4th order weights, including the FSAL stage
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(x) ** 2)))


def _initial_step(fun, t0, y0, f0, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def dopri5(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: np.ndarray,
    t_eval,
    rtol: float = 1e-10,
    atol: float | None = None,
    max_step: float = np.inf,
    min_step: float = MIN_STEP,
) -> np.ndarray:
    """Integrate ``dy/dt = fun(t, y)`` forward from ``t0`` and sample at ``t_eval``.

    Returns an array of shape ``(len(t_eval),) + y0.shape``. ``atol`` defaults to
    ``rtol * 1e-3``. Raises :class:`StepUnderflow` if the controller asks for a
    step shorter than ``min_step``.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1 or t_eval.size == 0:
        raise ValueError("t_eval must be a non-empty 1-d sequence")
    if np.any(np.diff(t_eval) <= 0):
        raise ValueError("t_eval must be strictly increasing")
    if t_eval[0] < t0:
        raise ValueError("t_eval must not start before t0")
    if atol is None:
        atol = rtol * 1e-3

    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) else float)
    out = np.empty((t_eval.size,) + y.shape, dtype=y.dtype)
    t = float(t0)
    t_end = float(t_eval[-1])
    idx = 0
    while idx < t_eval.size and t_eval[idx] == t:
        out[idx] = y
        idx += 1
    if idx == t_eval.size:
        return out

    f = fun(t, y)
    h = min(_initial_step(fun, t, y, f, rtol, atol, t_end - t), max_step)
    k = np.empty((7,) + y.shape, dtype=y.dtype)
    err_exp = -1.0 / 5.0

    while idx < t_eval.size:
        if h < min_step:
            raise StepUnderflow(f"step underflow: adaptive step {h:.3e} fell below {min_step:.1e} at t={t:.6g}")
        h = min(h, t_end - t)
        last = h == t_end - t
        k[0] = f
        for s in range(1, 6):
            dy = sum(a * k[j] for j, a in enumerate(_A[s]))
            k[s] = fun(t + _C[s] * h, y + h * dy)
        y_new = y + h * np.tensordot(_B, k[:6], axes=1)
        f_new = fun(t + h, y_new)
        k[6] = f_new
        err = h * np.tensordot(_E, k, axes=1)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = _rms(err / scale)

        if err_norm < 1.0:
            t_new = t_end if last else t + h
            q = np.tensordot(_P.T, k, axes=([1], [0]))  # (4,) + shape
            while idx < t_eval.size and t_eval[idx] <= t_new:
                x = (t_eval[idx] - t) / h
                out[idx] = y + h * np.tensordot(x ** np.arange(1, 5), q, axes=1)
                idx += 1
            t, y, f = t_new, y_new, f_new
            factor = _MAX_FACTOR if err_norm == 0 else min(_MAX_FACTOR, _SAFETY * err_norm**err_exp)
            h = min(h * factor, max_step)
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err_norm**err_exp)
    return out
