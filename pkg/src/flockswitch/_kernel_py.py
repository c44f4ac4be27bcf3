"""Pure-numpy integrator kernel, the fallback when the compiled core is absent.

Both kernels implement the same contract; the compiled one is selected at
import time in :mod:`flockswitch.kernels` when available.
"""
from __future__ import annotations

import numpy as np

COMPILED = False


def _diameter_sq(rows: np.ndarray) -> float:
    diff = rows[:, None, :] - rows[None, :, :]
    return float((diff * diff).sum(axis=-1).max())


def run_segment(
    x: np.ndarray,
    v: np.ndarray,
    adj_stack: np.ndarray,
    sigma: np.ndarray,
    t0: int,
    t1: int,
    h: float,
    weight_kind: int,
    kappa: float,
    beta: float,
    dx_out: np.ndarray,
    dv_out: np.ndarray,
    v_tol: float,
    x_cap: float,
    xhist: np.ndarray | None = None,
    vhist: np.ndarray | None = None,
):
    """Advance the state in place from step t0 up to t1.

    Records the post-step diameters in ``dx_out[t+1]`` / ``dv_out[t+1]`` for
    every step taken and, when history buffers are given, the post-step
    states at the same index. Returns ``(t_reached, reason)`` with reason
    0 = ran to t1, 1 = velocity diameter fell to v_tol, 2 = position
    diameter hit x_cap.
    """
    n = x.shape[0]
    scale = h / n
    for t in range(t0, t1):
        chi = adj_stack[sigma[t]]
        if weight_kind == 0:
            w = chi * kappa
        else:
            diff = x[:, None, :] - x[None, :, :]
            r2 = (diff * diff).sum(axis=-1)
            w = chi * (kappa * (1.0 + r2) ** (-beta))
        accel = scale * (w @ v - w.sum(axis=1)[:, None] * v)
        x += h * v
        v += accel
        dx = np.sqrt(_diameter_sq(x))
        dv = np.sqrt(_diameter_sq(v))
        dx_out[t + 1] = dx
        dv_out[t + 1] = dv
        if xhist is not None:
            xhist[t + 1] = x
        if vhist is not None:
            vhist[t + 1] = v
        if dv <= v_tol:
            return t + 1, 1
        if dx >= x_cap:
            return t + 1, 2
    return t1, 0
