"""Per-timestep LSTM cell kernels.

The time loop is the hot path of training: each step does a recurrent matmul
plus fused elementwise gate math. One source of truth is compiled with numba
by default; setting TUNELM_BACKEND=numpy selects the identical uncompiled
function (useful for debugging and for the backend benchmark).
"""

from __future__ import annotations

import os

import numpy as np


def _lstm_forward_cells(xz, u_t, b, h0, c0):
    """Run one layer over time.

    xz: (T, B, 4H) input projections; u_t: (H, 4H) transposed recurrent
    weights; b: (4H,); h0, c0: (B, H) initial state. Gate block order is
    input, forget, output, candidate. Returns the per-step caches needed
    for backpropagation.
    """
    T, B, H4 = xz.shape
    H = H4 // 4
    HS = np.empty((T, B, H), xz.dtype)
    CS = np.empty((T, B, H), xz.dtype)
    TC = np.empty((T, B, H), xz.dtype)
    I = np.empty((T, B, H), xz.dtype)
    F = np.empty((T, B, H), xz.dtype)
    O = np.empty((T, B, H), xz.dtype)
    G = np.empty((T, B, H), xz.dtype)
    one = np.ones(1, xz.dtype)[0]  # literal in the working precision
    h = h0.copy()
    c = c0.copy()
    for t in range(T):
        z = xz[t] + np.dot(h, u_t) + b
        i_g = one / (one + np.exp(-z[:, :H]))
        f_g = one / (one + np.exp(-z[:, H : 2 * H]))
        o_g = one / (one + np.exp(-z[:, 2 * H : 3 * H]))
        g_g = np.tanh(z[:, 3 * H :])
        c = f_g * c + i_g * g_g
        tc = np.tanh(c)
        h = o_g * tc
        I[t] = i_g
        F[t] = f_g
        O[t] = o_g
        G[t] = g_g
        CS[t] = c
        TC[t] = tc
        HS[t] = h
    return HS, CS, TC, I, F, O, G


def _lstm_backward_cells(dH, u, I, F, O, G, CS, TC, c0):
    """Reverse-time pass for one layer.

    dH: (T, B, H) gradient arriving at the hidden outputs; u: (4H, H)
    recurrent weights. Returns dZ (T, B, 4H) pre-activation gradients plus
    the gradients flowing into the initial state.
    """
    T, B, H = dH.shape
    dZ = np.empty((T, B, 4 * H), dH.dtype)
    dh = np.zeros((B, H), dH.dtype)
    dc = np.zeros((B, H), dH.dtype)
    one = np.ones(1, dH.dtype)[0]
    for t in range(T - 1, -1, -1):
        dht = dH[t] + dh
        tc = TC[t]
        do = dht * tc
        dct = dht * O[t] * (one - tc * tc) + dc
        c_prev = CS[t - 1] if t > 0 else c0
        di = dct * G[t]
        df = dct * c_prev
        dg = dct * I[t]
        dZ[t, :, :H] = di * I[t] * (one - I[t])
        dZ[t, :, H : 2 * H] = df * F[t] * (one - F[t])
        dZ[t, :, 2 * H : 3 * H] = do * O[t] * (one - O[t])
        dZ[t, :, 3 * H :] = dg * (one - G[t] * G[t])
        dh = np.dot(dZ[t], u)
        dc = dct * F[t]
    return dZ, dh, dc


def _resolve_backend() -> tuple[str, object, object]:
    choice = os.environ.get("TUNELM_BACKEND", "auto").lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"TUNELM_BACKEND must be auto, numba or numpy, not {choice!r}")
    if choice in ("auto", "numba"):
        try:
            import numba

            fwd = numba.njit(cache=True)(_lstm_forward_cells)
            bwd = numba.njit(cache=True)(_lstm_backward_cells)
            return "numba", fwd, bwd
        except ImportError:
            if choice == "numba":
                raise
    return "numpy", _lstm_forward_cells, _lstm_backward_cells


BACKEND, lstm_forward_cells, lstm_backward_cells = _resolve_backend()
