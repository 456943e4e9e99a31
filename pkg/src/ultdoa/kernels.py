"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Every kernel exists twice: ``*_numba`` (explicit loops compiled with
``@njit``) and ``*_numpy`` (vectorised).  The public name is bound to one of
them at import time.  Set ``ULTDOA_DISABLE_NUMBA=1`` to force the numpy path;
it is also used automatically when numba cannot be imported.
"""
import os

import numpy as np


def _noop_jit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def _numba_requested():
    flag = os.environ.get("ULTDOA_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("1", "true", "yes", "on")


try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = _noop_jit
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _numba_requested()


# --------------------------------------------------------------------------
# comb interpolation
# --------------------------------------------------------------------------
def comb_interpolate_numpy(pilots, k0, k_tc, n_sc, start, middle, end):
    """Fill the comb gaps of ``pilots`` (rows x m_sc) over ``n_sc`` subcarriers.

    All three filters are (k_tc, 2) tap pairs.  ``start[d - 1]`` weights the
    (first, second) pilot for the subcarrier ``d`` below the comb,
    ``middle[j - 1]`` weights the (previous, current) pilot for the subcarrier
    ``j`` above the previous pilot, and ``end[j - 1]`` weights the
    (second-to-last, last) pilot for the subcarrier ``j`` above the comb.
    Edge offsets past ``k_tc`` reuse the last row.
    """
    pilots = np.asarray(pilots, dtype=np.complex128)
    rows, m_sc = pilots.shape
    out = np.zeros((rows, n_sc), dtype=np.complex128)
    k_last = k0 + (m_sc - 1) * k_tc
    first, second = pilots[:, :1], pilots[:, min(1, m_sc - 1)][:, None]
    before, last = pilots[:, max(m_sc - 2, 0)][:, None], pilots[:, -1:]

    out[:, k0] = pilots[:, 0]
    if k0 > 0:
        d = np.arange(1, k0 + 1)
        taps = start[np.minimum(d, k_tc) - 1]
        out[:, k0 - d] = first * taps[None, :, 0] + second * taps[None, :, 1]

    if m_sc > 1:
        j = np.arange(1, k_tc + 1)
        base = k0 + np.arange(m_sc - 1)[:, None] * k_tc + j[None, :]
        prev = pilots[:, :-1, None]
        cur = pilots[:, 1:, None]
        vals = prev * middle[None, None, :, 0] + cur * middle[None, None, :, 1]
        out[:, base.ravel()] = vals.reshape(rows, -1)

    n_tail = n_sc - 1 - k_last
    if n_tail > 0:
        j = np.arange(1, n_tail + 1)
        taps = end[np.minimum(j, k_tc) - 1]
        out[:, k_last + j] = before * taps[None, :, 0] + last * taps[None, :, 1]
    return out


@njit(cache=True)
def comb_interpolate_numba(pilots, k0, k_tc, n_sc, start, middle, end):
    rows, m_sc = pilots.shape
    out = np.zeros((rows, n_sc), dtype=np.complex128)
    k_last = k0 + (m_sc - 1) * k_tc
    i2 = min(1, m_sc - 1)
    ib = max(m_sc - 2, 0)
    for r in range(rows):
        first = pilots[r, 0]
        second = pilots[r, i2]
        out[r, k0] = first
        for d in range(1, k0 + 1):
            t = min(d, k_tc) - 1
            out[r, k0 - d] = first * start[t, 0] + second * start[t, 1]
        for i in range(1, m_sc):
            prev = pilots[r, i - 1]
            cur = pilots[r, i]
            base = k0 + (i - 1) * k_tc
            for j in range(1, k_tc + 1):
                out[r, base + j] = prev * middle[j - 1, 0] + cur * middle[j - 1, 1]
        before = pilots[r, ib]
        last = pilots[r, m_sc - 1]
        for j in range(1, n_sc - k_last):
            t = min(j, k_tc) - 1
            out[r, k_last + j] = before * end[t, 0] + last * end[t, 1]
    return out


# --------------------------------------------------------------------------
# symbol-averaged CIR power
# --------------------------------------------------------------------------
def averaged_power_numpy(cir):
    """(n_rx, p_rx, n_symb, T) complex -> (n_rx, T) power averaged over symbols."""
    p = cir.real**2 + cir.imag**2
    return p.sum(axis=1).mean(axis=1)


@njit(cache=True)
def averaged_power_numba(cir):
    n_rx, p_rx, n_symb, n_t = cir.shape
    out = np.zeros((n_rx, n_t))
    for n in range(n_rx):
        for p in range(p_rx):
            for l in range(n_symb):
                for t in range(n_t):
                    v = cir[n, p, l, t]
                    out[n, t] += v.real * v.real + v.imag * v.imag
        for t in range(n_t):
            out[n, t] /= n_symb
    return out


# --------------------------------------------------------------------------
# TDoA least-squares cost on a grid of candidate positions
# --------------------------------------------------------------------------
def tdoa_grid_cost_numpy(xs, ys, z, anchors, ref, range_diffs):
    """Sum of squared range-difference residuals, shape (len(ys), len(xs))."""
    gx, gy = np.meshgrid(xs, ys)
    dist = np.sqrt(
        (gx[..., None] - anchors[:, 0]) ** 2
        + (gy[..., None] - anchors[:, 1]) ** 2
        + (z - anchors[:, 2]) ** 2
    )
    model = dist - dist[..., ref : ref + 1]
    return ((range_diffs - model) ** 2).sum(axis=-1)


@njit(cache=True)
def tdoa_grid_cost_numba(xs, ys, z, anchors, ref, range_diffs):
    n_a = anchors.shape[0]
    out = np.empty((ys.shape[0], xs.shape[0]))
    dist = np.empty(n_a)
    for iy in range(ys.shape[0]):
        for ix in range(xs.shape[0]):
            for a in range(n_a):
                dx = xs[ix] - anchors[a, 0]
                dy = ys[iy] - anchors[a, 1]
                dz = z - anchors[a, 2]
                dist[a] = np.sqrt(dx * dx + dy * dy + dz * dz)
            acc = 0.0
            for a in range(n_a):
                r = range_diffs[a] - (dist[a] - dist[ref])
                acc += r * r
            out[iy, ix] = acc
    return out


if USE_NUMBA:
    comb_interpolate = comb_interpolate_numba
    averaged_power = averaged_power_numba
    tdoa_grid_cost = tdoa_grid_cost_numba
else:
    comb_interpolate = comb_interpolate_numpy
    averaged_power = averaged_power_numpy
    tdoa_grid_cost = tdoa_grid_cost_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
