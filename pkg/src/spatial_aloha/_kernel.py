"""Compiled slot loop used by :func:`spatial_aloha.engine.run`.

Messages live in latitude bands keyed by their z-coordinate; a removal
query of radius ``r`` only scans bands whose z-range can hold points within
``r`` of the transmitter. With one band the scan is exhaustive.

Given ``B = 1`` the transmitter is uniform among the waiting messages, so
the kernel draws ``B ~ Binomial(N, p)`` and then a uniform index instead of
``N`` separate coins; the law of the trajectory is unchanged.
"""

import math

import numpy as np
from numba import njit

from spatial_aloha.geometry import DIAMETER, RADIUS

PROTO_A1, PROTO_A2, PROTO_A3 = 0, 1, 2
ARR_POISSON, ARR_TABLE = 0, 1
H_CODES = {"sqrt": 0, "log1p": 1, "cbrt": 2, "half": 3, "pow3_4": 4}
EPS_CODES = {"inv_quarter": 0, "inv_sqrt": 1, "inv_log": 2}


@njit(cache=True)
def _h(code, x):
    if code == 0:
        return math.sqrt(x)
    if code == 1:
        return math.log1p(x)
    if code == 2:
        return x ** (1.0 / 3.0)
    if code == 3:
        return 0.5 * x
    return x ** 0.75


@njit(cache=True)
def _eps(code, x):
    if code == 0:
        v = x ** -0.25
    elif code == 1:
        v = x ** -0.5
    else:
        v = 1.0 / math.log(math.e + x)
    return min(0.5, v)


@njit(cache=True)
def band_of(z, n_bands):
    b = int((z + RADIUS) * n_bands / DIAMETER)
    if b < 0:
        return 0
    if b >= n_bands:
        return n_bands - 1
    return b


@njit(cache=True)
def _grow(bx, by, bz, barr, bid):
    nb, cap = bx.shape
    nx = np.empty((nb, 2 * cap))
    ny = np.empty((nb, 2 * cap))
    nz = np.empty((nb, 2 * cap))
    na = np.empty((nb, 2 * cap), dtype=np.int64)
    ni = np.empty((nb, 2 * cap), dtype=np.int64)
    nx[:, :cap] = bx
    ny[:, :cap] = by
    nz[:, :cap] = bz
    na[:, :cap] = barr
    ni[:, :cap] = bid
    return nx, ny, nz, na, ni


@njit(cache=True)
def remove_within(bx, by, bz, barr, bid, bcnt, tx, ty, tz, r, out_id, out_arr):
    """Remove every stored point within chord distance ``r`` of ``(tx, ty, tz)``.

    Removed ids and arrival slots are written to ``out_id``/``out_arr``
    (which must be large enough); returns how many were removed.
    """
    n_bands = bcnt.shape[0]
    n_out = 0
    if r >= DIAMETER:
        for b in range(n_bands):
            for j in range(bcnt[b]):
                out_id[n_out] = bid[b, j]
                out_arr[n_out] = barr[b, j]
                n_out += 1
            bcnt[b] = 0
        return n_out
    lo = max(0, band_of(tz - r, n_bands) - 1)
    hi = min(n_bands - 1, band_of(tz + r, n_bands) + 1)
    for b in range(lo, hi + 1):
        j = bcnt[b] - 1
        while j >= 0:
            dx = bx[b, j] - tx
            dy = by[b, j] - ty
            dz = bz[b, j] - tz
            if math.sqrt(dx * dx + dy * dy + dz * dz) <= r:
                out_id[n_out] = bid[b, j]
                out_arr[n_out] = barr[b, j]
                n_out += 1
                last = bcnt[b] - 1
                bx[b, j] = bx[b, last]
                by[b, j] = by[b, last]
                bz[b, j] = bz[b, last]
                barr[b, j] = barr[b, last]
                bid[b, j] = bid[b, last]
                bcnt[b] = last
            j -= 1
    return n_out


@njit(cache=True)
def _sample_point(rng):
    while True:
        x = rng.normal()
        y = rng.normal()
        z = rng.normal()
        norm = math.sqrt(x * x + y * y + z * z)
        if norm > 0.0:
            s = RADIUS / norm
            return x * s, y * s, z * s


@njit(cache=True)
def simulate(rng, horizon, r, proto, pparams, h_code, eps_code,
             arr_kind, arr_rate, arr_values, arr_cum, n_initial, n_bands, record):
    """Run ``horizon`` slots from ``n_initial`` uniform messages (arrival slot -1).

    ``pparams`` holds ``(c,)`` for a1, ``(c1, c2, p1)`` for a2 and
    ``(C, K1)`` for a3.
    """
    n_before = np.empty(horizon, dtype=np.int64)
    p_col = np.empty(horizon)
    b_col = np.empty(horizon, dtype=np.int64)
    v_col = np.empty(horizon, dtype=np.int64)
    xi_col = np.empty(horizon, dtype=np.int64)
    dsum_col = np.zeros(horizon, dtype=np.int64)
    coin_col = np.full(horizon, -1, dtype=np.int8)

    cap = 16
    bx = np.empty((n_bands, cap))
    by = np.empty((n_bands, cap))
    bz = np.empty((n_bands, cap))
    barr = np.empty((n_bands, cap), dtype=np.int64)
    bid = np.empty((n_bands, cap), dtype=np.int64)
    bcnt = np.zeros(n_bands, dtype=np.int64)

    rec_cap = 1024 if record else 1
    rec_id = np.empty(rec_cap, dtype=np.int64)
    rec_arr = np.empty(rec_cap, dtype=np.int64)
    rec_dep = np.empty(rec_cap, dtype=np.int64)
    n_rec = 0

    out_id = np.empty(16, dtype=np.int64)
    out_arr = np.empty(16, dtype=np.int64)

    n = 0
    next_id = 0
    p_state = pparams[2] if proto == PROTO_A2 else 1.0
    K = pparams[1] if proto == PROTO_A3 else 1.0

    for slot in range(-1, horizon):
        # Slot -1 only places the initial messages.
        if slot == -1:
            count = n_initial
        else:
            if proto == PROTO_A1:
                p = 1.0 if n == 0 else min(1.0, pparams[0] / n)
            elif proto == PROTO_A2:
                p = p_state
            else:
                coin = rng.integers(0, 2)
                coin_col[slot] = coin
                if coin == 1:
                    p = 1.0 / K
                else:
                    p = (1.0 - _eps(eps_code, K)) / K

            b = 0
            if n > 0:
                if p >= 1.0:
                    b = n
                elif p > 0.0:
                    b = rng.binomial(n, p)

            removed = 0
            if b == 1:
                u = rng.integers(0, n)
                tb = 0
                while u >= bcnt[tb]:
                    u -= bcnt[tb]
                    tb += 1
                tx = bx[tb, u]
                ty = by[tb, u]
                tz = bz[tb, u]
                if out_id.shape[0] < n:
                    out_id = np.empty(2 * n, dtype=np.int64)
                    out_arr = np.empty(2 * n, dtype=np.int64)
                removed = remove_within(bx, by, bz, barr, bid, bcnt, tx, ty, tz, r, out_id, out_arr)
                n -= removed
                total = 0
                for j in range(removed):
                    total += slot - out_arr[j]
                dsum_col[slot] = total
                if record:
                    while n_rec + removed > rec_id.shape[0]:
                        rec_id = np.concatenate((rec_id, np.empty(rec_id.shape[0], dtype=np.int64)))
                        rec_arr = np.concatenate((rec_arr, np.empty(rec_arr.shape[0], dtype=np.int64)))
                        rec_dep = np.concatenate((rec_dep, np.empty(rec_dep.shape[0], dtype=np.int64)))
                    for j in range(removed):
                        rec_id[n_rec] = out_id[j]
                        rec_arr[n_rec] = out_arr[j]
                        rec_dep[n_rec] = slot
                        n_rec += 1

            if arr_kind == ARR_POISSON:
                count = rng.poisson(arr_rate)
            elif arr_values.shape[0] == 1:
                count = arr_values[0]
            else:
                u01 = rng.random()
                idx = np.searchsorted(arr_cum, u01, side="right")
                if idx >= arr_values.shape[0]:
                    idx = arr_values.shape[0] - 1
                count = arr_values[idx]

            n_before[slot] = n + removed
            p_col[slot] = p
            b_col[slot] = b
            v_col[slot] = removed
            xi_col[slot] = count

            if proto == PROTO_A2:
                if b >= 2:
                    p_state = pparams[0] * p_state
                elif b == 0:
                    p_state = min(1.0, pparams[1] * p_state)
            elif proto == PROTO_A3:
                if b != 1:
                    K = K + pparams[0]
                elif coin_col[slot] == 0:
                    K = K + _h(h_code, K)
                else:
                    K = max(K - _h(h_code, K), 1.0)

        for _ in range(count):
            x, y, z = _sample_point(rng)
            bb = band_of(z, n_bands)
            if bcnt[bb] == bx.shape[1]:
                bx, by, bz, barr, bid = _grow(bx, by, bz, barr, bid)
            k = bcnt[bb]
            bx[bb, k] = x
            by[bb, k] = y
            bz[bb, k] = z
            barr[bb, k] = slot
            bid[bb, k] = next_id
            bcnt[bb] = k + 1
            next_id += 1
        n += count

    return (n_before, p_col, b_col, v_col, xi_col, dsum_col, coin_col,
            rec_id[:n_rec], rec_arr[:n_rec], rec_dep[:n_rec], n)
