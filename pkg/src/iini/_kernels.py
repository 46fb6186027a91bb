"""Compiled inner loops.

All kernels work on the flattened value array plus per-pixel neighbour
tables from :func:`iini.dissimilarity.neighbour_table` (index -1 and weight
0 mark a missing neighbour).
"""

import math

import numpy as np
from numba import njit

_INV_2_53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi


@njit(cache=True, nogil=True)
def local_d(values, nbr_idx, nbr_w, k, p, cosine):
    acc = 0.0
    wsum = 0.0
    for j in range(4):
        nb = nbr_idx[k, j]
        if nb < 0:
            continue
        w = nbr_w[k, j]
        d = p - values[nb]
        if cosine:
            acc -= w * math.cos(d)
        else:
            acc += w * d * d
        wsum += w
    return acc / wsum


@njit(cache=True, nogil=True)
def metropolis_block(values, pix, nbr_idx, nbr_w, candidates, raw, temperature, cosine):
    """Run ``len(raw) // 3`` Metropolis proposals in place; return accepted count.

    Each proposal consumes three consecutive words of ``raw``: pixel choice,
    candidate choice and the acceptance coin, in that order.
    """
    n_pix = pix.size
    n_cand = candidates.size
    accepted = 0
    for it in range(raw.size // 3):
        u_pix = (raw[3 * it] >> np.uint64(11)) * _INV_2_53
        u_cand = (raw[3 * it + 1] >> np.uint64(11)) * _INV_2_53
        coin = (raw[3 * it + 2] >> np.uint64(11)) * _INV_2_53
        k = min(int(u_pix * n_pix), n_pix - 1)
        q = candidates[min(int(u_cand * n_cand), n_cand - 1)]
        i = pix[k]
        p = values[i]
        if q == p:
            accepted += 1
            continue
        dd = local_d(values, nbr_idx, nbr_w, k, q, cosine) - local_d(values, nbr_idx, nbr_w, k, p, cosine)
        if dd <= 0.0 or (temperature > 0.0 and coin < math.exp(-dd / temperature)):
            values[i] = q
            accepted += 1
    return accepted


@njit(cache=True, nogil=True)
def optimal_value(values, nbr_idx, nbr_w, k, cosine):
    """Closed-form local optimum; returns NaN for a zero circular resultant."""
    if cosine:
        s = 0.0
        c = 0.0
        for j in range(4):
            nb = nbr_idx[k, j]
            if nb >= 0:
                s += nbr_w[k, j] * math.sin(values[nb])
                c += nbr_w[k, j] * math.cos(values[nb])
        if math.hypot(s, c) <= 1e-12:
            return math.nan
        return math.atan2(s, c) % _TWO_PI
    acc = 0.0
    wsum = 0.0
    for j in range(4):
        nb = nbr_idx[k, j]
        if nb >= 0:
            acc += nbr_w[k, j] * values[nb]
            wsum += nbr_w[k, j]
    return acc / wsum


@njit(cache=True, nogil=True)
def relax_sweeps(values, pix, nbr_idx, nbr_w, cosine, tolerance, max_sweeps):
    """Successive-displacement sweeps over ``pix`` in the given order.

    Returns ``(sweeps, last_max_update, bad)`` where ``bad`` is the position
    in ``pix`` of a pixel with an undefined optimum, or -1.
    """
    sweeps = 0
    max_update = math.inf
    while sweeps < max_sweeps:
        max_update = 0.0
        for k in range(pix.size):
            i = pix[k]
            new = optimal_value(values, nbr_idx, nbr_w, k, cosine)
            if math.isnan(new):
                return sweeps, max_update, k
            delta = abs(new - values[i])
            if cosine:
                delta = abs((new - values[i] + math.pi) % _TWO_PI - math.pi)
            if delta > max_update:
                max_update = delta
            values[i] = new
        sweeps += 1
        if max_update < tolerance:
            break
    return sweeps, max_update, -1


@njit(cache=True)
def enumerate_minimum(values, pix, nbr_idx, nbr_w, candidates, cosine):
    """Exhaustive search for the assignment minimizing the summed own-D of ``pix``.

    Assignments are visited in lexicographic order and only a strictly
    smaller energy replaces the incumbent, so ties go to the
    lexicographically first assignment.
    """
    n = pix.size
    m = candidates.size
    digits = np.zeros(n, dtype=np.int64)
    best = np.zeros(n, dtype=np.int64)
    best_energy = math.inf
    for j in range(n):
        values[pix[j]] = candidates[0]
    while True:
        e = 0.0
        for j in range(n):
            e += local_d(values, nbr_idx, nbr_w, j, values[pix[j]], cosine)
        if e < best_energy - 1e-12:
            best_energy = e
            best[:] = digits
        pos = n - 1
        while pos >= 0:
            digits[pos] += 1
            if digits[pos] < m:
                values[pix[pos]] = candidates[digits[pos]]
                break
            digits[pos] = 0
            values[pix[pos]] = candidates[0]
            pos -= 1
        if pos < 0:
            break
    return best, best_energy
