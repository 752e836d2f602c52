"""Compiled inner loop of the solver.

The update sequence, drawing included, runs inside one njit function so that
desk-scale grids finish in seconds. Sampling uses numba's own seeded RNG;
two modes: uniform size-tau subsets via a rolling partial Fisher-Yates pass,
and one-index-per-bucket draws via per-bucket inverse-CDF tables.
"""

import numpy as np
from numba import njit

from .losses import LOGISTIC_CODE

MODE_TAU_NICE = 0
MODE_BUCKET = 1

STATUS_OK = 0
STATUS_DONE_EARLY = 1  # stop_gap reached
STATUS_NONFINITE = 2
STATUS_GAP_BLOWN = 3

GAP_FLOOR = 1e-16
GAP_CEIL = 1e10
EXP_CLAMP = 500.0


@njit(cache=True)
def _phi(code, z, y):
    if code == LOGISTIC_CODE:
        x = -y * z
        if x > 0.0:
            return x + np.log1p(np.exp(-x))
        return np.log1p(np.exp(x))
    diff = z - y
    return 0.5 * diff * diff


@njit(cache=True)
def _phi_prime(code, z, y):
    if code == LOGISTIC_CODE:
        t = y * z
        if t > EXP_CLAMP:
            t = EXP_CLAMP
        elif t < -EXP_CLAMP:
            t = -EXP_CLAMP
        return -y / (1.0 + np.exp(t))
    return z - y


@njit(cache=True)
def objective_value(indptr, rows, vals, y, code, lam, w):
    n = len(y)
    acc = 0.0
    for i in range(n):
        z = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            z += vals[k] * w[rows[k]]
        acc += _phi(code, z, y[i])
    wn = 0.0
    for r in range(len(w)):
        wn += w[r] * w[r]
    return acc / n + 0.5 * lam * wn


@njit(cache=True)
def run_solver(
    indptr,
    rows,
    vals,
    y,
    code,
    lam,
    gamma,
    theta,
    p,
    mode,
    tau,
    bucket_ptr,
    bucket_items,
    bucket_cum,
    total_iters,
    log_every,
    seed,
    have_ref,
    p_star,
    w_star,
    alpha_star,
    stop_gap,
    w,
    alpha,
    cp_iter,
    cp_gap,
    cp_pot,
    cp_drift,
):
    """Run dfSDCA for total_iters iterations, logging every log_every.

    Mutates w, alpha, and the checkpoint arrays in place. Returns
    (status, checkpoints_written, bad_example, bad_iteration).
    """
    n = len(y)
    d = len(w)
    np.random.seed(seed)
    perm = np.arange(n)
    S = np.empty(tau, dtype=np.int64)
    delta = np.empty(tau)
    inv_nlam = 1.0 / (n * lam)

    def checkpoint(t, ncp):
        # one fused pass: objective, and w rebuilt from alpha for the drift
        obj = 0.0
        rebuilt = np.zeros(d)
        for i in range(n):
            z = 0.0
            c = alpha[i] * inv_nlam
            for k in range(indptr[i], indptr[i + 1]):
                z += vals[k] * w[rows[k]]
                rebuilt[rows[k]] += c * vals[k]
            obj += _phi(code, z, y[i])
        obj /= n
        wn = 0.0
        for r in range(d):
            wn += w[r] * w[r]
        obj += 0.5 * lam * wn

        err = 0.0
        rn = 0.0
        for r in range(d):
            diff = rebuilt[r] - w[r]
            err += diff * diff
            rn += rebuilt[r] * rebuilt[r]
        scale = max(np.sqrt(rn), np.sqrt(wn), 1e-12)
        drift = np.sqrt(err) / scale

        gap = np.nan
        pot = np.nan
        if have_ref:
            gap = obj - p_star
            if gap < GAP_FLOOR:
                gap = GAP_FLOOR
            dw = 0.0
            for r in range(d):
                diff = w[r] - w_star[r]
                dw += diff * diff
            da = 0.0
            for i in range(n):
                diff = alpha[i] - alpha_star[i]
                da += diff * diff
            pot = 0.5 * lam * dw + 0.5 * gamma / n * da
        cp_iter[ncp] = t
        cp_gap[ncp] = gap
        cp_pot[ncp] = pot
        cp_drift[ncp] = drift
        return obj, gap

    ncp = 0
    obj, gap = checkpoint(0, ncp)
    ncp += 1
    if not np.isfinite(obj):
        return STATUS_NONFINITE, ncp, -1, 0

    next_log = log_every
    for t in range(1, total_iters + 1):
        if mode == MODE_TAU_NICE:
            for k in range(tau):
                j = k + np.random.randint(0, n - k)
                tmp = perm[k]
                perm[k] = perm[j]
                perm[j] = tmp
                S[k] = perm[k]
        else:
            for l in range(tau):
                a = bucket_ptr[l]
                b = bucket_ptr[l + 1]
                u = np.random.random()
                lo = a
                hi = b
                while lo < hi:
                    mid = (lo + hi) // 2
                    if bucket_cum[mid] > u:
                        hi = mid
                    else:
                        lo = mid + 1
                if lo >= b:
                    lo = b - 1
                S[l] = bucket_items[lo]

        # all adjustments are measured against the pre-update iterate
        for k in range(tau):
            i = S[k]
            z = 0.0
            for kk in range(indptr[i], indptr[i + 1]):
                z += vals[kk] * w[rows[kk]]
            dv = _phi_prime(code, z, y[i]) + alpha[i]
            if not np.isfinite(dv):
                return STATUS_NONFINITE, ncp, i, t
            delta[k] = dv

        for k in range(tau):
            i = S[k]
            step = theta / p[i] * delta[k]
            alpha[i] -= step
            c = step * inv_nlam
            for kk in range(indptr[i], indptr[i + 1]):
                w[rows[kk]] -= c * vals[kk]

        if t == next_log or t == total_iters:
            if t == next_log:
                next_log += log_every
            obj, gap = checkpoint(t, ncp)
            ncp += 1
            if not np.isfinite(obj):
                return STATUS_NONFINITE, ncp, -1, t
            if have_ref and gap > GAP_CEIL:
                return STATUS_GAP_BLOWN, ncp, -1, t
            if have_ref and stop_gap > 0.0 and gap <= stop_gap:
                return STATUS_DONE_EARLY, ncp, -1, t

    return STATUS_OK, ncp, -1, total_iters
