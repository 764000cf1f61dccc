"""Hot numeric kernels: Legendre recurrences and certified tail sums.

Every kernel exists twice, ``*_nb`` (numba) and ``*_np`` (numpy). The
public names at the bottom dispatch on ``_accel.USE_NUMBA``.

Legendre polynomials here are normalized in L2([-1, 1], dx):
``Pn_j = sqrt(j + 1/2) * P_j`` so that ``Pn_j(1)**2 = (2j + 1) / 2``.
"""

from __future__ import annotations

import functools
import math

import numpy as np

from ._accel import USE_NUMBA, njit


# --------------------------------------------------------------------------
# analytic remainder bounds for  sum_{j > D} sigma_j^2 Pn_j(x)^2,
# sigma_j^2 = 1 / (1 + (j (j + 1))^s) <= j^(-2s),  s > 1


@njit
def endpoint_tail_bound(D, s):
    # sum_{j>D} (j + 1/2) j^(-2s) <= D^(2-2s)/(2s-2) + D^(1-2s)/(2(2s-1))
    D = max(D, 1.0)
    return D ** (2.0 - 2.0 * s) / (2.0 * s - 2.0) + 0.5 * D ** (1.0 - 2.0 * s) / (2.0 * s - 1.0)


@njit
def interior_tail_bound(D, s, x):
    # Bernstein: Pn_j(cos t)^2 <= (2 + 1/j) / (pi sin t)
    D = max(D, 1.0)
    sin_t = math.sqrt(max(1.0 - x * x, 0.0))
    if sin_t == 0.0:
        return np.inf
    return (2.0 + 1.0 / (D + 1.0)) / (math.pi * sin_t) * D ** (1.0 - 2.0 * s) / (2.0 * s - 1.0)


@njit
def pointwise_tail_bound(D, s, x):
    return min(endpoint_tail_bound(D, s), interior_tail_bound(D, s, x))


# --------------------------------------------------------------------------
# Legendre table


def _recurrence(deg_max):
    """``a_j = (2j+1)/(j+1)``, ``b_j = j/(j+1)`` so ``P_{j+1} = a_j x P_j - b_j P_{j-1}``."""
    j = np.arange(max(deg_max, 1) + 1, dtype=float)
    return (2.0 * j + 1.0) / (j + 1.0), j / (j + 1.0)


@njit
def _legendre_table_nb(x, deg_max, a, b):
    n = x.shape[0]
    out = np.empty((n, deg_max + 1))
    for i in range(n):
        xi = x[i]
        p_prev = 1.0
        out[i, 0] = math.sqrt(0.5)
        if deg_max >= 1:
            p_cur = xi
            out[i, 1] = math.sqrt(1.5) * xi
            for j in range(1, deg_max):
                p_next = a[j] * xi * p_cur - b[j] * p_prev
                p_prev = p_cur
                p_cur = p_next
                out[i, j + 1] = math.sqrt(j + 1.5) * p_cur
    return out


def _legendre_table_np(x, deg_max, a, b):
    x = np.asarray(x, dtype=float)
    out = np.empty((x.shape[0], deg_max + 1))
    out[:, 0] = math.sqrt(0.5)
    if deg_max >= 1:
        p_prev = np.ones_like(x)
        p_cur = x.copy()
        out[:, 1] = math.sqrt(1.5) * x
        for j in range(1, deg_max):
            p_next = a[j] * x * p_cur - b[j] * p_prev
            p_prev, p_cur = p_cur, p_next
            out[:, j + 1] = math.sqrt(j + 1.5) * p_cur
    return out


# --------------------------------------------------------------------------
# sum_{j=j0}^{j1} weight[j - j0] * Pn_j(x)^2  without storing the table


@njit
def _legendre_sq_sum_nb(x, j0, j1, weight, a, b):
    # degree loop outside, point loop inside: independent points vectorize
    n = x.shape[0]
    out = np.zeros(n)
    p_prev = np.zeros(n)
    p_cur = np.ones(n)
    for j in range(j1 + 1):
        c = weight[j - j0] * (j + 0.5) if j >= j0 else 0.0
        aj = a[j]
        bj = b[j]
        for i in range(n):
            pc = p_cur[i]
            out[i] += c * pc * pc
            p_next = aj * x[i] * pc - bj * p_prev[i]
            p_prev[i] = pc
            p_cur[i] = p_next
    return out


def _legendre_sq_sum_np(x, j0, j1, weight, a, b):
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    p_prev = np.zeros_like(x)
    p_cur = np.ones_like(x)
    for j in range(j1 + 1):
        if j >= j0:
            acc += weight[j - j0] * (j + 0.5) * p_cur * p_cur
        p_next = a[j] * x * p_cur - b[j] * p_prev
        p_prev, p_cur = p_cur, p_next
    return acc


# --------------------------------------------------------------------------
# adaptive certified tail  T(x) = sum_{j >= j0} sigma_j^2 Pn_j(x)^2


_CHECK_EVERY = 16


@njit
def _legendre_tail_nb(x, j0, s, tol, deg_max, sig2, a, b):
    n = x.shape[0]
    val = np.zeros(n)
    rem = np.zeros(n)
    deg = np.zeros(n, dtype=np.int64)
    for i in range(n):
        xi = x[i]
        p_prev = 0.0
        p_cur = 1.0
        acc = 0.0
        last = deg_max
        for j in range(deg_max + 1):
            if j >= j0:
                acc += sig2[j] * (j + 0.5) * p_cur * p_cur
                if (j - j0) % _CHECK_EVERY == _CHECK_EVERY - 1 or j == deg_max:
                    bnd = pointwise_tail_bound(float(j), s, xi)
                    if bnd <= tol[i]:
                        last = j
                        break
            p_next = a[j] * xi * p_cur - b[j] * p_prev
            p_prev = p_cur
            p_cur = p_next
        val[i] = acc
        deg[i] = last
        rem[i] = pointwise_tail_bound(float(last), s, xi)
    return val, rem, deg


def _legendre_tail_np(x, j0, s, tol, deg_max, sig2, a, b):
    x = np.asarray(x, dtype=float)
    tol = np.asarray(tol, dtype=float)
    n = x.shape[0]
    val = np.zeros(n)
    deg = np.full(n, deg_max, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    p_prev = np.zeros(n)
    p_cur = np.ones(n)
    sin_t = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    for j in range(deg_max + 1):
        if j >= j0:
            val[active] += sig2[j] * (j + 0.5) * p_cur[active] ** 2
            if (j - j0) % _CHECK_EVERY == _CHECK_EVERY - 1 or j == deg_max:
                bnd = _pointwise_tail_bound_vec(float(j), s, sin_t)
                done = active & (bnd <= tol)
                deg[done] = j
                active &= ~done
                if not active.any():
                    break
        p_next = a[j] * x * p_cur - b[j] * p_prev
        p_prev, p_cur = p_cur, p_next
    rem = _pointwise_tail_bound_vec(deg.astype(float), s, sin_t)
    return val, rem, deg


def _pointwise_tail_bound_vec(D, s, sin_t):
    D = np.maximum(D, 1.0)
    end = D ** (2.0 - 2.0 * s) / (2.0 * s - 2.0) + 0.5 * D ** (1.0 - 2.0 * s) / (2.0 * s - 1.0)
    with np.errstate(divide="ignore"):
        inner = np.where(
            sin_t > 0,
            (2.0 + 1.0 / (D + 1.0)) / (math.pi * np.where(sin_t > 0, sin_t, 1.0))
            * D ** (1.0 - 2.0 * s) / (2.0 * s - 1.0),
            np.inf,
        )
    return np.minimum(end, inner)


@functools.lru_cache(maxsize=16)
def legendre_sigma_sq(s, deg_max):
    """``1 / (1 + (j (j + 1))^s)`` for degrees ``0 .. deg_max`` (read-only)."""
    j = np.arange(deg_max + 1, dtype=float)
    out = 1.0 / (1.0 + (j * (j + 1.0)) ** s)
    out.flags.writeable = False
    return out


# --------------------------------------------------------------------------
# dispatch


@functools.lru_cache(maxsize=16)
def _recurrence_cached(deg_max):
    a, b = _recurrence(deg_max)
    a.flags.writeable = False
    b.flags.writeable = False
    return a, b


def legendre_table(x, deg_max):
    """Normalized Legendre values, shape ``(len(x), deg_max + 1)``."""
    x = np.ascontiguousarray(x, dtype=float)
    a, b = _recurrence_cached(int(deg_max))
    if USE_NUMBA:
        return _legendre_table_nb(x, int(deg_max), a, b)
    return _legendre_table_np(x, int(deg_max), a, b)


def legendre_sq_sum(x, j0, j1, weight=None):
    x = np.ascontiguousarray(x, dtype=float)
    if j1 < j0:
        return np.zeros(x.shape[0])
    if weight is None:
        weight = np.ones(j1 - j0 + 1)
    weight = np.ascontiguousarray(weight, dtype=float)
    a, b = _recurrence_cached(int(j1))
    if USE_NUMBA:
        return _legendre_sq_sum_nb(x, int(j0), int(j1), weight, a, b)
    return _legendre_sq_sum_np(x, int(j0), int(j1), weight, a, b)


def legendre_tail(x, j0, s, tol, deg_max):
    """Certified tail ``sum_{j>=j0} sigma_j^2 Pn_j(x)^2`` per point.

    Stops at the first checked degree whose analytic remainder is within
    ``tol`` (array, per point) or at ``deg_max``. Returns values,
    remainder bounds and the last degree summed.
    """
    x = np.ascontiguousarray(x, dtype=float)
    tol = np.ascontiguousarray(np.broadcast_to(tol, x.shape), dtype=float)
    sig2 = legendre_sigma_sq(float(s), int(deg_max))
    a, b = _recurrence_cached(int(deg_max))
    if USE_NUMBA:
        return _legendre_tail_nb(x, int(j0), float(s), tol, int(deg_max), sig2, a, b)
    return _legendre_tail_np(x, int(j0), float(s), tol, int(deg_max), sig2, a, b)


IMPLEMENTATIONS = {
    "legendre_table": (_legendre_table_nb, _legendre_table_np),
    "legendre_sq_sum": (_legendre_sq_sum_nb, _legendre_sq_sum_np),
    "legendre_tail": (_legendre_tail_nb, _legendre_tail_np),
}
