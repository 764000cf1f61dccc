"""Christoffel function, spectral tails and the projection-error identity.

Notation: for a model with ranked singular values ``sigma_k`` and
L2-orthonormal eigenfunctions ``eta_k``,

* ``N(m, x) = sum_{k<m} |eta_k(x)|^2`` and ``N(m) = sup_x N(m, x)``;
* ``T_m(x) = sum_{k>=m} sigma_k^2 |eta_k(x)|^2``, whose supremum is the
  squared worst-case error of the orthogonal projection onto the first
  ``m - 1`` eigenfunctions, measured in the uniform norm.

Suprema over the domain are taken on a grid and are lower estimates,
except where the supremum is known in closed form (trigonometric models,
and the Legendre endpoint, which every Legendre grid contains).
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import special

from . import _kernels
from .errors import ResourceError
from .spectral import SpectralModel, sigma_sq_total, sigmas

# largest polynomial degree any Legendre tail may sum to
LEGENDRE_DEGREE_BUDGET = 1 << 18
# largest rank a scalar series may be truncated at
SERIES_RANK_BUDGET = 1 << 27


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid on the model domain.

    ``rule`` is ``"uniform"`` (torus, ``2 pi i / N``) or ``"chebyshev"``
    (Chebyshev-Lobatto points on ``[-1, 1]``, endpoints included).
    """

    counts: Tuple[int, ...]
    rule: str = "uniform"

    def __post_init__(self):
        if any(c < 2 for c in self.counts):
            raise ValueError("grids need at least 2 points per dimension")
        if self.rule not in ("uniform", "chebyshev"):
            raise ValueError(f"unknown grid rule {self.rule!r}")

    @classmethod
    def default(cls, model, per_dim=None):
        if per_dim is None:
            per_dim = 1 << 12 if model.d <= 2 else 1 << 6
        rule = "chebyshev" if model.basis == "legendre" else "uniform"
        return cls(tuple([int(per_dim)] * model.d), rule)

    @property
    def size(self):
        return int(np.prod(self.counts))

    def axes(self):
        if self.rule == "uniform":
            return [2.0 * math.pi * np.arange(c) / c for c in self.counts]
        # descending cos -> sort ascending, exact endpoints
        out = []
        for c in self.counts:
            t = np.cos(math.pi * np.arange(c) / (c - 1))[::-1].copy()
            t[0], t[-1] = -1.0, 1.0
            out.append(t)
        return out

    def points(self):
        axes = self.axes()
        if len(axes) == 1:
            return axes[0][:, None]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def to_dict(self):
        return {"counts": list(self.counts), "rule": self.rule}


@dataclass(frozen=True)
class TailEstimate:
    """A truncated series: true value lies in ``[value, value + remainder_bound]``."""

    value: float
    truncation_rank: Optional[int]
    remainder_bound: float

    @property
    def upper(self):
        return self.value + self.remainder_bound


# --------------------------------------------------------------------------
# Christoffel function


def christoffel_eval(model, m, x):
    """``N(m, x)`` at one point (float) or many points (array)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    pts = model.check_points(x)
    if model.basis == "trig":
        # |exp(i k.x)| = 1 identically
        out = np.full(pts.shape[0], float(m - 1))
    else:
        out = _kernels.legendre_sq_sum(pts[:, 0], 0, m - 2)
    return float(out[0]) if np.ndim(x) == 0 or (np.ndim(x) == 1 and model.d > 1) else out


def christoffel_sup(model, m, grid=None):
    """Grid maximum of ``N(m, x)``.

    Exact for trigonometric models (``m - 1``) and for Legendre (the
    maximum ``(m-1)^2/2`` sits at ``x = 1``, which every Chebyshev grid
    holds). A lower estimate otherwise.
    """
    if grid is None:
        grid = GridSpec.default(model)
    if model.basis == "trig":
        return float(m - 1)
    pts = grid.points()
    return float(np.max(christoffel_eval(model, m, pts)))


# --------------------------------------------------------------------------
# scalar series  sum_{k >= start} g(k) sigma_k^2


def _legendre_series_bound(K, s, kind):
    # ranks k > K; sigma_k^2 <= (k-1)^(-2s);  sum_{j>=K} j^(-a) <= K^-a + K^(1-a)/(a-1)
    K = float(K)

    def zsum(a):
        return K ** -a + K ** (1.0 - a) / (a - 1.0)

    if kind == "sigma2":
        return zsum(2 * s)
    if kind == "endpoint":
        # (j + 1/2) j^-2s
        return zsum(2 * s - 1) + 0.5 * zsum(2 * s)
    # N(4k)/k = (4k-1)^2/(2k) <= 8k = 8(j+1), j = k-1 >= K
    return 8.0 * (zsum(2 * s - 1) + zsum(2 * s))


def _require_pointwise(model):
    if model.basis == "legendre" and not model.s > 1:
        raise ValueError("Legendre tails and kernel values need s > 1")


def _chunked_sum(fn, start, stop, chunk=1 << 22):
    total = 0.0
    k = start
    while k <= stop:
        hi = min(stop, k + chunk - 1)
        total += math.fsum(fn(np.arange(k, hi + 1, dtype=float)))
        k = hi + 1
    return total


@functools.lru_cache(maxsize=512)
def _series(model, start, kind, eps=None, rtol=1e-10):
    """``sum_{k>=start} g(k) sigma_k^2`` with ``g = 1`` (kind ``"sigma2"``),
    ``g(k) = N(4k)/k`` (kind ``"christoffel"``) or, Legendre only,
    ``g(k) = |eta_k(1)|^2`` (kind ``"endpoint"``)."""
    start = max(int(start), 1)
    if model.basis == "trig":
        total, err = sigma_sq_total(model)
        head = math.fsum(sigmas(model, start - 1) ** 2) if start > 1 else 0.0
        tail = total - head
        slack = err + 4 * np.finfo(float).eps * total
        if kind == "sigma2":
            return TailEstimate(max(tail - slack, 0.0), None, 2 * slack)
        # (4k - 1)/k = 4 - 1/k:  4 tail - sum_{k>=start} sigma_k^2 / k
        K = max(2 * start, 64)
        while True:
            sig = sigmas(model, K)
            ks = np.arange(start, K + 1)
            inv = math.fsum(sig[start - 1:] ** 2 / ks)
            after = max(total - math.fsum(sig ** 2), 0.0) + slack
            rem = after / (K + 1)
            value = 4.0 * tail - inv
            target = eps if eps is not None else rtol * abs(value)
            if rem <= target or K >= SERIES_RANK_BUDGET:
                break
            K *= 2
        # the discarded part of sum sigma^2/k is subtracted, so it widens downward
        lo = value - 4 * slack - rem
        return TailEstimate(max(lo, 0.0), K, 4 * 2 * slack + rem)

    if model.basis == "power_law":
        p, u = model.p, model.u
        if kind == "sigma2":
            v = float(special.zeta(2 * p, start))
            return TailEstimate(v, None, 8 * np.finfo(float).eps * v)
        if 2 * p <= u:
            raise ValueError("series diverges: need 2p > u")
        if float(u).is_integer() and u >= 0:
            # (4k-1)^u / k^(1+2p) expands into Hurwitz zeta values
            terms = [
                math.comb(int(u), j) * 4.0 ** j * (-1.0) ** (int(u) - j)
                * float(special.zeta(1 + 2 * p - j, start))
                for j in range(int(u) + 1)
            ]
            v = math.fsum(terms)
            scale = math.fsum(abs(x) for x in terms)
            return TailEstimate(v, None, 16 * np.finfo(float).eps * scale)
        fn = lambda k: (4 * k - 1) ** u / k * k ** (-2 * p)  # noqa: E731
        bound = lambda K: 4 ** u * (K ** (u - 2 * p) / (2 * p - u))  # noqa: E731
    elif model.basis == "legendre":
        s = model.s
        if kind != "sigma2":
            _require_pointwise(model)

        def sig2(k):
            deg = k - 1.0
            return 1.0 / (1.0 + (deg * (deg + 1.0)) ** s)

        if kind == "sigma2":
            fn = sig2
        elif kind == "endpoint":
            fn = lambda k: (k - 0.5) * sig2(k)  # noqa: E731
        else:
            fn = lambda k: (4 * k - 1) ** 2 / 2.0 / k * sig2(k)  # noqa: E731
        bound = lambda K: _legendre_series_bound(K, s, kind)  # noqa: E731
    else:  # pragma: no cover
        raise ValueError(model.basis)

    K = max(4 * start, 1024)
    acc = _chunked_sum(fn, start, K)
    while True:
        rem = bound(K)
        target = eps if eps is not None else rtol * acc
        if rem <= target:
            return TailEstimate(acc, K, rem)
        if K >= SERIES_RANK_BUDGET:
            raise ResourceError(
                f"series remainder {rem:.3g} above target {target:.3g} at rank {K}", achieved=rem
            )
        acc += _chunked_sum(fn, K + 1, 2 * K)
        K *= 2


def sigma_sq_tail(model, start, eps=None):
    """``sum_{k >= start} sigma_k^2`` (the eigenvalue tail)."""
    return _series(model, start, "sigma2", eps)


def christoffel_weighted_tail(model, start, eps=None):
    """``sum_{k >= start} N(4k) sigma_k^2 / k`` with the exact ``N``."""
    return _series(model, start, "christoffel", eps)


# --------------------------------------------------------------------------
# pointwise tails


def tail_values(model, m, x, eps=1e-10, deg_max=LEGENDRE_DEGREE_BUDGET, strict=True):
    """Vectorized ``T_m(x)``: returns ``(values, remainder_bounds, ranks)``.

    For trigonometric models the tail is pointwise constant and equal to
    ``sum_{k>=m} sigma_k^2``. For Legendre each point is summed until its
    analytic remainder is below ``eps`` (scalar or per point); with
    ``strict`` a point that
    cannot get there within ``deg_max`` raises :class:`ResourceError`.
    """
    if np.any(np.asarray(eps) <= 0):
        raise ValueError("eps must be positive")
    pts = model.check_points(x)
    if model.basis == "trig":
        t = sigma_sq_tail(model, m)
        n = pts.shape[0]
        return np.full(n, t.value), np.full(n, t.remainder_bound), np.full(n, -1)
    _require_pointwise(model)
    x0 = pts[:, 0]
    vals, rem, deg = _kernels.legendre_tail(x0, m - 1, model.s, eps, deg_max)
    # at x = +-1 every |eta_k|^2 is known, so the scalar series is sharper
    ends = np.abs(x0) == 1.0
    if ends.any():
        e = _series(model, m, "endpoint", float(np.min(np.broadcast_to(eps, x0.shape)[ends])))
        vals[ends], rem[ends], deg[ends] = e.value, e.remainder_bound, e.truncation_rank - 1
    if strict and np.any(rem > eps):
        worst = float(np.max(rem - eps))
        raise ResourceError(
            f"Legendre tail remainder exceeds eps by {worst:.3g} at degree budget {deg_max}",
            achieved=worst,
        )
    return vals, rem, deg + 1


def tail_eval(model, m, x, eps=1e-10):
    """``T_m(x)`` at a single point, as a :class:`TailEstimate`."""
    v, r, k = tail_values(model, m, x, eps)
    return TailEstimate(float(v[0]), int(k[0]) if k[0] > 0 else None, float(r[0]))


def projection_error_sup(model, m, grid=None, eps=1e-10, with_upper=False):
    """``sqrt(sup_x T_m(x))`` on the grid; ``with_upper`` adds the
    certified upper value from the truncation remainder."""
    if grid is None:
        grid = GridSpec.default(model)
    if model.basis == "trig":
        t = sigma_sq_tail(model, m)
        lo, hi = math.sqrt(t.value), math.sqrt(t.upper)
    else:
        v, r, _ = tail_values(model, m, grid.points(), eps)
        lo, hi = math.sqrt(v.max()), math.sqrt((v + r).max())
    return (lo, hi) if with_upper else lo


def tail_bound_rhs(model, m, eps=None):
    """``2 * sum_{k >= floor(m/2)} N(4k) sigma_k^2 / k`` as a TailEstimate."""
    if m < 2:
        raise ValueError("m must be >= 2")
    t = christoffel_weighted_tail(model, m // 2, eps)
    return TailEstimate(2 * t.value, t.truncation_rank, 2 * t.remainder_bound)


def bounds_table(model, ms, grid=None, path=None):
    """Rows ``(m, N(m), projection_error_sup, tail_bound_rhs)``; optional CSV."""
    rows = []
    for m in ms:
        rows.append(
            (
                int(m),
                christoffel_sup(model, m, grid),
                projection_error_sup(model, m, grid),
                tail_bound_rhs(model, m).value,
            )
        )
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "N(m)", "projection_error_sup", "tail_bound_rhs"])
            for r in rows:
                w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
    return rows
