"""Spectral models: weights on Z^d, the Legendre operator, ranked spectra.

Ranks are 1-based. For the trigonometric models, rank ``k`` refers to the
k-th frequency of the non-increasing rearrangement of ``1/w``; ties are
broken by the l1 norm of the frequency, then lexicographically by the
coordinates. For the Legendre model rank ``k`` is polynomial degree
``k - 1``.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from . import _kernels
from .errors import DomainError, ResourceError

TWO_PI = 2.0 * math.pi

# enumeration budget for frequency sets
MAX_SET_SIZE = 20_000_000


@dataclass(frozen=True)
class WeightModel:
    """Product weight ``w`` on Z^d.

    ``kind`` is ``"sharp"`` (``prod (1+|k_j|)^s``), ``"plus"``
    (``prod (1+k_j^2)^(s/2)``) or ``"custom"``. A custom model needs a
    vectorized ``evaluator`` (integer array ``(n, d)`` -> positive
    weights) and ``coord_bound(R)``, an integer bound on ``|k_j|`` valid
    for every ``k`` with ``w(k) <= R``. ``inverse_sq_total`` (the value of
    ``sum 1/w^2``) is optional and only needed for tail quantities.
    """

    kind: str
    s: float
    d: int
    evaluator: Optional[Callable] = field(default=None, compare=False)
    coord_bound: Optional[Callable] = field(default=None, compare=False)
    inverse_sq_total: Optional[float] = None
    description: str = ""

    def __post_init__(self):
        if self.kind not in ("sharp", "plus", "custom"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.d < 1 or int(self.d) != self.d:
            raise ValueError("d must be a positive integer")
        if self.kind != "custom" and not self.s > 0:
            raise ValueError("s must be positive")
        if self.kind == "custom" and (self.evaluator is None or self.coord_bound is None):
            raise ValueError("custom weights need an evaluator and a coord_bound")

    def __hash__(self):
        if self.kind == "custom":
            return hash((self.kind, self.d, id(self.evaluator)))
        return hash((self.kind, float(self.s), int(self.d)))

    @property
    def square_summable(self):
        """Analytic check of ``sum 1/w(k)^2 < inf`` for built-in kinds."""
        if self.kind == "custom":
            return self.inverse_sq_total is not None and math.isfinite(self.inverse_sq_total)
        return self.s > 0.5

    def base(self, k):
        """Integer base whose power is ``w`` (exact tie keys), or None."""
        k = np.asarray(k, dtype=np.int64)
        if self.kind == "sharp":
            return np.prod(1 + np.abs(k), axis=-1)
        if self.kind == "plus":
            return np.prod(1 + k * k, axis=-1)
        return None

    def weights(self, k):
        k = np.atleast_2d(np.asarray(k, dtype=np.int64))
        if k.shape[-1] != self.d:
            raise ValueError(f"frequency has {k.shape[-1]} coordinates, model has d={self.d}")
        if self.kind == "sharp":
            return self.base(k).astype(float) ** self.s
        if self.kind == "plus":
            return self.base(k).astype(float) ** (self.s / 2.0)
        w = np.asarray(self.evaluator(k), dtype=float)
        if np.any(~(w > 0)):
            raise ValueError("custom weight evaluator returned a non-positive value")
        return w


def weight_eval(model, k):
    """``w(k)`` for a single frequency vector."""
    k = np.asarray(k, dtype=np.int64).reshape(-1)
    if k.shape[0] != model.d:
        raise ValueError(f"frequency has {k.shape[0]} coordinates, model has d={model.d}")
    return float(model.weights(k[None, :])[0])


def _coord_bound(model, R):
    if model.kind == "sharp":
        # (1+|k_j|)^s <= w(k) <= R
        return max(int(math.floor(R ** (1.0 / model.s) * (1 + 1e-12))) - 1, 0)
    if model.kind == "plus":
        return max(int(math.floor(math.sqrt(max(R ** (2.0 / model.s) * (1 + 1e-12) - 1.0, 0.0)))), 0)
    return int(model.coord_bound(R))


def frequency_set(model, R):
    """All ``k`` in Z^d with ``w(k) <= R``, shape ``(M, d)``, unsorted."""
    if R < 1 and model.kind != "custom":
        return np.zeros((0, model.d), dtype=np.int64)
    kmax = _coord_bound(model, R)
    ks = np.arange(-kmax, kmax + 1, dtype=np.int64)
    if model.kind == "custom":
        grids = np.meshgrid(*([ks] * model.d), indexing="ij")
        box = np.stack([g.ravel() for g in grids], axis=1)
        if box.shape[0] > MAX_SET_SIZE:
            raise ResourceError("enumeration box too large", achieved=R)
        return box[model.weights(box) <= R]

    # grow the hyperbolic cross one coordinate at a time; every factor is >= 1
    # so a partial product above the cap can never come back under it
    cap = R ** (1.0 / model.s) if model.kind == "sharp" else R ** (2.0 / model.s)
    cap = int(math.floor(cap * (1 + 1e-12)))
    babs = model.base(np.arange(0, kmax + 1, dtype=np.int64)[:, None])  # increasing in |k|
    coords = np.zeros((1, 0), dtype=np.int64)
    prods = np.ones(1, dtype=np.int64)
    for _ in range(model.d):
        # integer products: prods * b <= cap  <=>  b <= cap // prods
        cnt = np.searchsorted(babs, cap // prods, side="right")  # allowed |k| in [0, cnt)
        sizes = 2 * cnt - 1
        total = int(sizes.sum())
        if total > MAX_SET_SIZE:
            raise ResourceError(f"frequency set exceeds {MAX_SET_SIZE} elements", achieved=R)
        row = np.repeat(np.arange(prods.size), sizes)
        offs = np.arange(total) - np.repeat(np.cumsum(sizes) - sizes, sizes)
        kj = offs - np.repeat(cnt - 1, sizes)
        coords = np.concatenate([coords[row], kj[:, None]], axis=1)
        prods = prods[row] * babs[np.abs(kj)]
    return coords[model.weights(coords) <= R]


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralModel:
    """Orthonormal system plus singular values on a compact domain.

    ``basis`` is ``"trig"`` (exponentials on the torus ``[0, 2pi)^d`` with
    the normalized Lebesgue measure), ``"legendre"`` (normalized Legendre
    polynomials on ``[-1, 1]`` with ``dx``, mass 2; pointwise tails and
    kernel values need ``s > 1``), or ``"power_law"``,
    a basis-free synthetic spectrum ``sigma_k = k^-p`` with Christoffel
    growth ``N(m) = (m-1)^u`` used for bound evaluations only.
    """

    basis: str
    weight: Optional[WeightModel] = None
    s: Optional[float] = None
    p: Optional[float] = None
    u: Optional[float] = None

    def __post_init__(self):
        if self.basis == "trig":
            if self.weight is None:
                raise ValueError("trig model needs a WeightModel")
        elif self.basis == "legendre":
            if self.s is None or not self.s > 0.5:
                raise ValueError("Legendre model needs s > 1/2")
        elif self.basis == "power_law":
            if self.p is None or self.u is None or not self.p > 0.5:
                raise ValueError("power-law model needs p > 1/2 and u")
        else:
            raise ValueError(f"unknown basis {self.basis!r}")

    # constructors -----------------------------------------------------
    @classmethod
    def trig_sharp(cls, s, d):
        return cls("trig", weight=WeightModel("sharp", float(s), int(d)))

    @classmethod
    def trig_plus(cls, s, d):
        return cls("trig", weight=WeightModel("plus", float(s), int(d)))

    @classmethod
    def legendre(cls, s):
        return cls("legendre", s=float(s))

    @classmethod
    def power_law(cls, p, u=1.0):
        return cls("power_law", p=float(p), u=float(u))

    # descriptors -------------------------------------------------------
    def to_dict(self):
        if self.basis == "trig":
            if self.weight.kind == "custom":
                raise ValueError("custom weights cannot be serialized")
            return {"basis": f"trig_{self.weight.kind}", "s": self.weight.s, "d": self.weight.d}
        if self.basis == "legendre":
            return {"basis": "legendre", "s": self.s, "d": 1}
        return {"basis": "power_law", "p": self.p, "u": self.u}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, desc):
        basis = desc["basis"]
        if basis == "trig_sharp":
            return cls.trig_sharp(desc["s"], desc.get("d", 1))
        if basis == "trig_plus":
            return cls.trig_plus(desc["s"], desc.get("d", 1))
        if basis == "legendre":
            if desc.get("d", 1) != 1:
                raise ValueError("the Legendre model is univariate")
            return cls.legendre(desc["s"])
        if basis == "power_law":
            return cls.power_law(desc["p"], desc.get("u", 1.0))
        raise ValueError(f"unknown basis {basis!r}")

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    # properties -------------------------------------------------------
    @property
    def d(self):
        return self.weight.d if self.basis == "trig" else 1

    @property
    def measure_mass(self):
        return 2.0 if self.basis == "legendre" else 1.0

    @property
    def domain(self):
        if self.basis == "trig":
            return f"torus [0, 2pi)^{self.d}, measure (2pi)^-d dx"
        if self.basis == "legendre":
            return "[-1, 1], measure dx"
        return "abstract (no basis functions)"

    @property
    def bounded_ons(self):
        """True when every basis function is bounded by 1 in modulus."""
        return self.basis == "trig"

    def check_points(self, x):
        """Validate points and return them as a float array ``(n, d)``."""
        if self.basis == "power_law":
            raise ValueError("power-law models have no domain points")
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1, 1)
        elif x.ndim == 1:
            x = x.reshape(-1, 1) if self.d == 1 else x.reshape(1, -1)
        if x.shape[1] != self.d:
            raise ValueError(f"points have {x.shape[1]} coordinates, model has d={self.d}")
        if not np.all(np.isfinite(x)):
            raise DomainError("non-finite point")
        if self.basis == "trig":
            if np.any(x < 0) or np.any(x > TWO_PI):
                raise DomainError("point outside the torus [0, 2pi]^d")
        elif np.any(np.abs(x) > 1.0):
            raise DomainError("point outside [-1, 1]")
        return x

    def sup_eta_sq(self, ranks):
        """``sup_x |eta_k(x)|^2`` for the given ranks."""
        ranks = np.asarray(ranks)
        if self.basis == "trig":
            return np.ones(ranks.shape)
        if self.basis == "legendre":
            return (2.0 * (ranks - 1) + 1.0) / 2.0
        raise ValueError("power-law models have no basis functions")

    def christoffel_exact(self, m):
        """Closed-form ``N(m) = sup_x sum_{k<m} |eta_k(x)|^2``."""
        m = np.asarray(m, dtype=float)
        if self.basis == "trig":
            return m - 1.0
        if self.basis == "legendre":
            return (m - 1.0) ** 2 / 2.0
        return np.maximum(m - 1.0, 0.0) ** self.u


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RankedSpectrum:
    """First ``N`` singular values in rank order.

    ``index`` holds the frequency vectors ``(N, d)`` for trigonometric
    models and the polynomial degree / rank for the others.
    """

    ranks: np.ndarray
    index: np.ndarray
    sigma: np.ndarray
    tie_rule: str = "sigma desc, then |k|_1 asc, then coordinates lexicographic asc"

    def __len__(self):
        return int(self.sigma.shape[0])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rank", "index", "sigma"])
            for r, idx, sg in zip(self.ranks, self.index, self.sigma):
                key = ";".join(str(int(v)) for v in np.atleast_1d(idx))
                w.writerow([int(r), key, repr(float(sg))])


_cache_lock = threading.Lock()
_trig_cache = {}


def _sorted_frequencies(wm, N, max_set=MAX_SET_SIZE):
    with _cache_lock:
        hit = _trig_cache.get(wm)
    if hit is not None and hit[0].shape[0] >= N:
        return hit
    R = 1.0
    while True:
        I = frequency_set(wm, R)
        if I.shape[0] >= N:
            break
        if I.shape[0] > max_set:
            raise ResourceError(f"could not reach {N} frequencies (radius {R})", achieved=R)
        R *= 2.0
    w = wm.weights(I)
    primary = wm.base(I) if wm.kind != "custom" else w
    l1 = np.abs(I).sum(axis=1)
    keys = [I[:, j] for j in range(wm.d - 1, -1, -1)] + [l1, primary]
    order = np.lexsort(keys)
    I = I[order]
    sigma = 1.0 / w[order]
    result = (I, sigma)
    with _cache_lock:
        _trig_cache[wm] = result
    return result


def ranked_spectrum(model, N):
    """First ``N`` entries of the non-increasing rearrangement of sigma."""
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    if model.basis == "trig":
        I, sigma = _sorted_frequencies(model.weight, N)
        return RankedSpectrum(np.arange(1, N + 1), I[:N].copy(), sigma[:N].copy())
    if N > MAX_SET_SIZE:
        raise ResourceError(f"rank {N} exceeds the budget {MAX_SET_SIZE}", achieved=MAX_SET_SIZE)
    ranks = np.arange(1, N + 1)
    if model.basis == "legendre":
        deg = ranks - 1.0
        sigma = (1.0 + (deg * (deg + 1.0)) ** model.s) ** -0.5
        return RankedSpectrum(ranks, ranks - 1, sigma)
    return RankedSpectrum(ranks, ranks.copy(), ranks.astype(float) ** -model.p)


def sigmas(model, N):
    """Shortcut for ``ranked_spectrum(model, N).sigma``."""
    return ranked_spectrum(model, N).sigma


def frequencies(model, N):
    if model.basis != "trig":
        raise ValueError("only trigonometric models have frequencies")
    return _sorted_frequencies(model.weight, int(N))[0][:N]


# --------------------------------------------------------------------------
# basis functions


def basis_matrix(model, x, num, start=1):
    """Values ``eta_k(x_i)`` for ranks ``start .. start+num-1``.

    Complex ``(n, num)`` for trigonometric models, real for Legendre.
    """
    x = model.check_points(x)
    if num <= 0:
        dtype = complex if model.basis == "trig" else float
        return np.zeros((x.shape[0], 0), dtype=dtype)
    if model.basis == "trig":
        K = frequencies(model, start + num - 1)[start - 1:]
        return np.exp(1j * (x @ K.T.astype(float)))
    if model.basis == "legendre":
        table = _kernels.legendre_table(x[:, 0], start + num - 2)
        return table[:, start - 1:]
    raise ValueError("power-law models have no basis functions")


def basis_eval(model, rank, x):
    """``eta_rank(x)`` at a single point."""
    if rank < 1:
        raise ValueError("ranks are 1-based")
    return complex(basis_matrix(model, np.atleast_1d(x) if model.d > 1 else x, 1, start=rank)[0, 0])


# --------------------------------------------------------------------------
# sum of all squared singular values (trigonometric and power-law models)


@functools.lru_cache(maxsize=64)
def _plus_line_sum(s, J=1 << 20):
    """``sum_{j in Z} (1+j^2)^-s`` with a rigorous error bound."""
    j = np.arange(1, J, dtype=float)
    head = 1.0 + 2.0 * math.fsum((1.0 + j * j) ** -s)
    # f convex decreasing on [J, inf):  sum_{j>=J} f in [I + f(J)/2, I + f(J)]
    a = s - 0.5
    integral = 0.5 * special.beta(a, 0.5) * special.betainc(a, 0.5, 1.0 / (1.0 + float(J) ** 2))
    fJ = (1.0 + float(J) ** 2) ** -s
    return head + 2.0 * (integral + 0.75 * fJ), 2.0 * 0.25 * fJ


def sigma_sq_total(model):
    """``(sum_k sigma_k^2, error_bound)`` where a closed form is available."""
    if model.basis == "trig":
        wm = model.weight
        if wm.kind == "sharp":
            if wm.s <= 0.5:
                return math.inf, 0.0
            line = 2.0 * float(special.zeta(2.0 * wm.s)) - 1.0
            total = line ** wm.d
            return total, 8 * np.finfo(float).eps * total
        if wm.kind == "plus":
            if wm.s <= 0.5:
                return math.inf, 0.0
            line, err = _plus_line_sum(wm.s)
            total = line ** wm.d
            return total, wm.d * (line + err) ** (wm.d - 1) * err + 8 * np.finfo(float).eps * total
        if wm.inverse_sq_total is None:
            raise ValueError("custom weights need inverse_sq_total for tail quantities")
        return float(wm.inverse_sq_total), 0.0
    if model.basis == "power_law":
        total = float(special.zeta(2.0 * model.p))
        return total, 8 * np.finfo(float).eps * total
    raise ValueError("use christoffel.sigma_sq_tail for the Legendre model")
