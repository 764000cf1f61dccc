"""Worst-case pointwise error (power function) of linear sampling operators.

For an operator ``A f(x) = sum_i w_i(x) f(x^i)`` the worst case over the
unit ball of the RKHS at a point ``x`` is the dual norm of
``delta_x - sum_i w_i(x) delta_{x^i}``:

    e(x)^2 = sum_k sigma_k^2 |eta_k(x) - sum_i w_i(x) eta_k(x^i)|^2 .

The series is truncated at a rank ``K`` whose discarded kernel mass
``sum_{k>K} sigma_k^2 sup|eta_k|^2`` is below ``eps``. What the cut drops
from ``e(x)^2`` is at most ``2 eps (1 + n ||w(x)||_2^2)`` and is reported
as slack; every value below is therefore a lower estimate of the exact
quantity, and the grid maximum a lower estimate of the true supremum.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .christoffel import GridSpec, _legendre_series_bound, _series, tail_values
from .errors import ResourceError
from .spectral import SpectralModel, basis_matrix, sigma_sq_total, sigmas

KERNEL_RANK_BUDGET = 1 << 16
NEGATIVE_TOL = 1e-10
_CHUNK_ENTRIES = 1 << 22


def truncation_rank(model, eps):
    """Smallest ``K`` with ``sum_{k>K} sigma_k^2 sup|eta_k|^2 <= eps``.

    Returns ``(K, certified bound on the discarded mass)``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if model.basis == "trig":
        total, err = sigma_sq_total(model)
        if eps <= 2 * err:
            raise ResourceError(f"eps={eps:g} below the accuracy of the spectrum total", achieved=err)
        N = 64
        while True:
            head = np.cumsum(sigmas(model, N) ** 2)
            tails = total + err - head
            hit = np.flatnonzero(tails <= eps)
            if hit.size:
                K = int(hit[0]) + 1
                return K, float(max(tails[K - 1], 0.0))
            if N >= KERNEL_RANK_BUDGET:
                raise ResourceError(
                    f"kernel truncation needs more than {KERNEL_RANK_BUDGET} ranks",
                    achieved=float(tails[-1]),
                )
            N *= 2
    if model.basis == "legendre":
        if not model.s > 1:
            raise ValueError("Legendre kernel values need s > 1")
        lo, hi = 1, 2
        while _legendre_series_bound(hi, model.s, "endpoint") > eps:
            hi *= 2
            if hi > KERNEL_RANK_BUDGET:
                raise ResourceError(
                    f"kernel truncation needs more than {KERNEL_RANK_BUDGET} ranks",
                    achieved=_legendre_series_bound(KERNEL_RANK_BUDGET, model.s, "endpoint"),
                )
        while lo < hi:
            mid = (lo + hi) // 2
            if _legendre_series_bound(mid, model.s, "endpoint") <= eps:
                hi = mid
            else:
                lo = mid + 1
        return lo, float(_legendre_series_bound(lo, model.s, "endpoint"))
    raise ValueError("power-law models have no kernel")


# --------------------------------------------------------------------------
# kernel


@dataclass(frozen=True)
class KernelValues:
    """Truncated kernel matrix ``K(x_a, y_b)`` with entrywise remainder bound."""

    values: np.ndarray
    truncation_rank: int
    remainder_bound: float


def _features(model, x, K):
    """``sigma_k eta_k(x)`` for ranks ``1..K``."""
    return basis_matrix(model, x, K) * sigmas(model, K)[None, :]


def kernel_eval(model, x, y, eps=1e-10):
    """``K(x, y) = sum_k sigma_k^2 eta_k(x) conj(eta_k(y))``, truncated.

    ``x`` and ``y`` may be single points or arrays of points; the result
    matrix has shape ``(len(x), len(y))``.
    """
    K, tb = truncation_rank(model, eps)
    Fx = _features(model, x, K)
    Fy = _features(model, y, K)
    return KernelValues(Fx @ Fy.conj().T, K, tb)


# --------------------------------------------------------------------------
# power function


def pointwise_wce(op, model, x, eps=1e-10, return_details=False):
    """``e(x)`` from the kernel quadratic form.

    ``K(x,x) - 2 Re sum_i conj(w_i) K(x, x^i) + sum_ij conj(w_i) w_j K(x^i, x^j)``
    with node weights from ``op``. Forms the node Gram matrix, so use it
    for small node sets; :func:`certify_sup` scales to large ones.
    """
    pts = model.check_points(x)
    nodes = op.nodes.nodes
    kxx = np.real(np.diag(kernel_eval(model, pts, pts, eps).values)) if pts.shape[0] <= 2048 else None
    if kxx is None:
        Kt, _ = truncation_rank(model, eps)
        kxx = np.sum(np.abs(_features(model, pts, Kt)) ** 2, axis=1)
    kxn = kernel_eval(model, pts, nodes, eps)
    knn = kernel_eval(model, nodes, nodes, eps).values
    W = op.node_weights(model, pts)
    cross = np.real(np.sum(W.conj() * kxn.values, axis=1))
    quad = np.real(np.einsum("ai,ij,aj->a", W.conj(), knn, W))
    raw = kxx - 2.0 * cross + quad
    if np.any(raw < -NEGATIVE_TOL):
        raise ArithmeticError(f"power function squared is {raw.min():.3g} < -{NEGATIVE_TOL:g}")
    e = np.sqrt(np.clip(raw, 0.0, None))
    slack = kxn.remainder_bound * (1.0 + np.sum(np.abs(W), axis=1)) ** 2
    single = np.ndim(x) == 0 or (np.ndim(x) == 1 and model.d > 1)
    out = float(e[0]) if single else e
    if return_details:
        return out, {"raw": raw, "slack_sq": slack, "truncation_rank": kxn.truncation_rank}
    return out


@dataclass
class ErrorCertificate:
    """Grid maximum of the power function of one operator.

    ``truncation_slack`` bounds what the kernel cut removed from
    ``sup_value**2``; ``upper`` is the certified value for that grid.
    """

    grid: GridSpec
    sup_value: float
    argmax: np.ndarray
    truncation_slack: float
    truncation_rank: int
    eps: float
    clipped: int = 0
    min_raw: float = 0.0
    points: Optional[np.ndarray] = field(default=None, repr=False)
    values: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def upper(self):
        return math.sqrt(self.sup_value ** 2 + self.truncation_slack)

    def summary(self):
        return {
            "sup_value": float(self.sup_value),
            "sup_value_sq": float(self.sup_value ** 2),
            "upper": float(self.upper),
            "argmax": [float(v) for v in np.atleast_1d(self.argmax)],
            "truncation_slack": float(self.truncation_slack),
            "truncation_rank": int(self.truncation_rank),
            "eps": float(self.eps),
            "clipped": int(self.clipped),
            "min_raw": float(self.min_raw),
            "grid": self.grid.to_dict(),
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)

    def to_csv(self, path):
        if self.values is None:
            raise ValueError("certificate was computed without keep_values=True")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            d = self.points.shape[1]
            w.writerow([f"x_{j + 1}" for j in range(d)] + ["e"])
            for p, v in zip(self.points, self.values):
                w.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def default_certify_grid(model):
    """Certification grid: 2^12 points in 1-d, 2^7 per axis in 2-d, 2^4 beyond."""
    per_dim = {1: 1 << 12, 2: 1 << 7}.get(model.d, 1 << 4)
    return GridSpec.default(model, per_dim)


def _node_transfer(op, model, K):
    """``M = G diag(1/sqrt rho) Phi`` with ``Phi[i, k] = eta_k(x^i)``, shape ``(m-1, K)``."""
    nodes = op.nodes.nodes
    n = nodes.shape[0]
    step = max(1, _CHUNK_ENTRIES // max(K, 1))
    M = None
    for a in range(0, n, step):
        b = min(n, a + step)
        Phi = basis_matrix(model, nodes[a:b], K)
        part = (op.pinv[:, a:b] * op.row_scale[None, a:b]) @ Phi
        M = part if M is None else M + part
    return M


def certify_sup(op, model, grid=None, eps=1e-8, keep_values=False):
    """Grid maximum of ``e(x)`` for a fitted :class:`RecoveryOperator`."""
    grid = grid if grid is not None else default_certify_grid(model)
    K, tb = truncation_rank(model, eps)
    h = op.m - 1
    if K < h:
        K = h
    sig2 = sigmas(model, K) ** 2
    M = _node_transfer(op, model, K)
    gram = (op.pinv * op.row_scale[None, :] ** 2) @ op.pinv.conj().T
    n = op.n

    pts = grid.points()
    e2 = np.empty(pts.shape[0])
    slack = np.empty(pts.shape[0])
    step = max(1, _CHUNK_ENTRIES // K)
    for a in range(0, pts.shape[0], step):
        b = min(pts.shape[0], a + step)
        Phi = basis_matrix(model, pts[a:b], K)
        head = Phi[:, :h]
        R = Phi - head @ M
        e2[a:b] = np.abs(R) ** 2 @ sig2
        wn = np.real(np.einsum("ij,jk,ik->i", head, gram, head.conj()))
        slack[a:b] = 2.0 * tb * (1.0 + n * wn)
    min_raw = float(e2.min())
    if min_raw < -NEGATIVE_TOL:
        raise ArithmeticError(f"power function squared is {min_raw:.3g}")
    clipped = int(np.sum(e2 < 0))
    e = np.sqrt(np.clip(e2, 0.0, None))
    i = int(np.argmax(e))
    return ErrorCertificate(
        grid=grid,
        sup_value=float(e[i]),
        argmax=pts[i].copy(),
        truncation_slack=float(slack.max()),
        truncation_rank=int(K),
        eps=float(eps),
        clipped=clipped,
        min_raw=min_raw,
        points=pts if keep_values else None,
        values=e if keep_values else None,
    )


def decomposition_bound(op, model, grid=None, eps=1e-8):
    """Upper bound on ``sup_x e(x)`` from the projection split.

    ``|f - Af| <= |f - Pf| + |P f - A f|`` with ``P`` the projection onto
    ``eta_1 .. eta_{m-1}``; the second term at ``x`` is at most
    ``sqrt(N(m, x)) ||pinv|| ||(f - Pf)(x^i)/sqrt(rho_i)||``. Over the
    unit ball the last factor is the top singular value of the scaled
    tail feature matrix. Returns ``(bound, parts)``.
    """
    grid = grid if grid is not None else default_certify_grid(model)
    K, tb = truncation_rank(model, eps)
    h = op.m - 1
    K = max(K, h + 1)
    nodes = op.nodes.nodes
    tail_feat = basis_matrix(model, nodes, K - h, start=h + 1) * sigmas(model, K)[None, h:]
    tail_feat = tail_feat * op.row_scale[:, None]
    top = float(np.linalg.norm(tail_feat, 2) ** 2)
    # discarded ranks add at most tb * sum_i 1/rho_i to the squared norm
    top += tb * float(np.sum(op.row_scale ** 2))
    pts = grid.points()
    chris = np.sum(np.abs(basis_matrix(model, pts, h)) ** 2, axis=1)
    tail, rem, _ = tail_values(model, op.m, pts, eps=1e-10)
    pnorm = float(1.0 / op.singular_values.min())
    bound = np.sqrt(tail + rem) + np.sqrt(chris) * pnorm * math.sqrt(top)
    parts = {"projection_sup": float(np.sqrt((tail + rem).max())), "pinv_norm": pnorm,
             "node_tail_norm": math.sqrt(top), "christoffel_sup": float(chris.max())}
    return float(bound.max()), parts


def legendre_kernel_diagonal_at_one(s, eps=1e-12):
    """``K_s(1, 1) = sum_j (2j+1)/2 / (1 + (j(j+1))^s)`` as a certified series."""
    return _series(SpectralModel.legendre(s), 1, "endpoint", eps)


def unit_ball_search(op, model, x, draws=10_000, num_freq=40, seed=0, batch=50):
    """Largest ``|f(x) - A f(x)|`` found over random unit-norm ``f``.

    Candidates are ``f = sum_k a_k sigma_k eta_k`` on the first
    ``num_freq`` ranks with ``||a||_2 = 1`` (unit RKHS norm). The search
    is an adaptive random search: each round perturbs the best candidate
    so far with ``batch`` Gaussian steps, renormalizes, and grows or
    shrinks the step on success or failure. Only sampled errors are
    used, so the result is a lower bound on ``e(x)`` at each point.
    """
    pts = model.check_points(x)
    rng = np.random.default_rng(seed)
    sig = sigmas(model, num_freq)
    fx = basis_matrix(model, pts, num_freq) * sig  # f(x) = fx @ a
    fn = basis_matrix(model, op.nodes.nodes, num_freq) * sig
    head = basis_matrix(model, pts, op.m - 1)

    def errors(p, a):
        # |f(x_p) - A f(x_p)| for each column of a, through a real refit
        coef = op.apply(fn @ a)
        return np.abs(fx[p] @ a - head[p] @ coef)

    def unit(a):
        return a / np.linalg.norm(a, axis=0, keepdims=True)

    def normal(shape):
        z = rng.standard_normal(shape)
        return z + 1j * rng.standard_normal(shape) if np.iscomplexobj(fx) else z

    best = np.zeros(pts.shape[0])
    rounds = max(1, draws // batch)
    for p in range(pts.shape[0]):
        a = unit(normal((num_freq, batch)) * sig[:, None])
        err = errors(p, a)
        j = int(np.argmax(err))
        cur, cur_err = a[:, j], float(err[j])
        step = 0.5
        for _ in range(rounds - 1):
            cand = unit(cur[:, None] + step * normal((num_freq, batch)) / math.sqrt(num_freq))
            err = errors(p, cand)
            j = int(np.argmax(err))
            if err[j] > cur_err:
                cur, cur_err = cand[:, j], float(err[j])
                step = min(step * 1.5, 2.0)
            else:
                step *= 0.7
        best[p] = cur_err
    return best
