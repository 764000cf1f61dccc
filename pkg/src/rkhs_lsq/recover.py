"""Weighted least-squares recovery on the first ``m - 1`` eigenfunctions.

Given nodes ``x^i`` drawn from a density ``rho``, the sampling matrix has
rows ``eta_k(x^i) / sqrt(rho(x^i))``. Fitting solves the rescaled
least-squares problem with a column-pivoted QR factorization; the
resulting operator is linear in the samples, with node weights

    w_i(x) = sum_k G[k, i] eta_k(x) / sqrt(rho(x^i)),   G = pinv(L).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import RankDeficientError
from .sampler import DensityVariant, NodeSet
from .spectral import SpectralModel, basis_matrix

RANK_RTOL = 1e-10


@dataclass
class SamplingMatrix:
    """``(n, m-1)`` matrix of (optionally reweighted) basis values."""

    entries: np.ndarray
    weighted: bool
    nodes: NodeSet
    m: int
    row_scale: np.ndarray = field(repr=False, default=None)

    @property
    def shape(self):
        return self.entries.shape


@dataclass
class RecoveryOperator:
    """A fitted least-squares operator.

    ``pinv`` is ``G = (L* L)^-1 L*`` of shape ``(m-1, n)`` and
    ``row_scale`` the per-node factor ``1/sqrt(rho)`` (ones when
    unweighted). ``coefficients`` belong to the samples last passed to
    :func:`fit`; :meth:`apply` refits other sample vectors cheaply.
    """

    coefficients: np.ndarray
    pinv: np.ndarray = field(repr=False)
    row_scale: np.ndarray = field(repr=False)
    nodes: NodeSet = field(repr=False)
    m: int
    weighted: bool
    rank: int
    rank_ok: bool
    singular_values: np.ndarray = field(repr=False)
    model: Optional[SpectralModel] = None

    @property
    def n(self):
        return int(self.pinv.shape[1])

    def apply(self, samples):
        """Coefficients for another sample vector (or ``(n, r)`` block)."""
        samples = np.asarray(samples)
        scale = self.row_scale if samples.ndim == 1 else self.row_scale[:, None]
        return self.pinv @ (samples * scale)

    def node_weights(self, model, x):
        """``w_i(x)`` as an array ``(len(x), n)``."""
        head = basis_matrix(model, x, self.m - 1)
        return (head @ self.pinv) * self.row_scale[None, :]

    def weight_norm_sq(self, model, x):
        """``sum_i |w_i(x)|^2`` without forming the weights."""
        head = basis_matrix(model, x, self.m - 1)
        gram = (self.pinv * self.row_scale[None, :] ** 2) @ self.pinv.conj().T
        return np.real(np.einsum("ij,jk,ik->i", head, gram, head.conj()))

    def to_dict(self, node_file=None):
        return {
            "m": int(self.m),
            "n": self.n,
            "weighted": bool(self.weighted),
            "rank": int(self.rank),
            "rank_ok": bool(self.rank_ok),
            "coefficients": [[float(c.real), float(c.imag)] for c in np.atleast_1d(self.coefficients)],
            "node_file": node_file,
            "nodes": self.nodes.header(),
            "model": self.model.to_dict() if self.model is not None else None,
            "spectral_norm": float(1.0 / self.singular_values.min()) if self.rank_ok else None,
        }

    def to_json(self, path, node_file=None):
        with open(path, "w") as fh:
            json.dump(self.to_dict(node_file), fh, indent=2, sort_keys=True)


def load_coefficients(path):
    """Complex coefficient vector from a saved operator JSON."""
    with open(path) as fh:
        doc = json.load(fh)
    pairs = np.asarray(doc["coefficients"], dtype=float).reshape(-1, 2)
    return pairs[:, 0] + 1j * pairs[:, 1]


def assemble(model, nodes, m, weighted=True):
    """Sampling matrix for ``eta_1 .. eta_{m-1}`` at the nodes."""
    n = len(nodes)
    if m < 2:
        raise ValueError("m must be >= 2")
    if m - 1 > n:
        raise ValueError(f"under-determined: m - 1 = {m - 1} columns but only {n} nodes")
    if weighted and nodes.variant is not DensityVariant.NONE and nodes.m != m:
        raise ValueError(f"nodes were drawn for m={nodes.m}, not m={m}")
    L = basis_matrix(model, nodes.nodes, m - 1)
    if weighted:
        scale = 1.0 / np.sqrt(nodes.density_values)
    else:
        scale = np.ones(n)
    return SamplingMatrix(L * scale[:, None], bool(weighted), nodes, int(m), scale)


def _factor(A):
    """``(pinv, rank, singular values)`` via column-pivoted QR."""
    Q, R, perm = linalg.qr(A, mode="economic", pivoting=True)
    sv = linalg.svdvals(R)
    rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
    return Q, R, perm, rank, sv


def fit(matrix, samples, model=None, strict=True):
    """Least-squares fit of ``samples`` (the raw values ``f(x^i)``).

    The reweighting ``f(x^i)/sqrt(rho(x^i))`` happens here. With
    ``strict`` a rank-deficient matrix raises :class:`RankDeficientError`;
    otherwise a minimum-norm solution is returned with ``rank_ok=False``.
    """
    A = matrix.entries
    samples = np.asarray(samples)
    if samples.shape[0] != A.shape[0]:
        raise ValueError(f"{samples.shape[0]} samples for {A.shape[0]} nodes")
    Q, R, perm, rank, sv = _factor(A)
    cols = A.shape[1]
    if rank < cols:
        if strict:
            raise RankDeficientError(f"numerical rank {rank} < {cols}", rank)
        pinv = linalg.pinv(A, rtol=RANK_RTOL)
    else:
        # A P = Q R  ->  pinv(A) = P R^-1 Q*
        rinv_qh = linalg.solve_triangular(R, Q.conj().T)
        pinv = np.empty_like(rinv_qh)
        pinv[perm] = rinv_qh
    g = samples * (matrix.row_scale if samples.ndim == 1 else matrix.row_scale[:, None])
    coef = pinv @ g
    return RecoveryOperator(
        coefficients=coef,
        pinv=pinv,
        row_scale=matrix.row_scale,
        nodes=matrix.nodes,
        m=matrix.m,
        weighted=matrix.weighted,
        rank=rank,
        rank_ok=rank == cols,
        singular_values=sv,
        model=model,
    )


def evaluate(op, model, x, coefficients=None):
    """``sum_k c_k eta_k(x)``; returns a complex scalar or array."""
    c = op.coefficients if coefficients is None else np.asarray(coefficients)
    vals = basis_matrix(model, x, op.m - 1) @ c
    single = np.ndim(x) == 0 or (np.ndim(x) == 1 and model.d > 1)
    return complex(vals[0]) if single else vals


def spectral_norm_check(matrix):
    """``(||pinv(L)||_2, passed)`` with the threshold ``sqrt(2/n)``."""
    A = matrix.entries if isinstance(matrix, SamplingMatrix) else np.asarray(matrix)
    n, cols = A.shape
    sv = linalg.svdvals(A)
    if sv.size < cols or sv[0] == 0 or np.sum(sv > RANK_RTOL * sv[0]) < cols:
        return float("inf"), False
    norm = float(1.0 / sv[-1])
    return norm, bool(norm <= np.sqrt(2.0 / n))
