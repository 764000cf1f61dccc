"""Frame subsampling: keep O(m) of n rows with two-sided frame bounds.

Input rows ``u_1 .. u_n`` in C^m with ``||u_i||^2 <= k1 m / n`` and
``k2 <= sum_i u_i u_i^* <= k3``. The selector returns ``J`` with
``|J| <= C1 m`` and ``C2 m/n <= sum_{i in J} u_i u_i^* <= C3 m/n``, where
the constants follow one of two regimes depending on ``n/m``.

Selection is a deterministic two-barrier greedy (Batson-Spielman-
Srivastava style) run on whitened rows ``v_i = S^-1/2 u_i`` with
``S = sum_i u_i u_i^*``. Each step adds one unused row with unit weight
while a lower barrier ``l`` and an upper barrier ``u`` advance; the
barrier potentials ``tr (A - l)^-1`` and ``tr (u - A)^-1`` never increase.
With ``r`` rows the schedule ends at ``l = (sqrt r - sqrt m)^2 / n`` and
``u = (sqrt r + sqrt m)^2 / n``. Whenever no row admits the full lower
step the step is halved until one does. From the ``m``-th row on the
frame bounds of the selection are checked after every step; selection
stops at the first prefix that meets them (often before ``r`` rows) or
when the budget ``C1 m`` is exhausted.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from .errors import GuaranteeError

MAX_BISECT = 40
# relative slack on the frame-bound check (eigenvalue round-off)
CHECK_RTOL = 1e-12


@dataclass(frozen=True)
class FrameBounds:
    lower: float
    upper: float

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper * (1 + CHECK_RTOL) + 1e-300):
            raise ValueError(f"invalid frame bounds ({self.lower}, {self.upper})")


@dataclass
class SubsampleResult:
    J: np.ndarray
    achieved: FrameBounds
    budget: int
    constants: dict
    stats: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "J": [int(j) for j in self.J],
            "achieved": asdict(self.achieved),
            "budget": int(self.budget),
            "constants": {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                          for k, v in self.constants.items()},
            "stats": self.stats,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def _gram(rows):
    rows = np.asarray(rows)
    return rows.T @ rows.conj()


def frame_bounds(rows):
    """Extreme eigenvalues of ``sum_i u_i u_i^*``."""
    rows = np.asarray(rows)
    if rows.size == 0:
        return FrameBounds(0.0, 0.0)
    rows = np.atleast_2d(rows)
    ev = linalg.eigvalsh(_gram(rows))
    return FrameBounds(max(float(ev[0]), 0.0), max(float(ev[-1]), 0.0))


def rows_from_matrix(matrix):
    """Rows ``u_i = L[i] / sqrt(n)`` of a sampling matrix."""
    A = matrix.entries if hasattr(matrix, "entries") else np.asarray(matrix)
    return A / math.sqrt(A.shape[0])


def guarantee_constants(n, m, k1, k2, k3):
    """``(C1, C2, C3, regime)`` for ``n`` rows in dimension ``m``."""
    if n / m >= 47.0 * k1 / k2:
        return 1642.0 * k1 / k2, (2.0 + math.sqrt(2.0)) ** 2 * k1, 1642.0 * k1 * k3 / k2, "large"
    return 47.0 * k1 / k2, k2, 47.0 * k1 * k3 / k2, "small"


def _check_inputs(rows, m, k1, k2, k3):
    n, dim = rows.shape
    if dim != m:
        raise ValueError(f"rows have dimension {dim}, expected m={m}")
    norms = np.sum(np.abs(rows) ** 2, axis=1)
    if k1 is None:
        k1 = float(norms.max()) * n / m
    else:
        bad = np.flatnonzero(norms > k1 * m / n * (1 + CHECK_RTOL))
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"row {i} has squared norm {norms[i]:.6g} > k1 m/n = {k1 * m / n:.6g}")
    fb = frame_bounds(rows)
    if k2 is None:
        k2 = fb.lower
    elif fb.lower < k2 * (1 - CHECK_RTOL):
        raise ValueError(f"lower frame bound {fb.lower:.6g} is below k2={k2}")
    if k3 is None:
        k3 = fb.upper
    elif fb.upper > k3 * (1 + CHECK_RTOL):
        raise ValueError(f"upper frame bound {fb.upper:.6g} exceeds k3={k3}")
    if not k2 > 0:
        raise ValueError("the rows do not span C^m (k2 = 0)")
    return float(k1), float(k2), float(k3)


def weaver_subsample(rows, m=None, k1=None, k2=None, k3=None):
    """Select rows with ``|J| <= C1 m`` and frame bounds ``[C2, C3] m/n``.

    ``k1``, ``k2``, ``k3`` default to the tightest values for the input.
    Raises :class:`GuaranteeError` when the selection misses the
    guarantee (never observed, but checked on every call).
    """
    rows = np.atleast_2d(np.asarray(rows))
    n, dim = rows.shape
    m = dim if m is None else int(m)
    k1, k2, k3 = _check_inputs(rows, m, k1, k2, k3)
    C1, C2, C3, regime = guarantee_constants(n, m, k1, k2, k3)
    cap = min(n, int(math.floor(C1 * m)))
    target = math.ceil(m * (1.0 + math.sqrt(C2 / k2)) ** 2)
    r = min(target, cap)

    # whiten so that sum_i v_i v_i^* = I
    ev, E = linalg.eigh(_gram(rows))
    W = (E / np.sqrt(ev)) @ E.conj().T
    V = rows @ W.T  # v_i = W u_i with W Hermitian

    a = math.sqrt(r / m)
    if r > m:
        eps_l = n / (a - 1.0) if a > 1 else math.inf
        eps_u = n / (a + 1.0)
    else:
        eps_l, eps_u = math.inf, n / 2.0
    delta_u = 1.0 / (n - eps_u)
    lo = -m / eps_l if math.isfinite(eps_l) else 0.0
    delta_l_full = 1.0 / (n + eps_l) if math.isfinite(eps_l) else 0.0
    up = m / eps_u

    A = np.zeros((m, m), dtype=rows.dtype)
    G = np.zeros((m, m), dtype=rows.dtype)  # sum of selected u_i u_i^*
    chosen = np.zeros(n, dtype=bool)
    order = []
    bisections = 0
    achieved = FrameBounds(0.0, 0.0)
    while True:
        lam, E = linalg.eigh(A)
        free = np.flatnonzero(~chosen)
        P = np.abs(V[free] @ E.conj()) ** 2  # |<e_j, v_i>|^2

        phi_u = np.sum(1.0 / (up - lam))
        du = delta_u
        while True:
            up2 = up + du
            gap_u = phi_u - np.sum(1.0 / (up2 - lam))
            U = (P @ (1.0 / (up2 - lam) ** 2)) / gap_u + P @ (1.0 / (up2 - lam))
            if np.any(U <= 1.0):
                break
            du *= 2.0
        phi_l = np.sum(1.0 / (lam - lo))
        dl = delta_l_full
        for _ in range(MAX_BISECT):
            lo2 = lo + dl
            if dl > 0:
                gap_l = np.sum(1.0 / (lam - lo2)) - phi_l
                L = (P @ (1.0 / (lam - lo2) ** 2)) / gap_l - P @ (1.0 / (lam - lo2))
            else:
                L = np.full(free.size, np.inf)
            ok = (U <= 1.0) & (L >= 1.0)
            if ok.any():
                break
            dl *= 0.5
            bisections += 1
        else:
            dl, lo2 = 0.0, lo
            L = np.full(free.size, np.inf)
            ok = U <= 1.0
        score = np.where(ok, np.minimum(L, 1e300) - U, -np.inf)
        pick = int(free[int(np.argmax(score))])
        v = V[pick]
        A_new = A + np.outer(v, v.conj())

        lam_new = linalg.eigvalsh(A_new)
        new_phi_u = np.sum(1.0 / (up2 - lam_new))
        if not (lam_new[-1] < up2 and new_phi_u <= phi_u * (1 + 1e-9)):
            raise GuaranteeError("upper barrier potential increased")
        if dl > 0:
            new_phi_l = np.sum(1.0 / (lam_new - lo2))
            if not (lam_new[0] > lo2 and new_phi_l <= phi_l * (1 + 1e-9)):
                raise GuaranteeError("lower barrier potential increased")

        A, lo, up = A_new, lo2, up2
        chosen[pick] = True
        order.append(pick)
        G += np.outer(rows[pick], rows[pick].conj())
        if len(order) >= m:
            ev = linalg.eigvalsh(G)
            achieved = FrameBounds(max(float(ev[0]), 0.0), max(float(ev[-1]), 0.0))
            if (achieved.lower >= C2 * m / n * (1 - CHECK_RTOL)
                    and achieved.upper <= C3 * m / n * (1 + CHECK_RTOL)):
                break
        if len(order) >= cap or chosen.all():
            achieved = frame_bounds(rows[chosen])
            break

    J = np.sort(np.asarray(order, dtype=np.int64))
    scaled = FrameBounds(achieved.lower * n / m, achieved.upper * n / m)
    constants = {"k1": k1, "k2": k2, "k3": k3, "C1": C1, "C2": C2, "C3": C3, "regime": regime}
    stats = {"planned": int(r), "selected": int(J.size), "bisections": int(bisections),
             "barrier_lower": float(lo), "barrier_upper": float(up)}
    res = SubsampleResult(J, scaled, int(J.size), constants, stats)
    if not (J.size <= C1 * m and C2 <= scaled.lower * (1 + CHECK_RTOL)
            and scaled.upper <= C3 * (1 + CHECK_RTOL)):
        raise GuaranteeError(
            f"subsample misses the guarantee: |J|={J.size} (cap {C1 * m:.1f}), "
            f"bounds [{scaled.lower:.4g}, {scaled.upper:.4g}] vs [{C2:.4g}, {C3:.4g}]"
        )
    return res
