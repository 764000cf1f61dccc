"""Closed-form error bounds with every constant explicit.

Each evaluator returns a :class:`BoundReport` echoing the inputs and the
constants it used, so reports can be compared against certificates
without reading code. Spectral tails come from
:mod:`rkhs_lsq.christoffel` and carry its certified truncation slack.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import christoffel
from .christoffel import GridSpec

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
# failure probability constant: success with probability >= 1 - C2_PROB n^(1-r)
C2_PROB = 3.0
DEFAULT_B = 10.0
DEFAULT_C5 = 0.5
DEFAULT_C6 = 20.0


@dataclass
class BoundReport:
    name: str
    value: float
    constants: dict
    inputs: dict
    truncation_slack: float = 0.0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError(f"{self.name}: negative bound {self.value}")

    def to_row(self):
        row = {"name": self.name, "value": float(self.value), "slack": float(self.truncation_slack)}
        row.update({f"in_{k}": v for k, v in self.inputs.items()})
        row.update({f"c_{k}": v for k, v in self.constants.items()})
        return row


def c3_from_c1(c1):
    """``8 (8 phi / sqrt(c1) + 3)^2`` with ``phi`` the golden ratio."""
    return 8.0 * (8.0 * GOLDEN / math.sqrt(c1) + 3.0) ** 2


def default_c1(bounded_ons):
    return 10.0 if bounded_ons else 20.0


def default_c3(bounded_ons):
    """403 for bounded systems (``c1 = 10``), 278 otherwise (``c1 = 20``)."""
    return float(math.ceil(c3_from_c1(default_c1(bounded_ons))))


def _model_inputs(model):
    return {"model": model.to_json()}


def _two_branch(model, m, start, log_factor=1.0):
    """``(N(m) log_factor / m) tail(start)`` and ``sum_{k>=start} N(4k) sigma_k^2 / k``."""
    n_m = float(model.christoffel_exact(m))
    tail = christoffel.sigma_sq_tail(model, start)
    wtail = christoffel.christoffel_weighted_tail(model, start)
    b1 = n_m * log_factor / m * tail.value
    b2 = wtail.value
    slack = n_m * log_factor / m * tail.remainder_bound + wtail.remainder_bound
    return b1, b2, slack, n_m, tail


def wls_bound(model, m, bounded_ons=None, c3=None):
    """Squared worst-case error bound of weighted least squares with ``m-1`` functions:

    ``c3 max{ N(m)/m sum_{k>=m//2} sigma_k^2, sum_{k>=m//2} N(4k) sigma_k^2 / k }``.

    ``c3`` defaults to 403 when the basis is uniformly bounded by one and
    to 278 otherwise. For bounded systems the report also carries the
    coarser ``c3 * 4 * sum_{k>=m//2} sigma_k^2`` under ``simplified``.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    if bounded_ons is None:
        bounded_ons = model.bounded_ons if model.basis != "power_law" else False
    c3 = default_c3(bounded_ons) if c3 is None else float(c3)
    start = m // 2
    b1, b2, slack, n_m, tail = _two_branch(model, m, start)
    consts = {"c3": c3, "c1": default_c1(bounded_ons), "c2": C2_PROB}
    if bounded_ons:
        consts["simplified"] = float(c3 * 4.0 * tail.value)
    return BoundReport(
        "wls_bound",
        c3 * max(b1, b2),
        consts,
        dict(_model_inputs(model), m=int(m), bounded_ons=bool(bounded_ons)),
        c3 * slack,
        {"branch_christoffel": b1, "branch_weighted_tail": b2, "N(m)": n_m, "start": start},
    )


def subsampled_bound(model, variant, m, c3=None, c4=None, c5=DEFAULT_C5, b=DEFAULT_B,
                     bounded_ons=None):
    """Bounds for the two node budgets.

    ``variant="i"``: the least-squares bound at ``m`` (budget ``b m log m``
    nodes). ``variant="ii"``: after subsampling to O(m) nodes,
    ``c4 max{ N(m) log m / m tail(c5 m), sum_{k>=c5 m} N(4k) sigma_k^2 / k }``.
    """
    variant = str(variant).lower()
    if variant == "i":
        rep = wls_bound(model, m, bounded_ons=bounded_ons, c3=c3)
        rep.name = "subsampled_bound_i"
        rep.constants["b"] = float(b)
        rep.inputs["nodes"] = int(math.floor(b * m * math.log(m)))
        return rep
    if variant != "ii":
        raise ValueError("variant must be 'i' or 'ii'")
    if m < 2:
        raise ValueError("m must be >= 2")
    if bounded_ons is None:
        bounded_ons = model.bounded_ons if model.basis != "power_law" else False
    c3 = default_c3(bounded_ons) if c3 is None else float(c3)
    c4 = c3 if c4 is None else float(c4)
    start = max(int(math.floor(c5 * m)), 1)
    b1, b2, slack, n_m, _ = _two_branch(model, m, start, log_factor=math.log(m))
    return BoundReport(
        "subsampled_bound_ii",
        c4 * max(b1, b2),
        {"c4": c4, "c5": float(c5)},
        dict(_model_inputs(model), m=int(m)),
        c4 * slack,
        {"branch_christoffel": b1, "branch_weighted_tail": b2, "N(m)": n_m, "start": start},
    )


def tail_min_bound(model, m, c5=DEFAULT_C5, c6=DEFAULT_C6, C=1.0):
    """``C min{ tail(m / (c6 log m)), log m * tail(c5 m) }`` (squared scale).

    Both branches are reported; ``details["smaller"]`` names the branch
    attaining the minimum.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    s1 = max(int(math.floor(m / (c6 * math.log(m)))), 1)
    s2 = max(int(math.floor(c5 * m)), 1)
    t1 = christoffel.sigma_sq_tail(model, s1)
    t2 = christoffel.sigma_sq_tail(model, s2)
    b1 = t1.value
    b2 = math.log(m) * t2.value
    smaller = "short_tail" if b1 <= b2 else "log_tail"
    return BoundReport(
        "tail_min_bound",
        C * min(b1, b2),
        {"c5": float(c5), "c6": float(c6), "C": float(C)},
        dict(_model_inputs(model), m=int(m)),
        C * max(t1.remainder_bound, math.log(m) * t2.remainder_bound),
        {"short_tail": b1, "log_tail": b2, "smaller": smaller, "starts": [s1, s2]},
    )


def hmix_preasymptotic_bound(s, d, m):
    """``1612 (16/3)^beta beta/(beta-1) (m/2 - 1)^(1-beta)``, ``beta = 2s/(1+log2 d)``."""
    beta = 2.0 * s / (1.0 + math.log2(d))
    if not beta > 1:
        raise ValueError(f"needs beta = 2s/(1+log2 d) > 1, got {beta}")
    if m < 4:
        raise ValueError("m must be >= 4")
    value = 1612.0 * (16.0 / 3.0) ** beta * beta / (beta - 1.0) * (m / 2.0 - 1.0) ** (1.0 - beta)
    return BoundReport(
        "hmix_preasymptotic_bound",
        value,
        {"1612": 1612.0, "beta": beta},
        {"s": float(s), "d": int(d), "m": int(m)},
    )


def plus_constant(d):
    """``C(d) = (1 + (1 + 2/log2(d-1)) / (d-1))^(d-1)`` for ``d >= 3``."""
    if d < 3:
        raise ValueError("C(d) is defined for d >= 3")
    return (1.0 + (1.0 + 2.0 / math.log2(d - 1)) / (d - 1)) ** (d - 1)


def sigma_upper_bound(s, d, n, norm="sharp"):
    """Non-asymptotic bound on the n-th singular value of mixed Sobolev spaces.

    ``sharp``: ``(16/(3n))^(s/(1+log2 d))`` for ``n >= 6``.
    ``plus``:  ``(C(d)/n)^(s/(2(1+log2(d-1))))`` for ``d >= 3``, ``n >= 2``.
    """
    if norm == "sharp":
        if n < 6:
            raise ValueError("the sharp-norm bound needs n >= 6")
        expo = s / (1.0 + math.log2(d))
        return BoundReport("sigma_upper_bound", (16.0 / (3.0 * n)) ** expo,
                           {"exponent": expo}, {"s": float(s), "d": int(d), "n": int(n), "norm": norm})
    if norm == "plus":
        if d < 3:
            raise ValueError("the plus-norm bound needs d >= 3")
        if n < 2:
            raise ValueError("the plus-norm bound needs n >= 2")
        cd = plus_constant(d)
        expo = s / (2.0 * (1.0 + math.log2(d - 1)))
        return BoundReport("sigma_upper_bound", (cd / n) ** expo,
                           {"C(d)": cd, "exponent": expo},
                           {"s": float(s), "d": int(d), "n": int(n), "norm": norm})
    raise ValueError("norm must be 'sharp' or 'plus'")


@dataclass(frozen=True)
class RateExponents:
    q_lin: float
    q_std_lower: float
    equal: bool


def rate_exponents(u, p):
    """Linear rate ``p - 1/2`` and the sampling-rate lower estimate ``p - u/2``.

    For ``sigma_k ~ k^-p`` and Christoffel growth ``N(m) ~ m^u``.
    """
    if not p > 0.5:
        raise ValueError("needs p > 1/2")
    if not 2 * p > u:
        raise ValueError("needs 2p > u")
    return RateExponents(p - 0.5, p - u / 2.0, bool(u == 1))


def hmix_rate(s, d, n, variant="wls"):
    """Asymptotic rate shapes for mixed Sobolev spaces (no constants).

    ``wls``: ``n^(1/2-s) (log n)^(sd-1/2)``; ``subsampled``:
    ``n^(1/2-s) (log n)^(s(d-1)+1/2)``.
    """
    n = np.asarray(n, dtype=float)
    if variant == "wls":
        return n ** (0.5 - s) * np.log(n) ** (s * d - 0.5)
    if variant == "subsampled":
        return n ** (0.5 - s) * np.log(n) ** (s * (d - 1) + 0.5)
    raise ValueError("variant must be 'wls' or 'subsampled'")


def subspace_christoffel(basis, grid, mass=1.0):
    """Grid maximum of ``sum_k |phi_k(x)|^2`` for a user-supplied system.

    ``basis`` maps an ``(n, d)`` point array to the ``(n, dim)`` matrix of
    basis values, orthonormal in ``L2(rho)`` with ``rho(D) = mass``. The
    true supremum is at least ``dim / mass``; a smaller grid value is
    reported with a warning (the grid missed the maximum).
    """
    pts = grid.points() if isinstance(grid, GridSpec) else np.asarray(grid, dtype=float)
    vals = np.asarray(basis(pts))
    if vals.ndim == 1:
        vals = vals[:, None]
    out = float(np.max(np.sum(np.abs(vals) ** 2, axis=1)))
    lower = vals.shape[1] / mass
    if out < lower * (1 - 1e-9):
        warnings.warn(f"grid value {out:.6g} below the lower bound {lower:.6g}", RuntimeWarning,
                      stacklevel=2)
    return out


def failure_probability(n, r):
    """``3 n^(1-r)``."""
    return C2_PROB * float(n) ** (1.0 - r)
