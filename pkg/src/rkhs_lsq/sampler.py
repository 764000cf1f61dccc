"""Sampling densities and i.i.d. node sets.

All densities are taken with respect to the model's base measure: the
normalized Lebesgue measure on the torus, plain ``dx`` on ``[-1, 1]``.
Nodes are drawn by rejection against a proposal that is cheap to sample
(uniform on the torus; on ``[-1, 1]`` a mixture that is mostly the
arcsine law, which tracks the endpoint growth of Legendre Christoffel
sums, with a little uniform mass for robustness).
"""

from __future__ import annotations

import csv
import enum
import functools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import christoffel
from .christoffel import GridSpec
from .errors import EnvelopeViolation

# relative accuracy requested from the tail term of the tailored density
DENSITY_RTOL = 5e-7
# a point whose certified remainder is above this fraction of the density is flagged
DENSITY_FLAG = 1e-6
DENSITY_DEGREE_BUDGET = 1 << 16
ENVELOPE_MARGIN = 1.05
# weight of the arcsine component in the proposal on [-1, 1]
ARCSINE_WEIGHT = 0.9
MAX_ENVELOPE_RESTARTS = 4


class DensityVariant(str, enum.Enum):
    """``TAILORED``: half normalized Christoffel sum plus half normalized
    spectral tail. ``SIMPLE``: half normalized Christoffel sum plus half
    the (probability-normalized) base measure. ``NONE``: the base measure."""

    TAILORED = "tailored"
    SIMPLE = "simple"
    NONE = "none"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def make_rng(seed, substream=0):
    """Counter-based generator for substream ``seed XOR substream``."""
    key = (int(seed) ^ int(substream)) & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(key=key))


# --------------------------------------------------------------------------
# densities


def _density_parts(model, m, variant, pts, rtol=DENSITY_RTOL):
    """Density values and the certified absolute error of each value."""
    n = pts.shape[0]
    if variant is DensityVariant.NONE or model.basis == "trig":
        # |eta_k| = 1 and T_m(x) = sum_{k>=m} sigma_k^2 pointwise: every
        # variant is the constant 1 on the torus
        return np.ones(n), np.zeros(n)
    if m < 2:
        raise ValueError("m must be >= 2 for the tailored and simple densities")
    chris = christoffel.christoffel_eval(model, m, pts)
    chris = np.atleast_1d(chris)
    head = chris / (2.0 * (m - 1))
    if variant is DensityVariant.SIMPLE:
        return head + 0.5 / model.measure_mass, np.zeros(n)
    lam = christoffel.sigma_sq_tail(model, m)
    # head >= |eta_1|^2 / (2(m-1)) > 0, so rtol * head bounds the target error
    tol = rtol * head * 2.0 * lam.value
    vals, rem, _ = christoffel.tail_values(
        model, m, pts, eps=tol, deg_max=DENSITY_DEGREE_BUDGET, strict=False
    )
    # the normalizer is itself a certified truncation
    dens = head + 0.5 * vals / lam.value
    err = 0.5 * rem / lam.value + 0.5 * (vals + rem) * lam.remainder_bound / lam.value ** 2
    return dens, err


def density_eval(model, m, variant, x):
    """Sampling density at ``x`` relative to the base measure.

    Returns a float for a single point and an array otherwise.
    """
    variant = DensityVariant.parse(variant)
    if variant is not DensityVariant.NONE and m < 2:
        raise ValueError("m must be >= 2 for the tailored and simple densities")
    pts = model.check_points(x)
    dens, _ = _density_parts(model, m, variant, pts)
    single = np.ndim(x) == 0 or (np.ndim(x) == 1 and model.d > 1)
    return float(dens[0]) if single else dens


@functools.lru_cache(maxsize=8)
def _gauss_rule(q):
    return special.roots_legendre(q)


def density_mass(model, m, variant, quadrature=None):
    """Integral of the density against the base measure.

    ``quadrature`` is the number of Gauss-Legendre nodes on ``[-1, 1]``
    (default 10^4) or the per-dimension trapezoid count on the torus
    (default 64).
    """
    variant = DensityVariant.parse(variant)
    if model.basis == "trig":
        q = int(quadrature or 64)
        pts = GridSpec(tuple([q] * model.d)).points()
        return float(np.mean(density_eval(model, m, variant, pts)))
    q = int(quadrature or 10_000)
    xg, wg = _gauss_rule(q)
    return float(math.fsum(wg * density_eval(model, m, variant, xg)))


# --------------------------------------------------------------------------
# proposals


def _proposal_draw(model, rng, size):
    if model.basis == "trig":
        return rng.uniform(0.0, 2.0 * math.pi, size=(size, model.d))
    u = rng.uniform(size=size)
    arcsine = rng.uniform(size=size) < ARCSINE_WEIGHT
    x = np.where(arcsine, np.cos(math.pi * u), 2.0 * u - 1.0)
    return x[:, None]


def _proposal_density(model, pts):
    """Proposal density relative to the base measure (inf at x = +-1)."""
    if model.basis == "trig":
        return np.ones(pts.shape[0])
    x = pts[:, 0]
    with np.errstate(divide="ignore"):
        arcsine = 1.0 / (math.pi * np.sqrt(np.clip(1.0 - x * x, 0.0, None)))
    return 0.5 * (1.0 - ARCSINE_WEIGHT) + ARCSINE_WEIGHT * arcsine


def _ratio(dens, prop):
    with np.errstate(invalid="ignore"):
        r = dens / prop
    return np.where(np.isfinite(prop), r, 0.0)


def _envelope_grid(model, per_dim=None):
    if per_dim is None:
        if model.basis == "trig":
            per_dim = 64 if model.d <= 2 else 8
        else:
            per_dim = 1 << 12
    return GridSpec.default(model, per_dim)


# --------------------------------------------------------------------------


@dataclass
class NodeSet:
    """Drawn nodes ``(n, d)`` with the density value each was drawn under."""

    nodes: np.ndarray
    density_values: np.ndarray
    seed: int
    variant: DensityVariant
    m: int
    substream: int = 0
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.density_values = np.asarray(self.density_values, dtype=float)
        self.variant = DensityVariant.parse(self.variant)
        if self.nodes.ndim != 2 or self.nodes.shape[0] != self.density_values.shape[0]:
            raise ValueError("nodes must be (n, d) with one density value per node")
        if np.any(~(self.density_values > 0)):
            raise ValueError("density values must be strictly positive")

    def __len__(self):
        return int(self.nodes.shape[0])

    @property
    def d(self):
        return int(self.nodes.shape[1])

    def subset(self, idx):
        idx = np.asarray(idx)
        stats = dict(self.stats, parent_size=len(self))
        return NodeSet(self.nodes[idx], self.density_values[idx], self.seed, self.variant,
                       self.m, self.substream, stats)

    def header(self):
        return {"seed": int(self.seed), "substream": int(self.substream), "m": int(self.m),
                "variant": self.variant.value}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(self.header(), sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow([f"x_{j + 1}" for j in range(self.d)] + ["density"])
            for row, dv in zip(self.nodes, self.density_values):
                w.writerow([repr(float(v)) for v in row] + [repr(float(dv))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            first = fh.readline()
            if not first.startswith("#"):
                raise ValueError(f"{path}: missing node-set header line")
            meta = json.loads(first[1:])
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
        data = data.reshape(-1, len(rows[0]))
        return cls(data[:, :-1], data[:, -1], meta["seed"], meta["variant"], meta["m"],
                   meta.get("substream", 0))


def draw_nodes(model, m, n, variant, seed, substream=0, grid=None):
    """Draw ``n`` i.i.d. nodes from ``density * base measure``.

    Rejection sampling with envelope ``1.05 * max(density / proposal)``
    over ``grid``. A proposal above the envelope means the grid missed
    the maximum: the envelope is raised past the observed ratio and the
    whole draw restarts from the seed, so the output stays a function of
    the inputs alone.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    variant = DensityVariant.parse(variant)
    if variant is not DensityVariant.NONE and m < 2:
        raise ValueError("m must be >= 2 for the tailored and simple densities")
    grid = grid if grid is not None else _envelope_grid(model)
    gpts = grid.points()
    gdens, _ = _density_parts(model, m, variant, gpts)
    envelope = ENVELOPE_MARGIN * float(np.max(_ratio(gdens, _proposal_density(model, gpts))))
    restarts = 0
    while True:
        try:
            nodes, dens, stats = _rejection(model, m, n, variant, seed, substream, envelope)
            break
        except EnvelopeViolation as exc:
            restarts += 1
            if restarts > MAX_ENVELOPE_RESTARTS:
                raise
            envelope = ENVELOPE_MARGIN * exc.observed
    stats.update(envelope=envelope, envelope_restarts=restarts, grid=grid.to_dict())
    if stats["flagged"]:
        warnings.warn(
            f"{stats['flagged']} node densities carry a truncation remainder above "
            f"{DENSITY_FLAG:g} of their value",
            RuntimeWarning,
            stacklevel=2,
        )
    return NodeSet(nodes, dens, seed, variant, m, substream, stats)


def _rejection(model, m, n, variant, seed, substream, envelope):
    rng = make_rng(seed, substream)
    out_x, out_d = [], []
    have = proposed = flagged = 0
    worst = 0.0
    while have < n:
        batch = int(1.2 * (n - have) * envelope) + 64
        x = _proposal_draw(model, rng, batch)
        u = rng.uniform(size=batch)
        dens, err = _density_parts(model, m, variant, x)
        ratio = _ratio(dens, _proposal_density(model, x))
        top = float(ratio.max())
        if top > envelope:
            raise EnvelopeViolation(f"density/proposal {top:.6g} above envelope {envelope:.6g}", top)
        acc = (u * envelope < ratio) & (dens > 0)
        take = np.flatnonzero(acc)[: n - have]
        proposed += batch if have + acc.sum() <= n else int(np.flatnonzero(acc)[n - have - 1]) + 1
        out_x.append(x[take])
        out_d.append(dens[take])
        rel = err[take] / dens[take]
        flagged += int(np.sum(rel > DENSITY_FLAG))
        worst = max(worst, float(rel.max(initial=0.0)))
        have += take.size
    stats = {
        "proposed": int(proposed),
        "accepted": int(n),
        "acceptance_rate": n / proposed,
        "flagged": flagged,
        "max_relative_remainder": worst,
    }
    return np.concatenate(out_x), np.concatenate(out_d), stats
