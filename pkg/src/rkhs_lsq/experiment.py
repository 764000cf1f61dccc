"""Seeded multi-trial experiments: sample, fit, certify, compare to bounds.

Every (n, trial) pair draws from substream ``seed XOR trial`` and writes
one CSV row. The JSON summary is a pure function of those rows plus the
config, so :func:`summarize_csv` rebuilds it exactly from the CSV.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from . import bounds, certify, christoffel, recover, sampler, subsample
from .christoffel import GridSpec
from .spectral import SpectralModel

CERT_REL = 1e-3
CERT_EPS_CAP = 1e-8


@dataclass
class ExperimentConfig:
    """One experiment.

    ``m_rule`` is ``"log"`` (``m = floor(n / (c1 r log n))``) or
    ``"explicit"`` (``m`` fixed). ``n`` must be strictly increasing; with
    the log rule ``ms`` may be given instead and each ``n`` becomes the
    smallest node count that yields that ``m``. ``cert_eps`` is the
    kernel truncation tolerance or ``"auto"`` (a thousandth of the squared
    projection error, capped at 1e-8).
    """

    model: dict
    n: List[int] = field(default_factory=list)
    ms: Optional[List[int]] = None
    m_rule: str = "log"
    m: Optional[int] = None
    c1: Optional[float] = None
    r: float = 2.0
    trials: int = 1
    seed: int = 0
    variant: str = "tailored"
    weighted: Optional[bool] = None
    subsample: bool = False
    grid_per_dim: Optional[int] = None
    cert_eps: object = "auto"
    certify: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.m_rule not in ("log", "explicit"):
            raise ValueError("m_rule must be 'log' or 'explicit'")
        if self.m_rule == "log" and not self.r > 1:
            raise ValueError("the log rule needs r > 1")
        if self.m_rule == "explicit" and (self.m is None or self.m < 2):
            raise ValueError("explicit m_rule needs m >= 2")
        if self.c1 is None:
            self.c1 = bounds.default_c1(self.spectral_model().bounded_ons)
        if self.ms is not None:
            if self.m_rule != "log":
                raise ValueError("ms requires the log m_rule")
            self.n = [n_for_m(m, self.c1, self.r) for m in self.ms]
        self.n = [int(v) for v in self.n]
        if not self.n:
            raise ValueError("no node counts given")
        if any(b <= a for a, b in zip(self.n, self.n[1:])):
            raise ValueError("n must be strictly increasing")
        if self.weighted is None:
            self.weighted = sampler.DensityVariant.parse(self.variant) is not sampler.DensityVariant.NONE

    def spectral_model(self):
        return SpectralModel.from_dict(self.model)

    def m_for(self, n):
        if self.m_rule == "explicit":
            return int(self.m)
        return m_rule(n, self.c1, self.r)

    def to_dict(self):
        return asdict(self)

    def config_hash(self):
        doc = self.to_dict()
        doc.pop("workers")
        text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, doc):
        return cls(**doc)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def m_rule(n, c1, r):
    """``floor(n / (c1 r log n))`` (natural log)."""
    if n < 2:
        return 0
    return int(math.floor(n / (c1 * r * math.log(n))))


def n_for_m(m, c1, r):
    """Smallest ``n`` with ``m_rule(n) >= m``."""
    lo, hi = 3, 4
    while m_rule(hi, c1, r) < m:
        hi *= 2
    # n / log n is increasing for n >= 3
    while lo < hi:
        mid = (lo + hi) // 2
        if m_rule(mid, c1, r) >= m:
            hi = mid
        else:
            lo = mid + 1
    return lo


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residual: float
    points: int


def rate_fit(pairs):
    """Least squares on ``(log x, log error)``; needs 4+ positive pairs."""
    pairs = [(float(a), float(b)) for a, b in pairs]
    if len(pairs) < 4:
        raise ValueError("rate_fit needs at least 4 points")
    if any(a <= 0 or b <= 0 for a, b in pairs):
        raise ValueError("rate_fit needs positive abscissae and errors")
    x = np.log([a for a, _ in pairs])
    y = np.log([b for _, b in pairs])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return RateFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res ** 2))), len(pairs))


# --------------------------------------------------------------------------

COLUMNS = [
    "config_hash", "seed", "substream", "trial", "n", "m", "n_used", "rank_ok",
    "spectral_norm", "spectral_pass", "cert_sup", "cert_sq", "cert_slack",
    "truncation_rank", "bound", "bound_pass", "acceptance_rate", "error",
]


def cert_eps_for(model, m, cert_eps="auto"):
    if cert_eps != "auto":
        return float(cert_eps)
    if model.basis == "legendre":
        proj = christoffel._series(model, m, "endpoint", None).value
    else:
        proj = christoffel.sigma_sq_tail(model, m).value
    return min(CERT_EPS_CAP, CERT_REL * proj)


def run_trial(config, n_index, trial):
    """One row of the per-trial table (errors are caught and recorded)."""
    model = config.spectral_model()
    n = config.n[n_index]
    m = config.m_for(n)
    row = {k: "" for k in COLUMNS}
    row.update(config_hash=config.config_hash(), seed=int(config.seed), substream=int(trial),
               trial=int(trial), n=int(n), m=int(m))
    try:
        if m < 2:
            raise ValueError(f"m = {m} < 2 for n = {n}")
        nodes = sampler.draw_nodes(model, m, n, config.variant, config.seed, trial)
        row["acceptance_rate"] = float(nodes.stats["acceptance_rate"])
        full = recover.assemble(model, nodes, m, weighted=config.weighted)
        norm, ok = recover.spectral_norm_check(full)
        row.update(spectral_norm=norm, spectral_pass=int(ok))
        used = nodes
        if config.subsample:
            res = subsample.weaver_subsample(subsample.rows_from_matrix(full))
            used = nodes.subset(res.J)
            mat = recover.assemble(model, used, m, weighted=config.weighted)
        else:
            mat = full
        row["n_used"] = len(used)
        op = recover.fit(mat, np.zeros(len(used)), model=model, strict=False)
        row["rank_ok"] = int(op.rank_ok)
        if config.certify:
            if not op.rank_ok:
                raise ArithmeticError(f"rank {op.rank} < {m - 1}")
            grid = (GridSpec.default(model, config.grid_per_dim) if config.grid_per_dim
                    else certify.default_certify_grid(model))
            cert = certify.certify_sup(op, model, grid, eps=cert_eps_for(model, m, config.cert_eps))
            if config.subsample:
                rep = bounds.subsampled_bound(model, "ii", m)
            else:
                rep = bounds.wls_bound(model, m)
            row.update(cert_sup=cert.sup_value, cert_sq=cert.sup_value ** 2,
                       cert_slack=cert.truncation_slack, truncation_rank=cert.truncation_rank,
                       bound=float(rep.value), bound_pass=int(cert.sup_value ** 2 <= rep.value))
    except Exception as exc:  # recorded, the run continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _run_one(args):
    cfg_doc, i, t = args
    return run_trial(ExperimentConfig.from_dict(cfg_doc), i, t)


def _median(vals):
    return float(np.median(vals)) if vals else None


def summarize(rows, config):
    """Summary dict from per-trial rows (numbers as parsed from the CSV)."""
    per_n = []
    for n in config.n:
        sub = [r for r in rows if int(r["n"]) == n]
        good = [r for r in sub if not r["error"]]
        spec = [int(r["spectral_pass"]) for r in sub if r["spectral_pass"] != ""]
        bnd = [int(r["bound_pass"]) for r in good if r["bound_pass"] != ""]
        certs = [float(r["cert_sup"]) for r in good if r["cert_sup"] != ""]
        entry = {
            "n": n,
            "m": int(config.m_for(n)),
            "trials": len(sub),
            "errors": len(sub) - len(good),
            "spectral_pass_rate": (sum(spec) / len(spec)) if spec else None,
            "spectral_failures": (len(spec) - sum(spec)) if spec else None,
            "bound_pass_rate": (sum(bnd) / len(bnd)) if bnd else None,
            "cert_median": _median(certs),
            "cert_max": max(certs) if certs else None,
        }
        if config.m_rule == "log":
            entry["target_probability"] = 1.0 - bounds.failure_probability(n, config.r)
        per_n.append(entry)
    summary = {"config": config.to_dict(), "config_hash": config.config_hash(), "per_n": per_n,
               "errors": sum(e["errors"] for e in per_n)}
    pts = [(e["n"], e["cert_median"]) for e in per_n if e["cert_median"]]
    if len(pts) >= 4:
        summary["rate_fit_n"] = asdict(rate_fit(pts))
        summary["rate_fit_m"] = asdict(rate_fit([(e["m"], e["cert_median"]) for e in per_n
                                                 if e["cert_median"]]))
    return summary


def _parse_row(raw):
    out = {}
    for k in COLUMNS:
        v = raw[k]
        if k in ("config_hash", "error") or v == "":
            out[k] = v
        elif k in ("seed", "substream", "trial", "n", "m", "n_used", "rank_ok", "spectral_pass",
                   "truncation_rank", "bound_pass"):
            out[k] = int(v)
        else:
            out[k] = float(v)
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_rows(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in COLUMNS})


def read_rows(path):
    with open(path, newline="") as fh:
        return [_parse_row(r) for r in csv.DictReader(fh)]


def write_summary(summary, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def summarize_csv(csv_path, config):
    return summarize(read_rows(csv_path), config)


@dataclass
class ExperimentResult:
    rows: list
    summary: dict
    csv_path: Optional[str] = None
    summary_path: Optional[str] = None


def run_experiment(config, out_dir=None):
    """Run every (n, trial); write ``trials.csv`` and ``summary.json``."""
    jobs = [(i, t) for i in range(len(config.n)) for t in range(config.trials)]
    if config.workers > 1:
        doc = config.to_dict()
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_run_one, [(doc, i, t) for i, t in jobs]))
    else:
        rows = [run_trial(config, i, t) for i, t in jobs]
    # merge by key, independent of completion order
    rows.sort(key=lambda r: (r["n"], r["trial"]))
    csv_path = summary_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "trials.csv")
        summary_path = os.path.join(out_dir, "summary.json")
        write_rows(rows, csv_path)
        rows = read_rows(csv_path)
        summary = summarize(rows, config)
        write_summary(summary, summary_path)
    else:
        summary = summarize([_parse_row({k: (str(_fmt(v)) if v != "" else "") for k, v in r.items()})
                             for r in rows], config)
    return ExperimentResult(rows, summary, csv_path, summary_path)
