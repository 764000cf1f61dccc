"""Command line entry point: ``rkhs-lsq <subcommand> --config cfg.json``.

Every subcommand reads a JSON config holding at least a ``model``
descriptor (``{"basis": "trig_sharp", "s": 2, "d": 1}`` and friends),
writes its outputs below ``--out`` and prints the paths it wrote.
See FORMATS.md for the file layouts.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import bounds, certify, christoffel, experiment, recover, sampler, subsample
from .christoffel import GridSpec
from .spectral import SpectralModel, basis_matrix, ranked_spectrum


def _load(path):
    with open(path) as fh:
        return json.load(fh)


def _dump(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _model(cfg):
    if "model" not in cfg:
        raise ValueError("config needs a 'model' descriptor")
    return SpectralModel.from_dict(cfg["model"])


def _seed(cfg, args):
    return int(args.seed) if args.seed is not None else int(cfg.get("seed", 0))


def _grid(cfg, model):
    if cfg.get("grid_per_dim"):
        return GridSpec.default(model, int(cfg["grid_per_dim"]))
    return certify.default_certify_grid(model)


def _operator(cfg, model, samples=None):
    nodes = sampler.NodeSet.from_csv(cfg["nodes"])
    m = int(cfg.get("m", nodes.m))
    weighted = bool(cfg.get("weighted", nodes.variant is not sampler.DensityVariant.NONE))
    mat = recover.assemble(model, nodes, m, weighted=weighted)
    if samples is None:
        samples = np.zeros(len(nodes))
    return mat, recover.fit(mat, samples, model=model, strict=bool(cfg.get("strict", True)))


def _target_values(cfg, model, x):
    tgt = cfg["target"]
    coef = np.asarray(tgt["coefficients"], dtype=float).reshape(-1, 2)
    ranks = [int(r) for r in tgt["ranks"]]
    B = basis_matrix(model, x, max(ranks))
    return B[:, [r - 1 for r in ranks]] @ (coef[:, 0] + 1j * coef[:, 1])


def _read_samples(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    body = rows[1:] if not _is_number(rows[0][0]) else rows
    data = np.array([[float(v) for v in r] for r in body])
    return data[:, 0] + 1j * data[:, 1] if data.shape[1] > 1 else data[:, 0]


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


# --------------------------------------------------------------------------


def cmd_spectrum(cfg, args):
    model = _model(cfg)
    out = [os.path.join(args.out, "spectrum.csv")]
    ranked_spectrum(model, int(cfg.get("N", 100))).to_csv(out[0])
    if cfg.get("ms"):
        out.append(os.path.join(args.out, "christoffel.csv"))
        grid = GridSpec.default(model, cfg["grid_per_dim"]) if cfg.get("grid_per_dim") else None
        christoffel.bounds_table(model, [int(m) for m in cfg["ms"]], grid, out[-1])
    return out, 0


def cmd_sample(cfg, args):
    model = _model(cfg)
    nodes = sampler.draw_nodes(model, int(cfg["m"]), int(cfg["n"]), cfg.get("variant", "tailored"),
                               _seed(cfg, args), int(cfg.get("substream", 0)))
    out = [os.path.join(args.out, "nodes.csv"), os.path.join(args.out, "sample_stats.json")]
    nodes.to_csv(out[0])
    _dump(dict(nodes.header(), stats=nodes.stats), out[1])
    return out, 0


def cmd_recover(cfg, args):
    model = _model(cfg)
    nodes = sampler.NodeSet.from_csv(cfg["nodes"])
    if "samples" in cfg:
        samples = _read_samples(cfg["samples"])
    elif "target" in cfg:
        samples = _target_values(cfg, model, nodes.nodes)
    else:
        raise ValueError("recover needs 'samples' (CSV path) or 'target' (ranks + coefficients)")
    mat, op = _operator(cfg, model, samples)
    norm, ok = recover.spectral_norm_check(mat)
    out = [os.path.join(args.out, "operator.json")]
    op.to_json(out[0], node_file=cfg["nodes"])
    doc = {"spectral_norm": norm, "spectral_pass": ok, "rank": op.rank, "rank_ok": op.rank_ok}
    if "target" in cfg:
        grid = _grid(cfg, model).points()
        err = recover.evaluate(op, model, grid) - _target_values(cfg, model, grid)
        doc["grid_error_sup"] = float(np.max(np.abs(err)))
    out.append(os.path.join(args.out, "recover_report.json"))
    _dump(doc, out[-1])
    return out, 0


def cmd_subsample(cfg, args):
    model = _model(cfg)
    mat, _ = _operator(cfg, model)
    res = subsample.weaver_subsample(subsample.rows_from_matrix(mat), k1=cfg.get("k1"),
                                     k2=cfg.get("k2"), k3=cfg.get("k3"))
    out = [os.path.join(args.out, "subsample.json"), os.path.join(args.out, "nodes_subsampled.csv")]
    res.to_json(out[0])
    mat.nodes.subset(res.J).to_csv(out[1])
    return out, 0


def cmd_certify(cfg, args):
    model = _model(cfg)
    _, op = _operator(cfg, model)
    eps = experiment.cert_eps_for(model, op.m, cfg.get("eps", "auto"))
    cert = certify.certify_sup(op, model, _grid(cfg, model), eps=eps, keep_values=True)
    out = [os.path.join(args.out, "certificate.json"), os.path.join(args.out, "certificate.csv")]
    cert.to_json(out[0])
    cert.to_csv(out[1])
    return out, 0


def _bound_rows(cfg):
    rows = []
    if "model" in cfg:
        model = _model(cfg)
        names = cfg.get("evaluators", ["wls_bound"])
        for m in cfg.get("ms", []):
            for name in names:
                if name == "wls_bound":
                    rep = bounds.wls_bound(model, int(m))
                elif name in ("subsampled_bound_i", "subsampled_bound_ii"):
                    rep = bounds.subsampled_bound(model, name.rsplit("_", 1)[1], int(m))
                elif name == "tail_min_bound":
                    rep = bounds.tail_min_bound(model, int(m))
                else:
                    raise ValueError(f"unknown evaluator {name!r}")
                rows.append(rep.to_row())
    if "sigma_upper" in cfg:
        su = cfg["sigma_upper"]
        for n in su["ns"]:
            rows.append(bounds.sigma_upper_bound(su["s"], su["d"], int(n), su.get("norm", "sharp")).to_row())
    if "hmix" in cfg:
        hm = cfg["hmix"]
        for m in hm["ms"]:
            rows.append(bounds.hmix_preasymptotic_bound(hm["s"], hm["d"], int(m)).to_row())
    if not rows:
        raise ValueError("bounds config produced no rows (give model+ms, sigma_upper or hmix)")
    return rows


def cmd_bounds(cfg, args):
    rows = _bound_rows(cfg)
    lead = ["name", "value", "slack"]
    keys = lead + sorted({k for r in rows for k in r} - set(lead))
    out = [os.path.join(args.out, "bounds.csv")]
    with open(out[0], "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, restval="")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()})
    return out, 0


def cmd_experiment(cfg, args):
    if args.seed is not None:
        cfg = dict(cfg, seed=int(args.seed))
    config = experiment.ExperimentConfig.from_dict(cfg)
    res = experiment.run_experiment(config, args.out)
    return [res.csv_path, res.summary_path], 0 if res.summary["errors"] == 0 else 1


COMMANDS = {
    "spectrum": (cmd_spectrum, "ranked singular values (and Christoffel table)"),
    "sample": (cmd_sample, "draw nodes from a sampling density"),
    "recover": (cmd_recover, "fit a weighted least-squares operator to samples"),
    "subsample": (cmd_subsample, "select O(m) nodes with frame bounds"),
    "certify": (cmd_certify, "grid worst-case error certificate of an operator"),
    "bounds": (cmd_bounds, "evaluate closed-form error bounds"),
    "experiment": (cmd_experiment, "seeded multi-trial experiment"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="rkhs-lsq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
        p.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    fn = COMMANDS[args.command][0]
    try:
        paths, code = fn(_load(args.config), args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
