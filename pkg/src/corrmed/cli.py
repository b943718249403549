"""Command line: simulate, fit, evaluate, diagnose, grid.

Exit codes: 0 success, 2 invalid input, 3 numerical or runtime failure.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys
import time

import numpy as np
import yaml

from .analysis import (
    PosteriorTrace,
    compute_pips,
    empirical_fdr_report,
    mse_metrics,
    pip_psrfs,
    psrf,
    selection_report,
    tpr_at_fixed_fdr,
)
from .config import load_config
from .fitting import fit_chain, prepare_structure
from .graph import NeighborGraph
from .io import (
    config_hash,
    mediator_names,
    provenance_line,
    read_dataset,
    read_matrix,
    read_records,
    read_truth,
    write_dataset,
    write_records,
    write_table,
)
from .model import ModelData, SamplerDivergence
from .sim import format_table, run_grid, simulate_replicate, summarize, worker_count
from .stats import NotPositiveDefiniteError, make_rng

log = logging.getLogger("corrmed")


class UsageError(ValueError):
    pass


def _overrides(args):
    keys = ("method", "seed", "out", "chains", "iterations", "burnin", "thin", "fdr")
    ov = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "graph", None):
        ov["graph"], ov["structure"] = args.graph, "graph-file"
    if getattr(args, "corr_matrix", None):
        ov["corr_matrix"], ov["structure"] = args.corr_matrix, "matrix-file"
    return ov


def _provenance(cfg):
    # the output location is not part of what was computed
    d = cfg.to_dict()
    d.pop("out")
    return provenance_line(config_hash(d), cfg.seed)


def cmd_simulate(args):
    cfg = load_config(args.config, _overrides(args))
    design = cfg.sim_design()
    rep = simulate_replicate(design, cfg.replicate, cfg.seed)
    prov = _provenance(cfg)
    write_dataset(cfg.out, rep.dataset, prov, truth=(rep.beta_m, rep.alpha_a, rep.labels))
    with open(os.path.join(cfg.out, "design.yaml"), "w") as fh:
        fh.write(prov + "\n")
        yaml.safe_dump({"design": design.to_dict(), "replicate": cfg.replicate, "seed": cfg.seed}, fh, sort_keys=False)
    print(f"wrote n={design.n} p={design.p} to {cfg.out}")
    return 0


def _run_chains(method, data, structure, hyper, sconf, seed, chains):
    def one(c):
        return fit_chain(method, data, structure, hyper, sconf, make_rng(seed, 100, c))

    workers = min(worker_count(), chains)
    if workers > 1:
        from joblib import Parallel, delayed

        return Parallel(n_jobs=workers)(delayed(one)(c) for c in range(chains))
    return [one(c) for c in range(chains)]


def cmd_fit(args):
    cfg = load_config(args.config, _overrides(args))
    if not args.data:
        raise UsageError("--data: directory with A.csv, M.csv, Y.csv is required")
    dataset, names = read_dataset(args.data)
    graph = corr = None
    if cfg.structure == "graph-file":
        graph = NeighborGraph.read(cfg.graph, p=dataset.p)
        if graph.p != dataset.p:
            raise UsageError(f"graph has {graph.p} nodes but data has {dataset.p} mediators")
    elif cfg.structure == "matrix-file":
        corr = read_matrix(cfg.corr_matrix)[1]
        if corr.shape != (dataset.p, dataset.p):
            raise UsageError(f"correlation matrix is {corr.shape}, expected {(dataset.p, dataset.p)}")
    structure = prepare_structure(cfg.method, dataset, graph=graph, corr=corr, graph_method=cfg.graph_method)
    sconf = cfg.sampler_config()
    data = ModelData(dataset, sconf.center, sconf.standardize)
    t0 = time.perf_counter()
    traces = _run_chains(cfg.method, data, structure, cfg.hyper(), sconf, cfg.seed, cfg.chains)
    wall = time.perf_counter() - t0

    os.makedirs(cfg.out, exist_ok=True)
    prov = _provenance(cfg)
    tdir = os.path.join(cfg.out, "traces")
    os.makedirs(tdir, exist_ok=True)
    for c, tr in enumerate(traces):
        tr.save(os.path.join(tdir, f"chain_{c:02d}.npz"))
    rep = selection_report(traces, cfg.fdr)
    ps = pip_psrfs(traces) if len(traces) > 1 else np.full(dataset.p, np.nan)
    rows = rep.rows(names)
    for r, v in zip(rows, ps):
        r["psrf"] = v
    write_records(os.path.join(cfg.out, "report.csv"), rows, prov)
    glob_rows = [{"effect": k, **v} for k, v in rep.global_effects.items()]
    write_records(os.path.join(cfg.out, "effects.csv"), glob_rows, prov)
    summary = {
        "method": cfg.method,
        "chains": cfg.chains,
        "threshold_c1": rep.threshold,
        "n_selected": int(rep.selected.size),
        "selected": [names[j] for j in rep.selected],
        "graph_threshold": structure.threshold,
        "graph_edges": structure.graph.n_edges if structure.graph is not None else None,
        "wall_time_s": wall,
        "diagnostics": [tr.diagnostics for tr in traces],
        "provenance": prov[2:],
    }
    with open(os.path.join(cfg.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
    print(f"{cfg.method}: {rep.selected.size} mediators selected at locfdr target {cfg.fdr}; wrote {cfg.out}")
    return 0


def cmd_evaluate(args):
    recs = read_records(args.report)
    names_t, labels, nie = read_truth(args.truth)
    if len(recs) != labels.size:
        raise UsageError(f"report has {len(recs)} mediators but truth has {labels.size}")
    pip = np.array([float(r["pip"]) for r in recs])
    truth = labels == 1
    rows = []
    tpr = tpr_at_fixed_fdr(pip, truth, args.fdr) if truth.any() else float("nan")
    row = {"tpr_at_fdr": tpr, "fdr_target": args.fdr}
    if "nie_mean" in recs[0]:
        est = np.array([float(r["nie_mean"]) for r in recs])
        row["mse_nonnull"], row["mse_null"] = mse_metrics(est, nie, nonnull=truth)
    for r in empirical_fdr_report(pip, truth):
        row[f"tpr[{r['rule']}]"] = r["tpr"]
        row[f"fdr[{r['rule']}]"] = r["fdr"]
    rows.append(row)
    out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.report)), "metrics.csv")
    write_records(out, rows, provenance_line(config_hash(vars(args)), "-"))
    for k, v in row.items():
        print(f"{k:>20}: {v:.4g}")
    return 0


def cmd_diagnose(args):
    files = sorted(glob.glob(os.path.join(args.traces, "*.npz")))
    if len(files) < 2:
        raise UsageError(f"need at least two chains in {args.traces}, found {len(files)}")
    traces = [PosteriorTrace.load(f) for f in files]
    T = min(t.T for t in traces)
    traces = [PosteriorTrace(t.method, t.gamma[:T], t.beta_m[:T], t.alpha_a[:T],
                             {k: v[:T] for k, v in t.scalars.items()}) for t in traces]
    rows = []
    for j, v in enumerate(pip_psrfs(traces)):
        rows.append({"parameter": f"pip[{mediator_names(traces[0].p)[j]}]", "psrf": v})
    for name in ("beta_a", "sigma_e2"):
        rows.append({"parameter": name, "psrf": psrf([t.scalars[name] for t in traces])})
    for r in rows:
        r["flag"] = int(not r["psrf"] <= 1.2)
    out = args.out or os.path.join(args.traces, "psrf.csv")
    write_table(out, ["parameter", "psrf", "flag"], [[r["parameter"], r["psrf"], r["flag"]] for r in rows],
                provenance_line(config_hash(vars(args)), "-"))
    pip_ps = np.array([r["psrf"] for r in rows[:-2]])
    finite = pip_ps[np.isfinite(pip_ps)]
    lo, hi = np.quantile(finite, [0.025, 0.975]) if finite.size else (np.nan, np.nan)
    print(f"{len(traces)} chains, {T} draws each")
    print(f"PIP PSRF 95% interval: [{lo:.3f}, {hi:.3f}]")
    for name in ("beta_a", "sigma_e2"):
        print(f"PSRF {name}: {next(r['psrf'] for r in rows if r['parameter'] == name):.3f}")
    flagged = [r["parameter"] for r in rows if r["flag"]]
    print(f"{len(flagged)} parameter(s) with PSRF > 1.2" + (": " + ", ".join(flagged[:20]) if flagged else ""))
    return 0


def cmd_grid(args):
    cfg = load_config(args.config, _overrides(args))
    designs = cfg.grid_designs()
    res = run_grid(designs, cfg.methods, cfg.sampler_config(), cfg.hyper(), cfg.seed, cfg.fdr)
    os.makedirs(cfg.out, exist_ok=True)
    prov = _provenance(cfg)
    write_records(os.path.join(cfg.out, "replicates.csv"), [r.flat() for r in res], prov)
    summ = summarize(res)
    write_records(os.path.join(cfg.out, "summary.csv"), summ, prov)
    table = format_table(summ)
    with open(os.path.join(cfg.out, "table.txt"), "w") as fh:
        fh.write(prov + "\n" + table + "\n")
    print(table)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="corrmed", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, fit_flags=True):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        if fit_flags:
            p.add_argument("--method", choices=("gmm", "potts", "corrs"))
            p.add_argument("--chains", type=int)
            p.add_argument("--iterations", type=int)
            p.add_argument("--burnin", type=int)
            p.add_argument("--thin", type=int)
            p.add_argument("--fdr", type=float)
            p.add_argument("--graph", help="edge-list file (0-based pairs)")
            p.add_argument("--corr-matrix", dest="corr_matrix", help="p x p correlation CSV")

    p = sub.add_parser("simulate", help="generate a synthetic data set")
    common(p, fit_flags=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run chains and write PIPs, selections and effects")
    common(p)
    p.add_argument("--data", help="directory with A.csv, M.csv, Y.csv (and optional C.csv)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="score a report against simulation truth")
    p.add_argument("--report", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--fdr", type=float, default=0.1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="PSRF over chains in a trace directory")
    p.add_argument("--traces", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("grid", help="simulation grid over designs and methods")
    common(p)
    p.set_defaults(func=cmd_grid)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SamplerDivergence, NotPositiveDefiniteError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        if isinstance(exc, SamplerDivergence):
            print(json.dumps(exc.state_dump, default=float), file=sys.stderr)
        if isinstance(exc, NotPositiveDefiniteError):
            print(f"minimum eigenvalue: {exc.min_eigenvalue:.3g}", file=sys.stderr)
        return 3
    except (ValueError, FileNotFoundError, KeyError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
