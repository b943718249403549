"""CSV files with a provenance comment line and a header row."""

from __future__ import annotations

import csv
import hashlib
import json
import os

import numpy as np

from . import __version__


def config_hash(obj):
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def provenance_line(cfg_hash, seed):
    return f"# corrmed {__version__} config={cfg_hash} seed={seed}"


def mediator_names(p):
    return [f"M{j + 1:04d}" for j in range(p)]


def write_table(path, header, rows, provenance):
    """``rows`` is a sequence of sequences aligned with ``header``."""
    with open(path, "w", newline="") as fh:
        fh.write(provenance + "\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_records(path, records, provenance):
    if not records:
        write_table(path, [], [], provenance)
        return
    header = list(records[0])
    write_table(path, header, [[r.get(k, "") for k in header] for r in records], provenance)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_matrix(path, X, header, provenance):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    write_table(path, header, X.tolist(), provenance)


def read_table(path):
    """(header, rows of strings), skipping '#' comment lines."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#") and ln.strip()]
    rows = list(csv.reader(lines))
    if not rows:
        raise ValueError(f"{path}: no header row")
    return rows[0], rows[1:]


def read_matrix(path):
    header, rows = read_table(path)
    try:
        X = np.array([[float(x) for x in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if X.size == 0:
        X = X.reshape(0, len(header))
    if X.shape[1] != len(header):
        raise ValueError(f"{path}: rows do not match the header width")
    return header, X


def read_records(path):
    header, rows = read_table(path)
    return [dict(zip(header, r)) for r in rows]


def write_dataset(outdir, dataset, provenance, truth=None):
    os.makedirs(outdir, exist_ok=True)
    write_matrix(os.path.join(outdir, "A.csv"), dataset.A[:, None], ["A"], provenance)
    write_matrix(os.path.join(outdir, "M.csv"), dataset.M, mediator_names(dataset.p), provenance)
    write_matrix(os.path.join(outdir, "Y.csv"), dataset.Y[:, None], ["Y"], provenance)
    if dataset.q:
        write_matrix(os.path.join(outdir, "C.csv"), dataset.C, [f"C{w + 1}" for w in range(dataset.q)], provenance)
    if truth is not None:
        beta, alpha, labels = truth
        rows = [[name, int(g), b, a, a * b] for name, g, b, a in zip(mediator_names(dataset.p), labels, beta, alpha)]
        write_table(os.path.join(outdir, "truth.csv"), ["mediator", "label", "beta_m", "alpha_a", "nie"], rows, provenance)


def read_dataset(datadir):
    from .model import MediationDataset

    def col(name):
        return read_matrix(os.path.join(datadir, name))[1][:, 0]

    names, M = read_matrix(os.path.join(datadir, "M.csv"))
    cpath = os.path.join(datadir, "C.csv")
    C = read_matrix(cpath)[1] if os.path.exists(cpath) else None
    return MediationDataset(col("A.csv"), M, col("Y.csv"), C), names


def read_truth(path):
    recs = read_records(path)
    labels = np.array([int(r["label"]) for r in recs])
    nie = np.array([float(r["nie"]) for r in recs])
    return [r["mediator"] for r in recs], labels, nie
