"""Synthetic block-correlated mediation designs and replicate grids."""

from __future__ import annotations

import math
import os
import time
import zlib
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .analysis import compute_pips, empirical_fdr_report, mse_metrics, tpr_at_fixed_fdr
from .fitting import fit_chain, prepare_structure
from .model import Hyperparameters, MediationDataset, ModelData, SamplerConfig
from .stats import make_rng, nearest_positive_definite

PLACEMENTS = ("one_block", "two_blocks", "five_blocks", "iid")
CORRELATIONS = ("affine", "identity", "weak_surrogate")


@dataclass
class SimDesign:
    name: str = "one_block"
    n: int = 100
    p: int = 200
    n_blocks: int = 10
    block_size: int = 10
    correlation: str = "affine"
    rho_c0: float = 0.5
    rho_c1: float = 0.03
    rho2: float = 0.0
    pi: tuple = (0.05, 0.05, 0.10, 0.80)
    V1: tuple = ((0.5, 0.2), (0.2, 0.5))
    v2: float = 0.5
    v3: float = 0.5
    placement: str = "one_block"
    beta_a: float = 0.5
    replicates: int = 20
    graph_perturbation: float = 0.0
    corr_noise: float = 0.0
    weak_fraction: float = 0.03
    weak_cutoff: float = 0.2
    weak_rank: int = 10

    def __post_init__(self):
        if self.n < 3 or self.p < 2:
            raise ValueError("design needs n >= 3 and p >= 2")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        pi = np.asarray(self.pi, dtype=float)
        if pi.shape != (4,) or np.any(pi < 0) or not math.isclose(pi.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("pi must be four non-negative proportions summing to 1")
        if self.n_blocks * self.block_size > self.p:
            raise ValueError("blocks do not fit in p mediators")
        if self.placement not in PLACEMENTS:
            raise ValueError(f"placement must be one of {PLACEMENTS}")
        if self.correlation not in CORRELATIONS:
            raise ValueError(f"correlation must be one of {CORRELATIONS}")
        if not 0 <= self.graph_perturbation <= 1 or self.corr_noise < 0:
            raise ValueError("perturbation settings out of range")
        V1 = np.asarray(self.V1, dtype=float)
        if V1.shape != (2, 2) or np.linalg.eigvalsh(V1).min() <= 0:
            raise ValueError("V1 must be 2x2 positive definite")

    @property
    def n_active(self):
        return int(round(self.p * self.pi[0]))

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown design field(s): {', '.join(sorted(unknown))}")
        conv = dict(d)
        if "pi" in conv:
            conv["pi"] = tuple(conv["pi"])
        if "V1" in conv:
            conv["V1"] = tuple(map(tuple, conv["V1"]))
        return cls(**conv)

    def to_dict(self):
        d = asdict(self)
        d["pi"] = list(self.pi)
        d["V1"] = [list(r) for r in self.V1]
        return d


def preset(name, **overrides):
    """Named designs used by the tests and the default grid."""
    base = {
        "one_block": {},
        "two_blocks": {"placement": "two_blocks"},
        "identity": {"correlation": "identity", "placement": "two_blocks"},
        "weak_surrogate": {"correlation": "weak_surrogate", "placement": "two_blocks"},
        "strong_one_block": {"rho_c0": 0.9, "rho_c1": 0.05, "rho2": 0.1},
        "large_five_blocks": {
            "n": 1000, "p": 2000, "n_blocks": 50, "block_size": 20,
            "rho_c0": 0.5, "rho_c1": 0.02, "placement": "five_blocks", "replicates": 5,
        },
    }
    if name not in base:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(base)}")
    return SimDesign(name=overrides.pop("name", name), **{**base[name], **overrides})


def _block_slices(design):
    s = design.block_size
    return [np.arange(b * s, (b + 1) * s) for b in range(design.n_blocks)]


def gen_labels(design, rng):
    """Labels 1..4: actives pinned to blocks, the rest iid from (pi2, pi3, pi4) renormalized."""
    p, k = design.p, design.n_active
    blocks = _block_slices(design)
    if design.placement == "iid":
        return rng.choice(np.arange(1, 5), size=p, p=np.asarray(design.pi))
    n_used = {"one_block": 1, "two_blocks": 2, "five_blocks": 5}[design.placement]
    if n_used > len(blocks):
        raise ValueError(f"placement needs {n_used} blocks, design has {len(blocks)}")
    per = k // n_used
    if per * n_used != k or per > design.block_size:
        raise ValueError(f"cannot place {k} actives evenly in {n_used} blocks of size {design.block_size}")
    chosen = rng.choice(len(blocks), n_used, replace=False)
    active = np.concatenate([rng.choice(blocks[b], per, replace=False) for b in np.sort(chosen)])
    rest = np.asarray(design.pi[1:], dtype=float)
    gamma = rng.choice(np.arange(2, 5), size=p, p=rest / rest.sum())
    gamma[active] = 1
    return gamma


def gen_effects(design, rng):
    """(beta_m, alpha_a, labels) for one replicate."""
    gamma = gen_labels(design, rng)
    p = design.p
    beta = np.zeros(p)
    alpha = np.zeros(p)
    a1 = gamma == 1
    pairs = rng.multivariate_normal(np.zeros(2), np.asarray(design.V1), size=int(a1.sum()))
    beta[a1], alpha[a1] = pairs[:, 0], pairs[:, 1]
    a2, a3 = gamma == 2, gamma == 3
    beta[a2] = math.sqrt(design.v2) * rng.standard_normal(int(a2.sum()))
    alpha[a3] = math.sqrt(design.v3) * rng.standard_normal(int(a3.sum()))
    return beta, alpha, gamma


def gen_block_covariance(design, rng=None):
    """Mediator noise correlation matrix for the design (positive definite)."""
    p = design.p
    if design.correlation == "identity":
        return np.eye(p)
    if design.correlation == "weak_surrogate":
        return weak_correlation_surrogate(p, design.weak_fraction, design.weak_cutoff, design.weak_rank,
                                          rng if rng is not None else np.random.default_rng(0))
    S = np.full((p, p), design.rho2)
    idx = np.arange(design.block_size)
    local = np.clip(design.rho_c0 - design.rho_c1 * np.abs(idx[:, None] - idx[None, :]), 0.0, None)
    for blk in _block_slices(design):
        S[np.ix_(blk, blk)] = local
    np.fill_diagonal(S, 1.0)
    if np.linalg.eigvalsh(S).min() <= 0:
        S = np.array(nearest_positive_definite(S))
    return S


def weak_correlation_surrogate(p, fraction=0.03, cutoff=0.2, rank=10, rng=None):
    """Factor-model correlation matrix with about ``fraction`` of pairs above ``cutoff``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    W = rng.standard_normal((p, rank))
    G = W @ W.T
    d = np.diag(G)
    iu = np.triu_indices(p, 1)

    def frac(kappa):
        s = np.sqrt(d + kappa)
        return np.mean(np.abs(G[iu] / (s[iu[0]] * s[iu[1]])) > cutoff)

    lo, hi = 1e-6, 1e6
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if frac(mid) > fraction:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-10:
            break
    kappa = hi
    s = np.sqrt(d + kappa)
    C = (G + kappa * np.eye(p)) / np.outer(s, s)
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 1.0)
    return C


def gen_dataset(design, effects, cov, rng):
    beta, alpha, _ = effects
    n = design.n
    A = rng.standard_normal(n)
    E = rng.standard_normal((n, design.p)) @ np.linalg.cholesky(cov).T
    M = np.outer(A, alpha) + E
    Y = M @ beta + design.beta_a * A + rng.standard_normal(n)
    return MediationDataset(A, M, Y)


@dataclass
class Replicate:
    design: SimDesign
    index: int
    dataset: MediationDataset
    beta_m: np.ndarray
    alpha_a: np.ndarray
    labels: np.ndarray
    cov: np.ndarray

    @property
    def true_nie(self):
        return self.alpha_a * self.beta_m


def design_key(design):
    return zlib.crc32(design.name.encode())


def simulate_replicate(design, index, master_seed):
    rng = make_rng(master_seed, design_key(design), index, 0)
    effects = gen_effects(design, rng)
    cov = gen_block_covariance(design, rng)
    ds = gen_dataset(design, effects, cov, rng)
    return Replicate(design, index, ds, effects[0], effects[1], effects[2], cov)


@dataclass
class ReplicateResult:
    design: str
    method: str
    replicate: int
    tpr: float = float("nan")
    mse_nonnull: float = float("nan")
    mse_null: float = float("nan")
    rules: dict = field(default_factory=dict)
    wall_time: float = float("nan")
    error: str = ""

    def flat(self):
        row = {k: getattr(self, k) for k in ("design", "method", "replicate", "tpr", "mse_nonnull", "mse_null", "wall_time")}
        for rule, r in self.rules.items():
            row[f"tpr[{rule}]"] = r["tpr"]
            row[f"fdr[{rule}]"] = r["fdr"]
        row["error"] = self.error
        return row


METHOD_IDS = {"gmm": 1, "potts": 2, "corrs": 3}


def score_replicate(rep, method, trace, fdr=0.1):
    pip = compute_pips(trace)
    truth = rep.labels == 1
    nn, nu = mse_metrics(trace, rep.true_nie, nonnull=truth)
    rules = {r["rule"]: r for r in empirical_fdr_report(pip, truth)}
    return ReplicateResult(rep.design.name, method, rep.index, tpr_at_fixed_fdr(pip, truth, fdr), nn, nu, rules)


def run_replicate(design, index, methods, config, hyper, master_seed, fdr=0.1):
    """Simulate one data set and fit every method on it (paired comparison)."""
    rep = simulate_replicate(design, index, master_seed)
    data = ModelData(rep.dataset, config.center, config.standardize)
    out = []
    for method in methods:
        rng = make_rng(master_seed, design_key(design), index, METHOD_IDS[method])
        t0 = time.perf_counter()
        try:
            st = prepare_structure(method, rep.dataset, graph_perturbation=design.graph_perturbation,
                                   corr_noise=design.corr_noise, rng=make_rng(master_seed, design_key(design), index, 10 + METHOD_IDS[method]))
            trace = fit_chain(method, data, st, hyper, config, rng)
            res = score_replicate(rep, method, trace, fdr)
        except Exception as exc:  # recorded, not fatal
            res = ReplicateResult(design.name, method, index, error=f"{type(exc).__name__}: {exc}")
        res.wall_time = time.perf_counter() - t0
        out.append(res)
    return out


def worker_count():
    try:
        return max(1, int(os.environ.get("CORRMED_WORKERS", "1")))
    except ValueError:
        return 1


def run_grid(designs, methods, config=None, hyper=None, master_seed=0, fdr=0.1, replicates=None, workers=None):
    """All (design, replicate) jobs; each job fits every method on the same data."""
    config = config or SamplerConfig()
    hyper = hyper or Hyperparameters()
    jobs = [(d, r) for d in designs for r in range(replicates or d.replicates)]
    workers = workers or worker_count()
    if workers > 1 and len(jobs) > 1:
        from joblib import Parallel, delayed

        chunks = Parallel(n_jobs=workers)(
            delayed(run_replicate)(d, r, methods, config, hyper, master_seed, fdr) for d, r in jobs
        )
    else:
        chunks = [run_replicate(d, r, methods, config, hyper, master_seed, fdr) for d, r in jobs]
    return [res for chunk in chunks for res in chunk]


def summarize(results):
    """Mean and standard error (sd / sqrt(R)) per (design, method)."""
    groups = {}
    for r in results:
        groups.setdefault((r.design, r.method), []).append(r)
    rows = []
    for (d, m), rs in groups.items():
        ok = [r for r in rs if not r.error]
        row = {"design": d, "method": m, "replicates": len(rs), "failures": len(rs) - len(ok)}
        for key in ("tpr", "mse_nonnull", "mse_null", "wall_time"):
            x = np.array([getattr(r, key) for r in ok], dtype=float)
            row[key] = float(x.mean()) if x.size else float("nan")
            row[f"{key}_se"] = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")
        for rule in ("locfdr@0.1", "pip>0.5", "pip>0.9"):
            for what in ("tpr", "fdr"):
                x = np.array([r.rules[rule][what] for r in ok if rule in r.rules])
                row[f"{what}[{rule}]"] = float(x.mean()) if x.size else float("nan")
        rows.append(row)
    return rows


def format_table(summary_rows):
    """Plain-text table laid out like the simulation summary: TPR, MSE non-null, MSE null."""
    lines = [f"{'design':<22}{'method':<8}{'TPR':>14}{'MSE_nonnull':>16}{'MSE_null':>14}{'fail':>6}"]
    for r in summary_rows:
        tpr = f"{r['tpr']:.2f} ({r['tpr_se']:.3f})"
        lines.append(f"{r['design']:<22}{r['method']:<8}{tpr:>14}{r['mse_nonnull']:>16.4f}{r['mse_null']:>14.2e}{r['failures']:>6d}")
    return "\n".join(lines)
