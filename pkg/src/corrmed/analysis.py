"""Posterior summaries: PIPs, local-FDR selection, effect estimates, PSRF."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class PosteriorTrace:
    """Retained draws of one chain.

    ``gamma`` is T x p with labels 1..4; ``scalars`` holds beta_a and the
    variance parameters; ``extras`` holds prior-specific parameters.
    """

    method: str
    gamma: np.ndarray
    beta_m: np.ndarray
    alpha_a: np.ndarray
    scalars: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.int8)
        if self.gamma.ndim != 2:
            raise ValueError("gamma must be T x p")
        if self.beta_m.shape != self.gamma.shape or self.alpha_a.shape != self.gamma.shape:
            raise ValueError("beta_m and alpha_a must match gamma's shape")
        if self.gamma.size and (self.gamma.min() < 1 or self.gamma.max() > 4):
            raise ValueError("labels must be in 1..4")

    @property
    def T(self):
        return self.gamma.shape[0]

    @property
    def p(self):
        return self.gamma.shape[1]

    def occupancy(self):
        """p x 4 counts of draws spent in each component."""
        return np.stack([(self.gamma == k).sum(axis=0) for k in (1, 2, 3, 4)], axis=1)

    def indirect_draws(self):
        return self.alpha_a * self.beta_m

    def save(self, path):
        arrays = {"gamma": self.gamma, "beta_m": self.beta_m, "alpha_a": self.alpha_a}
        arrays.update({f"scalar__{k}": v for k, v in self.scalars.items()})
        arrays.update({f"extra__{k}": v for k, v in self.extras.items()})
        meta = json.dumps({"method": self.method, "diagnostics": self.diagnostics})
        np.savez_compressed(path, __meta__=np.array(meta), **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["__meta__"]))
            scal = {k[8:]: z[k] for k in z.files if k.startswith("scalar__")}
            ext = {k[7:]: z[k] for k in z.files if k.startswith("extra__")}
            return cls(meta["method"], z["gamma"], z["beta_m"], z["alpha_a"], scal, ext, meta["diagnostics"])


def compute_pips(trace):
    if trace.T < 1:
        raise ValueError("trace has no draws")
    return (trace.gamma == 1).sum(axis=0) / trace.T


def locfdr_threshold(locfdr, target):
    """Largest cutoff c1 whose selection {locfdr < c1} has mean locfdr below ``target``.

    Ties enter or leave the selection together.  Returns (c1, sorted index array).
    """
    if not 0 < target < 1:
        raise ValueError("target must be in (0, 1)")
    v = np.asarray(locfdr, dtype=float)
    if v.size == 0:
        return 0.0, np.array([], dtype=np.int64)
    s = np.sort(v)
    uniq, last = np.unique(s, return_index=False, return_counts=True)
    ends = np.cumsum(last)
    means = np.cumsum(s)[ends - 1] / ends
    ok = np.flatnonzero(means < target)
    if ok.size == 0:
        c1 = float(uniq[0])
    else:
        i = ok[-1]
        c1 = float(uniq[i + 1]) if i + 1 < uniq.size else float(np.nextafter(uniq[-1], np.inf))
    return c1, np.flatnonzero(v < c1)


def tpr_at_fixed_fdr(scores, truth, fdr=0.1):
    """Oracle TPR: the largest score-threshold selection with realized FDR <= ``fdr``.

    ``truth`` is a boolean mask or an index set of true actives.  Items with
    equal scores are selected together.
    """
    scores = np.asarray(scores, dtype=float)
    active = _as_mask(truth, scores.size)
    n_act = int(active.sum())
    if n_act == 0:
        raise ValueError("no true actives: TPR is undefined")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    tp = np.cumsum(active[order])
    size = np.arange(1, s.size + 1)
    # only positions where the next score differs are valid cut points
    cut = np.append(s[1:] != s[:-1], True)
    fdp = (size - tp) / size
    feasible = cut & (fdp <= fdr + 1e-12)
    if not feasible.any():
        return 0.0
    return float(tp[np.flatnonzero(feasible)[-1]] / n_act)


def _as_mask(truth, p):
    truth = np.asarray(truth)
    if truth.dtype == bool:
        if truth.shape != (p,):
            raise ValueError("truth mask has the wrong length")
        return truth
    mask = np.zeros(p, dtype=bool)
    mask[truth.astype(np.int64)] = True
    return mask


def mse_metrics(trace_or_estimate, true_effects, nonnull=None):
    """(mse_nonnull, mse_null) of posterior-mean alpha*beta per mediator.

    ``nonnull`` defaults to the mediators whose true indirect effect is nonzero.
    """
    est = trace_or_estimate.indirect_draws().mean(axis=0) if isinstance(trace_or_estimate, PosteriorTrace) else np.asarray(trace_or_estimate, dtype=float)
    truth = np.asarray(true_effects, dtype=float)
    if est.shape != truth.shape:
        raise ValueError("estimate and truth lengths differ")
    mask = truth != 0 if nonnull is None else _as_mask(nonnull, truth.size)
    err = (est - truth) ** 2
    nn = float(err[mask].mean()) if mask.any() else float("nan")
    nu = float(err[~mask].mean()) if (~mask).any() else float("nan")
    return nn, nu


def psrf(chains):
    """Classic Gelman-Rubin potential scale reduction factor for scalar chains."""
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two chains of equal length")
    m, n = x.shape
    if n < 2:
        raise ValueError("chains must have at least two draws")
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    if W == 0:
        return 1.0 if B == 0 else float("inf")
    var_plus = (n - 1) / n * W + (m + 1) / (m * n) * B
    return float(np.sqrt(var_plus / W))


def pip_psrfs(traces):
    """PSRF of each mediator's inclusion-indicator trace across chains."""
    ind = np.stack([(t.gamma == 1).astype(float) for t in traces])
    return np.array([psrf(ind[:, :, j]) for j in range(ind.shape[2])])


RULES = ("locfdr@0.1", "pip>0.5", "pip>0.9")


def select_by_rule(pip, rule):
    pip = np.asarray(pip, dtype=float)
    if rule.startswith("locfdr@"):
        return locfdr_threshold(1.0 - pip, float(rule.split("@", 1)[1]))[1]
    if rule.startswith("pip>"):
        return np.flatnonzero(pip > float(rule[4:]))
    raise ValueError(f"unknown selection rule {rule!r}")


def empirical_fdr_report(pip, truth, rules=RULES):
    """Per rule: selected count, TPR and realized FDR (0 for an empty selection)."""
    if isinstance(pip, PosteriorTrace):
        pip = compute_pips(pip)
    pip = np.asarray(pip, dtype=float)
    active = _as_mask(truth, pip.size)
    rows = []
    for rule in rules:
        sel = select_by_rule(pip, rule)
        tp = int(active[sel].sum())
        rows.append({
            "rule": rule,
            "n_selected": int(sel.size),
            "tpr": tp / max(int(active.sum()), 1),
            "fdr": (sel.size - tp) / sel.size if sel.size else 0.0,
        })
    return rows


@dataclass
class SelectionReport:
    pip: np.ndarray
    locfdr: np.ndarray
    threshold: float
    selected: np.ndarray
    nie_mean: np.ndarray
    nie_median: np.ndarray
    nie_lower: np.ndarray
    nie_upper: np.ndarray
    global_effects: dict

    def rows(self, names=None):
        names = names or [f"M{j + 1:04d}" for j in range(self.pip.size)]
        sel = np.zeros(self.pip.size, dtype=bool)
        sel[self.selected] = True
        return [
            {
                "mediator": names[j],
                "pip": self.pip[j],
                "locfdr": self.locfdr[j],
                "selected": int(sel[j]),
                "nie_mean": self.nie_mean[j],
                "nie_median": self.nie_median[j],
                "nie_lower": self.nie_lower[j],
                "nie_upper": self.nie_upper[j],
            }
            for j in range(self.pip.size)
        ]


def _interval(x, axis=0):
    lo, med, hi = np.quantile(x, [0.025, 0.5, 0.975], axis=axis)
    return lo, med, hi


def selection_report(traces, fdr=0.1, a=1.0, a_star=0.0):
    """Pool one or more chains into PIPs, a locfdr selection and effect summaries."""
    traces = [traces] if isinstance(traces, PosteriorTrace) else list(traces)
    gamma = np.concatenate([t.gamma for t in traces])
    ab = np.concatenate([t.indirect_draws() for t in traces]) * (a - a_star)
    beta_a = np.concatenate([t.scalars["beta_a"] for t in traces])
    pip = (gamma == 1).mean(axis=0)
    locfdr = 1.0 - pip
    c1, sel = locfdr_threshold(locfdr, fdr)
    lo, med, hi = _interval(ab)
    nde = beta_a * (a - a_star)
    nie = ab.sum(axis=1)
    glob = {}
    for name, d in (("nde", nde), ("nie", nie), ("te", nde + nie)):
        l, m, h = _interval(d)
        glob[name] = {"mean": float(d.mean()), "median": float(m), "lower": float(l), "upper": float(h)}
    return SelectionReport(pip, locfdr, c1, sel, ab.mean(axis=0), med, lo, hi, glob)
