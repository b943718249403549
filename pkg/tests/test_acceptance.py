"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS`` or ``FAIL`` line; the lines are repeated in
the pytest terminal summary.  The simulation grids (criteria 1-5) run once
per module at desk scale: 20 replicates, 15000 iterations, 5000 burn-in,
thin 10.  Criterion 11 is long and runs only with ``CORRMED_LARGE=1``.

``CORRMED_ACCEPTANCE_REPLICATES`` lowers the replicate count for quick
local runs; the reported lines always state the count used.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy import stats as sps

import oracles
from conftest import ACCEPTANCE_LINES
from corrmed.analysis import locfdr_threshold
from corrmed.corrs import CorrSState, update_b_block, update_pg_auxiliaries
from corrmed.graph import NeighborGraph
from corrmed.model import Hyperparameters, SamplerConfig
from corrmed.potts import PottsState, label_marginals
from corrmed.sim import preset, run_grid
from corrmed.stats import make_rng, sample_polya_gamma_array

import conjugate_suite

SEED = 20240501
REPLICATES = int(os.environ.get("CORRMED_ACCEPTANCE_REPLICATES", "20"))
CONFIG = SamplerConfig(iterations=15000, burnin=5000, thin=10)


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _grid(design, methods):
    t0 = time.perf_counter()
    res = run_grid([design], methods, CONFIG, Hyperparameters(), SEED, 0.1, replicates=REPLICATES)
    failed = [r for r in res if r.error]
    assert not failed, f"replicate failures: {[r.error for r in failed]}"
    out = {m: sorted((r for r in res if r.method == m), key=lambda r: r.replicate) for m in methods}
    print(f"{design.name} {methods}: {time.perf_counter() - t0:.0f}s")
    return out


def _tpr(rows):
    return np.array([r.tpr for r in rows])


@pytest.fixture(scope="module")
def one_block():
    return _grid(preset("one_block"), ["gmm", "potts", "corrs"])


@pytest.fixture(scope="module")
def two_blocks():
    return _grid(preset("two_blocks"), ["potts", "corrs"])


@pytest.fixture(scope="module")
def no_structure():
    return _grid(preset("identity"), ["gmm", "corrs"])


@pytest.fixture(scope="module")
def sensitivity(one_block):
    # same data sets as the one-block grid: the design name keys the simulation stream
    curve = {0.0: _tpr(one_block["potts"])}
    for r in (0.1, 0.3, 0.5):
        curve[r] = _tpr(_grid(preset("one_block", graph_perturbation=r), ["potts"])["potts"])
    return curve


def _band(x, target, tol=0.15):
    return abs(x - target) <= tol


def test_criterion_01_one_block_table(one_block):
    means = {m: _tpr(rows).mean() for m, rows in one_block.items()}
    targets = {"potts": 0.93, "corrs": 0.78, "gmm": 0.45}
    ok = all(_band(means[m], t) for m, t in targets.items())
    detail = ", ".join(f"{m} TPR {means[m]:.3f} (target {t}+-0.15)" for m, t in targets.items())
    report(1, ok, f"one-block R={REPLICATES}: {detail}")


def test_criterion_02_two_block_ordering(two_blocks):
    c, p = _tpr(two_blocks["corrs"]), _tpr(two_blocks["potts"])
    wins = int((c > p).sum())
    need = math.ceil(0.75 * REPLICATES)
    ok = _band(c.mean(), 0.62) and wins >= need
    report(2, ok, f"two-block R={REPLICATES}: corrs TPR {c.mean():.3f} (target 0.62+-0.15), potts {p.mean():.3f}; "
                  f"corrs > potts in {wins}/{REPLICATES} (need >= {need})")


def test_criterion_03_no_structure(no_structure):
    c, g = _tpr(no_structure["corrs"]).mean(), _tpr(no_structure["gmm"]).mean()
    report(3, abs(c - g) <= 0.1, f"identity design R={REPLICATES}: |corrs {c:.3f} - gmm {g:.3f}| = {abs(c - g):.3f} (<= 0.1)")


def test_criterion_04_sensitivity_curve(sensitivity):
    rates = sorted(sensitivity)
    means = [sensitivity[r].mean() for r in rates]
    mono = all(b <= a + 0.07 for a, b in zip(means, means[1:]))
    ends = _band(means[0], 0.93) and _band(means[-1], 0.49)
    curve = ", ".join(f"r={r}: {m:.3f}" for r, m in zip(rates, means))
    report(4, mono and ends, f"potts one-block R={REPLICATES}: {curve}; monotone(+-0.07)={mono}, "
                             f"endpoints 0.93/0.49 +-0.15 {ends}")


def test_criterion_05_empirical_fdr(one_block):
    fdr = {m: np.mean([r.rules["locfdr@0.1"]["fdr"] for r in one_block[m]]) for m in ("potts", "corrs")}
    ok = all(v <= 0.15 for v in fdr.values())
    report(5, ok, f"one-block locfdr@0.1 realized FDR: potts {fdr['potts']:.3f}, corrs {fdr['corrs']:.3f} (<= 0.15)")


def test_criterion_06_potts_exactness():
    rng = make_rng(SEED, 6)
    worst = {}
    cases = {
        4: ([0.5, 0.0, 0.0, -0.5], [1.0, 1.0, 1.0, 1.0]),
        6: ([0.3, -0.2, 0.1, -0.4], [1.2, 0.4, 0.8, 0.0]),
    }
    for p, (t0, t1) in cases.items():
        g = NeighborGraph.path(p)
        logm = rng.normal(0, 0.7, size=(p, 4))
        exact = oracles.potts_enumerate(p, g.edges, t0, t1, logm)
        emp = label_marginals(PottsState(t0, t1, g), logm, 10**6, rng, sw_every=1)
        worst[p] = float(0.5 * np.abs(emp - exact).sum(axis=1).max())
    ok = all(v <= 0.01 for v in worst.values())
    report(6, ok, "single-site + SW marginals vs enumeration, max per-site TV: "
                  + ", ".join(f"p={p} {v:.4f}" for p, v in worst.items()) + " (<= 0.01)")


def test_criterion_07_pg_augmentation():
    rng = make_rng(SEED, 7)
    D = np.array([[1.0, 0.6], [0.6, 1.0]])
    hyper = Hyperparameters(corrs_prior_mean=(-1.0, 0.5, 0.0))
    worst_mean, worst_sd = 0.0, 0.0
    # (labels, block): block 0 sees (1, 0) successes, block 1 sees labels 2 vs 3
    for gamma, k in (((1, 4), 0), ((2, 3), 1), ((4, 4), 2)):
        gamma = np.array(gamma, dtype=np.int64)
        st = CorrSState.initial(D, hyper)
        st.sigma_d2[:] = 3.0
        n_iter, burn = 200_000, 1000
        draws = np.empty((n_iter, 2))
        for t in range(n_iter + burn):
            update_pg_auxiliaries(gamma, st, rng)
            update_b_block(k, gamma, st, rng)
            if t >= burn:
                draws[t - burn] = st.b[k]
        n_k = (gamma > k).astype(int)
        y = (gamma == k + 1).astype(int)
        mean, sd, _ = oracles.logistic_block_posterior_grid(y, n_k, st.a[k], 3.0, D)
        worst_mean = max(worst_mean, float(np.abs(draws.mean(0) - mean).max()))
        worst_sd = max(worst_sd, float(np.abs(draws.std(0) / sd - 1).max()))
    ok = worst_mean <= 0.05 and worst_sd <= 0.10
    report(7, ok, f"p=2 PG chain vs grid posterior: max |mean diff| {worst_mean:.4f} (<= 0.05), "
                  f"max relative SD diff {worst_sd:.4f} (<= 0.10)")


def test_criterion_08_conjugate_suite():
    results = conjugate_suite.run_all(make_rng(SEED, 8), draws=10**4)
    bad = [r for r in results if r.z > 4.0]
    worst = max(results, key=lambda r: r.z)
    report(8, not bad, f"{len(results)} conditional moment checks at 10^4 draws; worst {worst.name} at "
                       f"{worst.z:.2f} SE (<= 4)" + (f"; failing: {[r.name for r in bad]}" if bad else ""))


def test_criterion_09_pg_moments():
    rng = make_rng(SEED, 9)
    n = 10**5
    zs = {}
    for c in (0.0, 0.5, 1.0, 2.0, 4.0):
        x = sample_polya_gamma_array(np.ones(n, dtype=np.int64), np.full(n, c), rng)
        zs[c] = abs(x.mean() - oracles.pg_mean(c)) / math.sqrt(oracles.pg_var(c) / n)
    ok = all(z <= 3 for z in zs.values())
    report(9, ok, "E[PG(1,c)] vs tanh(c/2)/(2c): " + ", ".join(f"c={c} {z:.2f}SE" for c, z in zs.items()) + " (<= 3)")


def test_criterion_10_locfdr_bruteforce():
    rng = make_rng(SEED, 10)
    mismatches = 0
    for i in range(1000):
        p = int(rng.integers(1, 60))
        v = rng.beta(0.5, 0.5, size=p)
        if i % 3 == 0:
            v = np.round(v, 1)  # ties
        target = float(rng.uniform(0.02, 0.5))
        sel = locfdr_threshold(v, target)[1]
        if not np.array_equal(np.sort(sel), oracles.locfdr_bruteforce(v, target)):
            mismatches += 1
    report(10, mismatches == 0, f"locfdr selection vs brute force on 1000 random inputs: {mismatches} mismatches")


@pytest.mark.skipif(os.environ.get("CORRMED_LARGE") != "1", reason="long; set CORRMED_LARGE=1")
def test_criterion_11_large_scale():
    design = preset("large_five_blocks")
    config = SamplerConfig(iterations=5000, burnin=2000, thin=5)
    t0 = time.perf_counter()
    res = run_grid([design], ["potts"], config, Hyperparameters(), SEED, 0.1)
    per_rep = (time.perf_counter() - t0) / len(res)
    tpr = np.mean([r.tpr for r in res])
    ok = tpr >= 0.85 and per_rep <= 3600 and not any(r.error for r in res)
    report(11, ok, f"n=1000 p=2000 five-block, {len(res)} replicates at 5000 iterations: potts TPR {tpr:.3f} "
                   f"(>= 0.85), {per_rep / 60:.1f} min/replicate (<= 60)")
