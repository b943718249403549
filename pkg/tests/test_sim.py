import math
import os

import numpy as np
import pytest
from scipy import stats as sps

from corrmed import sim
from corrmed.model import Hyperparameters, SamplerConfig
from corrmed.sim import (
    ReplicateResult,
    SimDesign,
    gen_block_covariance,
    gen_dataset,
    gen_effects,
    gen_labels,
    preset,
    run_grid,
    simulate_replicate,
    summarize,
    weak_correlation_surrogate,
)

TINY = SamplerConfig(iterations=60, burnin=20, thin=2)


def test_exact_active_count_and_placement():
    rng = np.random.default_rng(0)
    for name, blocks in (("one_block", 1), ("two_blocks", 2)):
        d = preset(name)
        for _ in range(20):
            gamma = gen_labels(d, rng)
            act = np.flatnonzero(gamma == 1)
            assert act.size == 10
            assert np.unique(act // d.block_size).size == blocks
            assert act.max() < d.n_blocks * d.block_size


def test_inactive_labels_follow_renormalized_proportions():
    d = preset("one_block")
    rng = np.random.default_rng(1)
    g = np.concatenate([gen_labels(d, rng) for _ in range(200)])
    g = g[g > 1]
    freq = np.bincount(g, minlength=5)[2:] / g.size
    assert np.allclose(freq, np.array([0.05, 0.10, 0.80]) / 0.95, atol=0.01)


def test_effects_match_components():
    d = preset("one_block")
    rng = np.random.default_rng(2)
    pairs = []
    for _ in range(1000):
        beta, alpha, gamma = gen_effects(d, rng)
        assert np.all(beta[gamma == 4] == 0) and np.all(alpha[gamma == 4] == 0)
        assert np.all(alpha[gamma == 2] == 0) and np.all(beta[gamma == 3] == 0)
        pairs.append(np.column_stack([beta[gamma == 1], alpha[gamma == 1]]))
    pairs = np.concatenate(pairs)
    assert pairs.shape[0] == 10**4
    assert np.abs(np.cov(pairs.T) - np.array([[0.5, 0.2], [0.2, 0.5]])).max() < 0.02


def test_infeasible_placement():
    with pytest.raises(ValueError, match="cannot place"):
        gen_labels(preset("one_block", block_size=5, n_blocks=10), np.random.default_rng(0))
    with pytest.raises(ValueError, match="needs 5 blocks"):
        gen_labels(preset("one_block", placement="five_blocks", n_blocks=2), np.random.default_rng(0))


def test_design_validation():
    with pytest.raises(ValueError):
        SimDesign(pi=(0.5, 0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        SimDesign(replicates=0)
    with pytest.raises(ValueError, match="unknown design field"):
        SimDesign.from_dict({"rho": 0.5})
    d = preset("two_blocks", n=50)
    assert SimDesign.from_dict(d.to_dict()) == d
    with pytest.raises(ValueError, match="unknown preset"):
        preset("three_blocks")


def test_affine_block_covariance():
    S = gen_block_covariance(preset("one_block"))
    assert S[0, 9] == pytest.approx(0.23)
    assert S[0, 1] == pytest.approx(0.47)
    assert S[0, 10] == 0.0 and S[150, 151] == 0.0
    assert np.array_equal(gen_block_covariance(preset("identity")), np.eye(200))
    strong = gen_block_covariance(preset("strong_one_block"))
    assert strong[0, 9] == pytest.approx(0.45) and strong[0, 10] == pytest.approx(0.1)


@pytest.mark.parametrize("name", ["one_block", "two_blocks", "identity", "weak_surrogate", "strong_one_block", "large_five_blocks"])
def test_designs_positive_definite(name):
    S = gen_block_covariance(preset(name))
    np.linalg.cholesky(S)
    assert np.allclose(np.diag(S), 1.0)


def test_negative_affine_entries_floored():
    d = preset("one_block", block_size=20, n_blocks=5, rho_c0=0.9, rho_c1=0.05)
    S = gen_block_covariance(d)
    assert S[0, 19] >= 0.0 and S.min() >= -1e-9
    np.linalg.cholesky(S)


def test_weak_surrogate_fraction():
    C = weak_correlation_surrogate(300, rng=np.random.default_rng(3))
    iu = np.triu_indices(300, 1)
    frac = np.mean(np.abs(C[iu]) > 0.2)
    assert abs(frac - 0.03) < 0.005
    np.linalg.cholesky(C)


def test_zero_effects_identity_noise_is_standard_normal():
    d = preset("identity", n=2000, p=20, n_blocks=2)
    p = d.p
    ds = gen_dataset(d, (np.zeros(p), np.zeros(p), np.full(p, 4)), np.eye(p), np.random.default_rng(4))
    pvals = [sps.kstest(ds.M[:, j], "norm").pvalue for j in range(p)]
    # Bonferroni at 1%
    assert min(pvals) > 0.01 / p
    assert sps.kstest(ds.A, "norm").pvalue > 0.01
    assert ds.q == 0


def test_regression_recovers_coefficients():
    d = preset("one_block", n=10**4, p=20, n_blocks=2, pi=(0.5, 0.1, 0.1, 0.3))
    rng = np.random.default_rng(5)
    beta, alpha, gamma = gen_effects(d, rng)
    ds = gen_dataset(d, (beta, alpha, gamma), gen_block_covariance(d), rng)
    X = np.column_stack([ds.M, ds.A])
    coef, *_ = np.linalg.lstsq(X, ds.Y, rcond=None)
    resid = ds.Y - X @ coef
    s2 = resid @ resid / (d.n - X.shape[1])
    se = np.sqrt(s2 * np.diag(np.linalg.inv(X.T @ X)))
    assert np.all(np.abs(coef - np.append(beta, d.beta_a)) < 3 * se)
    # mediator model: per-column regression on A recovers alpha
    a_hat = ds.M.T @ ds.A / (ds.A @ ds.A)
    assert np.all(np.abs(a_hat - alpha) < 3 / math.sqrt(d.n) * 1.1)


def test_generated_mediator_correlation_matches_cov():
    d = preset("one_block", n=1000)
    rep = simulate_replicate(d, 0, 9)
    resid = rep.dataset.M - np.outer(rep.dataset.A, rep.alpha_a)
    blk = np.arange(d.p) // d.block_size
    within = (blk[:, None] == blk[None, :]) & (np.arange(d.p) < 100)
    assert np.abs(np.corrcoef(resid.T) - rep.cov)[within].max() < 0.1


def test_simulation_deterministic_under_seed():
    d = preset("one_block")
    a, b = simulate_replicate(d, 3, 11), simulate_replicate(d, 3, 11)
    assert a.dataset.M.tobytes() == b.dataset.M.tobytes() and a.dataset.Y.tobytes() == b.dataset.Y.tobytes()
    assert np.array_equal(a.labels, b.labels)
    c = simulate_replicate(d, 4, 11)
    assert not np.array_equal(a.dataset.M, c.dataset.M)
    # perturbation settings do not change the data stream
    e = simulate_replicate(preset("one_block", graph_perturbation=0.3), 3, 11)
    assert np.array_equal(a.dataset.M, e.dataset.M)


def test_grid_deterministic_and_paired():
    d = preset("one_block", n=40, p=30, n_blocks=3)
    r1 = run_grid([d], ["gmm", "potts", "corrs"], TINY, Hyperparameters(), 7, replicates=2)
    r2 = run_grid([d], ["gmm", "potts", "corrs"], TINY, Hyperparameters(), 7, replicates=2)
    assert len(r1) == 6 and not any(r.error for r in r1)
    strip = lambda rs: [{k: v for k, v in r.flat().items() if k != "wall_time"} for r in rs]
    assert strip(r1) == strip(r2)
    for r in r1:
        assert np.isfinite(r.tpr) and set(r.rules) == {"locfdr@0.1", "pip>0.5", "pip>0.9"}


def test_replicate_failures_are_recorded(monkeypatch):
    def boom(*args, **kwargs):
        raise FloatingPointError("diverged")

    monkeypatch.setattr(sim, "fit_chain", boom)
    d = preset("one_block", n=40, p=30, n_blocks=3)
    res = run_grid([d], ["gmm"], TINY, Hyperparameters(), 1, replicates=2)
    assert len(res) == 2 and all("FloatingPointError" in r.error for r in res)
    row = summarize(res)[0]
    assert row["failures"] == 2 and math.isnan(row["tpr"])


def test_summary_standard_errors():
    tprs = [0.2, 0.5, 0.9, 0.6]
    res = [ReplicateResult("d", "gmm", i, tpr=t, mse_nonnull=0.1, mse_null=0.0, wall_time=1.0,
                           rules={"locfdr@0.1": {"tpr": t, "fdr": 0.0}}) for i, t in enumerate(tprs)]
    row = summarize(res)[0]
    assert row["tpr"] == pytest.approx(np.mean(tprs))
    assert row["tpr_se"] == pytest.approx(np.std(tprs, ddof=1) / 2)
    assert row["tpr[locfdr@0.1]"] == pytest.approx(np.mean(tprs))
    assert "0.55" in sim.format_table(summarize(res))


@pytest.mark.skipif(os.environ.get("CORRMED_LARGE") != "1", reason="long; set CORRMED_LARGE=1")
def test_weak_surrogate_corrs_close_to_gmm():
    res = run_grid([preset("weak_surrogate")], ["gmm", "corrs"], SamplerConfig(iterations=15000, burnin=5000, thin=10),
                   Hyperparameters(), 20240501, replicates=20)
    tpr = {m: np.mean([r.tpr for r in res if r.method == m]) for m in ("gmm", "corrs")}
    assert abs(tpr["corrs"] - tpr["gmm"]) <= 0.1
