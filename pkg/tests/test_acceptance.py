"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import time

import numpy as np
import pytest
from scipy import stats

import oracles
from crossed_gibbs.autoregression import (
    build_B1_B2,
    build_M,
    phi_upsilon,
    relaxation_time,
    spectral_norm,
    spectral_radius,
)
from crossed_gibbs.diagnostics import effective_sample_size, summarize_trace
from crossed_gibbs.missingness import (
    RegimeSpec,
    SupercriticalDensityError,
    make_pattern,
    sample_Z,
    simulate,
)
from crossed_gibbs.model import LatentState, ObservationSet, VarianceComponents
from crossed_gibbs.samplers import (
    SamplerConfig,
    collapsed_sweep,
    precision_posterior,
    run_chain,
    vanilla_sweep,
)
from crossed_gibbs.seeding import make_rng
from crossed_gibbs.theory_lab import (
    latala_ratio,
    norm_medians,
    norm_vs_S_experiment,
    theorem_surrogate,
    verify_row_col_concentration,
    verify_Z_norm_bound,
)

S_GRID = [1e3, 10**3.5, 1e4]
VC1 = VarianceComponents(1.0, 1.0, 1.0)


def complete_obs(R, C, seed=0):
    rows, cols = np.divmod(np.arange(R * C), C)
    y = 2.0 + np.random.default_rng(seed).normal(size=R * C)
    return ObservationSet.from_triplets(rows, cols, y, R, C)


def small_instances(n, seed):
    """Random instances with R, C <= 32 drawn across all three regimes."""
    rng = np.random.default_rng(seed)
    regimes = ("mcar", "bounded", "balanced")
    out = []
    while len(out) < n:
        regime = regimes[len(out) % 3]
        spec = RegimeSpec(float(rng.uniform(30, 900)), float(rng.uniform(0.35, 0.62)),
                          float(rng.uniform(0.35, 0.62)), regime,
                          float(rng.uniform(1.0, 2.0)), 0.1, int(rng.integers(2**31)))
        if spec.R > 32 or spec.C > 32:
            continue
        try:
            _, obs, _ = simulate(spec)
        except SupercriticalDensityError:
            continue
        if obs.total == 0:
            continue
        vc = VarianceComponents(*rng.uniform(0.2, 5.0, size=3))
        out.append((obs, vc))
    return out


def test_01_M_equals_coefficient_product(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for obs, vc in small_instances(50, seed=2024):
        M, _ = build_M(obs, vc)
        B1, B2 = build_B1_B2(obs, vc)
        worst = max(worst, float(np.abs(M - B2 @ B1).max()))
    elapsed = time.perf_counter() - t0
    ok = criterion(1, "M == B2 B1 on 50 instances", worst < 1e-10 and elapsed < 10,
                   f"max |M - B2B1| = {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_02_complete_degeneracy(criterion):
    rows, cols = np.divmod(np.arange(400), 20)
    obs = ObservationSet.from_triplets(rows, cols, np.zeros(400), 20, 20)
    M, _ = build_M(obs, VC1)
    norm = spectral_norm(M)
    t_rel = relaxation_time(spectral_radius(M))
    ok = criterion(2, "complete 20x20 gives M = 0", norm < 1e-12 and t_rel == 1.0,
                   f"||M|| = {norm:.2e}, t_rel = {t_rel!r}")
    assert ok


def _moment_check(draws, mean, cov, k=3.0):
    """Largest |error| / MC-SE over all means and covariance entries."""
    centered = draws - mean
    worst = 0.0
    d = draws.shape[1]
    for a in range(d):
        worst = max(worst, abs(draws[:, a].mean() - mean[a]) / oracles.batch_means_se(draws[:, a]))
        for b in range(a, d):
            prod = centered[:, a] * centered[:, b]
            worst = max(worst, abs(prod.mean() - cov[a, b]) / oracles.batch_means_se(prod))
    return worst


def test_03_posterior_oracle(criterion):
    obs = complete_obs(3, 3, seed=11)
    mean, cov = oracles.gaussian_posterior(obs.rows, obs.cols, obs.y, 3, 3, 1.0, 1.0, 1.0)
    n = 200_000
    t0 = time.perf_counter()
    worst = {}
    for kind, sweep in (("collapsed", collapsed_sweep), ("vanilla", vanilla_sweep)):
        rng = make_rng(31, "acceptance-posterior", 0 if kind == "collapsed" else 1)
        state = LatentState.zeros(3, 3)
        draws = np.empty((n, 6))
        for t in range(n):
            state = sweep(state, obs, VC1, rng)
            draws[t, :3] = state.a1
            draws[t, 3:] = state.a2
        worst[kind] = _moment_check(draws, mean[1:], cov[1:, 1:])
    elapsed = time.perf_counter() - t0
    ok = criterion(3, "posterior mean/cov within 3 MC-SE", max(worst.values()) < 3 and elapsed < 60,
                   f"worst z: collapsed {worst['collapsed']:.2f}, vanilla {worst['vanilla']:.2f}; "
                   f"{elapsed:.1f} s")
    assert ok


@pytest.mark.slow
def test_04_mcar_norm_surrogate(criterion):
    t0 = time.perf_counter()
    rows = norm_vs_S_experiment(0.52, 0.52, 1.0, S_GRID, 20, VC1, regime="mcar", seed=4)
    med = list(norm_medians(rows).values())
    top = [r["norm"] for r in rows if r["S"] == S_GRID[-1]]
    frac = float(np.mean(np.array(top) < 0.5))
    monotone = all(b <= a for a, b in zip(med, med[1:]))
    elapsed = time.perf_counter() - t0
    ok = criterion(4, "MCAR ||M|| < 0.5 w.p. >= 0.95, medians nonincreasing",
                   frac >= 0.95 and monotone and elapsed < 300,
                   f"fraction {frac:.2f}, medians {[round(m, 4) for m in med]}, {elapsed:.1f} s")
    assert ok


@pytest.mark.slow
def test_05_bounded_radius_surrogate(criterion):
    phi = phi_upsilon(1.52)
    threshold = 1 - phi + 0.05
    spec = RegimeSpec(1e4, 0.6, 0.6, "bounded", 1.52, seed=5)
    t0 = time.perf_counter()
    rep = theorem_surrogate(spec, threshold, "radius", 20, 0.95, VC1)
    elapsed = time.perf_counter() - t0
    radii = [d["radius"] for d in rep.details]
    ok = criterion(5, "bounded (U=1.52) rho(M) <= 1 - phi + 0.05 w.p. >= 0.95",
                   rep.passed and phi >= 0.0143 and elapsed < 300,
                   f"phi(1.52) = {phi:.5f}, fraction {rep.observed:.2f}, max rho {max(radii):.4f}, "
                   f"{elapsed:.1f} s")
    assert ok


@pytest.mark.slow
def test_06_balanced_radius_surrogate(criterion):
    spec = RegimeSpec(1e4, 0.6, 0.6, "balanced", 3.0, 0.05, seed=6)
    t0 = time.perf_counter()
    rep = theorem_surrogate(spec, 0.99, "radius", 20, 0.95, VC1)
    elapsed = time.perf_counter() - t0
    radii = [d["radius"] for d in rep.details]
    ok = criterion(6, "balanced (U=3) rho(M) <= 0.99 w.p. >= 0.95", rep.passed and elapsed < 300,
                   f"fraction {rep.observed:.2f}, max rho {max(radii):.4f}, {elapsed:.1f} s")
    assert ok


def test_07_concentration(criterion):
    t0 = time.perf_counter()
    rep = verify_row_col_concentration(RegimeSpec(1e4, 0.52, 0.52, seed=7), 0.2, 100)
    elapsed = time.perf_counter() - t0
    ok = criterion(7, "row/col envelope violations <= union bound", rep.passed and elapsed < 120,
                   f"violation fraction {rep.observed:.2f} <= bound {rep.bound:.3g}, {elapsed:.1f} s")
    assert ok


def test_08_Z_norm_bound(criterion):
    violations = 0
    instances = 0
    for k, regime in enumerate(("mcar", "bounded", "balanced")):
        spec = RegimeSpec(1e3, 0.6, 0.6, regime, 1.5, 0.1, seed=8 + k)
        pattern = make_pattern(spec)
        n = 67 if k < 2 else 66
        for r in range(n):
            violations += not verify_Z_norm_bound(sample_Z(pattern, 1000 * k + r)).passed
            instances += 1
    ok = criterion(8, "||Z|| <= sqrt(max row * max col)", violations == 0 and instances == 200,
                   f"{violations} violations in {instances} instances")
    assert ok


def test_09_latala_ratio(criterion):
    ratios = [latala_ratio(RegimeSpec(S, 0.52, 0.52, seed=9), 20, 3.0).observed for S in S_GRID]
    ok = criterion(9, "Latala ratio below cap 3", max(ratios) < 3.0,
                   f"ratios {[round(r, 3) for r in ratios]}")
    assert ok


def _chain_ess(S, kind, fix_precisions, iterations=11_000, burn_in=1_000, seed=10):
    _, obs, _ = simulate(RegimeSpec(S, 0.52, 0.52, seed=seed))
    cfg = SamplerConfig(kind, iterations, burn_in, fix_precisions, seed)
    sm = summarize_trace(run_chain(obs, VC1, cfg), ["a0", "mu1", "mu2"])
    return {k: r.ess for k, r in sm.ess.items()}


@pytest.mark.slow
def test_10_ess_separation(criterion):
    t0 = time.perf_counter()
    col = _chain_ess(1e4, "collapsed", fix_precisions=False)
    van = _chain_ess(1e4, "vanilla", fix_precisions=False)
    elapsed = time.perf_counter() - t0
    ratio = col["a0"] / van["a0"]
    ok = criterion(10, "ESS(collapsed a0)/ESS(vanilla a0) >= 5, collapsed mu ESS >= 1000",
                   ratio >= 5 and col["mu1"] >= 1000 and col["mu2"] >= 1000 and elapsed < 600,
                   f"a0 {col['a0']:.0f} vs {van['a0']:.0f} (ratio {ratio:.1f}), "
                   f"mu1 {col['mu1']:.0f}, mu2 {col['mu2']:.0f}, {elapsed:.1f} s")
    assert ok


@pytest.mark.slow
def test_11_ess_flatness(criterion):
    col = [_chain_ess(S, "collapsed", True)["mu1"] for S in S_GRID]
    van = [_chain_ess(S, "vanilla", True)["mu1"] for S in S_GRID]
    spread = max(col) / min(col)
    ok = criterion(11, "collapsed mu1 ESS flat in S, vanilla halves",
                   spread < 3 and van[-1] <= 0.5 * van[0],
                   f"collapsed {[round(v) for v in col]} (spread {spread:.2f}), "
                   f"vanilla {[round(v) for v in van]}")
    assert ok


def test_12_numerical_kernels(criterion):
    rng = np.random.default_rng(12)
    norm_err = 0.0
    for _ in range(10):
        A = rng.normal(size=(20, 20))
        ref = float(np.sqrt(np.linalg.eigh(A.T @ A)[0][-1]))
        norm_err = max(norm_err, abs(spectral_norm(A) - ref))

    n = 100_000
    ess = effective_sample_size(oracles.ar1(0.9, n, np.random.default_rng(13))).ess
    ess_rel = abs(ess / (n * 0.1 / 1.9) - 1)

    obs = complete_obs(4, 3)
    state = LatentState(1.0, np.array([0.3, -0.8, 1.1, 0.2]), np.array([0.5, -0.4, 0.1]))
    grid_err = 0.0
    for name, (shape, rate) in precision_posterior(state, obs).items():
        k = {"tau1": 4, "tau2": 3, "tauE": 12}[name]
        q = 2 * rate
        tau = np.linspace(1e-3, 20 * k / q, 1000)
        log_kernel = (k / 2 - 1.5) * np.log(tau) - tau * q / 2
        log_pdf = stats.gamma.logpdf(tau, a=shape, scale=1 / rate)
        diff = log_pdf - log_kernel
        grid_err = max(grid_err, float(np.max(np.abs(np.exp(diff - diff[0]) - 1))))

    ok = criterion(12, "kernel oracles (norm, AR(1) ESS, Gamma grid)",
                   norm_err < 1e-8 and ess_rel < 0.15 and grid_err < 1e-10,
                   f"norm err {norm_err:.1e}, ESS rel err {ess_rel:.3f}, grid rel err {grid_err:.1e}")
    assert ok
