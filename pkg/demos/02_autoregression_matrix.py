"""
The collapsed sampler as a Gaussian autoregression
==================================================

With the variance components fixed, the factor-2 effects of the collapsed
sampler follow a2(t+1) = M a2(t) + noise.  Build M, check it against the
product of the two one-block coefficient matrices, and watch its norm
shrink as the problem grows.
"""

import numpy as np

from crossed_gibbs import (
    RegimeSpec, VarianceComponents, analyze, build_B1_B2, build_M, norm_vs_S_experiment, simulate,
)
from crossed_gibbs.theory_lab import norm_medians

vc = VarianceComponents(1.0, 1.0, 1.0)

# a small instance: the sparse construction and the dense coefficient form agree
_, obs, _ = simulate(RegimeSpec(S=300, rho=0.55, kappa=0.5, seed=3))
M, _ = build_M(obs, vc)
B1, B2 = build_B1_B2(obs, vc)
print(f"{obs.R}x{obs.C} instance: max |M - B2 B1| = {np.abs(M - B2 @ B1).max():.1e}")

# complete data: every level is balanced, M vanishes and one sweep mixes
_, full, _ = simulate(RegimeSpec(S=400, rho=0.5, kappa=0.5))
print("complete 20x20:", analyze(full, vc).report())

# sparse data with unequal cell probabilities
_, obs, _ = simulate(RegimeSpec(S=1e4, rho=0.6, kappa=0.6, regime="bounded", upsilon=1.52, seed=5))
bundle = analyze(obs, vc)
print(f"bounded, S=1e4: ||M|| = {bundle.spec_norm:.4f}, rho(M) = {bundle.spec_radius:.4f}, "
      f"t_rel = {bundle.t_rel:.3f}")

# norm against problem size
rows = norm_vs_S_experiment(0.52, 0.52, 1.0, [1e3, 10**3.5, 1e4], replicates=10, vc=vc, seed=0)
for S, med in norm_medians(rows).items():
    print(f"S = {S:8.0f}   median ||M|| = {med:.4f}")
