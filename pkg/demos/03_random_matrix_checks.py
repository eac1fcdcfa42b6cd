"""
Finite-size checks of the random-matrix bounds
==============================================

Row and column counts concentrate, the spectral norm of the 0/1 matrix is
bounded by its largest row and column counts, and the centred matrix
Z - E(Z) has a norm of the order predicted by the Latala-type bracket.
"""

from crossed_gibbs import RegimeSpec, hoeffding_bound, latala_ratio, make_pattern, sample_Z
from crossed_gibbs import verify_row_col_concentration, verify_Z_norm_bound

print(f"binomial tail bound for n=100, t=10: {hoeffding_bound(100, 10):.6f}")

spec = RegimeSpec(S=1e4, rho=0.52, kappa=0.52, seed=0)
rep = verify_row_col_concentration(spec, psi=0.2, replicates=100)
print(f"envelope violations: {rep.observed:.2f} of replicates (union bound {rep.bound:.3g})")

# the bound is tight for a complete block and loose for sparse patterns
pattern = make_pattern(RegimeSpec(S=1e3, rho=0.6, kappa=0.6, regime="bounded", upsilon=1.5, seed=2))
for seed in range(3):
    r = verify_Z_norm_bound(sample_Z(pattern, seed))
    print(f"||Z|| = {r.observed:7.3f}  <=  {r.bound:7.3f}")

for S in (1e3, 10**3.5, 1e4):
    r = latala_ratio(spec.with_(S=S), replicates=20)
    print(f"S = {S:8.0f}   E||Z - EZ|| / bracket = {r.observed:.3f}")
