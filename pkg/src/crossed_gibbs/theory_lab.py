"""Finite-S empirical checks of the concentration and random-matrix bounds.

Each verifier is deterministic in (spec, seed, replicates) and returns a
:class:`VerificationReport`.  Replicate seeds are derived from the spec's
master seed, so reports are reproducible one replicate at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .autoregression import build_M, spectral_norm, spectral_radius
from .missingness import RegimeSpec, make_pattern, sample_Z, synthesize_responses
from .model import VarianceComponents
from .seeding import child_seed

LATALA_CAP = 3.0


@dataclass
class VerificationReport:
    check: str
    parameters: dict
    observed: float
    bound: float
    passed: bool
    direction: str = "observed <= bound"
    details: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "parameters": self.parameters,
            "observed": self.observed,
            "bound": self.bound,
            "passed": bool(self.passed),
            "direction": self.direction,
            "details": self.details,
        }


def hoeffding_bound(n: int, t: float) -> float:
    """exp(-2 t^2 / n): tail bound for Bin(n, p) deviating from np by t."""
    if n < 1 or t < 0:
        raise ValueError("need n >= 1 and t >= 0")
    return math.exp(-2.0 * t * t / n)


def concentration_bound(S: float, rho: float, kappa: float, R: int, C: int, psi: float) -> float:
    """Union bound on leaving the row/column envelope (may exceed 1)."""
    rows = 2 * R * math.exp(-2.0 * S ** (2 - kappa - 2 * rho) * psi**2)
    cols = 2 * C * math.exp(-2.0 * S ** (2 - rho - 2 * kappa) * psi**2)
    return rows + cols


def replicate_specs(spec: RegimeSpec, replicates: int):
    for r in range(replicates):
        yield r, spec.with_(seed=child_seed(spec.seed, "replicate", r))


def _params(spec: RegimeSpec, **extra) -> dict:
    d = {"S": spec.S, "rho": spec.rho, "kappa": spec.kappa, "regime": spec.regime,
         "upsilon": spec.upsilon, "seed": spec.seed, "R": spec.R, "C": spec.C}
    d.update(extra)
    return d


def verify_row_col_concentration(spec: RegimeSpec, psi: float = 0.2,
                                 replicates: int = 100) -> VerificationReport:
    """Fraction of replicates whose row or column sums leave the envelope

        (1/U' - psi) S^{1-rho} <= N_i. <= (U + psi) S^{1-rho}
        (1/U' - psi) S^{1-kappa} <= N_.j <= (U + psi) S^{1-kappa}
    """
    pattern = make_pattern(spec)
    U, Up = spec.upsilon_upper, spec.upsilon_lower
    S = float(spec.S)
    row_lo, row_hi = (1 / Up - psi) * S ** (1 - spec.rho), (U + psi) * S ** (1 - spec.rho)
    col_lo, col_hi = (1 / Up - psi) * S ** (1 - spec.kappa), (U + psi) * S ** (1 - spec.kappa)
    details = []
    violations = 0
    for r, rspec in replicate_specs(spec, replicates):
        Z = sample_Z(pattern, rspec.seed)
        n1 = np.asarray(Z.sum(axis=1)).ravel()
        n2 = np.asarray(Z.sum(axis=0)).ravel()
        bad = bool(n1.min() < row_lo or n1.max() > row_hi or n2.min() < col_lo or n2.max() > col_hi)
        violations += bad
        details.append({"replicate": r, "row_min": float(n1.min()), "row_max": float(n1.max()),
                        "col_min": float(n2.min()), "col_max": float(n2.max()), "violation": bad})
    frac = violations / replicates
    bound = concentration_bound(S, spec.rho, spec.kappa, spec.R, spec.C, psi)
    params = _params(spec, psi=psi, replicates=replicates,
                     row_envelope=[row_lo, row_hi], col_envelope=[col_lo, col_hi])
    return VerificationReport("row_col_concentration", params, frac, bound, frac <= bound, details=details)


def verify_Z_norm_bound(Z) -> VerificationReport:
    """||Z||_2 <= sqrt(max_i N_i. * max_j N_.j)."""
    Z = sp.csr_matrix(Z, dtype=np.float64)
    if Z.nnz == 0:
        raise ValueError("Z has no observed cells")
    n1 = np.asarray(Z.sum(axis=1)).ravel()
    n2 = np.asarray(Z.sum(axis=0)).ravel()
    norm = spectral_norm(Z)
    bound = math.sqrt(n1.max() * n2.max())
    # relative slack for the iterative estimate of the equality case
    ok = norm <= bound * (1 + 1e-9)
    return VerificationReport("Z_norm_bound", {"R": Z.shape[0], "C": Z.shape[1], "N": int(Z.nnz)},
                              norm, bound, ok)


def latala_bracket(S: float, R: int, C: int, upsilon: float) -> float:
    return math.sqrt(upsilon * S / R) + math.sqrt(upsilon * S / C) + (upsilon * S) ** 0.25


def latala_ratio(spec: RegimeSpec, replicates: int = 20, cap: float = LATALA_CAP) -> VerificationReport:
    """Replicate average of ||Z - E Z||_2 divided by the Latała-type bracket."""
    pattern = make_pattern(spec)
    details = []
    norms = []
    for r, rspec in replicate_specs(spec, replicates):
        Z = sample_Z(pattern, rspec.seed)
        X = Z.toarray() - pattern.p
        nrm = spectral_norm(X) if np.any(X) else 0.0
        norms.append(nrm)
        details.append({"replicate": r, "norm": nrm})
    mean_norm = float(np.mean(norms))
    bracket = latala_bracket(float(spec.S), spec.R, spec.C, spec.upsilon_upper)
    ratio = mean_norm / bracket
    params = _params(spec, replicates=replicates, cap=cap, mean_norm=mean_norm, bracket=bracket)
    return VerificationReport("latala_ratio", params, ratio, cap, ratio <= cap, details=details)


def norm_vs_S_experiment(rho: float, kappa: float, upsilon: float, S_grid, replicates: int,
                         vc: VarianceComponents = VarianceComponents(1.0, 1.0, 1.0),
                         regime: str | None = None, seed: int = 0, eps_target: float = 0.05,
                         clip: bool = False):
    """||M||_2 and rho(M) over a grid of problem sizes.

    ``regime`` defaults to ``mcar`` when upsilon == 1 and ``bounded`` otherwise.
    Returns long-format rows with keys S, replicate, norm, radius.
    """
    S_grid = [float(s) for s in S_grid]
    if any(b <= a for a, b in zip(S_grid, S_grid[1:])):
        raise ValueError("S_grid must be strictly ascending")
    if regime is None:
        regime = "mcar" if upsilon == 1 else "bounded"
    rows = []
    for k, S in enumerate(S_grid):
        spec = RegimeSpec(S, rho, kappa, regime, upsilon, eps_target, child_seed(seed, "grid", k), clip)
        for r, rspec in replicate_specs(spec, replicates):
            rows.append(_norm_row(rspec, vc, S, r))
    return rows


def _norm_row(spec: RegimeSpec, vc, S, r) -> dict:
    pattern = make_pattern(spec)
    Z = sample_Z(pattern, spec.seed)
    obs, _ = synthesize_responses(Z, vc, 0.0, spec.seed)
    M, _ = build_M(obs, vc)
    return {"S": S, "replicate": r, "norm": spectral_norm(M), "radius": spectral_radius(M)}


def norm_medians(rows) -> dict[float, float]:
    by_S: dict[float, list[float]] = {}
    for row in rows:
        by_S.setdefault(row["S"], []).append(row["norm"])
    return {S: float(np.median(v)) for S, v in sorted(by_S.items())}


def theorem_surrogate(spec: RegimeSpec, threshold: float, statistic: str = "norm",
                      replicates: int = 20, confidence: float = 0.95,
                      vc: VarianceComponents = VarianceComponents(1.0, 1.0, 1.0)) -> VerificationReport:
    """Finite-S stand-in for a 'with probability tending to one' statement.

    Passes when at least ``confidence`` of the replicates have the chosen
    statistic (``norm`` or ``radius`` of M) at or below ``threshold``.
    """
    if statistic not in ("norm", "radius"):
        raise ValueError("statistic must be 'norm' or 'radius'")
    details = [_norm_row(rspec, vc, float(spec.S), r) for r, rspec in replicate_specs(spec, replicates)]
    hits = sum(d[statistic] <= threshold for d in details)
    frac = hits / replicates
    params = _params(spec, statistic=statistic, threshold=threshold,
                     confidence=confidence, replicates=replicates)
    return VerificationReport(f"theorem_surrogate_{spec.regime}", params, frac, confidence,
                              frac >= confidence, direction="observed >= bound", details=details)
