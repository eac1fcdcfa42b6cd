"""Bernoulli missingness patterns and synthetic responses.

Three regimes for the cell probabilities p_ij:

* ``mcar``     -- p_ij = S/(RC) for every cell.
* ``bounded``  -- p_ij = U_ij * S^(1 - rho - kappa), U_ij iid uniform on [1, upsilon].
  Probabilities above one are an error unless ``clip`` is set, in which case
  they are capped at one (dense designs such as rho = kappa = 0.52).
* ``balanced`` -- S/(upsilon RC) <= p_ij <= upsilon S/(RC), with every row sum
  within a factor (1 +- eps_target) of S/R and every column sum within
  (1 +- eps_target) of S/C.  Built by clamped Sinkhorn scaling.

R = ceil(S^rho) and C = ceil(S^kappa).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Union

import numpy as np
import scipy.sparse as sp

from .model import LatentState, ObservationSet, VarianceComponents
from .seeding import make_rng

REGIMES = ("mcar", "bounded", "balanced")
SINKHORN_MAX_SWEEPS = 500


class SupercriticalDensityError(ValueError):
    """A requested cell probability exceeds one."""


class SinkhornConvergenceError(RuntimeError):
    def __init__(self, achieved_eps: float, sweeps: int):
        super().__init__(
            f"balanced pattern did not converge in {sweeps} sweeps (achieved eps={achieved_eps:.4g})"
        )
        self.achieved_eps = achieved_eps
        self.sweeps = sweeps


def regime_condition(rho: float, kappa: float) -> bool:
    """True iff rho + kappa/2 < 1 and kappa + rho/2 < 1."""
    if not (0.0 < rho < 1.0 and 0.0 < kappa < 1.0):
        raise ValueError(f"exponents must lie in (0, 1), got rho={rho}, kappa={kappa}")
    return (rho + 0.5 * kappa < 1.0) and (kappa + 0.5 * rho < 1.0)


@dataclass(frozen=True)
class RegimeSpec:
    S: float
    rho: float
    kappa: float
    regime: str = "mcar"
    upsilon: float = 1.0
    eps_target: float = 0.05
    seed: int = 0
    clip: bool = False

    def __post_init__(self):
        if not self.S >= 1:
            raise ValueError("S must be >= 1")
        if not (0.0 < self.rho < 1.0 and 0.0 < self.kappa < 1.0):
            raise ValueError("rho and kappa must lie in (0, 1)")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if self.upsilon < 1.0:
            raise ValueError("upsilon must be >= 1")
        if not (0.0 < self.eps_target < 0.25):
            raise ValueError("eps_target must lie in (0, 0.25)")

    @property
    def R(self) -> int:
        return int(math.ceil(self.S**self.rho - 1e-9))

    @property
    def C(self) -> int:
        return int(math.ceil(self.S**self.kappa - 1e-9))

    @property
    def upsilon_upper(self) -> float:
        return 1.0 if self.regime == "mcar" else float(self.upsilon)

    @property
    def upsilon_lower(self) -> float:
        """Upsilon' in the lower bound p_ij >= base/Upsilon'."""
        return float(self.upsilon) if self.regime == "balanced" else 1.0

    @property
    def base_density(self) -> float:
        if self.regime == "bounded":
            return float(self.S ** (1.0 - self.rho - self.kappa))
        return float(self.S) / (self.R * self.C)

    def with_(self, **changes) -> "RegimeSpec":
        d = asdict(self)
        d.update(changes)
        return RegimeSpec(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RegimeSpec":
        known = {k: d[k] for k in ("S", "rho", "kappa", "regime", "upsilon", "eps_target", "seed", "clip") if k in d}
        return cls(**known)


@dataclass(frozen=True, eq=False)
class ProbabilityPattern:
    R: int
    C: int
    p: np.ndarray
    regime: str = "custom"
    S: float = float("nan")
    base: float = float("nan")
    upsilon: float = 1.0
    upsilon_lower: float = 1.0

    def __post_init__(self):
        if self.p.shape != (self.R, self.C):
            raise ValueError("p has the wrong shape")
        if np.any(self.p < 0) or np.any(self.p > 1) or not np.all(np.isfinite(self.p)):
            raise ValueError("probabilities must lie in [0, 1]")

    @classmethod
    def constant(cls, R: int, C: int, value: float) -> "ProbabilityPattern":
        return cls(R, C, np.full((R, C), float(value)), regime="custom", base=float(value))

    @property
    def expected_row_sums(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def expected_col_sums(self) -> np.ndarray:
        return self.p.sum(axis=0)


def balance_error(p: np.ndarray, S: float) -> float:
    """Largest relative deviation of row sums from S/R and column sums from S/C."""
    R, C = p.shape
    er = np.max(np.abs(p.sum(axis=1) * R / S - 1.0))
    ec = np.max(np.abs(p.sum(axis=0) * C / S - 1.0))
    return float(max(er, ec))


def _sinkhorn_balanced(base: np.ndarray, S: float, lo: float, hi: float, eps: float):
    R, C = base.shape
    p = base.copy()
    row_target, col_target = S / R, S / C
    for sweep in range(1, SINKHORN_MAX_SWEEPS + 1):
        p *= (row_target / p.sum(axis=1))[:, None]
        np.clip(p, lo, hi, out=p)
        p *= (col_target / p.sum(axis=0))[None, :]
        np.clip(p, lo, hi, out=p)
        err = balance_error(p, S)
        if err <= eps:
            return p, sweep
    raise SinkhornConvergenceError(err, SINKHORN_MAX_SWEEPS)


def make_pattern(spec: RegimeSpec) -> ProbabilityPattern:
    R, C = spec.R, spec.C
    base = spec.base_density
    hi = spec.upsilon_upper * base
    if hi > 1.0 + 1e-12 and not (spec.clip and spec.regime == "bounded"):
        raise SupercriticalDensityError(
            f"supercritical density: max cell probability {hi:.4g} > 1 "
            f"(S={spec.S}, rho={spec.rho}, kappa={spec.kappa}, upsilon={spec.upsilon})"
        )
    rng = make_rng(spec.seed, "pattern")
    if spec.regime == "mcar":
        p = np.full((R, C), base)
    elif spec.regime == "bounded":
        p = rng.uniform(1.0, spec.upsilon, size=(R, C)) * base
    else:
        lo = base / spec.upsilon
        start = rng.uniform(1.0 / spec.upsilon, spec.upsilon, size=(R, C)) * base
        p, _ = _sinkhorn_balanced(start, float(spec.S), lo, hi, spec.eps_target)
    np.clip(p, 0.0, 1.0, out=p)
    return ProbabilityPattern(
        R, C, p, regime=spec.regime, S=float(spec.S), base=base,
        upsilon=spec.upsilon_upper, upsilon_lower=spec.upsilon_lower,
    )


def sample_Z(pattern: ProbabilityPattern, seed: int) -> sp.csr_matrix:
    """Independent Bernoulli(p_ij) draws as a sparse 0/1 matrix."""
    rng = make_rng(seed, "Z")
    hits = rng.random((pattern.R, pattern.C)) < pattern.p
    return sp.csr_matrix(hits, dtype=np.float64)


Variances = Union[VarianceComponents, tuple]


def _variances(vc: Variances) -> tuple[float, float, float]:
    if isinstance(vc, VarianceComponents):
        return vc.sigma1_sq, vc.sigma2_sq, vc.sigmaE_sq
    v1, v2, vE = (float(v) for v in vc)
    if min(v1, v2, vE) < 0:
        raise ValueError("variances must be >= 0")
    return v1, v2, vE


def synthesize_responses(Z, vc: Variances, a0_true: float = 2.0, seed: int = 0):
    """Draw effects and noise, fill y at the observed cells of ``Z``.

    ``vc`` is a :class:`VarianceComponents` or a plain ``(sigma1_sq, sigma2_sq,
    sigmaE_sq)`` tuple; the tuple form allows zero variances.

    Returns
    -------
    obs : ObservationSet
    truth : LatentState
        The effects that generated the data.
    """
    Z = sp.coo_matrix(Z)
    R, C = Z.shape
    v1, v2, vE = _variances(vc)
    a1 = make_rng(seed, "a1").standard_normal(R) * math.sqrt(v1)
    a2 = make_rng(seed, "a2").standard_normal(C) * math.sqrt(v2)
    mask = Z.data != 0
    rows, cols = Z.row[mask].astype(np.int64), Z.col[mask].astype(np.int64)
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    e = make_rng(seed, "noise").standard_normal(rows.size) * math.sqrt(vE)
    y = a0_true + a1[rows] + a2[cols] + e
    obs = ObservationSet.from_triplets(rows, cols, y, R, C)
    return obs, LatentState(a0_true, a1, a2)


def simulate(spec: RegimeSpec, vc: Variances = (1.0, 1.0, 1.0), a0_true: float = 2.0):
    """Pattern, observation set and ground truth for one seeded replicate."""
    pattern = make_pattern(spec)
    Z = sample_Z(pattern, spec.seed)
    obs, truth = synthesize_responses(Z, vc, a0_true, spec.seed)
    return pattern, obs, truth
