"""Autoregression matrix of the collapsed Gibbs sampler and its spectrum.

With precisions fixed, the a2 chain of the collapsed sampler is a Gaussian
AR(1) process a2(t+1) = M a2(t) + b + noise, where

    M0 = D2^{-1} Z^T (I_R - w1 1_R^T) D1^{-1} Z
    M  = (I_C - w2 1_C^T) M0,

D1 = diag(N_i. + lambda_A), D2 = diag(N_.j + lambda_B).  Equivalently
M = B2 B1 where B1, B2 are the coefficient matrices of E(a1 | a2) and
E(a2 | a1).  The relaxation time is 1 / (1 - spectral_radius(M)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import ObservationSet, VarianceComponents, level_weights, shrinkage_factors

DENSE_NORM_LIMIT = 64
DENSE_RADIUS_LIMIT = 512


class PowerIterationError(RuntimeError):
    def __init__(self, message: str, estimate: float, vector: np.ndarray):
        super().__init__(message)
        self.estimate = estimate
        self.vector = vector


class NonGeometricError(ValueError):
    pass


def _factor_parts(obs: ObservationSet, vc: VarianceComponents):
    s1, s2 = shrinkage_factors(obs, vc)
    w1, w2 = level_weights(s1, s2)
    d1 = obs.row_counts + vc.lambda_A
    d2 = obs.col_counts + vc.lambda_B
    return w1, w2, d1, d2


def build_M(obs: ObservationSet, vc: VarianceComponents) -> tuple[np.ndarray, np.ndarray]:
    """Return (M, M0) as dense C x C arrays; Z stays sparse throughout."""
    w1, w2, d1, d2 = _factor_parts(obs, vc)
    X = sp.diags(1.0 / d1) @ obs.Z                       # D1^{-1} Z, R x C sparse
    u = np.asarray(X.sum(axis=0)).ravel()                # 1_R^T D1^{-1} Z
    ZtX = (obs.Zt @ X).toarray()                         # Z^T D1^{-1} Z
    M0 = ZtX - np.outer(obs.Zt @ w1, u)                  # Z^T (I - w1 1^T) D1^{-1} Z
    M0 /= d2[:, None]
    M = M0 - np.outer(w2, M0.sum(axis=0))
    return M, M0


def build_B1_B2(obs: ObservationSet, vc: VarianceComponents) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient matrices of E(a1 | a2) = B1 a2 + b1 and E(a2 | a1) = B2 a1 + b2.

    B1[i, j] = -Z_ij/(N_i. + lambda_A) + w1_i u_j,  u_j = sum_i' Z_i'j/(N_i'. + lambda_A)
    B2[j, i] = -Z_ij/(N_.j + lambda_B) + w2_j l_i,  l_i = sum_j' Z_ij'/(N_.j' + lambda_B)
    """
    w1, w2, d1, d2 = _factor_parts(obs, vc)
    Zd = obs.Z.toarray()
    A1 = Zd / d1[:, None]
    A2 = Zd.T / d2[:, None]
    u = A1.sum(axis=0)
    l = A2.sum(axis=0)
    B1 = -A1 + np.outer(w1, u)
    B2 = -A2 + np.outer(w2, l)
    return B1, B2


def _as_operator(A):
    if sp.issparse(A) or isinstance(A, spla.LinearOperator):
        return spla.aslinearoperator(A)
    return np.asarray(A, dtype=np.float64)


def spectral_norm(A, tol: float = 1e-12, max_iter: int = 20_000, seed: int = 0,
                  dense_limit: int = DENSE_NORM_LIMIT) -> float:
    """Largest singular value of ``A``.

    Small problems (min dimension <= ``dense_limit``) use a dense symmetric
    eigensolver on A^T A.  Otherwise power iteration on A^T A from a seeded
    random unit vector, stopping when the relative change of the Rayleigh
    quotient is below ``tol`` on two successive iterations.
    """
    m, n = A.shape
    if m == 0 or n == 0:
        return 0.0
    if min(m, n) <= dense_limit:
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
        if not np.all(np.isfinite(Ad)):
            raise ValueError("matrix has non-finite entries")
        G = Ad.T @ Ad if n <= m else Ad @ Ad.T
        return math.sqrt(max(float(sla.eigvalsh(G)[-1]), 0.0))

    op = _as_operator(A)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam_prev = None
    streak = 0
    lam = 0.0
    for _ in range(max_iter):
        Ax = op @ x
        y = op.T @ Ax if isinstance(op, np.ndarray) else op.rmatvec(Ax)
        lam = float(np.dot(x, y))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        if lam_prev is not None and abs(lam - lam_prev) <= tol * abs(lam):
            streak += 1
            if streak >= 2:
                return math.sqrt(max(lam, 0.0))
        else:
            streak = 0
        lam_prev = lam
    raise PowerIterationError(
        f"power iteration did not converge in {max_iter} iterations", math.sqrt(max(lam, 0.0)), x
    )


def spectral_radius(A, tol: float = 1e-10, dense_limit: int = DENSE_RADIUS_LIMIT,
                    seed: int = 0, restarts: int = 8, max_iter: int = 5_000) -> float:
    """Largest eigenvalue magnitude of a square matrix.

    Dense eigendecomposition up to ``dense_limit``; beyond that, power
    iteration with ``restarts`` random starts keeping the largest
    Rayleigh-quotient magnitude.  The power path is approximate when the
    leading eigenvalues are complex (see :func:`radius_is_exact`).
    """
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("spectral radius needs a square matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    n = A.shape[0]
    if n == 0:
        return 0.0
    if n <= dense_limit:
        return float(np.max(np.abs(sla.eigvals(A))))

    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(restarts):
        x = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        prev = None
        for _ in range(max_iter):
            y = A @ x
            rq = abs(float(np.dot(x, y)))
            ny = np.linalg.norm(y)
            if ny == 0.0:
                rq = 0.0
                break
            x = y / ny
            if prev is not None and abs(rq - prev) <= tol * max(rq, 1e-300):
                break
            prev = rq
        best = max(best, rq)
    return best


def radius_is_exact(n: int, dense_limit: int = DENSE_RADIUS_LIMIT) -> bool:
    return n <= dense_limit


def relaxation_time(spec_radius: float) -> float:
    """t_rel = 1 / (1 - spectral radius)."""
    if not spec_radius >= 0:
        raise ValueError("spectral radius must be >= 0")
    if spec_radius >= 1.0:
        raise NonGeometricError(f"non-geometric chain: spectral radius {spec_radius} >= 1")
    return 1.0 / (1.0 - spec_radius)


def phi_upsilon(U: float) -> float:
    """Gap function 1/U^3 - (U - 1)^2 for the bounded-inhomogeneity regime."""
    if U < 1:
        raise ValueError("upsilon must be >= 1")
    return 1.0 / U**3 - (U - 1.0) ** 2


def phi_bound(U: float) -> float:
    """1 - phi(U): the limiting bound on the norm of the deterministic comparison matrix."""
    return 1.0 - phi_upsilon(U)


def build_M_prime(pattern, split: str = "full") -> np.ndarray:
    """Deterministic comparison matrices built from expected counts.

    With Nbar_i. = sum_j p_ij, Nbar_.j = sum_i p_ij, Dbar1, Dbar2 their
    diagonals and Zbar = (p_ij):

        factor1: (I_R - (1/R) Dbar1^{1/2} 1 1^T Dbar1^{-1/2}) Dbar1^{-1/2} Zbar Dbar2^{-1/2}
        factor2: (I_C - (1/C) Dbar2^{1/2} 1 1^T Dbar2^{-1/2}) Dbar2^{-1/2} Zbar^T Dbar1^{-1/2}
        full:    factor2 @ factor1
    """
    p = np.asarray(getattr(pattern, "p", pattern), dtype=np.float64)
    R, C = p.shape
    n1 = p.sum(axis=1)
    n2 = p.sum(axis=0)
    if np.any(n1 <= 0) or np.any(n2 <= 0):
        raise ValueError("every expected row and column sum must be positive")
    r1, r2 = np.sqrt(n1), np.sqrt(n2)
    K = p / r1[:, None] / r2[None, :]                   # Dbar1^{-1/2} Zbar Dbar2^{-1/2}

    def centered(core, root):
        # (I - (1/k) root 1^T diag(1/root)) core
        k = root.size
        return core - np.outer(root, (core / root[:, None]).sum(axis=0)) / k

    if split == "factor1":
        return centered(K, r1)
    if split == "factor2":
        return centered(K.T, r2)
    if split == "full":
        return centered(K.T, r2) @ centered(K, r1)
    raise ValueError(f"unknown split {split!r}")


@dataclass
class AutoregressionBundle:
    M: np.ndarray = field(repr=False)
    M0: np.ndarray = field(repr=False)
    B1: np.ndarray | None = field(repr=False)
    B2: np.ndarray | None = field(repr=False)
    spec_norm: float
    spec_radius: float
    t_rel: float
    radius_exact: bool = True

    def report(self) -> dict:
        return {
            "C": int(self.M.shape[0]),
            "norm": self.spec_norm,
            "radius": self.spec_radius,
            "radius_method": "dense-eig" if self.radius_exact else "power-iteration (approximate)",
            "t_rel": self.t_rel,
        }


def analyze(obs: ObservationSet, vc: VarianceComponents, with_factors: bool = False) -> AutoregressionBundle:
    M, M0 = build_M(obs, vc)
    B1 = B2 = None
    if with_factors:
        B1, B2 = build_B1_B2(obs, vc)
    norm = spectral_norm(M)
    radius = spectral_radius(M)
    t_rel = relaxation_time(radius) if radius < 1 else float("inf")
    return AutoregressionBundle(M, M0, B1, B2, norm, radius, t_rel, radius_is_exact(M.shape[0]))
