"""Data containers for the two-factor crossed random effects model.

    y_ij = a0 + a1_i + a2_j + e_ij,   observed only where Z_ij = 1

Rows index levels of factor 1 (R of them), columns index levels of factor 2
(C of them).  The observation pattern is stored sparsely; the diagonal
matrices diag(N_i. + lambda_A) and diag(N_.j + lambda_B) are never formed,
only the count vectors behind them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class DegenerateFactorError(ValueError):
    """A factor has no observed level at all."""


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Observed cells (i, j, y_ij) of an R x C layout.

    Cells are kept sorted row-major.  ``Z`` (CSR) gives O(N_i.) row scans and
    ``Zt`` (CSR of the transpose) gives O(N_.j) column scans.
    """

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    y: np.ndarray
    row_counts: np.ndarray = field(repr=False)
    col_counts: np.ndarray = field(repr=False)
    Z: sp.csr_matrix = field(repr=False)
    Zt: sp.csr_matrix = field(repr=False)

    @classmethod
    def from_triplets(cls, rows, cols, y, n_rows: int, n_cols: int) -> "ObservationSet":
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        y = np.asarray(y, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == y.shape):
            raise ValueError("rows, cols and y must have the same length")
        if n_rows < 1 or n_cols < 1:
            raise ValueError("need at least one row and one column")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows:
                raise ValueError("row index out of range")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise ValueError("column index out of range")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")

        order = np.lexsort((cols, rows))
        rows, cols, y = rows[order], cols[order], y[order]
        if rows.size > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if dup.any():
                k = int(np.flatnonzero(dup)[0]) + 1
                raise ValueError(f"duplicate cell ({rows[k]}, {cols[k]})")

        ones = np.ones(rows.size, dtype=np.float64)
        Z = sp.csr_matrix((ones, (rows, cols)), shape=(n_rows, n_cols))
        Zt = Z.T.tocsr()
        row_counts = np.bincount(rows, minlength=n_rows).astype(np.int64)
        col_counts = np.bincount(cols, minlength=n_cols).astype(np.int64)
        for arr in (rows, cols, y, row_counts, col_counts):
            arr.flags.writeable = False
        return cls(int(n_rows), int(n_cols), rows, cols, y, row_counts, col_counts, Z, Zt)

    @property
    def R(self) -> int:
        return self.n_rows

    @property
    def C(self) -> int:
        return self.n_cols

    @property
    def total(self) -> int:
        """N, the number of observed cells."""
        return int(self.rows.size)

    @cached_property
    def ytilde(self) -> tuple[np.ndarray, np.ndarray]:
        return level_means(self)

    def row_sums(self, values: np.ndarray) -> np.ndarray:
        """sum_j Z_ij v_j for each row i."""
        return self.Z @ values

    def col_sums(self, values: np.ndarray) -> np.ndarray:
        """sum_i Z_ij v_i for each column j."""
        return self.Zt @ values


@dataclass(frozen=True)
class VarianceComponents:
    """Variances of the factor-1 effects, factor-2 effects and noise."""

    sigma1_sq: float
    sigma2_sq: float
    sigmaE_sq: float

    def __post_init__(self):
        for name in ("sigma1_sq", "sigma2_sq", "sigmaE_sq"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")

    @classmethod
    def from_precisions(cls, tau1: float, tau2: float, tauE: float) -> "VarianceComponents":
        return cls(1.0 / tau1, 1.0 / tau2, 1.0 / tauE)

    @property
    def lambda_A(self) -> float:
        return self.sigmaE_sq / self.sigma1_sq

    @property
    def lambda_B(self) -> float:
        return self.sigmaE_sq / self.sigma2_sq

    @property
    def tau1(self) -> float:
        return 1.0 / self.sigma1_sq

    @property
    def tau2(self) -> float:
        return 1.0 / self.sigma2_sq

    @property
    def tauE(self) -> float:
        return 1.0 / self.sigmaE_sq


@dataclass
class LatentState:
    """Mutable chain state (a0, a1, a2)."""

    a0: float
    a1: np.ndarray
    a2: np.ndarray

    def __post_init__(self):
        self.a0 = float(self.a0)
        self.a1 = np.asarray(self.a1, dtype=np.float64)
        self.a2 = np.asarray(self.a2, dtype=np.float64)
        if not (np.isfinite(self.a0) and np.all(np.isfinite(self.a1)) and np.all(np.isfinite(self.a2))):
            raise ValueError("latent state has non-finite entries")

    @classmethod
    def zeros(cls, R: int, C: int) -> "LatentState":
        return cls(0.0, np.zeros(R), np.zeros(C))

    def copy(self) -> "LatentState":
        return LatentState(self.a0, self.a1.copy(), self.a2.copy())

    def residuals(self, obs: ObservationSet) -> np.ndarray:
        """e_ij = y_ij - a0 - a1_i - a2_j at the observed cells."""
        return obs.y - self.a0 - self.a1[obs.rows] - self.a2[obs.cols]


def _safe_divide(num: np.ndarray, counts: np.ndarray) -> np.ndarray:
    out = np.zeros(num.shape, dtype=np.float64)
    nz = counts > 0
    out[nz] = num[nz] / counts[nz]
    return out


def level_means(obs: ObservationSet) -> tuple[np.ndarray, np.ndarray]:
    """Plain means of the observed responses for each row and each column.

    Levels with no observations get mean 0.
    """
    ytilde1 = _safe_divide(np.bincount(obs.rows, weights=obs.y, minlength=obs.R), obs.row_counts)
    ytilde2 = _safe_divide(np.bincount(obs.cols, weights=obs.y, minlength=obs.C), obs.col_counts)
    return ytilde1, ytilde2


def shrinkage_factors(obs: ObservationSet, vc: VarianceComponents) -> tuple[np.ndarray, np.ndarray]:
    """s1_i = N_i./(N_i. + lambda_A) and s2_j = N_.j/(N_.j + lambda_B)."""
    n1 = obs.row_counts.astype(np.float64)
    n2 = obs.col_counts.astype(np.float64)
    return n1 / (n1 + vc.lambda_A), n2 / (n2 + vc.lambda_B)


def _normalize(s: np.ndarray, which: str) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    total = s.sum()
    if not total > 0:
        raise DegenerateFactorError(f"degenerate factor: {which} has no observed level")
    return s / total


def level_weights(s1: np.ndarray, s2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalize shrinkage factors into weights w1, w2 that each sum to one."""
    return _normalize(s1, "factor 1"), _normalize(s2, "factor 2")
