"""Autocorrelation and effective sample size for MCMC output."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .samplers import ChainTrace

ESS_METHOD = "geyer-initial-positive-sequence"


class ZeroVarianceError(ValueError):
    pass


def _centered(series) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64).ravel()
    x = x - x.mean()
    if not np.any(x != 0):
        raise ZeroVarianceError("zero variance: series is constant")
    return x


def _acf_full(x: np.ndarray) -> np.ndarray:
    # zero-padded FFT gives the linear (not circular) autocovariance
    n = x.size
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n]
    return acov / acov[0]


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelations at lags 0..max_lag.

    rho_k = sum_t (x_t - xbar)(x_{t+k} - xbar) / sum_t (x_t - xbar)^2
    """
    x = _centered(series)
    if not (1 <= max_lag < x.size):
        raise ValueError(f"need 1 <= max_lag < len(series), got max_lag={max_lag}, n={x.size}")
    return _acf_full(x)[: max_lag + 1]


def significance_band(n: int, z: float = 1.96) -> float:
    """Half-width of the +-z/sqrt(n) band around zero for an iid series."""
    return z / math.sqrt(n)


@dataclass
class EssResult:
    parameter: str
    n: int
    ess: float
    truncation_lag: int
    acf: np.ndarray = field(repr=False)
    method: str = ESS_METHOD


def effective_sample_size(series, parameter: str = "x") -> EssResult:
    """ESS = n / (1 + 2 sum_{k=1}^{K} rho_k), clamped to (0, n].

    K is set by Geyer's initial positive sequence: pair sums
    Gamma_m = rho_{2m} + rho_{2m+1} are accumulated while positive.  The
    reported ``truncation_lag`` is 2(m_last + 1), the first lag left out.
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    n = x.size
    if n < 10:
        raise ValueError(f"need at least 10 samples for ESS, got {n}")
    rho = _acf_full(_centered(x))

    n_pairs = n // 2
    pairs = rho[: 2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)
    nonpos = np.flatnonzero(pairs <= 0)
    m_stop = int(nonpos[0]) if nonpos.size else n_pairs
    truncation = 2 * m_stop
    if m_stop == 0:
        tau = 0.0
    else:
        # -1 + 2 * sum of pair sums == 1 + 2 * sum_{k=1}^{2m-1} rho_k
        tau = -1.0 + 2.0 * float(pairs[:m_stop].sum())
    ess = float(n) if tau <= 0 else min(float(n), n / tau)
    return EssResult(parameter, n, ess, truncation, rho[: max(truncation, 1)])


@dataclass
class TraceSummary:
    kind: str
    ess: dict[str, EssResult]
    mean: dict[str, float]
    sd: dict[str, float]

    def rows(self, S=None) -> list[dict]:
        return [
            {"parameter": name, "sampler": self.kind, "S": S, "ess": r.ess, "n": r.n}
            for name, r in self.ess.items()
        ]


def summarize_trace(trace: ChainTrace, parameters=None) -> TraceSummary:
    """ESS, mean and SD for each recorded parameter.

    Constant series (e.g. fixed precisions) get an ESS of NaN rather than an error.
    Traces shorter than 10 iterations raise.
    """
    series = trace.series()
    names = parameters or list(series)
    ess, mean, sd = {}, {}, {}
    for name in names:
        x = series[name]
        if x.size < 10:
            raise ValueError(f"trace too short for {name}: {x.size} samples")
        mean[name] = float(x.mean())
        sd[name] = float(x.std(ddof=1))
        try:
            ess[name] = effective_sample_size(x, name)
        except ZeroVarianceError:
            ess[name] = EssResult(name, int(x.size), float("nan"), 0, np.ones(1), method="constant")
    return TraceSummary(trace.kind, ess, mean, sd)
