"""Vanilla and collapsed Gibbs samplers for the crossed random effects model.

The collapsed sweep integrates the global mean out of each block:

    block 1:  a0 ~ L(a0 | y, a2),  then a1_i ~ L(a1_i | y, a0, a2)
    block 2:  a0 ~ L(a0 | y, a1),  then a2_j ~ L(a2_j | y, a0, a1)

The vanilla sweep draws a0 from its full conditional once, then a1 and a2.
Both cost O(N + R + C) per sweep.  a0 carries a flat prior throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    DegenerateFactorError,
    LatentState,
    ObservationSet,
    VarianceComponents,
    _safe_divide,
    shrinkage_factors,
)
from .seeding import make_rng

KINDS = ("collapsed", "vanilla")
TRACE_PARAMETERS = ("a0", "mu1", "mu2", "tau1", "tau2", "tauE")


class ImproperPosteriorError(ValueError):
    pass


def _block(ytilde, adj, s, sigma_sq, rng, a0=None):
    """One collapsed block: draw a0 (if not given) then the level effects."""
    total = s.sum()
    if not total > 0:
        raise DegenerateFactorError("degenerate factor: no observed level")
    if a0 is None:
        mean = float(np.dot(s, ytilde - adj)) / total
        a0 = mean + math.sqrt(sigma_sq / total) * rng.standard_normal()
    sd = np.sqrt(sigma_sq * (1.0 - s))
    effects = s * (ytilde - a0 - adj) + sd * rng.standard_normal(s.size)
    return a0, effects


def collapsed_sweep(state: LatentState, obs: ObservationSet, vc: VarianceComponents,
                    rng: np.random.Generator) -> LatentState:
    ytilde1, ytilde2 = obs.ytilde
    s1, s2 = shrinkage_factors(obs, vc)
    adj1 = _safe_divide(obs.row_sums(state.a2), obs.row_counts)
    # block 1's a0 draw is superseded by block 2's
    _, a1 = _block(ytilde1, adj1, s1, vc.sigma1_sq, rng)
    adj2 = _safe_divide(obs.col_sums(a1), obs.col_counts)
    a0, a2 = _block(ytilde2, adj2, s2, vc.sigma2_sq, rng)
    return LatentState(a0, a1, a2)


def vanilla_sweep(state: LatentState, obs: ObservationSet, vc: VarianceComponents,
                  rng: np.random.Generator) -> LatentState:
    N = obs.total
    if N == 0:
        raise DegenerateFactorError("vanilla sampler needs at least one observation")
    ytilde1, ytilde2 = obs.ytilde
    s1, s2 = shrinkage_factors(obs, vc)
    partial = obs.y - state.a1[obs.rows] - state.a2[obs.cols]
    a0 = float(partial.mean()) + math.sqrt(vc.sigmaE_sq / N) * rng.standard_normal()
    adj1 = _safe_divide(obs.row_sums(state.a2), obs.row_counts)
    _, a1 = _block(ytilde1, adj1, s1, vc.sigma1_sq, rng, a0=a0)
    adj2 = _safe_divide(obs.col_sums(a1), obs.col_counts)
    _, a2 = _block(ytilde2, adj2, s2, vc.sigma2_sq, rng, a0=a0)
    return LatentState(a0, a1, a2)


SWEEPS = {"collapsed": collapsed_sweep, "vanilla": vanilla_sweep}


def precision_posterior(state: LatentState, obs: ObservationSet) -> dict[str, tuple[float, float]]:
    """Gamma (shape, rate) of each precision given the effects.

    The flat prior p(tau^{-1/2}) ∝ 1 contributes tau^{-3/2}, so a block of n
    Gaussian terms with sum of squares Q gives Gamma((n - 1)/2, Q/2).
    """
    R, C, N = obs.R, obs.C, obs.total
    if R <= 1 or C <= 1 or N <= 1:
        raise ImproperPosteriorError(f"improper precision posterior (R={R}, C={C}, N={N})")
    ss = {
        "tau1": float(np.dot(state.a1, state.a1)),
        "tau2": float(np.dot(state.a2, state.a2)),
        "tauE": float(np.sum(state.residuals(obs) ** 2)),
    }
    counts = {"tau1": R, "tau2": C, "tauE": N}
    for name, q in ss.items():
        if not q > 0:
            raise ImproperPosteriorError(f"zero sum of squares for {name}")
    return {name: ((counts[name] - 1) / 2.0, ss[name] / 2.0) for name in ss}


def precision_update(state: LatentState, obs: ObservationSet,
                     rng: np.random.Generator) -> VarianceComponents:
    post = precision_posterior(state, obs)
    tau = {name: rng.gamma(shape, 1.0 / rate) for name, (shape, rate) in post.items()}
    return VarianceComponents.from_precisions(tau["tau1"], tau["tau2"], tau["tauE"])


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = "collapsed"
    iterations: int = 10_000
    burn_in: int = 1_000
    fix_precisions: bool = True
    seed: int = 0
    init: str = "zeros"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if self.init not in ("zeros", "prior-draw"):
            raise ValueError(f"unknown init {self.init!r}")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("need 0 <= burn_in < iterations")


@dataclass
class ChainTrace:
    """Post-burn-in scalar summaries, one entry per recorded iteration."""

    kind: str
    iteration: np.ndarray
    a0: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    tauE: np.ndarray
    final_state: LatentState | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return int(self.iteration.size)

    def series(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TRACE_PARAMETERS}


def initial_state(obs: ObservationSet, vc: VarianceComponents, init: str,
                  rng: np.random.Generator) -> LatentState:
    if init == "zeros":
        return LatentState.zeros(obs.R, obs.C)
    # overdispersed start: effects from their priors, a0 around the data mean
    ybar = float(obs.y.mean()) if obs.total else 0.0
    ysd = float(obs.y.std()) if obs.total > 1 else 1.0
    a0 = ybar + ysd * rng.standard_normal()
    a1 = math.sqrt(vc.sigma1_sq) * rng.standard_normal(obs.R)
    a2 = math.sqrt(vc.sigma2_sq) * rng.standard_normal(obs.C)
    return LatentState(a0, a1, a2)


def run_chain(obs: ObservationSet, vc0: VarianceComponents, cfg: SamplerConfig) -> ChainTrace:
    """Run one seeded chain and record the trace after burn-in."""
    rng = make_rng(cfg.seed, "chain")
    sweep = SWEEPS[cfg.kind]
    vc = vc0
    state = initial_state(obs, vc, cfg.init, rng)

    n = cfg.iterations - cfg.burn_in
    rec = {name: np.empty(n) for name in TRACE_PARAMETERS}
    k = 0
    for t in range(1, cfg.iterations + 1):
        state = sweep(state, obs, vc, rng)
        if not cfg.fix_precisions:
            vc = precision_update(state, obs, rng)
        if t > cfg.burn_in:
            rec["a0"][k] = state.a0
            rec["mu1"][k] = state.a1.mean()
            rec["mu2"][k] = state.a2.mean()
            rec["tau1"][k] = vc.tau1
            rec["tau2"][k] = vc.tau2
            rec["tauE"][k] = vc.tauE
            k += 1
    return ChainTrace(cfg.kind, np.arange(cfg.burn_in + 1, cfg.iterations + 1), final_state=state, **rec)
