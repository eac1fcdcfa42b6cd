"""``crossed-gibbs`` command line entry point.

    crossed-gibbs <simulate|sample|analyze|diagnose|verify> --config PATH [--seed N] [--out DIR]

Values are resolved in the order: command-line flag, then config file, then
built-in default.  Every run writes ``manifest_<command>.json`` next to its
outputs; on failure it writes ``error_<command>.json`` and exits with 2.
A ``verify`` run whose checks do not all pass exits with 1.
"""

from __future__ import annotations

import argparse
import platform
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .autoregression import analyze
from .diagnostics import ESS_METHOD, significance_band, summarize_trace
from .io import (
    config_hash, implied_exponents, load_config, load_ratings_csv, read_trace_csv,
    write_ess_table, write_json, write_norm_table, write_ratings_csv, write_trace_csv,
)
from .missingness import RegimeSpec, make_pattern, regime_condition, sample_Z, synthesize_responses
from .model import VarianceComponents
from .samplers import KINDS, SamplerConfig, run_chain
from .seeding import child_seed
from .theory_lab import (
    hoeffding_bound, latala_ratio, norm_medians, norm_vs_S_experiment, theorem_surrogate,
    verify_row_col_concentration, verify_Z_norm_bound,
)

COMMANDS = ("simulate", "sample", "analyze", "diagnose", "verify")

_regime = {
    "type": "object",
    "properties": {
        "S": {"type": "number", "minimum": 1},
        "rho": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "kappa": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "regime": {"enum": ["mcar", "bounded", "balanced"]},
        "upsilon": {"type": "number", "minimum": 1},
        "eps_target": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.25},
        "clip": {"type": "boolean"},
    },
    "required": ["S", "rho", "kappa"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "a0_true": {"type": "number"},
        "variance": {
            "type": "object",
            "properties": {k: {"type": "number", "exclusiveMinimum": 0}
                           for k in ("sigma1_sq", "sigma2_sq", "sigmaE_sq")},
            "additionalProperties": False,
        },
        "data": {
            "type": "object",
            "properties": {
                "ratings": {"type": "string"},
                "simulate": _regime,
                "max_rows": {"type": "integer", "minimum": 1},
                "subsample": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
            "additionalProperties": False,
        },
        "sampler": {
            "type": "object",
            "properties": {
                "kinds": {"type": "array", "items": {"enum": list(KINDS)}, "minItems": 1},
                "iterations": {"type": "integer", "minimum": 1},
                "burn_in": {"type": "integer", "minimum": 0},
                "fix_precisions": {"type": "boolean"},
                "init": {"enum": ["zeros", "prior-draw"]},
            },
            "additionalProperties": False,
        },
        "diagnose": {
            "type": "object",
            "properties": {
                "traces": {"type": "array", "items": {"type": "string"}},
                "S": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "verify": {
            "type": "object",
            "properties": {
                "checks": {"type": "array", "items": {"enum": [
                    "hoeffding", "concentration", "z_norm", "latala", "norm_vs_S", "theorem"]}},
                "regime": _regime,
                "psi": {"type": "number", "minimum": 0},
                "replicates": {"type": "integer", "minimum": 1},
                "instances": {"type": "integer", "minimum": 1},
                "S_grid": {"type": "array", "items": {"type": "number", "minimum": 1}, "minItems": 1},
                "threshold": {"type": "number"},
                "statistic": {"enum": ["norm", "radius"]},
                "confidence": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "cap": {"type": "number", "exclusiveMinimum": 0},
                "hoeffding": {"type": "object", "properties": {
                    "n": {"type": "integer", "minimum": 1}, "p": {"type": "number"},
                    "t": {"type": "number", "minimum": 0}, "draws": {"type": "integer", "minimum": 1}}},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class CommandError(RuntimeError):
    pass


def _vc(cfg: dict) -> VarianceComponents:
    v = cfg.get("variance", {})
    return VarianceComponents(v.get("sigma1_sq", 1.0), v.get("sigma2_sq", 1.0), v.get("sigmaE_sq", 1.0))


def _spec(block: dict, seed: int) -> RegimeSpec:
    return RegimeSpec.from_dict({**block, "seed": seed})


def _data(cfg: dict, seed: int):
    """Observation set plus metadata from ``data.ratings`` or ``data.simulate``."""
    data = cfg.get("data", {})
    if "ratings" in data:
        ds = load_ratings_csv(data["ratings"], data.get("max_rows"), data.get("subsample"), seed)
        return ds.obs, {"source": str(data["ratings"]), **ds.summary()}
    if "simulate" in data:
        spec = _spec(data["simulate"], seed)
        Z = sample_Z(make_pattern(spec), spec.seed)
        obs, _ = synthesize_responses(Z, _vc(cfg), cfg.get("a0_true", 2.0), spec.seed)
        meta = {"source": "simulate", **spec.to_dict(), "R": obs.R, "C": obs.C, "N": obs.total}
        return obs, meta
    raise CommandError("config needs data.ratings or data.simulate")


def cmd_simulate(cfg: dict, seed: int, out: Path) -> tuple[int, list[Path]]:
    block = cfg.get("data", {}).get("simulate")
    if block is None:
        raise CommandError("simulate needs a data.simulate section")
    spec = _spec(block, seed)
    pattern = make_pattern(spec)
    Z = sample_Z(pattern, spec.seed)
    obs, truth = synthesize_responses(Z, _vc(cfg), cfg.get("a0_true", 2.0), spec.seed)
    rho, kappa = spec.rho, spec.kappa
    summary = {
        **spec.to_dict(), "R": obs.R, "C": obs.C, "N": obs.total,
        "regime_condition": regime_condition(rho, kappa),
        "p_min": float(pattern.p.min()), "p_max": float(pattern.p.max()),
    }
    outputs = [
        write_ratings_csv(out / "ratings.csv", obs),
        write_json(out / "truth.json", {"a0": truth.a0, "a1": truth.a1, "a2": truth.a2}),
        write_json(out / "simulation.json", summary),
    ]
    return 0, outputs


def cmd_sample(cfg: dict, seed: int, out: Path) -> tuple[int, list[Path]]:
    obs, meta = _data(cfg, seed)
    sc = cfg.get("sampler", {})
    outputs = []
    for kind in sc.get("kinds", list(KINDS)):
        scfg = SamplerConfig(kind, sc.get("iterations", 10_000), sc.get("burn_in", 1_000),
                             sc.get("fix_precisions", True), seed, sc.get("init", "zeros"))
        trace = run_chain(obs, _vc(cfg), scfg)
        outputs.append(write_trace_csv(out / f"trace_{kind}.csv", trace))
    outputs.append(write_json(out / "sample.json", meta))
    return 0, outputs


def cmd_analyze(cfg: dict, seed: int, out: Path) -> tuple[int, list[Path]]:
    obs, meta = _data(cfg, seed)
    bundle = analyze(obs, _vc(cfg))
    rho, kappa = implied_exponents(obs.R, obs.C, obs.total)
    report = {**bundle.report(), "R": obs.R, "N": obs.total, "data": meta,
              "implied_rho": rho, "implied_kappa": kappa}
    return 0, [write_json(out / "analysis.json", report)]


def cmd_diagnose(cfg: dict, seed: int, out: Path) -> tuple[int, list[Path]]:
    block = cfg.get("diagnose", {})
    paths = block.get("traces")
    if paths is None:
        paths = [out / f"trace_{k}.csv" for k in cfg.get("sampler", {}).get("kinds", list(KINDS))]
    S = block.get("S", cfg.get("data", {}).get("simulate", {}).get("S"))
    rows, summary = [], {}
    for p in paths:
        trace = read_trace_csv(p)
        sm = summarize_trace(trace)
        rows.extend(sm.rows(S))
        summary[trace.kind] = {
            name: {"ess": r.ess, "n": r.n, "truncation_lag": r.truncation_lag,
                   "mean": sm.mean[name], "sd": sm.sd[name]}
            for name, r in sm.ess.items()
        }
    n = rows[0]["n"] if rows else 0
    report = {"method": ESS_METHOD, "acf_band_95": significance_band(n) if n else None,
              "samplers": summary}
    return 0, [write_ess_table(out / "ess.csv", rows), write_json(out / "diagnostics.json", report)]


def cmd_verify(cfg: dict, seed: int, out: Path) -> tuple[int, list[Path]]:
    v = cfg.get("verify", {})
    checks = v.get("checks", ["z_norm"])
    regime = v.get("regime", {"S": 1e4, "rho": 0.52, "kappa": 0.52, "regime": "mcar"})
    spec = _spec(regime, seed)
    reps = v.get("replicates", 20)
    reports, outputs = [], []
    for check in checks:
        if check == "hoeffding":
            h = v.get("hoeffding", {})
            n, p, t, draws = h.get("n", 100), h.get("p", 0.5), h.get("t", 10.0), h.get("draws", 100_000)
            x = np.random.default_rng(child_seed(seed, "hoeffding")).binomial(n, p, draws)
            frac = float(np.mean(x >= n * p + t))
            bound = hoeffding_bound(n, t)
            se = (bound * (1 - bound) / draws) ** 0.5
            reports.append({"check": "hoeffding", "parameters": {"n": n, "p": p, "t": t, "draws": draws},
                            "observed": frac, "bound": bound, "passed": frac <= bound + 3 * se,
                            "direction": "observed <= bound + 3 MC-SE", "details": []})
        elif check == "concentration":
            reports.append(verify_row_col_concentration(spec, v.get("psi", 0.2), v.get("replicates", 100)).to_dict())
        elif check == "z_norm":
            pattern = make_pattern(spec)
            details, ok = [], True
            for r in range(v.get("instances", 200)):
                rep = verify_Z_norm_bound(sample_Z(pattern, child_seed(seed, "z_norm", r)))
                ok &= rep.passed
                details.append({"instance": r, "norm": rep.observed, "bound": rep.bound, "passed": rep.passed})
            reports.append({"check": "Z_norm_bound", "parameters": spec.to_dict(),
                            "observed": sum(not d["passed"] for d in details), "bound": 0,
                            "passed": ok, "direction": "violations <= 0", "details": details})
        elif check == "latala":
            for S in v.get("S_grid", [spec.S]):
                reports.append(latala_ratio(spec.with_(S=float(S)), reps, v.get("cap", 3.0)).to_dict())
        elif check == "norm_vs_S":
            rows = norm_vs_S_experiment(spec.rho, spec.kappa, spec.upsilon, v.get("S_grid", [spec.S]),
                                        reps, _vc(cfg), spec.regime, seed, spec.eps_target, spec.clip)
            outputs.append(write_norm_table(out / "norms.csv", rows))
            med = norm_medians(rows)
            vals = list(med.values())
            reports.append({"check": "norm_vs_S", "parameters": spec.to_dict(),
                            "observed": max(vals), "bound": 1.0,
                            "passed": max(vals) < 1 and all(b <= a for a, b in zip(vals, vals[1:])),
                            "direction": "median norm < 1 and nonincreasing in S",
                            "details": [{"S": S, "median_norm": m} for S, m in med.items()]})
        elif check == "theorem":
            reports.append(theorem_surrogate(spec, v.get("threshold", 0.5), v.get("statistic", "norm"),
                                             reps, v.get("confidence", 0.95), _vc(cfg)).to_dict())
    outputs.append(write_json(out / "verify.json", {"reports": reports}))
    status = 0 if all(r["passed"] for r in reports) else 1
    return status, outputs


HANDLERS = {"simulate": cmd_simulate, "sample": cmd_sample, "analyze": cmd_analyze,
            "diagnose": cmd_diagnose, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crossed-gibbs", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    p.add_argument("--out", default=None, help="output directory (overrides config)")
    return p


def run_experiment(command: str, config: dict, seed: int | None = None, out: str | Path | None = None) -> int:
    """Validate ``config``, run ``command``, write outputs and a manifest; return the exit status."""
    seed = int(seed if seed is not None else config.get("seed", 0))
    out = Path(out if out is not None else config.get("out", "results"))
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
        status, outputs = HANDLERS[command](config, seed, out)
    except Exception as exc:  # noqa: BLE001 -- reported, not swallowed
        write_json(out / f"error_{command}.json", {
            "command": command, "error": type(exc).__name__, "message": str(exc),
            "seed": seed, "config_hash": config_hash(config),
        })
        print(f"crossed-gibbs {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    manifest = {
        "command": command,
        "seed": seed,
        "config": config,
        "config_hash": config_hash(config),
        "versions": {"crossed_gibbs": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": time.perf_counter() - t0,
        "outputs": sorted(p.name for p in outputs),
        "status": status,
    }
    write_json(out / f"manifest_{command}.json", manifest)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"crossed-gibbs: cannot read config: {exc}", file=sys.stderr)
        return 2
    return run_experiment(args.command, config, args.seed, args.out)


if __name__ == "__main__":
    sys.exit(main())
