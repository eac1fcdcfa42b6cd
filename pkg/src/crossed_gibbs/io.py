"""File formats: ratings CSV, trace/norm/ESS tables, JSON reports, YAML config."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .model import ObservationSet
from .samplers import TRACE_PARAMETERS, ChainTrace
from .seeding import make_rng

RATINGS_HEADER = ("user_id", "item_id", "rating")
TRACE_HEADER = ("iter",) + TRACE_PARAMETERS
NORM_HEADER = ("S", "replicate", "norm", "radius")
ESS_HEADER = ("parameter", "sampler", "S", "ess", "n")


class RatingsFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass
class RatingsDataset:
    user_keys: list[str]
    item_keys: list[str]
    obs: ObservationSet = field(repr=False)
    user_index: dict[str, int] = field(default_factory=dict, repr=False)
    item_index: dict[str, int] = field(default_factory=dict, repr=False)

    @property
    def R(self) -> int:
        return len(self.user_keys)

    @property
    def C(self) -> int:
        return len(self.item_keys)

    @property
    def N(self) -> int:
        return self.obs.total

    def implied_exponents(self) -> tuple[float, float]:
        """(rho, kappa) = (log R / log N, log C / log N)."""
        return implied_exponents(self.R, self.C, self.N)

    def summary(self) -> dict:
        rho, kappa = self.implied_exponents()
        return {"R": self.R, "C": self.C, "N": self.N, "rho": rho, "kappa": kappa}


def implied_exponents(R: int, C: int, N: int) -> tuple[float, float]:
    if N <= 1:
        return float("nan"), float("nan")
    return math.log(R) / math.log(N), math.log(C) / math.log(N)


def load_ratings_csv(path, max_rows: int | None = None, subsample: float | None = None,
                     seed: int = 0) -> RatingsDataset:
    """Read ``user_id,item_id,rating`` rows and reindex users and items densely.

    ``max_rows`` keeps only the first rows of the file; ``subsample`` keeps
    each remaining row independently with that probability (seeded).
    Users and items are numbered in order of first appearance.
    """
    path = Path(path)
    keep_rng = make_rng(seed, "subsample") if subsample is not None else None
    if subsample is not None and not (0.0 < subsample <= 1.0):
        raise ValueError("subsample must lie in (0, 1]")

    users: dict[str, int] = {}
    items: dict[str, int] = {}
    rows, cols, vals = [], [], []
    seen: dict[tuple[int, int], int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise RatingsFormatError("empty file")
        if tuple(h.strip() for h in header) != RATINGS_HEADER:
            raise RatingsFormatError(f"expected header {','.join(RATINGS_HEADER)}, got {','.join(header)}", 1)
        n_read = 0
        for line_no, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if max_rows is not None and n_read >= max_rows:
                break
            n_read += 1
            if len(rec) != 3:
                raise RatingsFormatError(f"expected 3 fields, got {len(rec)}", line_no)
            u, it, r = (x.strip() for x in rec)
            if not u or not it:
                raise RatingsFormatError("empty user or item id", line_no)
            try:
                rating = float(r)
            except ValueError:
                raise RatingsFormatError(f"rating {r!r} is not a number", line_no) from None
            if not math.isfinite(rating):
                raise RatingsFormatError(f"rating {r!r} is not finite", line_no)
            if keep_rng is not None and keep_rng.random() >= subsample:
                continue
            i = users.setdefault(u, len(users))
            j = items.setdefault(it, len(items))
            if (i, j) in seen:
                raise RatingsFormatError(
                    f"duplicate pair ({u}, {it}); first seen on line {seen[(i, j)]}", line_no
                )
            seen[(i, j)] = line_no
            rows.append(i)
            cols.append(j)
            vals.append(rating)
    if not rows:
        raise RatingsFormatError("no ratings in file")
    obs = ObservationSet.from_triplets(rows, cols, vals, len(users), len(items))
    return RatingsDataset(list(users), list(items), obs, users, items)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "" if x is None else str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_ratings_csv(path, obs: ObservationSet, user_keys=None, item_keys=None) -> Path:
    uk = user_keys or [f"u{i}" for i in range(obs.R)]
    ik = item_keys or [f"i{j}" for j in range(obs.C)]
    return write_csv(path, RATINGS_HEADER,
                     ((uk[i], ik[j], y) for i, j, y in zip(obs.rows, obs.cols, obs.y)))


def write_trace_csv(path, trace: ChainTrace) -> Path:
    cols = [trace.iteration] + [getattr(trace, p) for p in TRACE_PARAMETERS]
    return write_csv(path, TRACE_HEADER, zip(*cols))


def read_trace_csv(path, kind: str | None = None) -> ChainTrace:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TRACE_HEADER)}")
        data = np.array([[float(v) for v in rec] for rec in reader if rec], dtype=np.float64)
    if data.size == 0:
        data = np.empty((0, len(TRACE_HEADER)))
    kind = kind or path.stem.removeprefix("trace_")
    series = {name: data[:, k + 1] for k, name in enumerate(TRACE_PARAMETERS)}
    return ChainTrace(kind, data[:, 0].astype(np.int64), **series)


def write_norm_table(path, rows) -> Path:
    return write_csv(path, NORM_HEADER, ((r["S"], r["replicate"], r["norm"], r["radius"]) for r in rows))


def write_ess_table(path, rows) -> Path:
    return write_csv(path, ESS_HEADER, ((r["parameter"], r["sampler"], r["S"], r["ess"], r["n"]) for r in rows))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj), encoding="utf-8")
    return path


def config_hash(config: dict) -> str:
    canonical = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class _ConfigLoader(yaml.SafeLoader):
    pass


# YAML 1.1 reads "1e4" as a string; accept exponent floats without a dot
_ConfigLoader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                 |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                 |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                 |[-+]?\.(?:inf|Inf|INF)
                 |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def load_config(path) -> dict:
    """Read a YAML experiment config (a mapping of sections)."""
    with Path(path).open(encoding="utf-8") as fh:
        cfg = yaml.load(fh, Loader=_ConfigLoader)
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ValueError("config must be a mapping at the top level")
    return cfg
