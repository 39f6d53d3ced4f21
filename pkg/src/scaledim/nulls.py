"""Monte Carlo reference bands for the dimension statistic.

The reference for order ``k`` is the ``(k+1)``-dimensional standard normal
distribution at the sample size of the data under test.  Each replicate gets
its own percentile grid, and replicates are aligned by grid label.
"""
from __future__ import annotations

import hashlib
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import CacheIntegrityError, MissingNullError, ParameterError
from .geometry import build_distance_index
from .scales import (
    MODES,
    build_scale_grid,
    compute_angle_field,
    compute_T,
    default_normalizers,
    order_statistic_ranks,
    percent_labels,
)

logger = logging.getLogger(__name__)

MIN_REPLICATES = 50
CACHE_ENV = "SCALEDIM_CACHE"
FORMAT_TAG = "scaledim-null-table v1"
COLUMNS = ("label", "raw_scale_mean", "std_scale_mean", "mean", "lower", "upper")


@dataclass(frozen=True)
class NullKey:
    k: int
    n: int
    step_percent: float
    mode: str
    replicates: int
    seed: int
    alpha: float

    def canonical(self) -> str:
        return (
            f"k={self.k};n={self.n};step_percent={self.step_percent!r};mode={self.mode};"
            f"replicates={self.replicates};seed={self.seed};alpha={self.alpha!r}"
        )

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:20]

    def filename(self) -> str:
        return f"null-k{self.k}-n{self.n}-{self.digest()}.txt"


@dataclass
class NullTable:
    key: NullKey
    labels: list
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    raw_scale_mean: np.ndarray
    std_scale_mean: np.ndarray

    def band(self, label: str):
        i = self.labels.index(label)
        return float(self.mean[i]), float(self.lower[i]), float(self.upper[i])

    def __eq__(self, other):
        if not isinstance(other, NullTable):
            return NotImplemented
        return (
            self.key == other.key
            and self.labels == other.labels
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("mean", "lower", "upper", "raw_scale_mean", "std_scale_mean")
            )
        )


@dataclass
class NullReplicates:
    """Raw replicate statistics before band extraction, ``values[r, label]``."""

    k: int
    n: int
    step_percent: float
    mode: str
    seed: int
    labels: list
    values: np.ndarray
    raw_scales: np.ndarray
    std_scales: np.ndarray


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    # one independent stream per replicate, so results do not depend on scheduling
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(r),)))


def _one_replicate(k, n, step_percent, mode, seed, r, normalizers):
    x = replicate_rng(seed, r).standard_normal((n, k + 1))
    index = build_distance_index(x)
    grid = build_scale_grid(index, step_percent=step_percent, mode=mode, collapse=False)
    field = compute_angle_field(x, index, grid, orders=[k])
    prof = compute_T(field, normalizers)
    return prof.values[0], grid.raw, grid.standardized


def simulate_null(k: int, n: int, replicates: int = 1000, step_percent: float = 5.0,
                  mode: str = "max-pairwise", seed: int = 0) -> NullReplicates:
    """Draw the replicate statistics ``T_k`` under the ``(k+1)``-d standard normal."""
    if k < 1:
        raise ParameterError(f"order k must be >= 1, got {k}", module="null_reference")
    if n < k + 3:
        raise ParameterError(f"null sample size must be >= k+3 = {k + 3}, got {n}", module="null_reference")
    if replicates < MIN_REPLICATES:
        raise ParameterError(
            f"refusing {replicates} replicates; at least {MIN_REPLICATES} are needed for meaningful bands",
            module="null_reference",
        )
    if mode not in MODES:
        raise ParameterError(f"unknown normalizer mode {mode!r}", module="null_reference")
    labels, _ = percent_labels(step_percent)
    normalizers = default_normalizers(k)
    values = np.empty((replicates, len(labels)))
    raw = np.empty_like(values)
    std = np.empty_like(values)
    for r in range(replicates):
        values[r], raw[r], std[r] = _one_replicate(k, n, step_percent, mode, seed, r, normalizers)
    return NullReplicates(k, n, float(step_percent), mode, int(seed), labels, values, raw, std)


def nearest_rank(sorted_values: np.ndarray, q: float) -> np.ndarray:
    """Nearest-rank percentile along axis 0 of an already sorted array."""
    rank = order_statistic_ranks([100.0 * q], sorted_values.shape[0])[0]
    return sorted_values[rank]


def bands(reps: NullReplicates, alpha: float = 0.05) -> NullTable:
    """Mean and nearest-rank ``alpha/2``, ``1-alpha/2`` percentiles per label."""
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}", module="null_reference")
    ordered = np.sort(reps.values, axis=0)
    R = ordered.shape[0]
    mean = np.array([math.fsum(ordered[:, j]) / R for j in range(ordered.shape[1])])
    key = NullKey(reps.k, reps.n, reps.step_percent, reps.mode, R, reps.seed, float(alpha))
    return NullTable(
        key=key,
        labels=list(reps.labels),
        mean=mean,
        lower=nearest_rank(ordered, alpha / 2),
        upper=nearest_rank(ordered, 1 - alpha / 2),
        raw_scale_mean=reps.raw_scales.mean(axis=0),
        std_scale_mean=reps.std_scales.mean(axis=0),
    )


def generate_null(k: int, n: int, replicates: int = 1000, alpha: float = 0.05, seed: int = 0,
                  step_percent: float = 5.0, mode: str = "max-pairwise") -> NullTable:
    """Monte Carlo null table for order ``k`` at sample size ``n``."""
    reps = simulate_null(k, n, replicates=replicates, step_percent=step_percent, mode=mode, seed=seed)
    return bands(reps, alpha)


# --- cache -----------------------------------------------------------------


def default_cache_dir():
    value = os.environ.get(CACHE_ENV)
    return Path(value) if value else None


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _rows_text(table: NullTable) -> str:
    lines = ["\t".join(COLUMNS)]
    for i, label in enumerate(table.labels):
        lines.append("\t".join([
            label,
            _fmt(table.raw_scale_mean[i]),
            _fmt(table.std_scale_mean[i]),
            _fmt(table.mean[i]),
            _fmt(table.lower[i]),
            _fmt(table.upper[i]),
        ]))
    return "\n".join(lines) + "\n"


def dumps_null(table: NullTable) -> str:
    """Serialize a table: format tag, key block, checksum, then tab-separated rows."""
    rows = _rows_text(table)
    head = [f"# {FORMAT_TAG}"]
    for name, value in asdict(table.key).items():
        head.append(f"{name} = {value!r}" if isinstance(value, float) else f"{name} = {value}")
    head.append(f"sha256 = {hashlib.sha256(rows.encode()).hexdigest()}")
    head.append("")
    return "\n".join(head) + "\n" + rows


def loads_null(text: str, path="<string>") -> NullTable:
    lines = text.splitlines()
    if not lines or lines[0] != f"# {FORMAT_TAG}":
        raise CacheIntegrityError(path, "missing format tag")
    try:
        blank = lines.index("")
    except ValueError:
        raise CacheIntegrityError(path, "missing key block terminator") from None
    meta = {}
    for line in lines[1:blank]:
        name, sep, value = line.partition(" = ")
        if not sep:
            raise CacheIntegrityError(path, f"malformed key line {line!r}")
        meta[name] = value
    rows = "\n".join(lines[blank + 1:]) + "\n"
    if hashlib.sha256(rows.encode()).hexdigest() != meta.get("sha256"):
        raise CacheIntegrityError(path, "checksum mismatch")
    try:
        key = NullKey(
            k=int(meta["k"]),
            n=int(meta["n"]),
            step_percent=float(meta["step_percent"]),
            mode=meta["mode"],
            replicates=int(meta["replicates"]),
            seed=int(meta["seed"]),
            alpha=float(meta["alpha"]),
        )
        body = [r.split("\t") for r in lines[blank + 2:]]
        if lines[blank + 1].split("\t") != list(COLUMNS) or any(len(r) != len(COLUMNS) for r in body):
            raise ValueError("unexpected column layout")
        cols = list(zip(*body))
        table = NullTable(
            key=key,
            labels=list(cols[0]),
            raw_scale_mean=np.array(cols[1], dtype=float),
            std_scale_mean=np.array(cols[2], dtype=float),
            mean=np.array(cols[3], dtype=float),
            lower=np.array(cols[4], dtype=float),
            upper=np.array(cols[5], dtype=float),
        )
    except (KeyError, ValueError, IndexError) as exc:
        raise CacheIntegrityError(path, str(exc)) from None
    return table


def store_null(table: NullTable, cache_dir) -> Path:
    """Write ``table`` into ``cache_dir`` atomically; returns the file path."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / table.key.filename()
    fd, tmp = tempfile.mkstemp(dir=cache_dir, prefix=".tmp-", suffix=".txt")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps_null(table))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_null(key: NullKey, cache_dir) -> NullTable | None:
    """Load the table stored under exactly ``key``, or ``None`` if absent."""
    path = Path(cache_dir) / key.filename()
    if not path.exists():
        return None
    table = loads_null(path.read_text(encoding="utf-8"), path)
    if table.key != key:
        raise CacheIntegrityError(path, "stored key does not match file name")
    return table


class NullProvider:
    """Supplies null tables by key, from memory, a cache directory, or fresh simulation.

    Generation only happens when ``generate`` is true; otherwise a missing
    table raises :class:`MissingNullError`.
    """

    def __init__(self, cache_dir=None, replicates: int = 1000, seed: int = 0, generate: bool = False,
                 tables=None):
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.replicates = replicates
        self.seed = seed
        self.generate = generate
        self._memory = {}
        self._replicates = {}
        self.hits = 0
        self.generated = 0
        for table in tables or ():
            self._memory[table.key] = table

    def key(self, k, n, step_percent, mode, alpha) -> NullKey:
        return NullKey(int(k), int(n), float(step_percent), mode, int(self.replicates), int(self.seed), float(alpha))

    def get(self, k, n, step_percent=5.0, mode="max-pairwise", alpha=0.05) -> NullTable:
        key = self.key(k, n, step_percent, mode, alpha)
        if key in self._memory:
            return self._memory[key]
        if self.cache_dir is not None:
            table = load_null(key, self.cache_dir)
            if table is not None:
                self.hits += 1
                logger.info("null cache hit: %s", key.canonical())
                self._memory[key] = table
                return table
        if not self.generate:
            where = f" in {self.cache_dir}" if self.cache_dir is not None else ""
            raise MissingNullError(f"no null table for {key.canonical()}{where}; run the `nulls` command "
                                   "or allow generation")
        rkey = (key.k, key.n, key.step_percent, key.mode)
        if rkey not in self._replicates:
            logger.info("generating null: %s", key.canonical())
            self._replicates[rkey] = simulate_null(key.k, key.n, key.replicates, key.step_percent, key.mode,
                                                   key.seed)
            self.generated += 1
        table = bands(self._replicates[rkey], key.alpha)
        if self.cache_dir is not None:
            store_null(table, self.cache_dir)
        self._memory[key] = table
        return table
