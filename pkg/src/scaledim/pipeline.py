"""End-to-end analysis: load data, compute statistics, test against nulls, report."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dimtest import test_profile
from .errors import InputError, ParameterError
from .geometry import PointCloud, build_distance_index
from .io import dumps_report, ingest_csv, plot_tables
from .nulls import NullProvider, default_cache_dir
from .scales import (
    MODES,
    build_scale_grid,
    compute_angle_field,
    compute_T,
    default_k_max,
    default_normalizers,
    max_order,
)
from .synthetic import GeneratorSpec


@dataclass
class AnalysisConfig:
    input: str | None = None
    generator: dict | None = None
    delimiter: str = ","
    header: bool = False
    step_percent: float = 5.0
    mode: str = "max-pairwise"
    alpha: float = 0.05
    replicates: int = 1000
    k_max: int | None = None
    seed: int = 0
    cache_dir: str | None = None
    generate_nulls: bool = False
    bonferroni: bool = False

    def validate(self):
        if (self.input is None) == (self.generator is None):
            raise ParameterError("exactly one of an input CSV or a generator spec is required", module="cli_io")
        if self.input is not None and not Path(self.input).is_file():
            raise InputError(f"input file {self.input} does not exist")
        if self.mode not in MODES:
            raise ParameterError(f"unknown mode {self.mode!r}", module="cli_io")
        if not 0 < self.alpha < 1:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}", module="cli_io")
        if not 0 < self.step_percent <= 50:
            raise ParameterError(f"step_percent must lie in (0, 50], got {self.step_percent}", module="cli_io")
        if self.k_max is not None and self.k_max < 1:
            raise ParameterError("k_max must be >= 1", module="cli_io")
        return self

    def load(self) -> PointCloud:
        if self.input is not None:
            return ingest_csv(self.input, delimiter=self.delimiter, header=self.header)
        return GeneratorSpec(**self.generator).generate()


@dataclass
class AnalysisReport:
    data: dict
    timing: dict = field(default_factory=dict)

    def to_json(self, timing: bool = True) -> str:
        payload = dict(self.data)
        if timing:
            payload["timing"] = self.timing
        return dumps_report(payload)

    def plot_tables(self) -> dict:
        return plot_tables(self.data)

    @property
    def profile(self):
        return self.data["profile"]


def run_analyze(config: AnalysisConfig, provider: NullProvider | None = None) -> AnalysisReport:
    """Run the whole pipeline described by ``config``."""
    config.validate()
    clock = {}
    t0 = time.perf_counter()
    cloud = config.load()
    n, d = cloud.n, cloud.d
    k_max = config.k_max if config.k_max is not None else default_k_max(n, d)
    if k_max > max_order(n, d):
        raise ParameterError(f"k_max={k_max} exceeds min(d-1, n-2)={max_order(n, d)}", module="cli_io")
    if provider is None:
        cache = config.cache_dir if config.cache_dir is not None else default_cache_dir()
        provider = NullProvider(cache_dir=cache, replicates=config.replicates, seed=config.seed,
                                generate=config.generate_nulls)
    clock["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    index = build_distance_index(cloud)
    grid = build_scale_grid(index, step_percent=config.step_percent, mode=config.mode)
    field_ = compute_angle_field(cloud, index, grid, k_max=k_max)
    normalizers = default_normalizers(k_max)
    tprof = compute_T(field_, normalizers)
    clock["statistics"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    used = {}

    class _Recording:
        def get(self, k, n_, step, mode, alpha):
            table = provider.get(k, n_, step, mode, alpha)
            used[k] = table
            return table

    profile = test_profile(tprof, grid, _Recording(), alpha=config.alpha, k_max=k_max,
                           bonferroni=config.bonferroni)
    clock["test"] = time.perf_counter() - t0

    masked = int(np.count_nonzero(field_.reason))
    echo = asdict(config)
    echo["k_max"] = k_max
    data = {
        "format": "scaledim-report v1",
        "version": __version__,
        "config": echo,
        "data": {"n": n, "d": d},
        "grid": {
            "labels": grid.labels,
            "percents": grid.percents,
            "raw": grid.raw,
            "standardized": grid.standardized,
            "mode": grid.mode,
            "normalizer": grid.normalizer,
            "step_percent": grid.step_percent,
        },
        "normalizers": {str(k): {"a_k": normalizers[k], "provenance": normalizers.provenance[k]}
                        for k in sorted(normalizers.values)},
        "t_profile": {
            "orders": tprof.orders,
            "values": tprof.values,
            "counts": tprof.counts,
            "reliable": tprof.reliable,
            "min_count": tprof.min_count,
        },
        "nulls": {
            str(k): {
                "key": asdict(t.key),
                "labels": t.labels,
                "mean": t.mean,
                "lower": t.lower,
                "upper": t.upper,
                "std_scale_mean": t.std_scale_mean,
            }
            for k, t in sorted(used.items())
        },
        "profile": {
            "alpha": profile.alpha,
            "band_alpha": profile.band_alpha,
            "k_max": profile.k_max,
            "verdicts": [
                {
                    "label": v.label,
                    "raw_scale": v.raw_scale,
                    "std_scale": v.std_scale,
                    "accepted_k": v.accepted_k,
                    "relation": v.relation,
                    "effective_dimension": v.effective_dimension,
                    "unresolved_lower_bound": v.lower_bound,
                    "reliable": v.reliable,
                    "tried": v.tried,
                }
                for v in profile.verdicts
            ],
            "summary": profile.summary(tprof),
        },
        "diagnostics": {
            "duplicate_pairs": len(index.duplicates),
            "masked_cells": masked,
            "unreliable_cells": int(np.count_nonzero(~tprof.reliable)),
        },
    }
    # cache traffic depends on what earlier runs left behind, so it travels with the timings
    clock["null_cache_hits"] = provider.hits
    clock["null_tables_generated"] = provider.generated
    return AnalysisReport(data=data, timing=clock)
