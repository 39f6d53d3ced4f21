"""Sequential per-scale dimension test.

At every grid label the orders ``k = 1, 2, ...`` are tried in turn.  The data
statistic ``T_k`` is compared with the null band of the ``(k+1)``-dimensional
standard normal: at or under the upper band the order is accepted (``"below"``
when also under the lower band, ``"within"`` otherwise); above it the next
order is tried.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingNullError, ParameterError
from .geometry import as_cloud, build_distance_index
from .scales import ScaleGrid, TProfile, build_scale_grid, compute_angle_field, compute_T, default_k_max

BELOW, WITHIN, ABOVE = "below", "within", "above"


@dataclass
class ScaleVerdict:
    label: str
    raw_scale: float
    std_scale: float
    accepted_k: int | None
    relation: str | None
    effective_dimension: float | None
    reliable: bool
    tried: list = field(default_factory=list)
    """Per tried order: dict(k, t, mean, lower, upper, relation)."""

    @property
    def unresolved(self) -> bool:
        return self.accepted_k is None

    @property
    def lower_bound(self) -> int | None:
        """For an unresolved verdict, the dimension is at least this."""
        return None if self.accepted_k is not None else (self.tried[-1]["k"] + 1 if self.tried else None)


@dataclass
class DimensionProfile:
    verdicts: list
    k_max: int
    alpha: float
    band_alpha: float

    @property
    def labels(self):
        return [v.label for v in self.verdicts]

    def verdict(self, label: str) -> ScaleVerdict:
        for v in self.verdicts:
            if v.label == label:
                return v
        raise KeyError(label)

    def summary(self, tprofile: TProfile | None = None) -> dict:
        resolved = [v for v in self.verdicts if v.effective_dimension is not None]
        out = {"min_effective_dimension": None, "min_label": None, "noise_indicator": None}
        if resolved:
            best = min(resolved, key=lambda v: v.effective_dimension)
            out["min_effective_dimension"] = best.effective_dimension
            out["min_label"] = best.label
        if tprofile is not None and 1 in tprofile.orders and tprofile.values.shape[1] >= 2:
            row = tprofile.row(1)
            out["noise_indicator"] = float(row[0] - row[1])
        return out


def _as_table_getter(nulls):
    if isinstance(nulls, dict):
        def get(k, n, step_percent, mode, alpha):
            if k not in nulls:
                raise MissingNullError(f"no null table supplied for order {k}")
            return nulls[k]
        return get
    if hasattr(nulls, "get"):
        return nulls.get
    raise TypeError("nulls must be a NullProvider-like object or a dict {k: NullTable}")


def test_profile(tprofile: TProfile, grid: ScaleGrid, nulls, alpha: float = 0.05, k_max: int | None = None,
                 bonferroni: bool = False) -> DimensionProfile:
    """Run the sequential test on an already computed statistic profile.

    ``nulls`` is either an object with ``get(k, n, step_percent, mode, alpha)``
    (see :class:`scaledim.nulls.NullProvider`) or a dict mapping order to
    :class:`scaledim.nulls.NullTable`.  With ``bonferroni`` the band level is
    ``alpha`` divided by the number of grid labels.
    """
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}", module="dim_test")
    if k_max is None:
        k_max = max(tprofile.orders)
    if k_max > max(tprofile.orders):
        raise ParameterError(f"profile has orders up to {max(tprofile.orders)}, k_max={k_max}", module="dim_test")
    band_alpha = alpha / len(grid) if bonferroni else alpha
    get = _as_table_getter(nulls)
    tables = {}

    def table(k):
        if k not in tables:
            tables[k] = get(k, tprofile.n, grid.step_percent, grid.mode, band_alpha)
        return tables[k]

    verdicts = []
    for g, label in enumerate(grid.labels):
        tried = []
        accepted = relation = eff = None
        reliable = True
        for k in range(1, k_max + 1):
            j = tprofile.orders.index(k)
            t = tprofile.values[j, g]
            if math.isnan(t):
                reliable = False
                break
            reliable = reliable and bool(tprofile.reliable[j, g])
            mean, lower, upper = table(k).band(label)
            if t <= upper:
                rel = BELOW if t < lower else WITHIN
            else:
                rel = ABOVE
            tried.append({"k": k, "t": float(t), "mean": mean, "lower": lower, "upper": upper, "relation": rel})
            if rel != ABOVE:
                accepted, relation, eff = k, rel, float(t)
                break
        verdicts.append(ScaleVerdict(
            label=label,
            raw_scale=float(grid.raw[g]),
            std_scale=float(grid.standardized[g]),
            accepted_k=accepted,
            relation=relation,
            effective_dimension=eff,
            reliable=reliable,
            tried=tried,
        ))
    return DimensionProfile(verdicts=verdicts, k_max=k_max, alpha=alpha, band_alpha=band_alpha)


def sequential_test(cloud, nulls, alpha: float = 0.05, k_max: int | None = None, step_percent: float = 5.0,
                    mode: str = "max-pairwise", bonferroni: bool = False):
    """Index, grid, statistics and test for a raw point cloud.

    Returns ``(profile, tprofile, grid)``.
    """
    cloud = as_cloud(cloud)
    if k_max is None:
        k_max = default_k_max(cloud.n, cloud.d)
    index = build_distance_index(cloud)
    grid = build_scale_grid(index, step_percent=step_percent, mode=mode)
    tprofile = compute_T(compute_angle_field(cloud, index, grid, k_max=k_max))
    return test_profile(tprofile, grid, nulls, alpha=alpha, k_max=k_max, bonferroni=bonferroni), tprofile, grid


# pytest would otherwise try to collect this module-level function
test_profile.__test__ = False
