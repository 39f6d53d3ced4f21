"""Scale grids, angle normalizers, angle fields and the dimension statistic.

The dimension statistic of order ``k`` at scale ``s`` is::

    T_k(s) = k + mean_i(theta_i^k(s)) / a_k

where ``a_k`` is the mean angle of order ``k`` for data filling a
``(k+1)``-dimensional neighborhood.  In that limit the apex direction is
uniform on the unit sphere in ``k+1`` dimensions and the base span is a
hyperplane, so ``sin(theta)`` is distributed as ``|t|`` for one coordinate
``t`` of a uniform direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import geometry
from .errors import DegenerateInputError, ParameterError
from .geometry import DistanceIndex, as_cloud, batch_angles, sphere_neighbors_grid

MODES = ("max-pairwise", "p95-pairwise")
DEFAULT_K_CAP = 10
_GATHER_LIMIT = 4_000_000


def percent_labels(step_percent: float = 5.0):
    """Canonical grid labels and percentages: ``s_min, s_5%, ..., s_max``."""
    if not 0 < step_percent <= 50:
        raise ParameterError(f"step_percent must lie in (0, 50], got {step_percent}", module="scale_stats")
    steps = int(math.floor(100.0 / step_percent + 1e-9))
    percents = [j * step_percent for j in range(steps + 1)]
    if percents[-1] < 100 - 1e-9:
        percents.append(100.0)
    else:
        percents[-1] = 100.0
    labels = []
    for p in percents:
        if p == 0:
            labels.append("s_min")
        elif p == 100:
            labels.append("s_max")
        else:
            labels.append(f"s_{p:g}%")
    return labels, [float(p) for p in percents]


def order_statistic_ranks(percents, count: int) -> np.ndarray:
    """Nearest-rank positions (0-based) of each percentage in a sorted sample of ``count``."""
    ranks = [max(math.ceil(p * count / 100.0 - 1e-9) - 1, 0) for p in percents]
    return np.minimum(np.array(ranks, dtype=np.int64), count - 1)


def percentile_scales(pairwise: np.ndarray, percents) -> np.ndarray:
    positive = pairwise[pairwise > 0]
    if positive.size == 0:
        raise DegenerateInputError("no positive pairwise distances", module="scale_stats")
    ranks = order_statistic_ranks(percents, positive.size)
    return np.partition(positive, np.unique(ranks))[ranks]


@dataclass
class ScaleGrid:
    """Ordered scales with their standardized values and percentile labels."""

    raw: np.ndarray
    standardized: np.ndarray
    labels: list
    percents: list
    mode: str
    normalizer: float
    step_percent: float

    def __len__(self):
        return len(self.labels)

    def position(self, label: str) -> int:
        return self.labels.index(label)


def build_scale_grid(
    index: DistanceIndex, step_percent: float = 5.0, mode: str = "max-pairwise", collapse: bool = True
) -> ScaleGrid:
    """Percentile grid of the pairwise distance distribution.

    Percentiles are nearest-rank order statistics of the strictly positive
    pairwise distances, so ``s_min`` is the smallest positive distance and
    ``s_max`` the largest.  With ``collapse`` repeated values keep only their
    first label.
    """
    if mode not in MODES:
        raise ParameterError(f"unknown normalizer mode {mode!r}; expected one of {MODES}", module="scale_stats")
    labels, percents = percent_labels(step_percent)
    positive = index.pairwise[index.pairwise > 0]
    if positive.size == 0 or positive.min() == positive.max():
        raise DegenerateInputError("fewer than 2 distinct pairwise distances", module="scale_stats")
    raw = percentile_scales(index.pairwise, percents)
    if mode == "max-pairwise":
        norm = index.s_max
    else:
        norm = float(percentile_scales(index.pairwise, [95.0])[0])

    if collapse:
        keep = np.concatenate([[True], np.diff(raw) > 0])
        raw = raw[keep]
        labels = [lab for lab, k in zip(labels, keep) if k]
        percents = [p for p, k in zip(percents, keep) if k]
    return ScaleGrid(
        raw=raw,
        standardized=raw / norm,
        labels=labels,
        percents=percents,
        mode=mode,
        normalizer=float(norm),
        step_percent=float(step_percent),
    )


# --- normalizers -----------------------------------------------------------


def _exact_normalizer(k: int) -> float:
    # a_k = int_0^{pi/2} u cos^{k-1}(u) du / int_0^{pi/2} cos^{k-1}(u) du,
    # both integrals via their reduction formulas in m = k - 1
    moment = [math.pi**2 / 8, math.pi / 2 - 1]
    wallis = [math.pi / 2, 1.0]
    for m in range(2, k):
        moment.append((m - 1) / m * moment[m - 2] - 1.0 / m**2)
        wallis.append((m - 1) / m * wallis[m - 2])
    return moment[k - 1] / wallis[k - 1]


def _quadrature_normalizer(k: int) -> float:
    # density of |t| on [0, 1] is proportional to (1 - t^2)^((k-2)/2); substitute t = sin(u)
    num, _ = integrate.quad(lambda u: u * math.cos(u) ** (k - 1), 0, math.pi / 2, epsabs=1e-13, epsrel=1e-12)
    den, _ = integrate.quad(lambda u: math.cos(u) ** (k - 1), 0, math.pi / 2, epsabs=1e-13, epsrel=1e-12)
    return num / den


def _monte_carlo_normalizer(k: int, samples: int, seed) -> float:
    rng = np.random.default_rng(seed)
    total = 0.0
    done = 0
    chunk = 250_000
    while done < samples:
        m = min(chunk, samples - done)
        g = rng.standard_normal((m, k + 1))
        t = np.abs(g[:, 0]) / np.linalg.norm(g, axis=1)
        total += math.fsum(np.arcsin(np.minimum(t, 1.0)))
        done += m
    return total / samples


def compute_normalizer(k: int, method: str = "exact", samples: int = 1_000_000, seed=0) -> float:
    """Mean limiting angle ``a_k`` of order ``k``.

    ``method`` is ``"exact"`` (reduction formula, available for every k),
    ``"quadrature"`` or ``"monte-carlo"`` (uniform sphere directions drawn
    from ``seed``).
    """
    if int(k) != k or k < 1:
        raise ParameterError(f"order k must be a positive integer, got {k}", module="scale_stats")
    k = int(k)
    if method == "exact":
        return _exact_normalizer(k)
    if method == "quadrature":
        return _quadrature_normalizer(k)
    if method == "monte-carlo":
        if samples < 1:
            raise ParameterError("samples must be positive", module="scale_stats")
        return _monte_carlo_normalizer(k, samples, seed)
    raise ParameterError(f"unknown normalizer method {method!r}", module="scale_stats")


@dataclass
class NormalizerTable:
    values: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @classmethod
    def build(cls, k_max: int, method: str = "exact", **kwargs) -> "NormalizerTable":
        table = cls()
        for k in range(1, k_max + 1):
            table.values[k] = compute_normalizer(k, method=method, **kwargs)
            table.provenance[k] = method
        return table

    def __getitem__(self, k):
        return self.values[k]

    def __contains__(self, k):
        return k in self.values

    def to_text(self) -> str:
        lines = ["k\ta_k\tprovenance"]
        for k in sorted(self.values):
            lines.append(f"{k}\t{self.values[k]:.17g}\t{self.provenance[k]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NormalizerTable":
        table = cls()
        for line in text.strip().splitlines()[1:]:
            k, value, prov = line.split("\t")
            table.values[int(k)] = float(value)
            table.provenance[int(k)] = prov
        return table


_DEFAULT_NORMALIZERS = NormalizerTable.build(32)


def default_normalizers(k_max: int) -> NormalizerTable:
    if k_max <= 32:
        table = NormalizerTable()
        for k in range(1, k_max + 1):
            table.values[k] = _DEFAULT_NORMALIZERS.values[k]
            table.provenance[k] = "exact"
        return table
    return NormalizerTable.build(k_max)


def t_upper_bound(k: int, a_k: float) -> float:
    return k + (math.pi / 2) / a_k


# --- angle field and T -----------------------------------------------------


def max_order(n: int, d: int) -> int:
    return min(d - 1, n - 2)


def default_k_max(n: int, d: int) -> int:
    return min(max_order(n, d), DEFAULT_K_CAP)


@dataclass
class AngleField:
    """Angles indexed ``[point, order, grid position]``.

    ``theta`` holds NaN where a cell is masked; ``reason`` holds the mask
    reason code from :mod:`scaledim.geometry` (0 where the angle is defined).
    """

    theta: np.ndarray
    reason: np.ndarray
    orders: list

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    def order_slice(self, k: int) -> np.ndarray:
        return self.theta[:, self.orders.index(k), :]


def compute_angle_field(cloud, index: DistanceIndex, grid, k_max: int | None = None, orders=None) -> AngleField:
    """Angles of every point for every requested order at every grid scale.

    ``grid`` is a :class:`ScaleGrid` or a plain sequence of raw scales.
    ``orders`` restricts the orders computed (default ``1..k_max``).
    """
    cloud = as_cloud(cloud)
    n, d = cloud.n, cloud.d
    top = max_order(n, d)
    if orders is None:
        if k_max is None:
            k_max = default_k_max(n, d)
        if not 1 <= k_max <= top:
            raise ParameterError(f"k_max must lie in [1, {top}], got {k_max}", module="scale_stats")
        orders = list(range(1, k_max + 1))
    else:
        orders = sorted(int(k) for k in orders)
        if not orders or orders[0] < 1 or orders[-1] > top:
            raise ParameterError(f"orders must lie in [1, {top}], got {orders}", module="scale_stats")
    scales = np.asarray(grid.raw if isinstance(grid, ScaleGrid) else grid, dtype=np.float64)

    pts = cloud.points
    count = orders[-1] + 1
    n_scales = len(scales)
    theta = np.full((n, len(orders), n_scales), np.nan)
    reason = np.zeros(theta.shape, dtype=np.int8)
    # scales are processed in chunks to bound the gathered neighbor-vector array
    chunk = max(1, _GATHER_LIMIT // max(1, n * count * d))
    for g0 in range(0, n_scales, chunk):
        gs = range(g0, min(g0 + chunk, n_scales))
        sel, valid = sphere_neighbors_grid(index, scales[g0:g0 + len(gs)], count)
        valid = np.repeat(valid[:, None], len(gs), axis=1)
        ci, cg = np.nonzero(valid)
        vecs = pts[sel[ci, cg]] - pts[ci][:, None, :]
        for g_local, g in enumerate(gs):
            reason[~valid[:, g_local], :, g] = geometry.NO_NEIGHBORS
        for j, k in enumerate(orders):
            th, why = batch_angles(vecs[:, :k, :], vecs[:, k, :])
            theta[ci, j, cg + g0] = th
            reason[ci, j, cg + g0] = why
    return AngleField(theta=theta, reason=reason, orders=orders)


@dataclass
class TProfile:
    """Dimension statistic indexed ``[order, grid position]``."""

    values: np.ndarray
    counts: np.ndarray
    orders: list
    n: int

    @property
    def min_count(self) -> int:
        return max(10, math.ceil(self.n / 10))

    @property
    def reliable(self) -> np.ndarray:
        return self.counts >= self.min_count

    @property
    def available(self) -> np.ndarray:
        return self.counts > 0

    def row(self, k: int) -> np.ndarray:
        return self.values[self.orders.index(k)]


def compute_T(field: AngleField, normalizers: NormalizerTable | None = None) -> TProfile:
    """Average the unmasked angles per cell and rescale them by ``a_k``."""
    if normalizers is None:
        normalizers = default_normalizers(max(field.orders))
    missing = [k for k in field.orders if k not in normalizers]
    if missing:
        raise ParameterError(f"no normalizer for orders {missing}", module="scale_stats")
    n_orders, n_scales = field.theta.shape[1:]
    values = np.full((n_orders, n_scales), np.nan)
    counts = np.zeros((n_orders, n_scales), dtype=np.int64)
    for j, k in enumerate(field.orders):
        a_k = normalizers[k]
        for g in range(n_scales):
            col = field.theta[:, j, g]
            col = col[~np.isnan(col)]
            counts[j, g] = col.size
            if col.size:
                # fsum is exactly rounded, hence independent of evaluation order
                values[j, g] = k + (math.fsum(col) / col.size) / a_k
    return TProfile(values=values, counts=counts, orders=list(field.orders), n=field.n)


def t_profile(cloud, step_percent: float = 5.0, mode: str = "max-pairwise", k_max: int | None = None, orders=None):
    """Convenience: index, grid, field and profile in one call."""
    index = geometry.build_distance_index(cloud)
    grid = build_scale_grid(index, step_percent=step_percent, mode=mode)
    field = compute_angle_field(cloud, index, grid, k_max=k_max, orders=orders)
    return grid, compute_T(field), field
