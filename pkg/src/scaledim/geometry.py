"""Distance indexing, sphere-proximity neighbor ordering and subspace angles.

For a center ``x_i`` and a scale ``s`` the neighbors of ``x_i`` are ranked by
``|s - ||x_j - x_i|| |``, i.e. by how close they are to the sphere of radius
``s`` around ``x_i``.  The angle of order ``k`` is the angle between the vector
to the ``(k+1)``-th ranked neighbor and its orthogonal projection onto the span
of the vectors to the first ``k`` ranked neighbors.

All per-point distance lists are precomputed and sorted once, so each
``(center, scale)`` query reduces to a binary search followed by a short merge
outward from the insertion point.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import (
    DegenerateAngleError,
    DegenerateInputError,
    InputError,
    InsufficientPointsError,
    ParameterError,
)

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-10

# mask reasons stored in AngleField.reason
OK = 0
NO_NEIGHBORS = 1
DEGENERATE_BASE = 2
DEGENERATE_APEX = 3


@dataclass(frozen=True)
class PointCloud:
    """``n`` observations in ``d``-dimensional Euclidean space."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim != 2:
            raise InputError(f"points must be a 2-d array, got shape {pts.shape}")
        n, d = pts.shape
        if n < 3:
            raise InputError(f"need at least 3 points, got {n}")
        if d < 2:
            raise InputError(f"need ambient dimension d >= 2, got {d}")
        if not np.all(np.isfinite(pts)):
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise InputError(f"non-finite coordinate at row {bad[0]}, column {bad[1]}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n


def as_cloud(data) -> PointCloud:
    return data if isinstance(data, PointCloud) else PointCloud(data)


@dataclass
class DistanceIndex:
    """Per-point ascending distance lists.

    Attributes
    ----------
    distances : (n, n-1) float array
        Row ``i`` holds the distances from point ``i`` to every other point,
        ascending, ties ordered by neighbor id.
    neighbors : (n, n-1) int array
        Neighbor ids matching ``distances``.
    pairwise : (n(n-1)/2,) float array
        Condensed pairwise distances, ``i < j`` in row-major order.
    s_min, s_max : float
        Smallest strictly positive and largest pairwise distance.
    duplicates : list of (i, j)
        Pairs ``i < j`` of coincident points.
    zero_counts : (n,) int array
        Number of zero-distance entries leading each row.
    """

    distances: np.ndarray
    neighbors: np.ndarray
    pairwise: np.ndarray
    s_min: float
    s_max: float
    duplicates: list = field(default_factory=list)
    zero_counts: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.distances.shape[0]

    def distance(self, i: int, j: int) -> float:
        """Stored distance between points ``i`` and ``j``."""
        if i == j:
            return 0.0
        row = self.neighbors[i]
        pos = np.flatnonzero(row == j)[0]
        return float(self.distances[i, pos])


def build_distance_index(cloud) -> DistanceIndex:
    """Precompute sorted Euclidean distance lists for every point."""
    cloud = as_cloud(cloud)
    n = cloud.n
    pairwise = pdist(cloud.points)
    positive = pairwise[pairwise > 0]
    if positive.size == 0:
        raise DegenerateInputError("all points are identical; s_min is undefined")

    full = squareform(pairwise)
    # self goes first under a stable sort, ties among the rest stay in id order
    np.fill_diagonal(full, -1.0)
    order = np.argsort(full, axis=1)
    dist = np.take_along_axis(full, order, axis=1)
    tied = np.flatnonzero((np.diff(dist, axis=1) == 0).any(axis=1))
    if tied.size:
        # exact distance ties need the id tie-break, which only a stable sort gives
        order[tied] = np.argsort(full[tied], axis=1, kind="stable")
        dist[tied] = np.take_along_axis(full[tied], order[tied], axis=1)
    order = order[:, 1:]
    dist = dist[:, 1:]
    del full
    id_dtype = np.int32 if n < 2**31 else np.int64
    order = order.astype(id_dtype, copy=False)

    zero_counts = np.count_nonzero(dist == 0.0, axis=1)
    duplicates = []
    if zero_counts.any():
        for i in np.flatnonzero(zero_counts):
            for j in order[i, : zero_counts[i]]:
                if i < j:
                    duplicates.append((int(i), int(j)))
        logger.warning(
            "%d duplicate point pair(s) found; they are skipped as neighbors of each other",
            len(duplicates),
        )

    return DistanceIndex(
        distances=dist,
        neighbors=order,
        pairwise=pairwise,
        s_min=float(positive.min()),
        s_max=float(pairwise.max()),
        duplicates=duplicates,
        zero_counts=zero_counts,
    )


@dataclass(frozen=True)
class NeighborSelection:
    center: int
    s: float
    ids: tuple


def _select_row(dist, ids, s, count, start):
    """Exact sphere-proximity selection on one sorted row.

    ``start`` is the first admissible position (skips zero distances).
    Returns an array of positions into the row, or ``None`` when fewer than
    ``count`` admissible entries exist.
    """
    m = dist.shape[0]
    if m - start < count:
        return None
    p = start + int(np.searchsorted(dist[start:], s, side="left"))
    lo = max(start, p - count)
    # extend left over criterion ties: further left means smaller distance / id
    while lo > start and abs(s - dist[lo - 1]) == abs(s - dist[lo]):
        lo -= 1
    hi = min(m, p + count)
    cand = np.arange(lo, hi)
    d = dist[cand]
    crit = np.abs(s - d)
    keep = np.lexsort((ids[cand], d, crit))[:count]
    return cand[keep]


def sphere_neighbors(
    index: DistanceIndex, center: int, s: float, count: int, skip_duplicates: bool = True
) -> NeighborSelection:
    """Return the ``count`` points closest to the sphere of radius ``s`` around ``center``.

    Ordering is by ``|s - distance|``; ties go to the smaller distance, then
    to the smaller id.  Points coinciding with ``center`` are skipped unless
    ``skip_duplicates`` is false.
    """
    if not s > 0:
        raise ParameterError(f"scale must be positive, got {s}", module="geometry_core")
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}", module="geometry_core")
    if count > index.n - 1:
        raise InsufficientPointsError(
            f"requested {count} neighbors but only {index.n - 1} other points exist"
        )
    start = int(index.zero_counts[center]) if skip_duplicates else 0
    pos = _select_row(index.distances[center], index.neighbors[center], s, count, start)
    if pos is None:
        raise InsufficientPointsError(
            f"point {center} has only {index.n - 1 - start} non-coincident neighbors, "
            f"{count} requested"
        )
    return NeighborSelection(center, float(s), tuple(int(j) for j in index.neighbors[center, pos]))


def insertion_points(index: DistanceIndex, scales) -> np.ndarray:
    """Per row, the number of stored distances strictly below each scale, ``(n, G)``."""
    scales = np.asarray(scales, dtype=np.float64)
    dist = index.distances
    out = np.empty((dist.shape[0], scales.size), dtype=np.int64)
    for i in range(dist.shape[0]):
        out[i] = np.searchsorted(dist[i], scales, side="left")
    return out


def sphere_neighbors_grid(index: DistanceIndex, scales, count: int, skip_duplicates: bool = True):
    """Vectorized :func:`sphere_neighbors` for every center and every scale.

    Returns
    -------
    ids : (n, G, count) int array
        Selected neighbor ids; rows of centers with ``valid == False`` are -1.
    valid : (n,) bool array
        Whether the center has at least ``count`` admissible neighbors.
    """
    scales = np.atleast_1d(np.asarray(scales, dtype=np.float64))
    dist, nbr = index.distances, index.neighbors
    n, m = dist.shape
    G = scales.size
    if count > m:
        raise InsufficientPointsError(f"requested {count} neighbors but only {m} other points exist")
    start = index.zero_counts.astype(np.int64) if skip_duplicates else np.zeros(n, dtype=np.int64)
    valid = (m - start) >= count

    p = np.maximum(insertion_points(index, scales), start[:, None])  # (n, G)
    pos = p[:, :, None] + np.arange(-count, count)[None, None, :]
    inside = (pos >= start[:, None, None]) & (pos < m)
    pos_c = np.clip(pos, 0, m - 1)
    rows = np.arange(n)[:, None, None]
    d = dist[rows, pos_c]
    ids = nbr[rows, pos_c]
    crit = np.where(inside, np.abs(scales[None, :, None] - d), np.inf)
    order = np.lexsort((ids, d, crit), axis=-1)[:, :, :count]
    sel = np.take_along_axis(ids, order, axis=2).astype(np.int64)

    # a left window edge that cuts through a run of equal criteria needs the exact path
    lo = np.maximum(start[:, None], p - count)
    edge = (lo > start[:, None]) & valid[:, None]
    if edge.any():
        ri, gi = np.nonzero(edge)
        a = np.abs(scales[gi] - dist[ri, lo[ri, gi] - 1])
        b = np.abs(scales[gi] - dist[ri, lo[ri, gi]])
        for i, g in zip(ri[a == b], gi[a == b]):
            sel[i, g] = nbr[i, _select_row(dist[i], nbr[i], scales[g], count, int(start[i]))]
    sel[~valid] = -1
    return sel, valid


def sphere_neighbors_all(index: DistanceIndex, s: float, count: int, skip_duplicates: bool = True):
    """Single-scale form of :func:`sphere_neighbors_grid`: ``(n, count)`` ids and validity."""
    sel, valid = sphere_neighbors_grid(index, [s], count, skip_duplicates)
    return sel[:, 0, :], valid


def _full_rank_threshold(k: int) -> float:
    # For upper-triangular R / scale with entries bounded by 1 and |diagonal| >= t,
    # ||R^-1||_F <= k (2/t)^k / 2, so t >= 2 (k / 2e10)^(1/k) keeps sigma_min above RANK_RTOL.
    return 2.0 * (k * RANK_RTOL / 2.0) ** (1.0 / k)


def _uncertified(r: np.ndarray, scale: np.ndarray, k: int) -> np.ndarray:
    """Rows of a batch of triangular factors whose full rank is not certified."""
    diag = np.abs(np.diagonal(r, axis1=1, axis2=2)).min(axis=1)
    doubt = np.flatnonzero(diag < _full_rank_threshold(k) * scale)
    # second chance: sigma_min(R) >= 1 / ||R^-1||_F, with a factor 2 of slack for rounding
    cand = doubt[diag[doubt] > 0]
    if cand.size:
        try:
            with np.errstate(all="ignore"):
                inv_norm = np.linalg.norm(np.linalg.inv(r[cand]), axis=(1, 2))
        except np.linalg.LinAlgError:
            inv_norm = np.full(cand.size, np.inf)
        ok = np.isfinite(inv_norm) & (inv_norm * scale[cand] * 2 * RANK_RTOL < 1)
        doubt = np.setdiff1d(doubt, cand[ok], assume_unique=True)
    return doubt


def batch_angles(base: np.ndarray, apex: np.ndarray):
    """Angles between apex vectors and their projections onto base spans.

    Parameters
    ----------
    base : (m, k, d) array
        ``k`` base vectors per configuration, already centered.
    apex : (m, d) array
        Apex vectors, already centered.

    Returns
    -------
    theta : (m,) array in ``[0, pi/2]``; NaN where undefined.
    reason : (m,) int array of mask reasons (``OK`` where defined).
    """
    base = np.asarray(base, dtype=np.float64)
    apex = np.asarray(apex, dtype=np.float64)
    m, k = base.shape[:2]
    theta = np.full(m, np.nan)
    reason = np.zeros(m, dtype=np.int8)
    if m == 0:
        return theta, reason

    norms = np.linalg.norm(base, axis=2)
    scale = norms.max(axis=1)
    vnorm = np.linalg.norm(apex, axis=1)
    reason[scale == 0] = DEGENERATE_BASE
    reason[vnorm == 0] = DEGENERATE_APEX
    good = reason == OK
    if not good.any():
        return theta, reason

    v = apex[good]
    sc = scale[good]
    if k == 1:
        u = base[good, 0] / sc[:, None]
        proj = np.einsum("md,md->m", u, v)[:, None] * u
        along = np.linalg.norm(proj, axis=1)
        across = np.linalg.norm(v - proj, axis=1)
    else:
        mats = np.swapaxes(base[good], 1, 2)
        along = np.empty(len(v))
        across = np.empty(len(v))
        doubt = np.arange(len(v))
        if k < base.shape[2]:
            # QR of [base | apex]: the last column of R splits the apex into
            # its in-span part R[:k, k] and its residual R[k, k]
            r = np.linalg.qr(np.concatenate([mats, v[:, :, None]], axis=2), mode="r")
            along = np.linalg.norm(r[:, :k, k], axis=1)
            across = np.abs(r[:, k, k])
            doubt = _uncertified(r[:, :k, :k], sc, k)
        if doubt.size:
            # rank decided by singular values; only directions above tolerance span
            uu, sv, _ = np.linalg.svd(mats[doubt], full_matrices=False)
            uu = uu * (sv > RANK_RTOL * sc[doubt][:, None])[:, None, :]
            vd = v[doubt]
            proj = np.einsum("mdk,mk->md", uu, np.einsum("mdk,md->mk", uu, vd))
            along[doubt] = np.linalg.norm(proj, axis=1)
            across[doubt] = np.linalg.norm(vd - proj, axis=1)
    # an apex within the rank tolerance of the span lies in it
    across[across <= RANK_RTOL * vnorm[good]] = 0.0
    theta[good] = np.clip(np.arctan2(across, along), 0.0, np.pi / 2)
    return theta, reason


def angle(cloud, center: int, base, apex: int) -> float:
    """Angle (radians, in ``[0, pi/2]``) between ``x_apex - x_center`` and its
    projection onto ``span{x_b - x_center : b in base}``."""
    pts = as_cloud(cloud).points
    base = list(base)
    if apex == center or center in base or apex in base or len(set(base)) != len(base):
        raise ParameterError(
            "base ids must be distinct and differ from center and apex", module="geometry_core"
        )
    vecs = pts[base] - pts[center]
    v = pts[apex] - pts[center]
    theta, reason = batch_angles(vecs[None], v[None])
    if reason[0] == DEGENERATE_APEX:
        raise DegenerateAngleError("apex coincides with center")
    if reason[0] == DEGENERATE_BASE:
        raise DegenerateAngleError("all base vectors are zero")
    return float(theta[0])
