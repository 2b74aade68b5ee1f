"""Spatially constrained Ward clustering of logit tractograms.

Clustering runs in two phases.  The constrained phase starts from one
cluster per seed and absorbs every cluster whose surface area is below a
threshold into its closest (by Ward cost) spatial neighbor.  The free phase
then runs ordinary Ward agglomeration over the surviving clusters until one
remains.  Both phases are recorded in one :class:`Dendrogram`, so any
granularity can be cut out later without reclustering.

Merge heights are Ward costs: the increase of the total within-cluster sum
of squares caused by the merge (not its square root).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit

from .errors import (
    ConstraintError,
    DimensionError,
    DisconnectedGraphError,
    ParameterError,
    SpaceMismatchError,
)
from .mesh import AdjacencyGraph
from .transform import LOGIT, ConnectivityMatrix

# Ward costs this close (relative) count as tied.  Lance-Williams updates and
# direct recomputation round differently, so costs that are equal in exact
# arithmetic can differ by a few ulps; without a tolerance the tie-break
# would depend on that rounding.
TIE_RTOL = 1e-12


def canonical_labels(labels) -> np.ndarray:
    """Relabel so that parcels are numbered by increasing smallest member index."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return np.zeros(0, dtype=np.int64)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse.ravel()]


@dataclass(frozen=True, eq=False)
class Parcellation:
    """Flat assignment of seeds to parcels ``0 .. n_parcels - 1``, every label used."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ParameterError(f"labels must be 1-D, got shape {labels.shape}")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            raise ParameterError("labels must be integers")
        labels = labels.astype(np.int64)
        if labels.size:
            present = np.zeros(labels.max() + 1, dtype=bool) if labels.min() >= 0 else None
            if present is None:
                raise ParameterError("labels must be non-negative")
            present[labels] = True
            if not present.all():
                raise ParameterError(
                    f"labels must cover 0..{labels.max()} without gaps; "
                    f"missing {np.flatnonzero(~present)[:5].tolist()}"
                )
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels) -> "Parcellation":
        """Accept any hashable-by-value labeling and number it canonically."""
        return cls(canonical_labels(labels))

    @property
    def n_seeds(self) -> int:
        return len(self.labels)

    @property
    def n_parcels(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def members(self, label: int) -> np.ndarray:
        if not 0 <= label < self.n_parcels:
            raise ParameterError(f"unknown parcel label {label}; have {self.n_parcels} parcels")
        return np.flatnonzero(self.labels == label)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_parcels)

    def canonical(self) -> "Parcellation":
        return Parcellation(canonical_labels(self.labels))

    def same_partition(self, other: "Parcellation") -> bool:
        """True when both group the seeds identically, whatever the label values."""
        return self.n_seeds == other.n_seeds and np.array_equal(
            canonical_labels(self.labels), canonical_labels(other.labels)
        )


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Merge tree over ``n_leaves`` seeds.

    Leaves are nodes ``0 .. n_leaves - 1``; the ``k``-th merge creates node
    ``n_leaves + k``.  ``left[k] < right[k]`` always.  ``n_constrained`` is the
    number of leading merges made by the minimum-size phase, or ``None`` when
    unknown (e.g. after reading a file).
    """

    n_leaves: int
    left: np.ndarray
    right: np.ndarray
    height: np.ndarray
    size: np.ndarray
    n_constrained: int | None = 0

    def __post_init__(self):
        left = np.asarray(self.left, dtype=np.int64)
        right = np.asarray(self.right, dtype=np.int64)
        height = np.asarray(self.height, dtype=np.float64)
        size = np.asarray(self.size, dtype=np.int64)
        m = len(left)
        if not (len(right) == len(height) == len(size) == m):
            raise ParameterError("merge arrays differ in length")
        if m > max(self.n_leaves - 1, 0):
            raise ParameterError(f"{m} merges for {self.n_leaves} leaves")
        node_ids = self.n_leaves + np.arange(m)
        if m and ((left < 0).any() or (right >= node_ids).any() or (left >= right).any()):
            raise ParameterError("merge children must be existing nodes with left < right")
        children = np.concatenate([left, right])
        if len(np.unique(children)) != len(children):
            raise ParameterError("a node is merged more than once")
        counts = np.ones(self.n_leaves + m, dtype=np.int64)
        for k in range(m):
            counts[self.n_leaves + k] = counts[left[k]] + counts[right[k]]
        if not np.array_equal(counts[self.n_leaves :], size):
            raise ParameterError("member counts do not add up along the tree")
        for a in (left, right, height, size):
            a.setflags(write=False)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "height", height)
        object.__setattr__(self, "size", size)

    @property
    def n_merges(self) -> int:
        return len(self.left)

    @property
    def is_complete(self) -> bool:
        return self.n_merges == self.n_leaves - 1

    def free_heights(self) -> np.ndarray:
        """Heights of the unconstrained Ward phase."""
        return self.height[self.n_constrained or 0 :]

    def to_linkage(self) -> np.ndarray:
        """Same tree as a ``scipy.cluster.hierarchy`` linkage matrix."""
        return np.column_stack([self.left, self.right, self.height, self.size]).astype(np.float64)


def ward_distance(centroid_a, size_a, centroid_b, size_b) -> float:
    """Increase of the within-cluster sum of squares when merging two clusters."""
    centroid_a = np.asarray(centroid_a, dtype=np.float64)
    centroid_b = np.asarray(centroid_b, dtype=np.float64)
    if centroid_a.shape != centroid_b.shape:
        raise DimensionError(f"centroid shapes differ: {centroid_a.shape} vs {centroid_b.shape}")
    if size_a <= 0 or size_b <= 0:
        raise ParameterError("cluster sizes must be positive")
    diff = centroid_a - centroid_b
    return float(size_a * size_b / (size_a + size_b) * np.dot(diff, diff))


def lance_williams_update(d_ak, d_bk, d_ab, n_a, n_b, n_k):
    """Ward cost between cluster K and the union of A and B, from the three pairwise costs.

    Works elementwise on arrays, which is how the agglomeration loop uses it.
    """
    return ((n_a + n_k) * d_ak + (n_b + n_k) * d_bk - n_k * d_ab) / (n_a + n_b + n_k)


class ClusterState:
    """Active clusters during the constrained phase, keyed by node id."""

    def __init__(self, features: np.ndarray, graph: AdjacencyGraph, areas: np.ndarray):
        n = len(features)
        self.n_leaves = n
        self.next_id = n
        self.centroid = {i: features[i] for i in range(n)}
        self.count = dict.fromkeys(range(n), 1)
        self.area = {i: float(a) for i, a in enumerate(areas)}
        self.members = {i: [i] for i in range(n)}
        self.neighbors = {i: set(nb) for i, nb in enumerate(graph.neighbor_lists)}

    @property
    def active(self) -> list[int]:
        return sorted(self.count)

    def cost(self, a: int, b: int) -> float:
        return ward_distance(self.centroid[a], self.count[a], self.centroid[b], self.count[b])

    def merge(self, a: int, b: int) -> tuple[int, float]:
        cost = self.cost(a, b)
        new = self.next_id
        self.next_id += 1
        na, nb = self.count.pop(a), self.count.pop(b)
        ca, cb = self.centroid.pop(a), self.centroid.pop(b)
        self.count[new] = na + nb
        self.centroid[new] = (na * ca + nb * cb) / (na + nb)
        self.area[new] = self.area.pop(a) + self.area.pop(b)
        self.members[new] = self.members.pop(a) + self.members.pop(b)
        nbrs = (self.neighbors.pop(a) | self.neighbors.pop(b)) - {a, b}
        for k in nbrs:
            self.neighbors[k] -= {a, b}
            self.neighbors[k].add(new)
        self.neighbors[new] = nbrs
        return new, cost


def enforce_min_size(state: ClusterState, min_area: float) -> list[tuple[int, int, float, int]]:
    """Merge undersized clusters into spatial neighbors until all reach ``min_area``.

    The smallest undersized cluster (lowest id on ties) goes first and joins
    the neighbor with the lowest Ward cost (lowest id on ties).  ``state`` is
    updated in place.

    Returns
    -------
    list of (left_id, right_id, ward_cost, member_count)
        One record per merge, in order; the k-th creates node ``n_leaves + k``
        when ``state`` started from singletons.

    Raises
    ------
    ConstraintError
        An undersized cluster has no neighbor left while other clusters
        exist, i.e. a connected component is smaller than ``min_area``.
    """
    log = []
    if min_area <= 0:
        return log
    heap = [(state.area[c], c) for c in state.active if state.area[c] < min_area]
    heapq.heapify(heap)
    while heap:
        area, c = heapq.heappop(heap)
        if c not in state.count:
            continue
        nbrs = state.neighbors[c]
        if not nbrs:
            if len(state.count) == 1:
                break
            members = sorted(state.members[c])
            raise ConstraintError(
                f"component of {len(members)} vertices (first {members[:10]}) has area "
                f"{area:.6g} < min_area {min_area:.6g} and no neighbors to merge with"
            )
        costs = {k: state.cost(c, k) for k in nbrs}
        limit = min(costs.values()) * (1 + TIE_RTOL)
        target = min(k for k, v in costs.items() if v <= limit)
        new, cost = state.merge(c, target)
        log.append((min(c, target), max(c, target), cost, state.count[new]))
        if state.area[new] < min_area:
            heapq.heappush(heap, (state.area[new], new))
    return log


def _nearest(row: np.ndarray, ids: np.ndarray) -> tuple[float, int]:
    """Row minimum and the slot of the lowest id tied with it."""
    v = row.min()
    if v == np.inf:
        return np.inf, -1
    hits = np.flatnonzero(row <= v * (1 + TIE_RTOL))
    j = hits[0] if len(hits) == 1 else hits[np.argmin(ids[hits])]
    return v, int(j)


def ward_agglomerate(centroids, counts, ids, next_id):
    """Unconstrained Ward agglomeration of the given clusters down to one.

    ``ids`` must be increasing; new nodes are numbered from ``next_id``.
    Returns merge records as :func:`enforce_min_size` does.

    Every cluster caches its nearest neighbor; after a merge only the rows
    that pointed at one of the merged clusters are rescanned, and all other
    distances to the new cluster come from the Lance-Williams recurrence.
    Ties (within ``TIE_RTOL``) go to the lexicographically smallest
    ``(id, id)`` pair.  Recorded heights carry their running maximum, which
    only absorbs rounding: Ward is reducible, so exact heights never drop.
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    sizes = np.asarray(counts, dtype=np.float64).copy()
    ids = np.asarray(ids, dtype=np.int64).copy()
    m = len(ids)
    log = []
    if m < 2:
        return log
    D = cdist(centroids, centroids, "sqeuclidean")
    D *= np.outer(sizes, sizes) / np.add.outer(sizes, sizes)
    np.fill_diagonal(D, np.inf)
    nn_val = np.empty(m)
    nn_idx = np.empty(m, dtype=np.int64)
    for k in range(m):
        nn_val[k], nn_idx[k] = _nearest(D[k], ids)

    last = 0.0
    for _ in range(m - 1):
        rows = np.flatnonzero(nn_val <= nn_val.min() * (1 + TIE_RTOL))
        best = None
        for r in rows:
            j = nn_idx[r]
            pair = (min(ids[r], ids[j]), max(ids[r], ids[j]))
            if best is None or pair < best[0]:
                best = (pair, r, j)
        (lo, hi), a, b = best
        d_ab = D[a, b]
        v = last = max(d_ab, last)
        na, nb = sizes[a], sizes[b]
        new = lance_williams_update(D[a], D[b], d_ab, na, nb, sizes)
        # a merge never brings another cluster closer than the merged pair was
        np.maximum(new, v, out=new)
        D[a] = new
        D[:, a] = new
        D[b] = np.inf
        D[:, b] = np.inf
        sizes[a] = na + nb
        ids[a] = next_id
        log.append((int(lo), int(hi), float(v), int(na + nb)))
        next_id += 1

        nn_val[b], nn_idx[b] = np.inf, -1
        stale = np.flatnonzero((nn_idx == a) | (nn_idx == b))
        for k in stale:
            nn_val[k], nn_idx[k] = _nearest(D[k], ids)
        nn_val[a], nn_idx[a] = _nearest(D[a], ids)
        # the new cluster has the largest id: a clear improvement makes it the
        # nearest outright, a near tie needs the row rescanned
        clear = new * (1 + TIE_RTOL) < nn_val
        nn_val[clear] = new[clear]
        nn_idx[clear] = a
        near = ~clear & np.isfinite(new) & (new <= nn_val * (1 + TIE_RTOL))
        for k in np.flatnonzero(near):
            nn_val[k], nn_idx[k] = _nearest(D[k], ids)
    return log


def _as_features(features) -> np.ndarray:
    if isinstance(features, ConnectivityMatrix):
        if features.space != LOGIT:
            raise SpaceMismatchError("clustering expects logit-space features")
        return features.values
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionError(f"features must be 2-D, got shape {x.shape}")
    return x


def build_dendrogram(
    features,
    graph: AdjacencyGraph | None = None,
    areas=None,
    min_area: float = 0.0,
    allow_disconnected: bool = False,
) -> Dendrogram:
    """Cluster seeds into a full Ward dendrogram under a minimum parcel size.

    Parameters
    ----------
    features : ConnectivityMatrix or array_like, shape (n_seeds, n_targets)
        Logit-space tractograms, one row per graph vertex.
    graph : AdjacencyGraph, optional
        Spatial neighborhood of the seeds.  Only needed when ``min_area > 0``.
    areas : array_like, optional
        Per-seed area in mm².  ``None`` counts vertices instead (unit areas).
    min_area : float
        Smallest admissible parcel at the finest granularity.
    allow_disconnected : bool
        Accept graphs with several connected components.  Components smaller
        than ``min_area`` still raise.
    """
    x = _as_features(features)
    n = len(x)
    if n == 0:
        raise ParameterError("no seeds to cluster")
    if areas is None:
        areas = np.ones(n)
    areas = np.asarray(areas, dtype=np.float64)
    if areas.shape != (n,):
        raise DimensionError(f"areas has shape {areas.shape}, expected ({n},)")
    if graph is None:
        if min_area > 0:
            raise ParameterError("a spatial graph is required when min_area > 0")
        graph = AdjacencyGraph.from_edges(n, np.empty((0, 2)))
    else:
        if graph.n_vertices != n:
            raise DimensionError(f"graph has {graph.n_vertices} vertices, features have {n} rows")
        if not allow_disconnected and n > 1:
            n_comp, _ = graph.connected_components()
            if n_comp > 1:
                raise DisconnectedGraphError(
                    f"adjacency graph has {n_comp} connected components; "
                    "pass allow_disconnected=True to cluster it anyway"
                )

    state = ClusterState(x, graph, areas)
    log = enforce_min_size(state, min_area)
    active = state.active
    log += ward_agglomerate(
        [state.centroid[c] for c in active],
        [state.count[c] for c in active],
        active,
        state.next_id,
    )
    left, right, height, size = (np.array(col) for col in zip(*log)) if log else ([], [], [], [])
    n_constrained = len(log) - (len(active) - 1)
    return Dendrogram(n, left, right, height, size, n_constrained=n_constrained)


def _cut(d: Dendrogram, n_applied: int) -> Parcellation:
    n = d.n_leaves
    top = np.arange(n + n_applied)
    left = d.left.tolist()
    right = d.right.tolist()
    for k in range(n_applied - 1, -1, -1):
        node = top[n + k]
        top[left[k]] = node
        top[right[k]] = node
    return Parcellation(canonical_labels(top[:n]))


def cut_by_count(d: Dendrogram, k: int) -> Parcellation:
    """Parcellation with exactly ``k`` parcels: undo the last ``k - 1`` merges."""
    lowest = d.n_leaves - d.n_merges
    if not lowest <= k <= d.n_leaves or k < 1:
        raise ParameterError(f"k={k} outside [{max(lowest, 1)}, {d.n_leaves}]")
    return _cut(d, d.n_leaves - k)


def cut_by_height(d: Dendrogram, h: float) -> Parcellation:
    """Apply every merge at or below height ``h``.

    Heights are read through their running maximum, so a low merge that
    depends on a higher earlier one is not applied before it.  For Ward
    phases that is the plain height.
    """
    if h < 0:
        raise ParameterError(f"cut height must be non-negative, got {h}")
    envelope = np.maximum.accumulate(d.height) if d.n_merges else d.height
    return _cut(d, int(np.searchsorted(envelope, h, side="right")))


def finest_parcellation(d: Dendrogram) -> Parcellation:
    """Clusters left after the minimum-size phase."""
    if d.n_constrained is None:
        raise ParameterError("dendrogram does not record its constrained phase")
    return _cut(d, d.n_constrained)


def parcel_fingerprint(features, p: Parcellation, label: int) -> np.ndarray:
    """Connection probabilities of a parcel: inverse logit of its mean logit row."""
    x = _as_features(features)
    if len(x) != p.n_seeds:
        raise DimensionError(f"features have {len(x)} rows, parcellation has {p.n_seeds} seeds")
    return expit(x[p.members(label)].mean(axis=0))


def within_cluster_sse(features, p: Parcellation) -> float:
    """Total squared distance of every seed to its parcel centroid."""
    x = _as_features(features)
    total = 0.0
    for label in range(p.n_parcels):
        rows = x[p.labels == label]
        total += float(((rows - rows.mean(axis=0)) ** 2).sum())
    return total
