"""Random parcellations that set the chance level for ARI comparisons.

All randomness comes from numpy's PCG64 bit generator.  Trial ``t`` of a run
with master seed ``s`` draws from ``SeedSequence(s, spawn_key=(t,))``, so any
trial can be reproduced on its own.
"""

from __future__ import annotations

import numpy as np

from .cluster import Dendrogram, Parcellation, canonical_labels, cut_by_count
from .errors import ConstraintError, DisconnectedGraphError, ParameterError
from .mesh import AdjacencyGraph
from .metrics import adjusted_rand_index

HOMOGENEOUS = "homogeneous"
HIERARCHICAL = "hierarchical"
MODES = (HOMOGENEOUS, HIERARCHICAL)


def make_rng(seed, trial: int | None = None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    spawn_key = () if trial is None else (trial,)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn_key)))


class _IndexedSet:
    """Set with O(1) add, discard and uniform sampling."""

    def __init__(self):
        self.items = []
        self.pos = {}

    def __len__(self):
        return len(self.items)

    def __contains__(self, item):
        return item in self.pos

    def add(self, item):
        if item not in self.pos:
            self.pos[item] = len(self.items)
            self.items.append(item)

    def discard(self, item):
        i = self.pos.pop(item, None)
        if i is None:
            return
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i

    def sample(self, rng):
        return self.items[int(rng.integers(len(self.items)))]


def homogeneous_random_parcellation(graph: AdjacencyGraph, n_parcels: int, seed) -> Parcellation:
    """Grow ``n_parcels`` connected parcels from uniformly chosen start vertices.

    At every step one (parcel, unassigned neighboring vertex) pair is drawn
    uniformly among all such pairs and the vertex joins the parcel.  Labels
    are numbered in start-vertex draw order.
    """
    n = graph.n_vertices
    if not 1 <= n_parcels <= n:
        raise ParameterError(f"n_parcels={n_parcels} outside [1, {n}]")
    rng = make_rng(seed)
    nbrs = graph.neighbor_lists
    labels = np.full(n, -1, dtype=np.int64)
    starts = rng.choice(n, size=n_parcels, replace=False)
    frontier = []  # (parcel, vertex) pairs; may hold stale entries
    seen = set()

    def claim(v, parcel):
        labels[v] = parcel
        for w in nbrs[v]:
            if labels[w] < 0 and (parcel, w) not in seen:
                seen.add((parcel, w))
                frontier.append((parcel, w))

    for parcel, v in enumerate(starts.tolist()):
        labels[v] = parcel
    for parcel, v in enumerate(starts.tolist()):
        claim(v, parcel)
    remaining = n - n_parcels
    while remaining:
        if not frontier:
            raise DisconnectedGraphError(
                f"{remaining} vertices unreachable from the start vertices; first "
                f"{np.flatnonzero(labels < 0)[:10].tolist()}"
            )
        # rejection of stale pairs keeps the draw uniform over live pairs
        i = int(rng.integers(len(frontier)))
        parcel, v = frontier[i]
        frontier[i] = frontier[-1]
        frontier.pop()
        if labels[v] >= 0:
            continue
        claim(v, parcel)
        remaining -= 1
    return Parcellation(labels)


def parcel_adjacency(initial: Parcellation, graph: AdjacencyGraph) -> AdjacencyGraph:
    """Graph over parcels: two parcels touch when any of their vertices are neighbors."""
    e = graph.edges()
    le = initial.labels[e]
    return AdjacencyGraph.from_edges(initial.n_parcels, le[le[:, 0] != le[:, 1]])


def random_hierarchical_merge(
    initial: Parcellation,
    graph: AdjacencyGraph | None,
    seed,
    adjacency_constrained: bool = True,
) -> Dendrogram:
    """Merge uniformly random pairs of parcels until one is left.

    Leaves are the parcels of ``initial``.  In constrained mode only pairs
    of touching parcels are eligible.  Merge heights are the ordinals
    1, 2, 3, ...; only count cuts are meaningful on the result.
    """
    rng = make_rng(seed)
    p = initial.n_parcels
    records = []
    if adjacency_constrained:
        if graph is None:
            raise ParameterError("adjacency-constrained merging needs a graph")
        pg = parcel_adjacency(initial, graph)
        nbrs = {i: set(nb) for i, nb in enumerate(pg.neighbor_lists)}
        pairs = _IndexedSet()
        for i, j in pg.edges().tolist():
            pairs.add((i, j))
        next_id = p
        while next_id < 2 * p - 1:
            if not pairs:
                raise ConstraintError(
                    f"no adjacent parcels left to merge with {2 * p - 1 - next_id} merges to go"
                )
            a, b = pairs.sample(rng)
            new = next_id
            next_id += 1
            merged = (nbrs.pop(a) | nbrs.pop(b)) - {a, b}
            pairs.discard((a, b))
            for k in merged:
                for old in (a, b):
                    if old in nbrs[k]:
                        nbrs[k].discard(old)
                        pairs.discard((min(k, old), max(k, old)))
                nbrs[k].add(new)
                pairs.add((k, new))
            nbrs[new] = merged
            records.append((a, b))
    else:
        active = _IndexedSet()
        for i in range(p):
            active.add(i)
        for new in range(p, 2 * p - 1):
            i, j = rng.choice(len(active), size=2, replace=False)
            a, b = sorted((active.items[i], active.items[j]))
            active.discard(a)
            active.discard(b)
            active.add(new)
            records.append((a, b))

    sizes = np.ones(2 * p - 1, dtype=np.int64)
    for k, (a, b) in enumerate(records):
        sizes[p + k] = sizes[a] + sizes[b]
    left = [a for a, _ in records]
    right = [b for _, b in records]
    return Dendrogram(
        p, left, right, np.arange(1, len(records) + 1, dtype=np.float64), sizes[p:], n_constrained=0
    )


def expand(leaf_partition: Parcellation, initial: Parcellation) -> Parcellation:
    """Lift a partition of ``initial``'s parcels to a partition of its seeds."""
    if leaf_partition.n_seeds != initial.n_parcels:
        raise ParameterError(
            f"leaf partition covers {leaf_partition.n_seeds} parcels, initial has {initial.n_parcels}"
        )
    return Parcellation(canonical_labels(leaf_partition.labels[initial.labels]))


def _trial_parcellations(graph, k_values, mode, master_seed, trial, n_initial, adjacency_constrained):
    if mode == HOMOGENEOUS:
        rng = make_rng(master_seed, trial)
        return {k: homogeneous_random_parcellation(graph, k, rng) for k in k_values}
    rng = make_rng(master_seed, trial)
    initial = homogeneous_random_parcellation(graph, min(n_initial, graph.n_vertices), rng)
    d = random_hierarchical_merge(initial, graph, rng, adjacency_constrained)
    return {k: expand(cut_by_count(d, k), initial) for k in k_values}


def baseline_curve(
    graph: AdjacencyGraph,
    areas=None,
    n_trials: int = 1000,
    k_values=(2, 3, 4, 5, 6),
    mode: str = HOMOGENEOUS,
    seed=0,
    n_initial: int = 300,
    adjacency_constrained: bool = True,
    pairing: str = "disjoint",
) -> list[tuple[int, str, float, float, int]]:
    """Chance-level ARI between random parcellations, per granularity.

    ``n_trials`` random parcellations are drawn per ``k``.  With
    ``pairing="disjoint"`` trials are compared as (0, 1), (2, 3), ..., giving
    independent ARI samples; ``pairing="all"`` compares every pair.

    ``areas`` is accepted for interface symmetry with the clustering entry
    points; neither generator balances parcel areas.

    Returns
    -------
    list of (k, mode, mean_ari, std_ari, n_trials)
        ``std_ari`` is the population standard deviation of the pairwise ARIs.
    """
    if n_trials < 2:
        raise ParameterError(f"n_trials must be at least 2, got {n_trials}")
    if mode not in MODES:
        raise ParameterError(f"unknown mode {mode!r}; expected one of {MODES}")
    if pairing not in ("disjoint", "all"):
        raise ParameterError(f"unknown pairing {pairing!r}")
    k_values = [int(k) for k in k_values]
    for k in k_values:
        limit = graph.n_vertices if mode == HOMOGENEOUS else min(n_initial, graph.n_vertices)
        if not 1 <= k <= limit:
            raise ParameterError(f"k={k} outside [1, {limit}] for {mode} baseline")

    trials = [
        _trial_parcellations(graph, k_values, mode, seed, t, n_initial, adjacency_constrained)
        for t in range(n_trials)
    ]
    if pairing == "disjoint":
        pairs = [(t, t + 1) for t in range(0, n_trials - 1, 2)]
    else:
        pairs = [(a, b) for a in range(n_trials) for b in range(a + 1, n_trials)]
    rows = []
    for k in k_values:
        scores = np.array([adjusted_rand_index(trials[a][k], trials[b][k]) for a, b in pairs])
        rows.append((k, mode, float(scores.mean()), float(scores.std()), n_trials))
    return rows
