"""Adjusted Rand index and consistency curves between dendrograms."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .cluster import Dendrogram, Parcellation, cut_by_count
from .errors import CorrespondenceError, ParameterError


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """``counts[i, j]`` seeds carry label ``i`` in the first partition and ``j`` in the second."""

    counts: np.ndarray

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _labels(p) -> np.ndarray:
    return p.labels if isinstance(p, Parcellation) else np.asarray(p)


def contingency(p, q) -> ContingencyTable:
    a, b = _labels(p), _labels(q)
    if a.shape != b.shape:
        raise CorrespondenceError(f"partitions cover {a.size} and {b.size} seeds")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    ra = ai.max() + 1 if a.size else 0
    rb = bi.max() + 1 if b.size else 0
    counts = np.bincount(ai.ravel() * rb + bi.ravel(), minlength=ra * rb).reshape(ra, rb)
    return ContingencyTable(counts.astype(np.int64))


def _pairs(x: np.ndarray) -> int:
    # exact: Python ints do not overflow
    return sum(v * (v - 1) // 2 for v in x.tolist())


def adjusted_rand_index(p, q) -> float:
    """Hubert-Arabie adjusted Rand index.

    All pair counts are exact integers; the result is one correctly rounded
    division.  When the chance-corrected denominator vanishes (both
    partitions all singletons, or both a single parcel) the result is 1 if
    the partitions are equal and 0 otherwise.
    """
    table = contingency(p, q)
    together_both = _pairs(table.counts.ravel())
    together_p = _pairs(table.row_sums)
    together_q = _pairs(table.col_sums)
    n_pairs = _pairs(np.array([table.total]))
    # both sides scaled by 2 * n_pairs to stay in integers
    num = 2 * (together_both * n_pairs - together_p * together_q)
    den = (together_p + together_q) * n_pairs - 2 * together_p * together_q
    if den == 0:
        rows, cols = table.counts.shape
        same = rows == cols and np.count_nonzero(table.counts) == rows
        return 1.0 if same else 0.0
    return num / den


def consistency_curve(dendros, k_values) -> list[tuple[int, int, int, float]]:
    """Pairwise ARI between every two dendrograms cut at each ``k``.

    Returns rows ``(k, index_a, index_b, ari)`` with ``index_a < index_b``.
    """
    dendros = list(dendros)
    if dendros:
        n = dendros[0].n_leaves
        for i, d in enumerate(dendros):
            if d.n_leaves != n:
                raise CorrespondenceError(f"dendrogram {i} has {d.n_leaves} leaves, dendrogram 0 has {n}")
    rows = []
    for k in k_values:
        cuts = []
        for i, d in enumerate(dendros):
            try:
                cuts.append(cut_by_count(d, k))
            except ParameterError as err:
                raise ParameterError(f"dendrogram {i}: {err}") from None
        for a, b in combinations(range(len(cuts)), 2):
            rows.append((int(k), a, b, adjusted_rand_index(cuts[a], cuts[b])))
    return rows
