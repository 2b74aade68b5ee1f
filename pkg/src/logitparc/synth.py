"""Synthetic cohorts drawn from the logistic random-effects model.

A seed ``p`` in cluster ``c`` of subject ``s`` has logit tractogram

    beta[c] + eps_c[p] + eps_s[s, p]

with ``eps_c[p] ~ N(0, sigma_c^2 I)`` drawn once per seed and shared by all
subjects, and ``eps_s[s, p] ~ N(0, sigma_s^2 I)`` drawn independently for
every subject and seed.  Averaging over subjects therefore removes
``eps_s`` but keeps ``eps_c``.  Optionally every entry is observed through
``N`` Bernoulli streamlines.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import expit

from .baselines import homogeneous_random_parcellation, make_rng
from .cluster import Parcellation
from .errors import ParameterError
from .mesh import SurfaceMesh, build_adjacency
from .transform import LOGIT, PROBABILITY, ConnectivityMatrix, StreamlineCounts

EPS_C_CONVENTION = "per-seed, shared across subjects"
EPS_S_CONVENTION = "per-(subject, seed), independent"


def grid_mesh(rows: int, cols: int, spacing: float = 1.0) -> SurfaceMesh:
    """Planar ``rows x cols`` vertex grid, every cell split along the same diagonal.

    Vertex ``r * cols + c`` sits at ``(c * spacing, r * spacing, 0)``.
    """
    if rows < 2 or cols < 2:
        raise ParameterError(f"grid needs at least 2x2 vertices, got {rows}x{cols}")
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    vertices = np.column_stack([c.ravel() * spacing, r.ravel() * spacing, np.zeros(rows * cols)])
    v00 = (r[:-1, :-1] * cols + c[:-1, :-1]).ravel()
    v01, v10, v11 = v00 + 1, v00 + cols, v00 + cols + 1
    triangles = np.concatenate([np.column_stack([v00, v01, v11]), np.column_stack([v00, v11, v10])])
    return SurfaceMesh(vertices, triangles)


@dataclass(frozen=True, eq=False)
class GroundTruthModel:
    partition: Parcellation
    betas: np.ndarray  # (k, n_targets), logit units
    sigma_c: float = 0.0
    sigma_s: float = 0.0
    n_subjects: int = 1
    streamlines_per_seed: int | None = None

    def __post_init__(self):
        betas = np.atleast_2d(np.asarray(self.betas, dtype=np.float64))
        if len(betas) != self.partition.n_parcels:
            raise ParameterError(
                f"{len(betas)} betas for {self.partition.n_parcels} clusters"
            )
        if self.sigma_c < 0 or self.sigma_s < 0:
            raise ParameterError("noise standard deviations must be non-negative")
        if self.n_subjects < 1:
            raise ParameterError("need at least one subject")
        if self.streamlines_per_seed is not None and self.streamlines_per_seed < 1:
            raise ParameterError("streamlines_per_seed must be positive")
        if len(betas) > 1 and pdist(betas).min() == 0:
            raise ParameterError("two clusters share the same connectivity fingerprint")
        object.__setattr__(self, "betas", betas)

    @property
    def k(self) -> int:
        return len(self.betas)

    @property
    def n_seeds(self) -> int:
        return self.partition.n_seeds

    @property
    def n_targets(self) -> int:
        return self.betas.shape[1]

    def with_noise(self, **changes) -> "GroundTruthModel":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class SyntheticCohort:
    model: GroundTruthModel
    eps_c: np.ndarray  # (n_seeds, n_targets)
    eps_s: np.ndarray  # (n_subjects, n_seeds, n_targets)
    logits: np.ndarray  # (n_subjects, n_seeds, n_targets)
    successes: np.ndarray | None = None  # same shape, when observed

    @property
    def n_subjects(self) -> int:
        return len(self.logits)

    def subject(self, s: int, observed: bool = True) -> ConnectivityMatrix:
        """Subject ``s``'s tractogram.

        With an observation layer and ``observed=True`` this is the
        probability-space proportion matrix; otherwise the exact logits.
        """
        if observed and self.successes is not None:
            return ConnectivityMatrix(
                self.successes[s] / self.model.streamlines_per_seed, PROBABILITY
            )
        return ConnectivityMatrix(self.logits[s], LOGIT)

    def counts(self, s: int) -> StreamlineCounts:
        if self.successes is None:
            raise ParameterError("cohort has no observation layer")
        return StreamlineCounts(self.successes[s], self.model.streamlines_per_seed)

    def subjects(self, observed: bool = True) -> list[ConnectivityMatrix]:
        return [self.subject(s, observed) for s in range(self.n_subjects)]


def sample_cohort(model: GroundTruthModel, seed) -> SyntheticCohort:
    rng = make_rng(seed)
    n, t, S = model.n_seeds, model.n_targets, model.n_subjects
    eps_c = rng.normal(0.0, model.sigma_c, size=(n, t)) if model.sigma_c > 0 else np.zeros((n, t))
    eps_s = (
        rng.normal(0.0, model.sigma_s, size=(S, n, t)) if model.sigma_s > 0 else np.zeros((S, n, t))
    )
    logits = model.betas[model.partition.labels] + eps_c + eps_s
    successes = None
    if model.streamlines_per_seed is not None:
        successes = rng.binomial(model.streamlines_per_seed, expit(logits))
    return SyntheticCohort(model, eps_c, eps_s, logits, successes)


def planted_partition(
    mesh: SurfaceMesh, k: int, n_targets: int, separation: float, seed
) -> GroundTruthModel:
    """Random connected partition of ``mesh`` into ``k`` clusters with distinct fingerprints.

    Fingerprints are drawn uniformly in [-6, 6] logit units and, if two lie
    closer than ``separation``, all are scaled up about the origin until the
    closest pair is exactly ``separation`` apart.  Noise levels are left at
    zero for the caller to set with :meth:`GroundTruthModel.with_noise`.
    """
    if k < 1:
        raise ParameterError(f"k must be positive, got {k}")
    if separation <= 0:
        raise ParameterError(f"separation must be positive, got {separation}")
    if n_targets < 1:
        raise ParameterError(f"n_targets must be positive, got {n_targets}")
    rng = make_rng(seed)
    partition = homogeneous_random_parcellation(build_adjacency(mesh), k, rng)
    betas = rng.uniform(-6.0, 6.0, size=(k, n_targets))
    if k > 1:
        closest = pdist(betas).min()
        while closest < separation:
            # rounding can leave the rescaled pair an ulp short
            betas *= np.nextafter(separation / closest, np.inf)
            closest = pdist(betas).min()
    return GroundTruthModel(partition, betas)
