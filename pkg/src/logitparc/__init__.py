"""Connectivity-based surface parcellation with Ward clustering in logit space."""

from .baselines import (
    baseline_curve,
    expand,
    homogeneous_random_parcellation,
    random_hierarchical_merge,
)
from .cluster import (
    ClusterState,
    Dendrogram,
    Parcellation,
    build_dendrogram,
    cut_by_count,
    cut_by_height,
    enforce_min_size,
    finest_parcellation,
    lance_williams_update,
    parcel_fingerprint,
    ward_distance,
)
from .errors import (
    ConstraintError,
    CorrespondenceError,
    EmptyDomainError,
    FormatError,
    MeshError,
    ParameterError,
    ParcellationError,
    SpaceMismatchError,
)
from .mesh import AdjacencyGraph, SurfaceMesh, build_adjacency, induced_submesh, vertex_areas
from .metrics import ContingencyTable, adjusted_rand_index, consistency_curve, contingency
from .synth import GroundTruthModel, SyntheticCohort, grid_mesh, planted_partition, sample_cohort
from .transform import (
    ConnectivityMatrix,
    StreamlineCounts,
    estimate_tractogram,
    groupwise_average,
    inverse_logit,
    logit_transform,
)

__version__ = "0.1.0"
