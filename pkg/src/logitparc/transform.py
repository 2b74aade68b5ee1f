"""Tractogram estimation and the logit link.

Streamline proportions live in probability space; clustering and averaging
happen in logit space, where the random-effects model is additive Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import (
    CorrespondenceError,
    EmptyCohortError,
    InvalidTrialsError,
    ParameterError,
    SpaceMismatchError,
)

PROBABILITY = "probability"
LOGIT = "logit"
SPACES = (PROBABILITY, LOGIT)

DEFAULT_CLAMP_EPS = 1e-4


@dataclass(frozen=True, eq=False)
class ConnectivityMatrix:
    """Dense ``n_seeds x n_targets`` matrix tagged with the space it lives in."""

    values: np.ndarray
    space: str = PROBABILITY

    def __post_init__(self):
        if self.space not in SPACES:
            raise ParameterError(f"unknown space {self.space!r}; expected one of {SPACES}")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2:
            raise ParameterError(f"connectivity matrix must be 2-D, got shape {values.shape}")
        if self.space == PROBABILITY:
            if values.size and not ((values >= 0.0) & (values <= 1.0)).all():
                raise ParameterError("probability-space entries must lie in [0, 1]")
        elif not np.isfinite(values).all():
            raise ParameterError("logit-space entries must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_seeds(self) -> int:
        return self.values.shape[0]

    @property
    def n_targets(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def rows(self, index) -> "ConnectivityMatrix":
        return ConnectivityMatrix(self.values[index], self.space)


@dataclass(frozen=True, eq=False)
class StreamlineCounts:
    """Per-(seed, target) success counts out of ``trials_per_seed`` streamlines."""

    successes: np.ndarray
    trials_per_seed: int

    def __post_init__(self):
        successes = np.asarray(self.successes)
        if successes.ndim == 1:
            successes = successes[None, :]
        if successes.size and (successes < 0).any():
            raise ParameterError("streamline counts must be non-negative")
        if self.trials_per_seed > 0 and successes.size and (successes > self.trials_per_seed).any():
            raise ParameterError(
                f"a success count exceeds trials_per_seed={self.trials_per_seed}"
            )
        object.__setattr__(self, "successes", successes)


def _require(m: ConnectivityMatrix, space: str):
    if m.space != space:
        raise SpaceMismatchError(f"expected a {space}-space matrix, got {m.space}")


def estimate_tractogram(counts: StreamlineCounts) -> ConnectivityMatrix:
    """Bernoulli parameters estimated as the proportion of successful streamlines."""
    if counts.trials_per_seed <= 0:
        raise InvalidTrialsError(f"trials_per_seed must be positive, got {counts.trials_per_seed}")
    return ConnectivityMatrix(counts.successes / counts.trials_per_seed, PROBABILITY)


def default_clamp_eps(trials_per_seed: int | None = None) -> float:
    """Half the smallest nonzero observable proportion, or 1e-4 when unknown."""
    if trials_per_seed:
        return 1.0 / (2.0 * trials_per_seed)
    return DEFAULT_CLAMP_EPS


def logit_transform(m: ConnectivityMatrix, clamp_eps: float = DEFAULT_CLAMP_EPS) -> ConnectivityMatrix:
    """Map probabilities to log-odds after clipping to ``[clamp_eps, 1 - clamp_eps]``.

    Observed proportions hit exactly 0 (and occasionally 1), where the log-odds
    are infinite; the clip keeps every output finite and preserves the
    ordering of the proportions that can actually be observed.
    """
    _require(m, PROBABILITY)
    if not 0.0 < clamp_eps < 0.5:
        raise ParameterError(f"clamp_eps must be in (0, 0.5), got {clamp_eps}")
    p = np.clip(m.values, clamp_eps, 1.0 - clamp_eps)
    return ConnectivityMatrix(np.log(p) - np.log1p(-p), LOGIT)


def inverse_logit(m: ConnectivityMatrix) -> ConnectivityMatrix:
    _require(m, LOGIT)
    return ConnectivityMatrix(expit(m.values), PROBABILITY)


def groupwise_average(per_subject) -> ConnectivityMatrix:
    """Entrywise mean of logit matrices with corresponding seeds.

    Accumulation runs left to right in extended precision, so the result is
    bit-reproducible for a given subject order and agrees across orders to
    about 1e-16 relative.
    """
    per_subject = list(per_subject)
    if not per_subject:
        raise EmptyCohortError("groupwise_average needs at least one subject")
    shape = per_subject[0].shape
    acc = np.zeros(shape, dtype=np.longdouble)
    for s, m in enumerate(per_subject):
        _require(m, LOGIT)
        if m.shape != shape:
            raise CorrespondenceError(f"subject {s} has shape {m.shape}, subject 0 has {shape}")
        acc += m.values
    return ConnectivityMatrix((acc / len(per_subject)).astype(np.float64), LOGIT)
