"""
Domain types shared by all modules: datasets with context labels,
box-constrained parameter vectors and the loss-model contract
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .exceptions import DataError

logger = logging.getLogger(__name__)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class ContextSamples(NamedTuple):
    """Samples of a single context, in input order"""

    features: np.ndarray
    responses: np.ndarray

    def __len__(self) -> int:
        return int(self.responses.shape[0])


@dataclass(frozen=True)
class ContextStats:
    """Per-context sample counts and empirical context frequencies"""

    counts: np.ndarray
    phat: np.ndarray

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "ContextStats":
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0 or np.any(counts <= 0):
            raise DataError("context counts must be positive")
        n = int(counts.sum())
        return cls(counts=_readonly(counts.copy()), phat=_readonly(counts / n))

    @property
    def n(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class Dataset:
    """
    Samples z = (x, y) with 1-based contiguous context ids.

    Build with Dataset.from_arrays, which re-indexes labels and drops
    declared contexts that have no samples.
    """

    features: np.ndarray
    responses: np.ndarray
    contexts: np.ndarray
    num_contexts: int
    label_map: Mapping[int, Any] = field(default_factory=dict)
    warnings: Tuple[str, ...] = ()
    metadata: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def from_arrays(
        cls,
        features,
        responses,
        contexts,
        num_contexts: Optional[int] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> "Dataset":
        """
        Validate raw arrays and build a dataset

        Args:
            features: (n, d) or (n,) feature values
            responses: (n,) responses (demand, or class labels as 0.0/1.0)
            contexts: (n,) context labels; integers in [1, num_contexts] when
                num_contexts is given, otherwise arbitrary sortable labels
            num_contexts: Number of declared contexts
            metadata: Free-form provenance carried along with the data

        Returns:
            Dataset with contexts re-indexed to 1..K over observed contexts
        """
        X = np.array(features, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.array(responses, dtype=float).reshape(-1)
        labels = np.asarray(contexts)
        n = y.shape[0]

        if n == 0:
            raise DataError("dataset is empty")
        if X.ndim != 2 or X.shape[0] != n or labels.shape != (n,):
            raise DataError(
                f"inconsistent shapes: features {X.shape}, responses {y.shape}, contexts {labels.shape}"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("features and responses must be finite")

        if num_contexts is not None:
            if num_contexts < 1:
                raise DataError("num_contexts must be positive")
            try:
                as_int = labels.astype(np.int64)
            except (TypeError, ValueError) as e:
                raise DataError(f"context ids must be integers: {e}") from e
            if np.any(as_int != labels) or np.any(as_int < 1) or np.any(as_int > num_contexts):
                raise DataError(f"every context id must be an integer in [1, {num_contexts}]")
            labels = as_int
            declared = list(range(1, num_contexts + 1))
        else:
            declared = None

        kept, inverse = np.unique(labels, return_inverse=True)
        warnings = []
        if declared is not None:
            dropped = sorted(set(declared) - set(kept.tolist()))
            for c in dropped:
                message = f"context {c} declared but unobserved; dropped and ids re-indexed"
                logger.warning(message)
                warnings.append(message)

        label_map = {i + 1: (v.item() if hasattr(v, "item") else v) for i, v in enumerate(kept)}
        return cls(
            features=_readonly(X),
            responses=_readonly(y),
            contexts=_readonly((inverse.reshape(-1) + 1).astype(np.int64)),
            num_contexts=int(kept.size),
            label_map=label_map,
            warnings=tuple(warnings),
            metadata=dict(metadata or {}),
        )

    @property
    def n(self) -> int:
        return int(self.responses.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.contexts, minlength=self.num_contexts + 1)[1:]

    def stats(self) -> ContextStats:
        return ContextStats.from_counts(self.counts)


@dataclass(frozen=True)
class ParameterVector:
    """Parameter theta with componentwise box bounds"""

    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        for name in ("values", "lower", "upper"):
            object.__setattr__(self, name, _readonly(np.array(getattr(self, name), dtype=float)))
        if not (self.values.shape == self.lower.shape == self.upper.shape):
            raise DataError("parameter values and bounds must have equal length")
        if np.any(self.values < self.lower) or np.any(self.values > self.upper):
            raise DataError(f"parameter {self.values.tolist()} outside its bounds")

    @property
    def k(self) -> int:
        return int(self.values.shape[0])

    def project(self, values) -> np.ndarray:
        return np.clip(np.asarray(values, dtype=float), self.lower, self.upper)


class LossModel(ABC):
    """
    Contract for pointwise losses l_theta(z).

    Implementations must be convex in theta in expectation; the robust
    descent relies on it. All methods are vectorized over samples.
    """

    name: str = "loss"
    # multiplies every gradient step, normalizes slope magnitudes across losses
    step_scale: float = 1.0

    @abstractmethod
    def num_params(self, d: int) -> int:
        """Parameter dimension for d features"""

    @abstractmethod
    def pointwise_loss(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Loss of each sample, shape (n,)"""

    @abstractmethod
    def pointwise_gradient(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """(Sub)gradient of each sample's loss, shape (n, k)"""

    def params(self) -> Dict[str, Any]:
        return {}

    def bounds(self, d: int) -> Tuple[np.ndarray, np.ndarray]:
        k = self.num_params(d)
        return np.full(k, -np.inf), np.full(k, np.inf)

    def project(self, theta: np.ndarray, d: int) -> np.ndarray:
        lower, upper = self.bounds(d)
        return np.clip(theta, lower, upper)

    def mean_loss(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.pointwise_loss(theta, X, y)))

    def mean_gradient(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.pointwise_gradient(theta, X, y).mean(axis=0)

    def context_min(self, X: np.ndarray, y: np.ndarray) -> Optional[Tuple[np.ndarray, float]]:
        """Closed-form empirical minimizer and minimum, or None if unavailable"""
        return None

    def evaluation_loss(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Pointwise metric used at test time; defaults to the training loss"""
        return self.pointwise_loss(theta, X, y)


def partition_by_context(dataset: Dataset) -> Dict[int, ContextSamples]:
    """Split a dataset into its contexts, preserving sample order within each"""
    parts = {}
    for c in range(1, dataset.num_contexts + 1):
        mask = dataset.contexts == c
        parts[c] = ContextSamples(dataset.features[mask], dataset.responses[mask])
    return parts


def empirical_conditional_risk(loss: LossModel, theta, part: ContextSamples) -> float:
    """Arithmetic mean of pointwise losses over one context's samples"""
    if len(part) == 0:
        raise DataError("empty context")
    values = theta.values if isinstance(theta, ParameterVector) else np.asarray(theta, dtype=float)
    return loss.mean_loss(values, part.features, part.responses)
