"""Label slicing and per-slice moments of standardized covariates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError, SlicingError

STRATEGIES = ("equal_frequency", "equal_width", "categorical")
MIN_SLICE_WARN = 2


@dataclass
class Slices:
    assignments: np.ndarray
    h: int
    proportions: np.ndarray
    boundaries: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.h)

    def members(self, s: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == s)


@dataclass
class SliceStats:
    means: np.ndarray  # (h, d)
    covariances: np.ndarray  # (h, d, d)
    second_moments: np.ndarray  # (h, d, d)
    proportions: np.ndarray
    warnings: list = field(default_factory=list)


def make_slices(y, h: int = 10, strategy: str = "equal_frequency") -> Slices:
    """Partition sample indices by label.

    ``equal_frequency`` splits the stably-sorted labels into ``h`` contiguous
    rank blocks; the first ``n % h`` blocks get one extra sample. Tied labels
    may land in different slices, ordered by original index.
    """
    if strategy not in STRATEGIES:
        raise InvalidInputError(f"unknown slicing strategy {strategy!r}")
    y = np.asarray(y)
    n = y.shape[0]
    if strategy == "categorical":
        labels, assign = np.unique(y, return_inverse=True)
        if h and h != labels.size:
            raise SlicingError(
                f"categorical labels have {labels.size} distinct values, h={h} requested")
        h = labels.size
        counts = np.bincount(assign, minlength=h)
        return Slices(assign.astype(np.intp), h, counts / n, labels=labels)

    y = y.astype(float)
    if h < 1:
        raise InvalidInputError("h must be a positive integer")
    if h > n:
        raise SlicingError(f"h={h} exceeds the number of samples n={n}")
    if strategy == "equal_frequency":
        order = np.argsort(y, kind="stable")
        assign = np.empty(n, dtype=np.intp)
        boundaries = []
        for s, block in enumerate(np.array_split(order, h)):
            assign[block] = s
            if s:
                boundaries.append(y[block[0]])
        bnd = np.asarray(boundaries)
    else:
        lo, hi = y.min(), y.max()
        edges = np.linspace(lo, hi, h + 1)
        assign = np.clip(np.searchsorted(edges, y, side="right") - 1, 0, h - 1)
        bnd = edges[1:-1]
    counts = np.bincount(assign, minlength=h)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise SlicingError(f"slice {int(empty[0])} is empty")
    return Slices(assign, h, counts / n, boundaries=bnd)


def slice_stats(Z, slices: Slices) -> SliceStats:
    Z = np.asarray(Z, dtype=float)
    d, n = Z.shape
    if slices.assignments.shape[0] != n:
        raise InvalidInputError("Z column count does not match the slice assignments")
    h = slices.h
    counts = slices.counts
    warnings = []
    means = np.zeros((h, d))
    covs = np.zeros((h, d, d))
    seconds = np.zeros((h, d, d))
    for s in range(h):
        Zs = Z[:, slices.assignments == s]
        m = counts[s]
        if m < 1:
            raise SlicingError(f"slice {s} is empty")
        if m < MIN_SLICE_WARN:
            warnings.append(f"slice {s} has {m} sample(s); covariance is degenerate")
        mu = Zs.mean(axis=1)
        C = Zs - mu[:, None]
        means[s] = mu
        covs[s] = C @ C.T / m
        seconds[s] = Zs @ Zs.T / m
    return SliceStats(means, covs, seconds, counts / n, warnings)
