"""Posterior summarization: co-membership, point estimate, uncertainty.

Label switching never touches co-membership, so the chain is summarized
through the binary co-membership matrices of its samples.  The point
estimate is the recorded sample whose co-membership matrix is closest
(squared Frobenius distance) to the posterior mean matrix; per-cell
uncertainty is one minus the cell's best mean co-membership affinity
over the point estimate's domains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .partition import Partition, as_labels, one_hot


def comembership(labels) -> np.ndarray:
    """Binary matrix B[i, j] = 1 iff cells i and j share a label (diagonal 1)."""
    labels = as_labels(labels)
    return (labels[:, None] == labels[None, :]).astype(float)


def mean_comembership(samples: Sequence) -> np.ndarray:
    """Entrywise mean of the samples' co-membership matrices."""
    if len(samples) == 0:
        raise ValueError("empty sample list")
    acc = comembership(samples[0])
    for s in samples[1:]:
        acc += comembership(s)
    return acc / len(samples)


def dahl_select(samples: Sequence) -> tuple[int, np.ndarray]:
    """Index of the sample closest to the mean co-membership matrix.

    Ties go to the smallest sample index.  Returns (index, mean matrix).
    """
    if len(samples) == 0:
        raise ValueError("empty sample list")
    bbar = mean_comembership(samples)
    dists = np.array(
        [np.sum((comembership(s) - bbar) ** 2) for s in samples]
    )
    return int(np.argmin(dists)), bbar


@dataclass
class UncertaintyResult:
    uncertainty: np.ndarray
    affinity_assigned: np.ndarray
    affinity_by_domain: np.ndarray
    singleton_cells: np.ndarray


def uncertainty_scores(bbar: np.ndarray, point_labels) -> UncertaintyResult:
    """Per-cell affinity and uncertainty against a point-estimate partition.

    The affinity of cell i to domain c averages bbar[i, j] over the
    members of c other than i; u_i = 1 - max_c affinity.  A cell that is
    alone in its domain has affinity 0 there (empty mean) and is flagged.
    """
    labels = as_labels(point_labels)
    n = labels.size
    if bbar.shape != (n, n):
        raise ValueError("mean co-membership shape does not match the labels")
    K = int(labels.max())
    G = one_hot(labels, K)
    occ = G.sum(axis=0)
    sums = bbar @ G
    cnt = np.broadcast_to(occ, (n, K)).copy()
    rows = np.arange(n)
    sums[rows, labels - 1] -= bbar[rows, rows]
    cnt[rows, labels - 1] -= 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        pbar = np.where(cnt > 0, sums / np.where(cnt > 0, cnt, 1.0), 0.0)
    u = 1.0 - pbar.max(axis=1)
    affinity = pbar[rows, labels - 1]
    singleton = np.flatnonzero(occ[labels - 1] == 1)
    return UncertaintyResult(
        uncertainty=u,
        affinity_assigned=affinity,
        affinity_by_domain=pbar,
        singleton_cells=singleton,
    )


@dataclass
class PosteriorSummary:
    """Point estimate plus uncertainty for a recorded chain."""

    mean_comembership: np.ndarray = field(repr=False)
    dahl_index: int
    point_partition: Partition
    uncertainty: np.ndarray
    affinity_assigned: np.ndarray
    k_hat: int
    m_samples: int
    singleton_cells: np.ndarray

    @property
    def labels(self) -> np.ndarray:
        return self.point_partition.labels


def summarize_chain(samples: Sequence) -> PosteriorSummary:
    """Dahl point estimate and uncertainty scores for the recorded samples."""
    index, bbar = dahl_select(samples)
    point = Partition.from_labels(as_labels(samples[index]))
    unc = uncertainty_scores(bbar, point.labels)
    return PosteriorSummary(
        mean_comembership=bbar,
        dahl_index=index,
        point_partition=point,
        uncertainty=unc.uncertainty,
        affinity_assigned=unc.affinity_assigned,
        k_hat=point.n_domains,
        m_samples=len(samples),
        singleton_cells=unc.singleton_cells,
    )
