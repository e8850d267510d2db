"""Synthetic data with known ground truth, drawn from the model's own
generative assumptions.

Cells sit on a unit-spaced square lattice, the truth partitions the
lattice into contiguous vertical bands, and every pair's similarity is
Gaussian around a within- or between-band mean.  The shuffled variant
permutes the coordinates only, preserving the block structure while
destroying spatial signal -- the null case for the lam = 0 safeguard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .similarity import FISHER_BOUND


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings: lattice side, band count, block means, precision."""

    grid_side: int = 12
    k_true: int = 3
    mu_within: float = 0.8
    mu_between: float = 0.0
    precision: float = 4.0
    seed: int = 0
    n_modalities: int = 1

    def __post_init__(self) -> None:
        if self.grid_side < 2:
            raise ValueError("grid_side must be >= 2")
        if self.k_true < 1 or self.k_true > self.grid_side:
            raise ValueError("k_true must be in 1..grid_side")
        if self.precision <= 0:
            raise ValueError("precision must be positive")
        if self.mu_within <= self.mu_between:
            raise ValueError("mu_within must exceed mu_between")
        if self.n_modalities < 1:
            raise ValueError("n_modalities must be >= 1")

    @property
    def n_cells(self) -> int:
        return self.grid_side * self.grid_side


def lattice_coordinates(grid_side: int) -> np.ndarray:
    """Row-major unit-spaced lattice coordinates (x = column, y = row)."""
    idx = np.arange(grid_side * grid_side)
    return np.column_stack([idx % grid_side, idx // grid_side]).astype(float)


def band_labels(grid_side: int, k_true: int) -> np.ndarray:
    """Vertical-band truth labels 1..k_true from the x coordinate."""
    cols = np.arange(grid_side * grid_side) % grid_side
    labels = (cols * k_true) // grid_side + 1
    return np.minimum(labels, k_true).astype(np.int64)


def generate_spatial_sbm(
    spec: SyntheticSpec,
) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Spatially contiguous benchmark: (similarities, coordinates, truth).

    Off-diagonal entries are Normal(mu_within, 1/precision) inside a band
    and Normal(mu_between, 1/precision) across bands, symmetrized from
    the upper triangle; diagonals sit at the Fisher-Z clipping bound and
    all entries are clipped into the valid range.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_cells
    coords = lattice_coordinates(spec.grid_side)
    truth = band_labels(spec.grid_side, spec.k_true)
    same = truth[:, None] == truth[None, :]
    mu = np.where(same, spec.mu_within, spec.mu_between)
    sd = 1.0 / np.sqrt(spec.precision)
    sims = []
    for _ in range(spec.n_modalities):
        draw = rng.normal(mu, sd)
        A = np.triu(draw, k=1)
        A = A + A.T
        np.clip(A, -FISHER_BOUND, FISHER_BOUND, out=A)
        np.fill_diagonal(A, FISHER_BOUND)
        sims.append(A)
    return sims, coords, truth


def generate_nonspatial_null(
    spec: SyntheticSpec,
) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Same block-structured similarities with coordinates shuffled across
    cells, so the truth labels carry no spatial signal."""
    sims, coords, truth = generate_spatial_sbm(spec)
    perm_rng = np.random.default_rng((spec.seed, 1))
    perm = perm_rng.permutation(spec.n_cells)
    return sims, coords[perm], truth
