"""Rectangular-domain discretization, grid-function norms, and potentials.

The domain is a box in 1 or 2 dimensions with homogeneous Dirichlet boundary
conditions. Unknowns live on the interior nodes only; boundary values are
implicitly zero. Indexing is lexicographic row-major over the axes: in 2D the
node (i, j) has flat index ``i * n_y + j``.

Spacing is uniform and equal on every axis: ``h = (upper - lower) / (n + 1)``.
The discrete L2 inner product carries the volume weight ``h**d``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DimensionError
from .sparse import SparseOperator

_H_RTOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Uniform interior grid on a box.

    Attributes:
        d: spatial dimension, 1 or 2.
        bounds: per-axis (lower, upper) pairs.
        n_interior: per-axis interior node counts.
        h: common grid spacing.
        shape: alias of n_interior as a tuple.
    """

    d: int
    bounds: tuple
    n_interior: tuple
    h: float

    @property
    def shape(self) -> tuple:
        return self.n_interior

    @property
    def n_points(self) -> int:
        return int(np.prod(self.n_interior))

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def axis_coordinates(self, axis: int) -> np.ndarray:
        lo, _ = self.bounds[axis]
        n = self.n_interior[axis]
        return lo + self.h * np.arange(1, n + 1)

    def node_coordinates(self) -> np.ndarray:
        """Interior node coordinates, shape (N, d), in index order."""
        axes = [self.axis_coordinates(a) for a in range(self.d)]
        if self.d == 1:
            return axes[0][:, None]
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def check_length(self, u: np.ndarray, name: str = "grid function") -> None:
        if u.shape != (self.n_points,):
            raise DimensionError(
                f"{name} has shape {u.shape}, expected ({self.n_points},)")


@dataclass(frozen=True)
class Potential:
    """Nonnegative potential sampled at the interior nodes."""

    values: np.ndarray
    tag: str = "custom"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise ConfigurationError("potential values must be a flat vector")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("potential values must be finite")
        if v.size and v.min() < 0.0:
            raise ConfigurationError("potential must be nonnegative everywhere")


@dataclass(frozen=True)
class DisorderSpec:
    """Checkerboard disorder: K x K cells, each valued high or low with equal
    probability. The generator is numpy's PCG64 seeded with ``seed`` so the
    field is reproducible across runs.
    """

    K: int
    seed: int
    high_value: float = 1.0

    @property
    def low_value(self) -> float:
        return 1.0 / float(self.K) ** 2

    def __post_init__(self):
        if self.K <= 0:
            raise ConfigurationError(f"disorder cell count must be positive, got {self.K}")


def build_grid(d: int, bounds, n_interior) -> GridSpec:
    """Construct a uniform interior grid.

    Args:
        d: dimension, 1 or 2.
        bounds: (lower, upper) for d=1, or a sequence of d pairs.
        n_interior: interior count, an int (shared by all axes) or per-axis ints.

    Raises:
        ConfigurationError: on nonpositive counts, degenerate bounds, or
            per-axis spacings that do not agree.
    """
    if d not in (1, 2):
        raise ConfigurationError(f"dimension must be 1 or 2, got {d}")
    if isinstance(bounds[0], (int, float)):
        bounds = (tuple(bounds),)
    bounds = tuple(tuple(float(b) for b in pair) for pair in bounds)
    if len(bounds) == 1 and d == 2:
        bounds = bounds * 2
    if len(bounds) != d:
        raise ConfigurationError(f"expected {d} bounds pairs, got {len(bounds)}")

    if isinstance(n_interior, (int, np.integer)):
        n_interior = (int(n_interior),) * d
    n_interior = tuple(int(n) for n in n_interior)
    if len(n_interior) != d:
        raise ConfigurationError(f"expected {d} interior counts, got {len(n_interior)}")

    hs = []
    for (lo, hi), n in zip(bounds, n_interior):
        if n < 1:
            raise ConfigurationError(f"interior count must be >= 1, got {n}")
        if not hi > lo:
            raise ConfigurationError(f"degenerate bounds ({lo}, {hi})")
        hs.append((hi - lo) / (n + 1))
    h = hs[0]
    for other in hs[1:]:
        if abs(other - h) > _H_RTOL * max(abs(h), abs(other)):
            raise ConfigurationError(
                f"grid spacing differs per axis: {hs}; all axes must share one h")
    return GridSpec(d=d, bounds=bounds, n_interior=n_interior, h=h)


def assemble_laplacian(grid: GridSpec) -> SparseOperator:
    """Negated discrete Laplacian with the 2d+1-point stencil and Dirichlet
    boundary: diagonal 2d/h^2, axis-neighbor entries -1/h^2. Positive definite
    on the interior.
    """
    inv_h2 = 1.0 / grid.h**2

    def tridiag(n):
        return sp.diags(
            [np.full(n - 1, -inv_h2), np.full(n, 2.0 * inv_h2), np.full(n - 1, -inv_h2)],
            offsets=[-1, 0, 1], format="csr")

    if grid.d == 1:
        mat = tridiag(grid.n_interior[0])
    else:
        nx, ny = grid.n_interior
        Ix = sp.eye(nx, format="csr")
        Iy = sp.eye(ny, format="csr")
        mat = sp.kron(tridiag(nx), Iy) + sp.kron(Ix, tridiag(ny))
    return SparseOperator.from_csr(mat.tocsr())


def l2h_inner(u: np.ndarray, w: np.ndarray, grid: GridSpec) -> float:
    """Discrete L2 inner product: sum(u * w) * h^d."""
    grid.check_length(u, "u")
    grid.check_length(w, "w")
    return float(u @ w) * grid.cell_volume


def l2h_norm(u: np.ndarray, grid: GridSpec) -> float:
    grid.check_length(u, "u")
    return float(np.linalg.norm(u)) * np.sqrt(grid.cell_volume)


def single_well_potential(grid: GridSpec) -> Potential:
    """Quadratic well: V(x) = |x|^2 / 2 at the interior nodes."""
    coords = grid.node_coordinates()
    return Potential(values=0.5 * np.sum(coords**2, axis=1), tag="single-well")


def disordered_potential(grid: GridSpec, spec: DisorderSpec) -> Potential:
    """Piecewise-constant disorder on a K x K partition of the box.

    Each cell takes the high value or the low one with equal probability,
    drawn once from a seeded generator; every node inherits the value of the
    cell that contains it (ties at cell edges go to the lower-index cell,
    clamped at the top edge).
    """
    rng = np.random.default_rng(spec.seed)
    picks = rng.integers(0, 2, size=(spec.K,) * grid.d)
    cells = np.where(picks == 1, spec.high_value, spec.low_value)

    coords = grid.node_coordinates()
    idx = []
    for axis in range(grid.d):
        lo, hi = grid.bounds[axis]
        width = (hi - lo) / spec.K
        k = np.floor((coords[:, axis] - lo) / width).astype(int)
        idx.append(np.clip(k, 0, spec.K - 1))
    values = cells[idx[0]] if grid.d == 1 else cells[idx[0], idx[1]]
    return Potential(values=values, tag=f"disordered(K={spec.K}, seed={spec.seed})")


def potential_to_json(grid: GridSpec, potential: Potential) -> dict:
    return {
        "d": grid.d,
        "bounds": [list(pair) for pair in grid.bounds],
        "n_interior": list(grid.n_interior),
        "h": grid.h,
        "tag": potential.tag,
        "values": potential.values.tolist(),
    }


def potential_from_json(payload: dict) -> tuple:
    grid = build_grid(payload["d"], payload["bounds"], payload["n_interior"])
    pot = Potential(values=np.asarray(payload["values"], dtype=float),
                    tag=payload.get("tag", "custom"))
    grid.check_length(pot.values, "potential")
    return grid, pot


def save_potential_json(path, grid: GridSpec, potential: Potential) -> None:
    with open(path, "w") as f:
        json.dump(potential_to_json(grid, potential), f)


def export_nodes_csv(path, grid: GridSpec, values: np.ndarray) -> None:
    """Write node coordinates and values: ``index,x[,y],value`` with a header."""
    grid.check_length(values, "values")
    coords = grid.node_coordinates()
    header = ["index", "x", "value"] if grid.d == 1 else ["index", "x", "y", "value"]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for i in range(grid.n_points):
            writer.writerow([i, *[repr(float(c)) for c in coords[i]],
                             repr(float(values[i]))])
