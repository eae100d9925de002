"""Sphere-manifold primitives in the adaptive metric.

States live on the unit sphere of the discrete L2 inner product. The
retraction is plain renormalization (second-order accurate in the adaptive
norm); tangency means vanishing L2_h inner product with the base point. The
manifold gradient at a normalized u takes the simplified form

    grad = u - G_u u / (u, G_u u)_{L2_h}

whose squared adaptive norm is (u, u)_{a_u} - 1 / (u, G_u u)_{L2_h}. One CG
solve produces G_u u; it is cached on the gradient object because the descent
step and the step-size diagnostics reuse it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, OperatorError
from .grid import GridSpec, l2h_inner, l2h_norm
from .linsolve import CgConfig, CgStats, greens_apply
from .operators import a_u_inner
from .sparse import SparseOperator

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class State:
    """Grid function with a normalization flag (L2_h unit norm when set)."""

    values: np.ndarray
    normalized: bool = False


@dataclass(frozen=True)
class ManifoldGradient:
    """Adaptive-metric manifold gradient with its cached Greens solve.

    Attributes:
        direction: the gradient vector (tangent at u).
        grad_norm_sq_a_u: squared adaptive norm; nonnegative up to roundoff.
        greens_of_u: cached G_u u.
        inner_u_Gu: (u, G_u u)_{L2_h}.
    """

    direction: np.ndarray
    grad_norm_sq_a_u: float
    greens_of_u: np.ndarray
    inner_u_Gu: float

    @property
    def grad_norm(self) -> float:
        return float(np.sqrt(max(self.grad_norm_sq_a_u, 0.0)))


def retract(u: np.ndarray, grid: GridSpec) -> State:
    """Scale back to the L2_h unit sphere. Raises on the zero vector."""
    norm = l2h_norm(u, grid)
    if norm == 0.0 or not np.isfinite(norm):
        raise DomainError("cannot retract a zero or non-finite vector")
    return State(values=u / norm, normalized=True)


def tangent_project(xi: np.ndarray, u: State, A_u: SparseOperator, grid: GridSpec,
                    config: CgConfig = CgConfig()) -> np.ndarray:
    """Project xi onto the tangent space at u in the adaptive geometry.

    The projection removes the G_u u component carrying the L2_h pairing with
    u, so the result satisfies (result, u)_{L2_h} = 0 up to CG tolerance.
    """
    g = greens_apply(u.values, A_u, config=config)
    gamma = l2h_inner(u.values, g, grid)
    if gamma <= 0.0:
        raise OperatorError("(u, G_u u) <= 0: Greens solve inconsistent with a PD operator")
    return xi - (l2h_inner(xi, u.values, grid) / gamma) * g


def manifold_gradient(u: State, A_u: SparseOperator, grid: GridSpec,
                      config: CgConfig = CgConfig(),
                      greens_x0: np.ndarray = None,
                      stats: CgStats = None) -> ManifoldGradient:
    """Gradient of the energy at a normalized state under the adaptive metric.

    ``greens_x0`` warm-starts the CG solve (the previous iterate's Greens
    vector is an excellent initial guess inside a descent loop).
    """
    y = greens_apply(u.values, A_u, config=config, x0=greens_x0, stats=stats)
    gamma = l2h_inner(u.values, y, grid)
    if gamma <= 0.0:
        raise OperatorError("(u, G_u u) <= 0: Greens solve inconsistent with a PD operator")
    direction = u.values - y / gamma
    norm_sq = a_u_inner(u.values, u.values, A_u, grid) - 1.0 / gamma
    return ManifoldGradient(direction=direction, grad_norm_sq_a_u=norm_sq,
                            greens_of_u=y, inner_u_Gu=gamma)
