"""Energy functional and adaptive linearized operators.

Three problem variants share one code path:

* plain cubic nonlinearity (repulsion strength beta),
* the same plus a higher-order interaction term weighted by delta,
* a general power nonlinearity |u|^(2*alpha) u with delta = 0.

For a state u the linearized operator is

    A_u = -L_h + diag(V + beta * w) [+ delta * D_u (-L_h) D_u]

with w = u^2 (or (u^2)^alpha for the power variant) and D_u = diag(u). The
pairing (z, A_u w) * h^d realizes the adaptive inner product, and the energy
is chosen so that the coordinate gradient of E equals 2 h^d A_u u exactly for
every variant. The higher-order term is discretized as D_u (-L_h) D_u, which
keeps the operator symmetric and, for u >= 0, an M-matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DomainError, NumericError
from .grid import GridSpec, Potential
from .sparse import SparseOperator

VARIANT_GPE = "gpe"
VARIANT_HOI = "hoi"
VARIANT_ALPHA = "alpha-power"


@dataclass(frozen=True)
class ModelParams:
    """Model coefficients and variant selector.

    beta >= 0 scales the repulsive nonlinearity, delta >= 0 the higher-order
    interaction, alpha > 0 the nonlinearity power. The variant must be
    consistent with the coefficients: the cubic problem has alpha=1, delta=0;
    the higher-order variant has alpha=1; the power variant has delta=0.
    """

    beta: float
    delta: float = 0.0
    alpha: float = 1.0
    variant: str = VARIANT_GPE

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigurationError(f"beta must be >= 0, got {self.beta}")
        if self.delta < 0:
            raise ConfigurationError(f"delta must be >= 0, got {self.delta}")
        if self.alpha <= 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if self.variant == VARIANT_GPE:
            if self.delta != 0.0 or self.alpha != 1.0:
                raise ConfigurationError("plain variant requires alpha=1, delta=0")
        elif self.variant == VARIANT_HOI:
            if self.alpha != 1.0:
                raise ConfigurationError("higher-order variant requires alpha=1")
        elif self.variant == VARIANT_ALPHA:
            if self.delta != 0.0:
                raise ConfigurationError("power variant requires delta=0")
        else:
            raise ConfigurationError(f"unknown variant {self.variant!r}")

    @classmethod
    def gpe(cls, beta: float) -> "ModelParams":
        return cls(beta=beta, variant=VARIANT_GPE)

    @classmethod
    def hoi(cls, beta: float, delta: float) -> "ModelParams":
        return cls(beta=beta, delta=delta, variant=VARIANT_HOI)

    @classmethod
    def alpha_power(cls, beta: float, alpha: float) -> "ModelParams":
        return cls(beta=beta, alpha=alpha, variant=VARIANT_ALPHA)

    def to_json(self) -> dict:
        return {"beta": self.beta, "delta": self.delta,
                "alpha": self.alpha, "variant": self.variant}

    @classmethod
    def from_json(cls, payload: dict) -> "ModelParams":
        return cls(beta=payload["beta"], delta=payload.get("delta", 0.0),
                   alpha=payload.get("alpha", 1.0),
                   variant=payload.get("variant", VARIANT_GPE))


def _nonlinear_weight(params: ModelParams, u: np.ndarray) -> np.ndarray:
    # (u^2)^alpha rather than |u|^(2 alpha): safe for noninteger alpha.
    u2 = u * u
    return u2 if params.alpha == 1.0 else u2**params.alpha


def energy(grid: GridSpec, laplacian: SparseOperator, V: Potential,
           params: ModelParams, u: np.ndarray) -> float:
    """Discrete energy of a (not necessarily normalized) grid function."""
    grid.check_length(u, "u")
    if not np.all(np.isfinite(u)):
        raise NumericError("state contains non-finite entries")
    hd = grid.cell_volume
    u2 = u * u
    value = float(u @ laplacian.matvec(u)) * hd + float(V.values @ u2) * hd
    if params.alpha == 1.0:
        value += 0.5 * params.beta * float(np.sum(u2 * u2)) * hd
    else:
        value += params.beta / (params.alpha + 1.0) * float(np.sum(u2**(params.alpha + 1.0))) * hd
    if params.delta > 0.0:
        value += 0.5 * params.delta * float(u2 @ laplacian.matvec(u2)) * hd
    return value


def assemble_a0(laplacian: SparseOperator, V: Potential) -> SparseOperator:
    """Fixed-metric operator A_0 = -L_h + diag(V)."""
    return SparseOperator.from_csr((laplacian.matrix + sp.diags(V.values)).tocsr())


def assemble_A_u(grid: GridSpec, laplacian: SparseOperator, V: Potential,
                 params: ModelParams, u: np.ndarray) -> SparseOperator:
    """Adaptive linearized operator at the state u (see module docstring)."""
    grid.check_length(u, "u")
    mat = laplacian.matrix + sp.diags(V.values + params.beta * _nonlinear_weight(params, u))
    if params.delta > 0.0:
        D = sp.diags(u)
        mat = mat + params.delta * (D @ laplacian.matrix @ D)
    return SparseOperator.from_csr(mat.tocsr())


def a_u_inner(z: np.ndarray, w: np.ndarray, A_u: SparseOperator, grid: GridSpec) -> float:
    """Adaptive inner product (z, w)_{a_u} = z^T A_u w * h^d."""
    grid.check_length(z, "z")
    grid.check_length(w, "w")
    return float(z @ A_u.matvec(w)) * grid.cell_volume


def a_u_norm(z: np.ndarray, A_u: SparseOperator, grid: GridSpec) -> float:
    return float(np.sqrt(max(a_u_inner(z, z, A_u, grid), 0.0)))


def eigenvalue_estimate(u: np.ndarray, A_u: SparseOperator, grid: GridSpec) -> float:
    """Rayleigh quotient of u under A_u; the eigenvalue at a fixed point."""
    grid.check_length(u, "u")
    denom = float(u @ u)
    if denom == 0.0:
        raise DomainError("eigenvalue estimate needs a nonzero state")
    return float(u @ A_u.matvec(u)) / denom


def residual_norm(u: np.ndarray, A_u: SparseOperator, grid: GridSpec) -> float:
    """Discrete L2 norm of A_u u - lambda(u) u; zero exactly at eigenstates."""
    lam = eigenvalue_estimate(u, A_u, grid)
    r = A_u.matvec(u) - lam * u
    return float(np.linalg.norm(r)) * np.sqrt(grid.cell_volume)
