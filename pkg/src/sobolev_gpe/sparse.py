"""Symmetric sparse operators in compressed-row storage.

All stiffness-like matrices in this package (the negated discrete Laplacian
and the linearized operators built on top of it) are held in a thin wrapper
around ``scipy.sparse.csr_matrix`` that records the symmetry contract and
offers the structural checks the tests rely on (M-matrix sign pattern,
symmetry defect).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite

from .errors import DimensionError


@dataclass(frozen=True)
class SparseOperator:
    """Symmetric N-by-N sparse matrix in CSR layout.

    Attributes:
        matrix: the underlying ``csr_matrix``.
        symmetric: assembly-level symmetry flag; every operator assembled by
            this package sets it.
    """

    matrix: sp.csr_matrix
    symmetric: bool = True

    @classmethod
    def from_csr(cls, matrix, symmetric=True) -> "SparseOperator":
        return cls(matrix=sp.csr_matrix(matrix), symmetric=symmetric)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def shape(self):
        return self.matrix.shape

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if x.shape[0] != self.n:
            raise DimensionError(f"operand length {x.shape[0]} != operator size {self.n}")
        return self.matrix @ x

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.matvec(x)

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def symmetry_defect(self) -> float:
        """Max absolute difference between the matrix and its transpose."""
        d = self.matrix - self.matrix.T
        return 0.0 if d.nnz == 0 else float(np.abs(d.data).max())

    def offdiag_max(self) -> float:
        """Largest off-diagonal entry (<= 0 for an M-matrix)."""
        coo = self.matrix.tocoo()
        mask = coo.row != coo.col
        return float(coo.data[mask].max()) if mask.any() else 0.0

    def diag_min(self) -> float:
        return float(self.diagonal().min())

    def is_m_matrix(self, tol: float = 0.0) -> bool:
        """Entrywise sign check: positive diagonal, nonpositive off-diagonal."""
        return self.diag_min() > 0.0 and self.offdiag_max() <= tol

    def to_matrix_market(self, path) -> None:
        """Write the operator in MatrixMarket coordinate format."""
        mmwrite(str(path), self.matrix.tocoo(),
                symmetry="symmetric" if self.symmetric else "general")
