"""Numerical certification of convergence behavior on concrete runs.

Given a converged descent trace and its reference energy, these routines
measure the three quantities behind exponential convergence: the gradient
inequality constant (exponent 1/2), the per-step descent constant, and the
step-size lower bound, plus a least-squares contraction-rate fit. Separate
probes certify the second-order retraction, the norm equivalence between the
adaptive and fixed metrics, the gradient-inequality bound for explicit linear
operators, the double-ground-state property of converged minimizers, and the
sign of the projected Hessian (minimizer vs. strict saddle).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import ConfigurationError, DiagnosticError, DomainError, EigensolverError
from .grid import GridSpec, Potential, assemble_laplacian, l2h_inner, l2h_norm
from .linsolve import (DENSE_EIGEN_THRESHOLD, CgConfig, cg_solve, smallest_eigenpairs)
from .manifold import State, retract
from .operators import (VARIANT_ALPHA, VARIANT_HOI, ModelParams, SparseOperator,
                        a_u_norm, assemble_A_u, eigenvalue_estimate, residual_norm)
from .solver import IterationTrace

_NOISE_FLOOR_FACTOR = 100.0


@dataclass(frozen=True)
class LojasiewiczReport:
    """Empirical constants of the convergence triplet over a trace tail.

    theta is fixed at 1/2 (the adaptive metric makes the energy behave
    quadratically). ``contraction_bound`` is 1 - C_D*C_S / (2*C_L^2), the
    per-step factor the triplet implies; the observed ``rate_c`` fitted from
    the error column should itself be below 1 on a converged run, but is not
    expected to match the bound.
    """

    theta: float
    C_L_empirical: float
    C_D_empirical: float
    C_S_empirical: float
    tail_start: int
    tail_length: int
    rate_c: float
    rate_r_squared: float
    contraction_bound: float

    def to_json(self) -> dict:
        return {
            "theta": self.theta,
            "C_L_empirical": self.C_L_empirical,
            "C_D_empirical": self.C_D_empirical,
            "C_S_empirical": self.C_S_empirical,
            "tail_start": self.tail_start,
            "tail_length": self.tail_length,
            "rate_c": self.rate_c,
            "rate_r_squared": self.rate_r_squared,
            "contraction_bound": self.contraction_bound,
        }

    def summary(self) -> str:
        return (f"gradient-inequality constants over tail [{self.tail_start}..]: "
                f"C_L={self.C_L_empirical:.4g} C_D={self.C_D_empirical:.4g} "
                f"C_S={self.C_S_empirical:.4g}; fitted rate {self.rate_c:.4f} "
                f"(r^2={self.rate_r_squared:.4f}), bound {self.contraction_bound:.4f}")


@dataclass(frozen=True)
class GroundStateCertificate:
    """Double-ground-state check of a converged minimizer v.

    The two smallest eigenpairs of the operator linearized at v must have a
    positive gap, and v must align with the first one.
    """

    lambda1: float
    lambda2: float
    gap: float
    alignment: float
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.alignment >= 1.0 - self.tolerance and self.gap > 0.0

    def to_json(self) -> dict:
        return {"lambda1": self.lambda1, "lambda2": self.lambda2, "gap": self.gap,
                "alignment": self.alignment, "residual": self.residual,
                "tolerance": self.tolerance, "passed": self.passed}

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"double-ground-state certificate: alignment={self.alignment:.12f} "
                f"gap={self.gap:.6g} residual={self.residual:.3g} [{verdict}]")


def _operational_tail(trace: IterationTrace, E_star: float, tail_fraction: float):
    E = trace.column("energy")
    floor = _NOISE_FLOOR_FACTOR * np.finfo(float).eps * max(abs(E_star), 1.0)
    gaps = E - E_star
    valid = np.nonzero(gaps > floor)[0]
    if valid.size == 0:
        raise DiagnosticError("no iterations above the energy noise floor")
    # contiguous prefix: stop at the first dip below the floor
    end = valid[0] + np.argmax(np.diff(valid, prepend=valid[0] - 1) > 1) \
        if np.any(np.diff(valid) > 1) else valid[-1]
    usable = np.arange(valid[0], end + 1)
    take = max(3, int(math.ceil(tail_fraction * usable.size)))
    if usable.size < 3:
        raise DiagnosticError(
            f"only {usable.size} iterations above the noise floor; trace too short")
    return usable[-take:]


def lojasiewicz_certify(trace: IterationTrace, E_star: float,
                        tail_fraction: float = 0.5) -> LojasiewiczReport:
    """Measure the empirical triplet constants on a converged trace.

    The tail excludes iterations whose energy gap to ``E_star`` is within
    100x floating noise, then keeps the last ``tail_fraction`` of what
    remains. Requires a stride-1 trace (consecutive iterates).
    """
    if trace.record_every != 1:
        raise DiagnosticError("certification needs a trace recorded at every iteration")
    idx = _operational_tail(trace, E_star, tail_fraction)
    E = trace.column("energy")
    gn = trace.column("grad_norm")
    a0d = trace.column("a0_diff")

    # pairwise quantities need a successor row, and the ratios need positive
    # denominators (the gradient-norm formula loses accuracy to cancellation
    # a couple of decades below the energy noise floor)
    idx = idx[(idx < len(E) - 1) & (gn[idx] > 0)]
    idx = idx[a0d[idx] > 0]
    if idx.size < 3:
        raise DiagnosticError("tail too short after truncation for pairwise ratios")

    gaps = E[idx] - E_star
    c_l = float(np.max(np.sqrt(gaps) / gn[idx]))
    decrease = E[idx] - E[idx + 1]
    c_d = float(np.min(decrease / (gn[idx] * a0d[idx])))
    c_s = float(np.min(a0d[idx] / gn[idx]))

    errors = trace.column("l2_error")
    if np.all(np.isfinite(errors[idx])) and np.all(errors[idx] > 0):
        fit_errs = errors[idx]
    else:
        fit_errs = np.sqrt(gaps)
    rate, r2 = rate_fit(fit_errs, window=len(fit_errs))
    bound = 1.0 - c_d * c_s / (2.0 * c_l**2)
    return LojasiewiczReport(theta=0.5, C_L_empirical=c_l, C_D_empirical=c_d,
                             C_S_empirical=c_s, tail_start=int(idx[0]),
                             tail_length=int(idx.size), rate_c=rate,
                             rate_r_squared=r2, contraction_bound=bound)


def rate_fit(errors: Sequence[float], window: int):
    """Least-squares contraction factor of a positive error sequence.

    Fits log(error) against the step index over the last ``window`` entries;
    returns (exp(slope), r_squared).
    """
    errors = np.asarray(errors, dtype=float)
    if window < 3 or len(errors) < window:
        raise DomainError(f"need at least window={window} >= 3 error entries, got {len(errors)}")
    tail = errors[-window:]
    if np.any(~np.isfinite(tail)) or np.any(tail <= 0):
        raise DomainError("rate fit needs strictly positive finite errors")
    x = np.arange(window, dtype=float)
    y = np.log(tail)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return float(np.exp(slope)), r2


def double_ground_state_check(v: State, grid: GridSpec, V: Potential,
                              params: ModelParams,
                              cg_config: CgConfig = CgConfig(),
                              tolerance: float = 1e-6,
                              eig_tol: float = 1e-9) -> GroundStateCertificate:
    """Certify that a converged state is the ground mode of its own
    linearization."""
    lap = assemble_laplacian(grid)
    A_v = assemble_A_u(grid, lap, V, params, v.values)
    pairs = smallest_eigenpairs(A_v, 2, grid, config=cg_config, tol=eig_tol)
    w1 = pairs[0].vector
    alignment = abs(l2h_inner(v.values, w1, grid))
    return GroundStateCertificate(
        lambda1=pairs[0].value, lambda2=pairs[1].value,
        gap=pairs[1].value - pairs[0].value,
        alignment=min(alignment, 1.0),
        residual=residual_norm(v.values, A_v, grid),
        tolerance=tolerance)


@dataclass(frozen=True)
class LinearInequalityReport:
    """Outcome of the gradient-inequality check for an explicit PD operator."""

    passed: Optional[bool]
    max_violation: float
    trials: int
    C_L: float
    mu1: float
    mu2: float
    s: float
    note: str = ""

    def to_json(self) -> dict:
        return {"passed": self.passed, "max_violation": self.max_violation,
                "trials": self.trials, "C_L": self.C_L, "mu1": self.mu1,
                "mu2": self.mu2, "s": self.s, "note": self.note}


def linear_lojasiewicz_test(A, s: float, trials: int, seed: int,
                            violation_tol: float = 1e-10,
                            gap_tol: float = 1e-10) -> LinearInequalityReport:
    """Check the linear-operator gradient inequality by dense sampling.

    For unit vectors u within L2 distance ``s`` of the ground eigenvector w1,
    verifies

        (u,u)_A - (w1,w1)_A <= C_L * ((u,u)_A - 1/(u, A^{-1} u))

    with C_L = 1 + mu2 / ((mu2 - mu1) * (1 - s^2)). Violations are normalized
    by max(1, (u,u)_A). A near-degenerate gap skips the test with a notice.

    ``A`` may be a SparseOperator or a dense symmetric array; it must be small
    enough for dense factorization (the desk-scale contract).
    """
    if not 0.0 < s < 1.0:
        raise ConfigurationError(f"s must lie in (0, 1), got {s}")
    dense = A.to_dense() if isinstance(A, SparseOperator) else np.asarray(A, dtype=float)
    n = dense.shape[0]
    if n > DENSE_EIGEN_THRESHOLD:
        raise DiagnosticError(
            f"dense check limited to {DENSE_EIGEN_THRESHOLD} unknowns, got {n}")
    vals, vecs = scipy.linalg.eigh(dense)
    mu1, mu2 = float(vals[0]), float(vals[1])
    if mu1 <= 0:
        raise ConfigurationError("operator must be positive definite")
    if mu2 - mu1 < gap_tol:
        return LinearInequalityReport(passed=None, max_violation=0.0, trials=0,
                                      C_L=math.nan, mu1=mu1, mu2=mu2, s=s,
                                      note="degenerate gap; test skipped")
    w1 = vecs[:, 0]
    c_l = 1.0 + mu2 / ((mu2 - mu1) * (1.0 - s * s))
    inv = scipy.linalg.inv(dense)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        c1 = 1.0 - 0.5 * s * s * rng.random()
        g = rng.standard_normal(n)
        g -= (g @ w1) * w1
        gn = np.linalg.norm(g)
        if gn == 0.0:
            continue
        u = c1 * w1 + math.sqrt(max(0.0, 1.0 - c1 * c1)) * (g / gn)
        uau = float(u @ dense @ u)
        lhs = uau - mu1
        rhs = uau - 1.0 / float(u @ inv @ u)
        worst = max(worst, (lhs - c_l * rhs) / max(1.0, uau))
    return LinearInequalityReport(passed=worst <= violation_tol, max_violation=worst,
                                  trials=trials, C_L=c_l, mu1=mu1, mu2=mu2, s=s)


@dataclass(frozen=True)
class NormEquivalenceReport:
    """Empirical metric-ratio range over random directions."""

    c_low_a0: float
    c_high_a0: float
    c_low_h1: float
    c_high_h1: float

    def to_json(self) -> dict:
        return {"c_low_a0": self.c_low_a0, "c_high_a0": self.c_high_a0,
                "c_low_h1": self.c_low_h1, "c_high_h1": self.c_high_h1}


def norm_equivalence_probe(u: State, A_u: SparseOperator, A_0: SparseOperator,
                           laplacian: SparseOperator, grid: GridSpec,
                           samples: int = 64, seed: int = 0) -> NormEquivalenceReport:
    """Sample ||z||_{a_0}/||z||_{a_u} and ||z||_{H1}/||z||_{a_u} over random z.

    The discrete H1 norm is the fixed metric with the potential replaced by
    one: z^T (-L_h) z * h^d + ||z||^2_{L2_h}.
    """
    rng = np.random.default_rng(seed)
    hd = grid.cell_volume
    r_a0, r_h1 = [], []
    for _ in range(samples):
        z = rng.standard_normal(grid.n_points)
        nau = a_u_norm(z, A_u, grid)
        na0 = a_u_norm(z, A_0, grid)
        nh1 = math.sqrt(max(float(z @ laplacian.matvec(z)) * hd + float(z @ z) * hd, 0.0))
        r_a0.append(na0 / nau)
        r_h1.append(nh1 / nau)
    return NormEquivalenceReport(c_low_a0=float(min(r_a0)), c_high_a0=float(max(r_a0)),
                                 c_low_h1=float(min(r_h1)), c_high_h1=float(max(r_h1)))


@dataclass(frozen=True)
class RetractionOrderReport:
    """Log-log fit of the retraction deviation against the step scale."""

    slope: float
    scales: tuple
    deviations: tuple
    degenerate: bool = False


def retraction_order_probe(u: State, A_u: SparseOperator, xi: np.ndarray,
                           scales: Sequence[float], grid: GridSpec) -> RetractionOrderReport:
    """Measure ||R(u + t xi) - (u + t xi)||_{a_u} across scales t and fit the
    order. A second-order retraction gives slope 2. Scales whose deviation
    underflows are truncated; a zero direction yields a degenerate report.
    """
    if l2h_norm(xi, grid) == 0.0:
        return RetractionOrderReport(slope=math.nan, scales=tuple(scales),
                                     deviations=(0.0,) * len(scales), degenerate=True)
    devs = []
    kept = []
    for t in scales:
        w = u.values + t * xi
        dev = a_u_norm(retract(w, grid).values - w, A_u, grid)
        if dev < 1e3 * np.finfo(float).tiny:
            continue
        kept.append(t)
        devs.append(dev)
    if len(kept) < 2:
        return RetractionOrderReport(slope=math.nan, scales=tuple(kept),
                                     deviations=tuple(devs), degenerate=True)
    slope = float(np.polyfit(np.log(kept), np.log(devs), 1)[0])
    return RetractionOrderReport(slope=slope, scales=tuple(kept), deviations=tuple(devs))


def hessian_second_derivative(grid: GridSpec, laplacian: SparseOperator, V: Potential,
                              params: ModelParams, u: np.ndarray) -> SparseOperator:
    """Sparse second derivative of the energy at u, scaled by 1/(2 h^d).

    With this scaling the base variant reduces to -L_h + diag(V + 3 beta u^2),
    so its eigenvalues are directly comparable with those of the linearized
    operator.
    """
    grid.check_length(u, "u")
    u2 = u * u
    if params.variant == VARIANT_ALPHA:
        weight = (2.0 * params.alpha + 1.0) * params.beta * u2**params.alpha
    else:
        weight = 3.0 * params.beta * u2
    mat = laplacian.matrix + sp.diags(V.values + weight)
    if params.delta > 0.0:
        D = sp.diags(u)
        mat = mat + params.delta * sp.diags(laplacian.matvec(u2)) \
            + 2.0 * params.delta * (D @ laplacian.matrix @ D)
    return SparseOperator.from_csr(mat.tocsr())


class _ProjectedShiftedHessian:
    """Matrix-free operator P (H - lambda) P - sigma I on the ambient space.

    P is the L2_h-orthogonal projector onto the tangent space at u. With
    sigma below the Gershgorin floor of H - lambda the operator is positive
    definite, so CG applies; iterates deflated against u stay in the tangent
    space because the operator maps it to itself.
    """

    def __init__(self, H: SparseOperator, u: np.ndarray, lam: float,
                 sigma: float, hd: float):
        self.H = H
        self.u = u
        self.lam = lam
        self.sigma = sigma
        self.hd = hd
        self.n = H.n

    def _project(self, x):
        return x - (self.hd * float(self.u @ x)) * self.u

    def matvec(self, x):
        px = self._project(x)
        y = self.H.matvec(px) - self.lam * px
        return self._project(y) - self.sigma * x

    def diagonal(self):
        # crude Jacobi surrogate; the projector correction is negligible here
        return self.H.diagonal() - self.lam - self.sigma


def projected_hessian_smallest(u: State, grid: GridSpec, V: Potential,
                               params: ModelParams,
                               cg_config: CgConfig = CgConfig(),
                               tol: float = 1e-6,
                               max_outer: int = 400,
                               dense_threshold: int = DENSE_EIGEN_THRESHOLD) -> float:
    """Smallest eigenvalue of the projected energy Hessian at a near-fixed
    point, in the L2_h tangent space. Negative certifies a strict saddle;
    positive is consistent with a (local) minimizer.
    """
    lap = assemble_laplacian(grid)
    A_u = assemble_A_u(grid, lap, V, params, u.values)
    lam = eigenvalue_estimate(u.values, A_u, grid)
    H = hessian_second_derivative(grid, lap, V, params, u.values)
    hd = grid.cell_volume
    n = grid.n_points

    if n <= dense_threshold:
        Hd = H.to_dense() - lam * np.eye(n)
        P = np.eye(n) - hd * np.outer(u.values, u.values)
        push = (10.0 * abs(lam) + 10.0 + float(np.abs(Hd).sum(axis=1).max()))
        B = P @ Hd @ P + push * hd * np.outer(u.values, u.values)
        return float(scipy.linalg.eigvalsh(B)[0])

    # Gershgorin floor of H - lambda gives a PD shift for the projected operator.
    mat = H.matrix.tocsr()
    diag = mat.diagonal()
    abs_sum = np.abs(mat).sum(axis=1).A1 if hasattr(np.abs(mat).sum(axis=1), "A1") \
        else np.asarray(np.abs(mat).sum(axis=1)).ravel()
    gersh = float(np.min(2.0 * diag - abs_sum)) - lam
    sigma = min(gersh, 0.0) - 0.01 * abs(gersh) - 1e-8
    op = _ProjectedShiftedHessian(H, u.values, lam, sigma, hd)

    rng = np.random.default_rng(_seed_from(u.values))
    x = rng.standard_normal(n)
    x -= hd * float(u.values @ x) * u.values
    x /= l2h_norm(x, grid)
    y = None
    value = None
    res = np.inf
    for _ in range(max_outer):
        y = cg_solve(op, x, config=cg_config, x0=y)
        x = y - hd * float(u.values @ y) * u.values
        x /= l2h_norm(x, grid)
        bx = op.matvec(x) + op.sigma * x
        value = float(l2h_inner(x, bx, grid))
        res = l2h_norm(bx - value * x, grid)
        if res <= tol * max(1.0, abs(value)):
            return value
    raise EigensolverError(
        f"projected Hessian iteration did not converge (residual {res:.3e})",
        residuals=[res])


def _seed_from(u: np.ndarray) -> int:
    # deterministic per-state seed; only used to break symmetry of the start vector
    return int(abs(float(np.sum(u[: min(64, u.size)])) * 1e6) % (2**31))


def eigen_gap_monitor(u: State, grid: GridSpec, V: Potential, params: ModelParams,
                      cg_config: CgConfig = CgConfig(), eig_tol: float = 1e-8):
    """Two smallest eigenvalues of the linearization at u and their gap."""
    lap = assemble_laplacian(grid)
    A_u = assemble_A_u(grid, lap, V, params, u.values)
    pairs = smallest_eigenpairs(A_u, 2, grid, config=cg_config, tol=eig_tol)
    mu1, mu2 = pairs[0].value, pairs[1].value
    return mu1, mu2, mu2 - mu1


def report_to_json_file(path, *reports) -> None:
    payload = {}
    for report in reports:
        payload[type(report).__name__] = report.to_json()
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
