"""Projected gradient descent loops, initialization, and iteration traces.

The adaptive-metric iteration reassembles the linearized operator every step
(the metric follows the iterate) and spends one CG solve per step on the
Greens vector, which also furnishes the gradient norm and the step direction.
A fixed-metric variant using the Greens function of A_0 is provided as the
comparison baseline.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .__about__ import __version__
from .errors import ConfigurationError, DomainError, SolverError
from .grid import GridSpec, Potential, assemble_laplacian, l2h_inner, l2h_norm
from .linsolve import CgConfig, CgStats, cg_solve, greens_apply, smallest_eigenpairs
from .manifold import ManifoldGradient, State, manifold_gradient, retract
from .operators import (ModelParams, SparseOperator, a_u_inner, assemble_A_u,
                        assemble_a0, energy, eigenvalue_estimate, residual_norm)

TRACE_COLUMNS = ("iter", "energy", "grad_norm", "lambda", "residual", "tau",
                 "min_u", "max_u", "l2_error", "a0_diff")

#: Seed namespace for perturbation noise so runs are reproducible.
_NOISE_SEED = 0xA11CE


@dataclass(frozen=True)
class SolverConfig:
    """Step size, stopping rules, and trace cadence.

    ``tau`` may be a constant or a callable of the iteration index; when a
    schedule is used the declared (tau_min, tau_max) bracket is validated.
    Stopping: adaptive-norm gradient below ``grad_norm_tol``, or relative
    energy stall below ``energy_stall_tol`` across ``stall_window`` steps, or
    the iteration budget. Energy increasing for ``divergence_window``
    consecutive steps (beyond relative rounding slack) raises a SolverError
    with the partial trace attached unless ``raise_on_divergence`` is off.
    """

    tau: Union[float, Callable[[int], float]] = 1.0
    tau_min: Optional[float] = None
    tau_max: Optional[float] = None
    max_iterations: int = 500
    grad_norm_tol: float = 1e-10
    energy_stall_tol: float = 1e-14
    stall_window: int = 10
    cg: CgConfig = field(default_factory=CgConfig)
    record_every: int = 1
    raise_on_divergence: bool = True
    divergence_window: int = 5
    divergence_rtol: float = 1e-12

    def __post_init__(self):
        if callable(self.tau):
            if self.tau_min is None or self.tau_max is None:
                raise ConfigurationError("a tau schedule needs explicit tau_min and tau_max")
        else:
            if not self.tau > 0:
                raise ConfigurationError(f"tau must be positive, got {self.tau}")
        lo = self.tau_min if self.tau_min is not None else (None if callable(self.tau) else self.tau)
        hi = self.tau_max if self.tau_max is not None else (None if callable(self.tau) else self.tau)
        if lo is not None and hi is not None and not (0 < lo <= hi):
            raise ConfigurationError(f"need 0 < tau_min <= tau_max, got ({lo}, {hi})")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1")

    def tau_at(self, n: int) -> float:
        t = self.tau(n) if callable(self.tau) else self.tau
        if not t > 0:
            raise ConfigurationError(f"step size at iteration {n} is not positive: {t}")
        return float(t)


@dataclass(frozen=True)
class InitStrategy:
    """How the first iterate is produced.

    Kinds: ``ground_of_A0`` (positive ground mode of the fixed-metric
    operator), ``second_of_A0``, ``positive_constant``, ``custom`` (explicit
    vector), and ``perturbed`` (a base strategy plus seeded noise of relative
    magnitude ``epsilon``, scaled to the base's L2_h norm).
    """

    kind: str
    vector: Optional[np.ndarray] = None
    base: Optional["InitStrategy"] = None
    epsilon: float = 0.0
    seed: int = 0

    _KINDS = ("ground_of_A0", "second_of_A0", "positive_constant", "custom", "perturbed")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ConfigurationError(f"unknown init strategy {self.kind!r}")
        if self.kind == "custom" and self.vector is None:
            raise ConfigurationError("custom init needs a vector")
        if self.kind == "perturbed" and self.base is None:
            raise ConfigurationError("perturbed init needs a base strategy")

    @classmethod
    def ground_of_A0(cls) -> "InitStrategy":
        return cls(kind="ground_of_A0")

    @classmethod
    def second_of_A0(cls) -> "InitStrategy":
        return cls(kind="second_of_A0")

    @classmethod
    def positive_constant(cls) -> "InitStrategy":
        return cls(kind="positive_constant")

    @classmethod
    def custom(cls, vector: np.ndarray) -> "InitStrategy":
        return cls(kind="custom", vector=np.asarray(vector, dtype=float))

    @classmethod
    def perturbed(cls, base: "InitStrategy", epsilon: float, seed: int) -> "InitStrategy":
        return cls(kind="perturbed", base=base, epsilon=float(epsilon), seed=int(seed))

    def to_json(self) -> dict:
        payload = {"kind": self.kind, "epsilon": self.epsilon, "seed": self.seed}
        if self.vector is not None:
            payload["vector"] = self.vector.tolist()
        if self.base is not None:
            payload["base"] = self.base.to_json()
        return payload

    @classmethod
    def from_json(cls, payload: dict) -> "InitStrategy":
        vec = payload.get("vector")
        base = payload.get("base")
        return cls(kind=payload["kind"],
                   vector=None if vec is None else np.asarray(vec, dtype=float),
                   base=None if base is None else cls.from_json(base),
                   epsilon=payload.get("epsilon", 0.0),
                   seed=payload.get("seed", 0))


@dataclass
class IterationTrace:
    """Per-step record of a descent run.

    Columns follow TRACE_COLUMNS; ``extra`` maps additional column names
    (distance-to-reference curves) to value lists. ``energy_violations``
    flags recorded steps whose energy rose beyond rounding slack; recording
    never silently drops them. ``stop_reason`` is one of ``grad_tol``,
    ``energy_stall``, ``max_iterations``, ``divergence``.
    """

    rows: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    record_every: int = 1
    stop_reason: str = ""
    energy_violations: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        if name in TRACE_COLUMNS:
            i = TRACE_COLUMNS.index(name)
            return np.array([row[i] for row in self.rows], dtype=float)
        return np.array(self.extra[name], dtype=float)

    @property
    def iterations(self) -> int:
        return int(self.rows[-1][0]) if self.rows else 0

    @property
    def final_energy(self) -> float:
        return float(self.rows[-1][1])

    def extra_columns(self) -> tuple:
        return tuple(self.extra.keys())

    def header(self) -> tuple:
        return TRACE_COLUMNS + self.extra_columns()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(self.header())
            extras = [self.extra[k] for k in self.extra_columns()]
            for i, row in enumerate(self.rows):
                cells = [row[0]] + [repr(float(v)) for v in row[1:]]
                cells += [repr(float(col[i])) for col in extras]
                writer.writerow(cells)

    def write_metadata(self, path) -> None:
        payload = dict(self.metadata)
        payload.update({
            "stop_reason": self.stop_reason,
            "iterations": self.iterations,
            "record_every": self.record_every,
            "energy_violations": self.energy_violations,
            "version": __version__,
        })
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)


def trace_from_csv(path) -> IterationTrace:
    """Rehydrate a trace written by ``IterationTrace.to_csv``."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        extra_names = tuple(h for h in header if h not in TRACE_COLUMNS)
        trace = IterationTrace(extra={name: [] for name in extra_names})
        for cells in reader:
            named = dict(zip(header, cells))
            row = [int(named["iter"])] + [float(named[c]) for c in TRACE_COLUMNS[1:]]
            trace.rows.append(tuple(row))
            for name in extra_names:
                trace.extra[name].append(float(named[name]))
    return trace


def initialize(grid: GridSpec, V: Potential, params: ModelParams,
               strategy: InitStrategy, cg_config: CgConfig = CgConfig()) -> State:
    """Build the normalized initial state for a descent run."""
    if strategy.kind == "perturbed":
        base = initialize(grid, V, params, strategy.base, cg_config)
        if strategy.epsilon == 0.0:
            return base
        rng = np.random.default_rng(_NOISE_SEED + strategy.seed)
        eta = rng.standard_normal(grid.n_points)
        eta *= l2h_norm(base.values, grid) / l2h_norm(eta, grid)
        return retract(base.values + strategy.epsilon * eta, grid)
    if strategy.kind == "custom":
        grid.check_length(strategy.vector, "custom init vector")
        return retract(strategy.vector, grid)
    if strategy.kind == "positive_constant":
        return retract(np.ones(grid.n_points), grid)

    lap = assemble_laplacian(grid)
    a0 = assemble_a0(lap, V)
    if strategy.kind == "ground_of_A0":
        pair = smallest_eigenpairs(a0, 1, grid, config=cg_config)[0]
        state = retract(pair.vector, grid)
        if state.values.min() <= 0.0:
            raise SolverError("fixed-metric ground mode is not entrywise positive; "
                              "eigensolver likely unconverged")
        return state
    pair = smallest_eigenpairs(a0, 2, grid, config=cg_config)[1]
    return retract(pair.vector, grid)


def sobolev_pgd_step(u: State, A_u: SparseOperator, grid: GridSpec, tau: float,
                     config: CgConfig = CgConfig()) -> State:
    """One adaptive-metric step: blend the iterate with its scaled Greens
    vector, then retract. For u >= 0, tau <= 1, and an M-matrix operator the
    blend keeps nonnegative entries (both summands are nonnegative).
    """
    mg = manifold_gradient(u, A_u, grid, config=config)
    return _step_from_gradient(u, mg, grid, tau)


def _step_from_gradient(u: State, mg: ManifoldGradient, grid: GridSpec, tau: float) -> State:
    candidate = (1.0 - tau) * u.values + (tau / mg.inner_u_Gu) * mg.greens_of_u
    norm = l2h_norm(candidate, grid)
    if norm == 0.0:
        raise DomainError("descent step produced the zero vector")
    return State(values=candidate / norm, normalized=True)


def baseline_a0_pgd_step(u: State, A_0: SparseOperator, A_u: SparseOperator,
                         grid: GridSpec, tau: float,
                         config: CgConfig = CgConfig()) -> State:
    """Fixed-metric comparison step: the gradient is taken in the a_0 inner
    product (solve A_0 y = A_u u, project onto the tangent space through
    G_0 u), then the step is retracted.
    """
    g = cg_solve(A_0, A_u.matvec(u.values), config=config)
    g0u = cg_solve(A_0, u.values, config=config)
    gamma = l2h_inner(u.values, g0u, grid)
    grad = g - (l2h_inner(g, u.values, grid) / gamma) * g0u
    return retract(u.values - tau * grad, grid)


def _record(trace, n, E, gn, lam, res, tau, u, l2e, a0d, extras):
    trace.rows.append((n, E, gn, lam, res, tau,
                       float(u.min()), float(u.max()), l2e, a0d))
    for name, value in extras.items():
        trace.extra[name].append(value)


def run(grid: GridSpec, V: Potential, params: ModelParams, config: SolverConfig,
        init: Union[InitStrategy, State], reference: Optional[State] = None,
        extra_references: Optional[Mapping[str, np.ndarray]] = None):
    """Run the adaptive-metric descent to a stopping rule.

    Args:
        init: an InitStrategy, or an already-built State.
        reference: optional high-accuracy ground state; fills the l2_error
            column.
        extra_references: optional named states; each adds a distance column
            ``dist_<name>`` to the trace.

    Returns:
        (final_state, trace). The trace always contains the final iterate's
        row. On divergence a SolverError is raised with ``trace`` attached
        (unless configured off, in which case the run stops and the reason is
        recorded).
    """
    lap = assemble_laplacian(grid)
    a0 = assemble_a0(lap, V)
    state = init if isinstance(init, State) else initialize(grid, V, params, init, config.cg)
    u = retract(state.values, grid)

    extras_ref = dict(extra_references or {})
    trace = IterationTrace(record_every=config.record_every,
                           extra={f"dist_{k}": [] for k in extras_ref})
    trace.metadata.update({
        "grid": {"d": grid.d, "bounds": [list(b) for b in grid.bounds],
                 "n_interior": list(grid.n_interior), "h": grid.h},
        "params": params.to_json(),
        "tau": None if callable(config.tau) else config.tau,
        "grad_norm_tol": config.grad_norm_tol,
        "max_iterations": config.max_iterations,
        "potential_tag": V.tag,
    })

    stats = CgStats()
    greens_prev = None
    energy_prev = None
    rising = 0
    stall = []
    cg_total = 0

    def distances(vals):
        out = {}
        if reference is not None:
            out["l2"] = l2h_norm(vals - reference.values, grid)
        for name, ref in extras_ref.items():
            out[f"dist_{name}"] = l2h_norm(vals - np.asarray(ref), grid)
        return out

    for n in range(config.max_iterations + 1):
        A_u = assemble_A_u(grid, lap, V, params, u.values)
        mg = manifold_gradient(u, A_u, grid, config=config.cg,
                               greens_x0=greens_prev, stats=stats)
        cg_total += stats.iterations
        greens_prev = mg.greens_of_u
        E = energy(grid, lap, V, params, u.values)
        lam = eigenvalue_estimate(u.values, A_u, grid)
        res = residual_norm(u.values, A_u, grid)
        gn = mg.grad_norm
        tau = config.tau_at(n)
        dist = distances(u.values)
        l2e = dist.get("l2", math.nan)
        extra_vals = {k: v for k, v in dist.items() if k != "l2"}

        # descent bookkeeping
        if energy_prev is not None:
            if E > energy_prev + config.divergence_rtol * max(1.0, abs(energy_prev)):
                rising += 1
                trace.energy_violations.append(n)
            else:
                rising = 0
        energy_prev = E
        stall.append(E)

        stop = ""
        if gn <= config.grad_norm_tol:
            stop = "grad_tol"
        elif rising >= config.divergence_window:
            stop = "divergence"
        elif len(stall) > config.stall_window:
            drop = stall[-config.stall_window - 1] - E
            if abs(drop) < config.energy_stall_tol * max(1.0, abs(E)):
                stop = "energy_stall"
            stall.pop(0)
        if n == config.max_iterations and not stop:
            stop = "max_iterations"

        if stop:
            _record(trace, n, E, gn, lam, res, tau, u.values, l2e, math.nan, extra_vals)
            trace.stop_reason = stop
            break

        u_next = _step_from_gradient(u, mg, grid, tau)
        if n % config.record_every == 0:
            a0_diff = np.sqrt(max(a_u_inner(u_next.values - u.values,
                                            u_next.values - u.values, a0, grid), 0.0))
            _record(trace, n, E, gn, lam, res, tau, u.values, l2e, a0_diff, extra_vals)
        u = u_next

    trace.metadata["cg_iterations_total"] = cg_total
    if trace.stop_reason == "divergence" and config.raise_on_divergence:
        err = SolverError(
            f"energy increased for {config.divergence_window} consecutive steps "
            f"(iteration {trace.iterations}); trace attached")
        err.trace = trace
        raise err
    return u, trace


def run_baseline(grid: GridSpec, V: Potential, params: ModelParams, config: SolverConfig,
                 init: Union[InitStrategy, State], reference: Optional[State] = None):
    """Fixed-metric descent loop mirroring ``run`` for comparisons.

    The gradient norm reported (and used for stopping) is the a_0 norm of the
    fixed-metric gradient.
    """
    lap = assemble_laplacian(grid)
    a0 = assemble_a0(lap, V)
    state = init if isinstance(init, State) else initialize(grid, V, params, init, config.cg)
    u = retract(state.values, grid)

    trace = IterationTrace(record_every=config.record_every)
    trace.metadata.update({"method": "a0-baseline", "params": params.to_json(),
                           "tau": None if callable(config.tau) else config.tau})
    g_warm = None
    y_warm = None
    energy_prev = None
    rising = 0

    for n in range(config.max_iterations + 1):
        A_u = assemble_A_u(grid, lap, V, params, u.values)
        g = cg_solve(a0, A_u.matvec(u.values), config=config.cg, x0=g_warm)
        y0 = cg_solve(a0, u.values, config=config.cg, x0=y_warm)
        g_warm, y_warm = g, y0
        gamma = l2h_inner(u.values, y0, grid)
        grad = g - (l2h_inner(g, u.values, grid) / gamma) * y0
        gn = np.sqrt(max(a_u_inner(grad, grad, a0, grid), 0.0))
        E = energy(grid, lap, V, params, u.values)
        lam = eigenvalue_estimate(u.values, A_u, grid)
        res = residual_norm(u.values, A_u, grid)
        tau = config.tau_at(n)
        l2e = l2h_norm(u.values - reference.values, grid) if reference is not None else math.nan

        if energy_prev is not None:
            if E > energy_prev + config.divergence_rtol * max(1.0, abs(energy_prev)):
                rising += 1
                trace.energy_violations.append(n)
            else:
                rising = 0
        energy_prev = E

        stop = ""
        if gn <= config.grad_norm_tol:
            stop = "grad_tol"
        elif rising >= config.divergence_window and config.raise_on_divergence:
            stop = "divergence"
        if n == config.max_iterations and not stop:
            stop = "max_iterations"

        if stop:
            _record(trace, n, E, gn, lam, res, tau, u.values, l2e, math.nan, {})
            trace.stop_reason = stop
            break

        u_next = retract(u.values - tau * grad, grid)
        if n % config.record_every == 0:
            a0_diff = np.sqrt(max(a_u_inner(u_next.values - u.values,
                                            u_next.values - u.values, a0, grid), 0.0))
            _record(trace, n, E, gn, lam, res, tau, u.values, l2e, a0_diff, {})
        u = u_next

    if trace.stop_reason == "divergence":
        err = SolverError("baseline energy increased for consecutive steps; trace attached")
        err.trace = trace
        raise err
    return u, trace


def iterations_to_error(trace: IterationTrace, threshold: float) -> Optional[int]:
    """First recorded iteration whose l2_error drops below the threshold."""
    errs = trace.column("l2_error")
    iters = trace.column("iter")
    hit = np.nonzero(errs < threshold)[0]
    return int(iters[hit[0]]) if hit.size else None
