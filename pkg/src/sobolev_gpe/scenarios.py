"""Experiment scenarios: configuration, execution, and persisted artifacts.

A scenario bundles grid, potential, model, solver settings, and an
initialization into one JSON-serializable record. Running one produces a run
directory

    <out_root>/<scenario-name>/<tag>/
        scenario.json     exact echo of the configuration
        trace.csv         per-iteration record (header + rows)
        state.csv         final state as index,x[,y],value
        diagnostics.json  certification reports for the run

Identical scenarios (same seeds) reproduce the CSV artifacts byte for byte:
floats are written with repr and nothing time-dependent enters the files.
"""
from __future__ import annotations

import json
import math
import os
import time
import traceback
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .diagnostics import (GroundStateCertificate, LojasiewiczReport,
                          double_ground_state_check, lojasiewicz_certify,
                          projected_hessian_smallest, rate_fit)
from .errors import ConfigurationError, SobolevGpeError
from .grid import (DisorderSpec, GridSpec, Potential, build_grid, disordered_potential,
                   export_nodes_csv, l2h_inner, single_well_potential)
from .linsolve import CgConfig, smallest_eigenpairs
from .manifold import State
from .operators import ModelParams, assemble_a0
from .solver import (InitStrategy, IterationTrace, SolverConfig, initialize,
                     iterations_to_error, run, run_baseline)
from .grid import assemble_laplacian

OUTPUT_ROOT_ENV = "SOBOLEV_GPE_OUT"

#: Reference runs tighten the gradient tolerance to this value.
REFERENCE_GRAD_TOL = 1e-13

SCENARIO_NAMES = ("gp-well", "gp-disorder", "saddle", "hoi", "linear-oracle",
                  "baseline-compare")


@dataclass(frozen=True)
class PotentialConfig:
    kind: str = "single-well"
    K: int = 100
    seed: int = 42
    values: Optional[tuple] = None

    def build(self, grid: GridSpec) -> Potential:
        if self.kind == "single-well":
            return single_well_potential(grid)
        if self.kind == "disordered":
            return disordered_potential(grid, DisorderSpec(K=self.K, seed=self.seed))
        if self.kind == "custom":
            return Potential(values=np.asarray(self.values, dtype=float))
        raise ConfigurationError(f"unknown potential kind {self.kind!r}")

    def to_json(self) -> dict:
        payload = {"kind": self.kind}
        if self.kind == "disordered":
            payload.update({"K": self.K, "seed": self.seed})
        if self.kind == "custom":
            payload["values"] = list(self.values)
        return payload

    @classmethod
    def from_json(cls, payload: dict) -> "PotentialConfig":
        return cls(kind=payload["kind"], K=payload.get("K", 100),
                   seed=payload.get("seed", 42),
                   values=tuple(payload["values"]) if "values" in payload else None)


@dataclass(frozen=True)
class Scenario:
    """Complete, serializable description of one experiment."""

    name: str
    d: int = 2
    bounds: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    n_interior: tuple = (127, 127)
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    params: ModelParams = field(default_factory=lambda: ModelParams.gpe(1.0))
    tau: float = 1.0
    max_iterations: int = 500
    grad_norm_tol: float = 1e-10
    cg_rel_tolerance: float = 1e-12
    record_every: int = 1
    init: InitStrategy = field(default_factory=InitStrategy.ground_of_A0)
    baseline_tau: float = 0.3
    saddle_epsilons: tuple = (1e-2, 1e-3, 1e-4)
    noise_seed: int = 7
    tag: str = ""

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ConfigurationError(
                f"unknown scenario {self.name!r}; expected one of {SCENARIO_NAMES}")

    def grid(self) -> GridSpec:
        return build_grid(self.d, self.bounds, self.n_interior)

    def solver_config(self, grad_tol: Optional[float] = None,
                      tau: Optional[float] = None,
                      raise_on_divergence: bool = True,
                      max_iterations: Optional[int] = None) -> SolverConfig:
        return SolverConfig(
            tau=self.tau if tau is None else tau,
            max_iterations=self.max_iterations if max_iterations is None else max_iterations,
            grad_norm_tol=self.grad_norm_tol if grad_tol is None else grad_tol,
            cg=CgConfig(rel_tolerance=self.cg_rel_tolerance),
            record_every=self.record_every,
            raise_on_divergence=raise_on_divergence)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "d": self.d,
            "bounds": [list(b) for b in self.bounds],
            "n_interior": list(self.n_interior),
            "potential": self.potential.to_json(),
            "params": self.params.to_json(),
            "tau": self.tau,
            "max_iterations": self.max_iterations,
            "grad_norm_tol": self.grad_norm_tol,
            "cg_rel_tolerance": self.cg_rel_tolerance,
            "record_every": self.record_every,
            "init": self.init.to_json(),
            "baseline_tau": self.baseline_tau,
            "saddle_epsilons": list(self.saddle_epsilons),
            "noise_seed": self.noise_seed,
            "tag": self.tag,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "Scenario":
        return cls(
            name=payload["name"],
            d=payload.get("d", 2),
            bounds=tuple(tuple(b) for b in payload.get("bounds", ((-1.0, 1.0), (-1.0, 1.0)))),
            n_interior=tuple(payload.get("n_interior", (127, 127))),
            potential=PotentialConfig.from_json(payload.get("potential", {"kind": "single-well"})),
            params=ModelParams.from_json(payload.get("params", {"beta": 1.0})),
            tau=payload.get("tau", 1.0),
            max_iterations=payload.get("max_iterations", 500),
            grad_norm_tol=payload.get("grad_norm_tol", 1e-10),
            cg_rel_tolerance=payload.get("cg_rel_tolerance", 1e-12),
            record_every=payload.get("record_every", 1),
            init=InitStrategy.from_json(payload.get("init", {"kind": "ground_of_A0"})),
            baseline_tau=payload.get("baseline_tau", 0.3),
            saddle_epsilons=tuple(payload.get("saddle_epsilons", (1e-2, 1e-3, 1e-4))),
            noise_seed=payload.get("noise_seed", 7),
            tag=payload.get("tag", ""))

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as f:
            return cls.from_json(json.load(f))


def gp_well(beta: float = 1.0, n: int = 127, tau: float = 1.0, **kw) -> Scenario:
    return Scenario(name="gp-well", n_interior=(n, n), params=ModelParams.gpe(beta),
                    tau=tau, **kw)


def gp_disorder(beta: float = 0.5, K: int = 100, seed: int = 42, n: int = 127,
                tau: float = 1.5, **kw) -> Scenario:
    return Scenario(name="gp-disorder", n_interior=(n, n),
                    potential=PotentialConfig(kind="disordered", K=K, seed=seed),
                    params=ModelParams.gpe(beta), tau=tau, **kw)


def hoi(beta: float = 10.0, delta: float = 1.0, n: int = 127, tau: float = 1.0,
        max_iterations: int = 2000, **kw) -> Scenario:
    return Scenario(name="hoi", n_interior=(n, n), params=ModelParams.hoi(beta, delta),
                    tau=tau, max_iterations=max_iterations, **kw)


def linear_oracle(n: int = 127, **kw) -> Scenario:
    return Scenario(name="linear-oracle", n_interior=(n, n), params=ModelParams.gpe(0.0), **kw)


def baseline_compare(beta: float = 100.0, n: int = 63, baseline_tau: float = 0.3,
                     max_iterations: int = 1500, **kw) -> Scenario:
    return Scenario(name="baseline-compare", n_interior=(n, n),
                    params=ModelParams.gpe(beta), baseline_tau=baseline_tau,
                    max_iterations=max_iterations, **kw)


def saddle(beta: float = 100.0, n: int = 31, epsilons=(1e-2, 1e-3, 1e-4),
           noise_seed: int = 7, max_iterations: int = 4000, **kw) -> Scenario:
    return Scenario(name="saddle", n_interior=(n, n), params=ModelParams.gpe(beta),
                    init=InitStrategy.second_of_A0(), saddle_epsilons=tuple(epsilons),
                    noise_seed=noise_seed, max_iterations=max_iterations, **kw)


def output_root(explicit=None) -> Path:
    if explicit is not None:
        return Path(explicit)
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "out"))


def _run_dir(scenario: Scenario, out_root) -> Path:
    tag = scenario.tag or time.strftime("%Y%m%d-%H%M%S")
    path = output_root(out_root) / scenario.name / tag
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_state_csv(path, grid: GridSpec, values: np.ndarray) -> None:
    export_nodes_csv(path, grid, values)


def _reference_state(grid, V, scenario) -> State:
    cfg = scenario.solver_config(grad_tol=REFERENCE_GRAD_TOL,
                                 max_iterations=max(scenario.max_iterations, 2000))
    state, _ = run(grid, V, scenario.params, cfg, scenario.init)
    return state


@dataclass
class RunArtifacts:
    directory: Path
    final_state: State
    trace: IterationTrace
    diagnostics: dict


def run_scenario(scenario: Scenario, out_root=None) -> RunArtifacts:
    """Execute a scenario and persist its artifacts.

    Failures still produce an ``error_report.json`` in the run directory
    before the exception propagates.
    """
    rundir = _run_dir(scenario, out_root)
    try:
        return _run_scenario_inner(scenario, rundir)
    except Exception as exc:
        with open(rundir / "error_report.json", "w") as f:
            json.dump({"error": type(exc).__name__, "message": str(exc),
                       "traceback": traceback.format_exc()}, f, indent=2)
        raise


def _run_scenario_inner(scenario: Scenario, rundir: Path) -> RunArtifacts:
    grid = scenario.grid()
    V = scenario.potential.build(grid)

    with open(rundir / "scenario.json", "w") as f:
        json.dump(scenario.to_json(), f, indent=2, sort_keys=True)

    if scenario.name == "saddle":
        return saddle_experiment(scenario, rundir=rundir)

    reference = _reference_state(grid, V, scenario)
    diagnostics: dict = {}

    if scenario.name == "baseline-compare":
        state, trace = run(grid, V, scenario.params, scenario.solver_config(),
                           scenario.init, reference=reference)
        base_cfg = scenario.solver_config(tau=scenario.baseline_tau,
                                          raise_on_divergence=False)
        base_state, base_trace = run_baseline(grid, V, scenario.params, base_cfg,
                                              scenario.init, reference=reference)
        base_trace.to_csv(rundir / "trace_baseline.csv")
        diagnostics["baseline_comparison"] = {
            "sobolev_iters_to_1e-8": iterations_to_error(trace, 1e-8),
            "baseline_iters_to_1e-8": iterations_to_error(base_trace, 1e-8),
            "sobolev_tau": scenario.tau,
            "baseline_tau": scenario.baseline_tau,
            "baseline_stop_reason": base_trace.stop_reason,
        }
    else:
        state, trace = run(grid, V, scenario.params, scenario.solver_config(),
                           scenario.init, reference=reference)

    trace.to_csv(rundir / "trace.csv")
    trace.write_metadata(rundir / "run_metadata.json")
    _write_state_csv(rundir / "state.csv", grid, state.values)

    lap = assemble_laplacian(grid)
    from .operators import energy as energy_fn
    e_star = energy_fn(grid, lap, V, scenario.params, reference.values)
    try:
        report = lojasiewicz_certify(trace, e_star)
        diagnostics["lojasiewicz"] = report.to_json()
        diagnostics["lojasiewicz_summary"] = report.summary()
    except SobolevGpeError as exc:
        diagnostics["lojasiewicz_error"] = str(exc)

    certificate = double_ground_state_check(state, grid, V, scenario.params,
                                            CgConfig(rel_tolerance=scenario.cg_rel_tolerance))
    diagnostics["ground_state_certificate"] = certificate.to_json()
    diagnostics["certificate_summary"] = certificate.summary()

    if scenario.name == "linear-oracle":
        a0 = assemble_a0(lap, V)
        pair = smallest_eigenpairs(a0, 1, grid,
                                   CgConfig(rel_tolerance=scenario.cg_rel_tolerance))[0]
        dv = state.values - np.sign(l2h_inner(state.values, pair.vector, grid)) * pair.vector
        lam = trace.column("lambda")[-1]
        diagnostics["linear_oracle"] = {
            "l2_distance_to_eigenvector": float(np.sqrt(max(l2h_inner(dv, dv, grid), 0.0))),
            "lambda_rel_error": abs(lam - pair.value) / abs(pair.value),
            "mu1": pair.value,
        }

    with open(rundir / "diagnostics.json", "w") as f:
        json.dump(diagnostics, f, indent=2, sort_keys=True)
    return RunArtifacts(directory=rundir, final_state=state, trace=trace,
                        diagnostics=diagnostics)


def saddle_experiment(scenario: Scenario, epsilons: Optional[Sequence[float]] = None,
                      seed: Optional[int] = None, rundir: Optional[Path] = None,
                      out_root=None) -> RunArtifacts:
    """Run the saddle-escape experiment.

    The unperturbed run (from the second fixed-metric mode) lands on the
    saddle reference; its projected Hessian is certified. Each perturbed run
    records distance-to-saddle and distance-to-ground columns.
    """
    if rundir is None:
        rundir = _run_dir(scenario, out_root)
        with open(rundir / "scenario.json", "w") as f:
            json.dump(scenario.to_json(), f, indent=2, sort_keys=True)
    epsilons = tuple(scenario.saddle_epsilons if epsilons is None else epsilons)
    seed = scenario.noise_seed if seed is None else seed

    grid = scenario.grid()
    V = scenario.potential.build(grid)
    ground_scenario = replace(scenario, init=InitStrategy.ground_of_A0())
    ground = _reference_state(grid, V, ground_scenario)

    # unperturbed leg lands on the saddle
    saddle_state, saddle_trace = run(grid, V, scenario.params, scenario.solver_config(),
                                     InitStrategy.second_of_A0())
    saddle_trace.to_csv(rundir / "trace.csv")
    saddle_trace.write_metadata(rundir / "run_metadata.json")
    _write_state_csv(rundir / "state.csv", grid, saddle_state.values)

    hessian_min = projected_hessian_smallest(
        saddle_state, grid, V, scenario.params,
        CgConfig(rel_tolerance=scenario.cg_rel_tolerance))

    diagnostics = {
        "saddle": {
            "hessian_smallest_eigenvalue": hessian_min,
            "is_strict_saddle": hessian_min < 0.0,
            "alignment_with_ground": abs(l2h_inner(saddle_state.values, ground.values, grid)),
            "grad_norm": float(saddle_trace.column("grad_norm")[-1]),
        },
        "epsilon_runs": {},
    }

    base = InitStrategy.second_of_A0()
    # escape runs pass through a long near-saddle plateau where the energy is
    # momentarily flat; the stall backstop must not cut them short there
    escape_cfg = replace(scenario.solver_config(), energy_stall_tol=0.0)
    for eps in epsilons:
        init = InitStrategy.perturbed(base, eps, seed)
        state, trace = run(grid, V, scenario.params, escape_cfg,
                           init, reference=ground,
                           extra_references={"saddle": saddle_state.values})
        eps_dir = rundir / f"eps_{eps:g}"
        eps_dir.mkdir(exist_ok=True)
        trace.to_csv(eps_dir / "trace.csv")
        _write_state_csv(eps_dir / "state.csv", grid, state.values)
        dist = trace.column("dist_saddle")
        diagnostics["epsilon_runs"][f"{eps:g}"] = {
            "alignment_with_ground": abs(l2h_inner(state.values, ground.values, grid)),
            "dist_saddle_first": float(dist[0]),
            "dist_saddle_min": float(dist.min()),
            "dist_saddle_min_iter": int(trace.column("iter")[int(dist.argmin())]),
            "dist_saddle_final": float(dist[-1]),
            "iterations": trace.iterations,
        }

    with open(rundir / "diagnostics.json", "w") as f:
        json.dump(diagnostics, f, indent=2, sort_keys=True)
    return RunArtifacts(directory=rundir, final_state=saddle_state,
                        trace=saddle_trace, diagnostics=diagnostics)


_AXIS_SETTERS = {
    "beta": lambda s, v: replace(s, params=ModelParams(beta=v, delta=s.params.delta,
                                                       alpha=s.params.alpha,
                                                       variant=s.params.variant)),
    "delta": lambda s, v: replace(s, params=ModelParams(beta=s.params.beta, delta=v,
                                                        alpha=s.params.alpha,
                                                        variant=s.params.variant)),
    "alpha": lambda s, v: replace(s, params=ModelParams(beta=s.params.beta,
                                                        delta=s.params.delta, alpha=v,
                                                        variant=s.params.variant)),
    "tau": lambda s, v: replace(s, tau=v),
}


def sweep(base: Scenario, axis: str, values: Sequence[float], out_root=None) -> Path:
    """Run the base scenario across one parameter axis; write a summary CSV.

    Each row records iterations-to-tolerance, the final eigenvalue estimate,
    the fitted contraction rate, and the certificate status. Per-cell
    failures are recorded in the row and the sweep continues.
    """
    if axis not in _AXIS_SETTERS:
        raise ConfigurationError(f"cannot sweep axis {axis!r}; "
                                 f"known axes: {sorted(_AXIS_SETTERS)}")
    root = output_root(out_root) / base.name / ((base.tag or "sweep") + f"-{axis}")
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        cell = _AXIS_SETTERS[axis](base, value)
        cell = replace(cell, tag=f"{axis}-{value:g}")
        try:
            artifacts = run_scenario(cell, out_root=root)
            trace = artifacts.trace
            errs = trace.column("l2_error")
            finite = errs[np.isfinite(errs) & (errs > 0)]
            if finite.size >= 3:
                rate, _ = rate_fit(finite, window=min(finite.size, max(3, finite.size // 2)))
            else:
                rate = math.nan
            cert = artifacts.diagnostics.get("ground_state_certificate", {})
            rows.append([value, trace.iterations, trace.column("lambda")[-1],
                         rate, cert.get("passed", ""), ""])
        except Exception as exc:  # per-cell failure: record and continue
            rows.append([value, "", "", "", "", f"{type(exc).__name__}: {exc}"])
    summary = root / "sweep.csv"
    with open(summary, "w", newline="") as f:
        import csv as _csv
        writer = _csv.writer(f)
        writer.writerow([axis, "iterations", "lambda", "rate_c", "certificate", "error"])
        for row in rows:
            writer.writerow(row)
    return summary


def certify_run(rundir) -> dict:
    """Recompute certification reports for a persisted run directory."""
    rundir = Path(rundir)
    scenario = Scenario.load(rundir / "scenario.json")
    grid = scenario.grid()
    V = scenario.potential.build(grid)
    from .solver import trace_from_csv
    trace = trace_from_csv(rundir / "trace.csv")

    values = np.loadtxt(rundir / "state.csv", delimiter=",", skiprows=1,
                        usecols=grid.d + 1)
    state = State(values=np.asarray(values, dtype=float), normalized=True)

    reference = _reference_state(grid, V, scenario if scenario.name != "saddle"
                                 else replace(scenario, init=InitStrategy.ground_of_A0()))
    lap = assemble_laplacian(grid)
    from .operators import energy as energy_fn
    e_star = energy_fn(grid, lap, V, scenario.params, reference.values)

    diagnostics: dict = {}
    try:
        diagnostics["lojasiewicz"] = lojasiewicz_certify(trace, e_star).to_json()
    except SobolevGpeError as exc:
        diagnostics["lojasiewicz_error"] = str(exc)
    certificate = double_ground_state_check(state, grid, V, scenario.params,
                                            CgConfig(rel_tolerance=scenario.cg_rel_tolerance))
    diagnostics["ground_state_certificate"] = certificate.to_json()
    with open(rundir / "diagnostics.json", "w") as f:
        json.dump(diagnostics, f, indent=2, sort_keys=True)
    return diagnostics
