"""Figure reproductions and parameter sweeps built on the solver modules."""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .evolve import PropagationConfig, TimeSeries, coherence_probe, propagate, propagate_fock_diagonal
from .hilbert import SpaceSpec, default_cutoff
from .model import SystemParams, build_hamiltonian, collapse_ops
from .observables import MEASUREMENT_WINDOW, area_s, peak_absorption, susceptibility
from .steadystate import initial_state, liouvillian_matrix, steady_state_atom

FIG2_G = (0.08, 0.03, 0.008, 0.003)
FIG4_KAPPA = (1.0, 0.7, 0.5, 0.3)
FIG5_DELTA = (0.0, -0.5, -1.0, -1.5)
FOCK_N = (0, 1, 2, 3, 4)
RELAXATION_TIME = 200.0


@dataclass(frozen=True)
class SolverOptions:
    method: str = "rk45"
    sample_dt: float = 0.05
    step_dt: float = 0.01
    rtol: float = 1e-8
    atol: float = 1e-10
    n_max: int | None = None
    t_end: float = MEASUREMENT_WINDOW
    fock_blocks: bool = True

    def propagation(self, t_end=None) -> PropagationConfig:
        return PropagationConfig(
            t_end=self.t_end if t_end is None else t_end,
            sample_dt=self.sample_dt,
            method=self.method,
            step_dt=self.step_dt,
            rtol=self.rtol,
            atol=self.atol,
        )

    def cutoff(self, n: int) -> int:
        return default_cutoff(n) if self.n_max is None else self.n_max


@dataclass(frozen=True)
class FockRun:
    """Im/Re X(t) after injecting ``|n>`` into the steady-state EIT medium."""

    params: SystemParams
    n: int
    chi: TimeSeries
    checks: dict = field(default_factory=dict)

    @property
    def imx(self) -> TimeSeries:
        return self.chi.map(np.imag, label=f"n={self.n}")

    def area(self, t_window: float = MEASUREMENT_WINDOW) -> float:
        return area_s(self.imx, t_window)

    def peak(self) -> tuple[float, float]:
        return peak_absorption(self.imx)


def simulate_fock(params: SystemParams, n: int, solver: SolverOptions = SolverOptions()) -> FockRun:
    """Propagate rho_ss (x) |n><n| over the measurement window.

    With ``solver.fock_blocks`` the photon-number-diagonal generator is used
    (exact for Fock inputs); otherwise the full composite Liouvillian.
    """
    rho_atom = steady_state_atom(params)
    probes = [coherence_probe("e", "a")]
    if solver.fock_blocks:
        res = propagate_fock_diagonal(rho_atom, n, params, solver.propagation(), probes, n_max=solver.cutoff(n))
    else:
        space = SpaceSpec(solver.cutoff(n))
        h = build_hamiltonian(params, space)
        c = collapse_ops(params, space)
        res = propagate(initial_state(rho_atom, n, space), h, c, solver.propagation(), probes,
                        L=liouvillian_matrix(h, c))
    chi = susceptibility(res["rho_ea"], params).base
    return FockRun(params, n, chi, res.checks)


def _simulate_task(task):
    params, n, solver = task
    return simulate_fock(params, n, solver)


def run_many(tasks, jobs: int = 1) -> list[FockRun]:
    """Run ``(params, n, solver)`` tasks, preserving input order."""
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [_simulate_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_simulate_task, tasks))


@dataclass(frozen=True)
class SweepPoint:
    g_disp: float
    kappa: float
    delta: float
    n: int
    area: float
    peak_time: float
    peak_value: float


def sweep(base: SystemParams, g_list, kappa_list, delta_list, n_list,
          solver: SolverOptions = SolverOptions(), jobs: int = 1) -> tuple[list[SweepPoint], list[FockRun]]:
    """Cartesian product over (G, kappa, Delta, n), in that nesting order.

    ``delta_list=None`` keeps the base detunings; otherwise Delta_p = Delta_c = Delta.
    """
    grid = list(itertools.product(g_list, kappa_list, [None] if delta_list is None else delta_list, n_list))
    tasks = []
    for g, k, d, n in grid:
        p = base.replace(g_disp=g, kappa=k)
        tasks.append((p if d is None else p.with_detuning(d), n, solver))
    runs = run_many(tasks, jobs)
    points = []
    for (g, k, d, n), (p, _, _), run in zip(grid, tasks, runs):
        t_peak, v_peak = run.peak()
        points.append(SweepPoint(g, k, p.delta_p, n, run.area(solver.t_end), t_peak, v_peak))
    return points, runs


def fig2(base: SystemParams = SystemParams(), g_list=FIG2_G, n_list=FOCK_N,
         solver: SolverOptions = SolverOptions(), jobs: int = 1) -> dict:
    """{G: {n: FockRun}} for the G panels."""
    _, runs = sweep(base, g_list, [base.kappa], None, n_list, solver, jobs)
    it = iter(runs)
    return {g: {n: next(it) for n in n_list} for g in g_list}


def fig3(base: SystemParams = SystemParams(), g_list=FIG2_G, n_list=FOCK_N,
         solver: SolverOptions = SolverOptions(), jobs: int = 1) -> dict:
    """{G: {n: S}}."""
    points, _ = sweep(base, g_list, [base.kappa], None, n_list, solver, jobs)
    it = iter(points)
    return {g: {n: next(it).area for n in n_list} for g in g_list}


def fig4(base: SystemParams = SystemParams(), kappa_list=FIG4_KAPPA, n_list=(0, 1),
         solver: SolverOptions = SolverOptions(), jobs: int = 1) -> dict:
    """{kappa: {n: FockRun}} at the base G (0.03 by default)."""
    _, runs = sweep(base, [base.g_disp], kappa_list, None, n_list, solver, jobs)
    it = iter(runs)
    return {k: {n: next(it) for n in n_list} for k in kappa_list}


def fig5(base: SystemParams = SystemParams(), delta_list=FIG5_DELTA, n_list=(0, 1),
         solver: SolverOptions = SolverOptions(), jobs: int = 1) -> dict:
    """{Delta: {n: FockRun}} with Delta_p = Delta_c = Delta."""
    _, runs = sweep(base, [base.g_disp], [base.kappa], delta_list, n_list, solver, jobs)
    it = iter(runs)
    return {d: {n: next(it) for n in n_list} for d in delta_list}


def strictly_increasing(values) -> bool:
    v = np.asarray(list(values), dtype=float)
    return bool(np.all(np.diff(v) > 0))
