"""Heralded Fock-state source: calibrate S(n), inject coherent fields, classify shots."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, poisson

from .errors import CalibrationError, InvalidParameterError
from .evolve import PropagationConfig, distance_probe, propagate
from .experiments import RELAXATION_TIME, SolverOptions, simulate_fock
from .hilbert import SpaceSpec
from .model import SystemParams, build_hamiltonian, collapse_ops
from .steadystate import initial_state, steady_state_atom
from .trajectories import trajectory_rng


@dataclass(frozen=True)
class ClassifierModel:
    """Midpoint thresholds between calibrated S_n values plus a Gaussian readout noise."""

    n_list: tuple
    calibration: dict
    thresholds: tuple
    noise_sigma: float = 0.0
    params: SystemParams = SystemParams()
    solver: SolverOptions = SolverOptions()

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise InvalidParameterError("noise_sigma must be >= 0")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise CalibrationError("thresholds must be strictly increasing")

    def classify(self, s_measured: float) -> int:
        return self.n_list[int(np.searchsorted(self.thresholds, s_measured, side="right"))]

    def with_noise(self, sigma: float) -> ClassifierModel:
        return ClassifierModel(self.n_list, self.calibration, self.thresholds, sigma, self.params, self.solver)


def calibrate(params: SystemParams, n_list=(0, 1, 2, 3, 4), t_window: float | None = None,
              solver: SolverOptions = SolverOptions(), noise_sigma: float = 0.0) -> ClassifierModel:
    if t_window is not None:
        solver = SolverOptions(**{**solver.__dict__, "t_end": t_window})
    n_list = tuple(sorted(int(n) for n in n_list))
    table = {n: simulate_fock(params, n, solver).area(solver.t_end) for n in n_list}
    values = [table[n] for n in n_list]
    if any(b <= a for a, b in zip(values, values[1:])):
        raise CalibrationError(f"S(n) is not strictly increasing over n={list(n_list)}: {values}")
    thresholds = tuple(0.5 * (a + b) for a, b in zip(values, values[1:]))
    return ClassifierModel(n_list, table, thresholds, noise_sigma, params, solver)


@dataclass(frozen=True)
class HeraldRecord:
    shot: int
    alpha: complex
    true_n: int
    measured_s: float
    verdict_n: int
    accept: bool


@dataclass(frozen=True)
class HeraldSummary:
    shots: int
    target: int
    heralding_rate: float
    fidelity: float
    multiphoton: float
    verdict_counts: dict = field(default_factory=dict)


class _AreaLookup:
    def __init__(self, model: ClassifierModel, mode: str):
        self.model = model
        self.cache = dict(model.calibration) if mode == "table" else {}

    def __call__(self, n: int) -> float:
        if n not in self.cache:
            self.cache[n] = simulate_fock(self.model.params, n, self.model.solver).area(self.model.solver.t_end)
        return self.cache[n]


def run_protocol(alpha: complex, model: ClassifierModel, shots: int, seed: int,
                 mode: str = "table", target: int = 1) -> tuple[list[HeraldRecord], HeraldSummary]:
    """Repeat inject-measure-classify ``shots`` times.

    ``mode="table"`` reads S_n from the calibration; ``mode="exact"`` re-runs
    the master equation for each sampled photon number.
    """
    if mode not in ("table", "exact"):
        raise InvalidParameterError(f"mode must be 'table' or 'exact', got {mode!r}")
    mean = abs(alpha) ** 2
    lookup = _AreaLookup(model, mode)
    records = []
    for shot in range(shots):
        rng = trajectory_rng(seed, shot)
        n = int(rng.poisson(mean))
        s = lookup(n)
        if model.noise_sigma > 0:
            s += model.noise_sigma * rng.standard_normal()
        verdict = model.classify(s)
        records.append(HeraldRecord(shot, complex(alpha), n, float(s), verdict, verdict == target))
    return records, summarize(records, target)


def summarize(records, target: int = 1) -> HeraldSummary:
    true_n = np.array([r.true_n for r in records])
    verdict = np.array([r.verdict_n for r in records])
    heralded = verdict == target
    k = int(heralded.sum())
    counts = {int(v): int(c) for v, c in zip(*np.unique(verdict, return_counts=True))}
    return HeraldSummary(
        shots=len(records),
        target=target,
        heralding_rate=k / len(records) if records else math.nan,
        fidelity=float(np.mean(true_n[heralded] == target)) if k else math.nan,
        multiphoton=float(np.mean(true_n[heralded] > target)) if k else math.nan,
        verdict_counts=counts,
    )


def verdict_probability(alpha: complex, model: ClassifierModel, verdict: int,
                        areas=None, tail: float = 1e-12) -> float:
    """Sum over n of Poisson(n; |alpha|^2) P(verdict | n) under the Gaussian noise model."""
    mean = abs(alpha) ** 2
    n_top = int(poisson.isf(tail, mean)) + 1 if mean > 0 else 0
    lookup = areas if areas is not None else _AreaLookup(model, "table")
    k = model.n_list.index(verdict)
    lo = -np.inf if k == 0 else model.thresholds[k - 1]
    hi = np.inf if k == len(model.thresholds) else model.thresholds[k]
    total = 0.0
    for n in range(n_top + 1):
        s = lookup(n)
        if model.noise_sigma > 0:
            p_bin = norm.cdf(hi, s, model.noise_sigma) - norm.cdf(lo, s, model.noise_sigma)
        else:
            p_bin = float(lo <= s < hi)
        total += poisson.pmf(n, mean) * p_bin
    return float(total)


@dataclass(frozen=True)
class DriveParams:
    beta: complex
    duration: float


@dataclass(frozen=True)
class InjectedField:
    alpha: complex
    short_time_valid: bool
    strong_drive: bool


def injected_field(drive: DriveParams, kappa: float) -> InjectedField:
    """Coherent amplitude sqrt(2 kappa) beta t loaded by a short, strong drive."""
    if drive.duration < 0:
        raise InvalidParameterError("drive duration must be >= 0")
    alpha = math.sqrt(2 * kappa) * complex(drive.beta) * drive.duration
    return InjectedField(
        alpha=alpha,
        short_time_valid=kappa * drive.duration <= 0.1,
        strong_drive=abs(drive.beta) >= 10 * math.sqrt(kappa),
    )


def reset_distance(params: SystemParams, n: int = 1, t_wait: float = RELAXATION_TIME,
                   solver: SolverOptions = SolverOptions()):
    """Max-norm distance of rho(t) from rho_ss (x) |0><0| after injecting ``|n>``, as a series to ``t_wait``."""
    space = SpaceSpec(solver.cutoff(n))
    rho_atom = steady_state_atom(params)
    target = initial_state(rho_atom, 0, space)
    res = propagate(
        initial_state(rho_atom, n, space),
        build_hamiltonian(params, space),
        collapse_ops(params, space),
        PropagationConfig(t_wait, sample_dt=solver.sample_dt * 10, method=solver.method,
                          rtol=solver.rtol, atol=solver.atol, step_dt=solver.step_dt),
        [distance_probe(target.matrix)],
    )
    return res["dist_max"].map(np.real)
