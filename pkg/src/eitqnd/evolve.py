"""Time propagation of the Lindblad master equation.

Three routes share one vectorized Liouvillian:

* ``rk45``  adaptive Dormand-Prince 5(4), the default;
* ``rk4``   classic fixed-step Runge-Kutta, for bit-reproducible fixtures;
* ``expm``  exact one-sample propagator ``expm(L dt)``, the oracle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError, InvalidParameterError, NumericalFailure, StiffnessError
from .hilbert import Operator, SpaceSpec
from .steadystate import (
    DensityMatrix,
    fock_block_liouvillian,
    fock_blocks_to_matrix,
    liouvillian_matrix,
    unvec,
    vec,
)

METHODS = ("rk45", "rk4", "expm")
EXPM_MAX_DIM2 = 4096

TRACE_DRIFT_TOL = 1e-8
HERMITIAN_DRIFT_TOL = 1e-8
POSITIVITY_SLACK = 1e-6


@dataclass(frozen=True)
class PropagationConfig:
    t_end: float
    sample_dt: float = 0.05
    method: str = "rk45"
    step_dt: float = 0.01
    rtol: float = 1e-8
    atol: float = 1e-10
    check_invariants: bool = True
    positivity_stride: int = 10

    def __post_init__(self):
        if not self.t_end > 0:
            raise InvalidParameterError(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.sample_dt <= self.t_end:
            raise InvalidParameterError(f"sample_dt must lie in (0, t_end], got {self.sample_dt}")
        if self.method not in METHODS:
            raise InvalidParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.method == "rk4":
            ratio = self.sample_dt / self.step_dt
            if self.step_dt <= 0 or abs(ratio - round(ratio)) > 1e-9:
                raise InvalidParameterError("rk4 step_dt must divide sample_dt")

    @property
    def times(self) -> np.ndarray:
        n = int(round(self.t_end / self.sample_dt))
        return np.linspace(0.0, n * self.sample_dt, n + 1)


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values)
        if t.shape != v.shape:
            raise DimensionError(f"times {t.shape} and values {v.shape} differ in length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise DimensionError("times must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size

    def map(self, fn, label=None) -> TimeSeries:
        return TimeSeries(self.times, fn(self.values), label if label is not None else self.label)


@dataclass(frozen=True)
class Probe:
    """Named observable extracted from the composite density matrix at each sample."""

    label: str
    fn: Callable[[np.ndarray], complex]

    def __call__(self, rho):
        return self.fn(rho)


def coherence_probe(xi: str = "e", eta: str = "a", n_fock: int | None = None) -> Probe:
    """<xi| Tr_Fock(rho) |eta>."""
    from .hilbert import ATOM_INDEX

    i, j = ATOM_INDEX[xi], ATOM_INDEX[eta]

    def fn(rho):
        nf = rho.shape[0] // 3
        return np.trace(rho[i * nf:(i + 1) * nf, j * nf:(j + 1) * nf])

    return Probe(f"rho_{xi}{eta}", fn)


def expect_probe(op: Operator, label: str) -> Probe:
    m = op.matrix
    return Probe(label, lambda rho: np.trace(m @ rho))


def distance_probe(reference: np.ndarray, label: str = "dist_max") -> Probe:
    """Max-norm distance to a fixed reference state."""
    ref = np.asarray(reference)
    return Probe(label, lambda rho: np.max(np.abs(rho - ref)))


@dataclass(frozen=True)
class PropagationResult:
    series: list
    final: DensityMatrix
    times: np.ndarray
    checks: dict = field(default_factory=dict)

    def __getitem__(self, label) -> TimeSeries:
        for s in self.series:
            if s.label == label:
                return s
        raise KeyError(label)


# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [np.array(row) for row in [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class _DormandPrince:
    """Adaptive integrator for the linear system y' = L y, stepping onto requested times."""

    def __init__(self, L, rtol, atol):
        self.L = L
        self.rtol = rtol
        self.atol = atol
        self.h = None
        self.n_steps = 0
        self.n_rejected = 0

    def _initial_step(self, y, span):
        scale = self.atol + self.rtol * np.abs(y)
        f0 = self.L @ y
        d0 = np.sqrt(np.mean(np.abs(y / scale) ** 2))
        d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        return min(h, span)

    def advance(self, y, t0, t1):
        t = t0
        if self.h is None:
            self.h = self._initial_step(y, t1 - t0)
        k = np.empty((7, y.size), dtype=complex)
        k[0] = self.L @ y
        while t < t1:
            clipped = self.h >= t1 - t
            h = t1 - t if clipped else self.h
            while True:
                if h < 1e-12 * max(1.0, abs(t)):
                    raise StiffnessError(f"step size underflow at t={t:.6g}")
                for s in range(1, 7):
                    k[s] = self.L @ (y + h * (_A[s] @ k[:s]))
                y_new = y + h * (_B5 @ k)
                err_vec = h * (_E @ k)
                scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
                err = np.sqrt(np.mean(np.abs(err_vec / scale) ** 2))
                if err <= 1.0:
                    break
                self.n_rejected += 1
                h *= max(0.2, 0.9 * err ** -0.2)
                clipped = False
            self.n_steps += 1
            t = t1 if clipped else t + h
            y = y_new
            k[0] = k[6]  # first-same-as-last
            grown = h * (10.0 if err == 0 else min(10.0, 0.9 * err ** -0.2))
            # a step shortened only to land on t1 says nothing against the current size
            self.h = max(self.h, grown) if clipped else grown
        return y


def _rk4_advance(L, y, h, n):
    for _ in range(n):
        k1 = L @ y
        k2 = L @ (y + 0.5 * h * k1)
        k3 = L @ (y + 0.5 * h * k2)
        k4 = L @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def _check_sample(rho, t, check_positivity):
    tr = np.trace(rho).real
    if abs(tr - 1) > TRACE_DRIFT_TOL:
        raise NumericalFailure(f"trace drift {tr - 1:.3g} at t={t:.6g}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_DRIFT_TOL:
        raise NumericalFailure(f"hermiticity violation {herm:.3g} at t={t:.6g}")
    lam = None
    if check_positivity:
        lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
        if lam < -POSITIVITY_SLACK:
            raise NumericalFailure(f"negative eigenvalue {lam:.3g} at t={t:.6g}")
    return abs(tr - 1), herm, lam


def _integrate(L, y0, cfg: PropagationConfig, to_matrix, probes):
    times = cfg.times
    y = np.asarray(y0, dtype=complex)
    values = np.empty((len(probes), times.size), dtype=complex)
    worst = {"trace_drift": 0.0, "hermiticity": 0.0, "min_eigenvalue": np.inf}

    if cfg.method == "rk45":
        stepper = _DormandPrince(L, cfg.rtol, cfg.atol)
    elif cfg.method == "rk4":
        n_sub = int(round(cfg.sample_dt / cfg.step_dt))
    else:
        if L.shape[0] > EXPM_MAX_DIM2:
            raise DimensionError(f"expm route limited to generator size <= {EXPM_MAX_DIM2}")
        step_prop = expm(L * cfg.sample_dt)

    for idx, t in enumerate(times):
        if idx > 0:
            if cfg.method == "rk45":
                y = stepper.advance(y, times[idx - 1], t)
            elif cfg.method == "rk4":
                y = _rk4_advance(L, y, cfg.step_dt, n_sub)
            else:
                y = step_prop @ y
        rho = to_matrix(y)
        if cfg.check_invariants:
            pos = idx % cfg.positivity_stride == 0 or idx == times.size - 1
            tr, herm, lam = _check_sample(rho, t, pos)
            worst["trace_drift"] = max(worst["trace_drift"], tr)
            worst["hermiticity"] = max(worst["hermiticity"], herm)
            if lam is not None:
                worst["min_eigenvalue"] = min(worst["min_eigenvalue"], lam)
        for j, probe in enumerate(probes):
            values[j, idx] = probe(rho)

    series = [TimeSeries(times, values[j], probe.label) for j, probe in enumerate(probes)]
    if cfg.method == "rk45":
        worst["steps"] = stepper.n_steps
        worst["rejected"] = stepper.n_rejected
    return series, y, worst if cfg.check_invariants else {}


def propagate(rho0: DensityMatrix, h: Operator, collapses, cfg: PropagationConfig,
              probes=(), L: np.ndarray | None = None) -> PropagationResult:
    """Integrate the master equation and sample ``probes`` on ``cfg.times``.

    A precomputed Liouvillian may be passed as ``L`` to skip rebuilding it.
    """
    space = rho0.space
    if L is None:
        L = liouvillian_matrix(h, collapses)
    d = space.dim
    if L.shape != (d * d, d * d):
        raise DimensionError(f"Liouvillian shape {L.shape} does not match state dimension {d}")
    series, y, checks = _integrate(L, vec(rho0.matrix), cfg, lambda v: unvec(v, d), list(probes))
    return PropagationResult(series, DensityMatrix(space, unvec(y, d), check=False), cfg.times, checks)


def propagate_fock_diagonal(rho_atom: DensityMatrix, n: int, params, cfg: PropagationConfig,
                            probes=(), n_max: int | None = None) -> PropagationResult:
    """Same dynamics as :func:`propagate` from ``rho_atom (x) |n><n|``, on photon-number blocks only.

    Exact for Fock inputs; probes and invariant checks still see the full
    composite density matrix on a cutoff of ``n_max`` (default ``n``).
    """
    n_max = n if n_max is None else n_max
    if n > n_max:
        raise DimensionError(f"Fock state |{n}> exceeds cutoff {n_max}")
    space = SpaceSpec(n_max)
    G = fock_block_liouvillian(params, n)
    y0 = np.zeros(9 * (n + 1), dtype=complex)
    atom = rho_atom.matrix if isinstance(rho_atom, DensityMatrix) else np.asarray(rho_atom)
    y0[9 * n:] = vec(atom)
    series, y, checks = _integrate(G, y0, cfg, lambda v: fock_blocks_to_matrix(v, space.n_fock), list(probes))
    final = DensityMatrix(space, fock_blocks_to_matrix(y, space.n_fock), check=False)
    return PropagationResult(series, final, cfg.times, checks)


def propagate_expm(rho0: DensityMatrix, h: Operator, collapses, t: float,
                   L: np.ndarray | None = None) -> DensityMatrix:
    """rho(t) = expm(L t) rho0, with no time-stepping error."""
    d = rho0.space.dim
    if d * d > EXPM_MAX_DIM2:
        raise DimensionError(f"expm oracle limited to dim^2 <= {EXPM_MAX_DIM2}, got {d * d}")
    if L is None:
        L = liouvillian_matrix(h, collapses)
    if t == 0:
        return DensityMatrix(rho0.space, rho0.matrix, check=False)
    y = expm(L * t) @ vec(rho0.matrix)
    return DensityMatrix(rho0.space, unvec(y, d), check=False)
