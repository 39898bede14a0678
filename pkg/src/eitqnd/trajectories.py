"""Quantum-jump unraveling of the master equation.

Each trajectory evolves under ``H_eff = H - (i/2) sum_k rate_k C_k^dag C_k``
while its squared norm stays above a uniform threshold ``r``.  The crossing
time is located by bisection on the exact no-jump propagator, a channel is
chosen with weight ``rate_k ||C_k psi||^2``, and the state is renormalized.

Random streams: trajectory ``i`` uses ``PCG64(SeedSequence(seed, spawn_key=(i,)))``,
so results do not depend on chunking or on the number of workers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError, DtTooLargeError, InvalidParameterError
from .evolve import TimeSeries
from .hilbert import Operator, SpaceSpec, StateVector, fock_amplitudes
from .steadystate import DensityMatrix

RNG_ALGORITHM = "numpy PCG64, SeedSequence(seed, spawn_key=(trajectory_index,))"
MAX_STEP_JUMP_PROBABILITY = 0.1
CHUNK = 500
_BISECTION_ITERS = 48


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass(frozen=True)
class TrajectoryConfig:
    hamiltonian: Operator
    channels: tuple
    n_traj: int = 1000
    seed: int = 0
    dt: float = 0.01
    t_end: float = 50.0
    sample_dt: float = 0.05

    def __post_init__(self):
        if self.n_traj < 1:
            raise InvalidParameterError("n_traj must be >= 1")
        if not (self.dt > 0 and self.t_end > 0 and self.sample_dt > 0):
            raise InvalidParameterError("dt, sample_dt and t_end must be positive")
        ratio = self.sample_dt / self.dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise InvalidParameterError("sample_dt must be an integer multiple of dt")
        object.__setattr__(self, "channels", tuple((float(r), c) for r, c in self.channels))
        for rate, c in self.channels:
            if rate < 0:
                raise InvalidParameterError("jump rates must be >= 0")
            if c.space != self.hamiltonian.space:
                raise DimensionError("jump operator space differs from the Hamiltonian space")

    @property
    def space(self) -> SpaceSpec:
        return self.hamiltonian.space

    @property
    def times(self) -> np.ndarray:
        n = int(round(self.t_end / self.sample_dt))
        return np.linspace(0.0, n * self.sample_dt, n + 1)

    def h_eff(self) -> np.ndarray:
        h = np.array(self.hamiltonian.matrix)
        for rate, c in self.channels:
            h = h - 0.5j * rate * (c.matrix.conj().T @ c.matrix)
        return h


@dataclass(frozen=True)
class TrajectoryResult:
    times: np.ndarray
    mean: dict
    stderr: dict
    jump_times: list
    jump_channels: list
    n_traj: int
    rng_algorithm: str = RNG_ALGORITHM

    def jump_counts(self) -> np.ndarray:
        return np.array([len(j) for j in self.jump_times])


class _NoJumpPropagator:
    """psi(t) = exp(-i H_eff t) psi for a per-row vector of times."""

    def __init__(self, h_eff, cond_limit=1e8):
        self.h = h_eff
        lam, V = np.linalg.eig(h_eff)
        self.use_eig = np.linalg.cond(V) < cond_limit
        if self.use_eig:
            self.lam, self.V, self.Vinv = lam, V, np.linalg.inv(V)
        self._cache = {}

    def __call__(self, psi, tau):
        """``psi`` has shape (m, d); ``tau`` scalar or shape (m,)."""
        if self.use_eig:
            coeff = psi @ self.Vinv.T
            phase = np.exp(-1j * np.multiply.outer(np.atleast_1d(tau), self.lam))
            return (coeff * phase) @ self.V.T
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (psi.shape[0],))
        out = np.empty_like(psi)
        for i, t in enumerate(tau):
            U = self._cache.get(t)
            if U is None:
                U = expm(-1j * self.h * t)
                if len(self._cache) < 8:
                    self._cache[t] = U
            out[i] = U @ psi[i]
        return out


def _norm2(psi):
    return np.einsum("ij,ij->i", psi.conj(), psi).real


def _run_chunk(cfg: TrajectoryConfig, initial, probes, start, stop):
    d = cfg.space.dim
    m = stop - start
    rngs = [trajectory_rng(cfg.seed, i) for i in range(start, stop)]
    psi = np.empty((m, d), dtype=complex)
    for k, rng in enumerate(rngs):
        v = initial(rng) if callable(initial) else initial
        psi[k] = v.amplitudes if isinstance(v, StateVector) else np.asarray(v, dtype=complex)
    psi /= np.sqrt(_norm2(psi))[:, None]
    thresholds = np.array([rng.random() for rng in rngs])
    prop = _NoJumpPropagator(cfg.h_eff())
    ops = [(rate, c.matrix) for rate, c in cfg.channels if rate > 0]
    probe_ops = [op.matrix for _, op in probes]
    times = cfg.times
    n_sub = int(round(cfg.sample_dt / cfg.dt))
    sums = np.zeros((len(probes), times.size), dtype=complex)
    sq_re = np.zeros((len(probes), times.size))
    sq_im = np.zeros((len(probes), times.size))
    jump_times = [[] for _ in range(m)]
    jump_channels = [[] for _ in range(m)]

    def record(idx):
        nrm = _norm2(psi)
        for j, op in enumerate(probe_ops):
            vals = np.einsum("ij,ij->i", psi.conj(), psi @ op.T) / nrm
            sums[j, idx] += vals.sum()
            sq_re[j, idx] += np.sum(vals.real**2)
            sq_im[j, idx] += np.sum(vals.imag**2)

    def jump(rows, t_rows):
        for k, t_jump in zip(rows, t_rows):
            rng = rngs[k]
            weights = np.array([rate * np.vdot(c @ psi[k], c @ psi[k]).real for rate, c in ops])
            ch = int(np.searchsorted(np.cumsum(weights), rng.random() * weights.sum(), side="right"))
            ch = min(ch, len(ops) - 1)
            new = ops[ch][1] @ psi[k]
            psi[k] = new / np.linalg.norm(new)
            thresholds[k] = rng.random()
            jump_times[k].append(float(t_jump))
            jump_channels[k].append(ch)

    record(0)
    t = 0.0
    for idx in range(1, times.size):
        for _ in range(n_sub):
            remaining = np.full(m, cfg.dt)
            active = np.arange(m)
            while active.size:
                trial = prop(psi[active], remaining[active])
                crossed = _norm2(trial) < thresholds[active]
                if not ops:
                    crossed[:] = False
                done = active[~crossed]
                psi[done] = trial[~crossed]
                active = active[crossed]
                if not active.size:
                    break
                lo = np.zeros(active.size)
                hi = remaining[active].copy()
                base = psi[active]
                r = thresholds[active]
                for _ in range(_BISECTION_ITERS):
                    mid = 0.5 * (lo + hi)
                    above = _norm2(prop(base, mid)) >= r
                    lo = np.where(above, mid, lo)
                    hi = np.where(above, hi, mid)
                psi[active] = prop(base, hi)
                jump(active, t + cfg.dt - remaining[active] + hi)
                remaining[active] -= hi
                keep = remaining[active] > 1e-15
                active = active[keep]
            t += cfg.dt
        t = times[idx]
        record(idx)
    return sums, sq_re, sq_im, jump_times, jump_channels


def run_trajectories(psi0, cfg: TrajectoryConfig, probes) -> TrajectoryResult:
    """Ensemble means and standard errors of ``probes`` over ``cfg.n_traj`` trajectories.

    ``psi0`` is a :class:`StateVector` shared by every trajectory, or a callable
    ``psi0(rng) -> StateVector`` drawing each trajectory's initial state from
    that trajectory's own generator.  ``probes`` is a sequence of
    ``(label, Operator)``.
    """
    probes = list(probes)
    gamma_total = sum(rate * (c.matrix.conj().T @ c.matrix) for rate, c in cfg.channels) \
        if cfg.channels else np.zeros((cfg.space.dim,) * 2)
    max_rate = float(np.max(np.linalg.eigvalsh(gamma_total))) if cfg.channels else 0.0
    p_step = -np.expm1(-max_rate * cfg.dt)
    if p_step >= MAX_STEP_JUMP_PROBABILITY:
        raise DtTooLargeError(f"single-step jump probability {p_step:.3g} >= {MAX_STEP_JUMP_PROBABILITY}")

    times = cfg.times
    sums = np.zeros((len(probes), times.size), dtype=complex)
    sq_re = np.zeros((len(probes), times.size))
    sq_im = np.zeros((len(probes), times.size))
    jump_times, jump_channels = [], []
    for start in range(0, cfg.n_traj, CHUNK):
        stop = min(start + CHUNK, cfg.n_traj)
        s, r2, i2, jt, jc = _run_chunk(cfg, psi0, probes, start, stop)
        sums += s
        sq_re += r2
        sq_im += i2
        jump_times.extend(jt)
        jump_channels.extend(jc)

    n = cfg.n_traj
    mean = sums / n
    if n > 1:
        var_re = np.maximum(sq_re - n * mean.real**2, 0) / (n - 1)
        var_im = np.maximum(sq_im - n * mean.imag**2, 0) / (n - 1)
        se = (np.sqrt(var_re) + 1j * np.sqrt(var_im)) / np.sqrt(n)
    else:
        se = np.zeros_like(mean)
    labels = [label for label, _ in probes]
    return TrajectoryResult(
        times,
        {lab: TimeSeries(times, mean[j], lab) for j, lab in enumerate(labels)},
        {lab: TimeSeries(times, se[j], lab) for j, lab in enumerate(labels)},
        [np.array(j) for j in jump_times],
        [np.array(c, dtype=int) for c in jump_channels],
        n,
    )


def mixed_initial_sampler(rho_atom: DensityMatrix, photon, space: SpaceSpec, rng: np.random.Generator) -> StateVector:
    """Draw an eigenvector of ``rho_atom`` with probability equal to its eigenvalue, tensored with the photon ket."""
    atom = rho_atom.matrix if isinstance(rho_atom, DensityMatrix) else np.asarray(rho_atom, dtype=complex)
    w, v = np.linalg.eigh(atom)
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    k = int(np.searchsorted(np.cumsum(w), rng.random(), side="right"))
    k = min(k, w.size - 1)
    if isinstance(photon, (int, np.integer)):
        photon = fock_amplitudes(int(photon), space)
    return StateVector(space, np.kron(v[:, k], np.asarray(photon, dtype=complex)))


def agreement_fraction(mean: TimeSeries, stderr: TimeSeries, reference, resolution: float,
                       n_traj: int, n_sigma: float = 3.0) -> float:
    """Fraction of samples where ``mean`` lies within ``n_sigma`` standard errors of ``reference``.

    Real and imaginary parts are tested separately.  Where the sample standard
    error is zero (all trajectories agree) the one-trajectory resolution
    ``resolution / n_traj`` stands in for it.
    """
    ref = np.asarray(reference)
    diff = np.asarray(mean.values) - ref
    se = np.asarray(stderr.values)
    floor = resolution / n_traj
    ok = np.ones(diff.shape, dtype=bool)
    for part in (np.real, np.imag):
        s = part(se)
        s = np.where(s > 0, s, floor)
        ok &= np.abs(part(diff)) <= n_sigma * s
    return float(ok.mean())
