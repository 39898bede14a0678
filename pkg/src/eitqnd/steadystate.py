"""Density matrices, the vectorized Liouvillian, and the EIT steady state.

Vectorization is column stacking: ``vec(rho) = rho.reshape(-1, order="F")``,
so ``vec(A X B) = (B^T (x) A) vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CutoffError,
    DegenerateSteadyStateError,
    DimensionError,
    InvalidParameterError,
    NumericalFailure,
)
from .hilbert import Operator, SpaceSpec, StateVector, fock_amplitudes, sigma
from .model import SystemParams, build_h1, build_hamiltonian, collapse_ops

ATOM_SPACE = SpaceSpec(0)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-8


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise DimensionError(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape(dim, dim, order="F")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive state on a composite space.

    The matrix is symmetrized on construction.  ``check=False`` skips the trace
    and positivity validation (used for intermediate propagation results, which
    are checked against their own looser bounds).
    """

    space: SpaceSpec
    matrix: np.ndarray
    check: bool = True

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionError(f"density matrix shape {m.shape} does not match space dimension {self.space.dim}")
        if self.check and np.max(np.abs(m - m.conj().T), initial=0.0) > 1e3 * HERMITIAN_TOL:
            raise NumericalFailure("density matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.check:
            self.validate()

    def validate(self, trace_tol=TRACE_TOL, positivity_tol=POSITIVITY_TOL):
        tr = np.trace(self.matrix).real
        if abs(tr - 1) > trace_tol:
            raise NumericalFailure(f"trace {tr!r} deviates from 1 by more than {trace_tol:g}")
        lam = np.linalg.eigvalsh(self.matrix)[0]
        if lam < -positivity_tol:
            raise NumericalFailure(f"minimum eigenvalue {lam:.3g} below -{positivity_tol:g}")
        return self

    @classmethod
    def from_ket(cls, psi: StateVector) -> DensityMatrix:
        return cls(psi.space, psi.projector())

    def atom_reduced(self) -> np.ndarray:
        """Partial trace over the Fock factor (3x3)."""
        m = self.matrix.reshape(3, self.space.n_fock, 3, self.space.n_fock)
        return np.einsum("injn->ij", m)

    def photon_distribution(self) -> np.ndarray:
        m = self.matrix.reshape(3, self.space.n_fock, 3, self.space.n_fock)
        return np.einsum("iuiu->u", m).real

    def expect(self, op: Operator) -> complex:
        return complex(np.trace(op.matrix @ self.matrix))


def liouvillian_matrix(h: Operator, collapses) -> np.ndarray:
    """Dense superoperator L with vec(d rho/dt) = L vec(rho).

    ``collapses`` is a sequence of ``(rate, C)``; each contributes
    rate/2 (2 C rho C^dag - C^dag C rho - rho C^dag C).
    """
    hm = h.matrix if isinstance(h, Operator) else np.asarray(h, dtype=complex)
    d = hm.shape[0]
    eye = np.eye(d)
    L = -1j * (np.kron(eye, hm) - np.kron(hm.T, eye))
    for rate, c in collapses:
        cm = c.matrix if isinstance(c, Operator) else np.asarray(c, dtype=complex)
        if cm.shape != (d, d):
            raise DimensionError(f"collapse operator shape {cm.shape} does not match Hamiltonian dimension {d}")
        if rate == 0:
            continue
        cdc = cm.conj().T @ cm
        L += 0.5 * rate * (2 * np.kron(cm.conj(), cm) - np.kron(eye, cdc) - np.kron(cdc.T, eye))
    return L


def model_liouvillian(p: SystemParams, s: SpaceSpec) -> np.ndarray:
    return liouvillian_matrix(build_hamiltonian(p, s), collapse_ops(p, s))


def steady_state_from_liouvillian(L: np.ndarray, cond_limit: float = 1e12) -> np.ndarray:
    """Unique null vector of ``L`` normalized to unit trace, as a matrix.

    The (0, 0) population row is replaced by the trace functional; that row is
    redundant for any trace-preserving generator.
    """
    d2 = L.shape[0]
    d = int(round(np.sqrt(d2)))
    M = np.array(L, dtype=complex)
    M[0, :] = vec(np.eye(d))
    if np.linalg.cond(M) > cond_limit:
        raise DegenerateSteadyStateError("Liouvillian null space is not one-dimensional")
    rhs = np.zeros(d2, dtype=complex)
    rhs[0] = 1.0
    return unvec(np.linalg.solve(M, rhs), d)


def steady_state_atom(p: SystemParams, residual_tol: float = 1e-10) -> DensityMatrix:
    """Steady-state EIT density matrix of the bare atom (cavity in vacuum)."""
    if p.omega_p == 0 and p.omega_c == 0:
        raise InvalidParameterError("omega_p = omega_c = 0: every ground-state mixture is stationary")
    L = model_liouvillian(p, ATOM_SPACE)
    rho = steady_state_from_liouvillian(L)
    residual = np.linalg.norm(L @ vec(rho))
    if residual > residual_tol:
        raise NumericalFailure(f"steady-state residual {residual:.3g} exceeds {residual_tol:g}")
    return DensityMatrix(ATOM_SPACE, rho)


def null_space_dim(L: np.ndarray, rtol: float = 1e-10) -> int:
    sv = np.linalg.svd(L, compute_uv=False)
    return int(np.sum(sv <= rtol * sv[0]))


def initial_state(rho_atom: DensityMatrix, photon, s: SpaceSpec) -> DensityMatrix:
    """rho_atom (x) photon state.

    ``photon`` is a Fock index, a vector of Fock amplitudes, or a Fock-space
    density matrix.
    """
    atom = rho_atom.matrix if isinstance(rho_atom, DensityMatrix) else np.asarray(rho_atom, dtype=complex)
    if atom.shape != (3, 3):
        raise DimensionError("atomic density matrix must be 3x3")
    if isinstance(photon, (int, np.integer)):
        v = fock_amplitudes(int(photon), s)
        photon_rho = np.outer(v, v.conj())
    else:
        arr = np.asarray(photon, dtype=complex)
        if arr.ndim == 1:
            if arr.size != s.n_fock:
                raise CutoffError(f"photon state has {arr.size} amplitudes, cutoff allows {s.n_fock}")
            arr = arr / np.linalg.norm(arr)
            photon_rho = np.outer(arr, arr.conj())
        elif arr.shape == (s.n_fock, s.n_fock):
            photon_rho = arr
        else:
            raise CutoffError(f"photon density matrix shape {arr.shape} does not fit cutoff n_max={s.fock_cutoff}")
    return DensityMatrix(s, np.kron(atom, photon_rho))


def fock_block_liouvillian(p: SystemParams, n_top: int) -> np.ndarray:
    """Generator restricted to photon-number-diagonal states.

    A state ``sum_m rho_m (x) |m><m|`` keeps this form under the model
    dynamics, because the Hamiltonian conserves photon number and cavity decay
    only moves population from block m+1 to block m.  The state vector is
    ``[vec(rho_0), ..., vec(rho_n_top)]``.
    """
    atom_channels = collapse_ops(p, ATOM_SPACE)[:3]
    h1 = build_h1(p, ATOM_SPACE).matrix
    sbb = sigma("b", "b", ATOM_SPACE).matrix
    nb = n_top + 1
    G = np.zeros((9 * nb, 9 * nb), dtype=complex)
    for m in range(nb):
        block = liouvillian_matrix(h1 + (p.dispersive_sign * p.g_disp * m) * sbb, atom_channels)
        G[9 * m:9 * (m + 1), 9 * m:9 * (m + 1)] = block - p.kappa * m * np.eye(9)
        if m + 1 < nb:
            G[9 * m:9 * (m + 1), 9 * (m + 1):9 * (m + 2)] = p.kappa * (m + 1) * np.eye(9)
    return G


def fock_blocks_to_matrix(y: np.ndarray, n_fock: int) -> np.ndarray:
    """Assemble ``sum_m rho_m (x) |m><m|`` on a space with ``n_fock`` Fock levels."""
    nb = y.size // 9
    out = np.zeros((3, n_fock, 3, n_fock), dtype=complex)
    for m in range(nb):
        out[:, m, :, m] = unvec(y[9 * m:9 * (m + 1)], 3)
    return out.reshape(3 * n_fock, 3 * n_fock)
