"""Composite Hilbert space of a three-level atom and a truncated cavity mode.

Atom levels are ordered (a, b, e) and the atom is the outer tensor factor, so
``|x> (x) |n>`` sits at index ``ATOM_INDEX[x] * (n_max + 1) + n``, the layout
produced by ``np.kron(atom, fock)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.stats import poisson

from .errors import CutoffError, DimensionError, InvalidLabelError

ATOM_LEVELS = ("a", "b", "e")
ATOM_INDEX = {label: i for i, label in enumerate(ATOM_LEVELS)}

COHERENT_TAIL_TOL = 1e-6


def _frozen(array, dtype=complex):
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SpaceSpec:
    fock_cutoff: int
    atom_levels: int = 3

    def __post_init__(self):
        if self.atom_levels != 3:
            raise DimensionError("only the three-level (a, b, e) atom is supported")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 0:
            raise DimensionError(f"fock_cutoff must be a non-negative integer, got {self.fock_cutoff!r}")

    @property
    def n_fock(self) -> int:
        return self.fock_cutoff + 1

    @property
    def dim(self) -> int:
        return self.atom_levels * self.n_fock

    def index(self, level: str, n: int) -> int:
        return _atom_index(level) * self.n_fock + n


def default_cutoff(n_injected: int = 0, alpha: complex = 0.0) -> int:
    """Fock cutoff large enough for ``|n_injected>`` and a coherent state ``|alpha>``."""
    amp = abs(alpha)
    return max(int(n_injected), math.ceil(amp**2 + 5 * amp + 4))


def _atom_index(label: str) -> int:
    try:
        return ATOM_INDEX[label]
    except (KeyError, TypeError):
        raise InvalidLabelError(f"unknown atomic level {label!r}; expected one of {ATOM_LEVELS}") from None


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense operator on a composite space. The matrix is read-only."""

    space: SpaceSpec
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionError(f"matrix shape {m.shape} does not match space dimension {self.space.dim}")
        object.__setattr__(self, "matrix", m)

    def dag(self) -> Operator:
        return Operator(self.space, self.matrix.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, rtol=0, atol=atol))

    def _check(self, other: Operator):
        if other.space != self.space:
            raise DimensionError(f"space mismatch: {self.space} vs {other.space}")

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix @ other.matrix)
        if isinstance(other, StateVector):
            if other.space != self.space:
                raise DimensionError(f"space mismatch: {self.space} vs {other.space}")
            return StateVector(self.space, self.matrix @ other.amplitudes, normalize=False)
        return NotImplemented

    def __add__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        self._check(other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        self._check(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar):
        if isinstance(scalar, (Operator, StateVector)):
            return NotImplemented
        return Operator(self.space, complex(scalar) * self.matrix)

    __rmul__ = __mul__

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __repr__(self):
        return f"Operator(dim={self.space.dim}, n_max={self.space.fock_cutoff})"


@dataclass(frozen=True, eq=False)
class StateVector:
    space: SpaceSpec
    amplitudes: np.ndarray
    normalize: bool = True

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if v.size != self.space.dim:
            raise DimensionError(f"state has {v.size} amplitudes, space dimension is {self.space.dim}")
        if self.normalize:
            norm = np.linalg.norm(v)
            if norm == 0:
                raise DimensionError("cannot normalize the zero vector")
            v = v / norm
        object.__setattr__(self, "amplitudes", _frozen(v))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def expect(self, op: Operator) -> complex:
        v = self.amplitudes
        return complex(np.vdot(v, op.matrix @ v) / np.vdot(v, v))

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def identity(space: SpaceSpec) -> Operator:
    return Operator(space, np.eye(space.dim))


def kron(*factors, space: SpaceSpec | None = None):
    """Tensor product, leftmost factor outermost (atom first).

    Returns a plain array, or an :class:`Operator` when ``space`` is given.
    """
    if not factors:
        raise DimensionError("kron needs at least one factor")
    mats = [np.asarray(f.matrix if isinstance(f, Operator) else f, dtype=complex) for f in factors]
    for m in mats:
        if m.ndim != 2:
            raise DimensionError(f"factor must be a matrix, got ndim={m.ndim}")
    out = reduce(np.kron, mats)
    if space is None:
        return out
    if out.shape != (space.dim, space.dim):
        raise DimensionError(
            f"factor dimensions {[m.shape for m in mats]} give {out.shape}, space needs {space.dim}"
        )
    return Operator(space, out)


def atom_projector(xi: str, eta: str) -> np.ndarray:
    """|xi><eta| on the bare 3-level atom."""
    m = np.zeros((3, 3), dtype=complex)
    m[_atom_index(xi), _atom_index(eta)] = 1.0
    return m


def fock_annihilator(n_fock: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), k=1).astype(complex)


def sigma(xi: str, eta: str, space: SpaceSpec) -> Operator:
    """Atomic projection operator |xi><eta| (x) 1_Fock."""
    return kron(atom_projector(xi, eta), np.eye(space.n_fock), space=space)


def annihilator(space: SpaceSpec) -> Operator:
    """1_atom (x) a, truncated at the cutoff."""
    return kron(np.eye(3), fock_annihilator(space.n_fock), space=space)


def number_op(space: SpaceSpec) -> Operator:
    return kron(np.eye(3), np.diag(np.arange(space.n_fock, dtype=float)), space=space)


def fock_amplitudes(n: int, space: SpaceSpec) -> np.ndarray:
    if n < 0 or n > space.fock_cutoff:
        raise CutoffError(f"Fock state |{n}> does not fit under cutoff n_max={space.fock_cutoff}")
    v = np.zeros(space.n_fock, dtype=complex)
    v[n] = 1.0
    return v


def coherent_amplitudes(alpha: complex, space: SpaceSpec, tol: float = COHERENT_TAIL_TOL) -> np.ndarray:
    mean = abs(alpha) ** 2
    tail = float(poisson.sf(space.fock_cutoff, mean)) if mean > 0 else 0.0
    if tail > tol:
        raise CutoffError(
            f"coherent state |alpha|^2={mean:.4g} leaves tail {tail:.3g} above n_max={space.fock_cutoff}"
            f" (tolerance {tol:g}); use n_max >= {default_cutoff(alpha=alpha)}"
        )
    n = np.arange(space.n_fock)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    if alpha == 0:
        v = (n == 0).astype(complex)
    else:
        v = np.exp(-mean / 2 + n * np.log(complex(alpha)) - 0.5 * log_fact)
    return v / np.linalg.norm(v)


def fock_ket(n: int, space: SpaceSpec, atom: str | np.ndarray = "a") -> StateVector:
    """Composite ket ``|atom> (x) |n>``; ``atom`` is a level label or a 3-vector."""
    return StateVector(space, np.kron(_atom_vector(atom), fock_amplitudes(n, space)))


def coherent_ket(alpha: complex, space: SpaceSpec, atom: str | np.ndarray = "a",
                 tol: float = COHERENT_TAIL_TOL) -> StateVector:
    return StateVector(space, np.kron(_atom_vector(atom), coherent_amplitudes(alpha, space, tol)))


def _atom_vector(atom) -> np.ndarray:
    if isinstance(atom, str):
        v = np.zeros(3, dtype=complex)
        v[_atom_index(atom)] = 1.0
        return v
    v = np.asarray(atom, dtype=complex).reshape(-1)
    if v.size != 3:
        raise DimensionError("atomic state vector must have 3 components")
    return v
