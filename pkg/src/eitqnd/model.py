"""Hamiltonians and collapse channels of the cavity-EIT model.

All frequencies and rates are in units of the |e> -> |a> spontaneous rate.
Only the effective three-level model is built: the far-detuned level |f> has
been eliminated, leaving the dispersive term ``+-G a^dag a sigma_bb``.  The full
coupling ``varsigma a^dag a + (g sigma_fb a + h.c.)`` enters only through
:func:`dispersive_g`.

Sign of the light shift: the Lambda-system detunings are measured as atomic
minus field frequency.  Measuring the cavity detuning the same way, eliminating
|f> lowers ``|b, n>`` by ``n G`` for ``G > 0``, hence the default
``dispersive_sign = -1``.  ``dispersive_sign = +1`` reproduces the literal
``+G a^dag a sigma_bb``, which corresponds to the opposite cavity convention.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import InvalidParameterError
from .hilbert import Operator, SpaceSpec, annihilator, identity, number_op, sigma


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters; defaults are the common values of the G-sweep figures."""

    omega_p: float = 0.02
    omega_c: float = 0.2
    delta_p: float = -1.0
    delta_c: float = -1.0
    gamma_ea: float = 1.0
    gamma_eb: float = 1.0
    gamma_deph: float = 0.1
    kappa: float = 0.3
    g_disp: float = 0.03
    suscept_prefactor: float = 1.0
    dispersive_sign: int = -1

    def __post_init__(self):
        if self.dispersive_sign not in (1, -1):
            raise InvalidParameterError(f"dispersive_sign must be +1 or -1, got {self.dispersive_sign!r}")
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value):
                raise InvalidParameterError(f"{f.name} must be finite, got {value!r}")
        for name in ("gamma_ea", "gamma_eb", "gamma_deph", "kappa"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def delta(self) -> float:
        """Two-photon detuning delta_p - delta_c."""
        return self.delta_p - self.delta_c

    def with_detuning(self, delta: float) -> SystemParams:
        """Set both single-photon detunings to ``delta`` (two-photon resonance)."""
        return replace(self, delta_p=delta, delta_c=delta)

    def replace(self, **changes) -> SystemParams:
        return replace(self, **changes)


@dataclass(frozen=True)
class CavityPhysical:
    g: float
    varsigma: float
    kappa: float
    gamma_e: float

    def __post_init__(self):
        if self.varsigma != 0 and abs(self.varsigma) < 10 * abs(self.g):
            warnings.warn(
                f"|varsigma|={abs(self.varsigma):g} < 10 g={10 * abs(self.g):g}: "
                "dispersive elimination of |f> is questionable",
                stacklevel=2,
            )


def dispersive_g(c: CavityPhysical) -> float:
    """G = g^2 / varsigma."""
    if c.varsigma == 0:
        raise InvalidParameterError("varsigma must be non-zero for a dispersive coupling")
    return c.g**2 / c.varsigma


def cooperativity(c: CavityPhysical) -> float:
    """eta = g^2 / (kappa gamma_e)."""
    if c.kappa <= 0 or c.gamma_e <= 0:
        raise InvalidParameterError("kappa and gamma_e must be positive")
    return c.g**2 / (c.kappa * c.gamma_e)


def _rabi_terms(p: SystemParams, s: SpaceSpec) -> Operator:
    drive = p.omega_p * sigma("e", "a", s) + p.omega_c * sigma("e", "b", s)
    return -(drive + drive.dag())


def build_h1(p: SystemParams, s: SpaceSpec) -> Operator:
    """Lambda-system EIT Hamiltonian in the rotating frame."""
    return _rabi_terms(p, s) + p.delta_p * sigma("e", "e", s) + p.delta * sigma("b", "b", s)


def build_h2(p: SystemParams, s: SpaceSpec) -> Operator:
    """Dispersive light shift ``dispersive_sign * G a^dag a sigma_bb``."""
    return (p.dispersive_sign * p.g_disp) * (number_op(s) @ sigma("b", "b", s))


def build_hamiltonian(p: SystemParams, s: SpaceSpec) -> Operator:
    return build_h1(p, s) + build_h2(p, s)


def collapse_ops(p: SystemParams, s: SpaceSpec) -> list[tuple[float, Operator]]:
    """The four Lindblad channels as ``(rate, C)`` with dissipator rate/2 (2 C rho C^dag - {C^dag C, rho})."""
    return [
        (p.gamma_ea, sigma("a", "e", s)),
        (p.gamma_eb, sigma("b", "e", s)),
        (p.gamma_deph, sigma("e", "e", s)),
        (p.kappa, annihilator(s)),
    ]


def build_h_non(p: SystemParams, s: SpaceSpec) -> Operator:
    """Non-Hermitian Hamiltonian with only the gamma_ea and kappa losses.

    This is the dark-state picture's effective Hamiltonian; it ignores the
    gamma_eb and dephasing channels.  :func:`build_h_eff` includes all four.
    """
    n = number_op(s)
    return (
        _rabi_terms(p, s)
        + n @ (p.dispersive_sign * p.g_disp * sigma("b", "b", s) - 0.5j * p.kappa * identity(s))
        + (p.delta_p - 0.5j * p.gamma_ea) * sigma("e", "e", s)
        + p.delta * sigma("b", "b", s)
    )


def build_h_eff(p: SystemParams, s: SpaceSpec, channels=None) -> Operator:
    """H1 + H2 - (i/2) sum_k rate_k C_k^dag C_k over the given (default: all) channels."""
    h = build_hamiltonian(p, s)
    for rate, c in collapse_ops(p, s) if channels is None else channels:
        h = h - (0.5j * rate) * (c.dag() @ c)
    return h
