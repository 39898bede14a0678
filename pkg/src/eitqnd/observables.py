"""Susceptibility, absorption area, peak absorption and probe transmission change."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, SeriesTooShortError, UndefinedSusceptibilityError
from .evolve import TimeSeries
from .hilbert import ATOM_INDEX
from .model import SystemParams
from .steadystate import DensityMatrix

MEASUREMENT_WINDOW = 50.0
WEAK_ABSORPTION_LIMIT = 0.1


def coherence_ea(rho) -> complex:
    """<e| Tr_Fock(rho) |a> for a composite or atom-only density matrix."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    nf = m.shape[0] // 3
    e, a = ATOM_INDEX["e"], ATOM_INDEX["a"]
    return complex(np.trace(m[e * nf:(e + 1) * nf, a * nf:(a + 1) * nf]))


@dataclass(frozen=True)
class SusceptibilitySeries:
    base: TimeSeries
    prefactor: float

    @property
    def imag(self) -> TimeSeries:
        return self.base.map(np.imag, label="Im[X]")

    @property
    def real(self) -> TimeSeries:
        return self.base.map(np.real, label="Re[X]")


def susceptibility(rho, p: SystemParams):
    """X = prefactor * rho_ea / Omega_p.

    ``rho`` may be a density matrix (composite or atom-only), a bare coherence
    value, or a :class:`TimeSeries` of rho_ea; a series yields a
    :class:`SusceptibilitySeries`.
    """
    if p.omega_p == 0:
        raise UndefinedSusceptibilityError("susceptibility is undefined for omega_p = 0")
    scale = p.suscept_prefactor / p.omega_p
    if isinstance(rho, TimeSeries):
        return SusceptibilitySeries(rho.map(lambda v: scale * np.asarray(v, dtype=complex), label="X"),
                                    p.suscept_prefactor)
    if isinstance(rho, (DensityMatrix, np.ndarray)) and np.ndim(getattr(rho, "matrix", rho)) == 2:
        return scale * coherence_ea(rho)
    return scale * complex(rho)


def area_s(imx: TimeSeries, t_window: float = MEASUREMENT_WINDOW) -> float:
    """Trapezoidal integral of the series over [0, t_window]."""
    t = imx.times
    v = np.asarray(imx.values, dtype=float)
    eps = 1e-9 * max(1.0, t_window)
    if t.size < 2 or t[0] > eps or t[-1] < t_window - eps:
        span = (float(t[0]), float(t[-1])) if t.size else None
        raise SeriesTooShortError(f"series span {span} does not cover [0, {t_window}]")
    inside = t <= t_window + eps
    tt, vv = t[inside], v[inside]
    if tt[-1] < t_window - eps:
        tt = np.append(tt, t_window)
        vv = np.append(vv, np.interp(t_window, t, v))
    return float(np.trapezoid(vv, tt))


def peak_absorption(imx: TimeSeries) -> tuple[float, float]:
    """Global maximum ``(time, value)``; ties go to the earliest time."""
    v = np.asarray(imx.values, dtype=float)
    if v.size == 0:
        raise ValueError("peak of an empty series")
    i = int(np.argmax(v))
    return float(imx.times[i]), float(v[i])


@dataclass(frozen=True)
class TransmissionParams:
    length: float
    wavelength: float

    def __post_init__(self):
        if not (self.length > 0 and self.wavelength > 0):
            raise InvalidParameterError("sample length and wavelength must be positive")


@dataclass(frozen=True)
class TransmissionChange:
    linearized: float
    exact: float | None
    max_alpha_l: float | None
    weak_absorption: bool | None


def transmission_change(s_area: float, tp: TransmissionParams, imx: TimeSeries | None = None,
                        t_window: float = MEASUREMENT_WINDOW) -> TransmissionChange:
    """Integrated relative transmission loss of the probe.

    The linearized value ``2 pi S l / lambda`` needs only the area; the exact
    ``int (1 - exp(-alpha l)) dt`` with ``alpha = 2 pi Im[X] / lambda`` needs
    the Im[X] series.
    """
    if s_area < 0:
        raise InvalidParameterError(f"area must be non-negative, got {s_area}")
    linear = 2 * np.pi * s_area * tp.length / tp.wavelength
    if imx is None:
        return TransmissionChange(float(linear), None, None, None)
    alpha_l = 2 * np.pi * np.asarray(imx.values, dtype=float) * tp.length / tp.wavelength
    loss = TimeSeries(imx.times, -np.expm1(-alpha_l), "loss")
    max_al = float(np.max(np.abs(alpha_l)))
    return TransmissionChange(float(linear), area_s(loss, t_window), max_al, max_al <= WEAK_ABSORPTION_LIMIT)
