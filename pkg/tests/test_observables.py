import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eitqnd.errors import InvalidParameterError, SeriesTooShortError, UndefinedSusceptibilityError
from eitqnd.evolve import PropagationConfig, TimeSeries, coherence_probe, propagate, propagate_expm
from eitqnd.experiments import SolverOptions, simulate_fock, strictly_increasing
from eitqnd.hilbert import SpaceSpec
from eitqnd.model import SystemParams, build_hamiltonian, collapse_ops
from eitqnd.observables import (
    MEASUREMENT_WINDOW,
    TransmissionParams,
    area_s,
    peak_absorption,
    susceptibility,
    transmission_change,
)
from eitqnd.steadystate import ATOM_SPACE, DensityMatrix, steady_state_atom

T = MEASUREMENT_WINDOW
GRID = np.linspace(0, T, 1001)


@given(st.floats(-10, 10))
def test_constant_area_exact(c):
    assert area_s(TimeSeries(GRID, np.full(GRID.size, c))) == pytest.approx(c * T, rel=1e-14, abs=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_area_linear(a, b):
    f = TimeSeries(GRID, np.sin(GRID))
    g = TimeSeries(GRID, np.exp(-GRID / 7))
    combo = TimeSeries(GRID, a * f.values + b * g.values)
    assert area_s(combo) == pytest.approx(a * area_s(f) + b * area_s(g), abs=1e-10)


def test_area_grid_refinement(fig2_params):
    coarse = simulate_fock(fig2_params, 1).area()
    fine = simulate_fock(fig2_params, 1, SolverOptions(sample_dt=0.025)).area()
    finer = simulate_fock(fig2_params, 1, SolverOptions(sample_dt=0.0125)).area()
    richardson = finer + (finer - fine) / 3
    assert abs(coarse - fine) / fine < 1e-4
    assert abs(coarse - richardson) / richardson < 1e-4


def test_area_series_too_short():
    with pytest.raises(SeriesTooShortError):
        area_s(TimeSeries(np.linspace(0, 10, 11), np.ones(11)))


def test_area_window_interpolated():
    t = np.linspace(0, 60, 13)
    assert area_s(TimeSeries(t, t), 50.0) == pytest.approx(1250.0)


def test_peak_of_decay_at_zero():
    assert peak_absorption(TimeSeries(GRID, np.exp(-GRID))) == (0.0, 1.0)


def test_peak_all_zero():
    assert peak_absorption(TimeSeries(GRID, np.zeros(GRID.size))) == (0.0, 0.0)


def test_peak_ties_go_earliest():
    v = np.zeros(GRID.size)
    v[[100, 300]] = 2.0
    assert peak_absorption(TimeSeries(GRID, v)) == (GRID[100], 2.0)


def test_susceptibility_undefined_without_probe():
    p = SystemParams(omega_p=0)
    with pytest.raises(UndefinedSusceptibilityError):
        susceptibility(steady_state_atom(p), p)


def test_ideal_eit_transparent():
    p = SystemParams(delta_p=0, delta_c=0, gamma_deph=0)
    chi = susceptibility(steady_state_atom(p), p)
    assert abs(chi.imag) < 1e-6 and abs(chi.real) < 1e-6


def test_prefactor_scales_linearly(fig2_params):
    p = fig2_params.replace(delta_c=-0.9)
    rho = steady_state_atom(p)
    assert susceptibility(rho, p.replace(suscept_prefactor=2.5)) == pytest.approx(2.5 * susceptibility(rho, p))


def test_two_level_absorption_sign():
    # no coupling field: ordinary resonance absorption must show up as Im[X] > 0
    p = SystemParams(omega_p=1e-3, omega_c=0, delta_p=0, delta_c=0, gamma_eb=0)
    s = ATOM_SPACE
    rho0 = DensityMatrix(s, np.diag([1.0, 0, 0]))
    h, c = build_hamiltonian(p, s), collapse_ops(p, s)
    early = propagate(rho0, h, c, PropagationConfig(2.0, 0.1), [coherence_probe()])
    chi = susceptibility(early["rho_ea"], p).imag.values
    assert np.all(chi[1:] > 0)
    late = susceptibility(propagate_expm(rho0, h, c, 1e3), p)
    gamma = p.gamma_ea + p.gamma_eb + p.gamma_deph
    weak_probe = 1j / (gamma / 2 + 1j * p.delta_p)
    assert late.imag > 0
    assert late == pytest.approx(weak_probe, rel=1e-4)


def test_vacuum_baseline_area(fig2_params):
    for p in (fig2_params, fig2_params.replace(delta_c=-0.95, gamma_deph=0.3)):
        ss = susceptibility(steady_state_atom(p), p).imag
        assert simulate_fock(p, 0).area() == pytest.approx(T * ss, abs=1e-9)


def test_fig3b_monotone(fig2_params):
    areas = [simulate_fock(fig2_params, n).area() for n in range(5)]
    assert strictly_increasing(areas)
    np.testing.assert_allclose(areas, [0, 0.916004568386346, 1.9875788817233297, 3.204497017165722,
                                       4.555278122668525], atol=1e-8)


def test_peak_ordering_g008(fig2_params):
    p = fig2_params.replace(g_disp=0.08)
    peaks = [simulate_fock(p, n).peak()[1] for n in range(5)]
    assert strictly_increasing(peaks)


def test_transmission_zero_area():
    tc = transmission_change(0.0, TransmissionParams(1.0, 1.0))
    assert tc.linearized == 0


@given(st.floats(0, 10), st.floats(1e-3, 10), st.floats(1e-3, 10))
def test_transmission_linearized_formula(s, length, wavelength):
    tc = transmission_change(s, TransmissionParams(length, wavelength))
    assert tc.linearized == pytest.approx(2 * np.pi * s * length / wavelength)
    assert tc.exact is None


def test_transmission_exact_vs_linear(fig2_params):
    run = simulate_fock(fig2_params, 2)
    imx = run.imx
    lam = 1.0
    length = 0.09 * lam / (2 * np.pi * imx.values.max())
    tc = transmission_change(run.area(), TransmissionParams(length, lam), imx)
    assert tc.max_alpha_l < 0.1 and tc.weak_absorption
    assert abs(tc.exact - tc.linearized) / tc.linearized < 0.05
    strong = transmission_change(run.area(), TransmissionParams(20 * length, lam), imx)
    assert not strong.weak_absorption


def test_transmission_rejects_negative_area():
    with pytest.raises(InvalidParameterError):
        transmission_change(-1.0, TransmissionParams(1.0, 1.0))
    with pytest.raises(InvalidParameterError):
        TransmissionParams(0.0, 1.0)
