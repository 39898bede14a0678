import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eitqnd.errors import DimensionError, InvalidParameterError, NumericalFailure, StiffnessError
from eitqnd.evolve import (
    PropagationConfig,
    TimeSeries,
    coherence_probe,
    distance_probe,
    expect_probe,
    propagate,
    propagate_expm,
    propagate_fock_diagonal,
)
from eitqnd.hilbert import SpaceSpec, annihilator, number_op, sigma
from eitqnd.model import SystemParams, build_hamiltonian, collapse_ops
from eitqnd.observables import susceptibility
from eitqnd.steadystate import ATOM_SPACE, DensityMatrix, initial_state, liouvillian_matrix, steady_state_atom

# Im/Re X for the G = 0.03, n = 1 run, pinned by the matrix-exponential propagator
FIG2B_N1_PEAK = (8.9, 0.037486253080225775)
FIG2B_N1_CHI_T10 = 0.0416198581397319 + 0.03724943615465107j


def cavity_decay_setup(kappa=0.3):
    s = SpaceSpec(1)
    zero = 0 * number_op(s)
    rho0 = initial_state(np.diag([1.0, 0, 0]), 1, s)
    return s, zero, [(kappa, annihilator(s))], rho0


@pytest.mark.parametrize("method", ["rk45", "rk4", "expm"])
def test_cavity_decay_at_one_over_kappa(method):
    kappa = 0.3
    s, h, c, rho0 = cavity_decay_setup(kappa)
    cfg = PropagationConfig(t_end=1 / kappa, sample_dt=1 / (30 * kappa), method=method, step_dt=1 / (300 * kappa))
    res = propagate(rho0, h, c, cfg, [expect_probe(number_op(s), "n")])
    assert res["n"].values[-1].real == pytest.approx(math.exp(-1), abs=1e-8)


def test_unitary_purity_conserved():
    p = SystemParams(gamma_ea=0, gamma_eb=0, gamma_deph=0, kappa=0, g_disp=0.08)
    s = SpaceSpec(2)
    psi = np.zeros(s.dim)
    psi[s.index("a", 2)] = 1
    rho0 = DensityMatrix(s, np.outer(psi, psi))
    purity = lambda rho: np.trace(rho @ rho)
    from eitqnd.evolve import Probe
    res = propagate(rho0, build_hamiltonian(p, s), collapse_ops(p, s), PropagationConfig(20.0, 0.5),
                    [Probe("purity", purity)])
    assert np.max(np.abs(res["purity"].values - 1)) < 1e-8


def test_expm_at_zero_returns_input(fig2_params):
    s = SpaceSpec(2)
    rho0 = initial_state(steady_state_atom(fig2_params), 2, s)
    out = propagate_expm(rho0, build_hamiltonian(fig2_params, s), collapse_ops(fig2_params, s), 0.0)
    np.testing.assert_array_equal(out.matrix, rho0.matrix)


def test_expm_semigroup(fig2_params):
    s = SpaceSpec(2)
    h, c = build_hamiltonian(fig2_params, s), collapse_ops(fig2_params, s)
    rho0 = initial_state(steady_state_atom(fig2_params), 2, s)
    half = propagate_expm(propagate_expm(rho0, h, c, 5.0), h, c, 5.0)
    full = propagate_expm(rho0, h, c, 10.0)
    assert np.max(np.abs(half.matrix - full.matrix)) < 1e-9


def test_expm_dimension_guard():
    s = SpaceSpec(21)
    rho0 = initial_state(np.diag([1.0, 0, 0]), 0, s)
    with pytest.raises(DimensionError):
        propagate_expm(rho0, number_op(s), [], 1.0)


def test_rk45_matches_expm_fig2b(fig2_params):
    s = SpaceSpec(6)
    h, c = build_hamiltonian(fig2_params, s), collapse_ops(fig2_params, s)
    L = liouvillian_matrix(h, c)
    rho0 = initial_state(steady_state_atom(fig2_params), 1, s)
    res = propagate(rho0, h, c, PropagationConfig(50.0), [coherence_probe()], L=L)
    oracle = propagate_expm(rho0, h, c, 50.0, L=L)
    assert np.max(np.abs(res.final.matrix - oracle.matrix)) < 1e-7
    chi = susceptibility(res["rho_ea"], fig2_params)
    i10 = int(round(10.0 / 0.05))
    assert chi.base.values[i10] == pytest.approx(FIG2B_N1_CHI_T10, abs=1e-8)
    imx = chi.imag.values
    k = int(np.argmax(imx))
    assert res.times[k] == pytest.approx(FIG2B_N1_PEAK[0])
    assert imx[k] == pytest.approx(FIG2B_N1_PEAK[1], abs=1e-8)


def test_invariant_checks_reported(fig2_params):
    res = propagate_fock_diagonal(steady_state_atom(fig2_params), 2, fig2_params, PropagationConfig(50.0))
    assert res.checks["trace_drift"] < 1e-8
    assert res.checks["hermiticity"] < 1e-8
    assert res.checks["min_eigenvalue"] >= -1e-6


def test_fock_diagonal_path_matches_composite(fig2_params):
    n = 2
    s = SpaceSpec(n)
    atom = steady_state_atom(fig2_params)
    cfg = PropagationConfig(20.0, method="rk4")
    a = propagate(initial_state(atom, n, s), build_hamiltonian(fig2_params, s), collapse_ops(fig2_params, s), cfg,
                  [coherence_probe()])
    b = propagate_fock_diagonal(atom, n, fig2_params, cfg, [coherence_probe()])
    np.testing.assert_allclose(a["rho_ea"].values, b["rho_ea"].values, atol=1e-13)
    np.testing.assert_allclose(a.final.matrix, b.final.matrix, atol=1e-13)


def test_vacuum_injection_is_fixed_point(fig2_params):
    s = SpaceSpec(1)
    rho0 = initial_state(steady_state_atom(fig2_params), 0, s)
    res = propagate(rho0, build_hamiltonian(fig2_params, s), collapse_ops(fig2_params, s),
                    PropagationConfig(200.0, sample_dt=1.0), [distance_probe(rho0.matrix)])
    assert np.max(res["dist_max"].values.real) < 1e-7


def test_contraction_toward_steady_state(fig2_params):
    s = SpaceSpec(1)
    atom = steady_state_atom(fig2_params)
    target = initial_state(atom, 0, s)
    res = propagate(initial_state(atom, 1, s), build_hamiltonian(fig2_params, s), collapse_ops(fig2_params, s),
                    PropagationConfig(200.0, sample_dt=1.0), [distance_probe(target.matrix)])
    d = res["dist_max"].values.real[100:]
    assert np.all(np.diff(d) <= 1e-12)


def test_trace_loss_is_numerical_failure():
    s = ATOM_SPACE
    rho0 = DensityMatrix(s, np.diag([1.0, 0, 0]))
    L = liouvillian_matrix(np.zeros((3, 3)), []) - 0.1 * np.eye(9)
    with pytest.raises(NumericalFailure):
        propagate(rho0, np.zeros((3, 3)), [], PropagationConfig(1.0), L=L)


def test_stiff_generator_raises():
    rho0 = DensityMatrix(ATOM_SPACE, np.diag([0, 0, 1.0]))
    c = [(1e14, sigma("a", "e", ATOM_SPACE))]
    with pytest.raises(StiffnessError):
        propagate(rho0, np.zeros((3, 3)), c, PropagationConfig(1.0))


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        PropagationConfig(t_end=0)
    with pytest.raises(InvalidParameterError):
        PropagationConfig(t_end=1, sample_dt=2)
    with pytest.raises(InvalidParameterError):
        PropagationConfig(t_end=1, method="euler")
    assert PropagationConfig(50.0).times.size == 1001


def test_time_series_validation():
    with pytest.raises(DimensionError):
        TimeSeries(np.array([0, 1, 1.0]), np.zeros(3))
    with pytest.raises(DimensionError):
        TimeSeries(np.array([0, 1.0]), np.zeros(3))


def test_rk4_deterministic(fig2_params):
    cfg = PropagationConfig(10.0, method="rk4")
    atom = steady_state_atom(fig2_params)
    a = propagate_fock_diagonal(atom, 1, fig2_params, cfg, [coherence_probe()])
    b = propagate_fock_diagonal(atom, 1, fig2_params, cfg, [coherence_probe()])
    np.testing.assert_array_equal(a["rho_ea"].values, b["rho_ea"].values)


@given(st.floats(0.05, 2.0), st.floats(0.5, 5.0))
def test_rk45_decay_property(kappa, t):
    s, h, c, rho0 = cavity_decay_setup(kappa)
    res = propagate(rho0, h, c, PropagationConfig(t, sample_dt=t), [expect_probe(number_op(s), "n")])
    assert res["n"].values[-1].real == pytest.approx(math.exp(-kappa * t), abs=1e-8)
