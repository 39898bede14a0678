"""Transient-EIT quantum nondemolition photon counting in a cavity.

A Lambda-type atom coupled dispersively to a cavity mode: steady-state and
transient master-equation dynamics, susceptibility readout, quantum-jump
trajectories and a heralded Fock-state source built on top.
"""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .hilbert import SpaceSpec, StateVector, Operator, coherent_ket, fock_ket, sigma  # noqa: E402
from .model import CavityPhysical, SystemParams, build_hamiltonian, collapse_ops  # noqa: E402
from .steadystate import DensityMatrix, steady_state_atom  # noqa: E402
from .evolve import PropagationConfig, TimeSeries, propagate, propagate_expm  # noqa: E402
from .observables import area_s, peak_absorption, susceptibility  # noqa: E402
from .experiments import SolverOptions, simulate_fock, sweep  # noqa: E402
from .trajectories import TrajectoryConfig, run_trajectories  # noqa: E402
from .herald import calibrate, run_protocol  # noqa: E402
