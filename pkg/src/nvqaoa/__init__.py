"""Desk-scale simulator for variational MAX-CUT experiments.

Exact state-vector circuits, fluorescence-style non-projective readout with
Poisson shot noise, Walsh-Hadamard population reconstruction, hardware-style
noise channels, and landscape/optimization drivers with a reproducible
seeding scheme. See the README for the measurement model.
"""

__version__ = "0.1.0"

from .graph_problem import Graph, CutReport, brute_force, cost, cut_value, diagonal_costs, load_graph
from .statevector import Gate, StateVector, apply_gate, init_zero, populations, expectation_diagonal, fidelity
from .circuits import Circuit, QaoaParams, build_ansatz, build_ansatz_native, append_flips, simulate
from .readout import CalibrationTable, ShotRecord, default_calibration, measure_circuit, observable_expectation, sample_shots
from .reconstruction import (
    DegenerateCalibrationError,
    PopulationEstimate,
    WalshCoefficients,
    forward_means,
    fwht,
    reconstruct,
    walsh_coefficients,
)
from .noise import NoiseConfig, simulate_noisy, trajectory_mean_populations, perturb_calibration
from .experiment import (
    ConvergenceProfile,
    LandscapeGrid,
    OptimizeResult,
    PointRecord,
    ScanConfig,
    closed_form_cost_k2,
    convergence_profile,
    ideal_cost,
    landscape_error,
    measure_point,
    optimize,
    run_scan,
)

__all__ = [name for name in dir() if not name.startswith("_")]
