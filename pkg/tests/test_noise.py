import math

import numpy as np
import pytest

from nvqaoa.circuits import Circuit, QaoaParams, build_ansatz, simulate
from nvqaoa.graph_problem import Graph, diagonal_costs
from nvqaoa.noise import NoiseConfig, apply_noisy_gate, perturb_calibration, simulate_noisy, trajectory_mean_populations
from nvqaoa.readout import CalibrationTable, default_calibration
from nvqaoa.statevector import Gate, apply_gate, apply_matrix, init_zero, populations, rz_matrix

K2 = Graph.complete(2)


def closed_form(beta, gamma):
    return -0.5 + 0.5 * math.sin(4 * beta) * math.sin(gamma)


def test_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(depolarizing_prob=1.5)
    with pytest.raises(ValueError):
        NoiseConfig(depolarizing_prob=-0.1)
    with pytest.raises(ValueError):
        NoiseConfig(calibration_sigma=-1.0)
    with pytest.raises(ValueError):
        NoiseConfig(overrotation_frac=float("nan"))
    quiet = NoiseConfig()
    assert quiet.is_trivial and not quiet.is_stochastic
    drifted = NoiseConfig(overrotation_frac=0.1)
    assert not drifted.is_trivial and not drifted.is_stochastic
    jumpy = NoiseConfig(depolarizing_prob=0.2)
    assert jumpy.is_stochastic


def test_config_dict_round_trip():
    config = NoiseConfig(0.1, 0.05, 0.3, 0.02, seed=9)
    again = NoiseConfig.from_dict(config.to_dict())
    assert again == config


def test_trivial_config_bit_identical_to_exact():
    rng = np.random.default_rng(12)
    for _ in range(10):
        beta, gamma = rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)
        circuit = build_ansatz(K2, QaoaParams.single(beta, gamma))
        exact = simulate(circuit)
        quiet = simulate_noisy(circuit, NoiseConfig(), np.random.default_rng(0))
        assert np.array_equal(exact.amplitudes, quiet.amplitudes)


def test_overrotation_scales_rotation_angles_only():
    eps = 0.07
    config = NoiseConfig(overrotation_frac=eps)
    diag = diagonal_costs(K2)
    rng = np.random.default_rng(6)
    for _ in range(10):
        beta, gamma = rng.uniform(0.05, 1.0), rng.uniform(0.1, 5.0)
        circuit = build_ansatz(K2, QaoaParams.single(beta, gamma))
        state = simulate_noisy(circuit, config, np.random.default_rng(0))
        value = float(np.dot(populations(state), diag))
        # H gates are untouched, so the state is the exact ansatz at scaled angles
        assert value == pytest.approx(closed_form(beta * (1 + eps), gamma * (1 + eps)), abs=1e-9)


def test_phase_offset_follows_two_qubit_gates():
    phi = 0.83
    config = NoiseConfig(phase_offset=phi)
    circuit = Circuit(2, (Gate("H", (0,)), Gate("CNOT", (0, 1))))
    noisy = simulate_noisy(circuit, config, np.random.default_rng(0))
    expected = init_zero(2)
    expected = apply_gate(expected, Gate("H", (0,)))
    expected = apply_gate(expected, Gate("CNOT", (0, 1)))
    expected = apply_matrix(expected, rz_matrix(phi), (0,))
    np.testing.assert_allclose(noisy.amplitudes, expected.amplitudes, atol=1e-14)

    # single-qubit gates must not pick up the offset
    single = Circuit(2, (Gate("H", (0,)),))
    noisy = simulate_noisy(single, config, np.random.default_rng(0))
    np.testing.assert_allclose(noisy.amplitudes, simulate(single).amplitudes, atol=1e-15)


def test_apply_noisy_gate_consumes_rng_only_for_depolarizing():
    state = init_zero(2)
    gate = Gate("RX", (0,), 0.4)
    rng = np.random.default_rng(5)
    before = rng.bit_generator.state["state"]["state"]
    apply_noisy_gate(state, gate, NoiseConfig(overrotation_frac=0.1, phase_offset=0.2), rng)
    assert rng.bit_generator.state["state"]["state"] == before


def test_depolarizing_single_gate_statistics():
    # one RX on one qubit: X and Y flips swap populations, Z leaves them
    theta, prob, trials = 1.1, 0.3, 20_000
    circuit = Circuit(1, (Gate("RX", (0,), theta),))
    p0 = math.cos(theta / 2) ** 2
    expected0 = (1 - prob) * p0 + prob * (p0 / 3 + 2 * (1 - p0) / 3)
    mean = trajectory_mean_populations(circuit, NoiseConfig(depolarizing_prob=prob), trials, seed=8)
    assert mean[0] == pytest.approx(expected0, abs=5 / math.sqrt(trials))


def test_full_depolarizing_drives_to_uniform():
    params = QaoaParams.single(0.15 * math.pi, 1.5 * math.pi)
    circuit = build_ansatz(K2, params)
    mean = trajectory_mean_populations(circuit, NoiseConfig(depolarizing_prob=1.0), 2000, seed=3)
    np.testing.assert_allclose(mean, np.full(4, 0.25), atol=0.05)


def test_trajectory_mean_deterministic():
    circuit = build_ansatz(K2, QaoaParams.single(0.3, 1.2))
    config = NoiseConfig(depolarizing_prob=0.2)
    a = trajectory_mean_populations(circuit, config, 200, seed=42)
    b = trajectory_mean_populations(circuit, config, 200, seed=42)
    c = trajectory_mean_populations(circuit, config, 200, seed=43)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError):
        trajectory_mean_populations(circuit, config, 0, seed=1)


def test_simulate_noisy_default_rng_comes_from_config_seed():
    circuit = build_ansatz(K2, QaoaParams.single(0.3, 1.2))
    config = NoiseConfig(depolarizing_prob=0.5, seed=77)
    a = simulate_noisy(circuit, config)
    b = simulate_noisy(circuit, config)
    np.testing.assert_array_equal(a.amplitudes, b.amplitudes)


def test_perturb_calibration():
    cal = default_calibration()
    assert perturb_calibration(cal, 0.0, seed=1) is cal
    a = perturb_calibration(cal, 0.05, seed=2)
    b = perturb_calibration(cal, 0.05, seed=2)
    np.testing.assert_array_equal(a.intensities, b.intensities)
    assert not np.array_equal(a.intensities, cal.intensities)
    # large jitter must be floored at zero, never negative
    wild = perturb_calibration(cal, 5.0, seed=3)
    assert (wild.intensities >= 0).all()
    with pytest.raises(ValueError):
        perturb_calibration(cal, -0.1, seed=0)


def test_perturbed_table_is_valid_calibration():
    cal = default_calibration()
    perturbed = perturb_calibration(cal, 0.02, seed=11)
    assert isinstance(perturbed, CalibrationTable)
    assert perturbed.num_qubits == 2
