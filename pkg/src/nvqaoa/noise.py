"""Hardware-style imperfections applied per trajectory.

Three gate-level knobs plus one readout knob:

* ``overrotation_frac``: every rotation angle is scaled by (1 + frac);
  deterministic, models systematic drive miscalibration.
* ``depolarizing_prob``: after each gate, each touched qubit independently
  suffers a uniformly random Pauli (X, Y or Z) with this probability;
  stochastic, so expectation values need trajectory averaging.
* ``phase_offset``: a fixed RZ on qubit 0 after every two-qubit gate, standing
  in for the phase the electron spin picks up during entangling operations.
* ``calibration_sigma``: relative Gaussian jitter on the readout intensities.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .statevector import (
    PAULI_MATRICES,
    ROTATION_KINDS,
    Gate,
    StateVector,
    apply_gate,
    apply_matrix,
    init_zero,
    populations,
    rz_matrix,
)

_PAULI_CHOICES = (PAULI_MATRICES["X"], PAULI_MATRICES["Y"], PAULI_MATRICES["Z"])


@dataclass(frozen=True)
class NoiseConfig:
    depolarizing_prob: float = 0.0
    overrotation_frac: float = 0.0
    phase_offset: float = 0.0
    calibration_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("depolarizing_prob", "overrotation_frac", "phase_offset", "calibration_sigma"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if not 0.0 <= self.depolarizing_prob <= 1.0:
            raise ValueError("depolarizing_prob must be in [0, 1]")
        if self.calibration_sigma < 0.0:
            raise ValueError("calibration_sigma must be nonnegative")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def is_trivial(self) -> bool:
        """True when every channel is off; the noisy simulator then matches the exact one bit-for-bit."""
        return (
            self.depolarizing_prob == 0.0
            and self.overrotation_frac == 0.0
            and self.phase_offset == 0.0
            and self.calibration_sigma == 0.0
        )

    @property
    def is_stochastic(self) -> bool:
        """True when individual trajectories differ (only the depolarizing channel draws randomness)."""
        return self.depolarizing_prob > 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseConfig":
        return cls(**data)


def apply_noisy_gate(state: StateVector, gate: Gate, config: NoiseConfig, rng: np.random.Generator) -> StateVector:
    """One gate under the configured channels; rng is consumed only by the depolarizing draw."""
    if config.overrotation_frac != 0.0 and gate.kind in ROTATION_KINDS:
        gate = Gate(gate.kind, gate.targets, gate.angle * (1.0 + config.overrotation_frac))
    state = apply_gate(state, gate)
    if config.depolarizing_prob > 0.0:
        for q in gate.targets:
            if rng.random() < config.depolarizing_prob:
                state = apply_matrix(state, _PAULI_CHOICES[rng.integers(3)], (q,))
    if config.phase_offset != 0.0 and len(gate.targets) == 2:
        state = apply_matrix(state, rz_matrix(config.phase_offset), (0,))
    return state


def simulate_noisy(circuit, config: NoiseConfig, rng: np.random.Generator | None = None) -> StateVector:
    """One noisy trajectory of the circuit from |00...0>.

    With all channels off this reproduces the exact simulator bit for bit:
    the angles are untouched and no extra operators are applied.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    state = init_zero(circuit.num_qubits)
    for gate in circuit.gates:
        state = apply_noisy_gate(state, gate, config, rng)
    return state


def trajectory_mean_populations(circuit, config: NoiseConfig, num_trajectories: int, seed) -> np.ndarray:
    """Basis populations averaged over independent noisy trajectories.

    Each trajectory gets its own substream spawned from ``seed``, so the result
    does not depend on evaluation order.
    """
    if num_trajectories < 1:
        raise ValueError("need at least one trajectory")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    total = np.zeros(1 << circuit.num_qubits)
    for child in root.spawn(num_trajectories):
        total += populations(simulate_noisy(circuit, config, np.random.default_rng(child)))
    return total / num_trajectories


def perturb_calibration(table, sigma: float, seed):
    """Return a copy of the calibration with intensities scaled by 1 + N(0, sigma), floored at zero.

    ``sigma == 0`` returns the table unchanged. Import is deferred to keep the
    module dependency graph one-way.
    """
    from .readout import CalibrationTable

    if sigma < 0.0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0:
        return table
    rng = np.random.default_rng(seed)
    factors = 1.0 + rng.normal(0.0, sigma, size=table.intensities.size)
    return CalibrationTable(np.maximum(table.intensities * factors, 0.0))
