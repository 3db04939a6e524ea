"""Circuit construction for the variational MAX-CUT ansatz.

The ansatz alternates a diagonal cost layer (one RZZ per edge, angle scaled by
the edge weight) with a transverse mixing layer (RX(2 beta) on every qubit),
starting from the uniform superposition. A second builder expands each RZZ
into the native CNOT - RZ - CNOT sequence; the two must agree up to global
phase, which is one of the library's standing self-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._bitstrings import BitString, all_bitstrings, as_bit_array
from .graph_problem import Graph
from .statevector import Gate, StateVector, apply_gate, init_zero


@dataclass(frozen=True)
class QaoaParams:
    """Variational angles, one (beta, gamma) pair per layer."""

    betas: tuple[float, ...]
    gammas: tuple[float, ...]

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        gammas = tuple(float(g) for g in self.gammas)
        if len(betas) != len(gammas) or not betas:
            raise ValueError("betas and gammas must be equal-length and nonempty")
        if not all(np.isfinite(betas)) or not all(np.isfinite(gammas)):
            raise ValueError("angles must be finite")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "gammas", gammas)

    @property
    def p(self) -> int:
        return len(self.betas)

    @classmethod
    def single(cls, beta: float, gamma: float) -> "QaoaParams":
        return cls((beta,), (gamma,))


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        if not isinstance(self.num_qubits, int) or self.num_qubits < 1:
            raise ValueError("circuit needs at least one qubit")
        gates = tuple(self.gates)
        for gate in gates:
            if any(t >= self.num_qubits for t in gate.targets):
                raise ValueError(f"gate {gate.kind} targets {gate.targets} exceed {self.num_qubits} qubits")
        object.__setattr__(self, "gates", gates)

    def to_text(self) -> str:
        """One gate per line: ``KIND target[,target2][,angle]`` with 17-digit angles."""
        lines = []
        for gate in self.gates:
            fields = [str(t) for t in gate.targets]
            if gate.angle is not None:
                fields.append(format(gate.angle, ".17g"))
            lines.append(f"{gate.kind} {','.join(fields)}")
        return "\n".join(lines) + ("\n" if lines else "")


def build_ansatz(graph: Graph, params: QaoaParams) -> Circuit:
    """Hadamard wall, then per layer: RZZ(gamma * w) on each edge, RX(2 beta) on each qubit."""
    n = graph.num_vertices
    gates: list[Gate] = [Gate("H", (q,)) for q in range(n)]
    for beta, gamma in zip(params.betas, params.gammas):
        for i, j, w in graph.edges():
            gates.append(Gate("RZZ", (i, j), gamma * w))
        for q in range(n):
            gates.append(Gate("RX", (q,), 2.0 * beta))
    return Circuit(n, tuple(gates))


def build_ansatz_native(graph: Graph, params: QaoaParams) -> Circuit:
    """Same ansatz with every RZZ expanded as CNOT, RZ on the target, CNOT.

    The control is the lower-numbered qubit of each edge. Agrees with
    ``build_ansatz`` up to global phase.
    """
    n = graph.num_vertices
    gates: list[Gate] = [Gate("H", (q,)) for q in range(n)]
    for beta, gamma in zip(params.betas, params.gammas):
        for i, j, w in graph.edges():
            gates.append(Gate("CNOT", (i, j)))
            gates.append(Gate("RZ", (j,), gamma * w))
            gates.append(Gate("CNOT", (i, j)))
        for q in range(n):
            gates.append(Gate("RX", (q,), 2.0 * beta))
    return Circuit(n, tuple(gates))


def append_flips(circuit: Circuit, pattern: BitString) -> Circuit:
    """Append an X on every qubit where ``pattern`` has a 1 (qubit 0 = leftmost bit)."""
    bits = as_bit_array(pattern, circuit.num_qubits)
    extra = tuple(Gate("X", (q,)) for q in range(circuit.num_qubits) if bits[q])
    return Circuit(circuit.num_qubits, circuit.gates + extra)


def flip_patterns(num_qubits: int) -> list[str]:
    """All 2**n flip patterns in basis-index order ('00', '01', '10', '11' for n=2)."""
    return all_bitstrings(num_qubits)


def calibration_circuits(num_qubits: int) -> list[Circuit]:
    """One preparation circuit per basis state: X gates writing that bit pattern."""
    empty = Circuit(num_qubits, ())
    return [append_flips(empty, pattern) for pattern in flip_patterns(num_qubits)]


def simulate(circuit: Circuit) -> StateVector:
    """Run the circuit on |00...0> and return the exact final state."""
    state = init_zero(circuit.num_qubits)
    for gate in circuit.gates:
        state = apply_gate(state, gate)
    return state
