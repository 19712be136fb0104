from __future__ import annotations

import secrets
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit
from .errors import CircuitError
from .state import MAX_QUBITS, StateVector, apply_inplace, bitstring


@dataclass
class ShotResult:
    shots: int
    counts: dict[str, int]
    seed: int
    num_clbits: int = field(default=0)

    def to_dict(self) -> dict:
        return {
            "shots": self.shots,
            "counts": dict(sorted(self.counts.items())),
            "seed": self.seed,
            "num_clbits": self.num_clbits,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ShotResult":
        return cls(
            shots=int(doc["shots"]),
            counts={str(k): int(v) for k, v in doc["counts"].items()},
            seed=int(doc["seed"]),
            num_clbits=int(doc.get("num_clbits", 0)),
        )

    def mode(self) -> str:
        """Most frequent outcome; ties go to the numerically smallest bitstring."""
        return min(self.counts, key=lambda k: (-self.counts[k], int(k, 2) if k else 0))


def simulate(circuit: Circuit, max_qubits: int = MAX_QUBITS) -> StateVector:
    """Run every unitary op of ``circuit`` from |0...0> and return the final state."""
    circuit.validate(max_qubits)
    state = StateVector.zero(circuit.num_qubits, max_qubits)
    for op in circuit.unitary_ops():
        apply_inplace(state.amps, state.num_qubits, op)
    return state


def outcome_distribution(circuit: Circuit, state: StateVector) -> np.ndarray:
    """Exact probability of each classical register value given the final state."""
    n = state.num_qubits
    index = np.arange(1 << n, dtype=np.int64)
    keys = np.zeros(1 << n, dtype=np.int64)
    for m in circuit.measurements:
        keys |= ((index >> m.qubit) & 1) << m.clbit
    probs = state.probabilities()
    dist = np.bincount(keys, weights=probs, minlength=1 << circuit.num_clbits)
    return dist / dist.sum()


def run_circuit(
    circuit: Circuit,
    shots: int,
    seed: int | None = None,
    max_qubits: int = MAX_QUBITS,
) -> ShotResult:
    """Simulate once and draw ``shots`` samples of the classical register.

    Measurements are deferred to the end, which is exact because the circuit
    never touches a qubit after measuring it.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    circuit.validate(max_qubits)
    if not circuit.measurements:
        raise CircuitError(["ops: circuit has no measure ops, nothing to sample"])
    if seed is None:
        seed = secrets.randbits(63)
    rng = np.random.default_rng(seed)
    state = simulate(circuit, max_qubits)
    dist = outcome_distribution(circuit, state)
    draws = rng.multinomial(shots, dist)
    counts = {
        bitstring(int(k), circuit.num_clbits): int(draws[k]) for k in np.flatnonzero(draws)
    }
    return ShotResult(shots=shots, counts=counts, seed=seed, num_clbits=circuit.num_clbits)
