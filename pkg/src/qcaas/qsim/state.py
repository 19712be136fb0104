"""Dense statevector and the in-place gate kernels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CircuitError
from .gates import (
    H,
    X,
    ControlledPermutation,
    ControlledPhase,
    GateOp,
    Measure,
    Swap,
    gate_problems,
)

MAX_QUBITS = 26

_SQRT1_2 = 1.0 / np.sqrt(2.0)


@dataclass
class StateVector:
    num_qubits: int
    amps: np.ndarray

    def __post_init__(self) -> None:
        if self.num_qubits < 1:
            raise ValueError("a state needs at least one qubit")
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (1 << self.num_qubits,):
            raise ValueError(
                f"expected {1 << self.num_qubits} amplitudes, got shape {self.amps.shape}"
            )

    @classmethod
    def zero(cls, num_qubits: int, max_qubits: int = MAX_QUBITS) -> "StateVector":
        if num_qubits > max_qubits:
            raise CircuitError(
                [f"num_qubits: {num_qubits} exceeds the simulator cap of {max_qubits}"]
            )
        amps = np.zeros(1 << num_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def basis(cls, num_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(1 << num_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(num_qubits, amps)

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amps.copy())

    def norm(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2


def _axis(qubit: int, n: int) -> int:
    # C-order reshape to [2]*n puts the most significant bit on axis 0.
    return n - 1 - qubit


def _index(n: int, fixed: dict[int, int]) -> tuple:
    idx: list = [slice(None)] * n
    for q, bit in fixed.items():
        idx[_axis(q, n)] = bit
    return tuple(idx)


def _apply_h(amps: np.ndarray, n: int, q: int) -> None:
    v = amps.reshape(1 << (n - 1 - q), 2, 1 << q)
    a = v[:, 0, :].copy()
    b = v[:, 1, :].copy()
    v[:, 0, :] = (a + b) * _SQRT1_2
    v[:, 1, :] = (a - b) * _SQRT1_2


def _apply_x(amps: np.ndarray, n: int, q: int) -> None:
    v = amps.reshape(1 << (n - 1 - q), 2, 1 << q)
    v[:, [0, 1], :] = v[:, [1, 0], :]


def _apply_cphase(amps: np.ndarray, n: int, c: int, t: int, theta: float) -> None:
    t_view = amps.reshape((2,) * n)
    t_view[_index(n, {c: 1, t: 1})] *= np.exp(1j * theta)


def _apply_swap(amps: np.ndarray, n: int, a: int, b: int) -> None:
    t_view = amps.reshape((2,) * n)
    i01 = _index(n, {a: 0, b: 1})
    i10 = _index(n, {a: 1, b: 0})
    tmp = t_view[i01].copy()
    t_view[i01] = t_view[i10]
    t_view[i10] = tmp


def _apply_cperm(amps: np.ndarray, n: int, gate: ControlledPermutation) -> None:
    involved = set(gate.controls) | set(gate.targets)
    others = [_axis(q, n) for q in range(n - 1, -1, -1) if q not in involved]
    # Last axis must be targets[0] so the flattened index reads the register little-endian.
    perm = (
        others
        + [_axis(c, n) for c in gate.controls]
        + [_axis(t, n) for t in reversed(gate.targets)]
    )
    inverse = np.argsort(perm)
    moved = np.transpose(amps.reshape((2,) * n), perm)
    block = np.ascontiguousarray(moved).reshape(
        -1, 1 << len(gate.controls), 1 << len(gate.targets)
    )
    active = block[:, -1, :].copy()
    block[:, -1, np.asarray(gate.mapping)] = active
    amps[:] = np.transpose(block.reshape(moved.shape), inverse).reshape(-1)


def apply_inplace(amps: np.ndarray, n: int, gate: GateOp) -> None:
    """Apply a unitary gate to a raw amplitude array without validation."""
    if isinstance(gate, H):
        _apply_h(amps, n, gate.target)
    elif isinstance(gate, X):
        _apply_x(amps, n, gate.target)
    elif isinstance(gate, ControlledPhase):
        _apply_cphase(amps, n, gate.control, gate.target, gate.theta)
    elif isinstance(gate, Swap):
        _apply_swap(amps, n, gate.a, gate.b)
    elif isinstance(gate, ControlledPermutation):
        _apply_cperm(amps, n, gate)
    else:
        raise CircuitError([f"{type(gate).__name__} is not a unitary gate"])


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Return a new state with ``gate`` applied; the input is left untouched."""
    if isinstance(gate, Measure):
        raise CircuitError(["measure is not a unitary gate; use measure_all or run_circuit"])
    problems = gate_problems(gate, state.num_qubits)
    if problems:
        raise CircuitError(problems)
    out = state.copy()
    apply_inplace(out.amps, out.num_qubits, gate)
    return out


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def bitstring(index: int, width: int) -> str:
    """Render ``index`` with bit 0 rightmost."""
    return format(index, f"0{width}b") if width else ""


def measure_all(state: StateVector, rng) -> tuple[str, StateVector]:
    """Measure every qubit, returning the observed bitstring and collapsed state."""
    gen = _as_generator(rng)
    probs = state.probabilities()
    probs = probs / probs.sum()
    index = int(gen.choice(probs.size, p=probs))
    return bitstring(index, state.num_qubits), StateVector.basis(state.num_qubits, index)
