"""Gate records understood by the simulator.

Qubit ``k`` is bit ``k`` of a basis-state index (little-endian). Only the
gates needed by order finding are provided.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True)
class H:
    target: int

    def qubits(self) -> tuple[int, ...]:
        return (self.target,)


@dataclass(frozen=True)
class X:
    target: int

    def qubits(self) -> tuple[int, ...]:
        return (self.target,)


@dataclass(frozen=True)
class ControlledPhase:
    """Multiply the amplitude of states with both qubits set by ``exp(i*theta)``."""

    control: int
    target: int
    theta: float

    def qubits(self) -> tuple[int, ...]:
        return (self.control, self.target)


@dataclass(frozen=True)
class Swap:
    a: int
    b: int

    def qubits(self) -> tuple[int, ...]:
        return (self.a, self.b)


@dataclass(frozen=True)
class ControlledPermutation:
    """Permute the basis states of ``targets`` when every control is 1.

    The target register value is read little-endian: ``targets[0]`` is its
    least significant bit. ``mapping[i] = j`` sends ``|i>`` to ``|j>``.
    """

    controls: tuple[int, ...]
    targets: tuple[int, ...]
    mapping: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "mapping", tuple(int(m) for m in self.mapping))

    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets


@dataclass(frozen=True)
class Measure:
    qubit: int
    clbit: int

    def qubits(self) -> tuple[int, ...]:
        return (self.qubit,)


UnitaryOp = Union[H, X, ControlledPhase, Swap, ControlledPermutation]
GateOp = Union[H, X, ControlledPhase, Swap, ControlledPermutation, Measure]


def gate_problems(gate: GateOp, num_qubits: int) -> list[str]:
    """Return human-readable problems with ``gate`` on a register of ``num_qubits``."""
    problems = []
    for q in gate.qubits():
        if not 0 <= q < num_qubits:
            problems.append(f"qubit index {q} out of range for {num_qubits} qubits")
    qs = gate.qubits()
    if len(set(qs)) != len(qs):
        problems.append(f"qubit indices must be distinct, got {list(qs)}")
    if isinstance(gate, ControlledPhase) and not math.isfinite(gate.theta):
        problems.append(f"theta must be finite, got {gate.theta}")
    if isinstance(gate, ControlledPermutation):
        if not gate.targets:
            problems.append("controlled permutation needs at least one target")
        size = 1 << len(gate.targets)
        if len(gate.mapping) != size:
            problems.append(
                f"mapping has {len(gate.mapping)} entries, expected {size}"
            )
        elif sorted(gate.mapping) != list(range(size)):
            problems.append("mapping is not a bijection on its domain")
    return problems
