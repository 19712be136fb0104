from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

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


@dataclass
class Circuit:
    """Ordered gate program over a quantum and a classical register.

    Builder methods return ``self`` so calls can be chained.
    """

    num_qubits: int
    num_clbits: int = 0
    ops: list[GateOp] = field(default_factory=list)

    def append(self, op: GateOp) -> "Circuit":
        self.ops.append(op)
        return self

    def extend(self, ops: Iterable[GateOp]) -> "Circuit":
        self.ops.extend(ops)
        return self

    def h(self, q: int) -> "Circuit":
        return self.append(H(q))

    def x(self, q: int) -> "Circuit":
        return self.append(X(q))

    def cphase(self, control: int, target: int, theta: float) -> "Circuit":
        return self.append(ControlledPhase(control, target, theta))

    def swap(self, a: int, b: int) -> "Circuit":
        return self.append(Swap(a, b))

    def cperm(
        self, controls: Sequence[int], targets: Sequence[int], mapping: Sequence[int]
    ) -> "Circuit":
        return self.append(ControlledPermutation(tuple(controls), tuple(targets), tuple(mapping)))

    def measure(self, qubit: int, clbit: int) -> "Circuit":
        return self.append(Measure(qubit, clbit))

    @property
    def measurements(self) -> list[Measure]:
        return [op for op in self.ops if isinstance(op, Measure)]

    def unitary_ops(self) -> list[GateOp]:
        return [op for op in self.ops if not isinstance(op, Measure)]

    def problems(self, max_qubits: int | None = None) -> list[str]:
        out = []
        if self.num_qubits < 1:
            out.append(f"num_qubits: must be >= 1, got {self.num_qubits}")
        elif max_qubits is not None and self.num_qubits > max_qubits:
            out.append(f"num_qubits: {self.num_qubits} exceeds the cap of {max_qubits}")
        if self.num_clbits < 0:
            out.append(f"num_clbits: must be >= 0, got {self.num_clbits}")
        written: dict[int, int] = {}
        measured: set[int] = set()
        for i, op in enumerate(self.ops):
            where = f"ops[{i}]"
            for msg in gate_problems(op, max(self.num_qubits, 0)):
                out.append(f"{where}: {msg}")
            if isinstance(op, Measure):
                if not 0 <= op.clbit < self.num_clbits:
                    out.append(
                        f"{where}.clbit: index {op.clbit} out of range for {self.num_clbits} classical bits"
                    )
                elif op.clbit in written:
                    out.append(
                        f"{where}.clbit: classical bit {op.clbit} already written by ops[{written[op.clbit]}]"
                    )
                else:
                    written[op.clbit] = i
                measured.add(op.qubit)
            else:
                touched = measured.intersection(op.qubits())
                if touched:
                    out.append(
                        f"{where}: unitary acts on already-measured qubit(s) {sorted(touched)}"
                    )
        return out

    def validate(self, max_qubits: int | None = None) -> None:
        problems = self.problems(max_qubits)
        if problems:
            raise CircuitError(problems)
