"""Quantum Fourier transform gate sequences.

``qubits[0]`` is the least significant bit of the transformed register, so
``qft_ops`` maps ``|x>`` to ``sum_y exp(2*pi*i*x*y/Q) |y> / sqrt(Q)``.
"""
from __future__ import annotations

import math
from typing import Sequence

from .errors import CircuitError
from .gates import H, ControlledPhase, GateOp, Swap


def _check(qubits: Sequence[int]) -> list[int]:
    qs = [int(q) for q in qubits]
    if len(set(qs)) != len(qs):
        raise CircuitError([f"qubits: duplicate indices in {qs}"])
    return qs


def qft_ops(qubits: Sequence[int]) -> list[GateOp]:
    qs = _check(qubits)
    m = len(qs)
    ops: list[GateOp] = []
    for j in range(m - 1, -1, -1):
        ops.append(H(qs[j]))
        for k in range(j - 1, -1, -1):
            ops.append(ControlledPhase(qs[k], qs[j], math.pi / (1 << (j - k))))
    for i in range(m // 2):
        ops.append(Swap(qs[i], qs[m - 1 - i]))
    return ops


def inverse_qft_ops(qubits: Sequence[int]) -> list[GateOp]:
    ops: list[GateOp] = []
    for op in reversed(qft_ops(qubits)):
        if isinstance(op, ControlledPhase):
            op = ControlledPhase(op.control, op.target, -op.theta)
        ops.append(op)
    return ops
