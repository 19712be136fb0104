"""Dense statevector simulator used as the platform's quantum backend."""

from .circuit import Circuit
from .errors import CircuitError
from .gates import H, X, ControlledPermutation, ControlledPhase, GateOp, Measure, Swap
from .qft import inverse_qft_ops, qft_ops
from .simulator import ShotResult, outcome_distribution, run_circuit, simulate
from .state import MAX_QUBITS, StateVector, apply_gate, measure_all
from .wire import circuit_from_dict, circuit_to_dict

__all__ = [
    "MAX_QUBITS",
    "Circuit",
    "CircuitError",
    "ControlledPermutation",
    "ControlledPhase",
    "GateOp",
    "H",
    "Measure",
    "ShotResult",
    "StateVector",
    "Swap",
    "X",
    "apply_gate",
    "circuit_from_dict",
    "circuit_to_dict",
    "inverse_qft_ops",
    "measure_all",
    "outcome_distribution",
    "qft_ops",
    "run_circuit",
    "simulate",
]
