"""JSON wire format for circuits.

A document looks like::

    {
      "num_qubits": 2,
      "num_clbits": 2,
      "ops": [
        {"gate": "h", "target": 0},
        {"gate": "x", "target": 1},
        {"gate": "cphase", "control": 0, "target": 1, "theta": 1.5707963},
        {"gate": "swap", "a": 0, "b": 1},
        {"gate": "cperm", "controls": [0], "targets": [1], "mapping": [1, 0]},
        {"gate": "measure", "qubit": 0, "clbit": 0}
      ]
    }

``mapping[i] = j`` sends target-register value ``i`` to ``j``.
"""
from __future__ import annotations

import math
from typing import Any

from .circuit import Circuit
from .errors import CircuitError
from .gates import H, X, ControlledPermutation, ControlledPhase, GateOp, Measure, Swap

GATE_FIELDS: dict[str, dict[str, str]] = {
    "h": {"target": "int"},
    "x": {"target": "int"},
    "cphase": {"control": "int", "target": "int", "theta": "float"},
    "swap": {"a": "int", "b": "int"},
    "cperm": {"controls": "int[]", "targets": "int[]", "mapping": "int[]"},
    "measure": {"qubit": "int", "clbit": "int"},
}


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_field(path: str, value: Any, kind: str, errors: list[str]) -> bool:
    if kind == "int":
        if not _is_int(value):
            errors.append(f"{path}: expected integer, got {value!r}")
            return False
    elif kind == "float":
        if not (_is_int(value) or isinstance(value, float)) or not math.isfinite(value):
            errors.append(f"{path}: expected finite number, got {value!r}")
            return False
    elif kind == "int[]":
        if not isinstance(value, list) or not all(_is_int(v) for v in value):
            errors.append(f"{path}: expected array of integers, got {value!r}")
            return False
    return True


def _parse_op(i: int, doc: Any, errors: list[str]) -> GateOp | None:
    where = f"ops[{i}]"
    if not isinstance(doc, dict):
        errors.append(f"{where}: expected object, got {type(doc).__name__}")
        return None
    name = doc.get("gate")
    if name not in GATE_FIELDS:
        errors.append(f"{where}.gate: unknown gate {name!r}, expected one of {sorted(GATE_FIELDS)}")
        return None
    fields = GATE_FIELDS[name]
    ok = True
    for key, kind in fields.items():
        if key not in doc:
            errors.append(f"{where}.{key}: missing required field")
            ok = False
        else:
            ok = _check_field(f"{where}.{key}", doc[key], kind, errors) and ok
    for key in doc:
        if key != "gate" and key not in fields:
            errors.append(f"{where}.{key}: unexpected field for gate {name!r}")
            ok = False
    if not ok:
        return None
    if name == "h":
        return H(doc["target"])
    if name == "x":
        return X(doc["target"])
    if name == "cphase":
        return ControlledPhase(doc["control"], doc["target"], float(doc["theta"]))
    if name == "swap":
        return Swap(doc["a"], doc["b"])
    if name == "cperm":
        return ControlledPermutation(
            tuple(doc["controls"]), tuple(doc["targets"]), tuple(doc["mapping"])
        )
    return Measure(doc["qubit"], doc["clbit"])


def circuit_from_dict(doc: Any, max_qubits: int | None = None) -> Circuit:
    """Parse and fully validate a circuit document.

    Raises ``CircuitError`` listing every problem found, each prefixed with
    the offending field path.
    """
    errors: list[str] = []
    if not isinstance(doc, dict):
        raise CircuitError([f"circuit: expected object, got {type(doc).__name__}"])
    for key in ("num_qubits", "num_clbits", "ops"):
        if key not in doc:
            errors.append(f"{key}: missing required field")
    for key in doc:
        if key not in ("num_qubits", "num_clbits", "ops"):
            errors.append(f"{key}: unexpected field")
    nq = doc.get("num_qubits")
    nc = doc.get("num_clbits")
    if "num_qubits" in doc:
        _check_field("num_qubits", nq, "int", errors)
    if "num_clbits" in doc:
        _check_field("num_clbits", nc, "int", errors)
    ops: list[GateOp] = []
    raw_ops = doc.get("ops")
    if "ops" in doc and not isinstance(raw_ops, list):
        errors.append(f"ops: expected array, got {type(raw_ops).__name__}")
    elif isinstance(raw_ops, list):
        for i, op_doc in enumerate(raw_ops):
            op = _parse_op(i, op_doc, errors)
            if op is not None:
                ops.append(op)
    if errors:
        raise CircuitError(errors)
    circuit = Circuit(nq, nc, ops)
    circuit.validate(max_qubits)
    return circuit


def op_to_dict(op: GateOp) -> dict:
    if isinstance(op, H):
        return {"gate": "h", "target": op.target}
    if isinstance(op, X):
        return {"gate": "x", "target": op.target}
    if isinstance(op, ControlledPhase):
        return {"gate": "cphase", "control": op.control, "target": op.target, "theta": op.theta}
    if isinstance(op, Swap):
        return {"gate": "swap", "a": op.a, "b": op.b}
    if isinstance(op, ControlledPermutation):
        return {
            "gate": "cperm",
            "controls": list(op.controls),
            "targets": list(op.targets),
            "mapping": list(op.mapping),
        }
    if isinstance(op, Measure):
        return {"gate": "measure", "qubit": op.qubit, "clbit": op.clbit}
    raise TypeError(f"not a gate: {op!r}")


def circuit_to_dict(circuit: Circuit) -> dict:
    return {
        "num_qubits": circuit.num_qubits,
        "num_clbits": circuit.num_clbits,
        "ops": [op_to_dict(op) for op in circuit.ops],
    }
