"""QSR manifests and deployment descriptors, plus their validators."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Union

from ..kinds import StepKind

Bound = Union[bool, int, float]


class ManifestError(ValueError):
    pass


class DeploymentError(ValueError):
    pass


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    WARN = "warn"


@dataclass(frozen=True)
class FunctionalRequirement:
    name: str
    description: str = ""


@dataclass(frozen=True)
class QualityAttribute:
    name: str
    bound: Bound
    description: str = ""


# Built-in checkers and the bound type each expects.
_BOUND_TYPES: dict[str, type] = {
    "qubit_budget": int,
    "split_required": bool,
    "validation_required": bool,
}


@dataclass
class QSRManifest:
    functional: list[FunctionalRequirement]
    quality: list[QualityAttribute]
    author_role: str = ""

    def attribute(self, name: str) -> QualityAttribute | None:
        for attr in self.quality:
            if attr.name == name:
                return attr
        return None

    @property
    def qubit_budget(self) -> int | None:
        attr = self.attribute("qubit_budget")
        return None if attr is None else int(attr.bound)

    @classmethod
    def from_dict(cls, doc: Any) -> "QSRManifest":
        errors: list[str] = []
        if not isinstance(doc, dict):
            raise ManifestError("manifest: expected object")
        functional = []
        for i, item in enumerate(doc.get("functional", [])):
            if not isinstance(item, dict) or not isinstance(item.get("name"), str):
                errors.append(f"functional[{i}].name: missing or not a string")
                continue
            functional.append(FunctionalRequirement(item["name"], item.get("description", "")))
        if not functional:
            errors.append("functional: at least one functional requirement is needed")
        quality = []
        seen: set[str] = set()
        raw_quality = doc.get("quality", [])
        if not isinstance(raw_quality, list):
            raise ManifestError("quality: expected array")
        for i, item in enumerate(raw_quality):
            where = f"quality[{i}]"
            if not isinstance(item, dict) or not isinstance(item.get("name"), str):
                errors.append(f"{where}.name: missing or not a string")
                continue
            name = item["name"]
            if name in seen:
                errors.append(f"{where}.name: duplicate attribute {name!r}")
            seen.add(name)
            bound = item.get("bound")
            # Every attribute needs a machine-checkable bound; free text is not one.
            if not isinstance(bound, (bool, int, float)):
                errors.append(f"{where}.bound: expected number or boolean, got {bound!r}")
                continue
            expected = _BOUND_TYPES.get(name)
            if expected is int and (isinstance(bound, bool) or not isinstance(bound, int) or bound < 1):
                errors.append(f"{where}.bound: {name} needs a positive integer, got {bound!r}")
                continue
            if expected is bool and not isinstance(bound, bool):
                errors.append(f"{where}.bound: {name} needs a boolean, got {bound!r}")
                continue
            quality.append(QualityAttribute(name, bound, item.get("description", "")))
        if errors:
            raise ManifestError("; ".join(errors))
        return cls(functional, quality, str(doc.get("author_role", "")))

    def to_dict(self) -> dict:
        return {
            "author_role": self.author_role,
            "functional": [{"name": f.name, "description": f.description} for f in self.functional],
            "quality": [
                {"name": q.name, "bound": q.bound, "description": q.description}
                for q in self.quality
            ],
        }


@dataclass(frozen=True)
class FactorizationPlan:
    """What a factorization run will do, as far as the QSR checks care."""

    n: int
    num_qubits: int
    steps: tuple[tuple[str, StepKind], ...]
    verifies_product: bool = True


@dataclass(frozen=True)
class QualityCheck:
    name: str
    status: CheckStatus
    bound: Bound
    measured: Any = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status.value,
            "bound": self.bound,
            "measured": self.measured,
            "detail": self.detail,
        }


@dataclass
class QSRReport:
    checks: list[QualityCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.status is not CheckStatus.FAIL for c in self.checks)

    def check(self, name: str) -> QualityCheck:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def validate_qsr(manifest: QSRManifest, plan: FactorizationPlan) -> QSRReport:
    report = QSRReport()
    for attr in manifest.quality:
        if attr.name == "qubit_budget":
            ok = plan.num_qubits <= attr.bound
            report.checks.append(
                QualityCheck(
                    attr.name,
                    CheckStatus.PASS if ok else CheckStatus.FAIL,
                    attr.bound,
                    plan.num_qubits,
                    "" if ok else f"circuit needs {plan.num_qubits} qubits > budget {attr.bound}",
                )
            )
        elif attr.name == "split_required":
            kinds = {kind for _, kind in plan.steps}
            has_both = kinds >= {StepKind.CLASSICAL, StepKind.QUANTUM}
            ok = has_both or not attr.bound
            report.checks.append(
                QualityCheck(
                    attr.name,
                    CheckStatus.PASS if ok else CheckStatus.FAIL,
                    attr.bound,
                    sorted(k.value for k in kinds),
                    "" if ok else "plan does not split work between classical and quantum steps",
                )
            )
        elif attr.name == "validation_required":
            ok = plan.verifies_product or not attr.bound
            report.checks.append(
                QualityCheck(
                    attr.name,
                    CheckStatus.PASS if ok else CheckStatus.FAIL,
                    attr.bound,
                    plan.verifies_product,
                    "" if ok else "plan does not verify p * q == n",
                )
            )
        else:
            report.checks.append(
                QualityCheck(attr.name, CheckStatus.WARN, attr.bound, None, "no checker for this attribute")
            )
    return report


@dataclass(frozen=True)
class Node:
    node_id: str
    kind: StepKind


@dataclass
class DeploymentDescriptor:
    nodes: list[Node]
    assignments: dict[str, str]
    author_role: str = ""

    def node(self, node_id: str) -> Node | None:
        return next((n for n in self.nodes if n.node_id == node_id), None)

    @classmethod
    def from_dict(cls, doc: Any) -> "DeploymentDescriptor":
        if not isinstance(doc, dict):
            raise DeploymentError("descriptor: expected object")
        nodes = []
        for i, item in enumerate(doc.get("nodes", [])):
            try:
                nodes.append(Node(str(item["node_id"]), StepKind(item["kind"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise DeploymentError(f"nodes[{i}]: invalid node record ({exc})") from None
        ids = [n.node_id for n in nodes]
        if len(set(ids)) != len(ids):
            raise DeploymentError("nodes: duplicate node_id")
        raw = doc.get("assignments", {})
        if isinstance(raw, list):
            # [[service, node_id], ...] keeps duplicates visible.
            pairs = [tuple(p) for p in raw]
        elif isinstance(raw, dict):
            pairs = list(raw.items())
        else:
            raise DeploymentError("assignments: expected object")
        assignments: dict[str, str] = {}
        for service, node_id in pairs:
            if service in assignments:
                raise DeploymentError(f"assignments: service {service!r} assigned more than once")
            assignments[service] = node_id
        return cls(nodes, assignments, str(doc.get("author_role", "")))

    def to_dict(self) -> dict:
        return {
            "author_role": self.author_role,
            "nodes": [{"node_id": n.node_id, "kind": n.kind.value} for n in self.nodes],
            "assignments": dict(self.assignments),
        }


@dataclass(frozen=True)
class Misplacement:
    service: str
    required: StepKind
    node_id: str
    node_kind: StepKind

    def __str__(self) -> str:
        return (
            f"{self.service} is {self.required.value} but assigned to "
            f"{self.node_kind.value} node {self.node_id!r}"
        )


@dataclass
class DeploymentReport:
    misplaced: list[Misplacement] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.misplaced

    def to_dict(self) -> dict:
        return {"passed": self.passed, "misplaced": [str(m) for m in self.misplaced]}


def validate_deployment(
    descriptor: DeploymentDescriptor, classifications: Mapping[str, StepKind]
) -> DeploymentReport:
    """Check each classified service sits on a node of matching kind.

    Raises ``DeploymentError`` when a service has no assignment or points at
    an undeclared node.
    """
    report = DeploymentReport()
    for service, kind in classifications.items():
        if service not in descriptor.assignments:
            raise DeploymentError(f"service {service!r} has no node assignment")
        node_id = descriptor.assignments[service]
        node = descriptor.node(node_id)
        if node is None:
            raise DeploymentError(f"service {service!r} assigned to unknown node {node_id!r}")
        if node.kind is not kind:
            report.misplaced.append(Misplacement(service, kind, node_id, node.kind))
    return report


def _pairs_hook(pairs: list[tuple[str, Any]]) -> dict:
    keys = [k for k, _ in pairs]
    if len(set(keys)) != len(keys):
        dupes = sorted({k for k in keys if keys.count(k) > 1})
        raise DeploymentError(f"duplicate keys in document: {dupes}")
    return dict(pairs)


def _read(path: Union[str, Path, None], default_name: str) -> Any:
    if path is None:
        text = resources.files("qcaas.lifecycle").joinpath("data", default_name).read_text()
    else:
        text = Path(path).read_text()
    return json.loads(text, object_pairs_hook=_pairs_hook)


def load_qsr_manifest(path: Union[str, Path, None] = None) -> QSRManifest:
    """Load a manifest file, or the shipped factorization manifest when ``path`` is None."""
    try:
        return QSRManifest.from_dict(_read(path, "qsr_manifest.json"))
    except DeploymentError as exc:
        raise ManifestError(str(exc)) from None


def load_deployment(path: Union[str, Path, None] = None) -> DeploymentDescriptor:
    return DeploymentDescriptor.from_dict(_read(path, "deployment.json"))
