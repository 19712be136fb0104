"""Service configuration: a JSON document plus environment overrides.

``QCAAS_PORT`` and ``QCAAS_DATA_DIR`` win over whatever the file says.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

from ..qsim.state import MAX_QUBITS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BackendDescriptor:
    id: str
    max_qubits: int
    price_per_shot: int
    display_name: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "display_name": self.display_name,
            "max_qubits": self.max_qubits,
            "price_per_shot": self.price_per_shot,
        }


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8750
    data_dir: Path = Path("./qcaas-data")
    simulator_max_qubits: int = MAX_QUBITS
    workers: int = 2
    workflow_workers: int = 4
    max_shots: int = 1_000_000
    fsync: bool = True
    backends: list[BackendDescriptor] = field(default_factory=list)
    qsr_manifest: Path | None = None

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        if not 1 <= self.simulator_max_qubits <= MAX_QUBITS:
            raise ConfigError(
                f"simulator_max_qubits must be in [1, {MAX_QUBITS}], got {self.simulator_max_qubits}"
            )
        if self.workers < 0 or self.workflow_workers < 1:
            raise ConfigError("workers must be >= 0 and workflow_workers >= 1")
        seen = set()
        for b in self.backends:
            if b.id in seen:
                raise ConfigError(f"duplicate backend id {b.id!r}")
            seen.add(b.id)
            if not 1 <= b.max_qubits <= self.simulator_max_qubits:
                raise ConfigError(
                    f"backend {b.id!r}: max_qubits {b.max_qubits} outside [1, {self.simulator_max_qubits}]"
                )
            if not isinstance(b.price_per_shot, int) or b.price_per_shot < 0:
                raise ConfigError(f"backend {b.id!r}: price_per_shot must be a non-negative integer")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ServiceConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(doc)
        try:
            kwargs["backends"] = [BackendDescriptor(**b) for b in doc.get("backends", [])]
        except TypeError as exc:
            raise ConfigError(f"bad backend declaration: {exc}") from None
        if kwargs.get("qsr_manifest") is not None:
            kwargs["qsr_manifest"] = Path(kwargs["qsr_manifest"])
        return cls(**kwargs)


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> ServiceConfig:
    """Read ``path`` (or the shipped defaults) and apply environment overrides."""
    env = os.environ if env is None else env
    if path is None:
        doc = json.loads(resources.files("qcaas.service").joinpath("default_config.json").read_text())
    else:
        doc = json.loads(Path(path).read_text())
    if env.get("QCAAS_PORT"):
        doc["port"] = int(env["QCAAS_PORT"])
    if env.get("QCAAS_DATA_DIR"):
        doc["data_dir"] = env["QCAAS_DATA_DIR"]
    return ServiceConfig.from_dict(doc)
