"""Machine-readable lifecycle artifacts: QSR manifests and deployment descriptors."""

from .artifacts import (
    CheckStatus,
    DeploymentDescriptor,
    DeploymentError,
    DeploymentReport,
    FactorizationPlan,
    FunctionalRequirement,
    ManifestError,
    Node,
    QSRManifest,
    QSRReport,
    QualityAttribute,
    QualityCheck,
    load_deployment,
    load_qsr_manifest,
    validate_deployment,
    validate_qsr,
)

__all__ = [
    "CheckStatus",
    "DeploymentDescriptor",
    "DeploymentError",
    "DeploymentReport",
    "FactorizationPlan",
    "FunctionalRequirement",
    "ManifestError",
    "Node",
    "QSRManifest",
    "QSRReport",
    "QualityAttribute",
    "QualityCheck",
    "load_deployment",
    "load_qsr_manifest",
    "validate_deployment",
    "validate_qsr",
]
