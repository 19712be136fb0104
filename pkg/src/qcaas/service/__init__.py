"""Job submission gateway, worker queue, billing ledger and durable job store."""

from .billing import BillingLedger, DuplicateCharge, LedgerEntry
from .config import BackendDescriptor, ConfigError, ServiceConfig, load_config
from .core import (
    BadRequest,
    CapacityExceeded,
    InvalidN,
    JobStatus,
    MalformedCircuit,
    NotFound,
    QCaaSService,
    QSRViolation,
    QuantumJob,
    ServiceError,
    UnknownBackend,
)

__all__ = [
    "BackendDescriptor",
    "BadRequest",
    "BillingLedger",
    "CapacityExceeded",
    "ConfigError",
    "DuplicateCharge",
    "InvalidN",
    "JobStatus",
    "LedgerEntry",
    "MalformedCircuit",
    "NotFound",
    "QCaaSService",
    "QSRViolation",
    "QuantumJob",
    "ServiceConfig",
    "ServiceError",
    "UnknownBackend",
    "load_config",
]
