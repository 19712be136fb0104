"""The QCaaS front door: backend registry, job queue and workers, pay-per-shot
billing, and factorization workflows run as tracked background tasks.
"""
from __future__ import annotations

import logging
import queue
import secrets
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Optional

from ..lifecycle import QSRManifest, QSRReport, load_qsr_manifest, validate_qsr
from ..orchestrator import (
    FactorizationError,
    FactorizationWorkflow,
    WorkflowState,
    classical_prechecks,
    is_prime,
    plan_factorization,
)
from ..qsim import Circuit, CircuitError, ShotResult, circuit_from_dict, circuit_to_dict, run_circuit
from ..shor import FactorizationRequest
from .billing import BillingLedger, DuplicateCharge, LedgerEntry
from .config import BackendDescriptor, ServiceConfig
from .store import EventLog

log = logging.getLogger(__name__)

MAX_N = 1 << 20


class ServiceError(Exception):
    code = "ServiceError"
    status = 400

    def __init__(self, message: str, diagnostics: list[str] | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or []

    def to_dict(self) -> dict:
        doc: dict[str, Any] = {"code": self.code, "message": str(self)}
        if self.diagnostics:
            doc["diagnostics"] = self.diagnostics
        return doc


class BadRequest(ServiceError):
    code = "BadRequest"


class InvalidN(ServiceError):
    code = "InvalidN"


class NotFound(ServiceError):
    code = "NotFound"
    status = 404


class UnknownBackend(ServiceError):
    code = "UnknownBackend"
    status = 404


class MalformedCircuit(ServiceError):
    code = "MalformedCircuit"
    status = 422


class CapacityExceeded(ServiceError):
    code = "CapacityExceeded"
    status = 422


class QSRViolation(ServiceError):
    code = "QSRViolation"
    status = 422


class ServiceStopping(RuntimeError):
    """Raised inside workflows parked on a job when the service shuts down."""


class JobStatus(str, Enum):
    QUEUED = "Queued"
    RUNNING = "Running"
    DONE = "Done"
    ERROR = "Error"


LEGAL_TRANSITIONS = {
    JobStatus.QUEUED: {JobStatus.RUNNING},
    JobStatus.RUNNING: {JobStatus.DONE, JobStatus.ERROR},
    JobStatus.DONE: set(),
    JobStatus.ERROR: set(),
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass
class QuantumJob:
    id: str
    tenant: str
    circuit: dict
    shots: int
    backend_id: str
    price_per_shot: int
    seed: int
    status: JobStatus = JobStatus.QUEUED
    result: Optional[ShotResult] = None
    cost: int = 0
    error: Optional[str] = None
    submitted_at: str = ""
    started_at: Optional[str] = None
    completed_at: Optional[str] = None
    finished: threading.Event = field(default_factory=threading.Event, repr=False, compare=False)

    def move(self, status: JobStatus) -> None:
        if status not in LEGAL_TRANSITIONS[self.status]:
            raise RuntimeError(f"job {self.id}: illegal transition {self.status.value} -> {status.value}")
        self.status = status

    def to_dict(self, with_circuit: bool = False) -> dict:
        doc = {
            "job_id": self.id,
            "tenant": self.tenant,
            "backend_id": self.backend_id,
            "shots": self.shots,
            "price_per_shot": self.price_per_shot,
            "seed": self.seed,
            "status": self.status.value,
            "result": None if self.result is None else self.result.to_dict(),
            "cost": self.cost,
            "error": self.error,
            "submitted_at": self.submitted_at,
            "started_at": self.started_at,
            "completed_at": self.completed_at,
        }
        if with_circuit:
            doc["circuit"] = self.circuit
        return doc


@dataclass
class WorkflowRecord:
    id: str
    tenant: str
    n: int
    options: dict
    status: str = "running"
    phase: str = "Init"
    attempt: int = 0
    result: Optional[dict] = None
    error: Optional[dict] = None
    trace: list = field(default_factory=list)
    job_ids: list = field(default_factory=list)
    qsr: Optional[dict] = None
    submitted_at: str = ""
    completed_at: Optional[str] = None
    done: threading.Event = field(default_factory=threading.Event, repr=False, compare=False)

    def to_dict(self, cost: int) -> dict:
        return {
            "workflow_id": self.id,
            "tenant": self.tenant,
            "n": self.n,
            "options": self.options,
            "status": self.status,
            "phase": self.phase,
            "attempt": self.attempt,
            "result": self.result,
            "error": self.error,
            "trace": self.trace,
            "job_ids": self.job_ids,
            "cost": cost,
            "qsr": self.qsr,
            "submitted_at": self.submitted_at,
            "completed_at": self.completed_at,
        }


_STOP = object()


class ServiceBackend:
    """Quantum backend handle that routes workflow jobs through the job service,
    so they are queued, persisted and billed like any other job."""

    def __init__(self, service: "QCaaSService", tenant: str, backend_id: str, qubit_budget: int | None) -> None:
        self._service = service
        self._tenant = tenant
        self._budget = qubit_budget
        self.backend_id = backend_id
        self.max_qubits = service.backend(backend_id).max_qubits
        self.job_ids: list[str] = []

    def submit(self, circuit: Circuit, shots: int, seed: int) -> str:
        job_id = self._service.submit_job(
            self._tenant,
            circuit_to_dict(circuit),
            shots,
            self.backend_id,
            seed=seed,
            qubit_budget=self._budget,
        )
        self.job_ids.append(job_id)
        return job_id

    def result(self, job_id: str) -> ShotResult:
        job = self._service.get_job(job_id)
        while not job.finished.wait(0.05):
            if self._service.stopping:
                raise ServiceStopping(f"service stopped while job {job_id} was pending")
        if job.status is not JobStatus.DONE:
            raise RuntimeError(f"job {job_id} failed: {job.error}")
        return job.result


class QCaaSService:
    """In-process service core; the HTTP layer in ``api`` is a thin wrapper.

    Construction replays the event log, so building a new instance over the
    same data directory is a restart.
    """

    def __init__(self, config: ServiceConfig, manifest: QSRManifest | None = None, start: bool = True) -> None:
        self.config = config
        self.manifest = manifest if manifest is not None else load_qsr_manifest(config.qsr_manifest)
        self._backends: dict[str, BackendDescriptor] = {b.id: b for b in config.backends}
        self._lock = threading.RLock()
        self._jobs: dict[str, QuantumJob] = {}
        self._workflows: dict[str, WorkflowRecord] = {}
        self.ledger = BillingLedger()
        self._queue: "queue.Queue[object]" = queue.Queue()
        self._threads: list[threading.Thread] = []
        self._workflow_pool: ThreadPoolExecutor | None = None
        self._stopping = threading.Event()
        self._log = EventLog(config.data_dir, fsync=config.fsync)
        self._replay()
        if start:
            self.start()

    # -- persistence -------------------------------------------------------

    def _replay(self) -> None:
        for ev in self._log.replay():
            kind = ev.get("type")
            if kind == "job_submitted":
                doc = ev["job"]
                job = QuantumJob(
                    id=doc["job_id"],
                    tenant=doc["tenant"],
                    circuit=doc["circuit"],
                    shots=doc["shots"],
                    backend_id=doc["backend_id"],
                    price_per_shot=doc["price_per_shot"],
                    seed=doc["seed"],
                    submitted_at=doc["submitted_at"],
                )
                self._jobs[job.id] = job
            elif kind == "job_started":
                job = self._jobs[ev["job_id"]]
                if job.status is JobStatus.QUEUED:
                    job.move(JobStatus.RUNNING)
                job.started_at = ev["at"]
            elif kind == "job_done":
                job = self._jobs[ev["job_id"]]
                job.move(JobStatus.DONE)
                job.result = ShotResult.from_dict(ev["result"])
                job.completed_at = ev["at"]
                entry = LedgerEntry(**ev["charge"])
                self.ledger.apply(entry)
                job.cost = entry.cost
                job.finished.set()
            elif kind == "job_failed":
                job = self._jobs[ev["job_id"]]
                job.move(JobStatus.ERROR)
                job.error = ev["error"]
                job.completed_at = ev["at"]
                job.finished.set()
            elif kind == "workflow_submitted":
                doc = ev["workflow"]
                self._workflows[doc["workflow_id"]] = WorkflowRecord(
                    id=doc["workflow_id"],
                    tenant=doc["tenant"],
                    n=doc["n"],
                    options=doc["options"],
                    qsr=doc.get("qsr"),
                    submitted_at=doc["submitted_at"],
                    # Anything not finished before the restart stays interrupted.
                    status="interrupted",
                )
            elif kind == "workflow_finished":
                rec = self._workflows[ev["workflow_id"]]
                rec.status = ev["status"]
                rec.phase = ev["phase"]
                rec.attempt = ev["attempt"]
                rec.result = ev.get("result")
                rec.error = ev.get("error")
                rec.trace = ev["trace"]
                rec.job_ids = ev["job_ids"]
                rec.completed_at = ev["at"]
                rec.done.set()
            else:
                log.warning("ignoring unknown event type %r", kind)
        for rec in self._workflows.values():
            if rec.status == "interrupted":
                rec.error = {"code": "Interrupted", "message": "service restarted while the workflow ran"}
                rec.done.set()
        # Queued and in-flight jobs resume in submission order.
        for job in self._jobs.values():
            if job.status in (JobStatus.QUEUED, JobStatus.RUNNING):
                self._queue.put(job.id)

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        if self._threads or self._workflow_pool is not None:
            return
        for i in range(self.config.workers):
            t = threading.Thread(target=self._worker, name=f"qcaas-worker-{i}", daemon=True)
            t.start()
            self._threads.append(t)
        self._workflow_pool = ThreadPoolExecutor(
            self.config.workflow_workers, thread_name_prefix="qcaas-workflow"
        )

    @property
    def stopping(self) -> bool:
        return self._stopping.is_set()

    def stop(self) -> None:
        self._stopping.set()
        for _ in self._threads:
            self._queue.put(_STOP)
        for t in self._threads:
            t.join()
        self._threads = []
        if self._workflow_pool is not None:
            self._workflow_pool.shutdown(wait=True)
            self._workflow_pool = None
        self._log.close()

    # -- registry ------------------------------------------------------------

    def list_backends(self) -> list[BackendDescriptor]:
        return [self._backends[k] for k in sorted(self._backends)]

    def register_backend(self, descriptor: BackendDescriptor) -> None:
        if descriptor.max_qubits > self.config.simulator_max_qubits:
            raise ValueError(
                f"backend {descriptor.id!r} exceeds the simulator cap of {self.config.simulator_max_qubits}"
            )
        with self._lock:
            self._backends[descriptor.id] = descriptor

    def backend(self, backend_id: str) -> BackendDescriptor:
        try:
            return self._backends[backend_id]
        except KeyError:
            raise UnknownBackend(f"unknown backend {backend_id!r}") from None

    # -- jobs ----------------------------------------------------------------

    def submit_job(
        self,
        tenant: str,
        circuit: Any,
        shots: Any,
        backend_id: str,
        seed: int | None = None,
        qubit_budget: int | None = None,
    ) -> str:
        """Validate at the gateway, persist as Queued and enqueue; returns the job id."""
        if not isinstance(tenant, str) or not tenant:
            raise BadRequest("tenant must be a non-empty string")
        if not isinstance(shots, int) or isinstance(shots, bool) or shots < 1:
            raise BadRequest(f"shots must be a positive integer, got {shots!r}")
        if shots > self.config.max_shots:
            raise BadRequest(f"shots must be <= {self.config.max_shots}")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
            raise BadRequest(f"seed must be a non-negative integer, got {seed!r}")
        descriptor = self.backend(backend_id)
        try:
            parsed = circuit_from_dict(circuit)
        except CircuitError as exc:
            raise MalformedCircuit("circuit failed validation", exc.diagnostics) from None
        if not parsed.measurements:
            raise MalformedCircuit("circuit failed validation", ["ops: no measure ops, nothing to sample"])
        if parsed.num_qubits > descriptor.max_qubits:
            raise CapacityExceeded(
                f"circuit needs {parsed.num_qubits} qubits, backend {backend_id!r} has {descriptor.max_qubits}"
            )
        if qubit_budget is not None and parsed.num_qubits > qubit_budget:
            raise QSRViolation(
                f"circuit needs {parsed.num_qubits} qubits, QSR qubit budget is {qubit_budget}"
            )
        job = QuantumJob(
            id=uuid.uuid4().hex,
            tenant=tenant,
            circuit=circuit_to_dict(parsed),
            shots=shots,
            backend_id=backend_id,
            price_per_shot=descriptor.price_per_shot,
            seed=secrets.randbits(63) if seed is None else seed,
            submitted_at=_now(),
        )
        with self._lock:
            self._log.append({"type": "job_submitted", "job": job.to_dict(with_circuit=True)})
            self._jobs[job.id] = job
        self._queue.put(job.id)
        return job.id

    def get_job(self, job_id: str) -> QuantumJob:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise NotFound(f"no job {job_id!r}") from None

    def poll_job(self, job_id: str) -> dict:
        with self._lock:
            return self.get_job(job_id).to_dict()

    def wait_job(self, job_id: str, timeout: float | None = None) -> QuantumJob:
        job = self.get_job(job_id)
        if not job.finished.wait(timeout):
            raise TimeoutError(f"job {job_id} still {job.status.value}")
        return job

    def jobs(self) -> list[QuantumJob]:
        with self._lock:
            return list(self._jobs.values())

    def _lease(self, job_id: str) -> QuantumJob | None:
        with self._lock:
            job = self._jobs[job_id]
            if job.status is JobStatus.QUEUED:
                job.move(JobStatus.RUNNING)
            elif job.status is not JobStatus.RUNNING:
                return None
            job.started_at = _now()
            self._log.append({"type": "job_started", "job_id": job.id, "at": job.started_at})
            return job

    def _execute(self, job: QuantumJob) -> ShotResult:
        circuit = circuit_from_dict(job.circuit)
        return run_circuit(circuit, job.shots, job.seed, self.config.simulator_max_qubits)

    def _worker(self) -> None:
        while True:
            item = self._queue.get()
            if item is _STOP:
                return
            job = self._lease(item)
            if job is None:
                continue
            try:
                result = self._execute(job)
            except Exception as exc:
                log.exception("job %s failed", job.id)
                self._fail(job, f"{type(exc).__name__}: {exc}")
            else:
                self._complete(job, result)

    def _complete(self, job: QuantumJob, result: ShotResult) -> None:
        with self._lock:
            entry = self.ledger.entry_for(job.tenant, job.id, job.shots, job.price_per_shot)
            at = _now()
            # One record carries both the Done transition and its charge.
            self._log.append(
                {
                    "type": "job_done",
                    "job_id": job.id,
                    "at": at,
                    "result": result.to_dict(),
                    "charge": entry.to_dict(),
                }
            )
            job.move(JobStatus.DONE)
            job.result = result
            job.completed_at = at
            self.ledger.apply(entry)
            job.cost = entry.cost
        job.finished.set()

    def _fail(self, job: QuantumJob, error: str) -> None:
        with self._lock:
            at = _now()
            self._log.append({"type": "job_failed", "job_id": job.id, "at": at, "error": error})
            job.move(JobStatus.ERROR)
            job.error = error
            job.completed_at = at
        job.finished.set()

    # -- billing -------------------------------------------------------------

    def charge(self, job_id: str) -> LedgerEntry:
        """Charge a Done job. Completion already charges, so repeats raise ``DuplicateCharge``."""
        with self._lock:
            job = self.get_job(job_id)
            if job.status is not JobStatus.DONE:
                raise BadRequest(f"job {job_id} is {job.status.value}, only Done jobs are charged")
            return self.ledger.charge(job.tenant, job.id, job.shots, job.price_per_shot)

    def billing(self, tenant: str) -> dict:
        with self._lock:
            return {
                "tenant": tenant,
                "total": self.ledger.total(tenant),
                "entries": [e.to_dict() for e in self.ledger.tenant_entries(tenant)],
            }

    # -- factorization workflows --------------------------------------------

    def factorize(
        self,
        tenant: str,
        n: Any,
        max_attempts: Any = 10,
        shots_per_attempt: Any = 1024,
        backend_id: str = "local-sim-fast",
        seed: Any = None,
    ) -> str:
        if not isinstance(tenant, str) or not tenant:
            raise BadRequest("tenant must be a non-empty string")
        if not isinstance(n, int) or isinstance(n, bool) or not 3 <= n < MAX_N:
            raise InvalidN(f"n must be an integer with 3 <= n < {MAX_N}, got {n!r}")
        for name, value, hi in (
            ("max_attempts", max_attempts, 1000),
            ("shots_per_attempt", shots_per_attempt, self.config.max_shots),
        ):
            if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= hi:
                raise BadRequest(f"{name} must be an integer in [1, {hi}], got {value!r}")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
            raise BadRequest(f"seed must be a non-negative integer, got {seed!r}")
        descriptor = self.backend(backend_id)
        if self._workflow_pool is None:
            raise RuntimeError("service is not started")

        qsr: QSRReport | None = None
        needs_quantum = classical_prechecks(n) is None and not is_prime(n)
        if needs_quantum:
            plan = plan_factorization(n)
            qsr = validate_qsr(self.manifest, plan)
            if not qsr.passed:
                failed = [c.detail or c.name for c in qsr.checks if c.status.value == "fail"]
                raise QSRViolation("plan violates the QSR manifest", failed)
            if plan.num_qubits > descriptor.max_qubits:
                raise CapacityExceeded(
                    f"factoring {n} needs {plan.num_qubits} qubits, backend {backend_id!r} has {descriptor.max_qubits}"
                )

        request = FactorizationRequest(
            n=n,
            max_attempts=max_attempts,
            shots_per_attempt=shots_per_attempt,
            backend_id=backend_id,
            seed=secrets.randbits(63) if seed is None else seed,
        )
        rec = WorkflowRecord(
            id=uuid.uuid4().hex,
            tenant=tenant,
            n=n,
            options={
                "max_attempts": max_attempts,
                "shots_per_attempt": shots_per_attempt,
                "backend_id": backend_id,
                "seed": request.seed,
            },
            qsr=None if qsr is None else qsr.to_dict(),
            submitted_at=_now(),
        )
        with self._lock:
            self._log.append(
                {
                    "type": "workflow_submitted",
                    "workflow": {
                        "workflow_id": rec.id,
                        "tenant": tenant,
                        "n": n,
                        "options": rec.options,
                        "qsr": rec.qsr,
                        "submitted_at": rec.submitted_at,
                    },
                }
            )
            self._workflows[rec.id] = rec
        self._workflow_pool.submit(self._run_workflow, rec, request)
        return rec.id

    def _run_workflow(self, rec: WorkflowRecord, request: FactorizationRequest) -> None:
        backend = ServiceBackend(self, rec.tenant, request.backend_id, self.manifest.qubit_budget)

        def on_change(state: WorkflowState) -> None:
            with self._lock:
                rec.phase = state.phase.value
                rec.attempt = state.attempt
                rec.trace = [r.to_dict() for r in state.trace]
                rec.job_ids = list(backend.job_ids)

        workflow = FactorizationWorkflow(request, backend, on_change=on_change)
        status, result, error = "failed", None, None
        try:
            outcome = workflow.run()
            status, result = "succeeded", {
                "p": outcome.p,
                "q": outcome.q,
                "attempts_used": outcome.attempts_used,
                "total_shots": outcome.total_shots,
            }
        except FactorizationError as exc:
            if isinstance(exc.__cause__, ServiceStopping):
                # Not logged as finished: the restarted service reports it interrupted.
                with self._lock:
                    rec.status = "interrupted"
                    rec.error = {"code": "Interrupted", "message": str(exc.__cause__)}
                rec.done.set()
                return
            error = {"code": exc.code, "message": str(exc)}
        except Exception as exc:  # surfaced to the client rather than lost in a thread
            log.exception("workflow %s crashed", rec.id)
            error = {"code": "InternalError", "message": f"{type(exc).__name__}: {exc}"}
        with self._lock:
            rec.status = status
            rec.phase = workflow.state.phase.value
            rec.attempt = workflow.state.attempt
            rec.result = result
            rec.error = error
            rec.trace = [r.to_dict() for r in workflow.state.trace]
            rec.job_ids = list(backend.job_ids)
            rec.completed_at = _now()
            self._log.append(
                {
                    "type": "workflow_finished",
                    "workflow_id": rec.id,
                    "status": rec.status,
                    "phase": rec.phase,
                    "attempt": rec.attempt,
                    "result": rec.result,
                    "error": rec.error,
                    "trace": rec.trace,
                    "job_ids": rec.job_ids,
                    "at": rec.completed_at,
                }
            )
        rec.done.set()

    def get_workflow(self, workflow_id: str) -> WorkflowRecord:
        try:
            return self._workflows[workflow_id]
        except KeyError:
            raise NotFound(f"no workflow {workflow_id!r}") from None

    def workflow_cost(self, rec: WorkflowRecord) -> int:
        return sum(self._jobs[j].cost for j in rec.job_ids if j in self._jobs)

    def poll_workflow(self, workflow_id: str) -> dict:
        with self._lock:
            rec = self.get_workflow(workflow_id)
            return rec.to_dict(self.workflow_cost(rec))

    def wait_workflow(self, workflow_id: str, timeout: float | None = None) -> dict:
        rec = self.get_workflow(workflow_id)
        if not rec.done.wait(timeout):
            raise TimeoutError(f"workflow {workflow_id} still running")
        return self.poll_workflow(workflow_id)


__all__ = [
    "BadRequest",
    "CapacityExceeded",
    "DuplicateCharge",
    "InvalidN",
    "JobStatus",
    "LEGAL_TRANSITIONS",
    "MalformedCircuit",
    "NotFound",
    "QCaaSService",
    "QSRViolation",
    "QuantumJob",
    "ServiceBackend",
    "ServiceError",
    "ServiceStopping",
    "UnknownBackend",
    "WorkflowRecord",
]
