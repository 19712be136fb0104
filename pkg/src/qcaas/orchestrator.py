"""The Controller: a workflow that factors n by sequencing classical and
quantum services, never letting a classical step touch the quantum backend.
"""
from __future__ import annotations

import contextlib
import logging
import secrets
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterator, Optional, Protocol

import numpy as np

from .kinds import StepKind
from .lifecycle import FactorizationPlan
from .qsim import Circuit, ShotResult, run_circuit
from .qsim.state import MAX_QUBITS
from .shor import (
    AttemptRecord,
    FactorizationRequest,
    FactorizationResult,
    append_phase_readout,
    continued_fractions,
    default_counting_width,
    extract_factors,
    gcd,
    generate_base,
    order_finding_registers,
    prepare_order_finding,
    repair_candidate,
    work_register_width,
)

log = logging.getLogger(__name__)

# The design model: which services the factorization workflow is built from
# and where each must run.
WORKFLOW_SERVICES: dict[str, StepKind] = {
    "NumGenerator": StepKind.CLASSICAL,
    "GetGCD": StepKind.CLASSICAL,
    "Controller": StepKind.CLASSICAL,
    "QunatumModularExponentiation": StepKind.QUANTUM,
    "QunatumInverseQFT": StepKind.QUANTUM,
    "Factorise": StepKind.QUANTUM,
}


class FactorizationError(Exception):
    code = "FactorizationError"


class InvalidN(FactorizationError):
    code = "InvalidN"


class NoNontrivialFactors(FactorizationError):
    code = "NoNontrivialFactors"


class AttemptsExhausted(FactorizationError):
    code = "AttemptsExhausted"

    def __init__(self, n: int, trace: list[AttemptRecord]) -> None:
        self.trace = list(trace)
        super().__init__(f"no factors of {n} found in {len(trace)} attempts")


class BackendFailure(FactorizationError):
    code = "BackendFailure"

    def __init__(self, attempt: int, cause: BaseException) -> None:
        self.attempt = attempt
        self.cause = cause
        super().__init__(f"attempt {attempt}: backend failed: {cause}")


class SplitViolation(RuntimeError):
    """A classical step tried to reach the quantum backend."""


def classify_step(service_name: str) -> StepKind:
    try:
        return WORKFLOW_SERVICES[service_name]
    except KeyError:
        raise KeyError(f"unknown workflow service {service_name!r}") from None


class QuantumBackend(Protocol):
    backend_id: str
    max_qubits: int

    def submit(self, circuit: Circuit, shots: int, seed: int) -> str:
        """Queue a job and return its id."""

    def result(self, job_id: str) -> ShotResult:
        """Block until the job finishes and return its outcome."""


class LocalBackend:
    """In-process simulator with sequential job ids; no queue, no billing."""

    def __init__(self, backend_id: str = "local", max_qubits: int = MAX_QUBITS) -> None:
        self.backend_id = backend_id
        self.max_qubits = max_qubits
        self._results: dict[str, ShotResult] = {}

    def submit(self, circuit: Circuit, shots: int, seed: int) -> str:
        job_id = f"{self.backend_id}-{len(self._results) + 1:04d}"
        self._results[job_id] = run_circuit(circuit, shots, seed, self.max_qubits)
        return job_id

    def result(self, job_id: str) -> ShotResult:
        return self._results.pop(job_id)


class Phase(str, Enum):
    INIT = "Init"
    CLASSICAL_PRE = "ClassicalPre"
    QUANTUM_SUBMITTED = "QuantumSubmitted"
    POST_PROCESSING = "PostProcessing"
    SUCCEEDED = "Succeeded"
    FAILED = "Failed"


@dataclass
class WorkflowState:
    max_attempts: int
    phase: Phase = Phase.INIT
    attempt: int = 0
    current_base: Optional[int] = None
    pending_job: Optional[str] = None
    current_step: Optional[str] = None
    trace: list[AttemptRecord] = field(default_factory=list)

    def check(self) -> None:
        assert self.attempt <= self.max_attempts
        assert (self.pending_job is not None) == (self.phase is Phase.QUANTUM_SUBMITTED)

    def to_dict(self) -> dict:
        return {
            "phase": self.phase.value,
            "attempt": self.attempt,
            "current_base": self.current_base,
            "pending_job": self.pending_job,
            "current_step": self.current_step,
            "trace": [rec.to_dict() for rec in self.trace],
        }


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def integer_root(n: int, e: int) -> int:
    """Largest b with b**e <= n."""
    lo, hi = 0, 1 << (n.bit_length() // e + 1)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if mid**e <= n:
            lo = mid
        else:
            hi = mid - 1
    return lo


def classical_prechecks(n: int) -> Optional[FactorizationResult]:
    """Factor the cases that need no quantum step (even n, perfect powers)."""
    if n < 3:
        raise InvalidN(f"n must be >= 3, got {n}")
    if n % 2 == 0:
        return FactorizationResult(n, 2, n // 2)
    for e in range(n.bit_length(), 1, -1):
        b = integer_root(n, e)
        if b >= 2 and b**e == n:
            return FactorizationResult(n, b, n // b)
    return None


def plan_factorization(n: int, n_count: int | None = None) -> FactorizationPlan:
    n_count = default_counting_width(n) if n_count is None else n_count
    return FactorizationPlan(
        n=n,
        num_qubits=n_count + work_register_width(n),
        steps=tuple(WORKFLOW_SERVICES.items()),
        verifies_product=True,
    )


class FactorizationWorkflow:
    """One factorization run.

    ``on_change`` is called with the state after every transition; the job
    service uses it to expose progress.
    """

    def __init__(
        self,
        request: FactorizationRequest,
        backend: QuantumBackend,
        on_change: Callable[[WorkflowState], None] | None = None,
        n_count: int | None = None,
    ) -> None:
        self.request = request
        self.seed = request.seed if request.seed is not None else secrets.randbits(63)
        self.n_count = default_counting_width(request.n) if n_count is None else n_count
        self.state = WorkflowState(max_attempts=request.max_attempts)
        self._backend = backend
        self._max_qubits = backend.max_qubits
        self._on_change = on_change
        self._rng = np.random.default_rng(self.seed)

    def _emit(self) -> None:
        self.state.check()
        if self._on_change is not None:
            self._on_change(self.state)

    def _move(self, phase: Phase, **changes) -> None:
        self.state.phase = phase
        for key, value in changes.items():
            setattr(self.state, key, value)
        self._emit()

    @contextlib.contextmanager
    def step(self, service: str) -> Iterator[StepKind]:
        kind = classify_step(service)
        outer = self.state.current_step
        self.state.current_step = service
        try:
            yield kind
        finally:
            self.state.current_step = outer

    def backend(self) -> QuantumBackend:
        """The quantum backend, available only inside a quantum step."""
        current = self.state.current_step
        if current is None or classify_step(current) is not StepKind.QUANTUM:
            raise SplitViolation(f"step {current!r} is not quantum and may not use the backend")
        return self._backend

    def _finish(self, p: int, q: int) -> FactorizationResult:
        with self.step("Controller"):
            # Validation QSR: never report an unchecked pair.
            if p * q != self.request.n:
                raise AssertionError(f"{p} * {q} != {self.request.n}")
            result = FactorizationResult(
                self.request.n,
                p,
                q,
                attempts_used=len(self.state.trace),
                total_shots=sum(rec.shots for rec in self.state.trace),
                trace=tuple(self.state.trace),
            )
        self._move(Phase.SUCCEEDED, current_base=None)
        return result

    def run(self) -> FactorizationResult:
        n = self.request.n
        self._move(Phase.CLASSICAL_PRE)
        with self.step("Controller"):
            early = classical_prechecks(n)
            if early is None and is_prime(n):
                self._move(Phase.FAILED)
                raise NoNontrivialFactors(f"{n} is prime")
        if early is not None:
            return self._finish(early.p, early.q)

        while self.state.attempt < self.request.max_attempts:
            record = self._attempt()
            self.state.trace.append(record)
            if record.disposition in ("lucky_gcd", "factored"):
                if record.disposition == "lucky_gcd":
                    p, q = sorted((record.gcd, n // record.gcd))
                else:
                    p, q = extract_factors(record.base, record.order, n)
                return self._finish(p, q)
            self._emit()
        self._move(Phase.FAILED, current_base=None)
        raise AttemptsExhausted(n, self.state.trace)

    def _attempt(self) -> AttemptRecord:
        n = self.request.n
        self._move(Phase.CLASSICAL_PRE, attempt=self.state.attempt + 1, current_base=None)
        attempt = self.state.attempt
        with self.step("NumGenerator"):
            a = generate_base(n, self._rng)
            job_seed = int(self._rng.integers(0, 2**63))
        self.state.current_base = a
        with self.step("GetGCD"):
            g = gcd(a, n)
        record = AttemptRecord(attempt=attempt, base=a, gcd=g)
        if g > 1:
            log.debug("attempt %d: lucky gcd(%d, %d) = %d", attempt, a, n, g)
            return replace(record, disposition="lucky_gcd")

        with self.step("QunatumModularExponentiation"):
            circuit = prepare_order_finding(a, n, self.n_count, self._max_qubits)
        with self.step("QunatumInverseQFT"):
            counting, _ = order_finding_registers(n, self.n_count)
            append_phase_readout(circuit, counting)
        with self.step("Factorise"):
            backend = self.backend()
            shots = self.request.shots_per_attempt
            try:
                job_id = backend.submit(circuit, shots, job_seed)
                self._move(Phase.QUANTUM_SUBMITTED, pending_job=job_id)
                outcome = backend.result(job_id)
            except Exception as exc:
                self.state.pending_job = None
                self._move(Phase.FAILED)
                raise BackendFailure(attempt, exc) from exc
            del backend
        self._move(Phase.POST_PROCESSING, pending_job=None)

        with self.step("Controller"):
            y = int(outcome.mode(), 2)
            record = replace(record, job_id=job_id, shots=shots, modal_y=y)
            if y == 0:
                return replace(record, disposition="zero_phase")
            candidates = continued_fractions(y, 1 << self.n_count, n)
            record = replace(record, candidates=tuple(c.convergent for c in candidates))
            # Every convergent gets a chance before the shots are written off.
            disposition, order = "no_order", None
            for cand in candidates:
                r = repair_candidate(a, cand.r, n)
                if r is None:
                    continue
                order = r
                if r % 2:
                    disposition = "odd_order"
                elif extract_factors(a, r, n) is None:
                    disposition = "trivial_root"
                else:
                    disposition = "factored"
                    break
            return replace(record, order=order, disposition=disposition)


def run_factorization(
    request: FactorizationRequest,
    backend: QuantumBackend,
    on_change: Callable[[WorkflowState], None] | None = None,
) -> FactorizationResult:
    """Factor ``request.n``; raises ``NoNontrivialFactors`` for primes and
    ``AttemptsExhausted`` (carrying the trace) when every attempt fails."""
    return FactorizationWorkflow(request, backend, on_change).run()
