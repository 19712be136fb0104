import json

import numpy as np
import pytest

from qcaas.kinds import StepKind
from qcaas.orchestrator import (
    AttemptsExhausted,
    BackendFailure,
    FactorizationWorkflow,
    LocalBackend,
    NoNontrivialFactors,
    Phase,
    SplitViolation,
    classical_prechecks,
    classify_step,
    is_prime,
    run_factorization,
)
from qcaas.qsim import ShotResult
from qcaas.shor import FactorizationRequest


class RecordingBackend(LocalBackend):
    """Local simulator that logs which workflow step each call came from."""

    def __init__(self):
        super().__init__("recorder")
        self.workflow = None
        self.calls = []

    def submit(self, circuit, shots, seed):
        self.calls.append(("submit", self.workflow.state.current_step))
        return super().submit(circuit, shots, seed)

    def result(self, job_id):
        self.calls.append(("result", self.workflow.state.current_step))
        return super().result(job_id)


class ZeroPhaseBackend(LocalBackend):
    """Always reports y = 0, the one outcome that carries no period."""

    def result(self, job_id):
        out = super().result(job_id)
        return ShotResult(out.shots, {"0" * out.num_clbits: out.shots}, out.seed, out.num_clbits)


class BrokenBackend(LocalBackend):
    def submit(self, circuit, shots, seed):
        raise RuntimeError("device offline")


def run_recorded(request):
    backend = RecordingBackend()
    wf = FactorizationWorkflow(request, backend)
    backend.workflow = wf
    return wf, wf.run(), backend.calls


def first_seed_with_base(n, base):
    for seed in range(10_000):
        if int(np.random.default_rng(seed).integers(2, n - 1)) == base:
            return seed
    raise AssertionError("no seed found")


@pytest.mark.parametrize("n,factors", [(15, (3, 5)), (21, (3, 7))])
def test_end_to_end(n, factors):
    result = run_factorization(FactorizationRequest(n, seed=11), LocalBackend())
    assert (result.p, result.q) == factors
    assert result.p * result.q == n
    assert result.attempts_used == len(result.trace) <= 10
    assert result.total_shots == sum(rec.shots for rec in result.trace)


def test_lucky_gcd_short_circuit():
    seed = first_seed_with_base(35, 10)
    result = run_factorization(FactorizationRequest(35, seed=seed), LocalBackend())
    assert (result.p, result.q) == (5, 7)
    assert result.total_shots == 0
    (rec,) = result.trace
    assert (rec.base, rec.gcd, rec.shots, rec.disposition) == (10, 5, 0, "lucky_gcd")


@pytest.mark.parametrize("n,want", [(16, (2, 8)), (27, (3, 9)), (49, (7, 7)), (15, None), (21, None)])
def test_classical_prechecks(n, want):
    out = classical_prechecks(n)
    assert (None if out is None else (out.p, out.q)) == want


@pytest.mark.parametrize("n", [16, 27])
def test_prechecked_numbers_use_no_attempts(n):
    result = run_factorization(FactorizationRequest(n, seed=0), BrokenBackend())
    assert result.attempts_used == 0 and result.trace == ()


@pytest.mark.parametrize("n", [3, 13, 97, 1009])
def test_prime_fails_fast(n):
    backend = RecordingBackend()
    wf = FactorizationWorkflow(FactorizationRequest(n, seed=0), backend)
    backend.workflow = wf
    with pytest.raises(NoNontrivialFactors):
        wf.run()
    assert backend.calls == []
    assert wf.state.phase is Phase.FAILED


def test_is_prime_matches_sieve():
    sieve = np.ones(2000, dtype=bool)
    sieve[:2] = False
    for i in range(2, 45):
        sieve[i * i :: i] = False
    assert [is_prime(k) for k in range(2000)] == sieve.tolist()


@pytest.mark.parametrize(
    "name,kind",
    [
        ("NumGenerator", StepKind.CLASSICAL),
        ("GetGCD", StepKind.CLASSICAL),
        ("Controller", StepKind.CLASSICAL),
        ("QunatumModularExponentiation", StepKind.QUANTUM),
        ("QunatumInverseQFT", StepKind.QUANTUM),
        ("Factorise", StepKind.QUANTUM),
    ],
)
def test_classify_step(name, kind):
    assert classify_step(name) is kind


def test_classify_unknown_step():
    with pytest.raises(KeyError):
        classify_step("Telemetry")


def test_backend_only_used_in_quantum_steps():
    total = 0
    for seed in range(10):
        _, result, calls = run_recorded(FactorizationRequest(21, seed=seed))
        assert all(classify_step(step) is StepKind.QUANTUM for _, step in calls)
        assert len(calls) == 2 * sum(1 for rec in result.trace if rec.shots)
        total += len(calls)
    assert total > 0


def test_classical_step_cannot_reach_backend():
    wf = FactorizationWorkflow(FactorizationRequest(15, seed=0), LocalBackend())
    with pytest.raises(SplitViolation):
        wf.backend()
    with wf.step("GetGCD"), pytest.raises(SplitViolation):
        wf.backend()
    with wf.step("Factorise"):
        assert wf.backend() is not None


def test_trace_attempts_monotone():
    for seed in range(20):
        result = run_factorization(FactorizationRequest(21, seed=seed), LocalBackend())
        assert [rec.attempt for rec in result.trace] == list(range(1, result.attempts_used + 1))
        for rec in result.trace:
            if rec.gcd > 1:
                assert rec.shots == 0 and rec.job_id is None


def test_trace_is_deterministic():
    def dump(seed):
        result = run_factorization(FactorizationRequest(21, seed=seed), LocalBackend())
        return json.dumps(result.to_dict(), sort_keys=True).encode()

    assert dump(5) == dump(5)


def test_attempts_exhausted_carries_trace():
    # Seeds whose bases all happen to be coprime to 21 exhaust their attempts.
    exhausted = 0
    for seed in range(10):
        request = FactorizationRequest(21, max_attempts=3, shots_per_attempt=8, seed=seed)
        wf = FactorizationWorkflow(request, ZeroPhaseBackend())
        try:
            wf.run()
        except AttemptsExhausted as exc:
            exhausted += 1
            assert [rec.attempt for rec in exc.trace] == [1, 2, 3]
            assert all(rec.disposition == "zero_phase" for rec in exc.trace)
            assert wf.state.phase is Phase.FAILED
        else:
            assert wf.state.trace[-1].disposition == "lucky_gcd"
    assert exhausted > 0


def test_backend_failure_has_attempt_context():
    request = FactorizationRequest(21, seed=first_seed_with_base(21, 2))
    with pytest.raises(BackendFailure) as info:
        run_factorization(request, BrokenBackend())
    assert info.value.attempt == 1
    assert "device offline" in str(info.value)


def test_state_transitions_observed():
    phases = []
    request = FactorizationRequest(15, seed=3)
    result = run_factorization(request, LocalBackend(), on_change=lambda s: phases.append(s.phase))
    assert phases[-1] is Phase.SUCCEEDED
    if result.total_shots:
        i = phases.index(Phase.QUANTUM_SUBMITTED)
        assert phases[i + 1] is Phase.POST_PROCESSING
