"""Shor factoring pieces: base generation, GCD, the order-finding circuit and
classical post-processing of measured phases.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .qsim import Circuit, ControlledPermutation, CircuitError, inverse_qft_ops
from .qsim.state import MAX_QUBITS


@dataclass(frozen=True)
class FactorizationRequest:
    n: int
    max_attempts: int = 10
    shots_per_attempt: int = 1024
    backend_id: str = "local-sim-fast"
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ValueError(f"n must be >= 3, got {self.n}")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.shots_per_attempt < 1:
            raise ValueError("shots_per_attempt must be >= 1")


@dataclass(frozen=True)
class PhaseEstimate:
    y: int
    n_count: int

    def __post_init__(self) -> None:
        if not 0 <= self.y < (1 << self.n_count):
            raise ValueError(f"y={self.y} outside [0, 2^{self.n_count})")

    @property
    def q(self) -> int:
        return 1 << self.n_count


@dataclass(frozen=True)
class PeriodCandidate:
    s: int
    r: int

    @property
    def convergent(self) -> tuple[int, int]:
        return (self.s, self.r)


@dataclass(frozen=True)
class AttemptRecord:
    attempt: int
    base: int
    gcd: int
    shots: int = 0
    job_id: Optional[str] = None
    modal_y: Optional[int] = None
    candidates: tuple[tuple[int, int], ...] = ()
    order: Optional[int] = None
    disposition: str = ""

    def to_dict(self) -> dict:
        return {
            "attempt": self.attempt,
            "base": self.base,
            "gcd": self.gcd,
            "job_id": self.job_id,
            "shots": self.shots,
            "modal_y": self.modal_y,
            "candidates": [list(c) for c in self.candidates],
            "order": self.order,
            "disposition": self.disposition,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AttemptRecord":
        return cls(
            attempt=doc["attempt"],
            base=doc["base"],
            gcd=doc["gcd"],
            shots=doc["shots"],
            job_id=doc.get("job_id"),
            modal_y=doc.get("modal_y"),
            candidates=tuple(tuple(c) for c in doc.get("candidates", [])),
            order=doc.get("order"),
            disposition=doc["disposition"],
        )


@dataclass(frozen=True)
class FactorizationResult:
    n: int
    p: int
    q: int
    attempts_used: int = 0
    total_shots: int = 0
    trace: tuple[AttemptRecord, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.p * self.q != self.n or not 1 < self.p <= self.q < self.n:
            raise ValueError(f"({self.p}, {self.q}) is not a nontrivial factorization of {self.n}")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "attempts_used": self.attempts_used,
            "total_shots": self.total_shots,
            "trace": [rec.to_dict() for rec in self.trace],
        }


def generate_base(n: int, rng: np.random.Generator) -> int:
    """Draw a uniformly from [2, n-2]."""
    if n < 5:
        raise ValueError(f"base generation needs n >= 5, got {n}")
    return int(rng.integers(2, n - 1))


def gcd(a: int, b: int) -> int:
    if a < 0 or b < 0:
        raise ValueError("gcd is defined here for non-negative integers only")
    if a == 0 and b == 0:
        raise ValueError("gcd(0, 0) is undefined")
    while b:
        a, b = b, a % b
    return a


def work_register_width(n: int) -> int:
    """Qubits needed to hold every residue mod n, i.e. ceil(log2 n)."""
    return (n - 1).bit_length()


def default_counting_width(n: int) -> int:
    return 2 * work_register_width(n)


def modmul_mapping(multiplier: int, n: int, width: int) -> tuple[int, ...]:
    """Permutation x -> multiplier*x mod n on [0, 2^width), fixing x >= n."""
    return tuple((multiplier * x) % n if x < n else x for x in range(1 << width))


def modular_exponentiation_ops(
    a: int, n: int, counting: Sequence[int], work: Sequence[int]
) -> list[ControlledPermutation]:
    """One controlled x -> a^(2^k) x mod n per counting qubit ``counting[k]``."""
    width = len(work)
    return [
        ControlledPermutation((c,), tuple(work), modmul_mapping(pow(a, 1 << k, n), n, width))
        for k, c in enumerate(counting)
    ]


def order_finding_registers(n: int, n_count: int) -> tuple[list[int], list[int]]:
    counting = list(range(n_count))
    work = list(range(n_count, n_count + work_register_width(n)))
    return counting, work


def prepare_order_finding(
    a: int, n: int, n_count: int | None = None, max_qubits: int = MAX_QUBITS
) -> Circuit:
    """Register preparation plus modular exponentiation, without the readout."""
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    if n_count is None:
        n_count = default_counting_width(n)
    if n_count < 1:
        raise ValueError("n_count must be >= 1")
    if not 0 < a < n or gcd(a, n) != 1:
        raise ValueError(f"base {a} is not a unit modulo {n}")
    counting, work = order_finding_registers(n, n_count)
    total = len(counting) + len(work)
    if total > max_qubits:
        raise CircuitError(
            [f"num_qubits: order finding for n={n} needs {total} qubits, cap is {max_qubits}"]
        )
    circ = Circuit(total, n_count)
    for q in counting:
        circ.h(q)
    circ.x(work[0])
    circ.extend(modular_exponentiation_ops(a, n, counting, work))
    return circ


def append_phase_readout(circ: Circuit, counting: Sequence[int]) -> Circuit:
    """Inverse QFT over the counting register, then measure qubit k into bit k."""
    circ.extend(inverse_qft_ops(counting))
    for k, q in enumerate(counting):
        circ.measure(q, k)
    return circ


def build_order_finding_circuit(
    a: int, n: int, n_count: int | None = None, max_qubits: int = MAX_QUBITS
) -> Circuit:
    """Phase-estimation circuit for the order of ``a`` modulo ``n``.

    Qubits ``0..n_count-1`` form the counting register, the following
    ``ceil(log2 n)`` qubits the work register (prepared in |1>). Counting
    qubit ``k`` lands in classical bit ``k``.
    """
    circ = prepare_order_finding(a, n, n_count, max_qubits)
    return append_phase_readout(circ, range(circ.num_clbits))


def continued_fractions(y: int, q: int, n: int) -> list[PeriodCandidate]:
    """Convergents s/r of y/q with 1 < r < n, in order of increasing r.

    Convergents with denominator 1 are dropped: they say the phase is an
    integer, which is the same (empty) information as y == 0.
    """
    if not 0 <= y < q:
        raise ValueError(f"y={y} outside [0, {q})")
    out: list[PeriodCandidate] = []
    if y == 0:
        return out
    num, den = y, q
    h_prev, h = 0, 1
    k_prev, k = 1, 0
    while den:
        term, rem = divmod(num, den)
        h_prev, h = h, term * h + h_prev
        k_prev, k = k, term * k + k_prev
        if k >= n:
            break
        if k > 1:
            out.append(PeriodCandidate(h, k))
        num, den = den, rem
    return out


def verify_order(a: int, r: int, n: int) -> bool:
    return r >= 1 and pow(a, r, n) == 1 % n


def _prime_factors(m: int) -> list[int]:
    out, d = [], 2
    while d * d <= m:
        if m % d == 0:
            out.append(d)
            while m % d == 0:
                m //= d
        d += 1
    if m > 1:
        out.append(m)
    return out


def minimal_order(a: int, m: int, n: int) -> int:
    """Shrink a verified exponent m (a^m = 1 mod n) to the order of a."""
    for p in _prime_factors(m):
        while m % p == 0 and verify_order(a, m // p, n):
            m //= p
    return m


def repair_candidate(a: int, r: int, n: int) -> Optional[int]:
    """Order of a, found via the first of r, 2r, 3r, ... (< n) with a^m = 1.

    A multiple that verifies may overshoot the order (a convergent 1/5 for an
    order-6 element repairs to 30), so the hit is reduced to the minimal order.
    """
    m = r
    while m < n:
        if verify_order(a, m, n):
            return minimal_order(a, m, n)
        m += r
    return None


def order_from_candidates(a: int, n: int, candidates: Iterable[PeriodCandidate]) -> Optional[int]:
    for cand in candidates:
        r = repair_candidate(a, cand.r, n)
        if r is not None:
            return r
    return None


def find_order(a: int, n: int, y: int, n_count: int) -> Optional[int]:
    return order_from_candidates(a, n, continued_fractions(y, 1 << n_count, n))


def extract_factors(a: int, r: int, n: int) -> Optional[tuple[int, int]]:
    """Split n using a verified order r of a; ``None`` means try another base."""
    if not verify_order(a, r, n):
        raise ValueError(f"{r} is not an order multiple of {a} modulo {n}")
    if r % 2:
        return None
    half = pow(a, r // 2, n)
    if half == n - 1:
        return None
    for d in (gcd(half - 1, n), gcd(half + 1, n)):
        if 1 < d < n:
            p, q = sorted((d, n // d))
            return p, q
    return None

