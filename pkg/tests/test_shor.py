import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import best_approximations, five_sigma, gcd_by_divisors, order_by_search
from qcaas.qsim import ControlledPermutation, Measure, outcome_distribution, run_circuit, simulate
from qcaas.shor import (
    AttemptRecord,
    FactorizationRequest,
    FactorizationResult,
    PhaseEstimate,
    build_order_finding_circuit,
    continued_fractions,
    extract_factors,
    find_order,
    gcd,
    generate_base,
    minimal_order,
    prepare_order_finding,
    repair_candidate,
    verify_order,
)


def brute_table(multiplier, n, width):
    table = {}
    for x in range(1 << width):
        table[x] = (x * multiplier) % n if x < n else x
    return table


# --- generate_base -----------------------------------------------------------


def test_generate_base_range():
    rng = np.random.default_rng(0)
    draws = {generate_base(15, rng) for _ in range(2000)}
    assert draws == set(range(2, 14))


def test_generate_base_deterministic():
    a = generate_base(15, np.random.default_rng(42))
    b = generate_base(15, np.random.default_rng(42))
    assert a == b


def test_generate_base_uniform():
    rng = np.random.default_rng(7)
    draws = np.array([generate_base(15, rng) for _ in range(10_000)])
    counts = np.bincount(draws, minlength=15)
    lo, hi = five_sigma(10_000, 1 / 12)
    for v in range(2, 14):
        assert lo <= counts[v] <= hi, (v, counts[v])


@pytest.mark.parametrize("n", [0, 3, 4])
def test_generate_base_rejects_small_n(n):
    with pytest.raises(ValueError):
        generate_base(n, np.random.default_rng(0))


# --- gcd ---------------------------------------------------------------------


@pytest.mark.parametrize("a,b,want", [(9, 0, 9), (0, 4, 4), (48, 18, 6), (7, 15, 1)])
def test_gcd_examples(a, b, want):
    assert gcd(a, b) == want


def test_gcd_examples_match_divisor_scan():
    assert gcd_by_divisors(48, 18) == 6
    assert gcd_by_divisors(7, 15) == 1


def test_gcd_rejects_zero_zero_and_negatives():
    with pytest.raises(ValueError):
        gcd(0, 0)
    with pytest.raises(ValueError):
        gcd(-4, 6)


@given(st.integers(0, 500), st.integers(0, 500))
def test_gcd_matches_divisor_scan(a, b):
    if a == b == 0:
        return
    assert gcd(a, b) == gcd_by_divisors(a, b)


# --- circuit construction ----------------------------------------------------


def test_order_finding_circuit_layout():
    circ = build_order_finding_circuit(7, 15, 8)
    assert circ.num_qubits == 12
    assert circ.num_clbits == 8
    perms = [op for op in circ.ops if isinstance(op, ControlledPermutation)]
    assert len(perms) == 8
    measures = [op for op in circ.ops if isinstance(op, Measure)]
    assert [(m.qubit, m.clbit) for m in measures] == [(k, k) for k in range(8)]


def test_permutations_match_brute_force_tables():
    circ = build_order_finding_circuit(7, 15, 8)
    perms = [op for op in circ.ops if isinstance(op, ControlledPermutation)]
    multiplier = 7
    for k, op in enumerate(perms):
        assert op.controls == (k,)
        assert op.targets == (8, 9, 10, 11)
        assert dict(enumerate(op.mapping)) == brute_table(multiplier, 15, 4)
        assert sorted(op.mapping) == list(range(16))
        multiplier = multiplier * multiplier % 15


def test_first_permutation_cycle_for_seven_mod_fifteen():
    op = next(o for o in build_order_finding_circuit(7, 15, 8).ops if isinstance(o, ControlledPermutation))
    assert [op.mapping[x] for x in (1, 7, 4, 13)] == [7, 4, 13, 1]
    assert op.mapping[15] == 15


def test_base_one_gives_identity_permutations():
    circ = build_order_finding_circuit(1, 15, 4)
    for op in circ.ops:
        if isinstance(op, ControlledPermutation):
            assert op.mapping == tuple(range(16))


@pytest.mark.parametrize("n", [15, 21, 33, 35])
def test_all_permutations_are_bijections(n):
    for a in range(2, n):
        if math.gcd(a, n) != 1:
            continue
        circ = build_order_finding_circuit(a, n, 3)
        width = (n - 1).bit_length()
        multiplier = a
        for op in circ.ops:
            if isinstance(op, ControlledPermutation):
                assert sorted(op.mapping) == list(range(1 << width))
                assert dict(enumerate(op.mapping)) == brute_table(multiplier, n, width)
                multiplier = multiplier * multiplier % n


def test_default_counting_width():
    circ = build_order_finding_circuit(2, 21)
    assert circ.num_clbits == 10
    assert circ.num_qubits == 15


@pytest.mark.parametrize("a,n", [(5, 15), (3, 21), (0, 15)])
def test_non_unit_base_rejected(a, n):
    with pytest.raises(ValueError):
        build_order_finding_circuit(a, n, 4)


def test_register_cap_enforced():
    with pytest.raises(ValueError, match="cap"):
        build_order_finding_circuit(2, 15, 8, max_qubits=10)


def test_work_register_prepared_in_one():
    # The work register starts at |1> and only ever visits the orbit of 1 under 7.
    state = simulate(prepare_order_finding(7, 15, 4))
    probs = state.probabilities().reshape(16, 16)  # [work, counting]
    work_support = set(np.flatnonzero(probs.sum(axis=1) > 1e-12))
    assert work_support == {1, 7, 4, 13}


# --- phase concentration -----------------------------------------------------


def test_exact_phase_concentration_statevector():
    circ = build_order_finding_circuit(7, 15, 8)
    dist = outcome_distribution(circ, simulate(circ))
    support = set(np.flatnonzero(dist > 1e-12))
    assert support == {0, 64, 128, 192}
    np.testing.assert_allclose(dist[[0, 64, 128, 192]], 0.25, atol=1e-12)


def test_exact_phase_concentration_samples():
    circ = build_order_finding_circuit(7, 15, 8)
    result = run_circuit(circ, 4096, seed=3)
    ys = {int(k, 2): v for k, v in result.counts.items()}
    assert set(ys) <= {0, 64, 128, 192}
    lo, hi = five_sigma(4096, 0.25)
    for y in (0, 64, 128, 192):
        assert lo <= ys.get(y, 0) <= hi


# --- continued fractions -----------------------------------------------------


def test_cf_three_quarters():
    out = continued_fractions(192, 256, 15)
    assert out[-1].convergent == (3, 4)
    x = Fraction(192, 256)
    best = min(
        ((s, r) for r in range(1, 15) for s in range(r + 1)),
        key=lambda sr: (abs(x - Fraction(*sr)), sr[1]),
    )
    assert best == (3, 4)


def test_cf_half():
    assert [c.convergent for c in continued_fractions(128, 256, 15)] == [(1, 2)]


def test_cf_zero_phase_is_empty():
    assert continued_fractions(0, 256, 15) == []


def test_cf_output_reduced_and_increasing():
    for y in range(1, 256):
        out = continued_fractions(y, 256, 32)
        rs = [c.r for c in out]
        assert rs == sorted(set(rs))
        for c in out:
            assert math.gcd(c.s, c.r) == 1
            assert 1 < c.r < 32


@pytest.mark.parametrize("q", [16, 64, 256])
def test_cf_matches_exhaustive_enumeration(q):
    for n in range(3, 33):
        for y in range(q):
            got = [c.convergent for c in continued_fractions(y, q, n)]
            assert got == best_approximations(y, q, n), (y, q, n)


def test_cf_contains_every_close_fraction():
    # Legendre: a reduced s/r within 1/(2r^2) of y/q is always a convergent.
    for m in range(2, 11):
        q = 1 << m
        for n in (3, 8, 15, 21, 32):
            for y in range(1, q):
                x = Fraction(y, q)
                got = {c.convergent for c in continued_fractions(y, q, n)}
                for r in range(2, n):
                    for s in range(1, r):
                        if math.gcd(s, r) == 1 and abs(x - Fraction(s, r)) < Fraction(1, 2 * r * r):
                            assert (s, r) in got, (y, q, n, s, r)


def test_cf_rejects_out_of_range_y():
    with pytest.raises(ValueError):
        continued_fractions(256, 256, 15)


def test_phase_estimate_bounds():
    assert PhaseEstimate(255, 8).q == 256
    with pytest.raises(ValueError):
        PhaseEstimate(256, 8)


# --- verification and extraction ---------------------------------------------


@pytest.mark.parametrize(
    "a,r,n,want", [(7, 4, 15, True), (7, 2, 15, False), (1, 1, 15, True), (1, 1, 21, True)]
)
def test_verify_order(a, r, n, want):
    assert verify_order(a, r, n) is want


def test_repair_recovers_multiple():
    # order of 2 mod 21 is 6; a measured divisor 3 is repaired to 6
    assert repair_candidate(2, 3, 21) == 6
    assert repair_candidate(2, 2, 21) == 6
    assert repair_candidate(2, 5, 21) is None


def test_repair_reduces_overshoot_to_minimal_order():
    # 5, 10, ..., 30: the first verifying multiple is 30, the order of 4 mod 35 is 6
    assert order_by_search(4, 35) == 6
    assert repair_candidate(4, 5, 35) == 6
    assert minimal_order(4, 30, 35) == 6


@pytest.mark.parametrize("n", [15, 21, 33, 35])
def test_order_from_ideal_phases(n):
    n_count = 2 * (n - 1).bit_length()
    q = 1 << n_count
    for a in range(2, n):
        if math.gcd(a, n) != 1:
            continue
        r = order_by_search(a, n)
        for s in range(1, r):
            y = round(s * q / r)
            assert find_order(a, n, y, n_count) == r, (a, n, s)


@pytest.mark.parametrize(
    "a,r,n,want", [(7, 4, 15, (3, 5)), (2, 6, 21, (3, 7)), (14, 2, 15, None), (4, 3, 21, None)]
)
def test_extract_factors(a, r, n, want):
    assert extract_factors(a, r, n) == want


def test_extract_factors_requires_verified_order():
    with pytest.raises(ValueError):
        extract_factors(7, 2, 15)


@pytest.mark.parametrize("n", [15, 21, 33, 35, 39, 55, 65, 77, 91])
def test_extract_factors_output_is_nontrivial(n):
    for a in range(2, n):
        if math.gcd(a, n) != 1:
            continue
        r = order_by_search(a, n)
        out = extract_factors(a, r, n)
        if out is not None:
            p, q = out
            assert p * q == n and 1 < p <= q < n


# --- domain types ------------------------------------------------------------


def test_request_bounds():
    assert FactorizationRequest(15).max_attempts == 10
    for kwargs in ({"n": 2}, {"n": 15, "max_attempts": 0}, {"n": 15, "shots_per_attempt": 0}):
        with pytest.raises(ValueError):
            FactorizationRequest(**kwargs)


def test_result_invariants():
    FactorizationResult(15, 3, 5)
    for p, q in ((5, 3), (1, 15), (3, 4)):
        with pytest.raises(ValueError):
            FactorizationResult(15, p, q)


def test_attempt_record_round_trip():
    rec = AttemptRecord(1, 7, 1, 1024, "local-0001", 192, ((1, 2), (3, 4)), 4, "factored")
    assert AttemptRecord.from_dict(rec.to_dict()) == rec
