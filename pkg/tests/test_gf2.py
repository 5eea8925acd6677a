from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from codedcache.errors import ContractViolation
from codedcache.gf2 import (
    BitMatrix,
    BitVector,
    EchelonBasis,
    batch_rank,
    pack_words,
    prefix_ranks,
    random_words,
    rank,
    solve,
    xor_combine,
    xor_masked,
)


def vectors(length: int):
    return st.integers(0, (1 << length) - 1).map(lambda b: BitVector(length, b))


@st.composite
def matrices(draw, max_rows=12, max_width=40):
    width = draw(st.integers(1, max_width))
    rows = draw(st.lists(vectors(width), max_size=max_rows))
    return BitMatrix.from_rows(rows, width)


def span_rank(rows: list[int]) -> int:
    """Oracle: size of the set of all XOR combinations is 2**rank."""
    span = {0}
    for r in rows:
        span |= {x ^ r for x in span}
    return len(span).bit_length() - 1


# BitVector --------------------------------------------------------------------


def test_string_form_lists_position_zero_first():
    v = BitVector.from_str("1100")
    assert v.bits == 0b0011 and v[0] == 1 and v[3] == 0
    assert v.to_str() == "1100"


def test_bits_beyond_length_rejected():
    with pytest.raises(ContractViolation):
        BitVector(3, 0b1000)


def test_xor_length_mismatch():
    with pytest.raises(ContractViolation):
        BitVector.zeros(3) ^ BitVector.zeros(4)


@given(st.integers(0, 200).flatmap(vectors))
def test_self_xor_is_zero(v):
    assert v ^ v == BitVector.zeros(v.length)


@given(st.integers(1, 130).flatmap(vectors))
def test_serialisation_round_trips(v):
    assert BitVector.from_str(v.to_str()) == v
    assert BitVector.from_bytes(v.to_bytes(), v.length) == v
    assert BitVector.from_hex(v.to_hex(), v.length) == v
    assert BitVector.from_bits(list(v)) == v
    assert v.weight() == len(v.support())


def test_unit_and_bounds():
    assert BitVector.unit(5, 2).to_str() == "00100"
    with pytest.raises(ContractViolation):
        BitVector.unit(5, 5)


# rank -------------------------------------------------------------------------------


def test_rank_examples():
    assert rank(BitMatrix.identity(3)) == 3
    assert rank(BitMatrix.from_strs(["0000"] * 4)) == 0
    assert rank(BitMatrix.from_strs(["1100", "0110", "1010"])) == 2
    assert rank(BitMatrix((), 5)) == 0


def test_unequal_rows_rejected():
    with pytest.raises(ContractViolation):
        BitMatrix.from_strs(["101", "10"])


@pytest.mark.parametrize("l,m", [(l, m) for l in range(1, 13) for m in range(1, 13) if l * m <= 12])
def test_rank_matches_span_enumeration(l, m):
    for entries in range(1 << (l * m)):
        rows = [(entries >> (i * m)) & ((1 << m) - 1) for i in range(l)]
        got = rank(BitMatrix.from_rows([BitVector(m, r) for r in rows], m))
        assert got == span_rank(rows)


@given(matrices())
def test_rank_bounded(a):
    assert rank(a) <= min(a.row_count, a.width)


@given(matrices(), st.data())
def test_rank_invariant_under_row_operations(a, data):
    if a.row_count < 2:
        return
    i, j = data.draw(st.lists(st.integers(0, a.row_count - 1), min_size=2, max_size=2, unique=True))
    assert rank(a.swap_rows(i, j)) == rank(a)
    rows = list(a.rows)
    rows[i] = rows[i] ^ rows[j]
    assert rank(BitMatrix(tuple(rows), a.width)) == rank(a)


# solve and xor_combine ----------------------------------------------------------


def test_solve_examples():
    assert solve(BitMatrix.identity(2), BitVector.from_str("01")) == BitVector.from_str("01")
    assert solve(BitMatrix.from_strs(["1100", "0110"]), BitVector.from_str("1010")) == BitVector.from_str("11")
    assert solve(BitMatrix.from_strs(["1100"]), BitVector.from_str("0011")) is None


def test_solve_dimension_mismatch():
    with pytest.raises(ContractViolation):
        solve(BitMatrix.identity(3), BitVector.zeros(2))


def test_solve_leaves_dependent_rows_out():
    # second row repeats the first, so it never enters the basis
    basis = BitMatrix.from_strs(["100", "100", "010"])
    assert solve(basis, BitVector.from_str("110")) == BitVector.from_str("101")


def test_solve_on_empty_basis():
    assert solve(BitMatrix((), 3), BitVector.zeros(3)) == BitVector.zeros(0)
    assert solve(BitMatrix((), 3), BitVector.from_str("100")) is None


@given(matrices(max_rows=20, max_width=64), st.data())
def test_solve_round_trip(a, data):
    target = data.draw(vectors(a.width))
    coeffs = solve(a, target)
    spanned = EchelonBasis(a.width)
    for row in a.rows:
        spanned.add(row.bits)
    assert (coeffs is not None) == spanned.contains(target.bits)
    if coeffs is not None:
        assert xor_combine(list(a.rows), coeffs, length=a.width) == target


@given(matrices(max_rows=10, max_width=30), st.data())
def test_solve_finds_combinations_it_was_built_from(a, data):
    pick = data.draw(vectors(a.row_count))
    target = xor_combine(list(a.rows), pick, length=a.width)
    coeffs = solve(a, target)
    assert coeffs is not None
    assert xor_combine(list(a.rows), coeffs, length=a.width) == target


def test_xor_combine_examples():
    vs = [BitVector.from_str("1010"), BitVector.from_str("0101")]
    assert xor_combine(vs, BitVector.from_str("11")).to_str() == "1111"
    assert xor_combine(vs, BitVector.zeros(2)) == BitVector.zeros(4)
    same = [BitVector.from_str("1010")] * 2
    assert xor_combine(same, BitVector.from_str("11")) == BitVector.zeros(4)
    assert xor_combine([], BitVector.zeros(0), length=7) == BitVector.zeros(7)


def test_xor_combine_errors():
    vs = [BitVector.from_str("1010"), BitVector.from_str("0101")]
    with pytest.raises(ContractViolation):
        xor_combine(vs, BitVector.from_str("1"))
    with pytest.raises(ContractViolation):
        xor_combine([BitVector.zeros(2), BitVector.zeros(3)], BitVector.from_str("11"))


def test_xor_masked():
    assert xor_masked([1, 2, 4, 8], 0b1011) == 1 ^ 2 ^ 8
    assert xor_masked([5], 0) == 0


# EchelonBasis -----------------------------------------------------------------------


def test_echelon_tracking_and_errors():
    basis = EchelonBasis(4, track=True)
    assert basis.add(0b0011) and basis.add(0b0110) and not basis.add(0b0101)
    assert basis.rank == 2 and not basis.full
    assert basis.represent(0b0101) == 0b11
    assert basis.represent(0b1000) is None
    with pytest.raises(ContractViolation):
        basis.add(1 << 4)
    with pytest.raises(ContractViolation):
        EchelonBasis(4).represent(1)


# batched kernels --------------------------------------------------------------------


@given(st.integers(1, 130), st.integers(0, 40), st.integers(0, 2**32 - 1))
def test_batch_rank_matches_scalar(width, nrows, seed):
    rng = np.random.default_rng(seed)
    mask = (1 << width) - 1
    # sparse rows make low ranks (and dependent rows) common
    rows = [
        [int.from_bytes(rng.bytes(17), "little") & int.from_bytes(rng.bytes(17), "little") & mask
         for _ in range(nrows)]
        for _ in range(4)
    ]
    words = np.stack([pack_words(r, width) for r in rows])
    expected = [rank(BitMatrix.from_rows([BitVector(width, b) for b in r], width)) for r in rows]
    assert list(batch_rank(words, width)) == expected


def test_prefix_ranks_and_full_rank_time():
    rng = np.random.default_rng(3)
    rows = random_words(rng, (50, 60), 20)
    ranks, full_at = prefix_ranks(rows, 20, [0, 5, 20, 60])
    assert (ranks[:, 0] == 0).all() and (ranks[:, 1] <= 5).all()
    assert (np.diff(ranks, axis=1) >= 0).all()
    for t in range(50):
        ints = [sum(int(rows[t, i, k]) << (64 * k) for k in range(rows.shape[2])) for i in range(60)]
        basis = EchelonBasis(20)
        first = -1
        for i, r in enumerate(ints):
            basis.add(r)
            if basis.full and first < 0:
                first = i + 1
        assert full_at[t] == first


def test_prefix_ranks_rejects_unsorted():
    rows = np.zeros((1, 4, 1), np.uint64)
    with pytest.raises(ContractViolation):
        prefix_ranks(rows, 3, [3, 2])
    with pytest.raises(ContractViolation):
        batch_rank(np.zeros((4, 1), np.uint64), 3)


def test_random_words_mask_spare_bits():
    rows = random_words(np.random.default_rng(0), (100,), 70)
    assert (rows[:, 1] < (1 << 6)).all()


def test_pack_words_layout():
    packed = pack_words([1 | (1 << 64), 2], 100)
    assert packed.tolist() == [[1, 1], [2, 0]]
    assert list(itertools.chain.from_iterable(pack_words([], 10).tolist())) == []
