"""Tensor-product matrices over exact scalar rings."""

import random
from fractions import Fraction

import pytest

from trigrmat.tensoralg import (
    MulCache,
    TensorMatrix,
    diag_D,
    embed_pair,
    fraction_ring,
    h_permutation,
    perm_action,
    rational_ring,
    slot_permutation,
    std_permutation,
)


def test_flat_multi_row_major_round_trip():
    m = TensorMatrix.zeros(3, (1, 2, 5), rational_ring())
    assert m.flat((0, 0, 0)) == 0
    assert m.flat((0, 0, 1)) == 1
    assert m.flat((1, 0, 0)) == 9  # leftmost slot is the most significant digit
    for flat in range(27):
        assert m.flat(m.multi(flat)) == flat


def test_two_slot_entry_round_trip():
    ring = rational_ring()
    ent = {((0, 1), (1, 0)): Fraction(7), ((1, 1), (1, 1)): Fraction(-2)}
    m = TensorMatrix.two_slot(2, (1, 2), ring, ent)
    assert m.entry((0, 1), (1, 0)) == 7
    assert m.entry((1, 1), (1, 1)) == -2
    assert m.entry((0, 0), (0, 0)) == 0


def test_matmul_against_manual_convolution():
    ring = rational_ring()
    rng = random.Random(20260815)
    dim = 4
    a = TensorMatrix.zeros(2, (1, 2), ring)
    b = TensorMatrix.zeros(2, (1, 2), ring)
    for m in (a, b):
        for i in range(dim):
            for j in range(dim):
                m.rows[i][j] = Fraction(rng.randrange(-5, 6), rng.randrange(1, 4))
    c = a.matmul(b)
    for i in range(dim):
        for j in range(dim):
            assert c.rows[i][j] == sum(a.rows[i][k] * b.rows[k][j] for k in range(dim))


def test_matmul_requires_matching_shape():
    ring = rational_ring()
    a = TensorMatrix.identity(2, (1, 2), ring)
    b = TensorMatrix.identity(2, (1, 3), ring)
    with pytest.raises(ValueError):
        a.matmul(b)
    c = TensorMatrix.identity(2, (1, 2), fraction_ring(("q",)))
    with pytest.raises(ValueError):
        a.matmul(c)  # same dims, different scalar ring


def test_permutation_squares_to_identity():
    for n in (2, 3):
        p = std_permutation(n)
        assert p.matmul(p).equals(TensorMatrix.identity(n, (1, 2), p.ring))
        ph = h_permutation(n)
        assert ph.matmul(ph).equals(TensorMatrix.identity(n, (1, 2), ph.ring))


def test_perm_action_braid_relation():
    # the product along a word depends only on the permutation it spells
    cache = MulCache()
    for n in (2, 3):
        lhs = perm_action((1, 2, 1), 3, n, cache=cache)
        rhs = perm_action((2, 1, 2), 3, n, cache=cache)
        assert lhs.equals(rhs)
        assert perm_action((1, 1), 2, n).equals(
            TensorMatrix.identity(n, (1, 2), lhs.ring)
        )


def test_embed_pair_matches_slot_permutation():
    n = 2
    ring = rational_ring()
    p13 = embed_pair(std_permutation(n, ring), 1, 3, 3)
    sigma = slot_permutation((3, 2, 1), 3, n, ring)
    assert p13.equals(sigma)


def test_slot_permutation_composition():
    n = 2
    ring = rational_ring()
    # sigma then tau composes to tau o sigma
    s = slot_permutation((2, 3, 1), 3, n, ring)
    t = slot_permutation((3, 1, 2), 3, n, ring)
    assert t.matmul(s).equals(TensorMatrix.identity(n, (1, 2, 3), ring))


def test_partial_trace_and_transpose():
    n = 3
    p = std_permutation(n, rational_ring())
    # tr_2 P = identity on slot 1
    t = p.partial_trace((2,))
    assert t.slots == (1,)
    assert t.equals(TensorMatrix.identity(n, (1,), p.ring))
    assert p.trace() == n  # full trace of the flip
    # transposing one factor of the flip gives sum e_ij (x) e_ij
    pt = p.partial_transpose(2)
    for i in range(n):
        for j in range(n):
            assert pt.entry((i, i), (j, j)) == 1
    assert pt.matmul(pt).equals(pt.scale(n))  # rank-one up to n


def test_diag_D_entries():
    d = diag_D(3)
    q = h_permutation(3).ring  # just for the ring name
    assert d.entry((0,), (0,)).subs_monomial("q", Fraction(1), {}) is not None
    # exponents n-1, n-3, ..., 1-n
    from trigrmat.coeffring import lf_var, lf_const

    assert d.entry((0,), (0,)) == lf_var("q", 2)
    assert d.entry((1,), (1,)) == lf_const(1, ("q",))
    assert d.entry((2,), (2,)) == lf_var("q", -2)
    assert d.trace() == lf_var("q", 2) + 1 + lf_var("q", -2)


def test_relabel_shares_rows():
    a = TensorMatrix.identity(2, (1, 2), rational_ring())
    b = a.relabel(("aux", 7))
    assert b.slots == ("aux", 7)
    assert b.rows is a.rows


def test_mul_cache_counts_repeat_scalar_products():
    cache = MulCache()
    n = 2
    ph = h_permutation(n)
    big = embed_pair(ph, 1, 2, 3)
    big.matmul(embed_pair(ph, 2, 3, 3), cache=cache)
    assert cache.misses > 0
    assert cache.hits > 0  # identity fan-out repeats the same scalar pairs
