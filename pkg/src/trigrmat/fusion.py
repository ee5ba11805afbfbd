"""q-antisymmetrizers and the spectral-ladder fusion identity.

A^(k) is the signed average of the q-weighted permutation action over
S_k.  Evaluating the lexicographically ordered product of two-parameter
exchange matrices on the spectral ladder u, u-h, ..., u-(k-1)h collapses
it to an explicit scalar multiple of A^(k); everything here is exact
fraction arithmetic, no truncation.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations, product as iproduct
from math import factorial
from time import perf_counter

from .coeffring.laurent import lf_const, lf_var
from .report import CheckResult
from .rmatrix import build_R2p
from .tensoralg import (
    MulCache,
    TensorMatrix,
    embed_pair,
    fraction_ring,
    perm_action,
)


def reduced_word(sigma):
    """Adjacent-swap word whose left-to-right product is P_sigma.

    Bubble-sorting the image list multiplies sigma by s_a on the right
    each swap, so the collected indices reversed give a reduced word;
    its length is the inversion count, hence the sign.
    """
    p = list(sigma)
    word = []
    changed = True
    while changed:
        changed = False
        for i in range(len(p) - 1):
            if p[i] > p[i + 1]:
                p[i], p[i + 1] = p[i + 1], p[i]
                word.append(i + 1)
                changed = True
    word.reverse()
    return word


@dataclass
class Antisymmetrizer:
    n: int
    k: int
    matrix: TensorMatrix


def build_antisymmetrizer(n, k):
    """(1/k!) sum over S_k of sgn(sigma) times the q-permutation action."""
    assert 1 <= k <= 4, "desk scale only"
    ring = fraction_ring(("q",))
    slots = tuple(range(1, k + 1))
    acc = TensorMatrix.zeros(n, slots, ring)
    cache = MulCache()
    for sigma in permutations(range(k)):
        word = reduced_word(sigma)
        term = perm_action(word, k, n, ring, cache=cache)
        acc = acc - term if len(word) % 2 else acc + term
    return Antisymmetrizer(n, k, acc.scale(Fraction(1, factorial(k))))


def _r2p_at(n, aval, bval, ring):
    """Two-parameter matrix with the spectral slots evaluated at fractions."""
    q = lf_var("q")
    qi = lf_var("q", -1)
    cross = qi - q
    entries = {}
    for i in range(n):
        entries[((i, i), (i, i))] = aval * qi - bval * q
        for j in range(n):
            if i == j:
                continue
            entries[((i, j), (i, j))] = aval - bval
            entries[((i, j), (j, i))] = cross * (aval if i > j else bval)
    return TensorMatrix.two_slot(n, (1, 2), ring, entries)


def multi_R_product(n, params):
    """Ordered product of pair factors, lexicographic in (a, b).

    params[a] is the spectral fraction carried by slot a+1; factor (a, b)
    is the two-parameter matrix evaluated at (params[a], params[b]).
    """
    k = len(params)
    assert k >= 2
    names = sorted({v for p in params for v in p.vars} | {"q"})
    ring = fraction_ring(tuple(names))
    cache = MulCache()
    out = None
    for a in range(k):
        for b in range(a + 1, k):
            f = embed_pair(_r2p_at(n, params[a], params[b], ring), a + 1, b + 1, k)
            out = f if out is None else out.matmul(f, cache)
    return out


def verify_fusion(n, k):
    """Ladder product equals k! x^{k(k-1)/2} prod(q^{-2a}-q^{-2b}) A^(k).

    Exact entrywise identity; for k > n both sides vanish (the scalar
    does not, the antisymmetrizer does, and the product degenerates).
    """
    assert k <= 4
    t0 = perf_counter()
    rv = ("q", "x")
    x = lf_var("x", vars=rv)
    params = [x * lf_var("q", -2 * a, vars=rv) for a in range(k)]
    lhs = multi_R_product(n, params)
    pref = lf_const(factorial(k), rv) * lf_var("x", k * (k - 1) // 2, vars=rv)
    for a in range(k):
        for b in range(a + 1, k):
            pref = pref * (
                lf_var("q", -2 * a, vars=rv) - lf_var("q", -2 * b, vars=rv)
            )
    A = build_antisymmetrizer(n, k).matrix
    rhs = A.map_entries(lambda e: e * pref, ring=lhs.ring).relabel(lhs.slots)
    bad = lhs.diff_entries(rhs, limit=3)
    wit = {"row": list(bad[0][0]), "col": list(bad[0][1])} if bad else None
    return CheckResult(
        "fusion.identity",
        {"n": n, "k": k},
        "pass" if not bad else "fail",
        witness=wit,
        seconds=perf_counter() - t0,
    )


def _gauge_on_slot(n, k, a, ring):
    """diag q^{n-1-2 i_a} as a k-slot diagonal matrix (slot a, 1-based)."""
    out = TensorMatrix.zeros(n, tuple(range(1, k + 1)), ring)
    for multi in iproduct(range(n), repeat=k):
        e = n - 1 - 2 * multi[a - 1]
        fi = out.flat(multi)
        out.rows[fi][fi] = lf_var("q", e) if e else ring.one
    return out


def verify_AD_commutation(n, k):
    """[A^(k), D_1...D_k] = 0, plus the two-slot gauge exchange.

    The gauge factors are diagonal, so the reversed product equals the
    forward one; both orders are still built honestly.  The second check
    is the exact exchange R(u,v) D_1 D_2 = D_2 D_1 R(u,v) underneath it.
    """
    t0 = perf_counter()
    ring = fraction_ring(("q",))
    A = build_antisymmetrizer(n, k).matrix
    cache = MulCache()
    fwd = None
    rev = None
    for a in range(1, k + 1):
        da = _gauge_on_slot(n, k, a, ring)
        fwd = da if fwd is None else fwd.matmul(da, cache)
        rev = da if rev is None else da.matmul(rev, cache)
    bad = A.matmul(fwd, cache).diff_entries(rev.matmul(A, cache), limit=3)
    wit = {"row": list(bad[0][0]), "col": list(bad[0][1])} if bad else None
    out = [
        CheckResult(
            "fusion.ad-commutation",
            {"n": n, "k": k},
            "pass" if not bad else "fail",
            witness=wit,
            seconds=perf_counter() - t0,
        )
    ]

    t0 = perf_counter()
    rv2 = ("q", "x_u", "x_v")
    ring2 = fraction_ring(rv2)
    r2 = build_R2p(n)
    d1 = _gauge_on_slot(n, 2, 1, ring2)
    d2 = _gauge_on_slot(n, 2, 2, ring2)
    lhs = r2.matmul(d1, cache).matmul(d2, cache)
    rhs = d2.matmul(d1, cache).matmul(r2, cache)
    bad = lhs.diff_entries(rhs, limit=3)
    wit = {"row": list(bad[0][0]), "col": list(bad[0][1])} if bad else None
    out.append(
        CheckResult(
            "r.gauge-exchange",
            {"n": n},
            "pass" if not bad else "fail",
            witness=wit,
            seconds=perf_counter() - t0,
        )
    )
    return out
