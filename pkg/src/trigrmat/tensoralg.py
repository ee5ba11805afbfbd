"""Dense matrices on (C^n)^{tensor m} over a pluggable exact coefficient ring.

Slots carry explicit labels so that embedding, partial transpose, partial
trace, and products check their slot sets at composition time.  Multi-indices
are row-major in slot order.  At desk scale (n <= 3, m <= 4) dense storage is
simpler and fast enough.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product as iproduct

from .coeffring import LaurentFraction, LayeredSeries, TruncSeries

__all__ = [
    "RingSpec",
    "rational_ring",
    "fraction_ring",
    "series_ring",
    "layered_ring",
    "MulCache",
    "TensorMatrix",
    "embed_pair",
    "partial_transpose",
    "partial_trace",
    "std_permutation",
    "h_permutation",
    "diag_D",
    "perm_action",
    "slot_permutation",
]


class RingSpec:
    """Zero, one, and a zero test for a coefficient ring of matrix entries."""

    __slots__ = ("name", "zero", "one", "is_zero")

    def __init__(self, name, zero, one, is_zero):
        self.name = name
        self.zero = zero
        self.one = one
        self.is_zero = is_zero


def rational_ring():
    return RingSpec("Q", Fraction(0), Fraction(1), lambda e: e == 0)


def fraction_ring(vars=("q",)):
    return RingSpec(
        "laurent(" + ",".join(vars) + ")",
        LaurentFraction.const(0, vars),
        LaurentFraction.const(1, vars),
        lambda e: e.is_zero(),
    )


def series_ring(window):
    return RingSpec(
        f"series[{window.u_low},{window.u_high};{window.h_high}]",
        TruncSeries.zero(window),
        TruncSeries.one(window),
        lambda e: e.is_zero(),
    )


def layered_ring(u_low, h_high):
    return RingSpec(
        f"layered[{u_low};{h_high}]",
        LayeredSeries.zero(u_low, h_high),
        LayeredSeries.one(u_low, h_high),
        lambda e: e.is_zero(),
    )


class MulCache:
    """Entry-product cache keyed by operand identity.

    Entries of embedded operators repeat across identity blocks, so products
    of large tensor matrices hit the same scalar pairs many times.  Strong
    references are kept so object ids stay valid for the cache lifetime.
    """

    __slots__ = ("table", "hits", "misses")

    def __init__(self):
        self.table = {}
        self.hits = 0
        self.misses = 0

    def mul(self, a, b):
        key = (id(a), id(b))
        got = self.table.get(key)
        if got is not None and got[0] is a and got[1] is b:
            self.hits += 1
            return got[2]
        r = a * b
        self.table[key] = (a, b, r)
        self.misses += 1
        return r


def _positions(slots, label):
    try:
        return slots.index(label)
    except ValueError:
        raise ValueError(f"slot {label!r} not among {slots}")


class TensorMatrix:
    __slots__ = ("n", "slots", "ring", "rows")

    def __init__(self, n, slots, ring, rows):
        self.n = n
        self.slots = tuple(slots)
        if len(set(self.slots)) != len(self.slots):
            raise ValueError("slot labels must be distinct")
        self.ring = ring
        self.rows = rows
        dim = n ** len(self.slots)
        if len(rows) != dim or any(len(r) != dim for r in rows):
            raise ValueError("entry array dimensions must equal n^m")

    # -- indexing -------------------------------------------------------------

    @property
    def dim(self):
        return self.n ** len(self.slots)

    def flat(self, multi):
        i = 0
        for x in multi:
            i = i * self.n + x
        return i

    def multi(self, flat):
        m = len(self.slots)
        out = [0] * m
        for k in range(m - 1, -1, -1):
            out[k] = flat % self.n
            flat //= self.n
        return tuple(out)

    # -- constructors -----------------------------------------------------------

    @classmethod
    def zeros(cls, n, slots, ring):
        dim = n ** len(tuple(slots))
        z = ring.zero
        return cls(n, slots, ring, [[z] * dim for _ in range(dim)])

    @classmethod
    def identity(cls, n, slots, ring):
        out = cls.zeros(n, slots, ring)
        for i in range(out.dim):
            out.rows[i][i] = ring.one
        return out

    @classmethod
    def two_slot(cls, n, slots, ring, entries):
        """Build from {((i, r), (j, s)): value} on basis pairs, 0-based."""
        if len(tuple(slots)) != 2:
            raise ValueError("two_slot needs exactly two slots")
        out = cls.zeros(n, slots, ring)
        for (row_pair, col_pair), v in entries.items():
            out.rows[out.flat(row_pair)][out.flat(col_pair)] = v
        return out

    @classmethod
    def one_slot_diag(cls, n, slot, ring, diag):
        out = cls.zeros(n, (slot,), ring)
        for i, v in enumerate(diag):
            out.rows[i][i] = v
        return out

    # -- structure ----------------------------------------------------------------

    def entry(self, row_multi, col_multi):
        return self.rows[self.flat(row_multi)][self.flat(col_multi)]

    def map_entries(self, f, ring=None):
        ring = ring or self.ring
        return TensorMatrix(
            self.n,
            self.slots,
            ring,
            [[f(e) for e in row] for row in self.rows],
        )

    def relabel(self, slots):
        return TensorMatrix(self.n, slots, self.ring, self.rows)

    def _require_same_shape(self, other):
        if (
            self.n != other.n
            or self.slots != other.slots
            or self.ring.name != other.ring.name
        ):
            raise ValueError(
                f"shape mismatch: {self.n},{self.slots},{self.ring.name} vs "
                f"{other.n},{other.slots},{other.ring.name}"
            )

    # -- arithmetic ------------------------------------------------------------------

    def __add__(self, other):
        self._require_same_shape(other)
        return TensorMatrix(
            self.n,
            self.slots,
            self.ring,
            [
                [a + b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.rows, other.rows)
            ],
        )

    def __sub__(self, other):
        self._require_same_shape(other)
        return TensorMatrix(
            self.n,
            self.slots,
            self.ring,
            [
                [a - b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.rows, other.rows)
            ],
        )

    def __neg__(self):
        return self.map_entries(lambda e: -e)

    def scale(self, c):
        return self.map_entries(lambda e: e * c)

    def matmul(self, other, cache=None):
        self._require_same_shape(other)
        dim = self.dim
        iz = self.ring.is_zero
        zero = self.ring.zero
        brows = other.rows
        out = []
        emul = cache.mul if cache is not None else (lambda a, b: a * b)
        for i in range(dim):
            arow = self.rows[i]
            orow = [zero] * dim
            for k in range(dim):
                a = arow[k]
                if iz(a):
                    continue
                brow = brows[k]
                for j in range(dim):
                    b = brow[j]
                    if iz(b):
                        continue
                    t = emul(a, b)
                    cur = orow[j]
                    orow[j] = t if iz(cur) else cur + t
            out.append(orow)
        return TensorMatrix(self.n, self.slots, self.ring, out)

    def __mul__(self, other):
        if isinstance(other, TensorMatrix):
            return self.matmul(other)
        return self.scale(other)

    def __rmul__(self, other):
        if isinstance(other, TensorMatrix):
            return NotImplemented
        return self.scale(other)

    # -- the partial operations ---------------------------------------------------------

    def partial_transpose(self, label):
        p = _positions(self.slots, label)
        out = TensorMatrix.zeros(self.n, self.slots, self.ring)
        iz = self.ring.is_zero
        for i in range(self.dim):
            mi = self.multi(i)
            for j in range(self.dim):
                e = self.rows[i][j]
                if iz(e):
                    continue
                mj = self.multi(j)
                ni = list(mi)
                nj = list(mj)
                ni[p], nj[p] = mj[p], mi[p]
                out.rows[self.flat(ni)][self.flat(nj)] = e
        return out

    def partial_trace(self, labels):
        labels = tuple(labels)
        if not labels:
            raise ValueError("partial_trace needs a nonempty slot set")
        pos = sorted(_positions(self.slots, s) for s in labels)
        if len(set(pos)) != len(pos):
            raise ValueError("duplicate slots in trace set")
        keep = [k for k in range(len(self.slots)) if k not in pos]
        new_slots = tuple(self.slots[k] for k in keep)
        out = TensorMatrix.zeros(self.n, new_slots, self.ring)
        iz = self.ring.is_zero
        for i in range(self.dim):
            mi = self.multi(i)
            for j in range(self.dim):
                e = self.rows[i][j]
                if iz(e):
                    continue
                mj = self.multi(j)
                if any(mi[p] != mj[p] for p in pos):
                    continue
                ri = tuple(mi[k] for k in keep)
                rj = tuple(mj[k] for k in keep)
                fi, fj = out.flat(ri), out.flat(rj)
                cur = out.rows[fi][fj]
                out.rows[fi][fj] = e if iz(cur) else cur + e
        return out

    def trace(self):
        t = self.ring.zero
        iz = self.ring.is_zero
        for i in range(self.dim):
            e = self.rows[i][i]
            if not iz(e):
                t = e if iz(t) else t + e
        return t

    # -- comparison --------------------------------------------------------------------------

    def diff_entries(self, other, limit=4):
        self._require_same_shape(other)
        out = []
        for i in range(self.dim):
            for j in range(self.dim):
                if not _entries_equal(self.rows[i][j], other.rows[i][j]):
                    out.append((self.multi(i), self.multi(j)))
                    if len(out) >= limit:
                        return out
        return out

    def equals(self, other):
        return not self.diff_entries(other, limit=1)

    def is_zero_matrix(self):
        iz = self.ring.is_zero
        return all(iz(e) for row in self.rows for e in row)

    def __repr__(self):
        return (
            f"<TensorMatrix n={self.n} slots={self.slots} "
            f"ring={self.ring.name} dim={self.dim}>"
        )


def _entries_equal(a, b):
    if isinstance(a, TruncSeries) and isinstance(b, TruncSeries):
        return a.equals_on_common(b)
    return a == b


# -- module-level operation wrappers -----------------------------------------------


def embed_pair(C, a, b, m):
    """Embed a two-slot operator onto slots a, b of an m-slot space.

    ``m`` may be an integer (slots labeled 1..m) or an explicit slot tuple.
    """
    slots = tuple(range(1, m + 1)) if isinstance(m, int) else tuple(m)
    if a == b:
        raise ValueError("embed_pair needs two distinct slots")
    pa, pb = _positions(slots, a), _positions(slots, b)
    n = C.n
    out = TensorMatrix.zeros(n, slots, C.ring)
    iz = C.ring.is_zero
    others = [k for k in range(len(slots)) if k not in (pa, pb)]
    # iterate nonzero entries of C once, then fan out over identity blocks
    for i2 in range(C.dim):
        (ci, cr) = C.multi(i2)
        for j2 in range(C.dim):
            e = C.rows[i2][j2]
            if iz(e):
                continue
            (cj, cs) = C.multi(j2)
            for rest in iproduct(range(n), repeat=len(others)):
                row = [0] * len(slots)
                col = [0] * len(slots)
                for k, v in zip(others, rest):
                    row[k] = v
                    col[k] = v
                row[pa], row[pb] = ci, cr
                col[pa], col[pb] = cj, cs
                out.rows[out.flat(row)][out.flat(col)] = e
    return out


def partial_transpose(A, a):
    return A.partial_transpose(a)


def partial_trace(A, S):
    return A.partial_trace(S)


def std_permutation(n, ring=None, slots=(1, 2)):
    """P = sum_{ij} e_ij (x) e_ji: swaps the two factors."""
    ring = ring or rational_ring()
    out = TensorMatrix.zeros(n, slots, ring)
    for i in range(n):
        for j in range(n):
            out.rows[out.flat((i, j))][out.flat((j, i))] = ring.one
    return out


def h_permutation(n, ring=None, slots=(1, 2)):
    """The q-weighted permutation: diagonal pairs 1, crossings q^{±1}.

    Matrix units are 1-based in the displayed formula; here indices are
    0-based, with "i > j" meaning a strictly lower first index wins the q.
    """
    ring = ring or fraction_ring(("q",))
    q = LaurentFraction.var("q")
    qi = q.inv()
    out = TensorMatrix.zeros(n, slots, ring)
    for i in range(n):
        for j in range(n):
            if i == j:
                v = ring.one
            elif i > j:
                v = q
            else:
                v = qi
            out.rows[out.flat((i, j))][out.flat((j, i))] = v
    return out


def diag_D(n, ring=None, slot=1):
    """D = diag[q^{n-1}, q^{n-3}, ..., q^{1-n}] on one slot."""
    ring = ring or fraction_ring(("q",))
    diag = [
        LaurentFraction.var("q", n - 1 - 2 * i) if n - 1 - 2 * i != 0 else ring.one
        for i in range(n)
    ]
    return TensorMatrix.one_slot_diag(n, slot, ring, diag)


def perm_action(word, m, n, ring=None, cache=None):
    """P^h_sigma as the product of adjacent-swap factors along a reduced word.

    ``word`` lists adjacent transposition indices a (1-based, swapping slots
    a and a+1); the product is taken left to right.
    """
    ring = ring or fraction_ring(("q",))
    slots = tuple(range(1, m + 1))
    out = TensorMatrix.identity(n, slots, ring)
    ph = h_permutation(n, ring)
    for a in word:
        if not 1 <= a <= m - 1:
            raise ValueError(f"adjacent index {a} out of range for m={m}")
        out = out.matmul(embed_pair(ph, a, a + 1, slots), cache=cache)
    return out


def slot_permutation(sigma, m, n, ring=None):
    """Classical P_sigma: sends the slot-a component to slot sigma(a).

    ``sigma`` is a 1-based tuple: sigma[a-1] = sigma(a).
    """
    ring = ring or fraction_ring(("q",))
    slots = tuple(range(1, m + 1))
    out = TensorMatrix.zeros(n, slots, ring)
    for col in iproduct(range(n), repeat=m):
        row = [0] * m
        for a in range(m):
            row[sigma[a] - 1] = col[a]
        out.rows[out.flat(row)][out.flat(col)] = ring.one
    return out
