"""Trigonometric exchange matrices and the identity battery around them.

Three forms of one object live here.  The two-parameter matrix has exact
Laurent-fraction entries in (q, x_u, x_v) and is polynomial.  The
one-parameter form divides out the diagonal scalar and picks up a simple
pole at x = q^2.  The normalized series form multiplies the
one-parameter entries by the scalar normalizer g so that unitarity and
the two crossing identities hold inside a truncation window.

Exact identities (Yang-Baxter, the two-point factorization) are checked
entrywise in the fraction field.  Window identities are checked layer by
layer; product chains carry per-layer ceilings, so a comparison never
claims more than its inputs guarantee.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from time import perf_counter

from .coeffring.laurent import LaurentFraction, lf_const, lf_var
from .coeffring.series import (
    _INF,
    LayeredSeries,
    NonInvertibleError,
    SeriesWindow,
    TruncSeries,
    ts_exp_expand,
    ts_from_fraction,
)
from .normalizer import GSeries, build_gseries, build_gtilde
from .report import CheckResult, coefficient_witness
from .tensoralg import (
    MulCache,
    TensorMatrix,
    embed_pair,
    fraction_ring,
    layered_ring,
    series_ring,
    std_permutation,
)

_Q_ASSIGN = (Fraction(0), Fraction(1, 2))
_RV1 = ("q", "x")


# -- exact fraction matrices ------------------------------------------------------


def _r2p_on(n, xu, xv, vars):
    """Two-parameter matrix with spectral variables named xu, xv."""
    ring = fraction_ring(vars)
    q = lf_var("q", vars=vars)
    qi = lf_var("q", -1, vars=vars)
    a = lf_var(xu, vars=vars)
    b = lf_var(xv, vars=vars)
    cross = qi - q
    entries = {}
    for i in range(n):
        entries[((i, i), (i, i))] = a * qi - b * q
        for j in range(n):
            if i == j:
                continue
            entries[((i, j), (i, j))] = a - b
            entries[((i, j), (j, i))] = cross * (a if i > j else b)
    return TensorMatrix.two_slot(n, (1, 2), ring, entries)


def build_R2p(n):
    return _r2p_on(n, "x_u", "x_v", ("q", "x_u", "x_v"))


def _r1p_fractions():
    """(diagonal-pair, lower, upper) entries of the one-parameter form."""
    one = lf_const(1, _RV1)
    x = lf_var("x", vars=_RV1)
    qi2 = lf_var("q", -2, vars=_RV1)
    den = one - x * qi2
    pair = (one - x) * lf_var("q", -1, vars=_RV1) / den
    lower = (one - qi2) * x / den
    upper = (one - qi2) / den
    return pair, lower, upper


def build_R1p(n):
    ring = fraction_ring(_RV1)
    pair, lower, upper = _r1p_fractions()
    entries = {}
    for i in range(n):
        entries[((i, i), (i, i))] = ring.one
        for j in range(n):
            if i == j:
                continue
            entries[((i, j), (i, j))] = pair
            entries[((i, j), (j, i))] = lower if i > j else upper
    return TensorMatrix.two_slot(n, (1, 2), ring, entries)


def verify_two_point_relation(n):
    """R2p(u,v) = -q x_v (1 - x_u x_v^{-1} q^{-2}) R1p(u-v), exactly.

    The one-parameter entries are pulled up by x -> x_u / x_v; the scalar
    prefactor restores the polynomial two-parameter entries.
    """
    t0 = perf_counter()
    rv = ("q", "x_u", "x_v")
    q = lf_var("q", vars=rv)
    xv = lf_var("x_v", vars=rv)
    ratio = lf_var("x_u", vars=rv) * lf_var("x_v", -1, vars=rv)
    scalar = -(q * xv) * (lf_const(1, rv) - ratio * lf_var("q", -2, vars=rv))
    r2 = build_R2p(n)
    r1 = build_R1p(n)
    bad = []
    for fi in range(r2.dim):
        for fj in range(r2.dim):
            lifted = r1.rows[fi][fj].subs_monomial("x", 1, {"x_u": 1, "x_v": -1})
            if not (scalar * lifted == r2.rows[fi][fj]):
                bad.append((r2.multi(fi), r2.multi(fj)))
    status = "pass" if not bad else "fail"
    wit = None if not bad else {"row": list(bad[0][0]), "col": list(bad[0][1])}
    return CheckResult(
        "r.two-point-factorization",
        {"n": n},
        status,
        witness=wit,
        seconds=perf_counter() - t0,
    )


# -- series expansion --------------------------------------------------------------


def _entry_assign(shift, reflect):
    sgn = Fraction(-1) if reflect else Fraction(1)
    return {"x": (sgn, sgn * Fraction(shift)), "q": _Q_ASSIGN}


def _expand_entry(fr, window, shift=Fraction(0), reflect=False):
    """Expand a one-parameter entry at x -> exp(+-(u + shift h)).

    Inversion of the denominator needs one u-power of slack per h-layer,
    so the expansion runs on a deepened floor and is then cut back; the
    entries themselves never reach below -h_high.
    """
    deep = SeriesWindow(
        min(window.u_low, -(window.h_high + 1)), window.u_high, window.h_high
    )
    ts = ts_from_fraction(fr, deep, assign=_entry_assign(shift, reflect))
    return ts.restrict(window)


def _tall(window):
    # layered products lose one u-unit of ceiling per h-layer; expanding
    # the factors h_high units higher keeps the requested rectangle intact
    return SeriesWindow(
        window.u_low, window.u_high + window.h_high, window.h_high
    )


def _g_layered(gs, window, shift=Fraction(0), reflect=False):
    """g at +-(u + shift h) as a layered element with tall ceilings."""
    w = _tall(window)
    gt = build_gtilde(gs.fc, w, shift=shift, reflect=reflect)
    pw = SeriesWindow(0, gs.psi.window.u_high, window.h_high)
    psi = LayeredSeries.from_exact(gs.psi.restrict(pw))
    return psi * LayeredSeries.from_trunc(gt)


def _place_entries(n, ring, diag, pair, lower, upper):
    entries = {}
    for i in range(n):
        entries[((i, i), (i, i))] = diag
        for j in range(n):
            if i == j:
                continue
            entries[((i, j), (i, j))] = pair
            entries[((i, j), (j, i))] = lower if i > j else upper
    return TensorMatrix.two_slot(n, (1, 2), ring, entries)


def _rbar_layered(n, window, ring, shift=Fraction(0), reflect=False):
    """Unnormalized one-parameter matrix expanded into layered entries."""
    w = _tall(window)
    pair, lower, upper = _r1p_fractions()
    ent = [
        LayeredSeries.from_trunc(_expand_entry(f, w, shift, reflect))
        for f in (pair, lower, upper)
    ]
    one = LayeredSeries.one(window.u_low, window.h_high)
    return _place_entries(n, ring, one, *ent)


def _r_layered(n, gs, window, ring, shift=Fraction(0), reflect=False):
    """Normalized matrix g * rbar with entries kept layered."""
    w = _tall(window)
    g = _g_layered(gs, window, shift=shift, reflect=reflect)
    pair, lower, upper = _r1p_fractions()
    ent = [
        g * LayeredSeries.from_trunc(_expand_entry(f, w, shift, reflect))
        for f in (pair, lower, upper)
    ]
    return _place_entries(n, ring, g, *ent)


def build_R(n, g, window):
    """Normalized series matrix on the window; entries g(u) * rbar(u)."""
    assert isinstance(g, GSeries) and g.n == n
    assert g.window.h_high >= window.h_high
    lr = layered_ring(window.u_low, window.h_high)
    lay = _r_layered(n, g, window, lr)
    sr = series_ring(window)
    return lay.map_entries(lambda e: e.to_trunc(window), sr)


@dataclass
class RMatrixBundle:
    """The three forms plus the normalizer they share."""

    n: int
    R2p: TensorMatrix
    R1p: TensorMatrix
    R_norm: TensorMatrix
    g: GSeries
    window: SeriesWindow


def build_bundle(n, window, gs=None):
    if gs is None:
        gs = build_gseries(n, window)
    return RMatrixBundle(
        n, build_R2p(n), build_R1p(n), build_R(n, gs, window), gs, window
    )


# -- layered matrix utilities ------------------------------------------------------


def _transpose_slots(M):
    """P * M * P for a two-slot matrix: relabel (i,j) -> (j,i) both sides."""
    out = TensorMatrix.zeros(M.n, M.slots, M.ring)
    iz = M.ring.is_zero
    for fi in range(M.dim):
        i, j = M.multi(fi)
        for fj in range(M.dim):
            e = M.rows[fi][fj]
            if iz(e):
                continue
            k, l = M.multi(fj)
            out.rows[out.flat((j, i))][out.flat((l, k))] = e
    return out


def _strip_unit_layer(e, diag):
    lay0 = e.layers[0]
    want = {0: Fraction(1)} if diag else {}
    if lay0 != want:
        raise NonInvertibleError("non-invertible")
    return LayeredSeries(
        e.u_low,
        [{}] + [dict(x) for x in e.layers[1:]],
        [_INF] + list(e.u_highs[1:]),
    )


def _matrix_inverse_unit(M, cache=None):
    """Inverse of a layered matrix whose h^0 layer is the identity.

    The correction N = M - 1 is nilpotent in the h-grading, so the
    inverse is the finite alternating geometric sum in N.
    """
    z = M.ring.zero
    rows = []
    for i in range(M.dim):
        row = []
        for j in range(M.dim):
            e = M.rows[i][j]
            if M.ring.is_zero(e):
                if i == j:
                    raise NonInvertibleError("non-invertible")
                row.append(z)
                continue
            row.append(_strip_unit_layer(e, i == j))
        rows.append(row)
    N = TensorMatrix(M.n, M.slots, M.ring, rows)
    acc = TensorMatrix.identity(M.n, M.slots, M.ring)
    term = acc
    cache = cache or MulCache()
    for _ in range(z.h_high):
        term = -term.matmul(N, cache)
        if term.is_zero_matrix():
            break
        acc = acc + term
    return acc


def _matrix_diffs(A, B, limit=6):
    """Entrywise layered mismatches: (row, col, s, l, left, right)."""
    out = []
    for fi in range(A.dim):
        for fj in range(A.dim):
            for s, l, a, b in A.rows[fi][fj].diff_witnesses(
                B.rows[fi][fj], limit=limit - len(out)
            ):
                out.append((A.multi(fi), A.multi(fj), s, l, a, b))
            if len(out) >= limit:
                return out
    return out


def _identity_matrix_diffs(M, limit=6):
    z = M.ring.zero
    one = LayeredSeries.one(z.u_low, z.h_high)
    out = []
    for fi in range(M.dim):
        for fj in range(M.dim):
            target = one if fi == fj else z
            for s, l, a, b in M.rows[fi][fj].diff_witnesses(
                target, limit=limit - len(out)
            ):
                out.append((M.multi(fi), M.multi(fj), s, l, a, b))
            if len(out) >= limit:
                return out
    return out


def _diffs_check(check_id, params, diffs, t0, detail=""):
    if not diffs:
        return CheckResult(
            check_id, params, "pass", seconds=perf_counter() - t0, detail=detail
        )
    row, col, s, l, a, b = diffs[0]
    return CheckResult(
        check_id,
        params,
        "fail",
        witness=coefficient_witness(s, l, a, b, row=list(row), col=list(col)),
        seconds=perf_counter() - t0,
        detail=detail,
    )


def _control_check(check_id, params, diffs, t0, detail_ok, detail_bad, layer=None):
    """A negative control passes when the expected obstruction appears.

    With layer=None any nonzero deviation counts; otherwise the deviation
    must show up at exactly that h-layer.
    """
    hit = next((d for d in diffs if layer is None or d[3] == layer), None)
    if hit is not None:
        row, col, s, l, a, b = hit
        return CheckResult(
            check_id,
            params,
            "pass",
            witness=coefficient_witness(s, l, a, b, row=list(row), col=list(col)),
            seconds=perf_counter() - t0,
            detail=detail_ok,
        )
    return CheckResult(
        check_id, params, "fail", seconds=perf_counter() - t0, detail=detail_bad
    )


# -- window identity checks --------------------------------------------------------


def verify_unitarity(bundle, window=None):
    """R12(u) R21(-u) = 1 for the normalized matrix.

    The reflected matrix is rebuilt from the fraction entries with
    x -> exp(-u) (the truncated entries have full tails, so reflection
    is not a coefficient relabeling), then conjugated by the swap.
    The second result checks that the unnormalized product is ALSO the
    identity: unitarity does not see the scalar normalizer at all (its
    reflection product is 1), so the normalizer's real constraint is the
    crossing pair, where dropping it does break the identity.
    """
    w = window or bundle.window
    n = bundle.n
    lr = layered_ring(w.u_low, w.h_high)
    cache = MulCache()
    t0 = perf_counter()
    left = _r_layered(n, bundle.g, w, lr)
    right = _transpose_slots(_r_layered(n, bundle.g, w, lr, reflect=True))
    diffs = _identity_matrix_diffs(left.matmul(right, cache))
    out = [
        _diffs_check(
            "r.unitarity", {"n": n, "window": w.as_dict()}, diffs, t0
        )
    ]
    if n >= 2:
        t1 = perf_counter()
        bl = _rbar_layered(n, w, lr)
        br = _transpose_slots(_rbar_layered(n, w, lr, reflect=True))
        cdiffs = _identity_matrix_diffs(bl.matmul(br, cache), limit=16)
        out.append(
            _diffs_check(
                "rbar.unitarity-control",
                {"n": n, "window": w.as_dict()},
                cdiffs,
                t1,
                detail=(
                    "the unnormalized reflection product is exactly the "
                    "identity; unitarity places no constraint on the "
                    "normalizer (crossing does)"
                ),
            )
        )
    return out


def _exp_h_layered(beta, h_high):
    ts = ts_exp_expand(Fraction(0), Fraction(beta), SeriesWindow(0, 0, h_high))
    return LayeredSeries.from_exact(ts)


def _gauge_matrix(n, h_high, ring, slot):
    """diag[q^{n-1}, q^{n-3}, ..., q^{1-n}] embedded on one of two slots."""
    dvals = [_exp_h_layered(Fraction(n - 1 - 2 * i, 2), h_high) for i in range(n)]
    entries = {}
    for i in range(n):
        for j in range(n):
            v = dvals[i] if slot == 1 else dvals[j]
            entries[((i, j), (i, j))] = v
    return TensorMatrix.two_slot(n, (1, 2), ring, entries)


def verify_crossing(R, n, window=None):
    """Both transpose identities for the normalized matrix.

    (R12(u)^{-1})^{t2} D2 R12(u+nh)^{t2} = D2 and
    R12(u+nh)^{t1} D1 (R12(u)^{-1})^{t1} = D1, with the shift done by
    Taylor re-expansion and the inverse layer by layer in h.  Controls:
    dropping the gauge diagonal must break the identity somewhere (it
    first does at h^3), and so must replacing the normalized matrix by
    the unnormalized one (first break at h^2).
    """
    w = window or R.rows[0][0].window
    lr = layered_ring(w.u_low, w.h_high)
    sr_ok = all(isinstance(e, TruncSeries) for row in R.rows for e in row)
    assert sr_ok, "crossing expects a matrix over truncated series"
    cache = MulCache()
    params = {"n": n, "window": w.as_dict()}
    t0 = perf_counter()
    M = R.map_entries(LayeredSeries.from_trunc, lr)
    Minv = _matrix_inverse_unit(M, cache)
    Mshift = M.map_entries(lambda e: e.taylor_shift(n), lr)
    D1 = _gauge_matrix(n, w.h_high, lr, slot=1)
    D2 = _gauge_matrix(n, w.h_high, lr, slot=2)
    it2 = Minv.partial_transpose(2)
    st2 = Mshift.partial_transpose(2)
    lhs1 = it2.matmul(D2, cache).matmul(st2, cache)
    out = [_diffs_check("r.crossing-t2", params, _matrix_diffs(lhs1, D2), t0)]

    t0 = perf_counter()
    it1 = Minv.partial_transpose(1)
    st1 = Mshift.partial_transpose(1)
    lhs2 = st1.matmul(D1, cache).matmul(it1, cache)
    out.append(_diffs_check("r.crossing-t1", params, _matrix_diffs(lhs2, D1), t0))

    if n >= 2:
        # the controls detect breaks that n = 1 cannot exhibit (the gauge
        # is the scalar 1 and the unnormalized matrix equals R)
        t0 = perf_counter()
        bare = it2.matmul(st2, cache)
        out.append(
            _control_check(
                "crossing.trivial-gauge-control",
                params,
                _identity_matrix_diffs(bare, limit=16),
                t0,
                detail_ok="dropping the gauge diagonal breaks the identity",
                detail_bad="identity held without the gauge diagonal",
            )
        )

        t0 = perf_counter()
        B = _rbar_layered(n, w, lr)
        Binv = _matrix_inverse_unit(B, cache)
        Bshift = B.map_entries(lambda e: e.taylor_shift(n), lr)
        blhs = Binv.partial_transpose(2).matmul(D2, cache).matmul(
            Bshift.partial_transpose(2), cache
        )
        out.append(
            _control_check(
                "rbar.crossing-control",
                params,
                _matrix_diffs(blhs, D2, limit=16),
                t0,
                detail_ok="unnormalized matrix breaks crossing",
                detail_bad="crossing held for the unnormalized matrix",
            )
        )
    return out


def verify_ybe(n):
    """Exact Yang-Baxter check with three spectral variables.

    R12(x1,x2) R13(x1,x3) R23(x2,x3) = R23(x2,x3) R13(x1,x3) R12(x1,x2)
    entrywise in the fraction field; all entries are polynomial, so this
    is a finite identity with no truncation anywhere.
    """
    t0 = perf_counter()
    rv = ("q", "x1", "x2", "x3")
    m12 = embed_pair(_r2p_on(n, "x1", "x2", rv), 1, 2, 3)
    m13 = embed_pair(_r2p_on(n, "x1", "x3", rv), 1, 3, 3)
    m23 = embed_pair(_r2p_on(n, "x2", "x3", rv), 2, 3, 3)
    cache = MulCache()
    lhs = m12.matmul(m13, cache).matmul(m23, cache)
    rhs = m23.matmul(m13, cache).matmul(m12, cache)
    bad = lhs.diff_entries(rhs, limit=3)
    wit = None
    if bad:
        wit = {"row": list(bad[0][0]), "col": list(bad[0][1])}
    return CheckResult(
        "r.ybe-exact",
        {"n": n},
        "pass" if not bad else "fail",
        witness=wit,
        seconds=perf_counter() - t0,
    )


# -- gradation and the rational limit ----------------------------------------------


def grade_highest_component(a):
    """Terms of maximal degree under deg u^s h^l = -s - l; ties all kept.

    Accepts a truncated series or a matrix of them; for a matrix the
    degree is global, so entries that sit entirely below it become zero.
    """
    if isinstance(a, TensorMatrix):
        best = None
        for row in a.rows:
            for e in row:
                for s, l in e.coeffs:
                    d = -s - l
                    if best is None or d > best:
                        best = d
        if best is None:
            raise ValueError("zero input")
        deg = best

        def cut(e):
            kept = {k: c for k, c in e.coeffs.items() if -k[0] - k[1] == deg}
            return TruncSeries(e.window, kept)

        return a.map_entries(cut)
    comp, deg = a.grade_highest()
    if deg is None:
        raise ValueError("zero input")
    return comp


def _tau_line_series(pairs, window):
    # terms c_k (h/u)^k as a truncated series supported on s + l = 0
    return TruncSeries(window, {(-k, k): c for k, c in pairs if c})


def _gbin(a, j):
    """Generalized binomial C(a, j) for integer a of either sign."""
    num = 1
    for i in range(j):
        num *= a - i
    return Fraction(num, math.factorial(j))


def verify_rational_limit(bundle, gbar=None):
    """Three checks on the highest-degree components.

    (i) the highest component of the normalized matrix is
    gbar(u) (1 - (h/u) P); (ii) that rational matrix satisfies
    unitarity through (h/u)^{h_high}; (iii) the scalar (1 - h/u) gbar
    satisfies its defining shift identity as a polynomial identity in
    h/u through the same order.
    """
    gs = bundle.g
    if gbar is None:
        gbar = gs.gbar_rat
    n = bundle.n
    w = bundle.window
    K = w.h_high
    assert len(gbar) >= K + 1
    out = []

    t0 = perf_counter()
    comp = grade_highest_component(bundle.R_norm)
    P = std_permutation(n)
    diffs = []
    for fi in range(comp.dim):
        for fj in range(comp.dim):
            pairs = []
            for k in range(K + 1):
                c = Fraction(0)
                if fi == fj:
                    c += gbar[k]
                if k >= 1 and P.rows[fi][fj] == 1:
                    c -= gbar[k - 1]
                pairs.append((k, c))
            want = _tau_line_series(pairs, w)
            for s, l, a, b in comp.rows[fi][fj].diff_witnesses(want, limit=3):
                diffs.append((comp.multi(fi), comp.multi(fj), s, l, a, b))
        if diffs:
            break
    out.append(
        _diffs_check("r.rational-highest", {"n": n, "order": K}, diffs, t0)
    )

    t0 = perf_counter()
    lr = layered_ring(w.u_low, K)
    rat = comp.map_entries(
        lambda e: LayeredSeries.from_exact(e), lr
    )
    refl = comp.map_entries(
        lambda e: LayeredSeries.from_exact(
            TruncSeries(
                e.window,
                {(s, l): (c if s % 2 == 0 else -c) for (s, l), c in e.coeffs.items()},
            )
        ),
        lr,
    )
    prod = rat.matmul(_transpose_slots(refl), MulCache())
    out.append(
        _diffs_check(
            "r.rational-unitarity",
            {"n": n, "order": K},
            _identity_matrix_diffs(prod),
            t0,
        )
    )

    t0 = perf_counter()
    d = [gs.g_rat.coefficient(-m, m) for m in range(K + 1)]
    lhs = [Fraction(0)] * (K + 1)
    rhs = [Fraction(0)] * (K + 1)
    for m in range(K + 1):
        # g_rat(u+nh) u (u+nh) / u^2 = sum_m d_m tau^m (1+n tau)^{1-m}
        for j in range(K + 1 - m):
            lhs[m + j] += d[m] * _gbin(1 - m, j) * Fraction(n) ** j
        rhs[m] += d[m]
        if m + 1 <= K:
            rhs[m + 1] += d[m] * Fraction(n)
        if m + 2 <= K:
            rhs[m + 2] += d[m] * Fraction((n - 1))
    # (1+tau)(1+(n-1)tau) = 1 + n tau + (n-1) tau^2
    bad = [(k, lhs[k], rhs[k]) for k in range(K + 1) if lhs[k] != rhs[k]]
    wit = None
    if bad:
        k, a, b = bad[0]
        wit = coefficient_witness(-k, k, a, b)
    out.append(
        CheckResult(
            "g.rational-shift",
            {"n": n, "order": K},
            "pass" if not bad else "fail",
            witness=wit,
            seconds=perf_counter() - t0,
        )
    )
    return out
