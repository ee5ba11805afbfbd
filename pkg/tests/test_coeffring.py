"""Coefficient rings: exact fractions and window-tracked series.

The randomized blocks implement the strictly-larger-window oracle: every
operation is recomputed on a bigger window and the small-window result
must agree everywhere its own guarantee claims knowledge.
"""

import random
from fractions import Fraction

import pytest

from trigrmat.coeffring import (
    FieldDivisionError,
    LaurentFraction,
    NonInvertibleError,
    PrecisionError,
    SeriesWindow,
    TruncSeries,
    lf_const,
    lf_var,
    lp_const,
    lp_var,
    series_from_records,
    series_to_records,
    ts_arith,
    ts_exp_expand,
    ts_from_fraction,
    ts_taylor_shift,
)
from trigrmat.coeffring.series import LayeredSeries, series_json


# -- Laurent fractions -------------------------------------------------------------


def test_fraction_field_basics():
    q = lf_var("q")
    one = lf_const(1, ("q",))
    a = (q - 1) * (q + 1)
    b = q * q - 1
    assert a == b
    assert (a / b).is_one()
    assert (q ** -2) * q * q == one
    # int and Fraction coerce on either side
    assert (q + 1) - 1 == q
    assert (Fraction(1, 2) * q) * 2 == q


def test_fraction_division_by_zero_message():
    q = lf_var("q")
    zero = lf_const(0, ("q",))
    with pytest.raises(FieldDivisionError) as ei:
        q / zero
    assert str(ei.value) == "division by zero in fraction field"
    with pytest.raises(FieldDivisionError):
        zero.inv()


def test_fraction_unhashable_by_design():
    assert LaurentFraction.__hash__ is None


def test_euler_derivative_product_rule():
    # euler = x d/dx; check the product rule on a nontrivial pair
    x = lf_var("x")
    q = lf_var("q", vars=("q", "x"))
    f = (lf_const(1, ("q", "x")) - x).inv()
    g = x * q + lf_const(3, ("q", "x"))
    lhs = (f * g).euler("x")
    rhs = f.euler("x") * g + f * g.euler("x")
    assert lhs == rhs
    # euler(1/(1-x)) = x/(1-x)^2
    one = lf_const(1, ("x",))
    xx = lf_var("x", vars=("x",))
    assert (one - xx).inv().euler("x") == xx / ((one - xx) * (one - xx))


def test_subs_monomial_shift():
    # x -> x q^{-2} on 1/(1 - x) hits the shifted pole
    one = lf_const(1, ("q", "x"))
    x = lf_var("x", vars=("q", "x"))
    f = (one - x).inv()
    g = f.subs_monomial("x", Fraction(1), {"x": 1, "q": -2})
    q = lf_var("q", vars=("q", "x"))
    assert g == (one - x * q ** -2).inv()


# -- windows and explicit expansions -------------------------------------------------


def test_invalid_windows_raise():
    with pytest.raises(PrecisionError) as ei:
        SeriesWindow(2, 1, 3)
    assert str(ei.value) == "precision exhausted"
    with pytest.raises(PrecisionError):
        SeriesWindow(0, 4, -1)


def test_known_expansion_geometric():
    # 1/(1-x) at x -> e^u: layer 0 is -1/u + 1/2 - u/12 + u^3/720 ...
    one = lp_const(1, ("x",))
    x = lp_var("x", vars=("x",))
    w = SeriesWindow(-3, 4, 2)
    f = ts_from_fraction(LaurentFraction(one, one - x), w)
    lay = f.h_layer(0)
    assert lay[-1] == -1
    assert lay[0] == Fraction(1, 2)
    assert lay[1] == Fraction(-1, 12)
    assert lay.get(2, Fraction(0)) == 0
    assert lay[3] == Fraction(1, 720)
    # pure exponential constructor agrees with the fraction route
    e = ts_exp_expand(1, Fraction(1, 2), w)
    g = ts_from_fraction(lf_var("x") * lf_var("q", vars=("q", "x")), w)
    assert not e.diff_witnesses(g)


def test_coefficient_access_contract():
    w = SeriesWindow(-2, 3, 2)
    a = TruncSeries(w, {(-2, 0): Fraction(5), (1, 2): Fraction(-1, 3)})
    assert a.coefficient(1, 2) == Fraction(-1, 3)
    assert a.coefficient(2, 1) == 0
    assert a.coefficient(-7, 0) == 0  # below the floor means known zero
    with pytest.raises(PrecisionError) as ei:
        a.coefficient(4, 0)  # above the ceiling means unknown
    assert str(ei.value) == "precision exhausted"
    with pytest.raises(PrecisionError):
        a.coefficient(0, 3)


def test_stored_key_outside_window_rejected():
    w = SeriesWindow(-1, 2, 1)
    with pytest.raises(ValueError):
        TruncSeries(w, {(3, 0): Fraction(1)})


def test_restrict_floor_soundness():
    w = SeriesWindow(-3, 3, 1)
    a = TruncSeries(w, {(-2, 0): Fraction(1)})
    with pytest.raises(PrecisionError):
        a.restrict(SeriesWindow(-1, 3, 1))
    b = a.restrict(SeriesWindow(-2, 2, 1))
    assert b.coeffs == {(-2, 0): Fraction(1)}


def test_monomial_mul_negative_h_shift_guard():
    w = SeriesWindow(0, 2, 2)
    a = TruncSeries(w, {(0, 1): Fraction(2), (1, 2): Fraction(1)})
    shifted = a.monomial_mul(0, -1)
    assert shifted.coeffs == {(0, 0): Fraction(2), (1, 1): Fraction(1)}
    bad = TruncSeries(w, {(0, 0): Fraction(1)})
    with pytest.raises(ValueError) as ei:
        bad.monomial_mul(0, -1)
    assert str(ei.value) == "negative h-shift below the observed h-valuation"


def test_non_invertible_message():
    # anything whose h^0 layer vanishes identically has no reciprocal here
    with pytest.raises(NonInvertibleError) as ei:
        TruncSeries(SeriesWindow(0, 2, 2), {(0, 1): Fraction(3)}).inv()
    assert str(ei.value) == "non-invertible"
    one = lf_const(1, ("q", "x"))
    q = lf_var("q", vars=("q", "x"))
    with pytest.raises(NonInvertibleError):
        ts_from_fraction(one / (q - q ** -1), SeriesWindow(-2, 2, 2))


# -- the randomized window-propagation oracle ---------------------------------------


def _random_fraction(rng):
    """A structured random fraction with an invertible expansion image."""
    one = lp_const(1, ("q", "x"))
    num = lp_const(rng.choice([1, 2, -1, Fraction(1, 2)]), ("q", "x"))
    for _ in range(rng.randrange(3)):
        num = num * (
            lp_const(1, ("q", "x"))
            + lp_var(rng.choice("qx"), rng.choice([1, 2, -1]), vars=("q", "x"))
        )
    den = one
    for _ in range(rng.randrange(2)):
        den = den * (one - lp_var("x", rng.choice([1, 2]), vars=("q", "x")))
    return LaurentFraction(num, den)


SMALL = SeriesWindow(-4, 3, 3)
BIG = SeriesWindow(-7, 7, 5)


def _oracle_compare(small, big):
    """big was computed with strictly more knowledge; small must agree on
    its own guaranteed region, including its known-zero floor claim."""
    w = small.window
    keys = set(small.coeffs) | {
        k for k in big.coeffs if k[0] <= w.u_high and k[1] <= w.h_high
    }
    for (s, l) in keys:
        got = small.coeffs.get((s, l), Fraction(0))
        want = big.coeffs.get((s, l), Fraction(0))
        assert got == want, (s, l, got, want)
    for (s, l), c in big.coeffs.items():
        if s < w.u_low and l <= w.h_high:
            assert c == 0, f"floor claim broken at {(s, l)}"


@pytest.mark.parametrize("seed", [11, 12, 13, 14])
def test_window_propagation_add_mul(seed):
    rng = random.Random(seed)
    for _ in range(12):
        fa, fb = _random_fraction(rng), _random_fraction(rng)
        a, b = ts_from_fraction(fa, SMALL), ts_from_fraction(fb, SMALL)
        A, B = ts_from_fraction(fa, BIG), ts_from_fraction(fb, BIG)
        for op in ("add", "mul"):
            small = ts_arith(a, b, op)
            big = ts_arith(A, B, op)
            _oracle_compare(small, big)
        # documented product window rule, verbatim
        prod = a * b
        assert prod.window.u_low == a.window.u_low + b.window.u_low
        assert prod.window.u_high == min(
            a.window.u_high + b.u_val(), b.window.u_high + a.u_val()
        )
        assert prod.window.h_high == min(
            a.window.h_high + b.h_val(), b.window.h_high + a.h_val()
        )


@pytest.mark.parametrize("seed", [21, 22, 23])
def test_window_propagation_inv(seed):
    rng = random.Random(seed)
    hits = 0
    while hits < 8:
        fr = _random_fraction(rng)
        a = ts_from_fraction(fr, SMALL)
        if not a.h_layer(0):
            continue
        hits += 1
        small = ts_arith(a, a, "inv")
        big = ts_from_fraction(fr, BIG).inv()
        _oracle_compare(small, big)
        # inverse really inverts on the common region
        assert (small * a).equals_on_common(TruncSeries.one(SMALL))


@pytest.mark.parametrize("seed", [31, 32])
def test_window_propagation_shift_reflect_derivative(seed):
    rng = random.Random(seed)
    for _ in range(8):
        fr = _random_fraction(rng)
        a = ts_from_fraction(fr, SMALL)
        A = ts_from_fraction(fr, BIG)
        _oracle_compare(ts_taylor_shift(a, 2), ts_taylor_shift(A, 2))
        _oracle_compare(a.derivative(), A.derivative())
        # reflection oracle through the fraction itself: substitute x -> 1/x
        refl = ts_from_fraction(fr.subs_monomial("x", Fraction(1), {"x": -1}), BIG)
        assert not A.reflect_u().diff_witnesses(refl)
        _oracle_compare(a.reflect_u(), refl)


def test_reflect_parity_fixture():
    w = SeriesWindow(-1, 3, 2)
    a = TruncSeries(w, {(2, 0): Fraction(1), (0, 1): Fraction(1)})
    assert a.reflect_u() == a  # even part is fixed
    b = TruncSeries(w, {(-1, 0): Fraction(2), (3, 2): Fraction(5)})
    assert b.reflect_u().coeffs == {(-1, 0): Fraction(-2), (3, 2): Fraction(-5)}
    assert b.reflect_u().window == w


def test_taylor_shift_is_exact_qsquared_shift():
    # x -> e^u makes u -> u + 2h the same as x -> x q^4
    one = lp_const(1, ("q", "x"))
    x = lp_var("x", vars=("q", "x"))
    fr = LaurentFraction(one, one - x)
    w = SeriesWindow(-6, 6, 3)
    lhs = ts_taylor_shift(ts_from_fraction(fr, w), 2)
    q4 = fr.subs_monomial("x", Fraction(1), {"x": 1, "q": 4})
    rhs = ts_from_fraction(q4, w)
    assert not lhs.diff_witnesses(rhs)


# -- serialization -------------------------------------------------------------------


def test_series_round_trip_bit_exact():
    w = SeriesWindow(-2, 4, 3)
    a = TruncSeries(
        w,
        {(-2, 1): Fraction(-7, 3), (0, 0): Fraction(1), (4, 3): Fraction(10**40, 9)},
    )
    b = series_from_records(series_to_records(a))
    assert a == b
    assert series_json(a) == series_json(b)


# -- the layered refinement ----------------------------------------------------------


def test_layered_exact_monomial_keeps_ceilings():
    # multiplying by an exact pure-h monomial must not shrink the per-layer
    # guarantee; the rectangular rule collapses on the same product
    w = SeriesWindow(-6, 6, 3)
    one = lp_const(1, ("q", "x"))
    x = lp_var("x", vars=("q", "x"))
    geom = ts_from_fraction(LaurentFraction(one, one - x), w)
    f = LayeredSeries.from_trunc(geom)
    mono = TruncSeries(SeriesWindow(0, 0, 3), {(0, 1): Fraction(3)})
    g = f * LayeredSeries.from_exact(mono)
    assert g.u_highs[0] >= 10**9  # layer 0 is known to vanish
    assert list(g.u_highs[1:]) == [6, 6, 6]
    assert g.layers[1] == {s: 3 * v for s, v in f.layers[0].items()}
    rect = geom * mono
    assert rect.window.u_high == -1  # the rectangle pays the partner's pole


def test_layered_diff_witnesses_ignores_floors():
    a = LayeredSeries(-2, [{-2: Fraction(1)}], [5])
    b = LayeredSeries(0, [{}], [5])
    ws = a.diff_witnesses(b, limit=4)
    assert ws == [(-2, 0, Fraction(1), Fraction(0))]
