"""Window-tracked truncations of Laurent-in-u, power-in-h series over Fraction.

An element of the ambient ring is a formal sum  sum_{s,l} c_{s,l} u^s h^l  with
l >= 0 and, in every fixed h-layer, u-exponents bounded below.  A TruncSeries
carries a rectangular guarantee:

  * ``u_low``  is a support floor: every coefficient with s < u_low (at any
    layer l <= h_high) is known to vanish;
  * ``u_high`` and ``h_high`` are knowledge ceilings: coefficients with
    s <= u_high and l <= h_high are exactly the stored values (absent = zero),
    while anything above either ceiling is unknown, never silently zero.

Every operation recomputes the propagated guarantee from the operands'
windows and observed valuations.  When a requested guarantee cannot be met
the operation raises PrecisionError("precision exhausted") rather than
returning wrong zeros.

LayeredSeries at the bottom of the module is an engine-internal refinement
that tracks one u-ceiling per h-layer.  Long product chains of series whose
layer-l pole order grows like l (R-matrix entries do) keep full strength
there, whereas the rectangular rule must shrink u_high by the global pole
order once per product.  Every LayeredSeries guarantee implies the
corresponding rectangular one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from .laurent import LaurentFraction, LaurentPoly

__all__ = [
    "PrecisionError",
    "NonInvertibleError",
    "SeriesWindow",
    "TruncSeries",
    "ts_arith",
    "ts_exp_expand",
    "ts_geom_inverse",
    "ts_from_fraction",
    "ts_taylor_shift",
    "ts_reflect_u",
    "ts_derivative",
    "ts_sqrt",
    "series_to_records",
    "series_from_records",
    "clear_expansion_cache",
    "LayeredSeries",
]

_ZERO = Fraction(0)
_INF = 10**9


class PrecisionError(ArithmeticError):
    """A coefficient or window was requested outside the guaranteed region."""


class NonInvertibleError(ArithmeticError):
    """Inversion of an element whose h^0 layer vanishes on its window."""


@dataclass(frozen=True)
class SeriesWindow:
    u_low: int
    u_high: int
    h_high: int

    def __post_init__(self):
        if self.u_low > self.u_high:
            raise PrecisionError("precision exhausted")
        if self.h_high < 0:
            raise PrecisionError("precision exhausted")

    def contains(self, s, l):
        return self.u_low <= s <= self.u_high and 0 <= l <= self.h_high

    def guaranteed(self, s, l):
        """Whether the coefficient (s, l) is determined by this window."""
        return s <= self.u_high and 0 <= l <= self.h_high

    def as_dict(self):
        return {"u_low": self.u_low, "u_high": self.u_high, "h_high": self.h_high}


def _merge_int(out, key, val):
    cur = out.get(key, 0) + val
    if cur:
        out[key] = cur
    else:
        out.pop(key, None)


def _int_form(coeffs):
    den = 1
    for v in coeffs.values():
        d = v.denominator
        if den % d:
            g = _gcd(den, d)
            den = den // g * d
    return {k: int(v * den) for k, v in coeffs.items()}, den


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def _convolve(ca, cb, u_cap, h_cap):
    """Exact convolution of two (s, l)-keyed Fraction dicts, capped above."""
    if not ca or not cb:
        return {}
    na, da = _int_form(ca)
    nb, db = _int_form(cb)
    items_b = sorted(nb.items())
    out = {}
    for (sa, la), va in na.items():
        for (sb, lb), vb in items_b:
            s = sa + sb
            if s > u_cap:
                break
            l = la + lb
            if l > h_cap:
                continue
            _merge_int(out, (s, l), va * vb)
    den = da * db
    return {k: Fraction(n, den) for k, n in out.items()}


class TruncSeries:
    """Immutable window-tracked series element; see the module docstring."""

    __slots__ = ("window", "coeffs")

    def __init__(self, window, coeffs):
        self.window = window
        clean = {}
        for (s, l), c in coeffs.items():
            if c == 0:
                continue
            if not window.contains(s, l):
                raise ValueError(f"coefficient ({s},{l}) outside window {window}")
            clean[(s, l)] = c
        self.coeffs = clean

    # -- constructors ---------------------------------------------------------

    @classmethod
    def zero(cls, window):
        return cls(window, {})

    @classmethod
    def const(cls, c, window):
        c = Fraction(c)
        if c == 0:
            return cls(window, {})
        if not window.contains(0, 0):
            raise ValueError("constant does not fit the window")
        return cls(window, {(0, 0): c})

    @classmethod
    def one(cls, window):
        return cls.const(1, window)

    @classmethod
    def monomial(cls, s, l, c, window):
        c = Fraction(c)
        if c == 0:
            return cls(window, {})
        return cls(window, {(s, l): c})

    # -- inspection --------------------------------------------------------------

    def is_zero(self):
        return not self.coeffs

    def u_val(self):
        """Observed u-valuation; support floor for an empty series."""
        if not self.coeffs:
            return self.window.u_low
        return min(s for s, _ in self.coeffs)

    def h_val(self):
        if not self.coeffs:
            return 0
        return min(l for _, l in self.coeffs)

    def coefficient(self, s, l):
        if not self.window.guaranteed(s, l):
            raise PrecisionError("precision exhausted")
        if s < self.window.u_low:
            return _ZERO
        return self.coeffs.get((s, l), _ZERO)

    def h_layer(self, l):
        """The layer-l coefficients as a dict s -> Fraction (guaranteed region)."""
        if l > self.window.h_high:
            raise PrecisionError("precision exhausted")
        return {s: c for (s, ll), c in self.coeffs.items() if ll == l}

    def sorted_items(self):
        return sorted(self.coeffs.items())

    def __eq__(self, other):
        if not isinstance(other, TruncSeries):
            return NotImplemented
        return self.window == other.window and self.coeffs == other.coeffs

    __hash__ = None

    def __repr__(self):
        w = self.window
        bits = [f"{c}*u^{s}*h^{l}" for (s, l), c in self.sorted_items()[:8]]
        more = "" if len(self.coeffs) <= 8 else f" ... ({len(self.coeffs)} terms)"
        body = " + ".join(bits) if bits else "0"
        return f"<TruncSeries [{w.u_low},{w.u_high}]x[0,{w.h_high}] {body}{more}>"

    # -- ring operations --------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = TruncSeries.const(other, self.window)
        if not isinstance(other, TruncSeries):
            return NotImplemented
        a, b = self, other
        w = SeriesWindow(
            min(a.window.u_low, b.window.u_low),
            min(a.window.u_high, b.window.u_high),
            min(a.window.h_high, b.window.h_high),
        )
        coeffs = {}
        for (s, l), c in a.coeffs.items():
            if s <= w.u_high and l <= w.h_high:
                coeffs[(s, l)] = c
        for (s, l), c in b.coeffs.items():
            if s > w.u_high or l > w.h_high:
                continue
            cur = coeffs.get((s, l), _ZERO) + c
            if cur:
                coeffs[(s, l)] = cur
            else:
                coeffs.pop((s, l), None)
        return TruncSeries(w, coeffs)

    __radd__ = __add__

    def __neg__(self):
        return TruncSeries(self.window, {k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = TruncSeries.const(other, self.window)
        if not isinstance(other, TruncSeries):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = Fraction(c)
        if c == 0:
            return TruncSeries(self.window, {})
        return TruncSeries(self.window, {k: v * c for k, v in self.coeffs.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        if not isinstance(other, TruncSeries):
            return NotImplemented
        a, b = self, other
        wa, wb = a.window, b.window
        u_high = min(wa.u_high + b.u_val(), wb.u_high + a.u_val())
        h_high = min(wa.h_high + b.h_val(), wb.h_high + a.h_val())
        u_low = wa.u_low + wb.u_low
        w = SeriesWindow(u_low, u_high, h_high)
        return TruncSeries(w, _convolve(a.coeffs, b.coeffs, w.u_high, w.h_high))

    __rmul__ = __mul__

    # -- inversion ------------------------------------------------------------------

    def inv(self):
        """Multiplicative inverse, computed h-layer by h-layer.

        The h^0 layer is inverted term-by-term as a Laurent series in u; each
        higher layer comes from the triangular recursion
        X_l = -X_0 * sum_{j=1..l} A_j X_{l-j}, with per-layer knowledge
        ceilings propagated exactly and the result window set to their
        intersection.
        """
        return LayeredSeries.from_trunc(self).inv().to_trunc()

    def __pow__(self, k):
        if not isinstance(k, int):
            raise ValueError("series power must be an int")
        if k < 0:
            return self.inv() ** (-k)
        out = TruncSeries.one(self.window)
        for _ in range(k):
            out = out * self
        return out

    # -- reshaping ------------------------------------------------------------------

    def restrict(self, window):
        """Restrict to a sub-window.

        Ceilings may only decrease; the floor may only rise past exponents
        that are visibly absent, otherwise the claim would be unsound.
        """
        w = self.window
        if window.u_high > w.u_high or window.h_high > w.h_high:
            raise PrecisionError("precision exhausted")
        coeffs = {}
        for (s, l), c in self.coeffs.items():
            if s > window.u_high or l > window.h_high:
                continue
            if s < window.u_low:
                raise PrecisionError("precision exhausted")
            coeffs[(s, l)] = c
        return TruncSeries(window, coeffs)

    def monomial_mul(self, s0, l0, c=Fraction(1)):
        """Multiply by c * u^{s0} h^{l0} exactly (l0 may be negative).

        A negative l0 demands h-valuation >= -l0; violating terms mean the
        shifted object does not exist in the ring.
        """
        c = Fraction(c)
        w = self.window
        if l0 < 0:
            for (_, l) in self.coeffs:
                if l + l0 < 0:
                    raise ValueError(
                        "negative h-shift below the observed h-valuation"
                    )
        nw = SeriesWindow(w.u_low + s0, w.u_high + s0, w.h_high + l0)
        if c == 0:
            return TruncSeries(nw, {})
        return TruncSeries(
            nw, {(s + s0, l + l0): v * c for (s, l), v in self.coeffs.items()}
        )

    def taylor_shift(self, c):
        """Substitute u -> u + c*h via the finite Taylor sum over h-orders."""
        return LayeredSeries.from_trunc(self).taylor_shift(c).to_trunc()

    def reflect_u(self):
        """Substitute u -> -u: each stored u^s picks up the sign (-1)^s.

        The knowledge rectangle is unchanged, so this is sound on any
        window.
        """
        return TruncSeries(
            self.window,
            {(s, l): (-c if s % 2 else c) for (s, l), c in self.coeffs.items()},
        )

    def derivative(self):
        """Formal d/du; the knowledge ceiling drops by one."""
        w = self.window
        nw = SeriesWindow(w.u_low - 1, w.u_high - 1, w.h_high)
        coeffs = {}
        for (s, l), c in self.coeffs.items():
            if s != 0 and s - 1 <= nw.u_high:
                coeffs[(s - 1, l)] = c * s
        return TruncSeries(nw, coeffs)

    def sqrt_one(self):
        """Square root with constant term 1 of a pure-h series."""
        for (s, _), _c in self.coeffs.items():
            if s != 0:
                raise ValueError("sqrt requires a pure h-series")
        if self.coefficient(0, 0) != 1:
            raise ValueError("sqrt of series with constant term != 1")
        h = self.window.h_high
        a = [self.coeffs.get((0, l), _ZERO) for l in range(h + 1)]
        x = [Fraction(1)] + [_ZERO] * h
        for l in range(1, h + 1):
            acc = a[l]
            for i in range(1, l):
                acc -= x[i] * x[l - i]
            x[l] = acc / 2
        return TruncSeries(
            self.window, {(0, l): v for l, v in enumerate(x) if v}
        )

    def grade_highest(self):
        """Keep the terms of maximal grade, where deg u^s h^l = -s - l.

        Returns (component, grade); grade is None for the zero series.
        """
        if not self.coeffs:
            return TruncSeries(self.window, {}), None
        g = max(-s - l for (s, l) in self.coeffs)
        kept = {k: c for k, c in self.coeffs.items() if -k[0] - k[1] == g}
        return TruncSeries(self.window, kept), g

    # -- comparison -----------------------------------------------------------------

    def common_guarantee(self, other):
        w1, w2 = self.window, other.window
        return SeriesWindow(
            min(w1.u_low, w2.u_low),
            min(w1.u_high, w2.u_high),
            min(w1.h_high, w2.h_high),
        )

    def diff_witnesses(self, other, limit=4):
        """Mismatching (s, l, left, right) on the common guaranteed region."""
        w = self.common_guarantee(other)
        out = []
        keys = set(self.coeffs) | set(other.coeffs)
        for (s, l) in sorted(keys):
            if s > w.u_high or l > w.h_high:
                continue
            a = self.coeffs.get((s, l), _ZERO)
            b = other.coeffs.get((s, l), _ZERO)
            if a != b:
                out.append((s, l, a, b))
                if len(out) >= limit:
                    break
        return out

    def equals_on_common(self, other):
        return not self.diff_witnesses(other, limit=1)


# -- spec-level operation wrappers ---------------------------------------------------


def ts_arith(a, b, op):
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "inv":
        return a.inv()
    raise ValueError(f"unknown ts_arith op {op!r}")


_FACT = {}


def _fact(n):
    v = _FACT.get(n)
    if v is None:
        v = _FACT[n] = factorial(n)
    return v


def ts_exp_expand(alpha, beta, window):
    """exp(alpha*u + beta*h) on the window: coefficient (s,l) = a^s b^l/(s! l!)."""
    alpha = Fraction(alpha)
    beta = Fraction(beta)
    if window.u_low > 0:
        # the constant term sits at s = 0, below the claimed support floor
        raise PrecisionError("precision exhausted")
    coeffs = {}
    for s in range(max(0, window.u_low), window.u_high + 1):
        cu = alpha**s / _fact(s)
        if cu == 0 and s > 0:
            break
        for l in range(window.h_high + 1):
            if beta == 0 and l > 0:
                break
            c = cu * beta**l / _fact(l)
            if c:
                coeffs[(s, l)] = c
    return TruncSeries(window, coeffs)


def ts_geom_inverse(a, window):
    """(1 - e^{u+ah})^{-1} via the three-factor product.

    The factors are -u^{-1}, the inverse of E = sum_{l>=1}(u+ah)^{l-1}/l!,
    and the ladder (1 + ah/u)^{-1} = sum_k (-a)^k h^k u^{-k}.  The assembled
    window equals the request; the ladder forces u_low <= -(h_high+1) when
    a != 0.
    """
    a = Fraction(a)
    h_high = window.h_high
    kmax = 0 if a == 0 else h_high
    if window.u_low > -1 - kmax:
        raise PrecisionError("precision exhausted")
    pad = h_high + 1
    wide = SeriesWindow(0, max(0, window.u_high) + pad, h_high)
    ecoeffs = {}
    for s in range(wide.u_high + 1):
        for l in range(h_high + 1):
            if a == 0 and l > 0:
                break
            c = Fraction(a**l * _fact(s + l), _fact(s) * _fact(l))
            ecoeffs[(s, l)] = c / _fact(s + l + 1)
    einv = TruncSeries(wide, ecoeffs).inv()
    out = {}
    for k in range(kmax + 1):
        lad = (-a) ** k
        if lad == 0 and k > 0:
            break
        for (s, l), c in einv.coeffs.items():
            ss = s - 1 - k
            ll = l + k
            if ss > window.u_high or ll > h_high:
                continue
            _merge_int_frac(out, (ss, ll), -lad * c)
    return TruncSeries(window, out)


def _merge_int_frac(out, key, val):
    cur = out.get(key, _ZERO) + val
    if cur:
        out[key] = cur
    else:
        out.pop(key, None)


_DEFAULT_ASSIGN = {"x": (Fraction(1), Fraction(0)), "q": (Fraction(0), Fraction(1, 2))}

_EXPANSION_CACHE = {}
_EXPANSION_CACHE_CAP = 4096


def clear_expansion_cache():
    _EXPANSION_CACHE.clear()


def _poly_key(p):
    return (p.vars, tuple(p.sorted_items()))


def _expand_poly(poly, window, assign):
    """Image of a Laurent polynomial under var -> exp(alpha*u + beta*h)."""
    coeffs = {}
    floor = max(0, window.u_low)
    for e, c in poly.terms.items():
        alpha = Fraction(0)
        beta = Fraction(0)
        for v, k in zip(poly.vars, e):
            if k == 0:
                continue
            try:
                av, bv = assign[v]
            except KeyError:
                raise ValueError(f"no exponential assignment for variable {v!r}")
            alpha += k * av
            beta += k * bv
        for s in range(floor, window.u_high + 1):
            cu = c * alpha**s / _fact(s)
            if cu == 0 and s > 0:
                break
            for l in range(window.h_high + 1):
                if beta == 0 and l > 0:
                    break
                val = cu * beta**l / _fact(l)
                if val:
                    _merge_int_frac(coeffs, (s, l), val)
    return TruncSeries(window, coeffs)


def ts_from_fraction(fr, window, assign=None):
    """Expand a LaurentFraction into the truncated ring.

    Each variable is sent to exp(alpha*u + beta*h) per ``assign`` (default
    x -> e^u, q -> e^{h/2}).  Numerator and denominator are expanded exactly
    term by term and divided; the division runs on an internally padded
    window so the requested guarantee survives, with the pad retried
    geometrically before giving up.
    """
    if isinstance(fr, LaurentPoly):
        fr = LaurentFraction(fr)
    if assign is None:
        assign = _DEFAULT_ASSIGN
    akey = tuple(sorted((v, (a, b)) for v, (a, b) in assign.items()))
    key = (_poly_key(fr.num), _poly_key(fr.den), window, akey)
    hit = _EXPANSION_CACHE.get(key)
    if hit is not None:
        return hit
    den_is_one = fr.den.is_const()
    base_pad = 0 if den_is_one else window.h_high + 2
    pad = base_pad
    floor = min(window.u_low, 0)
    result = None
    while True:
        wide = SeriesWindow(floor, window.u_high + pad, window.h_high)
        num = _expand_poly(fr.num, wide, assign)
        if den_is_one:
            result = num.scale(1 / fr.den.const_value()).restrict(window)
            break
        den = _expand_poly(fr.den, wide, assign)
        if den.is_zero() or not den.h_layer(0):
            # a high-order zero at the expansion point hides the unit layer
            # until the ceiling clears its valuation; retry like a precision
            # miss and only then call it non-invertible
            if pad >= 8 * (window.h_high + 2) + 64:
                raise NonInvertibleError("non-invertible")
            pad = max(2 * pad, 4)
            continue
        try:
            result = (num * den.inv()).restrict(window)
            break
        except PrecisionError:
            if pad >= 8 * (window.h_high + 2) + 64:
                raise
            pad = max(2 * pad, 4)
    if len(_EXPANSION_CACHE) >= _EXPANSION_CACHE_CAP:
        _EXPANSION_CACHE.clear()
    _EXPANSION_CACHE[key] = result
    return result


def ts_taylor_shift(a, c):
    return a.taylor_shift(c)


def ts_reflect_u(a):
    return a.reflect_u()


def ts_derivative(a):
    return a.derivative()


def ts_sqrt(a):
    return a.sqrt_one()


# -- serialization -------------------------------------------------------------------


def series_to_records(a):
    recs = [
        {"s": s, "l": l, "num": str(c.numerator), "den": str(c.denominator)}
        for (s, l), c in a.sorted_items()
    ]
    return {"window": a.window.as_dict(), "coeffs": recs}


def series_from_records(obj):
    w = SeriesWindow(**obj["window"])
    coeffs = {
        (r["s"], r["l"]): Fraction(int(r["num"]), int(r["den"]))
        for r in obj["coeffs"]
    }
    return TruncSeries(w, coeffs)


def series_json(a):
    return json.dumps(series_to_records(a), sort_keys=True)


# -- per-layer refinement ------------------------------------------------------------


class LayeredSeries:
    """The same ring element with one u-knowledge-ceiling per h-layer.

    ``layers[l]`` maps s -> Fraction on layer l, valid for s <= u_highs[l]
    (an u_high of _INF marks a layer known to vanish identically).
    ``u_low`` is the common support floor.  Conversions to TruncSeries take
    the ceiling intersection, so every claim here implies the rectangular
    one.
    """

    __slots__ = ("u_low", "layers", "u_highs")

    def __init__(self, u_low, layers, u_highs):
        self.u_low = u_low
        self.layers = layers
        self.u_highs = u_highs
        for l, lay in enumerate(layers):
            hi = u_highs[l]
            for s, c in lay.items():
                if c == 0:
                    raise ValueError("stored zero coefficient")
                if s > hi or s < u_low:
                    raise ValueError("layer coefficient outside its guarantee")

    @property
    def h_high(self):
        return len(self.layers) - 1

    @classmethod
    def from_trunc(cls, ts):
        w = ts.window
        layers = [{} for _ in range(w.h_high + 1)]
        for (s, l), c in ts.coeffs.items():
            layers[l][s] = c
        return cls(w.u_low, layers, [w.u_high] * (w.h_high + 1))

    @classmethod
    def from_exact(cls, ts):
        """Adopt a truncation whose stored support IS the whole object.

        Every layer gets an unbounded ceiling, so products with it never
        shrink the partner's per-layer guarantee.  The caller vouches that
        nothing exists beyond the stored coefficients (pure h-series and
        finite Laurent polynomials qualify); layers above ts.window.h_high
        are still unknown and keep the layer count as the h-ceiling.
        """
        w = ts.window
        layers = [{} for _ in range(w.h_high + 1)]
        for (s, l), c in ts.coeffs.items():
            layers[l][s] = c
        return cls(w.u_low, layers, [_INF] * (w.h_high + 1))

    @classmethod
    def zero(cls, u_low, h_high):
        return cls(u_low, [{} for _ in range(h_high + 1)], [_INF] * (h_high + 1))

    @classmethod
    def one(cls, u_low, h_high):
        out = cls.zero(u_low, h_high)
        out.layers[0][0] = Fraction(1)
        out.u_highs[0] = _INF
        return out

    def to_trunc(self, window=None):
        """Project onto a rectangle; defaults to the ceiling intersection."""
        if window is None:
            u_high = min(self.u_highs)
            if u_high == _INF:
                u_high = max(self.u_low, 0)
            window = SeriesWindow(self.u_low, u_high, self.h_high)
        coeffs = {}
        for l, lay in enumerate(self.layers):
            if l > window.h_high:
                break
            if self.u_highs[l] < window.u_high:
                raise PrecisionError("precision exhausted")
            for s, c in lay.items():
                if s <= window.u_high:
                    if s < window.u_low:
                        raise PrecisionError("precision exhausted")
                    coeffs[(s, l)] = c
        return TruncSeries(window, coeffs)

    def is_zero(self):
        return all(not lay for lay in self.layers)

    def coefficient(self, s, l):
        if l > self.h_high or s > self.u_highs[l]:
            raise PrecisionError("precision exhausted")
        return self.layers[l].get(s, _ZERO)

    def layer_val(self, l):
        lay = self.layers[l]
        return min(lay) if lay else None

    # -- arithmetic -------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = LayeredSeries.const(other, self.u_low, self.h_high)
        if not isinstance(other, LayeredSeries):
            return NotImplemented
        h = min(self.h_high, other.h_high)
        u_low = min(self.u_low, other.u_low)
        layers = []
        u_highs = []
        for l in range(h + 1):
            hi = min(self.u_highs[l], other.u_highs[l])
            lay = {}
            for src in (self.layers[l], other.layers[l]):
                for s, c in src.items():
                    if s <= hi:
                        cur = lay.get(s, _ZERO) + c
                        if cur:
                            lay[s] = cur
                        else:
                            lay.pop(s, None)
            layers.append(lay)
            u_highs.append(hi)
        return LayeredSeries(u_low, layers, u_highs)

    __radd__ = __add__

    @classmethod
    def const(cls, c, u_low, h_high):
        c = Fraction(c)
        out = cls.zero(u_low, h_high)
        if c:
            out.layers[0][0] = c
        return out

    def __neg__(self):
        return LayeredSeries(
            self.u_low,
            [{s: -c for s, c in lay.items()} for lay in self.layers],
            list(self.u_highs),
        )

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = LayeredSeries.const(other, self.u_low, self.h_high)
        return self + (-other)

    def scale(self, c):
        c = Fraction(c)
        if c == 0:
            return LayeredSeries.zero(self.u_low, self.h_high)
        return LayeredSeries(
            self.u_low,
            [{s: v * c for s, v in lay.items()} for lay in self.layers],
            list(self.u_highs),
        )

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        if not isinstance(other, LayeredSeries):
            return NotImplemented
        h = min(self.h_high, other.h_high)
        u_low = self.u_low + other.u_low
        vals_a = [self.layer_val(l) for l in range(self.h_high + 1)]
        vals_b = [other.layer_val(l) for l in range(other.h_high + 1)]
        layers = []
        u_highs = []
        for l in range(h + 1):
            hi = _INF
            for l1 in range(l + 1):
                l2 = l - l1
                # a layer that is both empty and unceilinged is identically
                # zero and imposes no knowledge bound
                empty_a = vals_a[l1] is None and self.u_highs[l1] >= _INF
                empty_b = vals_b[l2] is None and other.u_highs[l2] >= _INF
                if empty_a or empty_b:
                    continue
                va = vals_a[l1] if vals_a[l1] is not None else self.u_highs[l1]
                vb = vals_b[l2] if vals_b[l2] is not None else other.u_highs[l2]
                ha = self.u_highs[l1]
                hb = other.u_highs[l2]
                hi = min(
                    hi,
                    (ha + vb) if ha < _INF else _INF,
                    (hb + va) if hb < _INF else _INF,
                )
            lay = {}
            if hi >= u_low:
                for l1 in range(l + 1):
                    l2 = l - l1
                    la, lb = self.layers[l1], other.layers[l2]
                    if not la or not lb:
                        continue
                    items_b = sorted(lb.items())
                    for sa, ca in la.items():
                        for sb, cb in items_b:
                            s = sa + sb
                            if s > hi:
                                break
                            cur = lay.get(s, _ZERO) + ca * cb
                            if cur:
                                lay[s] = cur
                            else:
                                lay.pop(s, None)
            layers.append(lay)
            u_highs.append(hi)
        return LayeredSeries(u_low, layers, u_highs)

    __rmul__ = __mul__

    # -- inversion ------------------------------------------------------------------

    def inv(self):
        a0 = self.layers[0]
        if not a0:
            raise NonInvertibleError("non-invertible")
        alpha = min(a0)
        c = a0[alpha]
        hi0 = self.u_highs[0]
        if hi0 >= _INF:
            raise ValueError("inverse of an exact element needs a finite window")
        rho_hi = hi0 - alpha
        rho = {}
        for s, v in a0.items():
            if s != alpha:
                rho[s - alpha] = v / c
        inv_b = {0: Fraction(1)}
        for s in range(1, rho_hi + 1):
            acc = _ZERO
            for j, rv in rho.items():
                if 1 <= j <= s:
                    w = inv_b.get(s - j)
                    if w:
                        acc -= rv * w
            if acc:
                inv_b[s] = acc
        x0_hi = hi0 - 2 * alpha if hi0 < _INF else _INF
        x0 = {
            t - alpha: v / c for t, v in inv_b.items() if t - alpha <= x0_hi
        }
        # guaranteed support floors per layer: B_0 = -alpha and
        # B_l = -alpha + u_low + min_{j<l} B_j, loose but sound
        floors = [-alpha]
        for l in range(1, self.h_high + 1):
            floors.append(-alpha + self.u_low + min(floors))
        layers = [x0] + [{} for _ in range(self.h_high)]
        u_highs = [x0_hi] + [_INF] * self.h_high
        for l in range(1, self.h_high + 1):
            acc = None
            for j in range(1, l + 1):
                la, ha = self.layers[j], self.u_highs[j]
                if not la and ha >= _INF:
                    continue
                term = _layer_product((la, ha), (layers[l - j], u_highs[l - j]))
                acc = term if acc is None else _layer_add(acc, term)
            if acc is None:
                continue
            lay, hi = _layer_product((layers[0], u_highs[0]), acc)
            layers[l] = {s: -v for s, v in lay.items()}
            u_highs[l] = hi
        return LayeredSeries(min(floors), layers, u_highs)

    # -- reshaping ---------------------------------------------------------------

    def monomial_mul(self, s0, l0, c=Fraction(1)):
        c = Fraction(c)
        if l0 < 0:
            for l in range(min(-l0, self.h_high + 1)):
                if self.layers[l]:
                    raise ValueError(
                        "negative h-shift below the observed h-valuation"
                    )
                if self.u_highs[l] < _INF:
                    raise PrecisionError("precision exhausted")
        h = self.h_high + l0
        layers = []
        u_highs = []
        for l in range(h + 1):
            src = l - l0
            if 0 <= src <= self.h_high:
                layers.append(
                    {s + s0: v * c for s, v in self.layers[src].items()}
                )
                hi = self.u_highs[src]
                u_highs.append(hi if hi >= _INF else hi + s0)
            else:
                layers.append({})
                u_highs.append(_INF)
        return LayeredSeries(self.u_low + s0, layers, u_highs)

    def taylor_shift(self, c):
        """u -> u + c*h with per-layer ceilings u_highs[l-k] - k."""
        c = Fraction(c)
        h = self.h_high
        layers = [{} for _ in range(h + 1)]
        u_highs = [_INF] * (h + 1)
        for l in range(h + 1):
            hi = _INF
            lay = {}
            for k in range(l + 1):
                src_l = l - k
                src_hi = self.u_highs[src_l]
                if src_hi < _INF:
                    hi = min(hi, src_hi - k)
                fac = c**k / _fact(k)
                if fac == 0 and k > 0:
                    continue
                for s, v in self.layers[src_l].items():
                    # k-th derivative of u^s is s(s-1)...(s-k+1) u^{s-k}
                    coef = v * fac
                    m = 1
                    for i in range(k):
                        m *= s - i
                    if m == 0:
                        continue
                    ss = s - k
                    if ss > hi:
                        continue
                    cur = lay.get(ss, _ZERO) + coef * m
                    if cur:
                        lay[ss] = cur
                    else:
                        lay.pop(ss, None)
            lay = {s: v for s, v in lay.items() if s <= hi}
            layers[l] = lay
            u_highs[l] = hi
        return LayeredSeries(self.u_low - h, layers, u_highs)

    def diff_witnesses(self, other, limit=4):
        out = []
        h = min(self.h_high, other.h_high)
        for l in range(h + 1):
            hi = min(self.u_highs[l], other.u_highs[l])
            keys = set(self.layers[l]) | set(other.layers[l])
            for s in sorted(keys):
                if s > hi:
                    continue
                a = self.layers[l].get(s, _ZERO)
                b = other.layers[l].get(s, _ZERO)
                if a != b:
                    out.append((s, l, a, b))
                    if len(out) >= limit:
                        return out
        return out


def _layer_product(a, b):
    """Product of two (dict, u_high) single layers with exact ceilings."""
    la, hia = a
    lb, hib = b
    if not la or not lb:
        if not la and hia >= _INF:
            return {}, _INF
        if not lb and hib >= _INF:
            return {}, _INF
        va = min(la) if la else hia
        vb = min(lb) if lb else hib
        return {}, min(hia + vb, hib + va)
    va, vb = min(la), min(lb)
    hi = min(
        hia + vb if hia < _INF else _INF,
        hib + va if hib < _INF else _INF,
    )
    out = {}
    items_b = sorted(lb.items())
    for sa, ca in la.items():
        for sb, cb in items_b:
            s = sa + sb
            if s > hi:
                break
            cur = out.get(s, _ZERO) + ca * cb
            if cur:
                out[s] = cur
            else:
                out.pop(s, None)
    return out, hi


def _layer_add(a, b):
    la, hia = a
    lb, hib = b
    hi = min(hia, hib)
    out = {}
    for src in (la, lb):
        for s, c in src.items():
            if s <= hi:
                cur = out.get(s, _ZERO) + c
                if cur:
                    out[s] = cur
                else:
                    out.pop(s, None)
    return out, hi
