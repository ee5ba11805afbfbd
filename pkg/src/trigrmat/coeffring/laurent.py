"""Multivariate Laurent polynomials and their fraction field, over Fraction.

Terms are kept in a dict keyed by exponent tuples; zero coefficients are never
stored.  Fractions are pairs num/den of Laurent polynomials with equality by
cross multiplication, so no polynomial gcd is ever needed.  The only
simplification performed is stripping a common monomial-times-rational content,
which keeps exponents small without any factorization machinery.
"""

from __future__ import annotations

from fractions import Fraction

__all__ = [
    "FieldDivisionError",
    "LaurentPoly",
    "LaurentFraction",
    "lp_const",
    "lp_var",
    "lf_const",
    "lf_var",
    "lf_shift_spectral",
]

_ZERO = Fraction(0)
_ONE = Fraction(1)


class FieldDivisionError(ZeroDivisionError):
    """Raised on inversion of the zero element of the fraction field."""


def _as_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected int or Fraction, got {type(x).__name__}")


class LaurentPoly:
    """A Laurent polynomial in an ordered tuple of named variables.

    ``terms`` maps exponent tuples (one integer per variable, negative allowed)
    to nonzero Fractions.  The variable tuple is sorted at construction so two
    polynomials over the same variable set always align.
    """

    __slots__ = ("vars", "terms")

    def __init__(self, vars, terms, _sorted=False):
        vars = tuple(vars)
        if not _sorted:
            order = sorted(range(len(vars)), key=lambda i: vars[i])
            svars = tuple(vars[i] for i in order)
            if svars != vars:
                terms = {
                    tuple(e[i] for i in order): c for e, c in terms.items()
                }
                vars = svars
        if len(set(vars)) != len(vars):
            raise ValueError("duplicate variable names")
        self.vars = vars
        self.terms = {e: c for e, c in terms.items() if c != 0}

    # -- constructors ------------------------------------------------------

    @classmethod
    def const(cls, c, vars=()):
        c = _as_fraction(c)
        vars = tuple(sorted(vars))
        if c == 0:
            return cls(vars, {}, _sorted=True)
        return cls(vars, {(0,) * len(vars): c}, _sorted=True)

    @classmethod
    def var(cls, name, power=1, vars=None):
        if vars is None:
            vars = (name,)
        vars = tuple(sorted(vars))
        e = tuple(power if v == name else 0 for v in vars)
        if name not in vars:
            raise ValueError(f"variable {name!r} not in {vars}")
        return cls(vars, {e: _ONE}, _sorted=True)

    def is_zero(self):
        return not self.terms

    def is_const(self):
        return all(all(x == 0 for x in e) for e in self.terms)

    def const_value(self):
        z = (0,) * len(self.vars)
        for e, c in self.terms.items():
            if e != z:
                raise ValueError("not a constant")
        return self.terms.get(z, _ZERO)

    # -- variable alignment ------------------------------------------------

    def extend_vars(self, vars):
        """Return an equal polynomial over the (sorted) superset ``vars``."""
        vars = tuple(sorted(vars))
        if vars == self.vars:
            return self
        if not set(self.vars) <= set(vars):
            raise ValueError("extend_vars must be a superset")
        pos = [vars.index(v) for v in self.vars]
        terms = {}
        for e, c in self.terms.items():
            ne = [0] * len(vars)
            for p, x in zip(pos, e):
                ne[p] = x
            terms[tuple(ne)] = c
        return LaurentPoly(vars, terms, _sorted=True)

    @staticmethod
    def align(a, b):
        if a.vars == b.vars:
            return a, b
        vars = tuple(sorted(set(a.vars) | set(b.vars)))
        return a.extend_vars(vars), b.extend_vars(vars)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = LaurentPoly.const(other, self.vars)
        a, b = LaurentPoly.align(self, other)
        terms = dict(a.terms)
        for e, c in b.terms.items():
            s = terms.get(e, _ZERO) + c
            if s == 0:
                terms.pop(e, None)
            else:
                terms[e] = s
        return LaurentPoly(a.vars, terms, _sorted=True)

    __radd__ = __add__

    def __neg__(self):
        return LaurentPoly(
            self.vars, {e: -c for e, c in self.terms.items()}, _sorted=True
        )

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = LaurentPoly.const(other, self.vars)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = _as_fraction(other)
            if c == 0:
                return LaurentPoly(self.vars, {}, _sorted=True)
            return LaurentPoly(
                self.vars,
                {e: v * c for e, v in self.terms.items()},
                _sorted=True,
            )
        a, b = LaurentPoly.align(self, other)
        terms = {}
        for ea, ca in a.terms.items():
            for eb, cb in b.terms.items():
                e = tuple(x + y for x, y in zip(ea, eb))
                s = terms.get(e, _ZERO) + ca * cb
                if s == 0:
                    terms.pop(e, None)
                else:
                    terms[e] = s
        return LaurentPoly(a.vars, terms, _sorted=True)

    __rmul__ = __mul__

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise ValueError("LaurentPoly power must be a nonnegative int")
        out = LaurentPoly.const(1, self.vars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = LaurentPoly.const(other, self.vars)
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        a, b = LaurentPoly.align(self, other)
        return a.terms == b.terms

    def __hash__(self):
        return hash((self.vars, frozenset(self.terms.items())))

    # -- structure ----------------------------------------------------------

    def monomial_content(self):
        """Greatest common monomial: per-variable min exponent over the support.

        Returns the zero tuple for the zero polynomial.
        """
        if not self.terms:
            return (0,) * len(self.vars)
        its = iter(self.terms)
        lo = list(next(its))
        for e in its:
            for i, x in enumerate(e):
                if x < lo[i]:
                    lo[i] = x
        return tuple(lo)

    def shift_monomial(self, e0):
        return LaurentPoly(
            self.vars,
            {tuple(x + y for x, y in zip(e, e0)): c for e, c in self.terms.items()},
            _sorted=True,
        )

    def euler(self, name):
        """Apply the Euler operator v * d/dv for the named variable."""
        i = self.vars.index(name)
        terms = {}
        for e, c in self.terms.items():
            if e[i]:
                terms[e] = c * e[i]
        return LaurentPoly(self.vars, terms, _sorted=True)

    def subs_monomial(self, name, coeff, exps):
        """Substitute ``name -> coeff * prod(v**exps[v])``.

        ``coeff`` must be a nonzero rational (negative powers of the variable
        may occur, so zero cannot be substituted).  ``exps`` maps variable
        names to integer exponents; new names are adjoined.
        """
        coeff = _as_fraction(coeff)
        if coeff == 0:
            raise ValueError("monomial substitution needs a nonzero coefficient")
        if name not in self.vars:
            return self
        newvars = tuple(sorted((set(self.vars) - {name}) | set(exps)))
        i = self.vars.index(name)
        keep = [(j, v) for j, v in enumerate(self.vars) if j != i]
        terms = {}
        for e, c in self.terms.items():
            k = e[i]
            ne = {v: 0 for v in newvars}
            for j, v in keep:
                ne[v] += e[j]
            for v, x in exps.items():
                ne[v] += k * x
            key = tuple(ne[v] for v in newvars)
            s = terms.get(key, _ZERO) + c * coeff**k
            if s == 0:
                terms.pop(key, None)
            else:
                terms[key] = s
        return LaurentPoly(newvars, terms, _sorted=True)

    def eval_var(self, name, value):
        """Substitute a rational value for one variable (value != 0)."""
        return self.subs_monomial(name, value, {})

    def sorted_items(self):
        return sorted(self.terms.items())

    def __repr__(self):
        if not self.terms:
            return "0"
        bits = []
        for e, c in self.sorted_items():
            mono = "*".join(
                f"{v}^{x}" for v, x in zip(self.vars, e) if x != 0
            )
            bits.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(bits)


def lp_const(c, vars=()):
    return LaurentPoly.const(c, vars)


def lp_var(name, power=1, vars=None):
    return LaurentPoly.var(name, power, vars)


def _dense_1v(poly):
    """Exponent-indexed coefficient list of a one-variable polynomial.

    Assumes the monomial content was stripped, so exponents start at 0.
    """
    deg = max(e[0] for e in poly.terms)
    out = [Fraction(0)] * (deg + 1)
    for e, c in poly.terms.items():
        out[e[0]] = c
    return out


def _dense_trim(p):
    while p and not p[-1]:
        p.pop()
    return p


def _dense_rem(a, b):
    """Remainder of a by b (b nonzero), destructive on a copy."""
    a = list(a)
    lead = b[-1]
    while len(a) >= len(b):
        q = a[-1] / lead
        if q:
            off = len(a) - len(b)
            for i, bc in enumerate(b):
                a[off + i] -= q * bc
        a.pop()
        _dense_trim(a)
    return a


def _dense_gcd(a, b):
    while b:
        a, b = b, _dense_rem(a, b)
    lead = a[-1]
    return [c / lead for c in a] if lead != 1 else a


def _dense_quotient(a, b):
    """Exact quotient a/b; the caller guarantees divisibility."""
    a = list(a)
    lead = b[-1]
    q = [Fraction(0)] * (len(a) - len(b) + 1)
    while len(a) >= len(b):
        c = a[-1] / lead
        q[len(a) - len(b)] = c
        if c:
            off = len(a) - len(b)
            for i, bc in enumerate(b):
                a[off + i] -= c * bc
        a.pop()
        _dense_trim(a)
    assert not a, "inexact polynomial division"
    return q


class LaurentFraction:
    """An element num/den of the fraction field of LaurentPoly.

    The denominator is always nonzero.  Construction strips the common
    monomial-and-rational content of num and den; one-variable fractions
    are additionally reduced by the polynomial gcd, which keeps iterated
    field arithmetic (where denominators otherwise compound with every
    addition) at bounded degree.  Equality is decided by cross
    multiplication.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=None):
        if isinstance(num, (int, Fraction)):
            num = LaurentPoly.const(num)
        if den is None:
            den = LaurentPoly.const(1, num.vars)
        elif isinstance(den, (int, Fraction)):
            den = LaurentPoly.const(den, num.vars)
        if den.is_zero():
            raise FieldDivisionError("division by zero in fraction field")
        num, den = LaurentPoly.align(num, den)
        if num.is_zero():
            self.num = num
            self.den = LaurentPoly.const(1, num.vars)
            return
        # strip common monomial content and normalize the leading den
        # coefficient sign/scale through a rational unit
        cn = num.monomial_content()
        cd = den.monomial_content()
        common = tuple(min(a, b) for a, b in zip(cn, cd))
        if any(common):
            back = tuple(-x for x in common)
            num = num.shift_monomial(back)
            den = den.shift_monomial(back)
        if len(num.vars) == 1 and not den.is_const():
            dn = _dense_1v(num)
            dd = _dense_1v(den)
            g = _dense_gcd(dn, dd)
            if len(g) > 1:
                num = LaurentPoly(
                    num.vars,
                    {(i,): c for i, c in enumerate(_dense_quotient(dn, g)) if c},
                )
                den = LaurentPoly(
                    num.vars,
                    {(i,): c for i, c in enumerate(_dense_quotient(dd, g)) if c},
                )
        lead = den.terms[min(den.terms)]
        if lead != 1:
            inv = 1 / lead
            num = num * inv
            den = den * inv
        self.num = num
        self.den = den

    # -- constructors --------------------------------------------------------

    @classmethod
    def const(cls, c, vars=()):
        return cls(LaurentPoly.const(c, vars))

    @classmethod
    def var(cls, name, power=1, vars=None):
        if power >= 0:
            return cls(LaurentPoly.var(name, power, vars))
        return cls(
            LaurentPoly.const(1, vars or (name,)),
            LaurentPoly.var(name, -power, vars),
        )

    def is_zero(self):
        return self.num.is_zero()

    def is_one(self):
        return self.num == self.den

    @property
    def vars(self):
        return self.num.vars

    # -- arithmetic ------------------------------------------------------------

    @staticmethod
    def _coerce(x):
        if isinstance(x, LaurentFraction):
            return x
        if isinstance(x, LaurentPoly):
            return LaurentFraction(x)
        if isinstance(x, (int, Fraction)):
            return LaurentFraction.const(x)
        return None

    def __add__(self, other):
        o = LaurentFraction._coerce(other)
        if o is None:
            return NotImplemented
        if self.den == o.den:
            return LaurentFraction(self.num + o.num, self.den)
        return LaurentFraction(
            self.num * o.den + o.num * self.den, self.den * o.den
        )

    __radd__ = __add__

    def __neg__(self):
        return LaurentFraction(-self.num, self.den)

    def __sub__(self, other):
        o = LaurentFraction._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = LaurentFraction._coerce(other)
        if o is None:
            return NotImplemented
        return LaurentFraction(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def inv(self):
        if self.num.is_zero():
            raise FieldDivisionError("division by zero in fraction field")
        return LaurentFraction(self.den, self.num)

    def __truediv__(self, other):
        o = LaurentFraction._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inv()

    def __rtruediv__(self, other):
        o = LaurentFraction._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inv()

    def __pow__(self, k):
        if not isinstance(k, int):
            raise ValueError("LaurentFraction power must be an int")
        if k < 0:
            return self.inv() ** (-k)
        return LaurentFraction(self.num**k, self.den**k)

    def __eq__(self, other):
        o = LaurentFraction._coerce(other)
        if o is None:
            return NotImplemented
        return self.num * o.den == o.num * self.den

    # equality is an equivalence on representations, so no consistent hash
    # exists without normalization; explicit cache keys are built instead
    __hash__ = None

    # -- operations used by the engine -----------------------------------------

    def euler(self, name):
        """Euler derivative v * d/dv by the quotient rule.

        The denominator squares; for the small denominators used here that is
        acceptable and keeps the operation gcd-free.
        """
        n, d = self.num, self.den
        return LaurentFraction(n.euler(name) * d - n * d.euler(name), d * d)

    def subs_monomial(self, name, coeff, exps):
        return LaurentFraction(
            self.num.subs_monomial(name, coeff, exps),
            self.den.subs_monomial(name, coeff, exps),
        )

    def eval_var(self, name, value):
        return self.subs_monomial(name, value, {})

    def __repr__(self):
        if self.den.is_const() and self.den.const_value() == 1:
            return f"({self.num!r})"
        return f"({self.num!r}) / ({self.den!r})"


def lf_const(c, vars=()):
    return LaurentFraction.const(c, vars)


def lf_var(name, power=1, vars=None):
    return LaurentFraction.var(name, power, vars)


def lf_shift_spectral(fr, name, q_name, steps):
    """Shift the spectral variable: name -> name * q**steps.

    With x = e^u and q = e^{h/2} this realizes u -> u + (steps/2) h exactly,
    without any series truncation.
    """
    if not isinstance(steps, int):
        raise ValueError("spectral shift steps must be an int")
    exps = {name: 1, q_name: steps}
    return fr.subs_monomial(name, 1, exps)
