"""Exact geodesic-length values: polynomials in pi with rational coefficients.

Closed-form lengths in this package all have squares of the form
p + q*pi + r*pi^2 (rational p, q, r), so squared lengths are compared
coefficient-wise; pi being transcendental, that comparison is exact.
Signs of such expressions are decided with interval arithmetic using
50-digit rational bounds on pi.
"""

import math
import re
from fractions import Fraction

from .linalg import frac

MAX_DEG = 4

# 50-digit rational enclosure of pi
_PI_DIGITS = 31415926535897932384626433832795028841971693993751
PI_LO = Fraction(_PI_DIGITS, 10**49)
PI_HI = Fraction(_PI_DIGITS + 1, 10**49)


class PiExpr:
    """Polynomial in pi of degree <= 4 with Fraction coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        cs = [frac(c) for c in coeffs]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        if len(cs) > MAX_DEG + 1:
            raise ValueError("pi-degree too large")
        self.coeffs = tuple(cs) if cs else (Fraction(0),)

    @classmethod
    def const(cls, q):
        return cls([frac(q)])

    @classmethod
    def pi(cls):
        return cls([0, 1])

    def __add__(self, other):
        other = _coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return PiExpr([_get(self.coeffs, i) + _get(other.coeffs, i) for i in range(n)])

    def __sub__(self, other):
        other = _coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return PiExpr([_get(self.coeffs, i) - _get(other.coeffs, i) for i in range(n)])

    def __neg__(self):
        return PiExpr([-c for c in self.coeffs])

    def __mul__(self, other):
        other = _coerce(other)
        n = len(self.coeffs) + len(other.coeffs) - 1
        if n > MAX_DEG + 1:
            raise ValueError("product exceeds supported pi-degree")
        out = [Fraction(0)] * n
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return PiExpr(out)

    __radd__ = __add__
    __rmul__ = __mul__

    def __rsub__(self, other):
        return _coerce(other) - self

    def __truediv__(self, other):
        other = _coerce(other)
        if not other.is_rational() or other.coeffs[0] == 0:
            raise ValueError("division only by nonzero rationals")
        q = other.coeffs[0]
        return PiExpr([c / q for c in self.coeffs])

    def __eq__(self, other):
        return self.coeffs == _coerce(other).coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def is_rational(self):
        return len(self.coeffs) == 1

    def rational_value(self):
        if not self.is_rational():
            raise ValueError("not rational")
        return self.coeffs[0]

    def interval(self):
        lo = hi = Fraction(0)
        plo, phi = Fraction(1), Fraction(1)
        for i, c in enumerate(self.coeffs):
            if i > 0:
                plo, phi = plo * PI_LO, phi * PI_HI
            if c >= 0:
                lo += c * (plo if i else 1)
                hi += c * (phi if i else 1)
            else:
                lo += c * (phi if i else 1)
                hi += c * (plo if i else 1)
        return lo, hi

    def sign(self):
        if all(c == 0 for c in self.coeffs):
            return 0
        lo, hi = self.interval()
        if lo > 0:
            return 1
        if hi < 0:
            return -1
        raise ValueError("sign not decided by 50-digit pi bounds")

    def __lt__(self, other):
        return (self - _coerce(other)).sign() < 0

    def __le__(self, other):
        return (self - _coerce(other)).sign() <= 0

    def __float__(self):
        return float(sum(float(c) * math.pi**i for i, c in enumerate(self.coeffs)))

    def __repr__(self):
        names = ["", "*pi", "*pi^2", "*pi^3", "*pi^4"]
        terms = [f"{c}{names[i]}" for i, c in enumerate(self.coeffs) if c != 0]
        return " + ".join(terms) if terms else "0"


def _coerce(x):
    if isinstance(x, PiExpr):
        return x
    return PiExpr.const(x)


def _get(t, i):
    return t[i] if i < len(t) else Fraction(0)


class Length:
    """A nonnegative real stored as its exact square (a PiExpr)."""

    __slots__ = ("sq",)

    def __init__(self, sq):
        self.sq = _coerce(sq)
        if self.sq.sign() < 0:
            raise ValueError("length square must be nonnegative")

    @classmethod
    def of_rational(cls, q):
        q = frac(q)
        if q < 0:
            raise ValueError("length must be nonnegative")
        return cls(PiExpr.const(q * q))

    @classmethod
    def sqrt(cls, sq):
        return cls(sq)

    def __float__(self):
        return math.sqrt(float(self.sq))

    def __eq__(self, other):
        return isinstance(other, Length) and self.sq == other.sq

    def __hash__(self):
        return hash(self.sq)

    def __lt__(self, other):
        return self.sq < other.sq

    def __le__(self, other):
        return self.sq <= other.sq

    def is_zero(self):
        return self.sq == PiExpr.const(0)

    def expression(self):
        """Canonical text form, e.g. '2' or 'sqrt(28*pi + -4*pi^2)'."""
        if self.sq.is_rational():
            from .linalg import frac_sqrt

            r = frac_sqrt(self.sq.rational_value())
            if r is not None:
                return str(r)
        return f"sqrt({self.sq!r})"

    def __repr__(self):
        return self.expression()


def add_in_quadrature(a: Length, b: Length) -> Length:
    return Length(a.sq + b.sq)


# ---------------------------------------------------------------------------
# parser for the CLI length grammar: arithmetic over rationals and pi, with
# sqrt(...) allowed as the outermost operation (or not at all).

_TOKEN = re.compile(r"\s*(sqrt|pi|\d+\.\d+|\d+|[()+\-*/])")


class LengthParseError(ValueError):
    pass


def parse_length(text: str) -> Length:
    s = text.strip()
    if s.startswith("sqrt(") and s.endswith(")") and _balanced(s[5:-1]):
        inner = _parse_piexpr(s[5:-1])
        if inner.sign() < 0:
            raise LengthParseError("sqrt of a negative expression")
        return Length(inner)
    val = _parse_piexpr(s)
    if val.sign() < 0:
        raise LengthParseError("negative length")
    return Length(val * val)


def _balanced(s):
    depth = 0
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def _tokenize(s):
    out, pos = [], 0
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if not m:
            raise LengthParseError(f"bad token at {s[pos:pos+8]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def _parse_piexpr(s) -> PiExpr:
    tokens = _tokenize(s)
    pos = [0]

    def peek():
        return tokens[pos[0]] if pos[0] < len(tokens) else None

    def take(tok=None):
        t = peek()
        if t is None or (tok is not None and t != tok):
            raise LengthParseError(f"expected {tok!r}, found {t!r}")
        pos[0] += 1
        return t

    def atom():
        t = peek()
        if t == "(":
            take()
            v = expr()
            take(")")
            return v
        if t == "pi":
            take()
            return PiExpr.pi()
        if t == "sqrt":
            raise LengthParseError("sqrt is only allowed as the outermost operation")
        if t == "-":
            take()
            return -atom()
        if t is None:
            raise LengthParseError("unexpected end of expression")
        take()
        if "." in t:
            return PiExpr.const(Fraction(t))
        return PiExpr.const(int(t))

    def term():
        v = atom()
        while peek() in ("*", "/"):
            op = take()
            rhs = atom()
            v = v * rhs if op == "*" else v / rhs
        return v

    def expr():
        t = peek()
        neg = False
        if t == "-":
            take()
            neg = True
        v = term()
        if neg:
            v = -v
        while peek() in ("+", "-"):
            op = take()
            rhs = term()
            v = v + rhs if op == "+" else v - rhs
        return v

    v = expr()
    if pos[0] != len(tokens):
        raise LengthParseError(f"trailing input {tokens[pos[0]:]!r}")
    return v
