"""Exact scalars of the form q0 + sum of rational multiples of monomials in
declared irrational symbols.

A :class:`Scalar` is exact: arithmetic and equality act on rational
coefficients only.  Numerics (floor, fractional part, float value) go through
fixed-point images of high-precision witnesses, with a guard that refuses to
floor when the witness value sits too close to an integer.

Monomials are keyed by sorted tuples of symbol names, so ``("b1",)`` is the
linear term and ``("b1", "b2")`` the product ``b1*b2``.  Distinct monomials are
assumed to be linearly independent over Q together with 1; this is what makes
exact equality meaningful.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Union

import mpmath

from .errors import FloorAmbiguous

FIXED_BITS = 256
_ONE = 1 << FIXED_BITS
_MASK = _ONE - 1
# distance-to-integer below which a floor is refused
AMBIGUITY = 1e-15
_AMBIG_FIXED = int(AMBIGUITY * _ONE)

_DECIMAL = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_WORK_DPS = 90

Monomial = tuple
Rational = Union[int, Fraction]


def to_fraction(x) -> Fraction:
    """Parse ints, Fractions and "p/q" or decimal strings exactly."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def fraction_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


_WITNESS_NAMES = {
    "sqrt": mpmath.sqrt, "cbrt": mpmath.cbrt, "log": mpmath.log, "exp": mpmath.exp,
    "pi": mpmath.pi, "e": mpmath.e,
}
_WITNESS_CHARS = re.compile(r"[0-9A-Za-z_.+\-*/() ]+")


def evaluate_witness(expr: str) -> mpmath.mpf:
    """High-precision value of a decimal literal or a small expression such as
    ``sqrt(2)-1`` (names: sqrt, pi, e, log, exp, cbrt)."""
    with mpmath.workdps(_WORK_DPS):
        s = expr.strip()
        if _DECIMAL.match(s):
            return mpmath.mpf(s)
        names = set(_WITNESS_NAMES)
        if not _WITNESS_CHARS.fullmatch(s) or not set(re.findall(r"[A-Za-z_]\w*", s)) <= names:
            raise ValueError(f"witness {expr!r} uses unsupported syntax")
        # numeric literals become mpf so that 1/3 is not a binary64 quotient
        s = re.sub(r"(?<![A-Za-z_\w])(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?",
                   lambda m: f"_mpf('{m.group(0)}')", s)
        env = dict(_WITNESS_NAMES, _mpf=mpmath.mpf, __builtins__={})
        try:
            val = eval(s, env, {})  # noqa: S307 - validated grammar, restricted namespace
        except Exception as exc:
            raise ValueError(f"cannot evaluate witness {expr!r}: {exc}") from None
        return mpmath.mpf(val)


class IrrationalBasis:
    """Ordered irrational symbols with high-precision witnesses.

    Construction rejects witnesses that coincide, or that lie within 1e-20 of
    a rational with denominator at most 10**6.
    """

    def __init__(self, witnesses: Mapping[str, str]):
        if not witnesses:
            raise ValueError("an irrational basis needs at least one symbol")
        self.symbols: tuple[str, ...] = tuple(witnesses)
        self.expressions: tuple[str, ...] = tuple(str(witnesses[s]) for s in self.symbols)
        for s in self.symbols:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", s):
                raise ValueError(f"invalid symbol name {s!r}")
        vals = [evaluate_witness(e) for e in self.expressions]
        with mpmath.workdps(_WORK_DPS):
            strs = [mpmath.nstr(v, 70, strip_zeros=False) for v in vals]
        for i, (s, v) in enumerate(zip(self.symbols, strs)):
            if len(re.sub(r"[^0-9]", "", v).lstrip("0")) < 30:
                raise ValueError(f"witness for {s} has fewer than 30 significant digits")
            exact = Fraction(v)
            near = exact.limit_denominator(10**6)
            if abs(exact - near) < Fraction(1, 10**20):
                raise ValueError(f"witness for {s} is within 1e-20 of the rational {near}")
            for j in range(i):
                if strs[j] == v:
                    raise ValueError(f"witnesses for {self.symbols[j]} and {s} coincide")
        self._values = dict(zip(self.symbols, vals))

    def __repr__(self) -> str:
        body = ", ".join(f"{s}={e!r}" for s, e in zip(self.symbols, self.expressions))
        return f"IrrationalBasis({body})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, IrrationalBasis)
            and self.symbols == other.symbols
            and self.expressions == other.expressions
        )

    def __hash__(self) -> int:
        return hash((self.symbols, self.expressions))

    def value(self, symbol: str) -> mpmath.mpf:
        return self._values[symbol]

    def fixed(self, mono: Monomial) -> int:
        """round(monomial value * 2**FIXED_BITS)."""
        return _fixed_monomial(self, mono)

    def symbol(self, name: str) -> "Scalar":
        if name not in self._values:
            raise KeyError(f"symbol {name!r} is not declared in the basis")
        return Scalar(0, {(name,): 1}, self)

    def to_json(self) -> dict:
        return {"symbols": dict(zip(self.symbols, self.expressions))}

    @classmethod
    def from_json(cls, data: Mapping) -> "IrrationalBasis":
        return cls(dict(data["symbols"]))


@lru_cache(maxsize=4096)
def _fixed_monomial(basis: IrrationalBasis, mono: Monomial) -> int:
    with mpmath.workdps(_WORK_DPS):
        v = mpmath.mpf(1)
        for s in mono:
            v *= basis.value(s)
        return int(mpmath.nint(v * mpmath.mpf(2) ** FIXED_BITS))


class Scalar:
    """Exact value q0 + sum_c q_c * monomial_c.

    >>> Scalar(Fraction(1, 2)) + 1
    Scalar('3/2')
    """

    __slots__ = ("q0", "terms", "basis", "_hash")

    def __init__(self, q0: Rational | str = 0, terms: Mapping | None = None,
                 basis: IrrationalBasis | None = None):
        self.q0 = to_fraction(q0)
        clean: dict = {}
        if terms:
            for mono, c in terms.items():
                c = to_fraction(c)
                if c:
                    key = tuple(sorted(mono))
                    clean[key] = clean.get(key, 0) + c
                    if not clean[key]:
                        del clean[key]
        if clean and basis is None:
            raise ValueError("irrational terms require an IrrationalBasis")
        if clean:
            for mono in clean:
                for s in mono:
                    if s not in basis.symbols:
                        raise ValueError(f"symbol {s!r} is not declared in the basis")
        self.terms: dict = clean
        self.basis = basis if clean else None
        self._hash = None

    # -- construction -----------------------------------------------------
    @classmethod
    def of(cls, x) -> "Scalar":
        if isinstance(x, Scalar):
            return x
        return cls(to_fraction(x))

    @classmethod
    def _raw(cls, q0: Fraction, terms: dict, basis) -> "Scalar":
        obj = object.__new__(cls)
        obj.q0 = q0
        obj.terms = terms
        obj.basis = basis if terms else None
        obj._hash = None
        return obj

    # -- predicates -------------------------------------------------------
    @property
    def is_rational(self) -> bool:
        return not self.terms

    @property
    def is_integer(self) -> bool:
        return not self.terms and self.q0.denominator == 1

    def __bool__(self) -> bool:
        return bool(self.q0) or bool(self.terms)

    # -- arithmetic -------------------------------------------------------
    def _basis_with(self, other: "Scalar"):
        if self.basis is None:
            return other.basis
        if other.basis is None or other.basis is self.basis or other.basis == self.basis:
            return self.basis
        raise ValueError("scalars over different irrational bases cannot be combined")

    def __add__(self, other) -> "Scalar":
        if not isinstance(other, Scalar):
            if isinstance(other, (int, Fraction)):
                return Scalar._raw(self.q0 + other, self.terms, self.basis)
            return NotImplemented
        if not other.terms:
            return Scalar._raw(self.q0 + other.q0, self.terms, self.basis)
        if not self.terms:
            return Scalar._raw(self.q0 + other.q0, other.terms, other.basis)
        basis = self._basis_with(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            v = terms.get(m, 0) + c
            if v:
                terms[m] = v
            else:
                terms.pop(m, None)
        return Scalar._raw(self.q0 + other.q0, terms, basis)

    __radd__ = __add__

    def __neg__(self) -> "Scalar":
        return Scalar._raw(-self.q0, {m: -c for m, c in self.terms.items()}, self.basis)

    def __sub__(self, other) -> "Scalar":
        if isinstance(other, (int, Fraction)):
            return Scalar._raw(self.q0 - other, self.terms, self.basis)
        if not isinstance(other, Scalar):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Scalar":
        return (-self) + other

    def __mul__(self, other) -> "Scalar":
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            if not other:
                return Scalar._raw(Fraction(0), {}, None)
            return Scalar._raw(self.q0 * other, {m: c * other for m, c in self.terms.items()},
                               self.basis)
        if not isinstance(other, Scalar):
            return NotImplemented
        if not other.terms:
            return self * other.q0
        if not self.terms:
            return other * self.q0
        basis = self._basis_with(other)
        terms: dict = {}

        def acc(m, c):
            v = terms.get(m, 0) + c
            if v:
                terms[m] = v
            else:
                terms.pop(m, None)

        if self.q0:
            for m, c in other.terms.items():
                acc(m, c * self.q0)
        if other.q0:
            for m, c in self.terms.items():
                acc(m, c * other.q0)
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                acc(tuple(sorted(m1 + m2)), c1 * c2)
        return Scalar._raw(self.q0 * other.q0, terms, basis)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Scalar":
        q = other.q0 if isinstance(other, Scalar) and other.is_rational else other
        if isinstance(q, (int, Fraction)):
            return self * (1 / Fraction(q))
        raise TypeError("division is only defined by rational scalars")

    # -- comparison -------------------------------------------------------
    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            return not self.terms and self.q0 == other
        if not isinstance(other, Scalar):
            return NotImplemented
        if self.q0 != other.q0 or self.terms != other.terms:
            return False
        return not self.terms or self.basis == other.basis

    def __hash__(self) -> int:
        if self._hash is None:
            if not self.terms:
                self._hash = hash(self.q0)
            else:
                self._hash = hash((self.q0, frozenset(self.terms.items())))
        return self._hash

    # -- numerics ---------------------------------------------------------
    def fixed(self) -> int:
        """Approximately value * 2**FIXED_BITS, as an integer."""
        q = self.q0
        v = (q.numerator << FIXED_BITS) // q.denominator
        for m, c in self.terms.items():
            v += (c.numerator * self.basis.fixed(m)) // c.denominator
        return v

    def floor(self) -> int:
        if not self.terms:
            return self.q0.numerator // self.q0.denominator
        v = self.fixed()
        r = v & _MASK
        if r < _AMBIG_FIXED or _ONE - r < _AMBIG_FIXED:
            raise FloorAmbiguous(
                f"witness value of {self} is within {AMBIGUITY:g} of an integer")
        return v >> FIXED_BITS

    def frac(self) -> "Scalar":
        return self - self.floor()

    def frac_float(self) -> float:
        """Fractional part in [0, 1) as a float (no ambiguity guard)."""
        if not self.terms:
            q = self.q0
            return (q.numerator % q.denominator) / q.denominator
        return (self.fixed() & _MASK) / _ONE

    def __float__(self) -> float:
        if not self.terms:
            return float(self.q0)
        return self.fixed() / _ONE

    def mpf(self) -> mpmath.mpf:
        with mpmath.workdps(_WORK_DPS):
            v = mpmath.mpf(self.q0.numerator) / self.q0.denominator
            for m, c in self.terms.items():
                t = mpmath.mpf(c.numerator) / c.denominator
                for s in m:
                    t *= self.basis.value(s)
                v += t
            return v

    # -- text -------------------------------------------------------------
    def __str__(self) -> str:
        parts = [_q_str(self.q0)]
        for m in sorted(self.terms):
            c = self.terms[m]
            sign = "-" if c < 0 else "+"
            parts.append(f"{sign} {_q_str(abs(c))}*{'*'.join(m)}")
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"Scalar({str(self)!r})"

    @classmethod
    def parse(cls, text: str, basis: IrrationalBasis | None = None) -> "Scalar":
        """Parse ``"1/2 + 3*b1 - 1/4*b1*b2"``-style text."""
        s = text.replace(" ", "")
        if not s:
            raise ValueError("empty scalar text")
        if s[0] not in "+-":
            s = "+" + s
        chunks = re.findall(r"[+-][^+-]+", s)
        if "".join(chunks) != s:
            raise ValueError(f"cannot parse scalar {text!r}")
        q0 = Fraction(0)
        terms: dict = {}
        for ch in chunks:
            sign = -1 if ch[0] == "-" else 1
            factors = ch[1:].split("*")
            coeff = Fraction(1)
            mono: list[str] = []
            for f in factors:
                if re.fullmatch(r"\d+(/\d+)?|\d*\.\d+", f):
                    coeff *= Fraction(f)
                elif re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", f):
                    mono.append(f)
                else:
                    raise ValueError(f"cannot parse scalar {text!r}")
            coeff *= sign
            if mono:
                key = tuple(sorted(mono))
                terms[key] = terms.get(key, 0) + coeff
            else:
                q0 += coeff
        if any(terms.values()) and basis is None:
            raise ValueError(f"scalar {text!r} uses symbols but no basis was given")
        return cls(q0, terms, basis)

    def to_json(self) -> dict:
        return {
            "q0": fraction_str(self.q0),
            "terms": {"*".join(m): fraction_str(c) for m, c in sorted(self.terms.items())},
        }

    @classmethod
    def from_json(cls, data, basis: IrrationalBasis | None = None) -> "Scalar":
        if isinstance(data, str):
            return cls.parse(data, basis)
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            if isinstance(data, float):
                raise ValueError("floats are not exact scalars; use 'p/q' strings")
            return cls(data)
        terms = {tuple(k.split("*")): to_fraction(v) for k, v in data.get("terms", {}).items()}
        return cls(to_fraction(data.get("q0", 0)), terms, basis)


def _q_str(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


ZERO = Scalar(0)
ONE = Scalar(1)


def as_scalars(values: Iterable) -> tuple[Scalar, ...]:
    return tuple(Scalar.of(v) for v in values)
