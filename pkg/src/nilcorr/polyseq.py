"""Integer-valued polynomials in the binomial basis and polynomial sequences
g(n) = a_1^{p_1(n)} ... a_k^{p_k(n)} in catalog groups."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Callable, Iterable, Mapping, Sequence

from .errors import PresentationMismatch
from .nilgroup import GroupElement, GroupPresentation, inverse, multiply, power
from .scalar import IrrationalBasis


def binom(n, m: int):
    """C(n, m) for integer or rational n (generalized binomial)."""
    if m < 0:
        return 0
    if isinstance(n, int):
        if 0 <= n:
            return comb(n, m)
        # C(-k, m) = (-1)^m C(k + m - 1, m)
        return (-1) ** m * comb(-n + m - 1, m)
    num = Fraction(1)
    for j in range(m):
        num *= n - j
    return num / factorial(m)


def _stirling2(k: int, j: int) -> int:
    if k == j:
        return 1
    if j == 0 or j > k:
        return 0
    return j * _stirling2(k - 1, j) + _stirling2(k - 1, j - 1)


def _stirling1_signed(m: int, j: int) -> int:
    # coefficients of the falling factorial x(x-1)...(x-m+1)
    coeffs = [1]
    for i in range(m):
        nxt = [0] * (len(coeffs) + 1)
        for d, c in enumerate(coeffs):
            nxt[d + 1] += c
            nxt[d] -= i * c
        coeffs = nxt
    return coeffs[j] if j < len(coeffs) else 0


def _as_tuple(n) -> tuple:
    if isinstance(n, (int, Fraction)):
        return (n,)
    return tuple(n)


@dataclass(frozen=True)
class IntPolynomial:
    """sum_m c_m prod_i C(n_i, m_i) with integer c_m."""

    d: int
    terms: tuple  # sorted tuple of (idx tuple, int coeff), zero coefficients dropped

    def __init__(self, d: int, terms: Mapping | Iterable = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        for idx, c in items:
            idx = tuple(int(i) for i in idx)
            if len(idx) != d or any(i < 0 for i in idx):
                raise ValueError(f"bad multi-index {idx} for d={d}")
            if isinstance(c, Fraction):
                if c.denominator != 1:
                    raise ValueError("binomial-basis coefficients must be integers")
                c = int(c)
            acc[idx] = acc.get(idx, 0) + int(c)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "terms", tuple(sorted((k, v) for k, v in acc.items() if v)))

    # -- constructors ----------------------------------------------------
    @classmethod
    def zero(cls, d: int) -> "IntPolynomial":
        return cls(d, {})

    @classmethod
    def constant(cls, d: int, c: int) -> "IntPolynomial":
        return cls(d, {(0,) * d: c})

    @classmethod
    def variable(cls, d: int, i: int) -> "IntPolynomial":
        idx = [0] * d
        idx[i] = 1
        return cls(d, {tuple(idx): 1})

    @classmethod
    def from_monomials(cls, d: int, coeffs: Mapping) -> "IntPolynomial":
        """Convert {exponent tuple: rational coeff} to the binomial basis.

        Raises ValueError if the polynomial is not integer-valued."""
        acc: dict = {}
        for exps, c in coeffs.items():
            exps = _as_tuple(exps)
            c = Fraction(c)
            per_var = [[(j, _stirling2(e, j) * factorial(j)) for j in range(e + 1)
                        if _stirling2(e, j)] for e in exps]
            for combo in itertools.product(*per_var):
                idx = tuple(j for j, _ in combo)
                w = c
                for _, s in combo:
                    w *= s
                acc[idx] = acc.get(idx, 0) + w
        for idx, v in acc.items():
            if Fraction(v).denominator != 1:
                raise ValueError("polynomial is not integer-valued on Z^d")
        return cls(d, {k: int(v) for k, v in acc.items()})

    @classmethod
    def from_function(cls, d: int, degree: int, fn: Callable[[tuple], int]) -> "IntPolynomial":
        """Interpolate an integer-valued polynomial of total degree <= degree
        from its values on {0..degree}^d (multivariate forward differences)."""
        pts = list(itertools.product(range(degree + 1), repeat=d))
        vals = {p: fn(p) for p in pts}
        # forward differences along each axis in turn
        for axis in range(d):
            new = {}
            for p in pts:
                k = p[axis]
                s = 0
                for j in range(k + 1):
                    q = list(p)
                    q[axis] = j
                    s += (-1) ** (k - j) * comb(k, j) * vals[tuple(q)]
                new[p] = s
            vals = new
        return cls(d, {p: v for p, v in vals.items() if v and sum(p) <= degree})

    # -- evaluation ------------------------------------------------------
    def __call__(self, n):
        return self.eval(n)

    def eval(self, n):
        n = _as_tuple(n)
        if len(n) != self.d:
            raise ValueError(f"expected {self.d} arguments, got {len(n)}")
        total = 0
        for idx, c in self.terms:
            t = c
            for ni, mi in zip(n, idx):
                if mi:
                    t *= binom(ni, mi)
            total += t
        return total

    @property
    def degree(self) -> int:
        return max((sum(idx) for idx, _ in self.terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def to_monomials(self) -> dict:
        acc: dict = {}
        for idx, c in self.terms:
            per_var = [[(j, Fraction(_stirling1_signed(m, j), factorial(m))) for j in range(m + 1)
                        if _stirling1_signed(m, j)] for m in idx]
            for combo in itertools.product(*per_var):
                e = tuple(j for j, _ in combo)
                w = Fraction(c)
                for _, s in combo:
                    w *= s
                acc[e] = acc.get(e, 0) + w
        return {k: v for k, v in acc.items() if v}

    # -- algebra ---------------------------------------------------------
    def __add__(self, other: "IntPolynomial") -> "IntPolynomial":
        self._check(other)
        return IntPolynomial(self.d, list(self.terms) + list(other.terms))

    def __neg__(self) -> "IntPolynomial":
        return IntPolynomial(self.d, [(k, -v) for k, v in self.terms])

    def __sub__(self, other: "IntPolynomial") -> "IntPolynomial":
        return self + (-other)

    def scale(self, k: int) -> "IntPolynomial":
        return IntPolynomial(self.d, [(i, k * v) for i, v in self.terms])

    def _check(self, other):
        if self.d != other.d:
            raise ValueError("polynomials over different numbers of variables")

    def compose(self, fn: Callable[[tuple], tuple], degree: int | None = None) -> "IntPolynomial":
        """p(fn(n)) for a polynomial map fn keeping integer values."""
        deg = self.degree if degree is None else degree
        return IntPolynomial.from_function(self.d, deg, lambda n: self.eval(fn(n)))

    def affine_substitute(self, k: int, i: Sequence[int]) -> "IntPolynomial":
        """m -> p(k m + i)."""
        return self.compose(lambda m: tuple(k * mj + ij for mj, ij in zip(m, i)))

    def binom2(self) -> "IntPolynomial":
        """n -> C(p(n), 2)."""
        return IntPolynomial.from_function(self.d, 2 * self.degree,
                                           lambda n: binom(self.eval(n), 2))

    def to_json(self) -> dict:
        return {"d": self.d, "terms": [{"idx": list(k), "coeff": v} for k, v in self.terms]}

    @classmethod
    def from_json(cls, data: Mapping) -> "IntPolynomial":
        d = int(data["d"])
        if "monomials" in data:
            return cls.from_monomials(d, {tuple(t["exp"]): Fraction(str(t["coeff"]))
                                          for t in data["monomials"]})
        return cls(d, {tuple(t["idx"]): int(t["coeff"]) for t in data["terms"]})


@dataclass(frozen=True)
class PolySequence:
    """g(n) = a_1^{p_1(n)} ... a_k^{p_k(n)}."""

    presentation: GroupPresentation
    factors: tuple  # of (GroupElement, IntPolynomial)
    d: int = 1

    def __post_init__(self):
        for a, p in self.factors:
            if a.presentation != self.presentation:
                raise PresentationMismatch("factor outside the sequence presentation")
            if p.d != self.d:
                raise ValueError("factor polynomial has the wrong number of variables")

    @classmethod
    def of(cls, presentation, factors: Iterable, d: int | None = None) -> "PolySequence":
        factors = tuple(factors)
        if d is None:
            d = factors[0][1].d if factors else 1
        return cls(presentation, factors, d)

    @property
    def naive_degree(self) -> int:
        return max((p.degree for _, p in self.factors), default=0)

    def __call__(self, n) -> GroupElement:
        return eval_seq(self, n)

    def to_json(self) -> dict:
        return {
            "presentation": self.presentation.to_json(),
            "d": self.d,
            "factors": [{"element": [c.to_json() for c in a.coords], "poly": p.to_json()}
                        for a, p in self.factors],
        }

    @classmethod
    def from_json(cls, data: Mapping, basis: IrrationalBasis | None = None) -> "PolySequence":
        from .scalar import Scalar

        pres = GroupPresentation.from_json(data["presentation"])
        factors = []
        for f in data["factors"]:
            a = GroupElement(pres, tuple(Scalar.from_json(c, basis) for c in f["element"]))
            factors.append((a, IntPolynomial.from_json(f["poly"])))
        return cls(pres, tuple(factors), int(data.get("d", 1)))


def eval_poly(p: IntPolynomial, n) -> int:
    return p.eval(n)


def eval_seq(g, n) -> GroupElement:
    if not isinstance(g, PolySequence):
        return g(n)
    out = g.presentation.identity()
    for a, p in g.factors:
        e = p.eval(n)
        if e:
            out = multiply(out, power(a, e))
    return out


class ShiftedSequence:
    """n -> g(n + m)."""

    def __init__(self, g, m):
        self.g = g
        self.m = _as_tuple(m)
        self.presentation = g.presentation
        self.d = g.d

    def __call__(self, n) -> GroupElement:
        n = _as_tuple(n)
        return eval_seq(self.g, tuple(a + b for a, b in zip(n, self.m)))


class ProductSequence:
    """n -> g(n) h(n)."""

    def __init__(self, g, h):
        if g.presentation != h.presentation:
            raise PresentationMismatch("sequences live in different groups")
        self.g, self.h = g, h
        self.presentation = g.presentation
        self.d = g.d

    def __call__(self, n) -> GroupElement:
        return multiply(eval_seq(self.g, n), eval_seq(self.h, n))


class InverseSequence:
    """n -> g(n)^-1."""

    def __init__(self, g):
        self.g = g
        self.presentation = g.presentation
        self.d = g.d

    def __call__(self, n) -> GroupElement:
        return inverse(eval_seq(self.g, n))


def shift(g, m) -> ShiftedSequence:
    return ShiftedSequence(g, m)


def product(g, h) -> ProductSequence:
    return ProductSequence(g, h)


def inverse_sequence(g) -> InverseSequence:
    return InverseSequence(g)
