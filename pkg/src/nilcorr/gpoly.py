"""Generalized (bracket) polynomials: an expression tree over +, *, floor,
exact and high-precision evaluation, an s-expression text format, and
polynomial-in-{n alpha} approximations of characters.

Text format::

    (const "1/2 + 3*b1")   exact Scalar literal
    (var 0)                n_0
    (add P Q) (mul P Q) (floor P)

Subtrees may be shared (the tree is a DAG in memory); evaluation memoizes
shared nodes and the text form writes them out in full.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import mpmath
import numpy as np

from .errors import DegreeOverflow
from .scalar import IrrationalBasis, Scalar

MAX_DEGREE = 200


@dataclass(frozen=True, eq=False)
class Const:
    value: Scalar


@dataclass(frozen=True, eq=False)
class Var:
    index: int


@dataclass(frozen=True, eq=False)
class Add:
    left: "GPoly"
    right: "GPoly"


@dataclass(frozen=True, eq=False)
class Mul:
    left: "GPoly"
    right: "GPoly"


@dataclass(frozen=True, eq=False)
class Floor:
    arg: "GPoly"


GPoly = Union[Const, Var, Add, Mul, Floor]


def const(x) -> Const:
    return Const(x if isinstance(x, Scalar) else Scalar.of(x))


def frac(p: GPoly) -> GPoly:
    """{p} = p - floor(p)."""
    return Add(p, Mul(const(-1), Floor(p)))


def arity(p: GPoly) -> int:
    """1 + the largest variable index (0 for constants)."""
    seen: dict = {}

    def walk(node) -> int:
        key = id(node)
        if key in seen:
            return seen[key]
        if isinstance(node, Const):
            r = 0
        elif isinstance(node, Var):
            r = node.index + 1
        elif isinstance(node, Floor):
            r = walk(node.arg)
        else:
            r = max(walk(node.left), walk(node.right))
        seen[key] = r
        return r

    return walk(p)


def equal(p: GPoly, q: GPoly) -> bool:
    """Structural equality."""
    if type(p) is not type(q):
        return False
    if isinstance(p, Const):
        return p.value == q.value
    if isinstance(p, Var):
        return p.index == q.index
    if isinstance(p, Floor):
        return equal(p.arg, q.arg)
    return equal(p.left, q.left) and equal(p.right, q.right)


def _index(n) -> tuple:
    return (n,) if isinstance(n, int) else tuple(int(x) for x in n)


def eval_gpoly(p: GPoly, n) -> Scalar:
    """Exact value at an integer point; floors go through the witness guard."""
    n = _index(n)
    memo: dict = {}

    def ev(node) -> Scalar:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Const):
            v = node.value
        elif isinstance(node, Var):
            v = Scalar(n[node.index])
        elif isinstance(node, Add):
            v = ev(node.left) + ev(node.right)
        elif isinstance(node, Mul):
            v = ev(node.left) * ev(node.right)
        elif isinstance(node, Floor):
            v = Scalar(ev(node.arg).floor())
        else:
            raise TypeError(f"not a generalized polynomial node: {node!r}")
        memo[key] = v
        return v

    return ev(p)


def eval_numeric(p: GPoly, n, dps: int = 50) -> mpmath.mpf:
    """High-precision value; floors that land too close to an integer at
    this precision are recomputed exactly."""
    n = _index(n)
    memo: dict = {}
    guard = mpmath.mpf(10) ** (-(dps - 12))

    def ev(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Const):
            v = node.value.mpf()
        elif isinstance(node, Var):
            v = mpmath.mpf(n[node.index])
        elif isinstance(node, Add):
            v = ev(node.left) + ev(node.right)
        elif isinstance(node, Mul):
            v = ev(node.left) * ev(node.right)
        elif isinstance(node, Floor):
            x = ev(node.arg)
            r = mpmath.nint(x)
            if abs(x - r) < guard:
                v = mpmath.mpf(eval_gpoly(node.arg, n).floor())
            else:
                v = mpmath.floor(x)
        else:
            raise TypeError(f"not a generalized polynomial node: {node!r}")
        memo[key] = v
        return v

    with mpmath.workdps(dps):
        return +ev(p)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def format_gpoly(p: GPoly) -> str:
    if isinstance(p, Const):
        return f'(const "{p.value}")'
    if isinstance(p, Var):
        return f"(var {p.index})"
    if isinstance(p, Add):
        return f"(add {format_gpoly(p.left)} {format_gpoly(p.right)})"
    if isinstance(p, Mul):
        return f"(mul {format_gpoly(p.left)} {format_gpoly(p.right)})"
    if isinstance(p, Floor):
        return f"(floor {format_gpoly(p.arg)})"
    raise TypeError(f"not a generalized polynomial node: {p!r}")


_TOKEN = re.compile(r'\s*(\(|\)|"[^"]*"|[^\s()"]+)')


def parse_gpoly(text: str, basis: IrrationalBasis | None = None) -> GPoly:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"cannot tokenize generalized polynomial at offset {pos}")
        tokens.append(m.group(1))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    node, used = _parse(tokens, 0, basis)
    if used != len(tokens):
        raise ValueError("trailing tokens after generalized polynomial")
    return node


def _parse(tokens, i, basis):
    if i >= len(tokens) or tokens[i] != "(":
        raise ValueError("expected '('")
    if i + 1 >= len(tokens):
        raise ValueError("unexpected end of input")
    head = tokens[i + 1]
    i += 2
    if head == "const":
        lit = tokens[i]
        if lit.startswith('"'):
            lit = lit[1:-1]
        node = Const(Scalar.parse(lit, basis))
        i += 1
    elif head == "var":
        node = Var(int(tokens[i]))
        i += 1
    elif head in ("add", "mul"):
        a, i = _parse(tokens, i, basis)
        b, i = _parse(tokens, i, basis)
        node = Add(a, b) if head == "add" else Mul(a, b)
    elif head == "floor":
        a, i = _parse(tokens, i, basis)
        node = Floor(a)
    else:
        raise ValueError(f"unknown node {head!r}")
    if i >= len(tokens) or tokens[i] != ")":
        raise ValueError("expected ')'")
    return node, i + 1


# ---------------------------------------------------------------------------
# character approximation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CharacterApprox:
    """re + i*im approximates n -> exp(2 pi i m n alpha) within ``sup_err``."""

    re: GPoly
    im: GPoly
    sup_err: float
    degree: int

    def __iter__(self):
        yield self.re
        yield self.im
        yield self.sup_err

    def value(self, n, dps: int | None = None) -> complex:
        dps = dps or _eval_dps(self.degree)
        return complex(float(eval_numeric(self.re, n, dps)), float(eval_numeric(self.im, n, dps)))


def _eval_dps(degree: int) -> int:
    # monomial coefficients can reach (1 + sqrt 2)^degree
    return 30 + int(degree * 0.4)


def _cheb_tail(z: float, degree: int) -> float:
    """Upper bound for sum_{j > degree} |Chebyshev coefficient| of
    cos(z s + phi) on [-1, 1], using |J_j(z)| <= (z/2)^j / j!."""
    total = 0.0
    j = degree + 1
    term = math.exp(j * math.log(z / 2) - math.lgamma(j + 1)) if z > 0 else 0.0
    while term > 1e-300:
        total += 2 * term
        j += 1
        term *= (z / 2) / j
        if j > degree + 2000:
            break
    return total


def _rounding(degree: int) -> float:
    return (degree + 1) * 1e-15


def approximate_character(m: int, alpha, eps: float) -> CharacterApprox:
    """Polynomials in {n alpha} approximating cos and sin of 2 pi m n alpha.

    The approximant is the Chebyshev interpolant of degree K of
    u -> exp(2 pi i m u) in s = 2u - 1, with K the least degree whose
    interpolation bound (twice the coefficient tail) plus rounding is below
    ``eps``.  Coefficients are converted exactly to the monomial basis and
    evaluated in Horner form over s = 2{n alpha} - 1.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    alpha = alpha if isinstance(alpha, Scalar) else Scalar.of(alpha)
    if m == 0 or not alpha:
        return CharacterApprox(const(1), const(0), 0.0, 0)
    z = math.pi * abs(m)
    degree = 1
    while 2 * _cheb_tail(z, degree) + _rounding(degree) > eps:
        degree += 1
        if degree > MAX_DEGREE:
            raise DegreeOverflow(
                f"frequency {m} needs a degree above {MAX_DEGREE} for error {eps:g}")
    err = 2 * _cheb_tail(z, degree) + _rounding(degree)

    def re_fn(s):
        return np.cos(np.pi * m * (s + 1))

    def im_fn(s):
        return np.sin(np.pi * m * (s + 1))

    cre = np.polynomial.chebyshev.chebinterpolate(re_fn, degree)
    cim = np.polynomial.chebyshev.chebinterpolate(im_fn, degree)
    x = Mul(const(alpha), Var(0))
    s = Add(Mul(const(2), frac(x)), const(-1))
    return CharacterApprox(_horner(_cheb_to_monomial(cre), s),
                           _horner(_cheb_to_monomial(cim), s), err, degree)


def _cheb_to_monomial(coeffs) -> list[Fraction]:
    """Exact conversion of (float) Chebyshev coefficients to monomials."""
    n = len(coeffs)
    out = [Fraction(0)] * n
    t_prev, t_cur = [1], [0, 1]
    basis = [t_prev, t_cur]
    for _ in range(2, n):
        nxt = [0] + [2 * c for c in t_cur]
        for i, c in enumerate(t_prev):
            nxt[i] -= c
        t_prev, t_cur = t_cur, nxt
        basis.append(t_cur)
    for c, tj in zip(coeffs, basis):
        fc = Fraction(float(c))
        for i, b in enumerate(tj):
            if b:
                out[i] += fc * b
    return out


def _horner(coeffs: Sequence[Fraction], s: GPoly) -> GPoly:
    acc: GPoly = const(coeffs[-1])
    for c in reversed(coeffs[:-1]):
        acc = Add(Mul(acc, s), const(c)) if c else Mul(acc, s)
    return acc


def observed_error(approx: CharacterApprox, m: int, alpha, ns: Sequence[int]) -> float:
    """max |exp(2 pi i m n alpha) - approx(n)| over the given n."""
    alpha = alpha if isinstance(alpha, Scalar) else Scalar.of(alpha)
    worst = 0.0
    for n in ns:
        ph = (alpha * (m * n)).frac_float()
        target = complex(math.cos(2 * math.pi * ph), math.sin(2 * math.pi * ph))
        worst = max(worst, abs(target - approx.value(n)))
    return worst


__all__ = ["Const", "Var", "Add", "Mul", "Floor", "GPoly", "const", "frac", "arity", "equal",
           "eval_gpoly", "eval_numeric", "format_gpoly", "parse_gpoly", "CharacterApprox",
           "approximate_character", "observed_error", "MAX_DEGREE"]
