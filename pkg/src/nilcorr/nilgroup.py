"""Nilpotent Lie groups with lattice, in Malcev coordinates.

The group law of every presentation is a list of rational polynomials
``q_i(u, v)`` evaluated exactly on :class:`~nilcorr.scalar.Scalar`
coordinates.  Catalog members are tori, the Heisenberg group and direct
products; a custom table is accepted as data but only the triangular
(Malcev-ordered) shape is supported by the lattice reduction.

Conventions
-----------
* Heisenberg coordinates (x, y, z) correspond to the upper unitriangular
  matrix [[1, x, z], [0, 1, y], [0, 0, 1]], so
  (x, y, z)(x', y', z') = (x + x', y + y', z + z' + x y').
* The lattice is the set of elements with integer coordinates.
* Reduction to the fundamental domain is right multiplication by a lattice
  element, clearing coordinates in Malcev order into [0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from . import lattice as la
from .errors import PresentationMismatch, StepUnsupported
from .scalar import IrrationalBasis, Scalar, ZERO, fraction_str, to_fraction

SCHEMA_VERSION = 1

# one monomial of a multiplication polynomial: coeff * prod u_a * prod v_b
Term = tuple  # (coeff: Fraction, u_idx: tuple[int, ...], v_idx: tuple[int, ...])


@dataclass(frozen=True)
class GroupPresentation:
    kind: str
    dim: int
    step: int
    mult_table: tuple  # tuple over coordinates of tuple[Term, ...]
    torus_coords: tuple[int, ...]
    factors: tuple = ()
    label: str = ""

    def __post_init__(self):
        if len(self.mult_table) != self.dim:
            raise ValueError("multiplication table length must equal the dimension")
        object.__setattr__(self, "_bilinear", _bilinear_shape(self.mult_table))

    def __repr__(self) -> str:
        return f"GroupPresentation({self.label or self.kind}, dim={self.dim}, step={self.step})"

    @property
    def dim_cont(self) -> int:
        return self.dim

    @property
    def bilinear(self):
        """Per-coordinate list of (a, b, c) with q_i = u_i + v_i + sum c u_a v_b,
        or None when the table is not of this step <= 2 shape."""
        return self._bilinear

    def identity(self) -> "GroupElement":
        return GroupElement(self, (ZERO,) * self.dim)

    def element(self, *coords, basis: IrrationalBasis | None = None) -> "GroupElement":
        vals = []
        for c in coords:
            if isinstance(c, str):
                vals.append(Scalar.parse(c, basis))
            else:
                vals.append(Scalar.of(c))
        return GroupElement(self, tuple(vals))

    def basis_vector(self, i: int, t=1) -> "GroupElement":
        coords = [ZERO] * self.dim
        coords[i] = Scalar.of(t)
        return GroupElement(self, tuple(coords))

    def bracket(self, x: Sequence, y: Sequence) -> list[Fraction]:
        """Lie bracket of coordinate vectors (step <= 2 tables)."""
        bil = self._require_bilinear("bracket")
        out = [Fraction(0)] * self.dim
        for i, terms in enumerate(bil):
            for a, b, c in terms:
                out[i] += c * (x[a] * y[b] - y[a] * x[b])
        return out

    def _require_bilinear(self, what: str):
        if self.step > 2 or self._bilinear is None:
            raise StepUnsupported(f"{what} is only implemented for step <= 2 presentations")
        return self._bilinear

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        if self.kind == "torus":
            return {"kind": "torus", "k": self.dim}
        if self.kind == "heisenberg3":
            return {"kind": "heisenberg3"}
        if self.kind == "product":
            return {"kind": "product", "factors": [f.to_json() for f in self.factors]}
        return {
            "kind": "custom",
            "dim": self.dim,
            "step": self.step,
            "torus_coords": list(self.torus_coords),
            "mult_table": [
                [{"coeff": fraction_str(c), "u": list(u), "v": list(v)} for c, u, v in poly]
                for poly in self.mult_table
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GroupPresentation":
        kind = data["kind"]
        if kind == "torus":
            return torus(int(data["k"]))
        if kind == "heisenberg3":
            return heisenberg3()
        if kind == "product":
            return direct_product(*[cls.from_json(f) for f in data["factors"]])
        if kind == "custom":
            table = tuple(
                tuple((to_fraction(t["coeff"]), tuple(t.get("u", ())), tuple(t.get("v", ())))
                      for t in poly)
                for poly in data["mult_table"]
            )
            dim = int(data["dim"])
            return GroupPresentation("custom", dim, int(data["step"]), table,
                                     tuple(data.get("torus_coords", range(dim))), (), "custom")
        raise ValueError(f"unknown presentation kind {kind!r}")


def _bilinear_shape(table) -> list | None:
    out = []
    for i, poly in enumerate(table):
        lin_u = lin_v = False
        quad = []
        for c, u, v in poly:
            if u == (i,) and v == () and c == 1 and not lin_u:
                lin_u = True
            elif u == () and v == (i,) and c == 1 and not lin_v:
                lin_v = True
            elif len(u) == 1 and len(v) == 1 and u[0] < i and v[0] < i:
                quad.append((u[0], v[0], Fraction(c)))
            else:
                return None
        if not (lin_u and lin_v):
            return None
        out.append(quad)
    return out


def _linear_table(dim: int, offset: int = 0) -> list:
    return [[(Fraction(1), (offset + i,), ()), (Fraction(1), (), (offset + i,))]
            for i in range(dim)]


def torus(k: int) -> GroupPresentation:
    if k < 0:
        raise ValueError("torus dimension must be nonnegative")
    table = tuple(tuple(p) for p in _linear_table(k))
    return GroupPresentation("torus", k, 1, table, tuple(range(k)), (), f"T^{k}")


def heisenberg3() -> GroupPresentation:
    table = _linear_table(3)
    table[2].append((Fraction(1), (0,), (1,)))
    return GroupPresentation("heisenberg3", 3, 2, tuple(tuple(p) for p in table), (0, 1),
                             (), "H3")


def direct_product(*factors: GroupPresentation) -> GroupPresentation:
    table = []
    tcoords = []
    off = 0
    for f in factors:
        for poly in f.mult_table:
            table.append(tuple((c, tuple(a + off for a in u), tuple(b + off for b in v))
                               for c, u, v in poly))
        tcoords.extend(off + t for t in f.torus_coords)
        off += f.dim
    step = max((f.step for f in factors), default=1)
    label = " x ".join(f.label or f.kind for f in factors)
    return GroupPresentation("product", off, step, tuple(table), tuple(tcoords),
                             tuple(factors), label)


def factor_offsets(p: GroupPresentation) -> list[int]:
    offs, o = [], 0
    for f in p.factors:
        offs.append(o)
        o += f.dim
    return offs


@dataclass(frozen=True)
class GroupElement:
    presentation: GroupPresentation
    coords: tuple

    def __post_init__(self):
        if len(self.coords) != self.presentation.dim:
            raise ValueError(
                f"expected {self.presentation.dim} coordinates, got {len(self.coords)}")

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def __pow__(self, n) -> "GroupElement":
        return power(self, n)

    def __repr__(self) -> str:
        return f"({', '.join(str(c) for c in self.coords)})"

    @property
    def in_lattice(self) -> bool:
        return all(c.is_integer for c in self.coords)

    @property
    def is_identity(self) -> bool:
        return all(not c for c in self.coords)

    def floats(self) -> tuple[float, ...]:
        return tuple(float(c) for c in self.coords)

    def torus_part(self) -> tuple:
        return tuple(self.coords[i] for i in self.presentation.torus_coords)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "presentation": self.presentation.to_json(),
            "coords": [c.to_json() for c in self.coords],
        }

    @classmethod
    def from_json(cls, data: dict, basis: IrrationalBasis | None = None) -> "GroupElement":
        p = GroupPresentation.from_json(data["presentation"])
        return cls(p, tuple(Scalar.from_json(c, basis) for c in data["coords"]))


def _check_same(a: GroupElement, b: GroupElement):
    if a.presentation != b.presentation:
        raise PresentationMismatch(
            f"elements live in {a.presentation!r} and {b.presentation!r}")


def _eval_table(p: GroupPresentation, u: Sequence, v: Sequence, upto: int | None = None):
    out = []
    for poly in p.mult_table[:upto]:
        acc = ZERO
        for c, ui, vi in poly:
            t = None
            for a in ui:
                t = u[a] if t is None else t * u[a]
            for b in vi:
                t = v[b] if t is None else t * v[b]
            acc = acc + (Scalar(c) if t is None else t * c)
        out.append(acc)
    return out


def multiply(a: GroupElement, b: GroupElement) -> GroupElement:
    _check_same(a, b)
    return GroupElement(a.presentation, tuple(_eval_table(a.presentation, a.coords, b.coords)))


def inverse(a: GroupElement) -> GroupElement:
    p = a.presentation
    if p.bilinear is not None:
        return power(a, -1)
    # triangular solve of a * x = e
    x: list = [ZERO] * p.dim
    for i in range(p.dim):
        partial = _eval_table(p, a.coords, x, i + 1)[i]
        x[i] = -partial
    return GroupElement(p, tuple(x))


def commutator(a: GroupElement, b: GroupElement) -> GroupElement:
    """a b a^-1 b^-1."""
    _check_same(a, b)
    return multiply(multiply(a, b), multiply(inverse(a), inverse(b)))


def power(a: GroupElement, n) -> GroupElement:
    """a**n for integer n, or for rational n on step <= 2 tables.

    On step <= 2 tables the closed form is
    coords(a^t) = t u + C(t, 2) B(u, u), which is also the one-parameter
    subgroup through a.
    """
    p = a.presentation
    t = to_fraction(n) if not isinstance(n, Fraction) else n
    bil = p.bilinear
    if bil is not None:
        u = a.coords
        c2 = t * (t - 1) / 2
        out = []
        for i, terms in enumerate(bil):
            v = u[i] * t
            if terms and c2:
                quad = ZERO
                for x, y, c in terms:
                    quad = quad + u[x] * u[y] * c
                v = v + quad * c2
            out.append(v)
        return GroupElement(p, tuple(out))
    if t.denominator != 1:
        raise StepUnsupported("rational powers need a step <= 2 presentation")
    k = int(t)
    base = a if k >= 0 else inverse(a)
    k = abs(k)
    result = p.identity()
    while k:
        if k & 1:
            result = multiply(result, base)
        base = multiply(base, base)
        k >>= 1
    return result


def reduce_mod_lattice(a: GroupElement) -> tuple[GroupElement, GroupElement]:
    """Return (q, gamma) with q = a * gamma, gamma in the lattice and every
    coordinate of q in [0, 1)."""
    p = a.presentation
    gamma: list = [ZERO] * p.dim
    for i in range(p.dim):
        ci = _eval_table(p, a.coords, gamma, i + 1)[i]
        gamma[i] = Scalar(-ci.floor())
    g = GroupElement(p, tuple(gamma))
    return multiply(a, g), g


def reduce_point(a: GroupElement) -> GroupElement:
    return reduce_mod_lattice(a)[0]


# ---------------------------------------------------------------------------
# subgroups and subnilmanifolds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Subgroup:
    """Connected subgroup {a : coords(a) in span}, span a rational subspace.

    Only subspaces closed under the quadratic part of the group law are
    accepted (for step <= 2 tables this makes the coordinate set a subgroup).
    """

    presentation: GroupPresentation
    cont_span: tuple  # RREF rows over Q
    generators: tuple = field(default=(), compare=False)
    normal: bool = field(default=False, compare=False)

    @classmethod
    def from_span(cls, presentation: GroupPresentation, rows: Iterable[Sequence]) -> "Subgroup":
        n = presentation.dim
        span = la.rref([list(r) for r in rows], n)
        bil = presentation._require_bilinear("subgroups")
        for x in span:
            for y in span:
                q = [Fraction(0)] * n
                for i, terms in enumerate(bil):
                    for a, b, c in terms:
                        q[i] += c * x[a] * y[b]
                if any(q) and not la.in_span(q, span, n):
                    raise ValueError("span is not closed under the group law")
        normal = all(
            la.in_span(presentation.bracket(e, x), span, n)
            for e in la.identity(n) for x in span
        )
        gens = tuple(
            GroupElement(presentation, tuple(Scalar(v) for v in row))
            for row in la.lattice_points_basis(span, n)
        )
        return cls(presentation, span, gens, normal)

    @classmethod
    def whole(cls, presentation: GroupPresentation) -> "Subgroup":
        return cls.from_span(presentation, la.identity(presentation.dim))

    @classmethod
    def trivial(cls, presentation: GroupPresentation) -> "Subgroup":
        return cls.from_span(presentation, [])

    @property
    def dim(self) -> int:
        return len(self.cont_span)

    def contains_vector(self, vec: Sequence) -> bool:
        return la.in_span(vec, self.cont_span, self.presentation.dim)

    def contains(self, other: "Subgroup") -> bool:
        return all(self.contains_vector(r) for r in other.cont_span)

    def lattice_basis(self) -> list[list[int]]:
        return [[int(c.q0) for c in g.coords] for g in self.generators]


@dataclass(frozen=True)
class Subnilmanifold:
    """Y = H x for a connected rational subgroup H and a point x."""

    subgroup: Subgroup
    basepoint: GroupElement

    def __post_init__(self):
        if self.basepoint.presentation != self.subgroup.presentation:
            raise PresentationMismatch("basepoint and subgroup presentations differ")
        # rationality: integer points of the span form a full-rank lattice
        if la.rank_int(self.subgroup.lattice_basis() or [[0] * self.presentation.dim]) \
                != self.subgroup.dim:
            raise ValueError("subgroup is not rational")

    @property
    def presentation(self) -> GroupPresentation:
        return self.subgroup.presentation

    @property
    def dim(self) -> int:
        return self.subgroup.dim

    @property
    def normal(self) -> bool:
        return self.subgroup.normal

    @classmethod
    def whole(cls, presentation: GroupPresentation) -> "Subnilmanifold":
        return cls(Subgroup.whole(presentation), presentation.identity())

    @classmethod
    def from_span(cls, presentation, rows, basepoint: GroupElement | None = None):
        return cls(Subgroup.from_span(presentation, rows),
                   basepoint or presentation.identity())

    def translate(self, a: GroupElement) -> "Subnilmanifold":
        """a Y = (a H a^-1) a x; the span is conjugated accordingly."""
        p = self.presentation
        rows = [list(r) for r in self.subgroup.cont_span]
        if not self.normal:
            au = [c.q0 if c.is_rational else None for c in a.coords]
            if any(x is None for x in au):
                raise StepUnsupported("conjugating a non-normal span by an irrational element")
            rows = [[r + b for r, b in zip(row, p.bracket(au, row))] for row in rows]
        return Subnilmanifold(Subgroup.from_span(p, rows), multiply(a, self.basepoint))

    def frame(self) -> tuple[list[float], list[list[int]]]:
        """(x, W) such that t -> x * (sum t_j W_j), t in [0, 1)^r, pushes
        Lebesgue measure forward to the Haar measure of Y.

        Y = H x = x (x^-1 H x); the conjugated subgroup is parametrized
        either by the Malcev cube (whole group) or additively (when the
        quadratic part of the law vanishes on it).
        """
        p = self.presentation
        n = p.dim
        rows = [list(r) for r in self.subgroup.cont_span]
        if not self.normal:
            xs = [c.q0 if c.is_rational else None for c in self.basepoint.coords]
            if any(v is None for v in xs):
                raise StepUnsupported(
                    "integration over a non-normal subnilmanifold needs a rational base point")
            rows = [[r - b for r, b in zip(row, p.bracket(xs, row))] for row in rows]
        x = list(self.basepoint.floats())
        if len(rows) == n:
            return x, la.identity(n)
        basis = la.lattice_points_basis(rows, n)
        bil = p.bilinear
        for w1 in basis:
            for w2 in basis:
                for terms in bil:
                    if any(c * w1[a] * w2[b] for a, b, c in terms):
                        raise StepUnsupported(
                            "parametrization of a proper non-abelian subgroup")
        return x, basis

    def parametrize(self, t: Sequence[float]) -> list[float]:
        """Float coordinates (unreduced) of x * h(t)."""
        x, basis = self.frame()
        h = [sum(tj * w[i] for tj, w in zip(t, basis)) for i in range(self.presentation.dim)]
        return _float_product(self.presentation, x, h)


def _float_product(p: GroupPresentation, u: Sequence[float], v: Sequence[float]) -> list[float]:
    out = []
    for poly in p.mult_table:
        acc = 0.0
        for c, ui, vi in poly:
            t = float(c)
            for a in ui:
                t *= u[a]
            for b in vi:
                t *= v[b]
            acc += t
        out.append(acc)
    return out


def float_reduce(p: GroupPresentation, u: Sequence[float]) -> list[float]:
    """Float version of :func:`reduce_mod_lattice` (used by quadrature)."""
    import math

    gamma = [0.0] * p.dim
    for i in range(p.dim):
        ci = _float_product(p, u, gamma)[i]
        gamma[i] = -math.floor(ci)
    q = _float_product(p, u, gamma)
    return [min(max(x, 0.0), math.nextafter(1.0, 0.0)) for x in q]


def normal_closure(y: Subnilmanifold) -> Subnilmanifold:
    """Image of the smallest normal subgroup containing Y's subgroup.

    Y must contain the base point of X.
    """
    p = y.presentation
    if p.step > 2 or p.bilinear is None:
        raise StepUnsupported("normal closure is implemented for step <= 2 presentations")
    n = p.dim
    if not _contains_origin(y):
        raise ValueError("normal closure needs a subnilmanifold through the base point")
    rows = [list(r) for r in y.subgroup.cont_span]
    while True:
        extra = [p.bracket(e, r) for e in la.identity(n) for r in rows]
        new = la.rref(rows + extra, n)
        if len(new) == len(la.rref(rows, n)):
            break
        rows = [list(r) for r in new]
    return Subnilmanifold(Subgroup.from_span(p, rows), p.identity())


def _contains_origin(y: Subnilmanifold) -> bool:
    x = y.basepoint
    if not all(c.is_rational for c in x.coords):
        return False
    vec = [c.q0 for c in x.coords]
    # x lies in H Gamma iff x reduced lies in H modulo integers; for the
    # catalog it suffices to test x - round(x) against the span
    frac = [v - round(v) for v in vec]
    return not any(frac) or y.subgroup.contains_vector(frac)


# ---------------------------------------------------------------------------
# orbit closures on tori
# ---------------------------------------------------------------------------

def relation_lattice(vectors: Sequence[Sequence[Scalar]], k: int) -> list[list[int]]:
    """Basis of {m in Z^k : m . v in Z for every v in ``vectors``}."""
    # irrational parts: sum_c m_c q_{c,mono} = 0 for every monomial
    eq_rows: list[list[Fraction]] = []
    q0s: list[list[Fraction]] = []
    for v in vectors:
        v = [Scalar.of(x) for x in v]
        monos = sorted({m for x in v for m in x.terms})
        for mono in monos:
            eq_rows.append([x.terms.get(mono, Fraction(0)) for x in v])
        q0s.append([x.q0 for x in v])
    ints = [la.clear_denominators(r) for r in eq_rows]
    base = la.integer_kernel(ints, k) if ints else la.identity(k)
    if not base:
        return []
    # integrality of m . q0 for each vector, over m = w . base
    cur = base
    for q0 in q0s:
        coeffs = [sum(Fraction(b[c]) * q0[c] for c in range(k)) for b in cur]
        den = 1
        for c in coeffs:
            den = den * c.denominator // _gcd(den, c.denominator)
        if den == 1:
            continue
        row = [int(c * den) % den for c in coeffs] + [den]
        ker = la.integer_kernel([row], len(cur) + 1)
        ws = [kv[:-1] for kv in ker]
        new = [[sum(w[j] * cur[j][c] for j in range(len(cur))) for c in range(k)] for w in ws]
        new = [r for r in new if any(r)]
        # re-basis (drop dependencies)
        cur = _lattice_basis_rows(new, k)
        if not cur:
            return []
    return cur


def _gcd(a: int, b: int) -> int:
    from math import gcd
    return gcd(a, b)


def _lattice_basis_rows(rows: list[list[int]], k: int) -> list[list[int]]:
    """A Z-basis of the lattice spanned by ``rows`` (Hermite-style via SNF)."""
    rows = [r for r in rows if any(r)]
    if not rows:
        return []
    mat = la.transpose(rows)
    s, u, _ = la.smith_normal_form(mat)
    uinv = la.inverse_unimodular(u)
    diag = [s[i][i] for i in range(min(len(s), len(s[0]))) if s[i][i]]
    return [[uinv[i][j] * d for i in range(k)] for j, d in enumerate(diag)]


@dataclass(frozen=True)
class OrbitClosure:
    subtorus: Subnilmanifold
    cosets: int
    relations: tuple


def orbit_closure_torus(alpha: Sequence, k: int | None = None) -> tuple[Subnilmanifold, int]:
    """Closure of {n alpha mod 1} in T^k: identity component and number of
    connected components."""
    oc = subgroup_closure_torus([alpha], k)
    return oc.subtorus, oc.cosets


def subgroup_closure_torus(vectors: Sequence[Sequence], k: int | None = None) -> OrbitClosure:
    """Closure of the subgroup of T^k generated by ``vectors``."""
    vectors = [[Scalar.of(x) for x in v] for v in vectors]
    if k is None:
        k = len(vectors[0])
    if any(len(v) != k for v in vectors):
        raise ValueError("vector length does not match the torus dimension")
    rel = relation_lattice(vectors, k)
    sat, index = la.saturate(rel, k)
    span = la.rational_kernel(sat, k) if sat else la.identity(k)
    t = torus(k)
    sub = Subnilmanifold(Subgroup.from_span(t, span), t.identity())
    return OrbitClosure(sub, index, tuple(tuple(r) for r in rel))
