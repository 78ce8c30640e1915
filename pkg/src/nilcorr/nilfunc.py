"""Functions on nilmanifolds: characters of the torus factor times piecewise
polynomials on the fundamental cube.

Evaluation of nilsequences, Haar integration over subnilmanifolds,
conditional expectation onto quotients and the alternation
(interleaving) construction live here.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Mapping, Sequence

import numpy as np

from . import lattice as la
from .errors import (NotFactorable, NotNormal, PresentationMismatch, ProvenanceMissing,
                     QuadratureNotConverged)
from .nilgroup import (GroupElement, GroupPresentation, Subgroup, Subnilmanifold,
                       _float_product, direct_product, float_reduce, heisenberg3, multiply, power,
                       reduce_mod_lattice, torus)
from .polyseq import PolySequence, eval_seq
from .scalar import Scalar, ZERO, fraction_str, to_fraction
from .sequences import SequenceHandle, cis

TWO_PI = 2.0 * math.pi
REL_TOL = 1e-10
MAX_LEVEL = 12
POINT_BUDGET = 4_000_000


# ---------------------------------------------------------------------------
# data model
# ---------------------------------------------------------------------------

def _complex_json(z: complex):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _complex_from_json(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, dict):
        return complex(float(v.get("re", 0)), float(v.get("im", 0)))
    return complex(float(v))


@dataclass(frozen=True)
class Piece:
    """A polynomial sum c * u^e supported on a half-open rational box."""

    box: tuple    # ((lo, hi), ...) Fractions, one pair per coordinate
    poly: tuple   # ((exponent tuple, complex coeff), ...)

    @classmethod
    def make(cls, box: Sequence, poly: Mapping | Sequence) -> "Piece":
        b = tuple((to_fraction(lo), to_fraction(hi)) for lo, hi in box)
        for lo, hi in b:
            if not 0 <= lo < hi <= 1:
                raise ValueError(f"box side [{lo}, {hi}) is not inside [0, 1)")
        items = poly.items() if isinstance(poly, Mapping) else poly
        p = tuple((tuple(int(e) for e in exps), complex(c)) for exps, c in items)
        if any(len(e) != len(b) for e, _ in p):
            raise ValueError("exponent length does not match the box dimension")
        return cls(b, p)

    @property
    def dim(self) -> int:
        return len(self.box)

    def sup(self) -> float:
        total = 0.0
        for exps, c in self.poly:
            m = abs(c)
            for (lo, hi), e in zip(self.box, exps):
                if e:
                    m *= float(max(abs(lo), abs(hi))) ** e
            total += m
        return total

    def to_json(self) -> dict:
        return {
            "box": [[fraction_str(lo), fraction_str(hi)] for lo, hi in self.box],
            "poly": [{"exp": list(e), "coeff": _complex_json(c)} for e, c in self.poly],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Piece":
        return cls.make([tuple(s) for s in data["box"]],
                        [(tuple(t["exp"]), _complex_from_json(t["coeff"])) for t in data["poly"]])


@dataclass(frozen=True)
class NilTerm:
    coeff: complex
    character: tuple          # integer frequency on the torus coordinates
    pieces: tuple = ()        # empty means the constant 1

    def sup(self) -> float:
        if not self.pieces:
            return abs(self.coeff)
        return abs(self.coeff) * max(p.sup() for p in self.pieces)


@dataclass(frozen=True)
class QuotientMap:
    """x Z -> A u_T(x) mod 1, identifying X/Z with a torus."""

    source: GroupPresentation
    matrix: tuple  # rows are integer vectors on the torus coordinates

    @property
    def target(self) -> GroupPresentation:
        return torus(len(self.matrix))

    def __call__(self, x: GroupElement) -> GroupElement:
        u = x.torus_part()
        coords = []
        for row in self.matrix:
            acc = ZERO
            for c, v in zip(row, u):
                if c:
                    acc = acc + v * c
            coords.append(acc)
        return reduce_mod_lattice(GroupElement(self.target, tuple(coords)))[0]


@dataclass(frozen=True)
class CoordinateProjection:
    """x Z -> (x_i)_{i in keep} for a coordinate-aligned normal Z whose
    complementary coordinates multiply among themselves."""

    source: GroupPresentation
    keep: tuple
    target: GroupPresentation

    def __call__(self, x: GroupElement) -> GroupElement:
        y = GroupElement(self.target, tuple(x.coords[i] for i in self.keep))
        return reduce_mod_lattice(y)[0]


@dataclass(frozen=True)
class NilFunction:
    presentation: GroupPresentation
    terms: tuple
    quotient: QuotientMap | CoordinateProjection | None = field(default=None, compare=False)

    def __post_init__(self):
        k = len(self.presentation.torus_coords)
        for t in self.terms:
            if len(t.character) != k:
                raise ValueError("character length must equal the number of torus coordinates")
            for p in t.pieces:
                if p.dim != self.presentation.dim:
                    raise ValueError("piece dimension must equal the group dimension")

    # -- constructors ----------------------------------------------------
    @classmethod
    def character(cls, presentation: GroupPresentation, m: Sequence[int],
                  coeff: complex = 1) -> "NilFunction":
        return cls(presentation, (NilTerm(complex(coeff), tuple(int(x) for x in m)),))

    @classmethod
    def constant(cls, presentation: GroupPresentation, c: complex = 1) -> "NilFunction":
        return cls.character(presentation, [0] * len(presentation.torus_coords), c)

    @classmethod
    def piecewise(cls, presentation: GroupPresentation, pieces: Sequence[Piece],
                  character: Sequence[int] | None = None, coeff: complex = 1) -> "NilFunction":
        m = tuple(character) if character is not None else (0,) * len(presentation.torus_coords)
        return cls(presentation, (NilTerm(complex(coeff), m, tuple(pieces)),))

    @classmethod
    def polynomial(cls, presentation: GroupPresentation, poly: Mapping | Sequence,
                   character: Sequence[int] | None = None) -> "NilFunction":
        """A single polynomial over the whole cube."""
        box = [(0, 1)] * presentation.dim
        return cls.piecewise(presentation, [Piece.make(box, poly)], character)

    # -- algebra ---------------------------------------------------------
    def __add__(self, other: "NilFunction") -> "NilFunction":
        if other.presentation != self.presentation:
            raise PresentationMismatch("functions on different nilmanifolds")
        return NilFunction(self.presentation, self.terms + other.terms)

    def scale(self, c: complex) -> "NilFunction":
        return NilFunction(self.presentation,
                           tuple(NilTerm(t.coeff * c, t.character, t.pieces) for t in self.terms),
                           self.quotient)

    @property
    def is_character_only(self) -> bool:
        return all(not t.pieces for t in self.terms)

    def bound(self) -> float:
        return sum(t.sup() for t in self.terms)

    def __call__(self, q: GroupElement) -> complex:
        return eval_at(self, q)

    # -- serialization ---------------------------------------------------
    def to_json(self) -> dict:
        return {
            "presentation": self.presentation.to_json(),
            "terms": [{"coeff": _complex_json(t.coeff), "character": list(t.character),
                       "cube_poly": [p.to_json() for p in t.pieces]} for t in self.terms],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "NilFunction":
        pres = GroupPresentation.from_json(data["presentation"])
        terms = []
        for t in data["terms"]:
            m = t.get("character") or [0] * len(pres.torus_coords)
            terms.append(NilTerm(_complex_from_json(t.get("coeff", 1)), tuple(int(x) for x in m),
                                 tuple(Piece.from_json(p) for p in t.get("cube_poly", ()))))
        return cls(pres, tuple(terms))


def tensor(fs: Sequence[NilFunction]) -> NilFunction:
    """f_1 (x) ... (x) f_k on the direct product of the presentations."""
    pres = direct_product(*[f.presentation for f in fs])
    terms = [NilTerm(1 + 0j, (), ())]
    dim = 0
    for f in fs:
        terms = [_tensor_terms(acc, t, dim, f.presentation) for acc in terms for t in f.terms]
        dim += f.presentation.dim
    return NilFunction(pres, tuple(terms))


def _tensor_terms(a: NilTerm, b: NilTerm, prev_dim: int, pres_b: GroupPresentation) -> NilTerm:
    pieces_a = a.pieces or (None,)
    pieces_b = b.pieces or (None,)
    if not a.pieces and not b.pieces:
        return NilTerm(a.coeff * b.coeff, a.character + b.character, ())
    out = []
    for pa in pieces_a:
        for pb in pieces_b:
            box_a = pa.box if pa else ((Fraction(0), Fraction(1)),) * prev_dim
            poly_a = pa.poly if pa else (((0,) * prev_dim, 1 + 0j),)
            box_b = pb.box if pb else ((Fraction(0), Fraction(1)),) * pres_b.dim
            poly_b = pb.poly if pb else (((0,) * pres_b.dim, 1 + 0j),)
            poly = tuple((ea + eb, ca * cb) for ea, ca in poly_a for eb, cb in poly_b)
            out.append(Piece(box_a + box_b, poly))
    return NilTerm(a.coeff * b.coeff, a.character + b.character, tuple(out))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _coord_in(c: Scalar, lo: Fraction, hi: Fraction) -> bool:
    if c.is_rational:
        return lo <= c.q0 < hi
    v = float(c)
    return float(lo) <= v < float(hi)


def eval_at(f: NilFunction, q: GroupElement) -> complex:
    """Value of f at a point of the fundamental cube (points outside the
    cube are reduced first)."""
    if q.presentation != f.presentation:
        raise PresentationMismatch("point and function live on different nilmanifolds")
    if not all(c.floor() == 0 for c in q.coords):
        q = reduce_mod_lattice(q)[0]
    tor = [q.coords[i] for i in f.presentation.torus_coords]
    floats = None
    total = 0j
    for t in f.terms:
        phase = ZERO
        for m, u in zip(t.character, tor):
            if m:
                phase = phase + u * m
        val = t.coeff * cis(phase.frac_float()) if phase else t.coeff
        if t.pieces:
            if floats is None:
                floats = q.floats()
            pv = 0j
            for p in t.pieces:
                if all(_coord_in(c, lo, hi) for c, (lo, hi) in zip(q.coords, p.box)):
                    pv = _poly_value(p.poly, floats)
                    break
            val *= pv
        total += val
    return total


def _poly_value(poly, u) -> complex:
    s = 0j
    for exps, c in poly:
        t = c
        for x, e in zip(u, exps):
            if e:
                t *= x ** e
        s += t
    return s


def eval_array(f: NilFunction, pts: np.ndarray) -> np.ndarray:
    """Vectorized evaluation on an (N, dim) float array of cube points."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    tc = list(f.presentation.torus_coords)
    out = np.zeros(len(pts), dtype=complex)
    for t in f.terms:
        m = np.asarray(t.character, dtype=float)
        if np.any(m):
            val = t.coeff * np.exp(2j * np.pi * (pts[:, tc] @ m))
        else:
            val = np.full(len(pts), t.coeff, dtype=complex)
        if t.pieces:
            pv = np.zeros(len(pts), dtype=complex)
            for p in t.pieces:
                mask = np.ones(len(pts), dtype=bool)
                for j, (lo, hi) in enumerate(p.box):
                    if lo > 0 or hi < 1:
                        mask &= (pts[:, j] >= float(lo)) & (pts[:, j] < float(hi))
                if not mask.any():
                    continue
                sub = pts[mask]
                acc = np.zeros(len(sub), dtype=complex)
                for exps, c in p.poly:
                    term = np.full(len(sub), c, dtype=complex)
                    for j, e in enumerate(exps):
                        if e:
                            term *= sub[:, j] ** e
                    acc += term
                pv[mask] = acc
            val = val * pv
        out += val
    return out


# ---------------------------------------------------------------------------
# nilsequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NilProvenance:
    """psi(n) = f(g(n) x0 Gamma)."""

    f: NilFunction
    g: Any          # PolySequence or a lazy sequence with a presentation
    x0: GroupElement

    def value(self, n) -> complex:
        n = (n,) if isinstance(n, int) else tuple(n)
        return eval_at(self.f, reduce_mod_lattice(multiply(self.g(n), self.x0))[0])


def nilsequence(f: NilFunction, g, x0: GroupElement | None = None) -> SequenceHandle:
    pres = f.presentation
    if g.presentation != pres:
        raise PresentationMismatch("sequence and function live on different nilmanifolds")
    x0 = x0 if x0 is not None else pres.identity()
    if x0.presentation != pres:
        raise PresentationMismatch("base point lives on a different nilmanifold")

    def fn(n):
        return eval_at(f, reduce_mod_lattice(multiply(eval_seq(g, n), x0))[0])

    return SequenceHandle(g.d, fn, f.bound(), provenance=NilProvenance(f, g, x0),
                          name="nilsequence")


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def _torus_rows(M: Subnilmanifold) -> list[list[Fraction]]:
    tc = M.presentation.torus_coords
    return [[row[i] for i in tc] for row in M.subgroup.cont_span]


def _character_integral(t: NilTerm, M: Subnilmanifold) -> complex:
    for row in _torus_rows(M):
        if sum(m * r for m, r in zip(t.character, row)):
            return 0j
    phase = ZERO
    tor = M.basepoint.torus_part()
    for m, u in zip(t.character, tor):
        if m:
            phase = phase + u * m
    return t.coeff * (cis(phase.frac_float()) if phase else 1)


@lru_cache(maxsize=4096)
def _monomial_char_integral(e: int, k: int, lo: Fraction, hi: Fraction) -> complex:
    """int_lo^hi u^e exp(2 pi i k u) du."""
    if k == 0:
        return float((hi ** (e + 1) - lo ** (e + 1)) / (e + 1))
    w = 2j * math.pi * k
    lo_f, hi_f = float(lo), float(hi)
    val = (cmath.exp(w * hi_f) - cmath.exp(w * lo_f)) / w
    for j in range(1, e + 1):
        val = (hi_f ** j * cmath.exp(w * hi_f) - lo_f ** j * cmath.exp(w * lo_f)) / w - j / w * val
    return val


def _whole_piece_integral(t: NilTerm, pres: GroupPresentation) -> complex:
    freq = [0] * pres.dim
    for m, i in zip(t.character, pres.torus_coords):
        freq[i] = m
    total = 0j
    for p in t.pieces:
        for exps, c in p.poly:
            v = c
            for (lo, hi), e, k in zip(p.box, exps, freq):
                v *= _monomial_char_integral(e, k, lo, hi)
            total += v
    return t.coeff * total


def integrate(f: NilFunction, M: Subnilmanifold | None = None) -> complex:
    """Haar integral of f over M (the whole nilmanifold by default)."""
    pres = f.presentation
    M = M if M is not None else Subnilmanifold.whole(pres)
    if M.presentation != pres:
        raise PresentationMismatch("function and subnilmanifold live on different nilmanifolds")
    total = 0j
    numeric = []
    whole = M.dim == pres.dim
    for t in f.terms:
        if not t.pieces:
            total += _character_integral(t, M)
        elif whole:
            total += _whole_piece_integral(t, pres)
        else:
            numeric.append(t)
    if numeric:
        g = NilFunction(pres, tuple(numeric))
        if M.dim == 0:
            total += eval_at(g, M.basepoint)
        elif M.dim == 1:
            total += _integrate_line(g, M)
        else:
            total += _integrate_tensor(g, M)
    return total


def _integrate_line(f: NilFunction, M: Subnilmanifold) -> complex:
    """Exact cell decomposition of t -> x h(t), t in [0, 1): inside each cell
    the reduced point moves affinely and no box boundary is crossed, so
    Gauss-Legendre on the cell converges spectrally."""
    pres = f.presentation
    x, basis = M.frame()
    w = [float(v) for v in basis[0]]
    cuts: list[set] = [set() for _ in range(pres.dim)]
    for t in f.terms:
        for p in t.pieces:
            for j, (lo, hi) in enumerate(p.box):
                cuts[j].update((float(lo), float(hi)))
    for j in range(pres.dim):
        cuts[j].update((0.0, 1.0))
    cut_lists = [sorted(c) for c in cuts]
    max_freq = max((sum(abs(m) for m in t.character) for t in f.terms), default=0)
    max_deg = max((sum(e) for t in f.terms for p in t.pieces for e, _ in p.poly), default=0)

    def point(t):
        return _float_product(pres, x, [t * wi for wi in w])

    total = 0j
    t0 = 0.0
    cells = 0
    while t0 < 1.0:
        probe = min(t0 + 1e-12, (t0 + 1.0) / 2)
        raw = point(probe)
        gamma = _floors(pres, raw)
        q0 = _float_product(pres, point(t0), gamma)
        q1 = _float_product(pres, point(t0 + 1.0), gamma)
        slope = [b - a for a, b in zip(q0, q1)]
        qp = _float_product(pres, raw, gamma)
        t1 = 1.0
        for j, s in enumerate(slope):
            if s > 0:
                c = next((c for c in cut_lists[j] if c > qp[j]), None)
            elif s < 0:
                c = next((c for c in reversed(cut_lists[j]) if c < qp[j]), None)
            else:
                continue
            if c is not None:
                tau = t0 + (c - q0[j]) / s
                if t0 < tau < t1:
                    t1 = tau
        if t1 <= t0:
            t1 = min(1.0, t0 + 1e-12)
        span_phase = abs(sum(abs(s) for s in slope)) * max_freq * (t1 - t0)
        n = min(200, int(max_deg / 2 + 2 * span_phase) + 12)
        nodes, weights = _gl(n)
        ts = t0 + (t1 - t0) * (nodes + 1) / 2
        pts = np.array([[a + (tt - t0) * s for a, s in zip(q0, slope)] for tt in ts])
        pts = np.clip(pts, 0.0, math.nextafter(1.0, 0.0))
        total += (t1 - t0) / 2 * np.dot(weights, eval_array(f, pts))
        t0 = t1
        cells += 1
        if cells > 2_000_000:
            raise QuadratureNotConverged("too many cells along the line")
    return complex(total)


def _floors(pres: GroupPresentation, u: Sequence[float]) -> list[float]:
    gamma = [0.0] * pres.dim
    for i in range(pres.dim):
        ci = _float_product(pres, u, gamma)[i]
        gamma[i] = -math.floor(ci)
    return gamma


@lru_cache(maxsize=256)
def _gl(n: int):
    return np.polynomial.legendre.leggauss(n)


def _integrate_tensor(f: NilFunction, M: Subnilmanifold) -> complex:
    """Composite tensor Gauss-Legendre with Richardson refinement."""
    pres = f.presentation
    x, basis = M.frame()
    r = len(basis)
    W = np.array(basis, dtype=float)
    nodes, weights = _gl(6)
    prev_r = None
    prev_i = None
    for level in range(MAX_LEVEL + 1):
        panels = 2 ** level
        npts = (6 * panels) ** r
        if npts > POINT_BUDGET:
            break
        h = 1.0 / panels
        one_t = ((np.arange(panels)[:, None] + (nodes[None, :] + 1) / 2) * h).ravel()
        one_w = np.tile(weights * h / 2, panels)
        grids = np.meshgrid(*([one_t] * r), indexing="ij")
        T = np.stack([g.ravel() for g in grids], axis=1)
        wts = np.ones(len(T))
        for wg in np.meshgrid(*([one_w] * r), indexing="ij"):
            wts = wts * wg.ravel()
        H = T @ W
        pts = np.array([float_reduce(pres, _float_product(pres, x, list(hrow))) for hrow in H])
        cur = complex(np.dot(wts, eval_array(f, pts)))
        rich = cur if prev_i is None else 2 * cur - prev_i
        if prev_r is not None and abs(rich - prev_r) <= REL_TOL * max(1.0, abs(rich)):
            return rich
        prev_r, prev_i = rich, cur
    raise QuadratureNotConverged(
        f"tensor quadrature over a {r}-dimensional subnilmanifold did not reach "
        f"relative tolerance {REL_TOL}")


# ---------------------------------------------------------------------------
# conditional expectation
# ---------------------------------------------------------------------------

def _as_subgroup(Z) -> Subgroup:
    return Z.subgroup if isinstance(Z, Subnilmanifold) else Z


def quotient_map(Z) -> QuotientMap:
    """Identification of X/Z with a torus, for normal Z containing every
    non-torus direction."""
    Z = _as_subgroup(Z)
    pres = Z.presentation
    tc = pres.torus_coords
    others = [i for i in range(pres.dim) if i not in tc]
    if Z.dim and not all(Z.contains_vector([int(j == i) for j in range(pres.dim)])
                         for i in others):
        raise NotFactorable("X/Z is not a torus for this subgroup")
    rows = [la.clear_denominators([row[i] for i in tc]) for row in Z.cont_span]
    rows = [r for r in rows if any(r)]
    ann = la.integer_kernel(rows, len(tc)) if rows else la.identity(len(tc))
    ann, _ = la.saturate(ann, len(tc)) if ann else ([], 1)
    return QuotientMap(pres, tuple(tuple(r) for r in ann))


def conditional_expectation(f: NilFunction, Z) -> NilFunction:
    """E(f | X/Z) as a function on the quotient: a torus (:class:`QuotientMap`)
    when Z holds every non-torus direction, otherwise the complementary
    coordinates of a coordinate-aligned Z (:class:`CoordinateProjection`).

    When Z is trivial the function is returned unchanged.
    """
    sub = _as_subgroup(Z)
    pres = f.presentation
    if sub.presentation != pres:
        raise PresentationMismatch("subgroup and function live on different nilmanifolds")
    if not sub.normal:
        raise NotNormal("conditional expectation needs a normal subgroup")
    if sub.dim == 0:
        return f
    aligned = _aligned_coords(sub)
    try:
        qm = quotient_map(sub)
    except NotFactorable:
        if aligned is None:
            raise
        return _project_onto_complement(f, aligned)
    A = [list(r) for r in qm.matrix]
    terms = []
    for t in f.terms:
        if not t.pieces:
            c = _solve_in_lattice(A, list(t.character))
            if c is not None:
                terms.append(NilTerm(t.coeff, tuple(c), ()))
            continue
        if aligned is None:
            raise NotFactorable("piecewise factor on a subgroup that is not coordinate-aligned")
        terms.extend(_average_pieces(t, pres, aligned, A))
    return NilFunction(qm.target, tuple(terms), qm)


def coordinate_projection(pres: GroupPresentation, zc: Sequence[int]) -> CoordinateProjection:
    """Quotient by the coordinate subgroup on ``zc``; the kept coordinates
    must not feed any Z coordinate into their own multiplication law."""
    zs = set(zc)
    keep = tuple(i for i in range(pres.dim) if i not in zs)
    for i in keep:
        for _, u, v in pres.mult_table[i]:
            if zs.intersection(u) or zs.intersection(v):
                raise NotFactorable("the complement of Z is not closed under multiplication")
    pos = {i: j for j, i in enumerate(keep)}
    table = tuple(tuple((c, tuple(pos[a] for a in u), tuple(pos[b] for b in v))
                        for c, u, v in pres.mult_table[i]) for i in keep)
    tcs = tuple(pos[i] for i in pres.torus_coords if i in pos)
    return CoordinateProjection(pres, keep, _recognize(pres, keep, table, tcs))


def _recognize(pres, keep, table, tcs) -> GroupPresentation:
    """Prefer a named presentation for the quotient so it serializes compactly."""
    if pres.factors:
        blocks, off = [], 0
        for fac in pres.factors:
            blocks.append((fac, tuple(range(off, off + fac.dim))))
            off += fac.dim
        chosen = [fac for fac, idx in blocks if set(idx) <= set(keep)]
        if sum(fac.dim for fac in chosen) == len(keep):
            return chosen[0] if len(chosen) == 1 else direct_product(*chosen)
    for cand in (torus(len(keep)), heisenberg3()):
        if cand.mult_table == table and cand.torus_coords == tcs:
            return cand
    step = 2 if any(len(u) + len(v) > 1 for poly in table for _, u, v in poly) else 1
    step = max(step, pres.step) if step > 1 else 1
    return GroupPresentation("custom", len(keep), step, table, tcs, (), "custom")


def _project_onto_complement(f: NilFunction, zc: list[int]) -> NilFunction:
    pres = f.presentation
    proj = coordinate_projection(pres, zc)
    tc = list(pres.torus_coords)
    zt = [k for k, i in enumerate(tc) if i in zc]
    kt = [k for k, i in enumerate(tc) if i not in zc]
    terms = []
    for t in f.terms:
        if not t.pieces:
            # characters nontrivial on Z average to zero along each fibre
            if not any(t.character[k] for k in zt):
                terms.append(NilTerm(t.coeff, tuple(t.character[k] for k in kt), ()))
            continue
        terms.extend(_average_along(t, pres, zc, proj.keep))
    return NilFunction(proj.target, tuple(terms), proj)


def _aligned_coords(sub: Subgroup) -> list[int] | None:
    """Coordinates spanning the subgroup when it is a coordinate subspace."""
    n = sub.presentation.dim
    idx = [i for i in range(n) if sub.contains_vector([int(j == i) for j in range(n)])]
    return idx if len(idx) == sub.dim else None


def _solve_in_lattice(A: list[list[int]], m: list[int]) -> list[int] | None:
    """Integer c with c A = m, or None."""
    if not any(m):
        return [0] * len(A)
    if not A:
        return None
    k = len(m)
    # solve A^T c = m over Q
    at = [[Fraction(A[j][i]) for j in range(len(A))] + [Fraction(m[i])] for i in range(k)]
    sol = la.rref(at, len(A) + 1)
    c = [Fraction(0)] * len(A)
    for row in sol:
        piv = next(j for j, x in enumerate(row) if x)
        if piv == len(A):
            return None
        c[piv] = row[-1]
    if any(x.denominator != 1 for x in c):
        return None
    if [sum(int(c[j]) * A[j][i] for j in range(len(A))) for i in range(k)] != m:
        return None
    return [int(x) for x in c]


def _average_pieces(t: NilTerm, pres: GroupPresentation, zc: list[int],
                    A: list[list[int]]) -> list[NilTerm]:
    """Integrate out the coordinates ``zc`` of a term; the remaining torus
    coordinates are exactly the quotient coordinates."""
    tc = list(pres.torus_coords)
    keep = [i for i in tc if i not in zc]
    # the quotient coordinates must be the kept torus coordinates in order
    sel = [[int(j == tc.index(i)) for j in range(len(tc))] for i in keep]
    if sorted(map(tuple, A)) != sorted(map(tuple, sel)):
        raise NotFactorable("quotient coordinates are not a coordinate selection")
    order = [tuple(row).index(1) for row in A]
    kept_pos = [tc[o] for o in order]  # group coordinate for each quotient coordinate
    return _average_along(t, pres, zc, kept_pos)


def _average_along(t: NilTerm, pres: GroupPresentation, zc, kept_pos) -> list[NilTerm]:
    """Integrate a term over the cube coordinates ``zc``; the result lives on
    the coordinates ``kept_pos`` (in that order)."""
    tc = list(pres.torus_coords)
    freq = dict(zip(tc, t.character))
    out_pieces = []
    for p in t.pieces:
        factor_poly: dict = {}
        for exps, c in p.poly:
            v = c
            for i in zc:
                v *= _monomial_char_integral(exps[i], freq.get(i, 0), *p.box[i])
            if v == 0:
                continue
            key = tuple(exps[i] for i in kept_pos)
            factor_poly[key] = factor_poly.get(key, 0) + v
        if factor_poly:
            out_pieces.append(Piece(tuple(p.box[i] for i in kept_pos),
                                    tuple(sorted(factor_poly.items()))))
    if not out_pieces:
        return []
    # boxes that differed only in the averaged coordinates now overlap; keep
    # them as separate terms so that evaluation sums them
    m = tuple(freq[i] for i in kept_pos if i in freq)
    return [NilTerm(t.coeff, m, (p,)) for p in out_pieces]


# ---------------------------------------------------------------------------
# alternation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RescaledSequence:
    """n -> prod_j a_j^{p_j((n - i) / k)} (rational exponents)."""

    base: PolySequence
    k: int
    offset: tuple

    @property
    def presentation(self) -> GroupPresentation:
        return self.base.presentation

    @property
    def d(self) -> int:
        return self.base.d

    def __call__(self, n) -> GroupElement:
        n = (n,) if isinstance(n, int) else tuple(n)
        m = tuple(Fraction(a - b, self.k) for a, b in zip(n, self.offset))
        out = self.presentation.identity()
        for a, p in self.base.factors:
            e = p.eval(m)
            if e:
                out = multiply(out, power(a, e))
        return out


@dataclass(frozen=True)
class AlternationProvenance:
    """The nilsystem on (Z/kZ)^d x prod X_i realizing the interleaving."""

    k: int
    d: int
    pieces: tuple  # ((residue, NilProvenance with rescaled sequence)), ...)

    @property
    def presentation(self) -> GroupPresentation:
        return direct_product(*[prov.f.presentation for _, prov in self.pieces])

    def point(self, n) -> tuple:
        n = (n,) if isinstance(n, int) else tuple(n)
        res = tuple(x % self.k for x in n)
        pts = tuple(reduce_mod_lattice(multiply(eval_seq(prov.g, n), prov.x0))[0]
                    for _, prov in self.pieces)
        return res, pts

    def value(self, n) -> complex:
        """Evaluate from the product-manifold point: the residue selects the
        coordinate block whose function is read."""
        res, pts = self.point(n)
        for (i, prov), q in zip(self.pieces, pts):
            if i == res:
                return eval_at(prov.f, q)
        raise ValueError(f"no component for residue {res}")


def alternate(k: int, components: Mapping) -> SequenceHandle:
    """psi(k m + i) = psi_i(m) for residues i in {0..k-1}^d."""
    if k < 1:
        raise ValueError("k must be positive")
    comps = {((i,) if isinstance(i, int) else tuple(i)): h for i, h in components.items()}
    d = next(iter(comps.values())).d
    expected = set(_residues(k, d))
    if set(comps) != expected:
        raise ValueError(f"components must be indexed by all residues in {{0..{k - 1}}}^{d}")
    pieces = []
    for i in sorted(comps):
        h = comps[i]
        prov = h.provenance
        if not isinstance(prov, NilProvenance) or not isinstance(prov.g, PolySequence):
            raise ProvenanceMissing(f"component {i} has no nilsequence provenance")
        g2 = RescaledSequence(prov.g, k, i)
        pieces.append((i, NilProvenance(prov.f, g2, prov.x0)))
    table = dict(pieces)

    def fn(n):
        i = tuple(x % k for x in n)
        prov = table[i]
        return eval_at(prov.f, reduce_mod_lattice(multiply(prov.g(n), prov.x0))[0])

    bound = max(comps[i].bound for i in comps)
    return SequenceHandle(d, fn, bound, provenance=AlternationProvenance(k, d, tuple(pieces)),
                          name="alternation")


def _residues(k: int, d: int):
    return itertools.product(range(k), repeat=d)
