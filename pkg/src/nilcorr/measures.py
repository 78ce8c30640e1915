"""Finite measures on tori and their Fourier transforms.

Conventions
-----------
* phi(n) = int exp(-2 pi i n x) d mu(x).
* The absolutely continuous part has density h(x) = sum_m c_m exp(2 pi i m x),
  so its contribution to phi(n) is c_n.
* A self-similar part is the invariant probability of the maps
  x -> x / s + t_j chosen with weights w_j, times ``mass``; its transform is
  mass * prod_{k >= 0} sum_j w_j exp(-2 pi i n t_j / s^k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch
from .scalar import IrrationalBasis, Scalar, fraction_str, to_fraction
from .sequences import SequenceHandle, cis, cis_array, frac_array

IFS_CUTOFF = 1e-8


def _num(x):
    """Exact Fraction when possible, else complex."""
    if isinstance(x, (list, tuple)):
        z = complex(float(x[0]), float(x[1]))
        return to_fraction(z.real) if z.imag == 0 else z
    if isinstance(x, complex):
        return x if x.imag else to_fraction(x.real)
    return to_fraction(x)


def _num_json(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    return fraction_str(Fraction(x))


@dataclass(frozen=True)
class Atom:
    loc: Scalar
    mass: Fraction


@dataclass(frozen=True)
class SelfSimilar:
    s: Fraction
    translations: tuple   # Fractions
    weights: tuple        # Fractions summing to 1
    mass: Fraction = Fraction(1)

    def __post_init__(self):
        if self.s <= 1:
            raise ValueError("the contraction ratio 1/s needs s > 1")
        if len(self.translations) != len(self.weights) or not self.weights:
            raise ValueError("translations and weights must have the same nonzero length")
        if any(w < 0 for w in self.weights) or sum(self.weights) != 1:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.mass < 0:
            raise ValueError("mass must be nonnegative")


def cantor(mass=1) -> SelfSimilar:
    """Middle-thirds Cantor measure."""
    return SelfSimilar(Fraction(3), (Fraction(0), Fraction(2, 3)),
                       (Fraction(1, 2), Fraction(1, 2)), to_fraction(mass))


@dataclass(frozen=True)
class TorusMeasure:
    atoms: tuple = ()
    ac: tuple = ()                  # ((m, c_m), ...) sorted by m
    ifs: SelfSimilar | None = None
    basis: IrrationalBasis | None = field(default=None, compare=False)

    def __post_init__(self):
        for a in self.atoms:
            if a.mass < 0:
                raise ValueError("atom masses must be nonnegative")
        ac = tuple(sorted((int(m), c) for m, c in (self.ac.items() if isinstance(self.ac, Mapping)
                                                   else self.ac) if c))
        object.__setattr__(self, "ac", ac)
        if ac and not self._density_nonnegative():
            raise ValueError("absolutely continuous density takes negative values")

    # -- constructors ----------------------------------------------------
    @classmethod
    def make(cls, atoms: Sequence = (), ac: Mapping | None = None,
             ifs: SelfSimilar | None = None, basis: IrrationalBasis | None = None):
        at = tuple(Atom(loc if isinstance(loc, Scalar) else Scalar.of(loc), to_fraction(mass))
                   for loc, mass in atoms)
        return cls(at, tuple((int(m), _num(c)) for m, c in (ac or {}).items()), ifs, basis)

    @classmethod
    def dirac(cls, loc=0, mass=1) -> "TorusMeasure":
        return cls.make([(loc, mass)])

    @classmethod
    def lebesgue(cls, mass=1) -> "TorusMeasure":
        return cls.make(ac={0: mass})

    def __add__(self, other: "TorusMeasure") -> "TorusMeasure":
        if self.ifs and other.ifs:
            raise ValueError("the catalog holds at most one self-similar part")
        ac = dict(self.ac)
        for m, c in other.ac:
            ac[m] = ac.get(m, 0) + c
        return TorusMeasure(self.atoms + other.atoms, tuple(ac.items()),
                            self.ifs or other.ifs, self.basis or other.basis)

    def scale(self, c) -> "TorusMeasure":
        c = to_fraction(c)
        ifs = self.ifs
        if ifs is not None:
            ifs = SelfSimilar(ifs.s, ifs.translations, ifs.weights, ifs.mass * c)
        return TorusMeasure(tuple(Atom(a.loc, a.mass * c) for a in self.atoms),
                            tuple((m, v * c) for m, v in self.ac), ifs, self.basis)

    # -- properties ------------------------------------------------------
    @property
    def total_mass(self) -> Fraction | complex:
        t = sum((a.mass for a in self.atoms), Fraction(0))
        t += dict(self.ac).get(0, 0)
        if self.ifs:
            t += self.ifs.mass
        return t

    @property
    def is_real(self) -> bool:
        coeffs = dict(self.ac)
        return all(complex(coeffs.get(-m, 0)) == complex(c).conjugate() for m, c in coeffs.items())

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=complex)
        for m, c in self.ac:
            out += complex(c) * np.exp(2j * np.pi * m * x)
        return out

    def _density_nonnegative(self, samples: int = 4096) -> bool:
        vals = self.density(np.arange(samples) / samples)
        return bool(np.all(vals.real >= -1e-12) and np.all(np.abs(vals.imag) <= 1e-9))

    # -- serialization ---------------------------------------------------
    def to_json(self) -> dict:
        out: dict = {
            "atoms": [{"loc": str(a.loc), "mass": fraction_str(a.mass)} for a in self.atoms],
            "ac": {"freqs": {str(m): _num_json(c) for m, c in self.ac}},
        }
        if self.ifs:
            out["ifs"] = {"s": fraction_str(self.ifs.s),
                          "translations": [fraction_str(t) for t in self.ifs.translations],
                          "weights": [fraction_str(w) for w in self.ifs.weights],
                          "mass": fraction_str(self.ifs.mass)}
        if self.basis is not None:
            out["basis"] = self.basis.to_json()
        return out

    @classmethod
    def from_json(cls, data: Mapping, basis: IrrationalBasis | None = None) -> "TorusMeasure":
        if basis is None and "basis" in data:
            basis = IrrationalBasis.from_json(data["basis"])
        atoms = [(Scalar.from_json(a["loc"], basis), a["mass"]) for a in data.get("atoms", ())]
        ac = {int(m): c for m, c in data.get("ac", {}).get("freqs", {}).items()}
        ifs = None
        if data.get("ifs"):
            d = data["ifs"]
            ifs = SelfSimilar(to_fraction(d["s"]), tuple(to_fraction(t) for t in d["translations"]),
                              tuple(to_fraction(w) for w in d["weights"]),
                              to_fraction(d.get("mass", 1)))
        return cls.make(atoms, ac, ifs, basis)


@dataclass(frozen=True)
class ProductMeasure:
    factors: tuple

    @property
    def d(self) -> int:
        return len(self.factors)

    def to_json(self) -> dict:
        return {"factors": [f.to_json() for f in self.factors]}

    @classmethod
    def from_json(cls, data: Mapping, basis: IrrationalBasis | None = None) -> "ProductMeasure":
        return cls(tuple(TorusMeasure.from_json(f, basis) for f in data["factors"]))


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def _unit(frac: float) -> complex:
    return cis(-frac)


def atomic_part(mu: TorusMeasure, n: int) -> complex:
    total = 0j
    for a in mu.atoms:
        if a.mass:
            total += float(a.mass) * _unit((a.loc * n).frac_float())
    return total


def ac_part(mu: TorusMeasure, n: int) -> complex:
    return complex(dict(mu.ac).get(n, 0))


def ifs_part(ifs: SelfSimilar | None, n: int) -> tuple[complex, float]:
    """(value, tail error bound) of the self-similar contribution."""
    if ifs is None or not ifs.mass:
        return 0j, 0.0
    if n == 0:
        return complex(float(ifs.mass)), 0.0
    tmax = max(abs(t) for t in ifs.translations)
    prod = 1 + 0j
    scale = Fraction(1)
    while abs(n) * float(tmax * scale) >= IFS_CUTOFF:
        f = 0j
        for t, w in zip(ifs.translations, ifs.weights):
            r = n * t * scale
            f += float(w) * _unit(float(r - math.floor(r)))
        prod *= f
        scale /= ifs.s
    # remaining factors are within delta_k = 2 pi |n| tmax / s^k of 1
    delta = 2 * math.pi * abs(n) * float(tmax * scale) / (1 - 1 / float(ifs.s))
    return float(ifs.mass) * prod, float(ifs.mass) * math.expm1(delta)


def fourier_with_error(mu: TorusMeasure, n: int) -> tuple[complex, float]:
    a = atomic_part(mu, n)
    v, err = ifs_part(mu.ifs, n)
    return a + (ac_part(mu, n) + v), err


def fourier(mu: TorusMeasure, n: int) -> complex:
    return fourier_with_error(mu, int(n))[0]


def fourier_product(mu: ProductMeasure, n: Sequence[int]) -> complex:
    n = tuple(n)
    if len(n) != mu.d:
        raise DimensionMismatch(f"index of length {len(n)} for a {mu.d}-fold product")
    out = 1 + 0j
    for f, k in zip(mu.factors, n):
        out *= fourier(f, k)
    return out


def _ifs_batch(ifs: SelfSimilar, ns: np.ndarray) -> np.ndarray:
    ns = ns.astype(np.int64)
    out = np.ones(len(ns), dtype=complex)
    nmax = int(np.max(np.abs(ns))) if len(ns) else 0
    tmax = max(abs(t) for t in ifs.translations)
    scale = Fraction(1)
    while nmax * float(tmax * scale) >= IFS_CUTOFF:
        f = np.zeros(len(ns), dtype=complex)
        for t, w in zip(ifs.translations, ifs.weights):
            r = t * scale
            if r.denominator < 2 ** 62 // max(nmax, 1):
                fr = ((ns * r.numerator) % r.denominator) / r.denominator
            else:
                x = ns * float(r)
                fr = x - np.floor(x)
            f += float(w) * np.exp(-2j * np.pi * fr)
        small = np.abs(ns) * float(tmax * scale) < IFS_CUTOFF
        out *= np.where(small, 1.0, f)
        scale /= ifs.s
    out *= float(ifs.mass)
    out[ns == 0] = float(ifs.mass)
    return out


def _atoms_batch(mu: TorusMeasure, ns: np.ndarray) -> np.ndarray:
    out = np.zeros(len(ns), dtype=complex)
    for a in mu.atoms:
        if not a.mass:
            continue
        out += float(a.mass) * cis_array(-frac_array(a.loc, ns.astype(np.int64)))
    return out


def _residual_batch(mu: TorusMeasure, ns: np.ndarray) -> np.ndarray:
    coeffs = dict(mu.ac)
    ac = np.array([complex(coeffs.get(int(n), 0)) for n in ns], dtype=complex)
    if mu.ifs is not None and mu.ifs.mass:
        return ac + _ifs_batch(mu.ifs, ns)
    return ac + 0j


def fourier_sequence(mu: TorusMeasure) -> SequenceHandle:
    """n -> phi(n) as a sequence; the bound is the total variation."""
    bound = float(sum(a.mass for a in mu.atoms)) + sum(abs(complex(c)) for _, c in mu.ac) + \
        (float(mu.ifs.mass) if mu.ifs else 0.0)

    def batch(ns):
        ns = ns[:, 0]
        return _atoms_batch(mu, ns) + _residual_batch(mu, ns)

    return SequenceHandle(1, lambda n: fourier(mu, n[0]), bound, batch=batch, name="fourier")


def wiener_decompose(mu: TorusMeasure) -> tuple[SequenceHandle, SequenceHandle]:
    """(ap, residual): transform of the atoms and of everything else.

    ap + residual reproduces :func:`fourier` bit for bit."""
    atom_bound = float(sum(a.mass for a in mu.atoms))
    rest_bound = sum(abs(complex(c)) for _, c in mu.ac) + (float(mu.ifs.mass) if mu.ifs else 0.0)

    def ap_fn(n):
        return atomic_part(mu, n[0])

    def res_fn(n):
        v, _ = ifs_part(mu.ifs, n[0])
        return ac_part(mu, n[0]) + v

    ap = SequenceHandle(1, ap_fn, atom_bound, provenance=("atoms", mu.atoms),
                        batch=lambda ns: _atoms_batch(mu, ns[:, 0]), name="almost-periodic")
    res = SequenceHandle(1, res_fn, rest_bound,
                         batch=lambda ns: _residual_batch(mu, ns[:, 0]), name="residual")
    return ap, res


def wiener_average(seq: SequenceHandle, N: int) -> float:
    """(1/(2N+1)) sum_{|n| <= N} |seq(n)|^2."""
    vals = seq.many(np.arange(-N, N + 1).reshape(-1, 1))
    return math.fsum((vals.real ** 2 + vals.imag ** 2).tolist()) / (2 * N + 1)


def empirical_self_similar(ifs: SelfSimilar, level: int) -> TorusMeasure:
    """Atoms at the centers of the level-``level`` cylinder intervals, with
    the cylinder weights.  Approximates the self-similar measure."""
    s = ifs.s
    pts = [(Fraction(0), Fraction(1))]
    scale = Fraction(1)
    for _ in range(level):
        pts = [(x + t * scale, w * wt) for x, w in pts
               for t, wt in zip(ifs.translations, ifs.weights)]
        scale /= s
    # the attractor lies in [lo, hi]; a depth-L cylinder is x + [lo, hi] / s^L
    lo = min(ifs.translations) * s / (s - 1)
    hi = max(ifs.translations) * s / (s - 1)
    mid = (lo + hi) / 2 * scale
    return TorusMeasure(tuple(Atom(Scalar((x + mid) % 1), w * ifs.mass) for x, w in pts))
