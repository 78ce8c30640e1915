"""Lazy bounded sequences Z^d -> C."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .scalar import FIXED_BITS


def as_index(n, d: int) -> tuple:
    if isinstance(n, (int, np.integer)):
        n = (int(n),)
    n = tuple(int(x) for x in n)
    if len(n) != d:
        raise ValueError(f"expected a {d}-dimensional index, got {n}")
    return n


@dataclass(frozen=True)
class SequenceHandle:
    """A pure map Z^d -> C with a declared sup bound.

    ``batch`` is an optional vectorized evaluator taking an (N, d) integer
    array.  ``provenance`` records how the sequence was built (for example
    the (f, g, x0) triple of a nilsequence).
    """

    d: int
    fn: Callable[[tuple], complex]
    bound: float
    provenance: Any = None
    batch: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    name: str = ""

    def __call__(self, n) -> complex:
        return complex(self.fn(as_index(n, self.d)))

    def many(self, ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64)
        if ns.ndim == 1:
            ns = ns.reshape(-1, 1) if self.d == 1 else ns.reshape(1, -1)
        if self.batch is not None:
            return np.asarray(self.batch(ns), dtype=complex)
        return np.fromiter((complex(self.fn(tuple(int(x) for x in row))) for row in ns),
                           dtype=complex, count=len(ns))

    def with_provenance(self, provenance) -> "SequenceHandle":
        return replace(self, provenance=provenance)

    def __add__(self, other: "SequenceHandle") -> "SequenceHandle":
        return combine([(1.0, self), (1.0, other)])

    def __sub__(self, other: "SequenceHandle") -> "SequenceHandle":
        return combine([(1.0, self), (-1.0, other)])

    def scale(self, c: complex) -> "SequenceHandle":
        return combine([(c, self)])


def constant(d: int, value: complex) -> SequenceHandle:
    value = complex(value)
    return SequenceHandle(d, lambda n: value, abs(value),
                          batch=lambda ns: np.full(len(ns), value, dtype=complex),
                          name=f"const({value})")


def zero(d: int) -> SequenceHandle:
    return constant(d, 0)


def from_function(d: int, fn: Callable[[tuple], complex], bound: float,
                  name: str = "") -> SequenceHandle:
    return SequenceHandle(d, fn, float(bound), name=name)


def combine(items: Sequence[tuple[complex, SequenceHandle]]) -> SequenceHandle:
    """Linear combination sum c_j s_j, summed in the given order."""
    items = list(items)
    if not items:
        raise ValueError("empty combination")
    d = items[0][1].d
    if any(s.d != d for _, s in items):
        raise ValueError("sequences of different dimensions")

    def fn(n):
        acc = 0j
        for c, s in items:
            acc += c * s.fn(n)
        return acc

    def _batch(ns):
        acc = np.zeros(len(ns), dtype=complex)
        for c, s in items:
            acc += c * s.batch(ns)
        return acc

    batch = _batch if all(s.batch is not None for _, s in items) else None

    bound = sum(abs(c) * s.bound for c, s in items)
    return SequenceHandle(d, fn, bound, batch=batch, name="combination")


def box_points(base: Sequence[int], sides: Sequence[int] | int) -> np.ndarray:
    """All integer points of prod [b_i, b_i + N_i) as an (M, d) array, in
    lexicographic order."""
    base = list(base)
    if isinstance(sides, int):
        sides = [sides] * len(base)
    axes = [np.arange(b, b + s, dtype=np.int64) for b, s in zip(base, sides)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def parse_range(text: str) -> tuple[int, int]:
    """Parse "a..b" (inclusive a, exclusive b)."""
    a, _, b = text.partition("..")
    if not _:
        raise ValueError(f"range {text!r} is not of the form a..b")
    lo, hi = int(a), int(b)
    if hi <= lo:
        raise ValueError(f"empty range {text!r}")
    return lo, hi


def write_csv(path, handle: SequenceHandle, points: np.ndarray) -> None:
    """CSV with header n_1..n_d,re,im and shortest round-trip floats."""
    vals = handle.many(points)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"n_{i + 1}" for i in range(handle.d)] + ["re", "im"])
        for row, v in zip(points, vals):
            w.writerow([int(x) for x in row] + [repr(float(v.real)), repr(float(v.imag))])


def iter_box(base: Sequence[int], side: int) -> Iterable[tuple]:
    return itertools.product(*[range(b, b + side) for b in base])


_EXACT_UNITS = {0.0: 1 + 0j, 0.25: 1j, 0.5: -1 + 0j, 0.75: -1j}


def cis(frac: float) -> complex:
    """exp(2 pi i frac), exact at multiples of 1/4."""
    frac = frac % 1.0
    v = _EXACT_UNITS.get(frac)
    if v is not None:
        return v
    return complex(np.exp(2j * np.pi * frac))


def cis_array(frac: np.ndarray) -> np.ndarray:
    frac = np.mod(np.asarray(frac, dtype=float), 1.0)
    out = np.exp(2j * np.pi * frac)
    for k, v in _EXACT_UNITS.items():
        out[frac == k] = v
    return out


def frac_array(s, v: np.ndarray) -> np.ndarray:
    """{s * v} for a Scalar s and an integer array v (int64 or Python ints)."""
    v = np.asarray(v)
    if s.is_rational:
        num, den = s.q0.numerator, s.q0.denominator
        if v.dtype == np.int64 and den < (1 << 31):
            return ((v % den) * (num % den) % den) / den
        return np.array([(int(x) * num % den) / den for x in v], dtype=float)
    fixed = s.fixed()
    one = 1 << FIXED_BITS
    mask = one - 1
    return np.array([((int(x) * fixed) & mask) / one for x in v], dtype=float)
