"""Fast invariant checks behind ``nilcorr selftest``."""

from __future__ import annotations

import random
from fractions import Fraction

import numpy as np

from .corr import (CorrelationSpec, SkewProduct, TorusRotation, correlate, decompose, iterate,
                   skew_as_nil_translation)
from .measures import TorusMeasure, cantor, fourier, wiener_decompose
from .nilfunc import NilFunction, Piece, integrate
from .nilgroup import (GroupElement, heisenberg3, inverse, multiply, power, reduce_mod_lattice,
                       torus)
from .polyseq import IntPolynomial
from .scalar import IrrationalBasis, Scalar


def _rand_q(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(-60, 60), rng.randint(1, 12))


def _rand_elem(rng, pres, basis):
    b1 = basis.symbol("b1")
    coords = []
    for _ in range(pres.dim):
        c = Scalar(_rand_q(rng))
        if rng.random() < 0.3:
            c = c + b1 * rng.randint(-3, 3)
        coords.append(c)
    return GroupElement(pres, tuple(coords))


def _check(name, fn) -> dict:
    try:
        ok, detail = fn()
    except Exception as e:  # noqa: BLE001 - a crashing check is a failing check
        ok, detail = False, f"{type(e).__name__}: {e}"
    return {"name": name, "passed": bool(ok), "detail": detail}


def run_selftest(seed: int = 0, samples: int = 200) -> list[dict]:
    rng = random.Random(seed)
    basis = IrrationalBasis({"b1": "sqrt(2)-1"})
    b1 = basis.symbol("b1")
    h = heisenberg3()
    t2 = torus(2)
    n = IntPolynomial.variable(1, 0)

    def group_law():
        for _ in range(samples):
            a, b, c = (_rand_elem(rng, h, basis) for _ in range(3))
            if multiply(multiply(a, b), c) != multiply(a, multiply(b, c)):
                return False, "associativity"
            if not multiply(a, inverse(a)).is_identity:
                return False, "inverse"
            k = rng.randint(-20, 20)
            it = h.identity()
            for _ in range(abs(k)):
                it = multiply(it, a if k > 0 else inverse(a))
            if power(a, k) != it:
                return False, "power"
        return True, f"{samples} Heisenberg triples"

    def reduction():
        for _ in range(samples):
            a = _rand_elem(rng, h, basis)
            g = GroupElement(h, tuple(Scalar(rng.randint(-5, 5)) for _ in range(3)))
            if reduce_mod_lattice(multiply(a, g))[0] != reduce_mod_lattice(a)[0]:
                return False, "right lattice translate changed the reduced point"
        return True, f"{samples} lattice translates"

    def iterates():
        x0 = GroupElement(t2, (Scalar(Fraction(1, 3)), Scalar(Fraction(2, 7))))
        sk = SkewProduct(b1)
        p = x0
        for j in range(1, 25):
            p = iterate(sk, 1, p)
            if p != iterate(sk, j, x0):
                return False, f"skew j={j}"
        nil, _, embed = skew_as_nil_translation(b1)
        q = embed(Fraction(1, 3), Fraction(2, 7))
        for j in range(0, 10):
            a = iterate(nil, j, q).coords[1:]
            if a != iterate(sk, j, x0).coords:
                return False, f"Heisenberg picture j={j}"
        return True, "closed forms match stepping"

    def measure_preservation():
        f = NilFunction.piecewise(t2, [Piece.make([(0, Fraction(1, 2)), (Fraction(1, 3), 1)],
                                                  [((1, 0), 1), ((0, 2), 2)])])
        one = NilFunction.constant(t2)
        worst = 0.0
        for system in (TorusRotation((b1, Scalar(Fraction(1, 5)))), SkewProduct(b1)):
            phi = correlate(CorrelationSpec(system, (one, f), (n,)))
            for k in (1, 2, 7):
                worst = max(worst, abs(phi(k) - integrate(f)))
        return worst < 1e-9, f"max deviation {worst:.2e}"

    def decomposition():
        chi = NilFunction.character(t2, [0, 1])
        spec = CorrelationSpec(SkewProduct(b1), (NilFunction.character(t2, [0, -1]),
                                                 chi), (n,))
        dec = decompose(spec, (100, 1000))
        vals = dec.null_part.many(np.arange(-50, 50).reshape(-1, 1))
        exact = all(v == (1 if k == 0 else 0) for k, v in zip(range(-50, 50), vals))
        return exact and dec.reconstruction_max_err == 0, dec.report.verdict

    def wiener():
        mu = TorusMeasure.dirac("1/3", Fraction(1, 2)) + TorusMeasure.make(ifs=cantor(Fraction(1, 2)))
        ap, res = wiener_decompose(mu)
        ok = all(ap(k) + res(k) == fourier(mu, k) for k in range(-40, 40))
        return ok, "ap + residual equals the transform"

    return [_check("group law", group_law), _check("lattice reduction", reduction),
            _check("closed-form iterates", iterates),
            _check("measure preservation", measure_preservation),
            _check("skew decomposition", decomposition), _check("Wiener split", wiener)]
