"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""

import cmath
import math
import random
import time
from fractions import Fraction

import mpmath
import numpy as np

from nilcorr.corr import (CorrelationSpec, ParametrizedFamily, SkewProduct, TorusRotation,
                          correlate, decompose)
from nilcorr.density import FolnerBox, box_average, null_diagnostic
from nilcorr.gpoly import approximate_character, observed_error
from nilcorr.measures import (ProductMeasure, TorusMeasure, cantor, empirical_self_similar,
                              fourier, fourier_product, fourier_sequence, wiener_average,
                              wiener_decompose)
from nilcorr.nilfunc import (NilFunction, Piece, alternate, conditional_expectation,
                             integrate, nilsequence)
from nilcorr.nilgroup import (GroupElement, Subnilmanifold, direct_product, heisenberg3,
                              inverse, multiply, normal_closure, power, reduce_mod_lattice,
                              torus)
from nilcorr.polyseq import IntPolynomial, PolySequence
from nilcorr.scalar import IrrationalBasis, Scalar
from nilcorr.sequences import cis

from acceptance_log import record

F = Fraction
BASIS = IrrationalBasis({"b1": "sqrt(2)-1", "b2": "sqrt(3)-1"})
B1, B2 = BASIS.symbol("b1"), BASIS.symbol("b2")
H = heisenberg3()
T1, T2, T3 = torus(1), torus(2), torus(3)
N = IntPolynomial.variable(1, 0)
N2 = IntPolynomial.from_monomials(1, {(2,): 1})


def chi(p, *m, c=1):
    return NilFunction.character(p, list(m), c)


def check(number, title, fn):
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # noqa: BLE001 - an exception is a failed criterion
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    record(number, title, ok, detail, time.perf_counter() - t0)
    assert ok, detail


def _rand_scalar(rng):
    s = Scalar(F(rng.randint(-40, 40), rng.randint(1, 9)))
    if rng.random() < 0.5:
        s = s + B1 * rng.randint(-3, 3) + B2 * rng.randint(-2, 2)
    return s


def test_criterion_01_group_arithmetic():
    def run():
        rng = random.Random(2024)
        t0 = time.perf_counter()
        for _ in range(1000):
            a, b, c = (GroupElement(H, tuple(_rand_scalar(rng) for _ in range(3)))
                       for _ in range(3))
            if multiply(multiply(a, b), c) != multiply(a, multiply(b, c)):
                return False, "associativity"
            if not (multiply(a, inverse(a)).is_identity and multiply(inverse(a), a).is_identity):
                return False, "inverse"
            n = rng.randint(-20, 20)
            it, step = H.identity(), (a if n >= 0 else inverse(a))
            for _ in range(abs(n)):
                it = multiply(it, step)
            if power(a, n) != it:
                return False, f"power n={n}"
            g = GroupElement(H, tuple(Scalar(rng.randint(-9, 9)) for _ in range(3)))
            q, gamma = reduce_mod_lattice(a)
            if reduce_mod_lattice(multiply(a, g))[0] != q or multiply(a, gamma) != q:
                return False, "reduction"
        dt = time.perf_counter() - t0
        return dt < 5, f"1000 triples exact, {dt:.2f}s (limit 5s)"
    check(1, "Heisenberg group arithmetic", run)


def test_criterion_02_weyl_equidistribution():
    def run():
        t0 = time.perf_counter()
        quad = correlate(CorrelationSpec(TorusRotation((B1,)), (chi(T1, -1), chi(T1, 1)), (N2,)))
        lin = correlate(CorrelationSpec(TorusRotation((B1,)), (chi(T1, -1), chi(T1, 1)), (N,)))
        q = abs(box_average(quad, FolnerBox((0,), 10**5), "plain"))
        r = abs(box_average(lin, FolnerBox((0,), 10**4), "plain"))
        dt = time.perf_counter() - t0
        # direct-summation oracle in extended precision
        with mpmath.workdps(40):
            beta = mpmath.sqrt(2) - 1
            ph = [float(mpmath.frac(n * n * beta)) for n in range(10**5)]
        oracle = abs(np.exp(2j * np.pi * np.array(ph)).mean())
        ok = q < 0.05 and r < 1e-3 and abs(q - oracle) < 1e-9 and dt < 10
        return ok, f"quadratic {q:.2e} (oracle {oracle:.2e}), linear {r:.2e}, {dt:.2f}s"
    check(2, "Weyl equidistribution", run)


def test_criterion_03_wiener_exact():
    def run():
        mu = TorusMeasure.dirac(F(1, 3), F(1, 2)) + TorusMeasure.lebesgue(F(1, 2))
        ap, res = wiener_decompose(mu)
        ns = np.arange(-10**4, 10**4 + 1).reshape(-1, 1)
        want = np.array([0.5 * cis(-(n % 3) / 3) for n in ns[:, 0]])
        ap_vals = ap.many(ns)
        exact_ap = np.array_equal(ap_vals, want)
        dev = max(abs(ap_vals[i] - 0.5 * cmath.exp(-2j * math.pi * ((ns[i, 0] % 3) / 3)))
                  for i in range(len(ns)))
        res_vals = res.many(ns)
        support = [int(n) for n, v in zip(ns[:, 0], res_vals) if v != 0]
        Nw = 10**4
        res_avg = wiener_average(res, Nw)
        total = wiener_average(fourier_sequence(mu), Nw)
        ok = (exact_ap and dev < 1e-15 and support == [0] and res(0) == 0.5
              and res_avg == 0.25 / (2 * Nw + 1) and abs(total - 0.25) < 1e-3)
        return ok, (f"ap exact={exact_ap}, residual support {support}, "
                    f"residual moment {res_avg:.6e}, second moment {total:.7f}")
    check(3, "Wiener decomposition, atom plus Lebesgue", run)


def test_criterion_04_wiener_singular():
    def run():
        mu = TorusMeasure.make(ifs=cantor())
        ap, res = wiener_decompose(mu)
        rep = null_diagnostic(fourier_sequence(mu), [10**3, 10**4, 10**5], mode="abs2")
        emp = empirical_self_similar(cantor(), 12)
        cross = max(abs(fourier(mu, n) - fourier(emp, n)) for n in range(-100, 101))
        ap_zero = not np.any(ap.many(np.arange(-200, 200).reshape(-1, 1)))
        ok = rep.verdict == "null" and rep.worst_avg[-1] < 0.1 and cross < 1e-6 and ap_zero
        return ok, (f"verdict {rep.verdict}, worst_avg "
                    f"{[float(f'{w:.3g}') for w in rep.worst_avg]}, level-12 gap {cross:.1e}")
    check(4, "Wiener decomposition, Cantor measure", run)


def test_criterion_05_skew_and_rotation_decomposition():
    def run():
        sk = decompose(CorrelationSpec(SkewProduct(B1), (chi(T2, 0, -1), chi(T2, 0, 1)), (N,)))
        ns = np.arange(-10**4, 10**4 + 1).reshape(-1, 1)
        nil_zero = not np.any(sk.nil_part.many(ns))
        delta = np.array_equal(sk.null_part.many(ns), (ns[:, 0] == 0).astype(complex))
        rot = decompose(CorrelationSpec(TorusRotation((B1,)), (chi(T1, -1), chi(T1, 1)), (N,)),
                        strict=False)
        null_zero = not np.any(rot.null_part.many(ns))
        with mpmath.workdps(40):
            beta = mpmath.sqrt(2) - 1
            oracle = np.array([complex(mpmath.expjpi(2 * n * beta)) for n in ns[:, 0]])
        err = float(np.max(np.abs(rot.nil_part.many(ns) - oracle)))
        ok = (nil_zero and delta and sk.reconstruction_max_err == 0 and sk.report.verdict == "null"
              and null_zero and err < 1e-12)
        return ok, (f"skew verdict {sk.report.verdict}, reconstruction "
                    f"{sk.reconstruction_max_err}; rotation nil error {err:.1e}")
    check(5, "Skew product and rotation decompositions", run)


def test_criterion_06_family_integration():
    def run():
        obs = (chi(T1, -1), chi(T1, 1))
        fam = ParametrizedFamily.uniform(10**4, lambda om: TorusRotation((om,)))
        dec = decompose(CorrelationSpec(fam, obs, (N,)), schedule=(100, 1000))
        ns = np.arange(-500, 500).reshape(-1, 1)
        nil_zero = not np.any(dec.nil_part.many(ns))
        atom = ParametrizedFamily(((Scalar(F(1, 2)), F(1)),), lambda om: TorusRotation((om,)),
                                  atomic=True)
        dec2 = decompose(CorrelationSpec(atom, obs, (N,)), strict=False)
        alt = np.array_equal(dec2.nil_part.many(ns), np.where(ns[:, 0] % 2 == 0, 1, -1)
                             .astype(complex))
        ok = nil_zero and dec.report.verdict == "null" and alt
        return ok, (f"grid verdict {dec.report.verdict}, worst_avg "
                    f"{[float(f'{w:.3g}') for w in dec.report.worst_avg]}; atomic (-1)^n {alt}")
    check(6, "Family integration", run)


def _rot_seq(p, alpha, poly, d):
    g = PolySequence.of(p, [(p.element(alpha), poly)], d=d)
    return nilsequence(chi(p, 1), g)


def test_criterion_07_alternation():
    def run():
        rng = random.Random(7)
        n1, n2 = IntPolynomial.variable(2, 0), IntPolynomial.variable(2, 1)
        mono = IntPolynomial.from_monomials
        checked = 0
        for k in (2, 3):
            for d in (1, 2):
                comps = {}
                for idx, i in enumerate(np.ndindex(*([k] * d))):
                    if d == 1:
                        poly = N if idx % 2 else N2
                        comps[i] = _rot_seq(T1, B1 * (idx + 1) + Scalar(F(idx, 7)), poly, 1)
                    else:
                        a = H.element(B1 * (idx + 1), B2, F(1, idx + 2))
                        g = PolySequence.of(H, [(a, n1 + mono(2, {(1, 1): 1})),
                                                (H.element(0, F(1, 3), 0), n2)], d=2)
                        comps[i] = nilsequence(chi(H, 1, idx), g)
                alt = alternate(k, comps)
                for _ in range(1000):
                    n = tuple(rng.randint(-10**5, 10**5) for _ in range(d))
                    m = tuple(x // k for x in n)
                    i = tuple(x % k for x in n)
                    want = comps[i](m)
                    if alt.provenance.value(n) != want or alt(n) != want:
                        return False, f"mismatch k={k} d={d} n={n}"
                    checked += 1
        return True, f"{checked} points equal exactly (k=2,3; d=1,2)"
    check(7, "Alternation on the product manifold", run)


def _tower_cases():
    H1 = direct_product(H, T1)
    pw = NilFunction.piecewise
    cases = [
        (T2, [[0, 1]], chi(T2, 1, 1) + chi(T2, 2, 0, c=0.5j)),
        (T2, [[0, 1]], NilFunction.polynomial(T2, {(2, 1): 1, (0, 3): 2})),
        (T2, [[1, 0]], pw(T2, [Piece.make([(0, 1), (0, F(1, 3))], {(1, 2): 3})])),
        (T2, [[1, 1]], chi(T2, 1, -1) + chi(T2, 1, 1) + chi(T2, 0, 0, c=2)),
        (T2, [[1, 2]], chi(T2, 2, -1, c=1 - 1j) + chi(T2, 1, 0)),
        (T2, [[1, 0], [0, 1]], chi(T2, 3, 1) + NilFunction.polynomial(T2, {(1, 1): 1})),
        (T2, [], chi(T2, 1, 0) + NilFunction.polynomial(T2, {(3, 0): 1})),
        (T3, [[0, 0, 1]], chi(T3, 1, 2, 3) + chi(T3, 1, 2, 0)),
        (T3, [[1, 1, 0]], chi(T3, 1, -1, 2) + chi(T3, 2, 1, 0)),
        (T3, [[0, 1, 0], [0, 0, 1]], NilFunction.polynomial(T3, {(1, 2, 1): 4})),
        (T3, [[1, 0, 0], [0, 1, 1]], chi(T3, 0, 1, -1, c=0.25) + chi(T3, 1, 1, 1)),
        (H, [[0, 1, 0]], chi(H, 1, 1) + chi(H, 1, 0) + chi(H, 0, 0, c=-1)),
        (H, [[0, 1, 0]], pw(H, [Piece.make([(0, F(1, 2)), (0, 1), (0, 1)], {(1, 1, 2): 1})])),
        (H, [[1, 0, 0]], chi(H, 0, 2) + chi(H, 1, 2)),
        (H, [[0, 0, 1]], chi(H, 2, 3) + pw(H, [Piece.make([(0, 1), (0, 1), (F(1, 4), 1)],
                                                           {(0, 0, 1): 1})])),
        (H, [[0, 0, 1]], NilFunction.polynomial(H, {(2, 0, 1): 1}, [1, 0])),
        (H, [[1, 0, 0], [0, 0, 1]], chi(H, 1, 1, c=3) + chi(H, 0, 0, c=0.5)),
        (H1, [[0, 1, 0, 0]], chi(H1, 1, 0, 1) + chi(H1, 0, 1, 1)),
        (H1, [[0, 0, 0, 1]], chi(H1, 2, 1, 1) + chi(H1, 2, 1, 0, c=1j)),
        (H1, [[1, 0, 0, 0], [0, 0, 0, 1]], chi(H1, 0, 1, 0) + chi(H1, 0, 0, 0)),
    ]
    return cases


def test_criterion_08_conditional_expectation_tower():
    def run():
        cases = _tower_cases()
        worst = 0.0
        has_heis = False
        for p, rows, f in cases:
            Z = normal_closure(Subnilmanifold.from_span(p, rows))
            has_heis |= p == H and rows == [[0, 1, 0]]
            worst = max(worst, abs(integrate(f) - integrate(conditional_expectation(f, Z))))
        return len(cases) == 20 and has_heis and worst < 1e-9, \
            f"{len(cases)} pairs, max gap {worst:.1e}"
    check(8, "Conditional expectation tower", run)


def test_criterion_09_gpoly_approximation():
    def run():
        alpha = IrrationalBasis({"r": "sqrt(2)"}).symbol("r")
        ap = approximate_character(1, alpha, 1e-2)
        err = observed_error(ap, 1, alpha, range(0, 10**4 + 1))
        return err <= 1e-2 and ap.sup_err <= 1e-2, \
            f"degree {ap.degree}, declared {ap.sup_err:.2e}, observed {err:.2e}"
    check(9, "Generalized polynomial approximation", run)


def test_criterion_10_two_parameters():
    def run():
        n1, n2 = IntPolynomial.variable(2, 0), IntPolynomial.variable(2, 1)
        spec = CorrelationSpec(TorusRotation((B1, B2)),
                               (chi(T2, 1, -1), chi(T2, 1, 0), chi(T2, -2, 1)), (n1, n1 + n2))
        dec = decompose(spec, schedule=(10, 100), strict=False)
        pts = np.array([(i, j) for i in range(100) for j in range(100)])
        total = correlate(spec).many(pts)
        recon = float(np.max(np.abs(total - dec.nil_part.many(pts) - dec.null_part.many(pts))))
        b1, b2 = float(B1), float(B2)
        # phase n1 (m1 . alpha) + (n1 + n2) (m2 . alpha) with m1 = (1, 0), m2 = (-2, 1)
        oracle = np.exp(2j * np.pi * (pts[:, 0] * b1 + (pts[:, 0] + pts[:, 1]) * (b2 - 2 * b1)))
        direct = float(np.max(np.abs(total - oracle)))
        d0 = TorusMeasure.dirac(0)
        mixed = TorusMeasure.dirac(F(1, 3), F(1, 2)) + TorusMeasure.lebesgue(F(1, 2))
        c = TorusMeasure.make(ifs=cantor())
        prod_ok = all(fourier_product(ProductMeasure((d0, d0)), (a, b)) == 1
                      for a in range(-5, 6) for b in range(-5, 6))
        prod_ok &= all(abs(fourier_product(ProductMeasure((mixed, d0)), (a, b))
                           - (0.5 * cis(-(a % 3) / 3) + (0.5 if a == 0 else 0))) < 1e-15
                       for a in range(-9, 10) for b in (-3, 0, 4))
        prod_ok &= all(abs(abs(fourier_product(ProductMeasure((c, c)), (a, b)))
                           - abs(fourier(c, a)) * abs(fourier(c, b))) < 1e-15
                       for a in (1, 5, 40) for b in (2, 17, 300))
        ok = recon < 1e-8 and direct < 1e-9 and prod_ok and dec.report.verdict == "null"
        return ok, (f"reconstruction {recon:.1e} over [0,100)^2, direct check {direct:.1e}, "
                    f"verdict {dec.report.verdict}, product transforms {prod_ok}")
    check(10, "Two-parameter correlation", run)
