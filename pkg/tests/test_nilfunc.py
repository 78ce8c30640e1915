import cmath
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nilcorr.errors import NotFactorable, NotNormal, ProvenanceMissing
from nilcorr.nilfunc import (NilFunction, Piece, alternate, conditional_expectation,
                             coordinate_projection, eval_at, integrate, nilsequence)
from nilcorr.nilgroup import (GroupElement, Subnilmanifold, direct_product, heisenberg3, multiply,
                              normal_closure, reduce_mod_lattice, torus)
from nilcorr.polyseq import IntPolynomial, PolySequence
from nilcorr.scalar import Scalar
from nilcorr.sequences import from_function

from strategies import BASIS, elements, lattice_elements

F = Fraction
H = heisenberg3()
T1, T2 = torus(1), torus(2)
N = IntPolynomial.variable(1, 0)
B1 = BASIS.symbol("b1")
B2 = BASIS.symbol("b2")


def pt(p, *c):
    return p.element(*[Scalar.of(x) if not isinstance(x, Scalar) else x for x in c])


def test_eval_examples():
    assert eval_at(NilFunction.character(T1, [1]), pt(T1, F(1, 4))) == 1j
    sq = NilFunction.polynomial(T1, {(2,): 1})
    assert eval_at(sq, pt(T1, F(1, 2))) == 0.25
    chi = NilFunction.character(H, [1, 1])
    for z in (0, F(1, 3), F(7, 8)):
        assert abs(eval_at(chi, pt(H, F(1, 2), F(1, 2), z)) - 1) < 1e-15


def test_half_open_boxes():
    f = NilFunction.piecewise(T1, [Piece.make([(0, F(1, 2))], {(0,): 1}),
                                   Piece.make([(F(1, 2), 1)], {(0,): 2})])
    assert eval_at(f, pt(T1, F(1, 2))) == 2
    assert eval_at(f, pt(T1, 0)) == 1


def test_nilsequence_examples():
    psi = nilsequence(NilFunction.character(T1, [1]), PolySequence.of(T1, [(pt(T1, B1), N)]))
    assert psi(0) == 1
    b1 = float(B1)
    for n in range(-20, 20):
        assert abs(psi(n) - cmath.exp(2j * cmath.pi * n * b1)) < 1e-12
    a = pt(H, B1, B2, 0)
    psi_h = nilsequence(NilFunction.character(H, [1, 0]), PolySequence.of(H, [(a, N)]))
    for n in range(-20, 20):
        assert abs(psi_h(n) - cmath.exp(2j * cmath.pi * ((n * b1) % 1))) < 1e-12
    one = nilsequence(NilFunction.constant(H), PolySequence.of(H, [(a, N)]))
    assert all(one(n) == 1 for n in range(-5, 6))


def test_integrate_examples():
    assert integrate(NilFunction.character(T1, [1])) == 0
    assert abs(integrate(NilFunction.polynomial(T1, {(2,): 1})) - 1 / 3) < 1e-15
    diag = Subnilmanifold.from_span(T2, [[1, 1]])
    assert abs(integrate(NilFunction.character(T2, [1, 2]), diag)) < 1e-15
    assert abs(integrate(NilFunction.character(T2, [1, -1]), diag) - 1) < 1e-15


@pytest.mark.parametrize("p,rows", [
    (T2, [[1, 1]]), (T2, [[0, 1]]), (T2, []), (torus(3), [[1, 2, 0], [0, 0, 1]]),
    (H, [[0, 1, 0], [0, 0, 1]]), (H, [[0, 0, 1]]), (H, [[1, 0, 0], [0, 1, 0], [0, 0, 1]]),
])
def test_haar_measure_is_normalized(p, rows):
    M = Subnilmanifold.from_span(p, rows)
    assert abs(integrate(NilFunction.constant(p), M) - 1) < 1e-12
    box = NilFunction.piecewise(p, [Piece.make([(0, 1)] * p.dim, {(0,) * p.dim: 1})])
    assert abs(integrate(box, M) - 1) < 1e-9


@given(st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=5),
       st.integers(-3, 3), st.integers(-3, 3))
def test_integral_is_linear(c1, c2, m1, m2):
    f = NilFunction.character(T2, [m1, m2])
    g = NilFunction.polynomial(T2, {(1, 2): 1, (0, 0): -1})
    lhs = integrate(f.scale(c1) + g.scale(c2))
    assert abs(lhs - (c1 * integrate(f) + c2 * integrate(g))) < 1e-9 * (1 + abs(c1) + abs(c2))


def _translated_character(p, m, a):
    """x -> chi_m(a x) on a torus-coordinate character."""
    phase = sum(mi * float(a.coords[i]) for mi, i in zip(m, p.torus_coords))
    return NilFunction.character(p, m, cmath.exp(2j * cmath.pi * phase))


@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3),
       st.sampled_from([[[1, 1, 0]], [[0, 0, 1]], [[1, 0, 0], [0, 1, 2]], []]))
def test_translation_invariance(m1, m2, m3, rows):
    p = torus(3)
    a = GroupElement(p, (B1, Scalar(F(1, 5)), B2 * 2))
    m = [m1, m2, m3]
    M = Subnilmanifold.from_span(p, rows)
    lhs = integrate(_translated_character(p, m, a), M)
    rhs = integrate(NilFunction.character(p, m), M.translate(a))
    assert abs(lhs - rhs) < 1e-9


def test_translation_invariance_piecewise():
    f = NilFunction.polynomial(T1, {(2,): 1})
    shifted = NilFunction.piecewise(T1, [
        Piece.make([(0, F(3, 4))], {(2,): 1, (1,): F(1, 2), (0,): F(1, 16)}),
        Piece.make([(F(3, 4), 1)], {(2,): 1, (1,): F(-3, 2), (0,): F(9, 16)})])
    assert abs(integrate(shifted) - integrate(f)) < 1e-12


def test_conditional_expectation_examples():
    zy = Subnilmanifold.from_span(T2, [[0, 1]])
    ex = conditional_expectation(NilFunction.character(T2, [1, 1]), zy)
    assert not ex.terms or all(t.coeff == 0 for t in ex.terms)
    ex = conditional_expectation(NilFunction.character(T2, [1, 0]), zy)
    assert [t.character for t in ex.terms] == [(1,)]
    assert abs(eval_at(ex, pt(ex.presentation, F(1, 4))) - 1j) < 1e-15
    z = normal_closure(Subnilmanifold.from_span(H, [[0, 1, 0]]))
    assert not conditional_expectation(NilFunction.character(H, [1, 1]), z).terms
    ex = conditional_expectation(NilFunction.character(H, [1, 0]), z)
    assert ex.presentation.dim == 1 and [t.character for t in ex.terms] == [(1,)]


def test_conditional_expectation_errors():
    with pytest.raises(NotNormal):
        conditional_expectation(NilFunction.character(H, [1, 0]),
                                Subnilmanifold.from_span(H, [[0, 1, 0]]))
    diag = Subnilmanifold.from_span(T2, [[1, 1]])
    with pytest.raises(NotFactorable):
        conditional_expectation(NilFunction.polynomial(T2, {(1, 0): 1}), diag)


@pytest.mark.parametrize("p,rows,f", [
    (T2, [[0, 1]], NilFunction.polynomial(T2, {(2, 1): 1, (0, 3): 2})
        + NilFunction.character(T2, [2, 0], 0.5)),
    (T2, [[1, 1]], NilFunction.character(T2, [1, -1]) + NilFunction.character(T2, [1, 1])),
    (H, [[0, 1, 0], [0, 0, 1]], NilFunction.character(H, [3, 0], 2j)
        + NilFunction.piecewise(H, [Piece.make([(0, F(1, 2)), (0, 1), (0, 1)],
                                               {(1, 1, 0): 1})])),
])
def test_tower_property(p, rows, f):
    Z = normal_closure(Subnilmanifold.from_span(p, rows))
    ex = conditional_expectation(f, Z)
    assert abs(integrate(f) - integrate(ex)) < 1e-9


def test_fibre_average_matches_conditional_expectation():
    f = NilFunction.polynomial(T2, {(1, 2): 3}) + NilFunction.character(T2, [1, 0])
    Z = Subnilmanifold.from_span(T2, [[0, 1]])
    ex = conditional_expectation(f, Z)
    for x in (F(1, 7), F(1, 2), F(5, 6)):
        fibre = Subnilmanifold.from_span(T2, [[0, 1]], pt(T2, x, 0))
        assert abs(integrate(f, fibre) - eval_at(ex, pt(ex.presentation, x))) < 1e-9


H1 = direct_product(H, T1)


def test_quotient_by_a_product_factor_is_the_other_factor():
    Z = normal_closure(Subnilmanifold.from_span(H1, [[0, 0, 0, 1]]))
    ex = conditional_expectation(NilFunction.character(H1, [1, 1, 0], 2)
                                 + NilFunction.character(H1, [1, 1, 3]), Z)
    assert ex.presentation == H
    assert [(t.coeff, t.character) for t in ex.terms] == [(2, (1, 1))]
    x = pt(H1, F(1, 3), F(1, 5), F(2, 7), F(1, 2))
    assert ex.quotient(x) == pt(H, F(1, 3), F(1, 5), F(2, 7))


def test_fibre_average_over_a_non_torus_quotient():
    f = NilFunction.piecewise(H1, [Piece.make([(0, F(1, 2)), (0, 1), (F(1, 4), 1), (0, F(1, 3))],
                                              {(1, 0, 1, 2): 1})], character=[1, 0, 0])
    f = f + NilFunction.polynomial(H1, {(0, 2, 0, 1): 1})
    Z = Subnilmanifold.from_span(H1, [[0, 0, 0, 1]])
    ex = conditional_expectation(f, Z)
    assert abs(integrate(f) - integrate(ex)) < 1e-9
    for c in [(F(1, 7), F(1, 2), F(5, 6)), (F(2, 5), F(3, 4), F(1, 9)), (F(3, 5), 0, F(1, 2))]:
        x = pt(H1, *c, 0)
        fibre = Subnilmanifold.from_span(H1, [[0, 0, 0, 1]], x)
        assert abs(integrate(f, fibre) - eval_at(ex, ex.quotient(x))) < 1e-9


@given(elements(H1), elements(H1))
def test_coordinate_projection_is_a_homomorphism(a, b):
    proj = coordinate_projection(H1, [3])

    def raw(x):
        return GroupElement(H, x.coords[:3])
    assert proj(multiply(a, b)) == reduce_mod_lattice(multiply(raw(a), raw(b)))[0]
    assert proj(reduce_mod_lattice(a)[0]) == proj(a)


def test_coordinate_projection_needs_a_closed_complement():
    with pytest.raises(NotFactorable):
        coordinate_projection(H, [0])


@given(elements(H), lattice_elements(H), st.integers(-3, 3), st.integers(-3, 3))
def test_characters_descend_to_the_quotient(a, g, m1, m2):
    f = NilFunction.character(H, [m1, m2])
    q1 = reduce_mod_lattice(multiply(a, g))[0]
    q2 = reduce_mod_lattice(a)[0]
    assert eval_at(f, q1) == eval_at(f, q2)


def _rot(alpha):
    return nilsequence(NilFunction.character(T1, [1]), PolySequence.of(T1, [(pt(T1, alpha), N)]))


def test_alternate_examples():
    psi0 = _rot(B1)
    one = nilsequence(NilFunction.constant(T1), PolySequence.of(T1, [(pt(T1, 0), N)]))
    alt = alternate(2, {0: psi0, 1: one})
    assert abs(alt(4) - cmath.exp(4j * cmath.pi * float(B1))) < 1e-12
    assert alt(3) == 1
    same = alternate(3, {i: psi0 for i in range(3)})
    for n in range(-10, 10):
        assert abs(same(n) - psi0(n // 3)) < 1e-12
    ident = alternate(1, {0: psi0})
    assert all(abs(ident(n) - psi0(n)) < 1e-12 for n in range(-10, 10))


def test_alternate_matches_definition_and_provenance():
    comps = {0: _rot(B1), 1: _rot(Scalar(F(1, 3))), 2: _rot(B2 * 2)}
    alt = alternate(3, comps)
    rng = random.Random(0)
    for _ in range(1000):
        n = rng.randint(-10**6, 10**6)
        m, i = divmod(n, 3)
        assert alt(n) == comps[i](m)
    for n in range(-9, 9):
        assert alt.provenance.value(n) == alt(n)


def test_alternate_two_dimensional():
    p = T1
    g = PolySequence.of(p, [(pt(p, B1), IntPolynomial.variable(2, 0)),
                            (pt(p, B2), IntPolynomial.variable(2, 1))], d=2)
    base = nilsequence(NilFunction.character(p, [1]), g)
    comps = {(i, j): base for i in range(2) for j in range(2)}
    alt = alternate(2, comps)
    for n in [(0, 0), (3, -4), (5, 7), (-1, 2)]:
        assert abs(alt(n) - base((n[0] // 2, n[1] // 2))) < 1e-12


def test_alternate_needs_provenance():
    bare = from_function(1, lambda n: 1, 1.0)
    with pytest.raises(ProvenanceMissing):
        alternate(2, {0: _rot(B1), 1: bare})


def test_function_json_round_trip():
    f = NilFunction.character(H, [1, -2], 0.5 - 1j) + NilFunction.piecewise(
        H, [Piece.make([(0, F(1, 3)), (0, 1), (F(1, 2), 1)], {(1, 0, 2): 2})], [0, 1])
    g = NilFunction.from_json(f.to_json())
    assert g == f
