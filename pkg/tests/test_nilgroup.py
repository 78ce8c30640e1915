import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nilcorr import lattice as la
from nilcorr.errors import PresentationMismatch
from nilcorr.nilgroup import (GroupElement, GroupPresentation, Subnilmanifold, commutator,
                              direct_product, heisenberg3, inverse, multiply, normal_closure,
                              orbit_closure_torus, power, reduce_mod_lattice,
                              subgroup_closure_torus, torus)
from nilcorr.scalar import Scalar

from strategies import BASIS, elements, lattice_elements

H = heisenberg3()
CATALOG = [torus(1), torus(3), H, direct_product(H, torus(1))]
F = Fraction


def el(*c):
    return H.element(*[Scalar(F(x)) for x in c])


def matrix(e):
    x, y, z = (c.q0 for c in e.coords)
    return [[1, x, z], [0, 1, y], [0, 0, 1]]


def mat_mul(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3)] for i in range(3)]


def test_multiply_examples():
    assert multiply(el(1, 0, 0), el(0, 1, 0)) == el(1, 1, 1)
    assert multiply(el(F(3, 2), F(1, 4), 0), el(F(1, 2), 0, 5)) == el(2, F(1, 4), 5)
    a = el(F(2, 3), -1, F(5, 7))
    assert multiply(H.identity(), a) == a


@given(elements(H, irrational=False), elements(H, irrational=False))
def test_multiply_matches_matrix_oracle(a, b):
    assert matrix(multiply(a, b)) == mat_mul(matrix(a), matrix(b))


def test_inverse_and_commutator_examples():
    assert inverse(el(1, 1, 0)) == el(-1, -1, 1)
    x, y, z = F(2, 3), F(-5, 4), F(1, 9)
    assert inverse(el(x, y, z)) == el(-x, -y, x * y - z)
    assert commutator(el(1, 0, 0), el(0, 1, 0)) == el(0, 0, 1)
    a = el(F(1, 2), 3, 7)
    assert commutator(a, a).is_identity


def test_power_examples():
    assert power(el(1, 1, 0), 3) == el(3, 3, 3)
    assert power(el(1, 1, 0), -1) == el(-1, -1, 1)
    assert power(el(5, 2, 1), 0).is_identity


def test_reduce_examples():
    q, g = reduce_mod_lattice(el(F(3, 2), F(1, 4), F(4, 5)))
    assert (q, g) == (el(F(1, 2), F(1, 4), F(4, 5)), el(-1, 0, 0))
    q, g = reduce_mod_lattice(H.identity())
    assert q.is_identity and g.is_identity
    q, g = reduce_mod_lattice(el(F(1, 3), F(5, 4), F(7, 2)))
    assert (q, g) == (el(F(1, 3), F(1, 4), F(1, 6)), el(0, -1, -3))


def test_reduce_matches_brute_force():
    rng = random.Random(3)
    for _ in range(30):
        a = el(*(F(rng.randint(-9, 9), rng.randint(3, 6)) for _ in range(3)))
        hits = [g for g in (el(i, j, k) for i in range(-4, 5) for j in range(-4, 5)
                            for k in range(-25, 26))
                if all(0 <= c.q0 < 1 for c in multiply(a, g).coords)]
        assert hits == [reduce_mod_lattice(a)[1]]


def test_mismatch_is_structured():
    with pytest.raises(PresentationMismatch):
        multiply(el(1, 0, 0), torus(3).identity())


@pytest.mark.parametrize("p", CATALOG, ids=lambda p: repr(p))
@given(data=st.data())
def test_associativity_and_inverse(p, data):
    a, b, c = (data.draw(elements(p)) for _ in range(3))
    assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))
    assert multiply(a, inverse(a)).is_identity
    assert multiply(inverse(a), a).is_identity


@pytest.mark.parametrize("p", CATALOG, ids=lambda p: repr(p))
@given(data=st.data(), n=st.integers(-20, 20))
def test_power_is_iterated_product(p, data, n):
    a = data.draw(elements(p))
    it = p.identity()
    step = a if n >= 0 else inverse(a)
    for _ in range(abs(n)):
        it = multiply(it, step)
    assert power(a, n) == it


@pytest.mark.parametrize("p", CATALOG, ids=lambda p: repr(p))
@given(data=st.data())
def test_reduction_is_lattice_invariant(p, data):
    a = data.draw(elements(p))
    g = data.draw(lattice_elements(p))
    q, gamma = reduce_mod_lattice(a)
    assert gamma.in_lattice
    assert q == multiply(a, gamma)
    assert all(0 <= float(c) < 1 for c in q.coords)
    assert reduce_mod_lattice(multiply(a, g))[0] == q


def _span(y):
    return la.rref([list(r) for r in y.subgroup.cont_span], y.presentation.dim)


def test_normal_closure_examples():
    ax = Subnilmanifold.from_span(H, [[0, 1, 0]])
    assert _span(normal_closure(ax)) == la.rref([[0, 1, 0], [0, 0, 1]], 3)
    whole = Subnilmanifold.whole(H)
    assert _span(normal_closure(whole)) == _span(whole)
    centre = Subnilmanifold.from_span(H, [[0, 0, 1]])
    assert _span(normal_closure(centre)) == _span(centre)
    assert normal_closure(ax).normal


@pytest.mark.parametrize("rows", [[[1, 0, 0]], [[0, 1, 0]], [[0, 0, 1]], [[1, 2, 0], [0, 0, 1]],
                                  [[1, 0, 0], [0, 0, 1]], []])
def test_normal_closure_properties(rows):
    y = Subnilmanifold.from_span(H, rows)
    z = normal_closure(y)
    assert _span(normal_closure(z)) == _span(z)
    assert all(z.subgroup.contains_vector(r) for r in y.subgroup.cont_span)
    for e in la.identity(3):
        for r in z.subgroup.cont_span:
            assert z.subgroup.contains_vector(H.bracket(e, r))


@pytest.mark.parametrize("alpha,dim,cosets", [
    (("b1", "1/2"), 1, 2),
    (("b1",), 1, 1),
    (("1/3",), 0, 3),
    (("b1", "b2"), 2, 1),
    (("b1", "2*b1 + 1/3"), 1, 3),
])
def test_orbit_closure_examples(alpha, dim, cosets):
    vec = [Scalar.parse(a, BASIS) for a in alpha]
    k = len(vec)
    oc = subgroup_closure_torus([vec], k)
    sub, c = orbit_closure_torus(vec, k)
    assert (sub.dim, c) == (dim, cosets) == (oc.subtorus.dim, oc.cosets)
    rel = [list(r) for r in oc.relations]
    for m in rel:
        assert sum((v * mi for v, mi in zip(vec, m)), Scalar(0)).is_integer
    # brute-force relations in a box have the same rank as the reported lattice
    box = [m for m in itertools.product(range(-6, 7), repeat=k)
           if sum((v * mi for v, mi in zip(vec, m)), Scalar(0)).is_integer]
    assert la.rank_int(box) == la.rank_int(rel or [[0] * k]) == k - dim
    # sampled orbit points sit within 1e-9 of the closure {x : m.x in Z for m in rel}
    vals = [float(v) for v in vec]
    for n in range(0, 10001, 13):
        x = [(n * v) % 1.0 for v in vals]
        for m in rel:
            t = sum(mi * xi for mi, xi in zip(m, x))
            assert abs(t - round(t)) < 1e-9
    if dim == 0:
        pts = {tuple((n * v.q0) % 1 for v in vec) for n in range(50)}
        assert len(pts) == cosets


@given(elements(H))
def test_json_round_trip(a):
    assert GroupElement.from_json(a.to_json(), BASIS) == a
    for p in CATALOG:
        assert GroupPresentation.from_json(p.to_json()) == p
