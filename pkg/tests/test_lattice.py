from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from nilcorr import lattice as la

matrices = st.integers(1, 4).flatmap(
    lambda m: st.integers(1, 4).flatmap(
        lambda n: st.lists(st.lists(st.integers(-9, 9), min_size=n, max_size=n),
                           min_size=m, max_size=m)))


@given(matrices)
def test_smith_form_factorization(a):
    s, u, v = la.smith_normal_form(a)
    assert la.matmul(la.matmul(u, a), v) == s
    m, n = len(a), len(a[0])
    diag = [s[i][i] for i in range(min(m, n))]
    for i in range(m):
        for j in range(n):
            if i != j:
                assert s[i][j] == 0
    assert all(x >= 0 for x in diag)
    nz = [x for x in diag if x]
    assert diag[:len(nz)] == nz
    for x, y in zip(nz, nz[1:]):
        assert y % x == 0
    # unimodular: integer inverses exist
    for w in (u, v):
        inv = la.inverse_unimodular(w)
        assert la.matmul(w, inv) == la.identity(len(w))


@given(matrices)
def test_kernel_is_annihilated_and_full(a):
    n = len(a[0])
    ker = la.integer_kernel(a, n)
    for row in ker:
        assert all(sum(x * y for x, y in zip(r, row)) == 0 for r in a)
    assert len(ker) == n - la.rank_int(a)


def test_smith_known_values():
    s, _, _ = la.smith_normal_form([[2, 4, 4], [-6, 6, 12], [10, -4, -16]])
    assert [s[i][i] for i in range(3)] == [2, 6, 12]


def test_saturation_index():
    sat, index = la.saturate([[0, 2]], 2)
    assert index == 2
    assert la.rref(sat, 2) == la.rref([[0, 1]], 2)


def test_rational_kernel_and_span():
    ker = la.rational_kernel([[1, Fraction(1, 2), 0]], 3)
    span = la.rref(ker, 3)
    assert len(span) == 2
    assert la.in_span([Fraction(-1, 2), 1, 0], span, 3)
    assert not la.in_span([1, 0, 0], span, 3)
