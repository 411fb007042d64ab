import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laguerre.symfun import (
    Partition,
    gen_pochhammer,
    partitions_of,
    schur,
    schur_bialternant,
    schur_jacobi_trudi,
    syt_count,
    zonal,
)


def test_partitions_examples():
    assert partitions_of(3, 2) == [(3,), (2, 1)]
    assert [p.padded(2) for p in partitions_of(3, 2)] == [(3, 0), (2, 1)]
    assert partitions_of(0, 5) == [()]
    assert [p.padded(2) for p in partitions_of(4, 2)] == [(4, 0), (3, 1), (2, 2)]


@pytest.mark.parametrize("k,m", [(5, 3), (6, 6), (8, 4), (7, 1)])
def test_partitions_exhaustive(k, m):
    brute = set()
    for parts in itertools.product(range(k + 1), repeat=m):
        if sum(parts) == k and list(parts) == sorted(parts, reverse=True):
            brute.add(tuple(p for p in parts if p))
    got = partitions_of(k, m)
    assert set(got) == brute and len(got) == len(brute)
    assert got == sorted(got, reverse=True)


def test_partition_invariants():
    p = Partition((3, 1, 0, 0))
    assert p == (3, 1) and p.weight == 4 and p.length == 2
    with pytest.raises(ValueError):
        Partition((1, 2))


def test_gen_pochhammer_examples():
    assert gen_pochhammer(2, (1,)) == 2
    assert gen_pochhammer(3, (2, 1)) == 24
    assert gen_pochhammer(2, (2, 2)) == 12


@given(st.floats(-5, 5, allow_nan=False), st.integers(0, 8))
def test_gen_pochhammer_single_row_is_rising_factorial(a, k):
    ref = math.prod(a + i for i in range(k))
    assert gen_pochhammer(a, (k,)) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_gen_pochhammer_vanishes_at_lattice_point():
    # (a)_tau with a - i + 1 = 0 in an occupied row: the terminating-series zero
    assert gen_pochhammer(1, (1, 1)) == 0


def test_syt_count_examples():
    assert syt_count((2, 1)) == 2
    assert syt_count((5,)) == 1
    assert syt_count((2, 2)) == 2
    # sum of f_tau^2 over tau |- k is k!
    for k in range(1, 8):
        assert sum(syt_count(t) ** 2 for t in partitions_of(k, k)) == math.factorial(k)


def _bialternant_exact(tau, x):
    m = len(x)
    parts = list(tau) + [0] * (m - len(tau))
    x = [Fraction(v) for v in x]

    def det(a):
        if len(a) == 1:
            return a[0][0]
        return sum((-1) ** j * a[0][j] * det([row[:j] + row[j + 1:] for row in a[1:]]) for j in range(len(a)))

    num = det([[xi ** (parts[j] + m - 1 - j) for j in range(m)] for xi in x])
    den = det([[xi ** (m - 1 - j) for j in range(m)] for xi in x])
    return num / den


def test_schur_examples():
    assert schur((1, 1), [3, 2]) == pytest.approx(6)
    assert schur((2,), [1, 1]) == pytest.approx(3)
    ref = float(_bialternant_exact((2, 1), [Fraction(3, 2), Fraction(1, 2)]))
    assert schur((2, 1), [1.5, 0.5]) == pytest.approx(ref, rel=1e-14)


def test_schur_dimension_mismatch():
    with pytest.raises(ValueError):
        schur((1, 1, 1), [1.0, 2.0])


def test_schur_branch_agreement_random():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(2, 5))
        x = rng.uniform(-2, 2, m)
        k = int(rng.integers(1, 7))
        parts = partitions_of(k, m)
        tau = parts[int(rng.integers(len(parts)))]
        a, b = schur_bialternant(tau, x), schur_jacobi_trudi(tau, x)
        scale = max(1.0, float(np.max(np.abs(x)))) ** k
        worst = max(worst, abs(a - b) / max(abs(b), 1e-3 * scale))
    assert worst < 1e-9


def test_jacobi_trudi_dual_form_agrees():
    x = [0.9, 0.4, -0.3]
    for tau in partitions_of(5, 3):
        assert schur_jacobi_trudi(tau, x, dual=True) == pytest.approx(schur_jacobi_trudi(tau, x), rel=1e-12)


@given(st.floats(0.1, 3.0), st.lists(st.floats(0.1, 2.0), min_size=3, max_size=3))
@settings(max_examples=50, deadline=None)
def test_schur_homogeneity(c, x):
    for tau in ((2, 1), (3,), (1, 1, 1)):
        assert schur(tau, [c * v for v in x]) == pytest.approx(c ** sum(tau) * schur(tau, x), rel=1e-9)


def test_schur_continuous_through_crossing():
    vals = [schur((3, 1), [1.0, 1.0 + e]) for e in np.linspace(-1e-3, 1e-3, 401)]
    assert np.all(np.isfinite(vals))
    assert np.max(np.abs(np.diff(vals))) < 1e-4
    exact = float(_bialternant_exact((3, 1), [1, Fraction(1000001, 1000000)]))
    assert schur((3, 1), [1.0, 1.000001]) == pytest.approx(exact, rel=1e-9)


def test_zonal_examples():
    x = [1.0, 1.0]
    assert sum(zonal(t, x) for t in partitions_of(2, 2)) == pytest.approx(4)
    assert zonal((1,), [0.3, 0.5, 2.0]) == pytest.approx(2.8)
    assert sum(zonal(t, [0.7, 0.3]) for t in partitions_of(4, 2)) == pytest.approx(1.0, rel=1e-13)


@given(st.lists(st.floats(0.05, 2.0), min_size=1, max_size=4), st.integers(0, 8))
@settings(max_examples=60, deadline=None)
def test_zonal_normalization(x, k):
    total = sum(zonal(t, x) for t in partitions_of(k, len(x)))
    assert total == pytest.approx(sum(x) ** k, rel=1e-10)
