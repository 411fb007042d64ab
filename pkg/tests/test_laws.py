import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from laguerre import laws, process
from laguerre.laws import DomainError, LawQuery, OrderingError
from laguerre.mathyp import HermitianMatrix
from laguerre.scalarfn import bessel_i

# Generalized Hartman-Watson density at (lambda1, lambda2) = (2, 1): the defining double
# integral evaluated on the real line with mpmath at 60 digits
HW_REF_21 = {5.0: 0.0551325394885271, 2.0: 0.253360630829837, 1.0: 0.0879931734701006, 0.5: 1.5933965580318e-6}


def test_weyl_constant():
    assert laws.weyl_constant(1) == 1.0
    assert laws.weyl_constant(2) == pytest.approx(math.pi)


# -- Laplace transform ---------------------------------------------------------------------

def test_laplace_examples():
    assert laws.laplace_transform(LawQuery(m=2, delta=2, x="I", t=1.0, u=np.zeros((2, 2)))) == 1.0
    assert laws.laplace_transform(LawQuery(m=2, delta=2, t=1.0, u=0.5 * np.eye(2))) == pytest.approx(1 / 16)


def test_laplace_against_euler_mc():
    q = LawQuery(m=2, delta=2.5, x="I", t=0.5, u=0.3 * np.eye(2))
    cf = laws.laplace_transform(q)
    cfg = process.SimConfig(m=2, delta=2.5, x0="I", t_end=0.5, n_steps=200, n_paths=20_000, seed=21)
    xs = process.simulate(cfg).final
    v = np.exp(-0.3 * np.real(np.trace(xs, axis1=1, axis2=2)))
    assert abs(v.mean() - cf) <= 3 * v.std(ddof=1) / math.sqrt(len(v)) + 2e-3  # O(h) Euler margin


def _density_eigen_integral(x, delta, t, weight, upper=40.0, n=48):
    """int over the PSD cone of weight(y) p_t(x, y) dy in eigenvalue coordinates (m = 2)."""
    pts, wts = laws.chamber_box_rule(0.0, upper, 0.0, upper, n)
    total = 0.0
    for (y1, y2), w in zip(pts, wts):
        p = laws.transition_density(LawQuery(m=2, delta=delta, x=x, y=np.diag([y1, y2]), t=t)).value
        total += w * p * weight(y1, y2) * laws.weyl_constant(2) * (y1 - y2) ** 2
    return total


def test_transition_density_normalization_zero_start():
    assert _density_eigen_integral("zero", 2.0, 0.5, lambda a, b: 1.0) == pytest.approx(1.0, abs=1e-9)


def test_laplace_density_consistency():
    # scalar start: p_t(x, U y U^*) does not depend on U, so eigenvalue coordinates suffice
    u = 0.4
    lt = _density_eigen_integral(0.6 * np.eye(2), 2.5, 0.5, lambda a, b: math.exp(-u * (a + b)), upper=30.0, n=40)
    ref = laws.laplace_transform(LawQuery(m=2, delta=2.5, x=0.6 * np.eye(2), t=0.5, u=u * np.eye(2)))
    assert lt == pytest.approx(ref, abs=1e-3)


def test_laplace_eigen_density_consistency():
    # general start: the trace transform only sees the eigenvalue law
    x, u = np.array([0.8, 0.3]), 0.4
    pts, wts = laws.chamber_box_rule(0.0, 30.0, 0.0, 30.0, 40)
    q = laws.km_kernel(x[None], pts, 0.5, 0.5)
    lt = float(np.dot(q * np.exp(-u * pts.sum(axis=1)), wts))
    ref = laws.laplace_transform(LawQuery(m=2, delta=2.5, x=np.diag(x), t=0.5, u=u * np.eye(2)))
    assert lt == pytest.approx(ref, abs=1e-3)


def test_transition_density_scalar_cases():
    for y in (0.3, 1.0, 4.0):
        p = laws.transition_density(LawQuery(m=1, delta=1, x=0.0, y=y, t=0.8)).value
        assert p == pytest.approx(math.exp(-y / 1.6) / 1.6, rel=1e-13)
    # m=1, delta=1, x=1, t=1: X/t is noncentral chi-square with 2 dof and noncentrality x/t
    for y in (0.5, 1.0, 2.0):
        p = laws.transition_density(LawQuery(m=1, delta=1, x=1.0, y=y, t=1.0)).value
        assert p == pytest.approx(stats.ncx2.pdf(y, 2, 1.0), rel=1e-12)
        bes = 0.5 * math.exp(-(1 + y) / 2) * bessel_i(0, math.sqrt(y))
        assert p == pytest.approx(bes, rel=1e-13)


def test_transition_density_outside_cone():
    d = laws.transition_density(LawQuery(m=2, delta=2, x="I", y=np.diag([1.0, -0.2]), t=1.0))
    assert d.value == 0.0 and d.flag


def test_chapman_kolmogorov_scalar():
    x, y, s, t, delta = 0.7, 1.3, 0.4, 0.6, 1.7
    p = lambda a, b, tt: laws.transition_density(LawQuery(m=1, delta=delta, x=a, y=b, t=tt)).value
    lhs, _ = integrate.quad(lambda z: p(x, z, s) * p(z, y, t), 0, 60, epsabs=1e-12, limit=200)
    assert lhs == pytest.approx(p(x, y, s + t), abs=1e-6)


# -- eigenvalue semigroup -------------------------------------------------------------------

def test_eigen_semigroup_scalar():
    x, y, nu, t = 1.5, 0.8, 0.4, 0.7
    q = laws.eigen_semigroup(LawQuery(m=1, nu=nu, x=x, y=np.array([y]), t=t)).value
    ref = (0.5 / t) * (y / x) ** (nu / 2) * math.exp(-(x + y) / (2 * t)) * bessel_i(nu, math.sqrt(x * y) / t)
    assert q == pytest.approx(ref, rel=1e-12)


def test_eigen_semigroup_normalization():
    assert laws.eigen_normalization_m2(np.array([2.0, 1.0]), 0.0, 0.5) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("y", [(3.0, 1.0), (1.2, 0.4), (5.0, 2.5)])
def test_eigen_semigroup_unitary_route(y):
    q = LawQuery(m=2, delta=2.5, x=np.array([2.0, 1.0]), y=np.array(y), t=0.5)
    a = laws.eigen_semigroup(q).value
    b = laws.eigen_semigroup(q, route="unitary").value
    assert b == pytest.approx(a, rel=1e-6)


def test_eigen_semigroup_ordering_error():
    with pytest.raises(OrderingError):
        laws.eigen_semigroup(LawQuery(m=2, delta=2, x=np.diag([2.0, 1.0]), y=np.array([1.0, 2.0]), t=1.0))
    with pytest.raises(OrderingError):
        laws.eigen_semigroup(LawQuery(m=2, delta=2, x=np.diag([2.0, 0.0]), y=np.array([2.0, 1.0]), t=1.0))


# -- determinant moments ---------------------------------------------------------------------

def test_det_moment_examples():
    assert laws.det_moment(LawQuery(m=2, delta=2, x="I", t=1.0), 0.0) == 1.0
    for s in (0.5, 1.0, 2.3):
        v = laws.det_moment(LawQuery(m=1, delta=1, x=0.0, t=0.6), s)
        assert v == pytest.approx(1.2**s * math.gamma(1 + s), rel=1e-13)
    with pytest.raises(DomainError):
        laws.det_moment(LawQuery(m=2, delta=2, t=1.0), -1.5)


def test_det_moment_routes_and_mc():
    q = LawQuery(m=2, delta=2.5, x=np.diag([1.4, 0.6]), t=0.8)
    for s in (0.5, 1.0, 1.7):
        assert laws.det_moment(q, s, "series") == pytest.approx(laws.det_moment(q, s, "det"), rel=1e-10)
    q = LawQuery(m=2, delta=2, x="I", t=1.0)
    a = laws.det_moment(q, 1.0)
    xs = process.exact_marginals(2, HermitianMatrix.identity(2), 1.0, 31, 100_000)
    d = np.real(np.linalg.det(xs))
    assert abs(d.mean() - a) <= 3 * d.std(ddof=1) / math.sqrt(len(d))


# -- T0 and S0 ----------------------------------------------------------------------------------

def test_t0_tail_small_time():
    x = np.diag([2.0, 1.0])
    assert laws.t0_tail(LawQuery(m=2, nu=0.5, x=x, t=1e-6 * 1.0 / 2)) == pytest.approx(1.0, abs=1e-4)


def test_t0_tail_scalar_is_lower_incomplete_gamma():
    for t in (0.1, 1.0, 10.0):
        v = laws.t0_tail(LawQuery(m=1, nu=0.5, x=1.0, t=t))
        assert v == pytest.approx(special.gammainc(0.5, 1 / (2 * t)), abs=1e-10)
    # the upper incomplete gamma tends to 0 as t -> 0, contradicting P(T0 > 0+) = 1
    assert special.gammaincc(0.5, 1 / (2 * 0.1)) < 0.01


def test_t0_tail_monotone():
    ts = np.linspace(0.05, 5, 20)
    vals = [laws.t0_tail(LawQuery(m=2, nu=0.5, x=np.diag([2.0, 1.0]), t=t)) for t in ts]
    assert np.all(np.diff(vals) < 0) and 0 < vals[-1] < vals[0] <= 1


@pytest.mark.parametrize("t", [0.02, 0.1, 0.5, 2.0])
def test_t0_tail_coincident_eigenvalues(t):
    eq = laws.t0_tail(LawQuery(m=2, nu=0.5, x=np.eye(2), t=t))
    split = laws.t0_tail(LawQuery(m=2, nu=0.5, x=np.diag([1 + 1e-4, 1 - 1e-4]), t=t))
    assert eq == pytest.approx(split, abs=1e-7)


def test_t0_tail_domain():
    with pytest.raises(DomainError):
        laws.t0_tail(LawQuery(m=2, nu=1.2, x="I", t=1.0))
    with pytest.raises(DomainError):
        laws.t0_tail(LawQuery(m=2, nu=0.5, x=np.diag([1.0, 0.0]), t=1.0))


def test_s0_normalization():
    mass, err = laws.s0_total_mass_m2(2.0, 1.0, 0.5)
    assert mass == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("upper", [0.2, 1.0, 5.0])
def test_s0_cdf_equals_t0_tail(upper):
    # {S0 < U} = {T0 > 1/(2U)}
    cdf, _ = laws.s0_cdf_m2(2.0, 1.0, 0.5, upper)
    tail = laws.t0_tail(LawQuery(m=2, nu=0.5, x=np.diag([2.0, 1.0]), t=1 / (2 * upper)))
    assert cdf == pytest.approx(tail, abs=1e-5)


def test_s0_scalar_analogue_is_gamma():
    # for m=1, S0 = gamma_nu / x, so P(S0 < U) = P(nu, x U) = t0_tail(1/(2U))
    for upper in (0.2, 1.0, 5.0):
        tail = laws.t0_tail(LawQuery(m=1, nu=0.4, x=1.3, t=1 / (2 * upper)))
        assert tail == pytest.approx(special.gammainc(0.4, 1.3 * upper), abs=1e-12)


def test_s0_equal_limit():
    lam = 1.5
    d = laws.s0_density_m2(lam, lam * (1 - 1e-5), 0.3, 0.7)
    e = laws.s0_density_m2(lam, lam, 0.3, 0.7)
    assert d == pytest.approx(e, rel=1e-4)
    mass, _ = laws.s0_total_mass_m2(lam, lam, 0.3)
    assert mass == pytest.approx(1.0, abs=1e-5)


# -- Hartman-Watson --------------------------------------------------------------------------------

def test_hw_laplace_examples():
    assert laws.hw_laplace([0.7, 0.2], 0.0, 2) == 1.0
    for z in (0.1, 1.0, 6.0):
        r = 2 * math.sqrt(z)
        assert laws.hw_laplace([z], 0.8, 1) == pytest.approx(bessel_i(0.8, r) / bessel_i(0, r), rel=1e-12)
    x, y = np.diag([2.0, 1.0]), np.diag([1.5, 0.5])
    z = np.linalg.eigvalsh(np.sqrt(x) @ y @ np.sqrt(x) / 4)
    assert abs(laws.hw_laplace(z, 0.7, 2, "matrix") - laws.hw_laplace(z, 0.7, 2, "bessel")) < 1e-8


@given(st.floats(0.01, 8.0), st.floats(0.01, 3.0), st.floats(0.01, 3.0), st.floats(0.05, 2.0))
@settings(max_examples=50, deadline=None)
def test_hw_laplace_monotone_in_nu(z1, z2, nu, dnu):
    z = sorted([z1, min(z1, z2)], reverse=True)
    assert laws.hw_laplace(z, nu + dnu, 2, "bessel") < laws.hw_laplace(z, nu, 2, "bessel")


def test_hw_laplace_equal_eigenvalues_continuous():
    a = laws.hw_laplace([0.6, 0.6], 0.5, 2)
    b = laws.hw_laplace([0.6, 0.6 * (1 - 1e-7)], 0.5, 2)
    assert a == pytest.approx(b, rel=1e-6)


@pytest.mark.parametrize("v", sorted(HW_REF_21))
def test_hw_density_reference_values(v):
    val, diag = laws.hw_density_m2(2.0, 1.0, v, with_error=True)
    tol = 1e-4 if v < 1 else 1e-8
    assert val == pytest.approx(HW_REF_21[v], rel=tol)
    assert diag["flag"] is None


def test_hw_density_small_v_is_flagged():
    val, diag = laws.hw_density_m2(2.0, 1.0, 0.1, with_error=True)
    assert val == 0.0 and diag["flag"]
    val, diag = laws.hw_density_m2(2.0, 1.0, 0.005, with_error=True)
    assert val == 0.0 and diag["flag"]


def test_hw_equal_inner_struve_matches_quadrature():
    a = np.linspace(0.2, 8.0, 12)
    assert np.allclose(laws.hw_inner_equal_struve(a), laws.hw_inner(a, 0.0), rtol=1e-9)


def test_hw_equal_branch_continuous():
    e = laws.hw_density_m2(1.5, 1.5, 2.0)
    d = laws.hw_density_m2(1.5, 1.5 * (1 - 1e-6), 2.0)
    assert d == pytest.approx(e, rel=1e-5)


# -- invariant measure --------------------------------------------------------------------------------

def test_invariant_measure_examples():
    assert laws.invariant_measure_residual(1.0, 1, "bump1", 0.1) < 1e-2
    assert laws.invariant_measure_residual(2.0, 2, "zero", 0.1) == 0.0
    res, err = laws.invariant_measure_residual(2.5, 2, "bump1", 0.1, with_error=True)
    assert res < 5e-2 and err < 5e-2
    with pytest.raises(KeyError):
        laws.invariant_measure_residual(2.0, 1, "nope", 0.1)
