import numpy as np
import pytest

from laguerre import _kernels
from laguerre import _pykernels as py

c = _kernels.compiled_backend
needs_compiled = pytest.mark.skipif(c is None, reason="compiled core not built")


def test_active_backend_selection():
    assert _kernels.BACKEND in ("cython", "python")
    if c is not None:
        assert _kernels.BACKEND == "cython"


@needs_compiled
def test_counter_normals_agree_to_one_ulp():
    # identical integer hashing; libm and numpy log/cos may differ in the last bit
    paths = np.arange(1000, 1500, dtype=np.uint64)
    for args in ((0, 0, 0, 0), (7, 4, 123, 9), (2**63 + 5, 6, 10**6, 2**20)):
        a = py.counter_normals(args[0], args[1], paths, args[2], args[3], 7)
        b = c.counter_normals(args[0], args[1], paths, args[2], args[3], 7)
        assert np.all(np.abs(a - b) <= 2 * np.spacing(np.abs(a)))
        assert np.mean(a == b) > 0.9


@needs_compiled
def test_series_kernels_agree():
    z = np.linspace(-20, 20, 81)
    for up, lo in (([0.5], [1.5]), ([], [2.3]), ([1.0, 2.0], [3.0, 0.5]), ([-3.0], [1.0])):
        a, ca = py.pfq_series(np.array(up), np.array(lo), z, 1e-16, 500, 3)
        b, cb = c.pfq_series(np.array(up), np.array(lo), z, 1e-16, 500, 3)
        assert np.array_equal(ca, cb)
        assert np.allclose(a, b, rtol=1e-14, atol=0)
    zz = np.linspace(0, 25, 26)
    for nu in (0.0, 0.5, 2.0):
        assert np.allclose(py.bessel_i_series(nu, zz)[0], c.bessel_i_series(nu, zz)[0], rtol=1e-14)
    assert np.allclose(py.struve_l_series(2.0, zz)[0], c.struve_l_series(2.0, zz)[0], rtol=1e-14)


@needs_compiled
@pytest.mark.parametrize("x0,delta", [((2.0, 1.0), 2.0), ((3.0, 2.0, 1.0), 3.0), ((0.05, 0.01), 1.2)])
def test_eigen_paths_agree(x0, delta):
    args = (np.array(x0), delta, 0.5, 50, 3, 4, 10, 64, True)
    fa, ta, ha, na = py.eigen_paths(*args)
    fb, tb, hb, nb = c.eigen_paths(*args)
    assert (ha, na) == (hb, nb)
    assert np.allclose(ta, tb, rtol=1e-12, atol=1e-14)
    assert np.allclose(fa, fb, rtol=1e-12, atol=1e-14)


@needs_compiled
def test_gram_paths_agree():
    b0 = np.array([[1.0, 0.2j], [0.0, 0.8], [0.1, 0.0]], dtype=complex)
    fa, ia = py.gram_paths(b0, 0.01, 30, 5, 0, 7, 40)
    fb, ib = c.gram_paths(b0, 0.01, 30, 5, 0, 7, 40)
    assert np.allclose(fa, fb, rtol=1e-13, atol=1e-14)
    assert np.allclose(ia, ib, rtol=1e-12)


@needs_compiled
def test_eigen_step_agree():
    for lam, dw in (((2.0, 1.0), (0.3, -0.2)), ((1.0, 0.999), (-0.5, 0.5)), ((0.01,), (-0.3,))):
        a = py.eigen_step(np.array(lam), 2.0, 0.01, np.array(dw), 1, 4, 0, 0)
        b = c.eigen_step(np.array(lam), 2.0, 0.01, np.array(dw), 1, 4, 0, 0)
        assert np.allclose(a[0], b[0], rtol=1e-13) and a[1:] == b[1:]
