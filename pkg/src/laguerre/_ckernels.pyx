# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin, fabs, exp, lgamma, M_PI, INFINITY
from libc.stdint cimport uint64_t
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"
cdef int _MAXH = 20
MAX_HALVINGS = _MAXH

cdef uint64_t _GAMMA = 0x9E3779B97F4A7C15ULL
cdef double _INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _key(uint64_t seed, uint64_t stream, uint64_t path,
                          uint64_t step, uint64_t node) noexcept nogil:
    cdef uint64_t h = _mix(seed ^ _GAMMA)
    h = _mix(h + stream * _GAMMA)
    h = _mix(h + path * _GAMMA)
    h = _mix(h + step * _GAMMA)
    return _mix(h + node * _GAMMA)


cdef void _normals(uint64_t seed, uint64_t stream, uint64_t path, uint64_t step,
                   uint64_t node, int n, double* out) noexcept nogil:
    cdef uint64_t h = _key(seed, stream, path, step, node)
    cdef int j
    cdef uint64_t b1, b2
    cdef double u1, u2, r, ang
    for j in range((n + 1) // 2):
        b1 = _mix(h + (2 * <uint64_t>j + 1) * _GAMMA)
        b2 = _mix(h + (2 * <uint64_t>j + 2) * _GAMMA)
        u1 = (<double>(b1 >> 11) + 0.5) * _INV53
        u2 = (<double>(b2 >> 11)) * _INV53
        r = sqrt(-2.0 * log(u1))
        ang = 2.0 * M_PI * u2
        out[2 * j] = r * cos(ang)
        if 2 * j + 1 < n:
            out[2 * j + 1] = r * sin(ang)


def counter_normals(seed, stream, paths, step, node, int n):
    cdef cnp.uint64_t[::1] p = np.ascontiguousarray(paths, dtype=np.uint64)
    cdef Py_ssize_t np_ = p.shape[0], i
    out = np.empty((np_, n))
    cdef double[:, ::1] o = out
    cdef uint64_t s = seed, st = stream, sp = step, nd = node
    with nogil:
        for i in range(np_):
            _normals(s, st, p[i], sp, nd, n, &o[i, 0])
    return out


def pfq_series(upper, lower, z, double rtol=1e-16, int max_terms=500, int n_small=3):
    cdef double[::1] up = np.ascontiguousarray(upper, dtype=float).ravel()
    cdef double[::1] lo = np.ascontiguousarray(lower, dtype=float).ravel()
    zz = np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=float)))
    cdef double[::1] zv = zz.ravel()
    vals = np.empty(zv.shape[0])
    conv = np.zeros(zv.shape[0], dtype=bool)
    cdef double[::1] v = vals
    cdef cnp.npy_bool[::1] c = conv
    cdef Py_ssize_t i, n = zv.shape[0]
    cdef int k, a, small
    cdef double total, term, num, den, x
    with nogil:
        for i in range(n):
            x = zv[i]
            total = 1.0
            term = 1.0
            small = 0
            for k in range(max_terms):
                num = 1.0
                den = 1.0
                for a in range(up.shape[0]):
                    num = num * (up[a] + k)
                for a in range(lo.shape[0]):
                    den = den * (lo[a] + k)
                term = term * (num / den / (k + 1)) * x
                total = total + term
                if fabs(term) <= rtol * fabs(total):
                    small += 1
                else:
                    small = 0
                if small >= n_small:
                    c[i] = True
                    break
            v[i] = total
    return vals.reshape(zz.shape), conv.reshape(zz.shape)


cdef double _bessel_like(double lead, double q, double off1, double off2,
                         double rtol, int max_terms, int n_small) noexcept nogil:
    cdef double total = lead, term = lead
    cdef int k, small = 0
    for k in range(max_terms):
        term = term * q / ((k + off1) * (k + off2))
        total = total + term
        if fabs(term) <= rtol * fabs(total):
            small += 1
        else:
            small = 0
        if small >= n_small:
            break
    return total


def bessel_i_series(double nu, z, double rtol=1e-16, int max_terms=500, int n_small=3):
    zz = np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=float)))
    cdef double[::1] zv = zz.ravel()
    out = np.empty(zv.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double lg = lgamma(nu + 1.0), lead
    with nogil:
        for i in range(zv.shape[0]):
            if zv[i] > 0:
                lead = 1.0 if nu == 0.0 else exp(nu * log(0.5 * zv[i]) - lg)
                o[i] = _bessel_like(lead, 0.25 * zv[i] * zv[i], 1.0, nu + 1.0,
                                    rtol, max_terms, n_small)
            else:
                o[i] = 1.0 if nu == 0.0 else 0.0
    return out.reshape(zz.shape)


def struve_l_series(double nu, z, double rtol=1e-16, int max_terms=500, int n_small=3):
    zz = np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=float)))
    cdef double[::1] zv = zz.ravel()
    out = np.empty(zv.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double lg = lgamma(1.5) + lgamma(nu + 1.5), lead
    with nogil:
        for i in range(zv.shape[0]):
            if zv[i] > 0:
                lead = exp((nu + 1.0) * log(0.5 * zv[i]) - lg)
                o[i] = _bessel_like(lead, 0.25 * zv[i] * zv[i], 1.5, nu + 1.5,
                                    rtol, max_terms, n_small)
            else:
                o[i] = 0.0
    return out.reshape(zz.shape)


cdef inline bint _valid(double* lam, int m) noexcept nogil:
    cdef int i
    if lam[m - 1] < 0.0:
        return False
    for i in range(m - 1):
        if not (lam[i] > lam[i + 1]):
            return False
    return True


cdef void _propose(double* lam, double delta, double h, double* dw, int m,
                   double* out) noexcept nogil:
    cdef int i, k
    cdef double d, pi_, pk
    for i in range(m):
        d = delta
        pi_ = lam[i] if lam[i] > 0.0 else 0.0
        for k in range(m):
            if k != i:
                pk = lam[k] if lam[k] > 0.0 else 0.0
                d = d + (pi_ + pk) / (lam[i] - lam[k])
        out[i] = lam[i] + 2.0 * sqrt(pi_) * dw[i] + 2.0 * d * h


cdef void _force(double* lam, int m) noexcept nogil:
    # clamp at zero and restore descending order (insertion sort)
    cdef int i, j
    cdef double v
    for i in range(m):
        if lam[i] < 0.0:
            lam[i] = 0.0
    for i in range(1, m):
        v = lam[i]
        j = i - 1
        while j >= 0 and lam[j] < v:
            lam[j + 1] = lam[j]
            j -= 1
        lam[j + 1] = v


cdef void _substep(double* lam, double delta, double h, double* dw, int m,
                   uint64_t seed, uint64_t stream, uint64_t path, uint64_t step,
                   uint64_t node, int depth, long* stats, double* out) noexcept nogil:
    """Guarded step from ``lam`` over ``h`` with increment ``dw``; result in ``out``."""
    _propose(lam, delta, h, dw, m, out)
    if _valid(out, m):
        return
    if depth >= _MAXH:
        stats[1] += 1
        _force(out, m)
        return
    stats[0] += 1
    cdef double* buf = <double*>malloc(4 * m * sizeof(double))
    cdef double* z = buf
    cdef double* dw1 = buf + m
    cdef double* dw2 = buf + 2 * m
    cdef double* mid = buf + 3 * m
    cdef int i
    _normals(seed, stream + 1, path, step, node, m, z)
    for i in range(m):
        dw1[i] = 0.5 * dw[i] + 0.5 * sqrt(h) * z[i]
        dw2[i] = dw[i] - dw1[i]
    _substep(lam, delta, 0.5 * h, dw1, m, seed, stream, path, step, 2 * node, depth + 1, stats, mid)
    _substep(mid, delta, 0.5 * h, dw2, m, seed, stream, path, step, 2 * node + 1, depth + 1, stats, out)
    free(buf)


def eigen_step(lam, double delta, double h, dw, seed=0, stream=0, path=0, step=0):
    cdef double[::1] l = np.ascontiguousarray(lam, dtype=float)
    cdef double[::1] d = np.ascontiguousarray(dw, dtype=float)
    cdef int m = l.shape[0]
    out = np.empty(m)
    cdef double[::1] o = out
    cdef long stats[2]
    stats[0] = 0
    stats[1] = 0
    _substep(&l[0], delta, h, &d[0], m, seed, stream, path, step, 1, 0, stats, &o[0])
    return out, stats[0], stats[1]


def eigen_paths(lam0, double delta, double t_end, int n_steps, seed, stream,
                path_start, Py_ssize_t n_paths, bint record=False):
    cdef double[::1] l0 = np.ascontiguousarray(lam0, dtype=float)
    cdef int m = l0.shape[0]
    cdef double h = t_end / n_steps
    cdef double sqh = sqrt(h)
    final = np.empty((n_paths, m))
    cdef double[:, ::1] fin = final
    traj = np.empty((n_paths if record else 1, n_steps + 1 if record else 1, m))
    cdef double[:, :, ::1] tr = traj
    cdef uint64_t s0 = seed, st = stream, p0 = path_start
    cdef long stats[2]
    stats[0] = 0
    stats[1] = 0
    cdef Py_ssize_t p
    cdef int s, i
    cdef double* buf = <double*>malloc(5 * m * sizeof(double))
    cdef double* lam = buf
    cdef double* prop = buf + m
    cdef double* dw = buf + 2 * m
    cdef double* dw1 = buf + 3 * m
    cdef double* mid = buf + 4 * m
    cdef double* z
    with nogil:
        for p in range(n_paths):
            for i in range(m):
                lam[i] = l0[i]
                if record:
                    tr[p, 0, i] = lam[i]
            for s in range(n_steps):
                _normals(s0, st, p0 + p, s, 1, m, dw)
                for i in range(m):
                    dw[i] = sqh * dw[i]
                _propose(lam, delta, h, dw, m, prop)
                if not _valid(prop, m):
                    stats[0] += 1
                    z = prop
                    _normals(s0, st + 1, p0 + p, s, 1, m, z)
                    for i in range(m):
                        dw1[i] = 0.5 * dw[i] + 0.5 * sqh * z[i]
                        dw[i] = dw[i] - dw1[i]
                    _substep(lam, delta, 0.5 * h, dw1, m, s0, st, p0 + p, s, 2, 1, stats, mid)
                    _substep(mid, delta, 0.5 * h, dw, m, s0, st, p0 + p, s, 3, 1, stats, prop)
                for i in range(m):
                    lam[i] = prop[i]
                    if record:
                        tr[p, s + 1, i] = lam[i]
            for i in range(m):
                fin[p, i] = lam[i]
    free(buf)
    return final, (traj if record else None), stats[0], stats[1]


cdef double _trace_inv(double complex* x, int m, double complex* L) noexcept nogil:
    """tr(X^{-1}) for Hermitian positive definite X via Cholesky; inf if singular."""
    cdef int i, j, k
    cdef double complex s
    cdef double d, tot
    for j in range(m):
        d = x[j * m + j].real
        for k in range(j):
            d = d - (L[j * m + k].real * L[j * m + k].real + L[j * m + k].imag * L[j * m + k].imag)
        if not (d > 0.0):
            return INFINITY
        L[j * m + j] = sqrt(d)
        for i in range(j + 1, m):
            s = x[i * m + j]
            for k in range(j):
                s = s - L[i * m + k] * L[j * m + k].conjugate()
            L[i * m + j] = s / L[j * m + j].real
    # ||L^{-1}||_F^2, column by column of the inverse
    tot = 0.0
    cdef double complex* y = L + m * m
    for k in range(m):
        for i in range(m):
            if i < k:
                y[i] = 0.0
                continue
            s = 1.0 if i == k else 0.0
            for j in range(k, i):
                s = s - L[i * m + j] * y[j]
            y[i] = s / L[i * m + i].real
            tot = tot + y[i].real * y[i].real + y[i].imag * y[i].imag
    return tot


cdef void _gram(double complex* b, int n, int m, double complex* x) noexcept nogil:
    cdef int i, j, r
    cdef double complex s
    for i in range(m):
        for j in range(i, m):
            s = 0.0
            for r in range(n):
                s = s + b[r * m + i].conjugate() * b[r * m + j]
            if i == j:
                x[i * m + j] = s.real
            else:
                x[i * m + j] = s
                x[j * m + i] = s.conjugate()


def gram_paths(b0, double h, int n_steps, seed, stream, path_start, Py_ssize_t n_paths):
    b0c = np.ascontiguousarray(b0, dtype=complex)
    cdef int n = b0c.shape[0], m = b0c.shape[1]
    cdef double complex[:, ::1] bz = b0c
    final = np.empty((n_paths, m, m), dtype=complex)
    acc = np.zeros(n_paths)
    cdef double complex[:, :, ::1] fin = final
    cdef double[::1] ac = acc
    cdef uint64_t s0 = seed, st = stream, p0 = path_start
    cdef double sqh = sqrt(h)
    cdef Py_ssize_t p
    cdef int s, i, j, k
    cdef double prev, cur
    cdef double complex* b = <double complex*>malloc(n * m * sizeof(double complex))
    cdef double complex* x = <double complex*>malloc(m * m * sizeof(double complex))
    cdef double complex* L = <double complex*>malloc((m * m + m) * sizeof(double complex))
    cdef double* z = <double*>malloc(2 * n * m * sizeof(double))
    with nogil:
        for p in range(n_paths):
            for i in range(n):
                for j in range(m):
                    b[i * m + j] = bz[i, j]
            _gram(b, n, m, x)
            prev = _trace_inv(x, m, L)
            for s in range(n_steps):
                _normals(s0, st, p0 + p, s, 0, 2 * n * m, z)
                for k in range(n * m):
                    b[k] = b[k] + sqh * (z[2 * k] + 1j * z[2 * k + 1])
                _gram(b, n, m, x)
                cur = _trace_inv(x, m, L)
                ac[p] = ac[p] + 0.5 * h * (prev + cur)
                prev = cur
            for i in range(m):
                for j in range(m):
                    fin[p, i, j] = x[i * m + j]
    free(b)
    free(x)
    free(L)
    free(z)
    return final, acc
