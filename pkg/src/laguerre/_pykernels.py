"""Pure NumPy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
The compiled module is preferred when importable; see ``laguerre._kernels``.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


def _mix(z):
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def _key(seed, stream, path, step, node):
    h = _mix(np.uint64(seed) ^ _GAMMA)
    h = _mix(h + np.uint64(stream) * _GAMMA)
    h = _mix(h + path * _GAMMA)
    h = _mix(h + np.uint64(step) * _GAMMA)
    return _mix(h + np.uint64(node) * _GAMMA)


def counter_normals(seed, stream, paths, step, node, n):
    """Standard normals addressed by ``(seed, stream, path, step, node, k)``.

    Returns an array of shape ``(len(paths), n)``.  Each value depends only
    on its address, so any subset of paths can be generated in any order.
    """
    paths = np.asarray(paths, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _key(seed, stream, paths, step, node)[:, None]
        npairs = (n + 1) // 2
        j = np.arange(npairs, dtype=np.uint64)[None, :]
        b1 = _mix(h + (np.uint64(2) * j + np.uint64(1)) * _GAMMA)
        b2 = _mix(h + (np.uint64(2) * j + np.uint64(2)) * _GAMMA)
    u1 = ((b1 >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53
    u2 = (b2 >> np.uint64(11)).astype(np.float64) * _INV53
    r = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * math.pi * u2
    out = np.empty((paths.shape[0], 2 * npairs))
    out[:, 0::2] = r * np.cos(ang)
    out[:, 1::2] = r * np.sin(ang)
    return out[:, :n]


def pfq_series(upper, lower, z, rtol=1e-16, max_terms=500, n_small=3):
    """Scalar pFq series evaluated elementwise.

    Stops an element once ``n_small`` consecutive terms fall below
    ``rtol * |partial sum|``.  Returns ``(values, converged)``.
    """
    upper = np.asarray(upper, dtype=float)
    lower = np.asarray(lower, dtype=float)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    total = np.ones_like(z)
    term = np.ones_like(z)
    small = np.zeros(z.shape, dtype=np.int64)
    active = np.ones(z.shape, dtype=bool)
    for k in range(max_terms):
        if not active.any():
            break
        ratio = np.prod(upper + k) / np.prod(lower + k) / (k + 1)
        term = np.where(active, term * ratio * z, term)
        total = np.where(active, total + term, total)
        tiny = np.abs(term) <= rtol * np.abs(total)
        small = np.where(active, np.where(tiny, small + 1, 0), small)
        active &= small < n_small
    return total, ~active


def bessel_i_series(nu, z, rtol=1e-16, max_terms=500, n_small=3):
    """Modified Bessel ``I_nu(z)`` for ``z >= 0`` from its power series."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    q = 0.25 * z * z
    with np.errstate(divide="ignore", invalid="ignore"):
        lead = np.where(z > 0, np.exp(nu * np.log(0.5 * z) - math.lgamma(nu + 1.0)), 0.0)
    if nu == 0.0:
        lead = np.ones_like(z)
    total = lead.copy()
    term = lead.copy()
    small = np.zeros(z.shape, dtype=np.int64)
    active = z > 0
    for k in range(max_terms):
        if not active.any():
            break
        term = np.where(active, term * q / ((k + 1.0) * (nu + k + 1.0)), term)
        total = np.where(active, total + term, total)
        tiny = np.abs(term) <= rtol * np.abs(total)
        small = np.where(active, np.where(tiny, small + 1, 0), small)
        active &= small < n_small
    return total


def struve_l_series(nu, z, rtol=1e-16, max_terms=500, n_small=3):
    """Modified Struve ``L_nu(z)`` for ``z >= 0`` from its power series."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    q = 0.25 * z * z
    with np.errstate(divide="ignore"):
        lead = np.where(
            z > 0,
            np.exp((nu + 1.0) * np.log(0.5 * z) - math.lgamma(1.5) - math.lgamma(nu + 1.5)),
            0.0,
        )
    total = lead.copy()
    term = lead.copy()
    small = np.zeros(z.shape, dtype=np.int64)
    active = z > 0
    for k in range(max_terms):
        if not active.any():
            break
        term = np.where(active, term * q / ((k + 1.5) * (nu + k + 1.5)), term)
        total = np.where(active, total + term, total)
        tiny = np.abs(term) <= rtol * np.abs(total)
        small = np.where(active, np.where(tiny, small + 1, 0), small)
        active &= small < n_small
    return total


def _drift(lam, delta):
    m = lam.shape[-1]
    pos = np.maximum(lam, 0.0)
    out = np.full(lam.shape, delta)
    for i in range(m):
        for k in range(m):
            if k != i:
                out[..., i] += (pos[..., i] + pos[..., k]) / (lam[..., i] - lam[..., k])
    return 2.0 * out


def _valid(lam):
    ok = lam[..., -1] >= 0.0
    for i in range(lam.shape[-1] - 1):
        ok &= lam[..., i] > lam[..., i + 1]
    return ok


def _eigen_substep(lam, delta, h, dw, seed, stream, path, step, node, depth, stats):
    prop = lam + 2.0 * np.sqrt(np.maximum(lam, 0.0)) * dw + _drift(lam, delta) * h
    if _valid(prop):
        return prop
    if depth >= MAX_HALVINGS:
        stats[1] += 1
        return np.sort(np.maximum(prop, 0.0))[::-1].copy()
    stats[0] += 1
    z = counter_normals(seed, stream + 1, np.array([path]), step, node, lam.shape[0])[0]
    dw1 = 0.5 * dw + 0.5 * math.sqrt(h) * z
    dw2 = dw - dw1
    mid = _eigen_substep(lam, delta, 0.5 * h, dw1, seed, stream, path, step, 2 * node, depth + 1, stats)
    return _eigen_substep(mid, delta, 0.5 * h, dw2, seed, stream, path, step, 2 * node + 1, depth + 1, stats)


MAX_HALVINGS = 20


def eigen_step(lam, delta, h, dw, seed=0, stream=0, path=0, step=0):
    """One guarded Euler step of the eigenvalue system for a single path.

    Returns ``(new_lambdas, n_halvings, n_forced)``.
    """
    stats = [0, 0]
    out = _eigen_substep(
        np.asarray(lam, dtype=float), float(delta), float(h), np.asarray(dw, dtype=float),
        seed, stream, path, step, 1, 0, stats,
    )
    return out, stats[0], stats[1]


def eigen_paths(lam0, delta, t_end, n_steps, seed, stream, path_start, n_paths, record=False):
    """Integrate the eigenvalue SDE for ``n_paths`` consecutive path indices.

    Returns ``(final, trajectory_or_None, n_halvings, n_forced)``; the
    trajectory has shape ``(n_paths, n_steps + 1, m)``.
    """
    lam0 = np.asarray(lam0, dtype=float)
    m = lam0.shape[0]
    h = t_end / n_steps
    sqh = math.sqrt(h)
    paths = np.arange(path_start, path_start + n_paths, dtype=np.uint64)
    lam = np.tile(lam0, (n_paths, 1))
    traj = None
    if record:
        traj = np.empty((n_paths, n_steps + 1, m))
        traj[:, 0] = lam
    stats = [0, 0]
    for s in range(n_steps):
        dw = sqh * counter_normals(seed, stream, paths, s, 1, m)
        prop = lam + 2.0 * np.sqrt(np.maximum(lam, 0.0)) * dw + _drift(lam, delta) * h
        bad = ~_valid(prop)
        for i in np.flatnonzero(bad):
            stats[0] += 1
            z = counter_normals(seed, stream + 1, paths[i:i + 1], s, 1, m)[0]
            dw1 = 0.5 * dw[i] + 0.5 * sqh * z
            dw2 = dw[i] - dw1
            mid = _eigen_substep(lam[i], delta, 0.5 * h, dw1, seed, stream, int(paths[i]), s, 2, 1, stats)
            prop[i] = _eigen_substep(mid, delta, 0.5 * h, dw2, seed, stream, int(paths[i]), s, 3, 1, stats)
        lam = prop
        if record:
            traj[:, s + 1] = lam
    return lam, traj, stats[0], stats[1]


def gram_paths(b0, h, n_steps, seed, stream, path_start, n_paths):
    """Exact Laguerre paths ``X = B^* B`` with ``B`` a complex Brownian matrix
    started at ``b0`` (``n x m``).

    Returns ``(final, int_trace_inv)``: the final states, shape
    ``(n_paths, m, m)``, and the trapezoid integral of ``tr(X^{-1})``.
    """
    b0 = np.asarray(b0, dtype=complex)
    n, m = b0.shape
    paths = np.arange(path_start, path_start + n_paths, dtype=np.uint64)
    b = np.broadcast_to(b0, (n_paths, n, m)).copy()
    sqh = math.sqrt(h)

    def gram(b):
        x = np.conj(np.swapaxes(b, 1, 2)) @ b
        return 0.5 * (x + np.conj(np.swapaxes(x, 1, 2)))

    def trinv(x):
        with np.errstate(divide="ignore"):
            linv = np.linalg.inv(np.linalg.cholesky(x))
        return np.sum(np.abs(linv) ** 2, axis=(1, 2))

    x = gram(b)
    prev = trinv(x)
    acc = np.zeros(n_paths)
    for s in range(n_steps):
        z = counter_normals(seed, stream, paths, s, 0, 2 * n * m).reshape(n_paths, n, m, 2)
        b = b + sqh * (z[..., 0] + 1j * z[..., 1])
        x = gram(b)
        cur = trinv(x)
        acc += 0.5 * h * (prev + cur)
        prev = cur
    return x, acc
