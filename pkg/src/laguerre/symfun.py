"""Partitions, Schur functions, generalized Pochhammer symbols and zonal
polynomials (complex case).

Zonal polynomials are normalized so that ``sum(zonal(tau, x) for tau |- k)``
equals ``sum(x) ** k``.  In the complex case this makes ``C_tau = f_tau *
s_tau`` where ``f_tau`` is the number of standard Young tableaux of shape
``tau``.
"""
from __future__ import annotations

from functools import lru_cache
from math import factorial, prod

import numpy as np

# relative eigenvalue gap below which the bialternant is abandoned
COINCIDENCE_RTOL = 1e-6
MAX_WEIGHT = 40


class Partition(tuple):
    """Non-increasing tuple of positive integers.

    Trailing zeros are stripped on construction, so ``Partition((2, 1, 0))``
    and ``Partition((2, 1))`` compare equal.  Use :meth:`padded` to get a
    fixed-length view.
    """

    def __new__(cls, parts=()):
        parts = [int(p) for p in parts]
        if any(p < 0 for p in parts):
            raise ValueError(f"negative part in {parts}")
        if any(parts[i] < parts[i + 1] for i in range(len(parts) - 1)):
            raise ValueError(f"parts must be non-increasing: {parts}")
        while parts and parts[-1] == 0:
            parts.pop()
        return super().__new__(cls, parts)

    @property
    def weight(self) -> int:
        return sum(self)

    @property
    def length(self) -> int:
        return len(self)

    def padded(self, m: int) -> tuple:
        if m < len(self):
            raise ValueError(f"partition {tuple(self)} has more than {m} parts")
        return tuple(self) + (0,) * (m - len(self))

    def conjugate(self) -> "Partition":
        if not self:
            return Partition()
        return Partition(sum(1 for p in self if p > j) for j in range(self[0]))

    def hook_lengths(self):
        conj = self.conjugate()
        return [
            [self[i] - j + conj[j] - i - 1 for j in range(self[i])]
            for i in range(len(self))
        ]

    def __repr__(self):
        return f"Partition({tuple(self)})"


@lru_cache(maxsize=None)
def _partitions(k: int, m: int, largest: int) -> tuple:
    if k == 0:
        return ((),)
    if m == 0:
        return ()
    out = []
    for first in range(min(k, largest), 0, -1):
        for rest in _partitions(k - first, m - 1, first):
            out.append((first,) + rest)
    return tuple(out)


def partitions_of(k: int, m: int) -> list[Partition]:
    """All partitions of ``k`` with at most ``m`` parts, reverse-lexicographic."""
    if k < 0 or m < 1:
        raise ValueError("need k >= 0 and m >= 1")
    return [Partition(p) for p in _partitions(k, m, k)]


def gen_pochhammer(a: float, tau) -> float:
    """Generalized (complex-case) Pochhammer symbol ``(a)_tau``.

    Computed as ``prod_i (a - i + 1)_{k_i}`` with rising factorials, never
    through gamma ratios.  At a lattice point the product is simply zero,
    which is the analytic value a terminating series needs.
    """
    out = 1.0
    for i, k in enumerate(tau):
        base = a - i
        for j in range(k):
            out *= base + j
    return out


def syt_count(tau) -> int:
    """Number of standard Young tableaux of shape ``tau`` (hook-length formula)."""
    tau = Partition(tau)
    hooks = prod(h for row in tau.hook_lengths() for h in row)
    return factorial(tau.weight) // hooks


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite entry in argument")
    return x


def complete_homogeneous(x, kmax: int) -> np.ndarray:
    """``[h_0(x), ..., h_kmax(x)]``."""
    h = np.zeros(kmax + 1)
    h[0] = 1.0
    for xv in x:
        for k in range(1, kmax + 1):
            h[k] += xv * h[k - 1]
    return h


def elementary(x, kmax: int) -> np.ndarray:
    """``[e_0(x), ..., e_kmax(x)]`` (zero beyond ``len(x)``)."""
    e = np.zeros(kmax + 1)
    e[0] = 1.0
    for xv in x:
        for k in range(min(kmax, len(x)), 0, -1):
            e[k] += xv * e[k - 1]
    return e


def schur_bialternant(tau, x) -> float:
    x = _as_vector(x)
    m = len(x)
    parts = np.array(Partition(tau).padded(m)) + np.arange(m - 1, -1, -1)
    num = np.linalg.det(x[:, None] ** parts[None, :])
    vdm = prod(x[i] - x[j] for i in range(m) for j in range(i + 1, m))
    return float(num / vdm)


def schur_jacobi_trudi(tau, x, dual: bool = False) -> float:
    """``det(h_{tau_i - i + j})``, or ``det(e_{tau'_i - i + j})`` when ``dual``.

    Both are polynomial in ``x`` and therefore well behaved at coincident
    arguments.
    """
    x = _as_vector(x)
    tau = Partition(tau)
    if dual:
        tau = tau.conjugate()
    n = len(tau)
    if n == 0:
        return 1.0
    kmax = tau[0] + n - 1
    seq = elementary(x, kmax) if dual else complete_homogeneous(x, kmax)
    mat = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            idx = tau[i] - i + j
            if 0 <= idx <= kmax:
                mat[i, j] = seq[idx]
    return float(np.linalg.det(mat)) if n > 1 else float(mat[0, 0])


def min_relative_gap(x) -> float:
    x = _as_vector(x)
    if len(x) < 2:
        return np.inf
    scale = np.max(np.abs(x))
    if scale == 0.0:
        return 0.0
    xs = np.sort(x)
    return float(np.min(np.diff(xs)) / scale)


def schur(tau, x) -> float:
    """Schur polynomial ``s_tau(x_1, ..., x_m)``.

    Uses the ratio of alternants for well separated arguments and the
    Jacobi-Trudi determinant once the smallest gap drops below
    ``COINCIDENCE_RTOL`` times the spectral radius.
    """
    x = _as_vector(x)
    tau = Partition(tau)
    if tau.length > len(x):
        raise ValueError(f"partition {tuple(tau)} longer than argument ({len(x)})")
    if tau.weight == 0:
        return 1.0
    if len(x) == 1:
        return float(x[0] ** tau.weight)
    if min_relative_gap(x) < COINCIDENCE_RTOL:
        return schur_jacobi_trudi(tau, x)
    return schur_bialternant(tau, x)


def zonal(tau, x) -> float:
    """Complex zonal polynomial ``C_tau`` at a matrix with eigenvalues ``x``."""
    x = _as_vector(x)
    tau = Partition(tau)
    if tau.length > len(x):
        raise ValueError(f"partition {tuple(tau)} longer than argument ({len(x)})")
    return syt_count(tau) * schur(tau, x)
