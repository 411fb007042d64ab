"""Hypergeometric functions of one and two Hermitian matrix arguments.

Three evaluation routes are provided and cross-checked in the tests:

* the truncated zonal series ``sum_k sum_{tau |- k} coeff * C_tau(X) / k!``;
* the determinantal (Gross-Richards) reduction to scalar functions of the
  eigenvalues divided by a Vandermonde determinant;
* for two arguments, a determinant of scalar functions at the products
  ``b_l c_f``.

The determinantal routes need distinct eigenvalues; :func:`hyp_matrix` falls
back to the series when the relative gap drops below ``COINCIDENCE_RTOL``, and
to the confluent limit of the determinant when the series has not converged.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .scalarfn import HypParams, PoleError, hyp1f1, hyp_scalar, _gamma_sign
from .symfun import (
    COINCIDENCE_RTOL,
    MAX_WEIGHT,
    gen_pochhammer,
    min_relative_gap,
    partitions_of,
    schur,
    syt_count,
    zonal,
)

DEFAULT_WEIGHT = 30
TRUNCATION_RTOL = 1e-10
HERMITIAN_RTOL = 1e-12


class CoincidenceError(ValueError):
    """Raised by determinantal routes when eigenvalues are too close."""


class HermitianMatrix:
    """Complex Hermitian matrix with a lazily cached spectral decomposition.

    Eigenvalues are stored in descending order.  The cache is filled by a
    single attribute assignment, so concurrent first access can at worst
    duplicate the ``eigh`` call.
    """

    def __init__(self, entries, _spectrum=None):
        a = np.array(entries, dtype=complex)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite matrix entry")
        scale = max(np.max(np.abs(a)), 1e-300)
        if np.max(np.abs(a - a.conj().T)) > HERMITIAN_RTOL * scale:
            raise ValueError("matrix is not Hermitian")
        self.entries = 0.5 * (a + a.conj().T)
        self.entries.setflags(write=False)
        self._spectrum = _spectrum

    @classmethod
    def from_spectrum(cls, eigs, rotation_seed=None):
        """``U diag(eigs) U*`` with ``U`` Haar-random from ``rotation_seed``
        (identity when the seed is ``None``)."""
        eigs = np.asarray(eigs, dtype=float).ravel()
        m = eigs.shape[0]
        if rotation_seed is None:
            u = np.eye(m, dtype=complex)
        else:
            u = haar_unitary(m, np.random.default_rng(rotation_seed))
        order = np.argsort(eigs)[::-1]
        lam = eigs[order]
        vecs = u[:, order]
        mat = (vecs * lam) @ vecs.conj().T
        return cls(mat, _spectrum=(lam, vecs))

    @classmethod
    def zeros(cls, m: int):
        return cls.from_spectrum(np.zeros(m))

    @classmethod
    def identity(cls, m: int):
        return cls.from_spectrum(np.ones(m))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    def _spec(self):
        spec = self._spectrum
        if spec is None:
            w, v = np.linalg.eigh(self.entries)
            spec = (w[::-1].copy(), v[:, ::-1].copy())
            self._spectrum = spec
        return spec

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._spec()[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._spec()[1]

    def sqrt_psd(self) -> np.ndarray:
        """Square root of the matrix with negative eigenvalues clamped to 0."""
        lam, v = self._spec()
        return (v * np.sqrt(np.maximum(lam, 0.0))) @ v.conj().T

    def is_psd(self, tol: float = 1e-12) -> bool:
        lam = self.eigenvalues
        return bool(lam[-1] >= -tol * max(1.0, abs(lam[0])))

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __repr__(self):
        return f"HermitianMatrix(eigenvalues={np.array2string(self.eigenvalues, precision=6)})"


def haar_unitary(m: int, rng) -> np.ndarray:
    """Haar-distributed ``m x m`` unitary (QR of a complex Ginibre matrix)."""
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def spectrum_of(x) -> np.ndarray:
    """Descending eigenvalues of a HermitianMatrix or an eigenvalue tuple."""
    if isinstance(x, HermitianMatrix):
        return x.eigenvalues
    x = np.asarray(x)
    if x.ndim == 2:
        return HermitianMatrix(x).eigenvalues
    return np.sort(np.asarray(x, dtype=float).ravel())[::-1]


def vandermonde(x) -> float:
    """``prod_{i<j} (x_i - x_j)``, in the given order."""
    x = np.asarray(x, dtype=float)
    m = len(x)
    return math.prod(x[i] - x[j] for i in range(m) for j in range(i + 1, m))


# -- multivariate gamma -------------------------------------------------------

def _check_multigamma_domain(m: int, a: float):
    if a - m + 1 <= 0:
        raise PoleError(f"multigamma({m}, {a}) needs a > {m - 1}")


def log_multigamma(m: int, a: float) -> float:
    """``log Gamma_m(a)`` with the ``pi^{m(m-1)/2}`` factor included."""
    _check_multigamma_domain(m, a)
    return 0.5 * m * (m - 1) * math.log(math.pi) + sum(math.lgamma(a - j) for j in range(m))


def multigamma(m: int, a: float) -> float:
    """Complex multivariate gamma ``pi^{m(m-1)/2} prod_{j=1}^m Gamma(a-j+1)``."""
    return math.exp(log_multigamma(m, a))


def multigamma_ratio(m: int, a: float, b: float) -> float:
    """``Gamma_m(a) / Gamma_m(b)``, computed in log space (pi-free)."""
    _check_multigamma_domain(m, a)
    _check_multigamma_domain(m, b)
    return math.exp(sum(math.lgamma(a - j) - math.lgamma(b - j) for j in range(m)))


def _log_abs_gamma_prod(m: int, a: float):
    """``log|prod_j Gamma(a-j+1)|`` and its sign (no domain restriction)."""
    logv, sign = 0.0, 1.0
    for j in range(m):
        if a - j <= 0 and float(a - j).is_integer():
            raise PoleError(f"Gamma pole at {a - j}")
        logv += math.lgamma(a - j)
        sign *= _gamma_sign(a - j)
    return logv, sign


# -- one matrix argument ------------------------------------------------------

class SeriesResult(NamedTuple):
    value: float
    last_shell: float
    truncation_warning: bool


def _coefficient(params: HypParams, tau) -> float:
    num = math.prod(gen_pochhammer(a, tau) for a in params.upper)
    den = math.prod(gen_pochhammer(b, tau) for b in params.lower)
    if den == 0.0:
        raise PoleError(f"generalized Pochhammer of a lower parameter vanishes at {tuple(tau)}")
    return num / den


def hyp_matrix_series(params: HypParams, X, max_weight: int = DEFAULT_WEIGHT) -> SeriesResult:
    """Truncated zonal series of ``pFq(params; X)``.

    ``last_shell`` is the magnitude of the weight-``max_weight`` contribution
    and serves as the truncation-error estimate.
    """
    if max_weight > MAX_WEIGHT:
        raise ValueError(f"max_weight {max_weight} exceeds {MAX_WEIGHT}")
    x = spectrum_of(X)
    m = len(x)
    total = 0.0
    shell = 0.0
    for k in range(max_weight + 1):
        shell = 0.0
        for tau in partitions_of(k, m):
            c = _coefficient(params, tau)
            if c != 0.0:
                shell += c * zonal(tau, x)
        shell /= math.factorial(k)
        total += shell
    last = abs(shell)
    return SeriesResult(total, last, last > TRUNCATION_RTOL * abs(total))


def scalar_hyp(params: HypParams, z: float) -> float:
    """Scalar pFq with the large-argument-safe 1F1 and 0F0 where applicable."""
    if params.p == 0 and params.q == 0:
        return math.exp(z)
    if params.p == 1 and params.q == 1:
        return hyp1f1(params.upper[0], params.lower[0], z)
    return hyp_scalar(params, z)


def _shifted_columns(params: HypParams, m: int):
    """Column ``j`` (0-based) uses every parameter shifted by ``-j``.

    This is the parameter bookkeeping shared by the one- and two-argument
    determinantal formulas.
    """
    return [params.shifted(-j) for j in range(m)]


def _require_distinct(x, what="argument"):
    if len(x) > 1 and min_relative_gap(x) < COINCIDENCE_RTOL:
        raise CoincidenceError(f"eigenvalues of the {what} are too close for the determinantal route")


def hyp_matrix_det(params: HypParams, X) -> float:
    """Determinantal evaluation ``det(x_i^{m-j} pFq(a-j+1; b-j+1; x_i)) / V(x)``."""
    x = spectrum_of(X)
    m = len(x)
    if m == 1:
        return scalar_hyp(params, x[0])
    _require_distinct(x)
    cols = _shifted_columns(params, m)
    mat = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            mat[i, j] = x[i] ** (m - 1 - j) * scalar_hyp(cols[j], x[i])
    return float(np.linalg.det(mat) / vandermonde(x))


def _clusters(x):
    """Group descending eigenvalues whose gap is below the coincidence threshold
    into ``(mean, multiplicity)`` pairs."""
    scale = float(np.max(np.abs(x))) if len(x) else 0.0
    groups = [[x[0]]]
    for v in x[1:]:
        if groups[-1][-1] - v <= COINCIDENCE_RTOL * scale:
            groups[-1].append(v)
        else:
            groups.append([v])
    return [(float(np.mean(g)), len(g)) for g in groups]


def _power_derivative(x: float, p: int, k: int) -> float:
    if k > p:
        return 0.0
    return math.perm(p, k) * x ** (p - k)


def _hyp_derivative(params: HypParams, x: float, s: int) -> float:
    """``d^s/dx^s pFq(a; b; x) = (a)_s / (b)_s pFq(a+s; b+s; x)``."""
    if s == 0:
        return scalar_hyp(params, x)
    c = math.prod(math.prod(a + i for i in range(s)) for a in params.upper)
    c /= math.prod(math.prod(b + i for i in range(s)) for b in params.lower)
    return 0.0 if c == 0.0 else c * scalar_hyp(params.shifted(s), x)


def hyp_matrix_confluent(params: HypParams, X) -> float:
    """Limit of the determinantal formula at repeated eigenvalues.

    A cluster of multiplicity ``k`` contributes its row function and its
    first ``k - 1`` derivatives; the Vandermonde is treated the same way, so
    the ratio is the exact confluent limit.
    """
    x = spectrum_of(X)
    m = len(x)
    if m == 1:
        return scalar_hyp(params, x[0])
    cols = _shifted_columns(params, m)
    g = np.empty((m, m))
    v = np.empty((m, m))
    row = 0
    for val, k in _clusters(x):
        for r in range(k):
            for j in range(m):
                p = m - 1 - j
                g[row, j] = sum(math.comb(r, s) * _power_derivative(val, p, r - s) * _hyp_derivative(cols[j], val, s)
                                for s in range(r + 1))
                v[row, j] = _power_derivative(val, p, r)
            row += 1
    return float(np.linalg.det(g) / np.linalg.det(v))


def hyp_matrix(params: HypParams, X, max_weight: int = DEFAULT_WEIGHT) -> float:
    """Composite evaluator: determinantal route, series near coincidences.

    Beyond spectral radius 1, or if the series is still truncated at
    ``max_weight``, the confluent determinant is used instead: large
    arguments either need more terms or cancel badly.
    """
    x = spectrum_of(X)
    if len(x) > 1 and min_relative_gap(x) < COINCIDENCE_RTOL:
        if np.max(np.abs(x)) <= 1.0:
            ser = hyp_matrix_series(params, x, max_weight)
            if not ser.truncation_warning:
                return ser.value
        return hyp_matrix_confluent(params, x)
    return hyp_matrix_det(params, x)


# -- two matrix arguments -----------------------------------------------------

def _two_matrix_series(params: HypParams, b, c, max_weight: int) -> float:
    m = len(b)
    total = 0.0
    for k in range(max_weight + 1):
        fk = math.factorial(k)
        for tau in partitions_of(k, m):
            coeff = _coefficient(params, tau)
            if coeff == 0.0:
                continue
            ct_i = zonal(tau, np.ones(m))
            total += coeff * zonal(tau, b) * zonal(tau, c) / (ct_i * fk)
    return total


def two_matrix_prefactor(params: HypParams, m: int) -> float:
    """Constant in front of ``det(pFq(mu+1; phi+1; b_l c_f)) / (V(B) V(C))``.

    With ``a_i = m + mu_i`` and ``b_j = m + phi_j`` it is
    ``G(m) prod_i Gamma(mu_i+1)^m / G(m+mu_i) prod_j G(m+phi_j) / Gamma(phi_j+1)^m``
    where ``G(a) = prod_{j=1}^m Gamma(a-j+1)``.
    """
    logv, sign = _log_abs_gamma_prod(m, float(m))
    for a in params.upper:
        mu = a - m
        lg, sg = _log_abs_gamma_prod(m, a)
        logv += m * math.lgamma(mu + 1.0) - lg
        sign *= _gamma_sign(mu + 1.0) ** m * sg
    for b in params.lower:
        phi = b - m
        lg, sg = _log_abs_gamma_prod(m, b)
        logv += lg - m * math.lgamma(phi + 1.0)
        sign *= sg * _gamma_sign(phi + 1.0) ** m
    return sign * math.exp(logv)


def _two_matrix_det(params: HypParams, b, c) -> float:
    m = len(b)
    _require_distinct(b, "first argument")
    _require_distinct(c, "second argument")
    inner = params.shifted(-(m - 1))
    mat = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            mat[i, j] = scalar_hyp(inner, b[i] * c[j])
    det = np.linalg.det(mat) if m > 1 else mat[0, 0]
    return float(two_matrix_prefactor(params, m) * det / (vandermonde(b) * vandermonde(c)))


def hyp_two_matrix(params: HypParams, B, C, mode: str = "determinant",
                   max_weight: int = DEFAULT_WEIGHT) -> float:
    """``pFq(params; B, C)`` by ``mode`` in {"series", "determinant", "auto"}.

    ``auto`` uses the determinant unless either spectrum has a near
    coincidence.
    """
    b, c = spectrum_of(B), spectrum_of(C)
    if len(b) != len(c):
        raise ValueError("arguments must have the same dimension")
    if mode == "series":
        return _two_matrix_series(params, b, c, max_weight)
    if mode == "determinant":
        return _two_matrix_det(params, b, c)
    if mode == "auto":
        try:
            return _two_matrix_det(params, b, c)
        except CoincidenceError:
            return _two_matrix_series(params, b, c, max_weight)
    raise ValueError(f"unknown mode {mode!r}")


def harish_chandra_0f0(B, C) -> float:
    """``0F0(B, C) = G(m) det(exp(b_l c_f)) / (V(B) V(C))``."""
    return hyp_two_matrix(HypParams(), B, C, mode="determinant")


def hua_identity_residual(f_coeffs, B, C, max_weight: int = DEFAULT_WEIGHT,
                          divide_by_dimension: bool = False) -> float:
    """Residual of ``det(f(b_i c_j)) / (V(B) V(C)) = sum_tau prod_r e_{k_r+m-r} s_tau(B) s_tau(C)``.

    ``f(z) = sum_k f_coeffs[k] z^k``.  ``divide_by_dimension`` additionally
    divides each term by ``s_tau(1, ..., 1)``; that variant does not hold and
    is kept only so the tests can demonstrate it.
    """
    e = np.asarray(f_coeffs, dtype=float)
    b, c = spectrum_of(B), spectrum_of(C)
    m = len(b)
    _require_distinct(b, "first argument")
    _require_distinct(c, "second argument")
    fmat = np.polynomial.polynomial.polyval(np.outer(b, c), e)
    lhs = (np.linalg.det(fmat) if m > 1 else fmat[0, 0]) / (vandermonde(b) * vandermonde(c))
    ones = np.ones(m)
    rhs = 0.0
    for k in range(max_weight + 1):
        for tau in partitions_of(k, m):
            idx = [p + m - 1 - r for r, p in enumerate(tau.padded(m))]
            if idx[0] >= len(e):
                continue
            coeff = math.prod(e[i] for i in idx)
            if coeff == 0.0:
                continue
            term = coeff * schur(tau, b) * schur(tau, c)
            if divide_by_dimension:
                term /= schur(tau, ones)
            rhs += term
    return float(abs(lhs - rhs))


__all__ = [
    "CoincidenceError",
    "HermitianMatrix",
    "SeriesResult",
    "haar_unitary",
    "harish_chandra_0f0",
    "hua_identity_residual",
    "hyp_matrix",
    "hyp_matrix_confluent",
    "hyp_matrix_det",
    "hyp_matrix_series",
    "hyp_two_matrix",
    "log_multigamma",
    "multigamma",
    "multigamma_ratio",
    "spectrum_of",
    "syt_count",
    "two_matrix_prefactor",
    "vandermonde",
]
