"""Scalar special functions: generalized hypergeometric series, modified
Bessel ``I_nu`` and modified Struve ``L_2``.

Series evaluation stops once three consecutive terms fall below
``1e-16 * |partial sum|`` (a single small term can be an accidental zero for
special parameters) and gives up after 500 terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

RTOL = 1e-16
MAX_TERMS = 500
N_SMALL = 3
# beyond this |z| the robust 1F1 switches to its asymptotic expansion
ASYMPTOTIC_Z = 50.0


class SeriesDivergenceError(ArithmeticError):
    pass


class SeriesConvergenceError(ArithmeticError):
    pass


class PoleError(ArithmeticError):
    pass


def _is_nonpositive_int(a: float) -> bool:
    return a <= 0 and float(a).is_integer()


@dataclass(frozen=True)
class HypParams:
    """Upper and lower parameters of a pFq."""

    upper: tuple = field(default_factory=tuple)
    lower: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "upper", tuple(float(a) for a in self.upper))
        object.__setattr__(self, "lower", tuple(float(b) for b in self.lower))
        for b in self.lower:
            if _is_nonpositive_int(b):
                raise PoleError(f"lower parameter {b} is a non-positive integer")

    @property
    def p(self) -> int:
        return len(self.upper)

    @property
    def q(self) -> int:
        return len(self.lower)

    def shifted(self, s: float) -> "HypParams":
        return HypParams(tuple(a + s for a in self.upper), tuple(b + s for b in self.lower))


def _terminates(params: HypParams) -> bool:
    return any(_is_nonpositive_int(a) for a in params.upper)


def hyp_scalar(params: HypParams, z: float) -> float:
    """``pFq(upper; lower; z)`` by direct summation of the defining series."""
    z = float(z)
    if z == 0.0:
        return 1.0
    if not _terminates(params):
        if params.p > params.q + 1:
            raise SeriesDivergenceError(f"{params.p}F{params.q} diverges for z != 0")
        if params.p == params.q + 1 and abs(z) >= 1.0:
            raise SeriesDivergenceError(f"{params.p}F{params.q} needs |z| < 1, got {z}")
    vals, conv = _kernels.pfq_series(
        np.array(params.upper), np.array(params.lower), np.array([z]), RTOL, MAX_TERMS, N_SMALL
    )
    if not conv[0]:
        raise SeriesConvergenceError(
            f"{params.p}F{params.q}{params.upper};{params.lower} at z={z} did not converge in {MAX_TERMS} terms"
        )
    return float(vals[0])


def hyp_scalar_vec(params: HypParams, z) -> np.ndarray:
    """Vectorized :func:`hyp_scalar` (same stopping rule, same errors)."""
    z = np.asarray(z, dtype=float)
    if not _terminates(params):
        if params.p > params.q + 1 and np.any(z != 0):
            raise SeriesDivergenceError(f"{params.p}F{params.q} diverges for z != 0")
        if params.p == params.q + 1 and np.any(np.abs(z) >= 1.0):
            raise SeriesDivergenceError(f"{params.p}F{params.q} needs |z| < 1")
    vals, conv = _kernels.pfq_series(
        np.array(params.upper), np.array(params.lower), z.ravel(), RTOL, MAX_TERMS, N_SMALL
    )
    if not np.all(conv):
        raise SeriesConvergenceError(f"{params.p}F{params.q} series did not converge")
    return vals.reshape(z.shape)


def _gamma_sign(x: float) -> float:
    if x > 0:
        return 1.0
    return -1.0 if math.ceil(-x) % 2 else 1.0


def _asymptotic_sum(p1: float, p2: float, w: float) -> float:
    """``sum_s (p1)_s (p2)_s / s! * w**s`` truncated at its smallest term."""
    total, term = 1.0, 1.0
    for s in range(200):
        nxt = term * (p1 + s) * (p2 + s) / (s + 1) * w
        if abs(nxt) >= abs(term) and s > 0:
            break
        term = nxt
        total += term
        if abs(term) < RTOL * abs(total):
            break
    return total


def hyp1f1(a: float, b: float, z: float) -> float:
    """Confluent ``1F1(a; b; z)`` usable for large ``|z|``.

    Uses the defining series for moderate positive ``z``, Kummer's
    transformation ``e^z 1F1(b-a; b; -z)`` for moderate negative ``z`` and the
    leading asymptotic expansion beyond ``|z| = 50``.
    """
    a, b, z = float(a), float(b), float(z)
    if _is_nonpositive_int(b):
        raise PoleError(f"b={b} is a non-positive integer")
    if z == 0.0 or a == 0.0:
        return 1.0
    if a == b:
        return math.exp(z)
    if _is_nonpositive_int(a) and -a <= 60:
        return hyp_scalar(HypParams((a,), (b,)), z)
    if z < 0 and _is_nonpositive_int(b - a) and a - b <= 60:
        return math.exp(z) * hyp_scalar(HypParams((b - a,), (b,)), -z)
    if abs(z) <= ASYMPTOTIC_Z:
        if z > 0:
            return hyp_scalar(HypParams((a,), (b,)), z)
        return math.exp(z) * hyp_scalar(HypParams((b - a,), (b,)), -z)
    if z > 0:
        lead = math.lgamma(b) - math.lgamma(a) + z + (a - b) * math.log(z)
        sign = _gamma_sign(b) * _gamma_sign(a)
        return sign * math.exp(lead) * _asymptotic_sum(b - a, 1.0 - a, 1.0 / z)
    zz = -z
    lead = math.lgamma(b) - math.lgamma(b - a) - a * math.log(zz)
    sign = _gamma_sign(b) * _gamma_sign(b - a)
    return sign * math.exp(lead) * _asymptotic_sum(a, 1.0 + a - b, 1.0 / zz)


def bessel_i(nu: float, z: float) -> float:
    """Modified Bessel function ``I_nu(z)`` from its power series.

    Negative integer orders are mapped through ``I_{-n} = I_n``.
    """
    nu, z = float(nu), float(z)
    if nu <= -1.0:
        if nu.is_integer():
            nu = -nu
        else:
            raise ValueError(f"order {nu} outside (-1, inf)")
    if z < 0:
        raise ValueError("bessel_i needs z >= 0")
    return float(_kernels.bessel_i_series(nu, np.array([z]), RTOL, MAX_TERMS, N_SMALL)[0])


def bessel_i_vec(nu: float, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if nu <= -1.0 and float(nu).is_integer():
        nu = -nu
    return _kernels.bessel_i_series(float(nu), z.ravel(), RTOL, MAX_TERMS, N_SMALL).reshape(z.shape)


def struve_l(order: int, z: float) -> float:
    """Modified Struve function ``L_2(z)``; only order 2 is supported."""
    if order != 2:
        raise ValueError(f"unsupported Struve order {order}; only 2 is implemented")
    if z < 0:
        raise ValueError("struve_l needs z >= 0")
    return float(_kernels.struve_l_series(2.0, np.array([float(z)]), RTOL, MAX_TERMS, N_SMALL)[0])


def struve_l_vec(order: int, z) -> np.ndarray:
    if order != 2:
        raise ValueError(f"unsupported Struve order {order}; only 2 is implemented")
    z = np.asarray(z, dtype=float)
    return _kernels.struve_l_series(2.0, z.ravel(), RTOL, MAX_TERMS, N_SMALL).reshape(z.shape)


def kummer_transform_check(a: float, b: float, z: float) -> tuple[float, float]:
    """Both sides of ``1F1(a; b; -z) = e^{-z} 1F1(b-a; b; z)``, each by series."""
    lhs = hyp_scalar(HypParams((a,), (b,)), -z)
    rhs = math.exp(-z) * hyp_scalar(HypParams((b - a,), (b,)), z)
    return lhs, rhs


def bessel_product_integral(alpha: float, beta: float, c: float, nu: float, a: float = 1.0) -> float:
    """Closed form of ``int_0^a x^(alpha-1) (a^2-x^2)^(beta-1) I_nu(c x) dx``.

    Valid for ``beta > 0`` and ``alpha + nu > 0``.
    """
    h = 0.5 * (alpha + nu)
    pref = (
        2.0 ** (-nu - 1.0)
        * a ** (2 * beta + alpha + nu - 2)
        * c**nu
        * math.exp(math.lgamma(beta) + math.lgamma(h) - math.lgamma(beta + h) - math.lgamma(nu + 1.0))
    )
    return pref * hyp_scalar(HypParams((h,), (beta + h, nu + 1.0)), 0.25 * a * a * c * c)


# series region for the exponentially scaled Bessel helper
IVE_SERIES_MAX = 30.0


def bessel_ive(nu: float, z) -> np.ndarray:
    """``exp(-z) I_nu(z)`` for arrays ``z >= 0``.

    Uses the power series up to ``z = 30`` and ``scipy.special.ive`` beyond,
    where the unscaled series would lose range.
    """
    from scipy.special import ive

    z = np.asarray(z, dtype=float)
    if nu <= -1.0 and float(nu).is_integer():
        nu = -nu
    out = np.empty(z.shape)
    small = z <= IVE_SERIES_MAX
    if np.any(small):
        zs = z[small]
        out[small] = _kernels.bessel_i_series(float(nu), zs, RTOL, MAX_TERMS, N_SMALL) * np.exp(-zs)
    if np.any(~small):
        out[~small] = ive(nu, z[~small])
    return out
