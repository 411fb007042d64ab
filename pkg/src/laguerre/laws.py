"""Closed-form laws of the Laguerre process.

Conventions: ``delta = m + nu``; ``Gamma_m`` includes ``pi^{m(m-1)/2}``;
eigenvalue densities are with respect to Lebesgue measure on the ordered
chamber ``y_1 > ... > y_m``, so that for spectral ``g``

    int_{H_m^+} g(Y) dY = C_m int_{chamber} g(y) V(y)^2 dy,
    C_m = pi^{m(m-1)} / Gamma_m(m).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .mathyp import (
    CoincidenceError,
    HermitianMatrix,
    hyp_matrix,
    hyp_matrix_series,
    hyp_matrix_det,
    hyp_two_matrix,
    log_multigamma,
    multigamma_ratio,
    spectrum_of,
    vandermonde,
)
from .scalarfn import HypParams, bessel_i, bessel_ive, hyp1f1, struve_l_vec
from .symfun import COINCIDENCE_RTOL, min_relative_gap

EPS = np.finfo(float).eps


class OrderingError(ValueError):
    pass


class DomainError(ValueError):
    pass


def _herm(x, m=None):
    if x is None:
        return None
    if isinstance(x, HermitianMatrix):
        return x
    if isinstance(x, str):
        if x == "zero":
            return HermitianMatrix.zeros(m)
        if x in ("I", "identity"):
            return HermitianMatrix.identity(m)
        raise ValueError(f"unknown matrix name {x!r}")
    a = np.asarray(x)
    if a.ndim == 0:
        return HermitianMatrix(a.reshape(1, 1))
    if a.ndim == 2:
        return HermitianMatrix(a)
    return HermitianMatrix.from_spectrum(a)


@dataclass
class LawQuery:
    """Parameters shared by every evaluator.  Give ``delta`` or ``nu``."""

    m: int
    delta: float | None = None
    nu: float | None = None
    x: object = None
    y: object = None
    t: float = 1.0
    u: object = None

    def __post_init__(self):
        if self.delta is None and self.nu is None:
            raise ValueError("give delta or nu")
        if self.delta is None:
            self.delta = self.m + self.nu
        elif self.nu is None:
            self.nu = self.delta - self.m
        elif abs(self.delta - self.m - self.nu) > 1e-14:
            raise ValueError("inconsistent delta and nu")
        self.x = _herm(self.x if self.x is not None else "zero", self.m)
        if self.x.m != self.m:
            raise ValueError("x has the wrong size")
        if self.u is not None:
            self.u = _herm(self.u, self.m)
        if self.t < 0:
            raise DomainError("t must be non-negative")


@dataclass
class DensityValue:
    value: float
    log_value: float
    diagnostics: dict = field(default_factory=dict)
    flag: str | None = None

    @classmethod
    def from_log(cls, log_value, diagnostics=None, flag=None):
        value = math.exp(log_value) if log_value > -math.inf else 0.0
        return cls(value, log_value, diagnostics or {}, flag)

    @classmethod
    def from_value(cls, value, diagnostics=None, flag=None):
        value = float(value)
        log_value = math.log(value) if value > 0 else -math.inf
        return cls(value, log_value, diagnostics or {}, flag)

    def __float__(self):
        return self.value


def weyl_constant(m: int) -> float:
    """``C_m = pi^{m(m-1)} / Gamma_m(m)`` for the ordered eigenvalue chamber."""
    return math.exp(m * (m - 1) * math.log(math.pi) - log_multigamma(m, m))


# -- Laplace transform and transition density ---------------------------------

def laplace_transform(q: LawQuery) -> float:
    """``E_x[exp(-tr(u X_t))] = det(I + 2tu)^{-delta} exp(-tr(x (I + 2tu)^{-1} u))``."""
    m = q.m
    u = q.u.entries if q.u is not None else np.zeros((m, m))
    a = np.eye(m) + 2.0 * q.t * u
    sign, logdet = np.linalg.slogdet(a)
    if sign.real <= 0:
        raise DomainError("I + 2tu is not positive definite")
    mval = np.linalg.solve(a, u)
    expo = float(np.real(np.trace(q.x.entries @ mval)))
    return math.exp(-q.delta * logdet - expo)


def _is_zero(x: HermitianMatrix) -> bool:
    return bool(np.max(np.abs(x.entries)) == 0.0)


def transition_density(q: LawQuery) -> DensityValue:
    """Density of ``X_t`` at ``y`` given ``X_0 = x`` with respect to ``dy``.

    The 0F1 argument ``xy / 4t^2`` is evaluated at ``sqrt(x) y sqrt(x) / 4t^2``,
    which has the same spectrum.
    """
    m, delta, t = q.m, q.delta, q.t
    if delta <= m - 1:
        raise DomainError(f"delta must exceed {m - 1}")
    if t <= 0:
        raise DomainError("t must be positive")
    y = _herm(q.y, m)
    ylam = y.eigenvalues
    if ylam[-1] <= 0:
        return DensityValue(0.0, -math.inf, {}, "y not positive definite")
    x = q.x
    log_p = (
        -m * delta * math.log(2 * t)
        - log_multigamma(m, delta)
        - (x.trace() + y.trace()) / (2 * t)
        + (delta - m) * float(np.sum(np.log(ylam)))
    )
    diag = {}
    if not _is_zero(x):
        sx = x.sqrt_psd()
        arg = HermitianMatrix(sx @ y.entries @ sx / (4 * t * t))
        val = hyp_matrix(HypParams((), (delta,)), arg)
        if val <= 0:
            return DensityValue(0.0, -math.inf, {"0F1": val}, "non-positive 0F1 (loss of precision)")
        log_p += math.log(val)
        diag["0F1"] = val
    return DensityValue.from_log(log_p, diag)


# -- eigenvalue semigroup -------------------------------------------------------

def km_kernel(x, y, nu: float, t: float) -> np.ndarray:
    """Vectorized Karlin-McGregor density.

    ``x`` and ``y`` have shape ``(..., m)`` (ordered, positive) and broadcast
    against each other.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xi = x[..., :, None]
    yj = y[..., None, :]
    arg = np.sqrt(xi * yj) / t
    k = (0.5 / t) * (yj / xi) ** (0.5 * nu) * np.exp(-((np.sqrt(xi) - np.sqrt(yj)) ** 2) / (2 * t))
    k = k * bessel_ive(nu, arg)
    m = x.shape[-1]
    if m == 1:
        return k[..., 0, 0]
    if m == 2:
        det = k[..., 0, 0] * k[..., 1, 1] - k[..., 0, 1] * k[..., 1, 0]
    else:
        det = np.linalg.det(k)
    vx = np.ones(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]))
    vy = np.ones_like(vx)
    for i in range(m):
        for j in range(i + 1, m):
            vx = vx * (x[..., i] - x[..., j])
            vy = vy * (y[..., i] - y[..., j])
    return vy / vx * det


def _ordered(v, what):
    v = np.asarray(v, dtype=float).ravel()
    if np.any(v <= 0) or np.any(np.diff(v) >= 0):
        raise OrderingError(f"{what} must be strictly decreasing and positive, got {v}")
    return v


def eigen_semigroup(q: LawQuery, route: str = "karlin-mcgregor") -> DensityValue:
    """Transition density of the ordered eigenvalues.

    ``route="unitary"`` evaluates ``C_m V(y)^2 int p_t(x, U y U^*) dU`` through
    the two-matrix 0F1 instead of the determinant of Bessel kernels.
    """
    x = _ordered(spectrum_of(q.x) if isinstance(q.x, HermitianMatrix) else q.x, "x")
    y = _ordered(spectrum_of(q.y) if isinstance(q.y, HermitianMatrix) else q.y, "y")
    m, nu, t = q.m, q.nu, q.t
    if nu <= -1:
        raise DomainError("nu must exceed -1")
    if route == "karlin-mcgregor":
        return DensityValue.from_value(max(float(km_kernel(x, y, nu, t)), 0.0))
    if route == "unitary":
        delta = m + nu
        f01 = hyp_two_matrix(HypParams((), (delta,)), x / (4 * t * t), y, mode="auto")
        log_q = (
            math.log(weyl_constant(m))
            + 2 * math.log(abs(vandermonde(y)))
            - m * delta * math.log(2 * t)
            - log_multigamma(m, delta)
            - (x.sum() + y.sum()) / (2 * t)
            + nu * float(np.sum(np.log(y)))
        )
        if f01 <= 0:
            return DensityValue(0.0, -math.inf, {"0F1": f01}, "non-positive 0F1 (loss of precision)")
        return DensityValue.from_log(log_q + math.log(f01), {"0F1": f01})
    raise ValueError(f"unknown route {route!r}")


# -- Gauss-Legendre helpers ---------------------------------------------------------

_GL_CACHE: dict = {}


def gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _gl_nodes(a, b, n):
    z, w = gauss_legendre(n)
    return 0.5 * (b - a) * z + 0.5 * (a + b), 0.5 * (b - a) * w


def chamber_box_rule(a1, b1, a2, b2, n=20):
    """Nodes and weights for ``{a1<y1<b1, a2<y2<b2, y1>y2}``.

    The outer variable is split where ``y1`` crosses ``a2`` and ``b2`` so each
    piece is integrated by a smooth tensor rule.
    """
    cuts = sorted({a1, b1, *(c for c in (a2, b2) if a1 < c < b1)})
    pts, wts = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= a2:
            continue
        y1, w1 = _gl_nodes(lo, hi, n)
        for yv, wv in zip(y1, w1):
            top = min(b2, yv)
            if top <= a2:
                continue
            y2, w2 = _gl_nodes(a2, top, n)
            pts.append(np.column_stack([np.full(n, yv), y2]))
            wts.append(wv * w2)
    if not pts:
        return np.empty((0, 2)), np.empty(0)
    return np.concatenate(pts), np.concatenate(wts)


def chamber_mass(x, nu, t, box, n=20) -> float:
    """Integral of the m=2 eigenvalue density over a box intersected with the chamber."""
    pts, wts = chamber_box_rule(*box, n=n)
    if len(wts) == 0:
        return 0.0
    return float(np.dot(km_kernel(np.asarray(x)[None], pts, nu, t), wts))


def eigen_normalization_m2(x, nu, t, upper=None, n=40) -> float:
    """Total mass of the m=2 eigenvalue density over the chamber (truncated)."""
    x = np.asarray(x, dtype=float)
    if upper is None:
        upper = x[0] + 2 * (2 + nu) * t + 60.0 * t + 20.0 * math.sqrt(t * (x[0] + 1.0))
    # split the domain so each square carries a smooth tensor rule
    edges = np.linspace(0.0, upper, 9)
    total = 0.0
    for i in range(8):
        for j in range(i + 1):
            total += chamber_mass(x, nu, t, (edges[i], edges[i + 1], edges[j], edges[j + 1]), n)
    return total


# -- determinant moments and the law of T0 --------------------------------------------

def det_moment(q: LawQuery, s: float, route: str = "auto") -> float:
    """``E_x[det(X_t)^s] = (2t)^{ms} Gamma_m(s+delta)/Gamma_m(delta) 1F1(-s; delta; -x/2t)``.

    ``route`` selects the matrix 1F1 evaluation: "det", "series" or "auto".
    """
    m, delta, t = q.m, q.delta, q.t
    for j in range(m):
        if s + delta - j <= 0:
            raise DomainError(f"moment of order {s} does not exist for delta={delta}")
    if s == 0:
        return 1.0
    arg = -q.x.eigenvalues / (2 * t)
    params = HypParams((-s,), (delta,))
    if route == "det":
        f = hyp_matrix_det(params, arg)
    elif route == "series":
        f = hyp_matrix_series(params, arg).value
    else:
        f = hyp_matrix(params, arg)
    return (2 * t) ** (m * s) * multigamma_ratio(m, s + delta, delta) * f


def t0_tail(q: LawQuery) -> float:
    """``P(T0 > t)`` for the index ``m - nu`` process started at positive definite ``x``.

    ``Gamma_m(m)/Gamma_m(m+nu) det(x/2t)^nu 1F1(nu; m+nu; -x/2t)``.
    """
    m, t = q.m, q.t
    nu = q.nu if q.delta == q.m + q.nu else None
    if nu is None or not 0 < nu < 1:
        raise DomainError("t0_tail needs 0 < nu < 1")
    if t <= 0:
        raise DomainError("t must be positive")
    lam = q.x.eigenvalues
    if lam[-1] <= 0:
        raise DomainError("x must be positive definite")
    z = lam / (2 * t)
    if m == 1:
        f = hyp1f1(nu, 1 + nu, -z[0])
    else:
        f = hyp_matrix(HypParams((nu,), (m + nu,)), -z)
    val = multigamma_ratio(m, m, m + nu) * math.exp(nu * float(np.sum(np.log(z)))) * f
    return min(max(val, 0.0), 1.0)


def s0_density_m2(lambda1: float, lambda2: float, nu: float, u: float) -> float:
    """Density at ``u`` of ``S0 = 1/(2 T0)`` for m=2, index ``2 - nu``, start
    with eigenvalues ``lambda1 >= lambda2 > 0``."""
    if not 0 < nu < 1:
        raise DomainError("need 0 < nu < 1")
    if lambda2 <= 0 or lambda1 < lambda2:
        raise DomainError("need lambda1 >= lambda2 > 0")
    if u <= 0:
        return 0.0
    if lambda1 - lambda2 < 1e-8 * lambda1:
        lam = 0.5 * (lambda1 + lambda2)
        logc = (math.log(2.0) + 2 * nu * math.log(lam) + (2 * nu - 1) * math.log(u) - lam * u
                - math.lgamma(nu + 2) - math.lgamma(nu))
        return math.exp(logc) * hyp1f1(nu - 1, nu + 2, -lam * u)
    logc = (nu * math.log(lambda1 * lambda2) + (2 * nu - 2) * math.log(u)
            - math.lgamma(nu + 1) - math.lgamma(nu))
    # Kummer-transformed difference: no exponential growth in the 1F1 terms
    d = (math.exp(-lambda2 * u) * hyp1f1(nu - 1, nu + 1, -lambda1 * u)
         - math.exp(-lambda1 * u) * hyp1f1(nu - 1, nu + 1, -lambda2 * u))
    return math.exp(logc) * d / (lambda1 - lambda2)


def s0_cdf_m2(lambda1, lambda2, nu, upper) -> tuple[float, float]:
    """``(int_0^upper f, abs error)`` by adaptive quadrature."""
    f = lambda u: s0_density_m2(lambda1, lambda2, nu, u)
    return integrate.quad(f, 0.0, upper, epsabs=1e-13, epsrel=1e-10, limit=400)


def s0_total_mass_m2(lambda1, lambda2, nu) -> tuple[float, float]:
    f = lambda u: s0_density_m2(lambda1, lambda2, nu, u)
    a, ea = integrate.quad(f, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    b, eb = integrate.quad(f, 1.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    return a + b, ea + eb


# -- generalized Hartman-Watson law ----------------------------------------------------

def hw_laplace(z_eigs, nu: float, m: int | None = None, route: str = "matrix") -> float:
    """Conditional Laplace transform ``E[exp(-nu^2/2 int_0^t tr X_s^{-1} ds) | X_t = y]``
    under index ``m`` from ``x``; ``z_eigs`` are the eigenvalues of ``xy/4t^2``.

    ``route="matrix"``: ``Gamma_m(m)/Gamma_m(m+nu) det(z)^{nu/2} 0F1(m+nu; z)/0F1(m; z)``.
    ``route="bessel"``: ``det(z_i^{(m-j)/2} I_{m+nu-j}(2 sqrt z_i)) / (same with nu = 0)``.
    """
    z = np.sort(np.asarray(z_eigs, dtype=float).ravel())[::-1]
    m = len(z) if m is None else m
    if len(z) != m:
        raise ValueError("z_eigs must have m entries")
    if nu < 0 or np.any(z < 0):
        raise DomainError("need nu >= 0 and z >= 0")
    if nu == 0:
        return 1.0
    if route == "matrix":
        if np.any(z == 0):
            raise DomainError("matrix route needs positive z")
        num = hyp_matrix(HypParams((), (m + nu,)), z)
        den = hyp_matrix(HypParams((), (float(m),)), z)
        return multigamma_ratio(m, m, m + nu) * math.exp(0.5 * nu * float(np.sum(np.log(z)))) * num / den
    if route == "bessel":
        lam = 2.0 * np.sqrt(z)
        if m == 1:
            return float(bessel_ive(nu, lam)[0] / bessel_ive(0.0, lam)[0])
        if m == 2 and min_relative_gap(lam) < COINCIDENCE_RTOL:
            l = float(lam.mean())
            i = {o: float(bessel_ive(o, np.array([l]))[0]) for o in (nu - 1, nu, nu + 1, 0.0, 1.0)}
            return (i[nu] ** 2 - i[nu + 1] * i[nu - 1]) / (i[0.0] ** 2 - i[1.0] ** 2)
        if min_relative_gap(lam) < COINCIDENCE_RTOL:
            raise CoincidenceError("Bessel route needs distinct eigenvalues for m > 2")

        def bessel_det(order_shift):
            mat = np.empty((m, m))
            for j in range(m):
                mat[:, j] = z ** (0.5 * (m - 1 - j)) * bessel_ive(order_shift + m - 1 - j, lam)
            return np.linalg.det(mat)

        return float(bessel_det(nu) / bessel_det(0.0))
    raise ValueError(f"unknown route {route!r}")


HW_PANEL_NODES = (20, 30)
HW_CONTOUR_K = 16.0
HW_MIN_V = 0.01


def _hw_normalizer(l1, l2):
    """``(pi/2)(l1 I1(l1) I0(l2) - l2 I1(l2) I0(l1)) / (l1^2 - l2^2)``; equal limit ``(pi/4)(I0^2 - I1^2)``."""
    if l1 - l2 < 1e-6 * l1:
        l = 0.5 * (l1 + l2)
        return 0.25 * math.pi * (bessel_i(0, l) ** 2 - bessel_i(1, l) ** 2)
    num = l1 * bessel_i(1, l1) * bessel_i(0, l2) - l2 * bessel_i(1, l2) * bessel_i(0, l1)
    return 0.5 * math.pi * num / (l1 * l1 - l2 * l2)


def hw_inner_equal_struve(a) -> np.ndarray:
    """``int_0^1 z sqrt(1-z^2) e^{-a z} dz = 1/3 - (pi/2)(I_2(a) - L_2(a))/a`` for real ``a > 0``."""
    a = np.asarray(a, dtype=float)
    i2 = bessel_ive(2.0, a) * np.exp(a)
    return 1.0 / 3.0 - 0.5 * math.pi * (i2 - struve_l_vec(2, a)) / a


def _sinh_ratio(p, s):
    # sinh(p s) / p, with its p -> 0 limit s
    if p == 0.0:
        return s
    return np.sinh(p * s) / p


def hw_inner(a, p: float) -> np.ndarray:
    """``int_0^1 z sinh(p sqrt(1-z^2))/p e^{-a z} dz`` for real or complex ``a``
    (``p = 0`` gives the equal-eigenvalue kernel)."""
    a = np.atleast_1d(np.asarray(a))
    out = np.empty(a.shape, dtype=complex)
    real = np.abs(a.imag) == 0 if np.iscomplexobj(a) else np.ones(a.shape, bool)
    ar = a.real
    # real argument, moderate: smooth phi-rule over [0, pi/2]
    zphi, wphi = _gl_nodes(0.0, 0.5 * math.pi, 48)
    cphi, sphi = np.cos(zphi), np.sin(zphi)
    base = cphi * sphi * _sinh_ratio(p, sphi) * wphi
    mod = real & (ar <= 40.0)
    if np.any(mod):
        out[mod] = np.exp(-np.outer(ar[mod], cphi)) @ base
    big = real & (ar > 40.0)
    if np.any(big):
        zz, ww = gauss_legendre(48)
        top = 40.0 / ar[big]
        zn = 0.5 * top[:, None] * (zz[None] + 1.0)
        wn = 0.5 * top[:, None] * ww[None]
        f = zn * _sinh_ratio(p, np.sqrt(1.0 - zn * zn)) * np.exp(-ar[big][:, None] * zn)
        out[big] = np.sum(f * wn, axis=1)
    cpx = ~real
    if np.any(cpx):
        ac = a[cpx]
        panels = int(min(4000, math.ceil(0.25 * float(np.max(np.abs(ac)))) + 2))
        edges = np.linspace(0.0, 0.5 * math.pi, panels + 1)
        z16, w16 = gauss_legendre(16)
        mids = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        phi = (mids[:, None] + half * z16[None]).ravel()
        wp = np.tile(half * w16, panels)
        c, s = np.cos(phi), np.sin(phi)
        wgt = c * s * _sinh_ratio(p, s) * wp
        out[cpx] = np.exp(-np.outer(ac, c)) @ wgt
    return out


def _hw_contour_shift(v):
    c = math.pi - math.sqrt(0.5 * HW_CONTOUR_K * v)
    return min(max(c, 0.0), 0.5 * math.pi)


def _hw_outer(v, l1, l2):
    """Imaginary part of the shifted outer integral, with error estimates."""
    p = l1 - l2
    g = 2.0 * math.sqrt(l1 * l2)
    c = _hw_contour_shift(v)
    rem = math.pi - c
    ymax = min(math.sqrt(rem * rem + 20.0 * v), 40.0)
    half_period = math.pi * v / (4.0 * rem)
    n_half = int(math.ceil(ymax / half_period))
    edges = [0.0]
    for k in range(1, n_half + 1):
        e = min(k * half_period, ymax)
        # keep panels no wider than 1 so e^{-y}-type decay stays resolved
        prev = edges[-1]
        nsub = max(1, int(math.ceil(e - prev)))
        edges.extend(prev + (e - prev) * (i + 1) / nsub for i in range(nsub))
    edges = np.array(edges)
    results = {}
    for n in HW_PANEL_NODES:
        zz, ww = gauss_legendre(n)
        mids = 0.5 * (edges[:-1] + edges[1:])
        halfw = 0.5 * np.diff(edges)
        y = (mids[:, None] + halfw[:, None] * zz[None]).ravel()
        w = (halfw[:, None] * ww[None]).ravel()
        wz = y + 1j * c
        a = g * np.cosh(wz)
        if c == 0.0:
            a = a.real
        inner = hw_inner(a, p)
        if p == 0.0 and c == 0.0:
            sm = a <= 8.0
            if np.any(sm):
                inner[sm] = hw_inner_equal_struve(a[sm])
        vals = inner * np.sinh(wz) * np.exp(-2.0 * (wz - 1j * math.pi) ** 2 / v)
        contrib = (vals.imag * w).reshape(len(mids), n)
        results[n] = (math.fsum(contrib.sum(axis=1)), float(np.sum(np.abs(vals) * w)))
    j_hi, mag = results[HW_PANEL_NODES[1]]
    j_lo = results[HW_PANEL_NODES[0]][0]
    return j_hi, abs(j_hi - j_lo), 64.0 * EPS * mag


def hw_density_m2(lambda1: float, lambda2: float, v: float, with_error: bool = False):
    """Density at ``v`` of ``int_0^1 tr(X_s^{-1}) ds`` for the m=2, index-2
    bridge, ``lambda1 >= lambda2 > 0`` the eigenvalues of ``sqrt(x y)``.

    The oscillatory y-integral is evaluated on the line ``Im y = c`` (which
    leaves the imaginary part unchanged) to shrink the ``e^{2 pi^2 / v}``
    cancellation.  Where round-off still dominates the value, 0 is returned
    and flagged.
    """
    if lambda2 <= 0 or lambda1 < lambda2:
        raise DomainError("need lambda1 >= lambda2 > 0")
    if v <= 0:
        return (0.0, {"quad_error": 0.0, "roundoff": 0.0, "flag": None}) if with_error else 0.0
    if lambda1 - lambda2 < 1e-8 * lambda1:
        lambda1 = lambda2 = 0.5 * (lambda1 + lambda2)
    l1, l2 = lambda1, lambda2
    pref = math.sqrt(l1 * l2) / (math.pi * math.sqrt(2.0 * math.pi * v)) / _hw_normalizer(l1, l2)
    flag = None
    if v < HW_MIN_V:
        val, qerr, rerr, flag = 0.0, 0.0, 0.0, "below resolvable range"
    else:
        j, qerr, rerr = _hw_outer(v, l1, l2)
        val = pref * j
        qerr *= pref
        rerr *= pref
        if abs(val) <= 10.0 * (rerr + qerr):
            flag = "round-off dominated; returned 0"
            val = 0.0
    diag = {"quad_error": qerr, "roundoff": rerr, "flag": flag}
    val = max(val, 0.0)
    return (val, diag) if with_error else val


def hw_integral(lambda1, lambda2, weight=None, split=4.0):
    """``int_0^inf weight(v) f(v) dv``; the tail is integrated in ``w = v^{-1/2}``
    so the ``v^{-3/2}`` decay maps to a bounded integrand."""
    weight = weight or (lambda v: 1.0)
    f = lambda v: weight(v) * hw_density_m2(lambda1, lambda2, v)
    head, e1 = integrate.quad(f, 0.0, split, epsabs=1e-10, epsrel=1e-10, limit=200,
                              points=[0.25, 0.5, 1.0, 2.0])

    def tail(w):
        if w <= 0:
            return 0.0
        v = 1.0 / (w * w)
        return f(v) * 2.0 / w**3

    rest, e2 = integrate.quad(tail, 0.0, 1.0 / math.sqrt(split), epsabs=1e-10, epsrel=1e-10, limit=200)
    return head + rest, e1 + e2


# -- invariant measure -------------------------------------------------------------------

def _bump(s, lo, hi):
    s = np.asarray(s, dtype=float)
    r = (2.0 * s - (lo + hi)) / (hi - lo)
    out = np.zeros_like(s)
    inside = np.abs(r) < 1
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


TEST_FUNCTIONS = {
    "zero": (lambda y: np.zeros(y.shape[:-1]), (1.0, 2.0)),
    "bump1": (lambda y: np.prod(_bump(y, 1.0, 2.0), axis=-1), (1.0, 2.0)),
    "bump2": (lambda y: np.prod(_bump(y, 0.5, 3.0), axis=-1), (0.5, 3.0)),
}


def _chamber_rule(lo, hi, m, n):
    """Tensor rule over ``{lo < y_m < ... < y_1 < hi}`` for m = 1, 2."""
    if m == 1:
        z, w = _gl_nodes(lo, hi, n)
        return z[:, None], w
    if m == 2:
        return chamber_box_rule(lo, hi, lo, hi, n)
    raise ValueError("invariant_measure_residual supports m <= 2")


def invariant_measure_residual(delta: float, m: int, test_fn_id: str, t: float, n: int = 24,
                               with_error: bool = False):
    """``|int P_t f d rho - int f d rho|`` for ``rho(dx) = det(x)^{delta-m} dx``.

    Both integrals are reduced to the eigenvalue chamber (Weyl factor) and
    evaluated by nested Gauss-Legendre rules; the start variable uses
    ``x = s^2`` to absorb the ``x^{delta-m}`` behaviour at 0.
    """
    if delta <= m - 1:
        raise DomainError(f"delta must exceed {m - 1}")
    if test_fn_id not in TEST_FUNCTIONS:
        raise KeyError(f"unknown test function {test_fn_id!r}; choose from {sorted(TEST_FUNCTIONS)}")
    fn, (lo, hi) = TEST_FUNCTIONS[test_fn_id]
    if test_fn_id == "zero":
        return (0.0, 0.0) if with_error else 0.0
    nu = delta - m
    cm = weyl_constant(m)

    def weight(y):
        v = np.ones(y.shape[0])
        for i in range(m):
            for j in range(i + 1, m):
                v = v * (y[:, i] - y[:, j]) ** 2
        return cm * v * np.prod(y, axis=1) ** nu

    def both(nq):
        yq, wy = _chamber_rule(lo, hi, m, nq)
        fy = fn(yq)
        keep = fy != 0
        yq, wy, fy = yq[keep], wy[keep], fy[keep]
        direct = float(np.dot(weight(yq) * fy, wy))
        # start points: spread of order sqrt(hi t) around the support
        top = math.sqrt(hi + 12.0 * math.sqrt(hi * t) + 40.0 * t)
        sq, ws = _chamber_rule(0.0, top, m, nq)
        xq = sq**2
        wx = ws * np.prod(2.0 * sq, axis=1) * weight(xq)
        kern = km_kernel(xq[:, None, :], yq[None, :, :], nu, t)
        pf = kern @ (wy * fy)
        return abs(float(np.dot(wx, pf)) - direct)

    res = both(n)
    err = abs(res - both(n + 8))
    return (res, err) if with_error else res
