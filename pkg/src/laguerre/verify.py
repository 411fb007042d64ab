"""Verification campaigns: every closed form checked against an independent
route (series, determinant, quadrature or Monte Carlo).

Each ``check_*`` function returns a :class:`CheckResult`.  Sizes come from a
budget table; ``full`` uses the acceptance sizes, ``desk`` a smaller set that
keeps ``verify-all`` around a minute on one core.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from . import laws, process
from .mathyp import (
    HermitianMatrix,
    harish_chandra_0f0,
    hua_identity_residual,
    hyp_matrix_det,
    hyp_matrix_series,
    hyp_two_matrix,
)
from .report import McReport
from .scalarfn import HypParams
from .symfun import partitions_of, zonal

BUDGETS = {
    "desk": {
        "laplace_paths": 50000, "euler_paths": 8000, "euler_steps": 400,
        "trace_samples": 10000, "additivity_paths": 50000,
        "eigen_paths": 50000, "eigen_steps": 2000,
        "girsanov_paths": 8000, "girsanov_steps": 2000, "girsanov_direct_steps": 400,
        "collision_paths": 5000, "collision_steps": 200,
        "hw_pairs": ((2.0, 1.0),), "hw_nus": (0.5,),
    },
    "full": {
        "laplace_paths": 100000, "euler_paths": 20000, "euler_steps": 400,
        "trace_samples": 10000, "additivity_paths": 100000,
        "eigen_paths": 100000, "eigen_steps": 4000,
        "girsanov_paths": 20000, "girsanov_steps": 2000, "girsanov_direct_steps": 400,
        "collision_paths": 10000, "collision_steps": 200,
        "hw_pairs": ((2.0, 1.0), (1.5, 1.5)), "hw_nus": (0.5, 1.0),
    },
}


@dataclass
class Metric:
    name: str
    value: float
    reference: float
    error: float
    tolerance: float
    passed: bool
    kind: str = "abs"  # "abs", "rel", "z" or "p-value"

    @property
    def usage(self) -> float:
        """Fraction of the tolerance used; above 1 means failure."""
        if self.kind == "p-value":
            return self.tolerance / self.error if self.error > 0 else math.inf
        if self.tolerance == 0:
            return 0.0 if self.error == 0 else math.inf
        return self.error / self.tolerance


@dataclass
class CheckResult:
    criterion: int
    name: str
    metrics: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.metrics) and all(r.passed for r in self.reports)

    def add(self, name, value, reference, error, tolerance, kind="abs", passed=None):
        if passed is None:
            passed = bool(error <= tolerance)
        self.metrics.append(Metric(name, float(value), float(reference), float(error), float(tolerance),
                                   bool(passed), kind))

    def add_report(self, rep: McReport):
        self.reports.append(rep)
        self.add(rep.label, rep.estimate, rep.closed_form, abs(rep.z_score), 3.0, "z", rep.passed)

    def summary(self) -> str:
        worst = max(self.metrics, key=lambda m: (not m.passed, m.usage))
        rel = "<" if worst.kind == "p-value" else "<="
        return (f"criterion {self.criterion:2d} [{self.name}]: {'PASS' if self.passed else 'FAIL'} "
                f"({len(self.metrics)} checks; worst {worst.name}: {worst.kind} {worst.error:.3g}, "
                f"needs tol {rel} {worst.tolerance:.3g})")


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.wall_time = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _budget(budget):
    return BUDGETS[budget] if isinstance(budget, str) else budget


# -- 1 to 3: symmetric functions and matrix hypergeometrics ----------------------

@_timed
def check_zonal_normalization(seed=1, budget="desk") -> CheckResult:
    """sum_{tau |- k} C_tau(x) = (tr x)^k, k <= 8, m <= 4, 100 random spectra."""
    rng = np.random.default_rng([seed, 1])
    res = CheckResult(1, "zonal normalization")
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(1, 5))
        x = rng.uniform(0.05, 2.0, size=m)
        for k in range(9):
            s = sum(zonal(tau, x) for tau in partitions_of(k, m))
            ref = x.sum() ** k
            worst = max(worst, abs(s - ref) / ref)
    res.add("max relative error", worst, 0.0, worst, 1e-10, "rel")
    return res


def _random_hermitian(rng, m, radius):
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    h = a + a.conj().T
    lam = np.linalg.eigvalsh(h)
    return HermitianMatrix(h * (radius * rng.uniform(0.3, 1.0) / np.max(np.abs(lam))))


@_timed
def check_gross_richards(seed=1, budget="desk") -> CheckResult:
    """Determinantal vs weight-30 series for 0F1 and 1F1 on random 2x2 and 3x3 arguments."""
    rng = np.random.default_rng([seed, 2])
    res = CheckResult(2, "Gross-Richards determinant vs series")
    worst = {"0F1": 0.0, "1F1": 0.0}
    for m in (2, 3):
        for _ in range(50):
            x = _random_hermitian(rng, m, 1.0)
            b = m + rng.uniform(0.1, 2.0)
            a = rng.uniform(0.2, 3.0)
            for name, params in (("0F1", HypParams((), (b,))), ("1F1", HypParams((a,), (b,)))):
                d = hyp_matrix_det(params, x)
                s = hyp_matrix_series(params, x, 30).value
                worst[name] = max(worst[name], abs(d - s) / (1 + abs(s)))
    for name, w in worst.items():
        res.add(f"{name} max |det-series|/(1+|v|)", w, 0.0, w, 1e-8)
    return res


@_timed
def check_two_matrix(seed=1, budget="desk") -> CheckResult:
    """Two-argument determinant vs series, Hua identity, Harish-Chandra 0F0."""
    rng = np.random.default_rng([seed, 3])
    res = CheckResult(3, "two-matrix determinant, Hua, Harish-Chandra")
    worst_det, worst_hua = 0.0, 0.0
    exp_coeffs = [1.0 / math.factorial(k) for k in range(40)]
    for i in range(20):
        b = np.sort(rng.uniform(-1.0, 1.0, 2))[::-1]
        c = np.sort(rng.uniform(-1.0, 1.0, 2))[::-1]
        nu = rng.uniform(0.0, 1.5)
        params = HypParams((), (2 + nu,)) if i % 2 == 0 else HypParams((rng.uniform(0.5, 3.0),), (2 + nu,))
        d = hyp_two_matrix(params, b, c, "determinant")
        s = hyp_two_matrix(params, b, c, "series", 30)
        worst_det = max(worst_det, abs(d - s) / (1 + abs(s)))
        worst_hua = max(worst_hua, hua_identity_residual(exp_coeffs, b, c, 30))
    res.add("pFq(B,C) max |det-series|/(1+|v|)", worst_det, 0.0, worst_det, 1e-8)
    res.add("Hua residual (f=exp)", worst_hua, 0.0, worst_hua, 1e-8)
    hc = harish_chandra_0f0([1.0, 0.0], [1.0, 0.0])
    res.add("Harish-Chandra 0F0(diag(1,0),diag(1,0))", hc, math.e - 1, abs(hc - (math.e - 1)), 1e-10)
    return res


# -- 4 to 8: Monte Carlo against closed forms ---------------------------------------

U_GRID = (
    ("0.1*I", np.diag([0.1, 0.1])),
    ("0.3*I", np.diag([0.3, 0.3])),
    ("0.5*I", np.diag([0.5, 0.5])),
    ("diag(0.8,0.2)", np.diag([0.8, 0.2])),
    ("rot(1.0,0.1)", None),
)


def _u_grid():
    out = []
    for name, u in U_GRID:
        out.append((name, HermitianMatrix.from_spectrum([1.0, 0.1], rotation_seed=11) if u is None
                    else HermitianMatrix(u)))
    return out


def _laplace_values(states, u: HermitianMatrix):
    return np.exp(-np.real(np.einsum("ij,pji->p", u.entries, states)))


def euler_richardson(delta, x0, t_end, n_steps, n_paths, seed, threads=None):
    """Coupled Euler runs with ``n_steps`` and ``2 n_steps``: the coarse path
    uses the sum of consecutive fine increments.  Returns both final stacks."""
    x0 = process._as_hermitian(x0)
    m = x0.m
    hf = t_end / (2 * n_steps)
    sq = math.sqrt(hf)

    def block(start, count):
        paths = np.arange(start, start + count, dtype=np.uint64)
        fine = np.broadcast_to(x0.entries, (count, m, m)).copy()
        coarse = fine.copy()
        for s in range(n_steps):
            g1 = sq * process.counter_gaussian_matrices(seed, process.STREAM_EULER, paths, 2 * s, 0, m, m)
            g2 = sq * process.counter_gaussian_matrices(seed, process.STREAM_EULER, paths, 2 * s + 1, 0, m, m)
            fine = process.euler_step_batch(fine, delta, hf, g1)
            fine = process.euler_step_batch(fine, delta, hf, g2)
            coarse = process.euler_step_batch(coarse, delta, 2 * hf, g1 + g2)
        return fine, coarse

    blocks = process._blocks(n_paths)
    outs = [block(s, c) for s, c in blocks]
    return np.concatenate([o[0] for o in outs]), np.concatenate([o[1] for o in outs])


@_timed
def check_laplace(seed=1, budget="desk") -> CheckResult:
    """Exact sampler (delta in {1,2,3}) and Richardson-extrapolated Euler (delta=2.5)
    against the closed-form Laplace transform on a 5-point u-grid."""
    b = _budget(budget)
    res = CheckResult(4, "Laplace transform")
    t = 1.0
    x0 = HermitianMatrix.from_spectrum([1.5, 0.0], rotation_seed=5)  # rank 1 so n = 1 is admissible
    grid = _u_grid()
    for delta in (1, 2, 3):
        xs = process.exact_marginals(delta, x0, t, seed, b["laplace_paths"], stream=10 + delta)
        for name, u in grid:
            cf = laws.laplace_transform(laws.LawQuery(m=2, delta=delta, x=x0, t=t, u=u))
            res.add_report(McReport.from_samples(_laplace_values(xs, u), cf,
                                                 label=f"exact delta={delta} u={name}"))
    delta = 2.5
    fine, coarse = euler_richardson(delta, x0, t, b["euler_steps"], b["euler_paths"], seed)
    for name, u in grid:
        cf = laws.laplace_transform(laws.LawQuery(m=2, delta=delta, x=x0, t=t, u=u))
        vf, vc = _laplace_values(fine, u), _laplace_values(coarse, u)
        rep = McReport.from_samples(2 * vf - vc, cf, label=f"euler-richardson delta=2.5 u={name}")
        res.add_report(rep)
        # O(h) bias margin: coarse vs fine difference, recorded alongside
        bias = abs(vf.mean() - vc.mean())
        res.add(f"euler O(h) bias margin u={name}", bias, 0.0, bias, 3 * rep.std_error + 0.01, "abs")
    return res


@_timed
def check_trace_law(seed=1, budget="desk") -> CheckResult:
    """KS test of tr X_t / 2t against Gamma(nm) at the 1% level (x0 = 0)."""
    b = _budget(budget)
    res = CheckResult(5, "trace law")
    t = 0.7
    for n, m in ((1, 2), (2, 2)):
        xs = process.exact_marginals(n, HermitianMatrix.zeros(m), t, seed, b["trace_samples"], stream=20 + n)
        tr = np.real(np.trace(xs, axis1=1, axis2=2)) / (2 * t)
        ks = stats.kstest(tr, stats.gamma(n * m).cdf)
        res.add(f"KS p-value (n={n}, m={m}, D={ks.statistic:.4f})", ks.pvalue, 0.01, ks.pvalue, 0.01,
                "p-value", passed=ks.pvalue > 0.01)
    return res


@_timed
def check_additivity(seed=1, budget="desk") -> CheckResult:
    b = _budget(budget)
    res = CheckResult(6, "additivity")
    res.add_report(process.additivity_check(1, 1, 2, "zero", "zero", 1.0, b["additivity_paths"], seed=seed,
                                            u=0.5 * np.eye(2)))
    res.add_report(process.additivity_check(2, 1, 2, "I", "zero", 1.0, b["additivity_paths"], seed=seed,
                                            u=0.2 * np.eye(2)))
    return res


def _m2_marginal_edges(x, nu, t, upper, n_bins):
    """Decile edges of the closed-form marginals of y1 and y2."""
    def f1(a):
        return laws.chamber_mass(x, nu, t, (0.0, a, 0.0, a), 24) if a > 0 else 0.0

    def f2(b_):
        return 1.0 - laws.chamber_mass(x, nu, t, (b_, upper, b_, upper), 24)

    e1, e2 = [0.0], [0.0]
    for k in range(1, n_bins):
        p = k / n_bins
        e1.append(optimize.brentq(lambda a: f1(a) - p, 1e-9, upper, xtol=1e-10))
        e2.append(optimize.brentq(lambda v: f2(v) - p, 1e-9, upper, xtol=1e-10))
    e1.append(upper)
    e2.append(upper)
    return np.array(e1), np.array(e2)


def eigen_chi_square(samples, x, nu, t, n_bins=10, upper=None, min_expected=5.0):
    """Chi-square goodness of fit of ordered pairs against the closed-form density.

    Cells of a ``n_bins x n_bins`` grid (closed-form decile edges) with
    expected count below ``min_expected`` are pooled with the out-of-range
    remainder.  Returns ``(statistic, dof, p_value)``.
    """
    x = np.asarray(x, dtype=float)
    upper = upper or float(x[0] + 60.0 * t + 2 * (2 + nu) * t + 20.0)
    e1, e2 = _m2_marginal_edges(x, nu, t, upper, n_bins)
    n = samples.shape[0]
    counts, _, _ = np.histogram2d(samples[:, 0], samples[:, 1], bins=[e1, e2])
    probs = np.zeros((n_bins, n_bins))
    for i in range(n_bins):
        for j in range(n_bins):
            if e2[j] < e1[i + 1]:
                probs[i, j] = laws.chamber_mass(x, nu, t, (e1[i], e1[i + 1], e2[j], e2[j + 1]), 20)
    expected = n * probs
    keep = expected >= min_expected
    obs = list(counts[keep])
    exp_ = list(expected[keep])
    rest_obs = n - float(np.sum(counts[keep]))
    rest_exp = n - float(np.sum(expected[keep]))
    if rest_exp >= min_expected:
        obs.append(rest_obs)
        exp_.append(rest_exp)
    obs, exp_ = np.array(obs), np.array(exp_)
    stat = float(np.sum((obs - exp_) ** 2 / exp_))
    dof = len(obs) - 1
    return stat, dof, float(stats.chi2.sf(stat, dof))


@_timed
def check_eigen_semigroup(seed=1, budget="desk", threads=None) -> CheckResult:
    b = _budget(budget)
    res = CheckResult(7, "eigenvalue semigroup")
    x, nu, t = np.array([2.0, 1.0]), 0.0, 0.5
    mass = laws.eigen_normalization_m2(x, nu, t)
    res.add("chamber normalization", mass, 1.0, abs(mass - 1.0), 1e-3)
    cfg = process.SimConfig(m=2, delta=2.0, x0=x, t_end=t, n_steps=b["eigen_steps"],
                            n_paths=b["eigen_paths"], seed=seed, scheme="eigen")
    ps = process.simulate(cfg, threads=threads)
    stat, dof, pval = eigen_chi_square(ps.final, x, nu, t)
    res.add(f"chi-square p-value (stat={stat:.2f}, dof={dof})", pval, 0.01, pval, 0.01, "p-value",
            passed=pval > 0.01)
    y = np.array([3.0, 1.0])
    q = laws.LawQuery(m=2, delta=2.0, x=x, y=y, t=t)
    km = laws.eigen_semigroup(q).value
    un = laws.eigen_semigroup(q, route="unitary").value
    res.add("Karlin-McGregor vs unitary reduction", km, un, abs(km - un) / un, 1e-6, "rel")
    return res


@_timed
def check_girsanov(seed=1, budget="desk", threads=None) -> CheckResult:
    """Reweighted index-2 exact paths vs direct index-2.5 Euler paths."""
    b = _budget(budget)
    res = CheckResult(8, "Girsanov reweighting")
    m, nu, t = 2, 0.5, 0.5
    x0 = HermitianMatrix.identity(m)
    u = HermitianMatrix(0.3 * np.eye(m))
    cf = laws.laplace_transform(laws.LawQuery(m=m, delta=m + nu, x=x0, t=t, u=u))
    cfg = process.SimConfig(m=m, delta=m, x0=x0, t_end=t, n_steps=b["girsanov_steps"],
                            n_paths=b["girsanov_paths"], seed=seed, scheme="exact")
    ps = process.simulate(cfg, threads=threads, track_inverse=True)
    w = np.exp(process.girsanov_log_weights(ps, nu))
    rew = w * _laplace_values(ps.final, u)
    direct_cfg = process.SimConfig(m=m, delta=m + nu, x0=x0, t_end=t, n_steps=b["girsanov_direct_steps"],
                                   n_paths=b["girsanov_paths"], seed=seed + 1, scheme="euler")
    dps = process.simulate(direct_cfg, threads=threads)
    direct = _laplace_values(dps.final, u)
    r1 = McReport.from_samples(rew, cf, label="reweighted vs closed form")
    r2 = McReport.from_samples(direct, cf, label="direct vs closed form")
    se = math.hypot(r1.std_error, r2.std_error)
    res.add_report(McReport.compare(r1.estimate, se, r2.estimate, len(rew), label="reweighted vs direct"))
    res.add_report(r1)
    res.add_report(r2)
    wm = McReport.from_samples(w, 1.0, label="E[weight] = 1")
    res.add_report(wm)
    return res


# -- 9 and 10: T0 / S0 and Hartman-Watson ----------------------------------------------

T0_GRID_LAMBDAS = ((2.0, 1.0), (1.5, 0.5), (3.0, 2.5))
T0_GRID_NUS = (0.3, 0.5, 0.7)
T0_GRID_TIMES = (0.1, 0.5, 2.5)


def s0_t0_stated_identity(lambdas, nu, t):
    """``int_0^{1/(2t)} s0_density + t0_tail(t)``.

    Often quoted as identically 1; it is not, since both terms are
    ``P(T0 > t)``.  Kept so the claim stays checkable.
    """
    cdf, _ = laws.s0_cdf_m2(lambdas[0], lambdas[1], nu, 1.0 / (2 * t))
    tail = laws.t0_tail(laws.LawQuery(m=2, nu=nu, x=np.diag(lambdas), t=t))
    return cdf + tail


def s0_t0_corrected_identity(lambdas, nu, t):
    """``int_0^{1/(2t)} s0_density - t0_tail(t)``, which vanishes because
    ``{S0 < 1/(2t)} = {T0 > t}``."""
    cdf, _ = laws.s0_cdf_m2(lambdas[0], lambdas[1], nu, 1.0 / (2 * t))
    tail = laws.t0_tail(laws.LawQuery(m=2, nu=nu, x=np.diag(lambdas), t=t))
    return cdf - tail


def _t0_common(res):
    worst = 0.0
    for t in (0.1, 1.0, 10.0):
        v = laws.t0_tail(laws.LawQuery(m=1, nu=0.5, x=1.0, t=t))
        worst = max(worst, abs(v - special.gammainc(0.5, 1.0 / (2 * t))))
    res.add("m=1 tail vs regularized incomplete gamma", worst, 0.0, worst, 1e-10)
    lam = 1.5
    d = laws.s0_density_m2(lam, lam * (1 - 1e-5), 0.3, 0.7)
    e = laws.s0_density_m2(lam, lam, 0.3, 0.7)
    res.add("distinct->equal eigenvalue limit", d, e, abs(d - e) / e, 1e-4, "rel")


@_timed
def check_t0_law(seed=1, budget="desk") -> CheckResult:
    """Criterion 9 with the sum form ``int_0^{1/2t} f + tail = 1`` (fails, see above)."""
    res = CheckResult(9, "T0 law chain (sum identity)")
    _t0_common(res)
    worst = 0.0
    for lams in T0_GRID_LAMBDAS:
        for nu in T0_GRID_NUS:
            for t in T0_GRID_TIMES:
                worst = max(worst, abs(s0_t0_stated_identity(lams, nu, t) - 1.0))
    res.add("max |int_0^{1/2t} f + tail - 1|", worst, 0.0, worst, 1e-5)
    return res


@_timed
def check_t0_law_corrected(seed=1, budget="desk") -> CheckResult:
    """Criterion 9 with the identity ``int_0^{1/2t} f = tail(t)``."""
    res = CheckResult(9, "T0 law chain (corrected identity)")
    _t0_common(res)
    worst = 0.0
    for lams in T0_GRID_LAMBDAS:
        for nu in T0_GRID_NUS:
            for t in T0_GRID_TIMES:
                worst = max(worst, abs(s0_t0_corrected_identity(lams, nu, t)))
    res.add("max |int_0^{1/2t} f - tail|", worst, 0.0, worst, 1e-5)
    for lams in T0_GRID_LAMBDAS[:1]:
        mass, _ = laws.s0_total_mass_m2(lams[0], lams[1], 0.5)
        res.add("S0 density total mass", mass, 1.0, abs(mass - 1.0), 1e-5)
    return res


@_timed
def check_hartman_watson(seed=1, budget="desk") -> CheckResult:
    b = _budget(budget)
    res = CheckResult(10, "generalized Hartman-Watson")
    x, y = np.diag([2.0, 1.0]), np.diag([1.5, 0.5])
    sx = np.sqrt(x)
    z = np.linalg.eigvalsh(sx @ y @ sx / 4.0)
    a = laws.hw_laplace(z, 0.7, 2, "matrix")
    bb = laws.hw_laplace(z, 0.7, 2, "bessel")
    res.add("matrix vs Bessel route (x=diag(2,1), y=diag(1.5,0.5))", a, bb, abs(a - bb), 1e-8)
    for l1, l2 in b["hw_pairs"]:
        zz = [l1 * l1 / 4, l2 * l2 / 4]
        for nu in (0.5, 1.0):
            a = laws.hw_laplace(zz, nu, 2, "matrix")
            bb = laws.hw_laplace(zz, nu, 2, "bessel")
            res.add(f"matrix vs Bessel route ({l1},{l2}) nu={nu}", a, bb, abs(a - bb), 1e-8)
        mass, _ = laws.hw_integral(l1, l2)
        res.add(f"density mass ({l1},{l2})", mass, 1.0, abs(mass - 1.0), 1e-3)
        for nu in b["hw_nus"]:
            lt, _ = laws.hw_integral(l1, l2, lambda v, nu=nu: math.exp(-0.5 * nu * nu * v))
            ref = laws.hw_laplace(zz, nu, 2, "bessel")
            res.add(f"Laplace round trip ({l1},{l2}) nu={nu}", lt, ref, abs(lt - ref), 1e-3)
    return res


@_timed
def check_non_collision(seed=1, budget="desk", threads=None) -> CheckResult:
    b = _budget(budget)
    res = CheckResult(11, "non-collision")
    cfg = process.SimConfig(m=3, delta=3.0, x0=np.array([3.0, 2.0, 1.0]), t_end=1.0,
                            n_steps=b["collision_steps"], n_paths=b["collision_paths"], seed=seed,
                            scheme="eigen", record=True)
    ps = process.simulate(cfg, threads=threads)
    s = ps.states
    ok = (s[..., 0] > s[..., 1]) & (s[..., 1] > s[..., 2]) & (s[..., 2] >= 0)
    viol = int(np.sum(~ok))
    res.add("ordering violations", viol, 0, viol, 0)
    res.add("forced (depth-capped) steps", ps.n_forced, 0, ps.n_forced, max(1, cfg.n_paths // 1000),
            passed=ps.n_forced <= max(1, cfg.n_paths // 1000))
    return res


CAMPAIGNS = (
    check_zonal_normalization,
    check_gross_richards,
    check_two_matrix,
    check_laplace,
    check_trace_law,
    check_additivity,
    check_eigen_semigroup,
    check_girsanov,
    check_t0_law_corrected,
    check_hartman_watson,
    check_non_collision,
)


THREADED = {"check_eigen_semigroup", "check_girsanov", "check_non_collision"}


def run_all(seed=1, budget="desk", threads=None, progress=None) -> list[CheckResult]:
    out = []
    for fn in CAMPAIGNS:
        kwargs = {"seed": seed, "budget": budget}
        if fn.__name__ in THREADED:
            kwargs["threads"] = threads
        res = fn(**kwargs)
        if progress:
            progress(res)
        out.append(res)
    return out
