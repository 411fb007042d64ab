import io
import math

import numpy as np
import pytest
from scipy import stats

from laguerre import laws, process
from laguerre.mathyp import HermitianMatrix
from laguerre.process import (
    FactorizationError,
    Path,
    SimConfig,
    SingularityError,
    additivity_check,
    eigen_step,
    euler_step,
    exact_marginals,
    girsanov_log_weight,
    initial_factor,
    sample_complex_gaussian_matrix,
    sample_exact,
    simulate,
)


def test_complex_gaussian_moments():
    g = sample_complex_gaussian_matrix(1, 1, np.random.default_rng(0), size=100_000)[:, 0, 0]
    assert np.var(g.real) == pytest.approx(1.0, abs=0.02)
    assert abs(np.mean(g * g)) < 0.04
    assert np.mean(g * np.conj(g)).real == pytest.approx(2.0, abs=0.04)


def test_counter_gaussian_moments():
    paths = np.arange(50_000, dtype=np.uint64)
    g = process.counter_gaussian_matrices(3, 0, paths, 0, 0, 2, 1).reshape(-1)
    assert np.var(g.real) == pytest.approx(1.0, abs=0.02)
    assert np.var(g.imag) == pytest.approx(1.0, abs=0.02)
    assert abs(np.mean(g * g)) < 0.04  # sd of the mean is sqrt(8 / n) = 0.013
    assert abs(np.corrcoef(g.real[:-1], g.real[1:])[0, 1]) < 0.02


@pytest.mark.parametrize("n,x0", [(3, "2,1"), (1, "rank1"), (2, "I")])
def test_initial_factor(n, x0):
    if x0 == "rank1":
        x = HermitianMatrix.from_spectrum([1.5, 0.0], rotation_seed=2)
    elif x0 == "I":
        x = HermitianMatrix.identity(2)
    else:
        x = HermitianMatrix.from_spectrum([2.0, 1.0], rotation_seed=1)
    b0 = initial_factor(n, x)
    assert b0.shape == (n, 2)
    assert np.allclose(b0.conj().T @ b0, x.entries, atol=1e-12)


def test_initial_factor_errors():
    with pytest.raises(FactorizationError):
        initial_factor(2, np.diag([1.0, -0.5]))
    with pytest.raises(FactorizationError):
        initial_factor(1, np.diag([1.0, 0.5]))


def test_sample_exact_t0_and_laplace():
    x0 = HermitianMatrix.from_spectrum([1.0, 0.3], rotation_seed=3)
    assert np.array_equal(sample_exact(2, 2, x0, 0.0, np.random.default_rng(1)).entries, x0.entries)
    xs = exact_marginals(2, "zero" if False else HermitianMatrix.zeros(2), 1.0, 7, 100_000)
    vals = np.exp(-0.5 * np.real(np.trace(xs, axis1=1, axis2=2)))
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - 1 / 16) <= 3 * se


def test_factor_choice_does_not_change_law():
    # left-multiplying B0 by a unitary leaves the law of B_t^* B_t unchanged
    x0 = HermitianMatrix.from_spectrum([2.0, 0.5], rotation_seed=5)
    rng = np.random.default_rng(11)
    b0 = initial_factor(3, x0)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    u = 0.3 * np.eye(2)
    means = []
    for b in (b0, q @ b0):
        g = process.counter_gaussian_matrices(2, 0, np.arange(60_000, dtype=np.uint64), 0, 0, 3, 2)
        bt = b[None] + g
        xs = np.conj(np.swapaxes(bt, 1, 2)) @ bt
        v = np.exp(-np.real(np.einsum("ij,pji->p", u, xs)))
        means.append((v.mean(), v.std() / math.sqrt(len(v))))
    cf = laws.laplace_transform(laws.LawQuery(m=2, delta=3, x=x0, t=1.0, u=u))
    for mean, se in means:
        assert abs(mean - cf) <= 3 * se


def test_trace_law_m1():
    for n in (1, 3):
        xs = exact_marginals(n, HermitianMatrix.zeros(1), 0.7, 2, 10_000)
        ks = stats.kstest(xs[:, 0, 0].real / 1.4, stats.gamma(n).cdf)
        assert ks.pvalue > 0.01


def test_euler_step_examples():
    x = HermitianMatrix.from_spectrum([2.0, 1.0], rotation_seed=1)
    out = euler_step(x, 2.5, 0.01, np.zeros((2, 2)))
    assert np.allclose(out.entries, x.entries + 0.05 * np.eye(2), atol=1e-15)
    db = np.array([[0.3 + 0.1j, -0.2], [0.5j, 0.1]])
    out = euler_step(HermitianMatrix.zeros(2), 2.0, 0.01, db)
    assert np.allclose(out.entries, 0.04 * np.eye(2), atol=1e-15)


def test_euler_step_general_m_uses_clamped_root():
    x = np.diag([1.0, 0.0, -1e-14]).astype(complex)
    db = np.eye(3) * 0.1
    out = euler_step(HermitianMatrix(x), 3.0, 0.0, db).entries
    assert np.allclose(out, x + 0.2 * np.diag([1.0, 0.0, 0.0]), atol=1e-12)


def test_euler_mean_trace():
    cfg = SimConfig(m=2, delta=2.0, x0="I", t_end=1.0, n_steps=100, n_paths=10_000, seed=4, scheme="euler")
    tr = np.real(np.trace(simulate(cfg).final, axis1=1, axis2=2))
    assert abs(tr.mean() - 10.0) <= 3 * tr.std(ddof=1) / math.sqrt(len(tr))


def _euler_min_ratio(n_steps):
    cfg = SimConfig(m=3, delta=3.0, x0=np.array([1.0, 0.5, 0.1]), t_end=0.5, n_steps=n_steps, n_paths=500,
                    seed=9, scheme="euler", record=True)
    s = simulate(cfg).states
    herm = np.max(np.abs(s - np.conj(np.swapaxes(s, -1, -2))))
    lam = np.linalg.eigvalsh(s)
    return herm, float(np.min(lam[..., 0] / np.max(np.abs(lam), axis=-1))), cfg.h


def test_euler_states_hermitian_and_negative_part_order_h():
    # a clamped Euler step overshoots 0 with probability about P(Z < -sqrt 2) once the
    # smallest eigenvalue is O(h), so the negative part is O(h), not round-off
    herm1, r1, h1 = _euler_min_ratio(50)
    herm2, r2, h2 = _euler_min_ratio(500)
    assert herm1 <= 1e-10 and herm2 <= 1e-10
    assert r1 >= -40 * h1 and r2 >= -40 * h2
    assert r2 > r1 / 4


def test_increment_covariance():
    x = HermitianMatrix.from_spectrum([2.0, 0.7], rotation_seed=6)
    h = 1e-3
    g = math.sqrt(h) * process.counter_gaussian_matrices(5, 0, np.arange(100_000, dtype=np.uint64), 0, 0, 2, 2)
    xs = np.broadcast_to(x.entries, g.shape)
    dx = process.euler_step_batch(xs, 2.0, h, g) - xs
    dx = dx - dx.mean(axis=0)
    X = x.entries
    worst = 0.0
    for i, j, k, l in np.ndindex(2, 2, 2, 2):
        emp = np.mean(dx[:, i, j] * dx[:, k, l])
        ref = 2 * h * (X[i, l] * (k == j) + X[k, j] * (i == l))
        worst = max(worst, abs(emp - ref))
    assert worst <= 0.05 * 2 * h * np.max(np.abs(X))


def test_eigen_step_examples():
    lam = eigen_step([2.0, 1.0], 2.0, 0.01, [0.0, 0.0])
    assert lam == pytest.approx((2.1, 0.98), abs=1e-14)
    (l1,) = eigen_step([1.3], 1.5, 0.02, [0.1])
    assert l1 == pytest.approx(1.3 + 2 * math.sqrt(1.3) * 0.1 + 2 * 1.5 * 0.02, rel=1e-14)


def test_eigen_mean_trace_and_ordering():
    cfg = SimConfig(m=2, delta=2.0, x0=np.array([2.0, 1.0]), t_end=1.0, n_steps=200, n_paths=10_000, seed=3,
                    scheme="eigen", record=True)
    ps = simulate(cfg)
    tr = ps.final.sum(axis=1)
    assert abs(tr.mean() - (3.0 + 8.0)) <= 3 * tr.std(ddof=1) / math.sqrt(len(tr))
    s = ps.states
    assert np.all(s[..., 0] > s[..., 1]) and np.all(s[..., 1] >= 0)


def test_girsanov_weight_examples():
    x0 = HermitianMatrix.identity(2)
    x1 = HermitianMatrix(np.diag([1.4, 1.1]))
    path = Path(times=np.array([0.0, 0.1]), states=[x0.entries, x1.entries], rng_stream_id=0)
    assert girsanov_log_weight(path, 0.0) == 0.0
    nu = 0.5
    direct = 0.5 * nu * math.log(1.4 * 1.1) - 0.5 * nu**2 * 0.05 * (2.0 + 1 / 1.4 + 1 / 1.1)
    assert girsanov_log_weight(path, nu) == pytest.approx(direct, rel=1e-14)
    bad = Path(times=np.array([0.0, 0.1]), states=[x0.entries, np.diag([1.0, 0.0])], rng_stream_id=0)
    with pytest.raises(SingularityError):
        girsanov_log_weight(bad, nu)


def test_girsanov_vectorized_matches_per_path():
    cfg = SimConfig(m=2, delta=2, x0="I", t_end=0.2, n_steps=20, n_paths=5, seed=2, scheme="exact", record=True)
    ps = simulate(cfg, track_inverse=True)
    w = process.girsanov_log_weights(ps, 0.5)
    for i in range(5):
        assert w[i] == pytest.approx(girsanov_log_weight(ps.path(i), 0.5), rel=1e-12)
    # the compiled exact-path kernel gives the same integral
    ps2 = simulate(SimConfig(m=2, delta=2, x0="I", t_end=0.2, n_steps=20, n_paths=5, seed=2, scheme="exact"),
                   track_inverse=True)
    assert np.allclose(ps2.final, ps.final, atol=1e-13)
    assert np.allclose(ps2.int_trace_inv, ps.int_trace_inv, rtol=1e-12)


def test_additivity_examples():
    r = additivity_check(1, 1, 2, "zero", "zero", 1.0, 50_000, seed=3, u=0.5 * np.eye(2))
    assert r.closed_form == pytest.approx(1 / 16) and r.passed
    r0 = additivity_check(1, 2, 2, np.diag([1.0, 0.0]), "I", 0.0, 10)
    assert r0.estimate == pytest.approx(r0.closed_form, rel=1e-15) and r0.z_score == 0.0
    r = additivity_check(2, 1, 2, "I", "zero", 1.0, 50_000, seed=4, u=0.2 * np.eye(2))
    cf = laws.laplace_transform(laws.LawQuery(m=2, delta=3, x="I", t=1.0, u=0.2 * np.eye(2)))
    assert r.closed_form == pytest.approx(cf) and r.passed


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(m=2, delta=1.5, x0="I", t_end=1.0, scheme="exact")
    with pytest.raises(ValueError):
        SimConfig(m=2, delta=0.9, x0="I", t_end=1.0, scheme="euler")
    with pytest.raises(ValueError):
        SimConfig(m=2, delta=2.0, x0=np.array([1.0, 1.0]), t_end=1.0, scheme="eigen")
    with pytest.raises(FactorizationError):
        SimConfig(m=2, delta=2.0, x0=np.diag([1.0, -1.0]), t_end=1.0)


@pytest.mark.parametrize("scheme,x0", [("euler", "I"), ("eigen", np.array([2.0, 1.0])), ("exact", "I")])
def test_determinism_across_threads(scheme, x0):
    cfg = SimConfig(m=2, delta=2.0, x0=x0, t_end=0.3, n_steps=10, n_paths=9000, seed=12, scheme=scheme)
    a = simulate(cfg, threads=1)
    b = simulate(cfg, threads=3)
    assert np.array_equal(a.final, b.final)
    assert a.n_forced == b.n_forced and a.n_halvings == b.n_halvings


def test_export_round_trip():
    cfg = SimConfig(m=2, delta=2.5, x0="I", t_end=0.1, n_steps=3, n_paths=4, seed=1, scheme="euler", record=True)
    ps = simulate(cfg)
    text = process.to_csv_string(ps)
    lines = text.splitlines()
    assert lines[0].startswith("path,time,x11_re,x11_im")
    assert len(lines) == 1 + 4 * 4
    row = lines[6].split(",")
    p, k = int(row[0]), 1
    vals = np.array([float(v) for v in row[2:]])
    flat = ps.states[p, k].reshape(-1)
    assert np.array_equal(vals, np.column_stack([flat.real, flat.imag]).reshape(-1))
    buf = io.BytesIO()
    process.write_binary(ps, buf)
    raw = buf.getvalue()
    assert raw[:4] == b"LAGP"
    back = process.read_binary(io.BytesIO(raw))
    assert back["m"] == 2 and back["n_steps"] == 3 and back["n_paths"] == 4 and back["seed"] == 1
    assert np.array_equal(back["states"], ps.states)
    assert np.array_equal(back["times"], ps.times)


def test_export_eigen_binary():
    cfg = SimConfig(m=3, delta=3.0, x0=np.array([3.0, 2.0, 1.0]), t_end=0.1, n_steps=5, n_paths=3, seed=2,
                    scheme="eigen", record=True)
    ps = simulate(cfg)
    buf = io.BytesIO()
    process.write_binary(ps, buf)
    back = process.read_binary(io.BytesIO(buf.getvalue()))
    assert back["eigen"] and np.array_equal(back["states"], ps.states)
    with pytest.raises(ValueError):
        process.read_binary(io.BytesIO(b"XXXX" + buf.getvalue()[4:]))
