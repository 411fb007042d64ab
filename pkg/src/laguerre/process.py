"""Simulation of Laguerre (complex Wishart) processes.

Three schemes are available:

``exact``
    integer dimension ``n``: ``X_t = B_t^* B_t`` with ``B`` an ``n x m``
    complex Brownian matrix started at a factor of ``x0``.  States on the
    time grid are exact samples.
``euler``
    Euler-Maruyama for ``dX = sqrt(X+) dB + dB^* sqrt(X+) + 2 delta I dt``
    with eigenvalue clamping inside the square root.
``eigen``
    Euler for the eigenvalue system with adaptive Brownian-bridge halving
    whenever a step would break ordering or positivity.

All Gaussian draws come from a counter-based generator addressed by
``(seed, stream, path, step, node)``, so results do not depend on how paths
are split across workers.
"""
from __future__ import annotations

import io
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .mathyp import HermitianMatrix, spectrum_of
from .report import McReport

SCHEMES = ("exact", "euler", "eigen")
BLOCK_SIZE = 4096
PSD_TOL = 1e-12
SINGULAR_EIG = 1e-12

# stream ids; the eigen kernel uses stream + 1 for its bridge normals
STREAM_EXACT = 0
STREAM_EULER = 2
STREAM_EIGEN = 4
STREAM_EXTRA = 6


class FactorizationError(ValueError):
    pass


class SingularityError(ArithmeticError):
    pass


def _as_hermitian(x, m=None) -> HermitianMatrix:
    if isinstance(x, HermitianMatrix):
        return x
    if isinstance(x, str):
        if m is None:
            raise ValueError("dimension needed for symbolic matrix")
        if x == "zero":
            return HermitianMatrix.zeros(m)
        if x in ("I", "identity"):
            return HermitianMatrix.identity(m)
        raise ValueError(f"unknown matrix name {x!r}")
    a = np.asarray(x)
    if a.ndim == 2:
        return HermitianMatrix(a)
    return HermitianMatrix.from_spectrum(a)


@dataclass
class SimConfig:
    m: int
    delta: float
    x0: HermitianMatrix
    t_end: float
    n_steps: int = 100
    n_paths: int = 1000
    seed: int = 0
    scheme: str = "euler"
    record: bool = False
    stream: int | None = None

    def __post_init__(self):
        self.x0 = _as_hermitian(self.x0, self.m)
        if self.x0.m != self.m:
            raise ValueError(f"x0 has size {self.x0.m}, expected {self.m}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.n_steps < 1 or self.n_paths < 1:
            raise ValueError("n_steps and n_paths must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        lam = self.x0.eigenvalues
        if lam[-1] < -PSD_TOL * max(1.0, abs(lam[0])):
            raise FactorizationError("x0 is not positive semidefinite")
        if self.scheme == "exact":
            if float(self.delta) != int(self.delta) or self.delta < 1:
                raise ValueError("exact scheme needs a positive integer dimension")
        elif self.delta <= self.m - 1:
            raise ValueError(f"delta must exceed m - 1 = {self.m - 1}")
        if self.scheme == "eigen":
            if lam[-1] <= 0 or np.any(np.diff(lam) >= 0):
                raise ValueError("eigen scheme needs distinct positive initial eigenvalues")

    @property
    def h(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)

    def stream_id(self) -> int:
        if self.stream is not None:
            return int(self.stream)
        return {"exact": STREAM_EXACT, "euler": STREAM_EULER, "eigen": STREAM_EIGEN}[self.scheme]


@dataclass
class Path:
    times: np.ndarray
    states: np.ndarray
    rng_stream_id: int
    girsanov_log_weight: float | None = None

    @property
    def is_eigen(self) -> bool:
        return np.ndim(self.states) == 2


@dataclass
class PathSet:
    """Simulation output.  ``final`` is always present; ``states`` only when
    the configuration asked to record trajectories."""

    config: SimConfig
    final: np.ndarray
    states: np.ndarray | None = None
    int_trace_inv: np.ndarray | None = None
    n_halvings: int = 0
    n_forced: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def times(self):
        return self.config.times

    @property
    def is_eigen(self) -> bool:
        return self.config.scheme == "eigen"

    def __len__(self):
        return self.final.shape[0]

    def path(self, i: int) -> Path:
        if self.states is None:
            raise ValueError("trajectories were not recorded")
        return Path(self.times, self.states[i], i)

    def final_spectra(self) -> np.ndarray:
        if self.is_eigen:
            return self.final
        return np.linalg.eigvalsh(self.final)[:, ::-1]


# -- Gaussian matrices --------------------------------------------------------

def sample_complex_gaussian_matrix(n: int, m: int, rng, size=None) -> np.ndarray:
    """``n x m`` complex matrix with independent N(0,1) real and imaginary parts."""
    shape = (n, m) if size is None else (size, n, m)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def counter_gaussian_matrices(seed, stream, paths, step, node, n, m) -> np.ndarray:
    """Counter-addressed complex Gaussian matrices, shape ``(len(paths), n, m)``."""
    z = _kernels.counter_normals(seed, stream, paths, step, node, 2 * n * m)
    z = z.reshape(len(paths), n, m, 2)
    return z[..., 0] + 1j * z[..., 1]


def initial_factor(n: int, x0) -> np.ndarray:
    """An ``n x m`` factor ``B0`` with ``B0^* B0 = x0``.

    For ``n >= m`` this is the PSD square root padded with zero rows; for
    ``n < m`` it keeps the top ``n`` eigen-directions and requires the
    remaining eigenvalues to vanish.
    """
    x0 = _as_hermitian(x0)
    m = x0.m
    lam, v = x0.eigenvalues, x0.eigenvectors
    scale = max(1.0, abs(lam[0]))
    if lam[-1] < -PSD_TOL * scale:
        raise FactorizationError("x0 is not positive semidefinite")
    lam = np.maximum(lam, 0.0)
    if n >= m:
        b0 = np.zeros((n, m), dtype=complex)
        b0[:m] = x0.sqrt_psd()
        return b0
    if np.any(lam[n:] > 1e-10 * scale):
        raise FactorizationError(f"x0 has rank > {n}; no {n} x {m} factor exists")
    return (np.sqrt(lam[:n])[:, None]) * v[:, :n].conj().T


def sample_exact(n: int, m: int, x0, t: float, rng) -> HermitianMatrix:
    """Exact draw of ``X_t`` for integer dimension ``n``."""
    b0 = initial_factor(n, _as_hermitian(x0, m))
    if t == 0:
        return _as_hermitian(x0, m)
    bt = b0 + math.sqrt(t) * sample_complex_gaussian_matrix(n, m, rng)
    return HermitianMatrix(bt.conj().T @ bt)


def exact_marginals(n: int, x0, t: float, seed: int, n_paths: int, stream: int = STREAM_EXACT,
                    path_start: int = 0) -> np.ndarray:
    """``n_paths`` exact samples of ``X_t``, shape ``(n_paths, m, m)``."""
    x0 = _as_hermitian(x0)
    b0 = initial_factor(n, x0)
    paths = np.arange(path_start, path_start + n_paths, dtype=np.uint64)
    g = counter_gaussian_matrices(seed, stream, paths, 0, 0, n, x0.m)
    bt = b0[None] + math.sqrt(t) * g
    return _hermitize(np.conj(np.swapaxes(bt, 1, 2)) @ bt)


# -- Euler scheme --------------------------------------------------------------

def _hermitize(x):
    return 0.5 * (x + np.conj(np.swapaxes(x, -1, -2)))


def _sqrt_clamped_2x2(x):
    a = x[..., 0, 0].real
    d = x[..., 1, 1].real
    b = x[..., 0, 1]
    half_tr = 0.5 * (a + d)
    disc = np.sqrt((0.5 * (a - d)) ** 2 + np.abs(b) ** 2)
    l1 = half_tr + disc
    l2 = half_tr - disc
    eye = np.eye(2)
    out = np.zeros_like(x)
    both = l2 >= 0
    if np.any(both):
        s1 = np.sqrt(l1[both])
        s2 = np.sqrt(l2[both])
        den = s1 + s2
        safe = np.where(den > 0, den, 1.0)
        val = (x[both] + (s1 * s2)[:, None, None] * eye) / safe[:, None, None]
        out[both] = np.where((den > 0)[:, None, None], val, 0.0)
    one = (l2 < 0) & (l1 > 0)
    if np.any(one):
        proj = (x[one] - l2[one][:, None, None] * eye) / (l1[one] - l2[one])[:, None, None]
        out[one] = np.sqrt(l1[one])[:, None, None] * proj
    return out


def sqrt_clamped(x) -> np.ndarray:
    """Batched PSD square root of Hermitian matrices with negative eigenvalues set to 0."""
    x = np.asarray(x)
    if x.shape[-1] == 2:
        return _sqrt_clamped_2x2(x)
    w, v = np.linalg.eigh(x)
    return (v * np.sqrt(np.maximum(w, 0.0))[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def euler_step_batch(x, delta, h, db):
    """Vectorized Euler step on a stack of matrices ``x`` of shape ``(P, m, m)``."""
    s = sqrt_clamped(x)
    m = x.shape[-1]
    inc = s @ db
    new = x + inc + np.conj(np.swapaxes(inc, -1, -2)) + (2.0 * delta * h) * np.eye(m)
    return _hermitize(new)


def euler_step(X, delta: float, h: float, dB) -> HermitianMatrix:
    """``X + sqrt(X+) dB + dB^* sqrt(X+) + 2 delta h I``, re-Hermitized."""
    x = _as_hermitian(X)
    db = np.asarray(dB, dtype=complex)
    new = euler_step_batch(x.entries[None], delta, h, db[None])[0]
    return HermitianMatrix(new)


# -- eigenvalue scheme ---------------------------------------------------------

def eigen_step(lambdas, delta: float, h: float, dW, seed: int = 0, path: int = 0, step: int = 0):
    """One guarded Euler step of the eigenvalue system.

    ``dW`` holds the Brownian increments (variance ``h``).  Returns the new
    ordered eigenvalues.
    """
    lam = np.asarray(lambdas, dtype=float)
    out, _, _ = _kernels.eigen_step(lam, float(delta), float(h), np.asarray(dW, dtype=float),
                                    seed, STREAM_EIGEN, path, step)
    return tuple(float(v) for v in out)


# -- driver ----------------------------------------------------------------------

def _blocks(n_paths: int):
    return [(s, min(BLOCK_SIZE, n_paths - s)) for s in range(0, n_paths, BLOCK_SIZE)]


def _trace_inv_from_matrices(x):
    if x.shape[-1] == 2:
        det = (x[..., 0, 0].real * x[..., 1, 1].real - np.abs(x[..., 0, 1]) ** 2)
        return (x[..., 0, 0].real + x[..., 1, 1].real) / det
    return np.sum(1.0 / np.linalg.eigvalsh(x), axis=-1)


def _run_block(cfg: SimConfig, start: int, count: int, track_inverse: bool):
    m, h = cfg.m, cfg.h
    stream = cfg.stream_id()
    paths = np.arange(start, start + count, dtype=np.uint64)
    res = {"halvings": 0, "forced": 0}
    if cfg.scheme == "eigen":
        final, traj, nh, nf = _kernels.eigen_paths(
            cfg.x0.eigenvalues, float(cfg.delta), float(cfg.t_end), cfg.n_steps, cfg.seed, stream,
            start, count, cfg.record or track_inverse,
        )
        res.update(final=final, halvings=nh, forced=nf)
        if track_inverse:
            inv = np.sum(1.0 / traj, axis=-1)
            res["int_trace_inv"] = h * (inv.sum(axis=1) - 0.5 * (inv[:, 0] + inv[:, -1]))
        if cfg.record:
            res["states"] = traj
        return res
    if cfg.scheme == "exact" and not cfg.record:
        final, acc = _kernels.gram_paths(initial_factor(int(cfg.delta), cfg.x0), h, cfg.n_steps,
                                         cfg.seed, stream, start, count)
        res["final"] = final
        if track_inverse:
            res["int_trace_inv"] = acc
        return res
    if cfg.scheme == "exact":
        n = int(cfg.delta)
        b = np.broadcast_to(initial_factor(n, cfg.x0), (count, n, m)).copy()
        state = _hermitize(np.conj(np.swapaxes(b, 1, 2)) @ b)
    else:
        n = m
        state = np.broadcast_to(cfg.x0.entries, (count, m, m)).copy()
    traj = None
    if cfg.record:
        traj = np.empty((count, cfg.n_steps + 1, m, m), dtype=complex)
        traj[:, 0] = state
    acc = None
    if track_inverse:
        prev = _trace_inv_from_matrices(state)
        acc = np.zeros(count)
    sqh = math.sqrt(h)
    for s in range(cfg.n_steps):
        g = counter_gaussian_matrices(cfg.seed, stream, paths, s, 0, n, m)
        if cfg.scheme == "exact":
            b = b + sqh * g
            state = _hermitize(np.conj(np.swapaxes(b, 1, 2)) @ b)
        else:
            state = euler_step_batch(state, cfg.delta, h, sqh * g)
        if cfg.record:
            traj[:, s + 1] = state
        if track_inverse:
            cur = _trace_inv_from_matrices(state)
            acc += 0.5 * h * (prev + cur)
            prev = cur
    res["final"] = state
    if cfg.record:
        res["states"] = traj
    if track_inverse:
        res["int_trace_inv"] = acc
    return res


def default_threads() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover - non-Linux
        return max(1, os.cpu_count() or 1)


def simulate(cfg: SimConfig, threads: int | None = None, track_inverse: bool = False) -> PathSet:
    """Simulate ``cfg.n_paths`` paths.

    ``track_inverse`` accumulates the trapezoid integral of ``tr(X_s^{-1})``
    along each path.  Output is identical for any ``threads``.
    """
    threads = threads or default_threads()
    blocks = _blocks(cfg.n_paths)
    if threads == 1 or len(blocks) == 1:
        results = [_run_block(cfg, s, c, track_inverse) for s, c in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda b: _run_block(cfg, b[0], b[1], track_inverse), blocks))
    out = PathSet(
        config=cfg,
        final=np.concatenate([r["final"] for r in results]),
        n_halvings=sum(r["halvings"] for r in results),
        n_forced=sum(r["forced"] for r in results),
    )
    if cfg.record:
        out.states = np.concatenate([r["states"] for r in results])
    if track_inverse:
        out.int_trace_inv = np.concatenate([r["int_trace_inv"] for r in results])
    return out


# -- Girsanov ----------------------------------------------------------------

def _spectra(states, eigen: bool):
    if eigen:
        return np.asarray(states, dtype=float)
    return np.linalg.eigvalsh(np.asarray(states))


def girsanov_log_weight(path: Path, nu: float) -> float:
    """``(nu/2) log(det X_t / det x0) - (nu^2/2) int_0^t tr(X_s^{-1}) ds``.

    The integral uses the trapezoid rule on the path grid.  Converts
    expectations under index ``m`` into expectations under ``m + nu``.
    """
    if nu == 0:
        return 0.0
    lam = _spectra(path.states, path.is_eigen)
    if np.min(lam) <= SINGULAR_EIG:
        raise SingularityError("path state is numerically singular")
    logdet = np.sum(np.log(lam), axis=-1)
    trinv = np.sum(1.0 / lam, axis=-1)
    integral = float(np.sum(0.5 * np.diff(path.times) * (trinv[1:] + trinv[:-1])))
    return 0.5 * nu * (logdet[-1] - logdet[0]) - 0.5 * nu * nu * integral


def girsanov_log_weights(paths: PathSet, nu: float) -> np.ndarray:
    """Vectorized weights from a PathSet simulated with ``track_inverse``."""
    if paths.int_trace_inv is None:
        raise ValueError("simulate(..., track_inverse=True) is required")
    lam_t = paths.final_spectra()
    if np.min(lam_t) <= SINGULAR_EIG:
        raise SingularityError("final state is numerically singular")
    lam0 = paths.config.x0.eigenvalues
    if np.min(lam0) <= SINGULAR_EIG:
        raise SingularityError("initial state is singular")
    logratio = np.sum(np.log(lam_t), axis=-1) - np.sum(np.log(lam0))
    return 0.5 * nu * logratio - 0.5 * nu * nu * paths.int_trace_inv


# -- additivity ----------------------------------------------------------------

def additivity_check(n: int, p: int, m: int, x0, y0, t: float, n_paths: int, seed: int = 0,
                     u=None) -> McReport:
    """Laplace transform of ``X_t + Y_t`` (independent exact samples of
    dimensions ``n`` and ``p``) against the closed form for dimension ``n + p``
    started at ``x0 + y0``."""
    from .laws import LawQuery, laplace_transform

    x0, y0 = _as_hermitian(x0, m), _as_hermitian(y0, m)
    u = _as_hermitian(u if u is not None else 0.5 * np.eye(m), m)
    s0 = HermitianMatrix(x0.entries + y0.entries)
    cf = laplace_transform(LawQuery(m=m, delta=n + p, x=s0, t=t, u=u))
    if t == 0:
        # no noise: the sum is exactly x0 + y0
        val = math.exp(-float(np.real(np.trace(u.entries @ s0.entries))))
        return McReport.compare(val, 0.0, cf, n_paths, label=f"additivity n={n} p={p} t=0")
    xs = exact_marginals(n, x0, t, seed, n_paths, stream=STREAM_EXACT)
    ys = exact_marginals(p, y0, t, seed, n_paths, stream=STREAM_EXTRA)
    vals = np.exp(-np.real(np.einsum("ij,pji->p", u.entries, xs + ys)))
    return McReport.from_samples(vals, cf, label=f"additivity n={n} p={p}")


# -- export ----------------------------------------------------------------------

MAGIC = b"LAGP"
VERSION = 1
_HEADER = struct.Struct("<4sHBBIIQQ")  # magic, version, kind, pad, m, n_steps, n_paths, seed


def _require_states(paths: PathSet):
    if paths.states is None:
        raise ValueError("export needs recorded trajectories (SimConfig.record=True)")


def write_csv(paths: PathSet, fh) -> None:
    """One row per ``(path, time)`` with the flattened state; 17 significant digits."""
    _require_states(paths)
    m = paths.config.m
    if paths.is_eigen:
        cols = [f"lambda{i + 1}" for i in range(m)]
    else:
        cols = [f"x{i + 1}{j + 1}_{part}" for i in range(m) for j in range(m) for part in ("re", "im")]
    fh.write(",".join(["path", "time"] + cols) + "\n")
    times = paths.times
    for p in range(paths.states.shape[0]):
        for k, t in enumerate(times):
            st = paths.states[p, k]
            if paths.is_eigen:
                vals = st
            else:
                flat = st.reshape(-1)
                vals = np.column_stack([flat.real, flat.imag]).reshape(-1)
            fh.write(f"{p},{t:.17g}," + ",".join(f"{v:.17g}" for v in vals) + "\n")


def write_binary(paths: PathSet, fh) -> None:
    """Little-endian: header, times (float64), states (float64 or complex128)."""
    _require_states(paths)
    cfg = paths.config
    kind = 1 if paths.is_eigen else 0
    fh.write(_HEADER.pack(MAGIC, VERSION, kind, 0, cfg.m, cfg.n_steps, paths.states.shape[0],
                          cfg.seed & 0xFFFFFFFFFFFFFFFF))
    fh.write(np.asarray(paths.times, dtype="<f8").tobytes())
    dtype = "<f8" if kind else "<c16"
    fh.write(np.ascontiguousarray(paths.states, dtype=dtype).tobytes())


def read_binary(fh) -> dict:
    raw = fh.read(_HEADER.size)
    magic, version, kind, _, m, n_steps, n_paths, seed = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise ValueError("not a path file")
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    times = np.frombuffer(fh.read(8 * (n_steps + 1)), dtype="<f8")
    if kind:
        states = np.frombuffer(fh.read(8 * n_paths * (n_steps + 1) * m), dtype="<f8")
        states = states.reshape(n_paths, n_steps + 1, m)
    else:
        states = np.frombuffer(fh.read(16 * n_paths * (n_steps + 1) * m * m), dtype="<c16")
        states = states.reshape(n_paths, n_steps + 1, m, m)
    return {"m": m, "n_steps": n_steps, "n_paths": n_paths, "seed": seed, "eigen": bool(kind),
            "times": times, "states": states}


def to_csv_string(paths: PathSet) -> str:
    buf = io.StringIO()
    write_csv(paths, buf)
    return buf.getvalue()
