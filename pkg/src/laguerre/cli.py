"""Command-line entry point.

Every option can also come from a flat ``key = value`` config file
(``--config``); explicit flags win over the file, the file wins over
defaults.  Matrices are given spectrum-first: ``zero``, ``I``, ``0.5*I``,
an eigenvalue list ``2,1`` (optionally conjugated by a seeded Haar unitary
via ``<name>_rotation``), or ``file:PATH`` with raw entries for ``numpy.loadtxt``.

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, laws, process, verify
from .mathyp import HermitianMatrix
from .report import McReport

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class ConfigError(UsageError):
    pass


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# name -> (type, default, help); defaults of None are filled per command
OPTIONS = {
    "m": (int, 2, "matrix size"),
    "delta": (float, None, "index (dimension) of the process"),
    "nu": (float, None, "index shift nu = delta - m"),
    "x": (str, "zero", "starting point"),
    "x_rotation": (int, None, "seed of the Haar unitary applied to an eigenvalue list for x"),
    "y": (str, None, "end point"),
    "y_rotation": (int, None, "seed of the Haar unitary applied to an eigenvalue list for y"),
    "u": (str, "0.5*I", "Laplace argument"),
    "u_rotation": (int, None, "seed of the Haar unitary applied to an eigenvalue list for u"),
    "t": (float, 1.0, "time horizon"),
    "steps": (int, 100, "time steps per path"),
    "paths": (int, 10000, "number of paths"),
    "seed": (int, None, "master seed (default: $LAGUERRE_SEED, else 0)"),
    "scheme": (str, None, "exact, euler or eigen"),
    "record": (_bool, False, "keep full trajectories"),
    "binary": (str, None, "also write trajectories to this binary file"),
    "l1": (float, None, "larger eigenvalue"),
    "l2": (float, None, "smaller eigenvalue"),
    "grid": (str, "0.1:10:100", "v grid as start:stop:count"),
    "t_grid": (str, "0.1:5:50", "t grid as start:stop:count"),
    "y1_grid": (str, "0.1:6:30", "y1 grid as start:stop:count"),
    "y2_grid": (str, "0.1:6:30", "y2 grid as start:stop:count"),
    "route": (str, "karlin-mcgregor", "karlin-mcgregor or unitary"),
    "budget": (str, "desk", "desk or full"),
}

COMMANDS = {
    "simulate": ("simulate paths and write them as CSV",
                 ["m", "delta", "x", "x_rotation", "t", "steps", "paths", "seed", "scheme", "record", "binary"]),
    "laplace-check": ("Monte Carlo Laplace transform against the closed form",
                      ["m", "delta", "x", "x_rotation", "t", "u", "u_rotation", "steps", "paths", "seed",
                       "scheme"]),
    "density": ("matrix transition density at one point",
                ["m", "delta", "nu", "x", "x_rotation", "y", "y_rotation", "t"]),
    "eigen-density": ("eigenvalue transition density on a grid of ordered pairs (m=2)",
                      ["delta", "nu", "x", "t", "y1_grid", "y2_grid", "route"]),
    "hw": ("generalized Hartman-Watson density (m=2) on a v grid",
           ["l1", "l2", "nu", "grid"]),
    "t0": ("tail of the first hitting time of the boundary",
           ["m", "nu", "x", "x_rotation", "t_grid"]),
    "verify-all": ("run every verification campaign", ["seed", "budget"]),
}

ALL_KEYS = set(OPTIONS) | {"threads", "out", "format", "no_timestamp"}


# -- config ------------------------------------------------------------------------

def load_config(path, command: str | None = None) -> dict:
    """Parse a flat ``key = value`` file into typed values.

    ``#`` starts a comment.  Keys may use ``-`` or ``_``.  Unknown keys (for
    ``command`` when given) are errors.
    """
    allowed = set(COMMANDS[command][1]) | {"threads", "out", "format", "no_timestamp"} if command else ALL_KEYS
    types = dict((k, v[0]) for k, v in OPTIONS.items())
    types.update(threads=int, out=str, format=str, no_timestamp=_bool)
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            raise ConfigError(f"{path}:{lineno}: missing key")
        if key not in allowed:
            where = f" for '{command}'" if command else ""
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'{where}")
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        try:
            out[key] = types[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for '{key}': {exc}") from None
    return out


# -- argument parsing -----------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="flat key = value file; explicit flags override it")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: available cores)")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="output format (default csv)")
    p.add_argument("--no-timestamp", action="store_true", default=None,
                   help="omit the timestamp header and wall times (for diffing)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="laguerre", description="Matrix Laguerre processes: "
                                     "simulation, closed-form laws and verification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name, (help_, keys) in COMMANDS.items():
        p = sub.add_parser(name, help=help_, description=help_)
        _common(p)
        for key in keys:
            typ, default, h = OPTIONS[key]
            flag = "--" + key.replace("_", "-")
            if key == "record":
                p.add_argument(flag, action="store_true", default=None, help=h)
            else:
                dflt = f" (default {default})" if default is not None else ""
                p.add_argument(flag, dest=key, type=typ, default=None, help=h + dflt)
    return parser


def _resolve(args) -> dict:
    """Merge flags over config over defaults."""
    keys = COMMANDS[args.command][1] + ["threads", "out", "format", "no_timestamp"]
    cfg = load_config(args.config, args.command) if args.config else {}
    opts = {}
    for key in keys:
        val = getattr(args, key, None)
        if val is None:
            val = cfg.get(key)
        if val is None:
            val = OPTIONS[key][1] if key in OPTIONS else None
        opts[key] = val
    opts["format"] = opts["format"] or "csv"
    opts["no_timestamp"] = bool(opts["no_timestamp"])
    if "seed" in keys and opts["seed"] is None:
        env = os.environ.get("LAGUERRE_SEED")
        try:
            opts["seed"] = int(env) if env not in (None, "") else 0
        except ValueError:
            raise UsageError(f"LAGUERRE_SEED must be an integer, got {env!r}") from None
    if opts["threads"] is not None and opts["threads"] < 1:
        raise UsageError("--threads must be at least 1")
    return opts


def parse_matrix(spec, m: int, rotation_seed=None) -> HermitianMatrix:
    """``zero``, ``I``, ``c*I``, eigenvalue list ``a,b,...`` or ``file:PATH``."""
    s = str(spec).strip()
    try:
        if s == "zero":
            return HermitianMatrix.zeros(m)
        if s in ("I", "identity"):
            return HermitianMatrix.identity(m)
        if s.endswith("*I"):
            return HermitianMatrix(float(s[:-2]) * np.eye(m))
        if s.startswith("file:"):
            a = np.loadtxt(s[5:], dtype=complex, ndmin=2)
            return HermitianMatrix(a)
        eigs = [float(v) for v in s.replace(";", ",").split(",") if v.strip()]
    except (ValueError, OSError) as exc:
        raise UsageError(f"cannot parse matrix {spec!r}: {exc}") from None
    if len(eigs) == 1:
        eigs = eigs * m
    if len(eigs) != m:
        raise UsageError(f"matrix {spec!r} has {len(eigs)} eigenvalues, expected m={m}")
    if rotation_seed is None:
        return HermitianMatrix(np.diag(eigs).astype(complex))
    return HermitianMatrix.from_spectrum(eigs, rotation_seed=rotation_seed)


def parse_grid(spec) -> np.ndarray:
    try:
        a, b, n = str(spec).split(":")
        n = int(n)
        a, b = float(a), float(b)
    except ValueError:
        raise UsageError(f"grid {spec!r} must look like start:stop:count") from None
    if n < 1 or b < a:
        raise UsageError(f"grid {spec!r} needs count >= 1 and stop >= start")
    return np.linspace(a, b, n)


def _delta_nu(opts, m):
    delta, nu = opts.get("delta"), opts.get("nu")
    if delta is None and nu is None:
        raise UsageError("give --delta or --nu")
    if delta is None:
        delta = m + nu
    if nu is None:
        nu = delta - m
    if abs(delta - m - nu) > 1e-12:
        raise UsageError("--delta and --nu are inconsistent (need delta = m + nu)")
    return delta, nu


# -- output -----------------------------------------------------------------------------

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    s = str(v)
    return f'"{s}"' if ("," in s or '"' in s) else s


class Table:
    def __init__(self, columns):
        self.columns = list(columns)
        self.rows = []

    def add(self, *row):
        self.rows.append(list(row))

    def csv(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(_cell(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def records(self):
        def conv(v):
            if isinstance(v, (np.floating, float)):
                v = float(v)
                return v if math.isfinite(v) else str(v)
            if isinstance(v, np.integer):
                return int(v)
            return v

        return [{c: conv(v) for c, v in zip(self.columns, row)} for row in self.rows]


def _emit(opts, text: str, command: str):
    if opts["format"] == "csv" and not opts["no_timestamp"]:
        stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        text = f"# laguerre {command} {stamp}\n" + text
    if opts["out"]:
        with open(opts["out"], "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_table(opts, table: Table, command: str, extra=None):
    if opts["format"] == "json":
        payload = {"command": command, "rows": table.records()}
        if extra:
            payload.update(extra)
        _emit(opts, json.dumps(payload, indent=2, sort_keys=True) + "\n", command)
    else:
        _emit(opts, table.csv(), command)


def _report_dict(rep: McReport, no_timestamp: bool) -> dict:
    d = rep.as_dict()
    if no_timestamp:
        d["wall_time"] = None
    for k, v in d.items():
        if isinstance(v, float) and not math.isfinite(v):
            d[k] = str(v)
    return d


REPORT_FIELDS = ("label", "estimate", "std_error", "closed_form", "z_score", "verdict", "n_paths", "wall_time")


# -- commands ---------------------------------------------------------------------------

def cmd_simulate(opts):
    m = opts["m"]
    if opts["delta"] is None:
        raise UsageError("simulate needs --delta")
    x0 = parse_matrix(opts["x"], m, opts["x_rotation"])
    scheme = opts["scheme"] or "euler"
    if scheme == "eigen":
        x0 = x0.eigenvalues
    try:
        cfg = process.SimConfig(m=m, delta=opts["delta"], x0=x0, t_end=opts["t"], n_steps=opts["steps"],
                                n_paths=opts["paths"], seed=opts["seed"], scheme=scheme,
                                record=bool(opts["record"]) or bool(opts["binary"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ps = process.simulate(cfg, threads=opts["threads"])
    if opts["binary"]:
        with open(opts["binary"], "wb") as fh:
            process.write_binary(ps, fh)
    if opts["record"]:
        if opts["format"] == "json":
            raise UsageError("recorded trajectories are written as CSV or --binary")
        buf = io.StringIO()
        process.write_csv(ps, buf)
        _emit(opts, buf.getvalue(), "simulate")
        return EXIT_OK
    if ps.is_eigen:
        table = Table(["path"] + [f"lambda{i + 1}" for i in range(m)])
        for p, st in enumerate(ps.final):
            table.add(p, *st)
    else:
        cols = [f"x{i + 1}{j + 1}_{part}" for i in range(m) for j in range(m) for part in ("re", "im")]
        table = Table(["path"] + cols)
        for p, st in enumerate(ps.final):
            flat = st.reshape(-1)
            table.add(p, *np.column_stack([flat.real, flat.imag]).reshape(-1))
    _emit_table(opts, table, "simulate")
    return EXIT_OK


def cmd_laplace_check(opts):
    m = opts["m"]
    if opts["delta"] is None:
        raise UsageError("laplace-check needs --delta")
    delta = opts["delta"]
    x0 = parse_matrix(opts["x"], m, opts["x_rotation"])
    u = parse_matrix(opts["u"], m, opts["u_rotation"])
    scheme = opts["scheme"] or ("exact" if float(delta).is_integer() else "euler")
    if scheme == "eigen":
        raise UsageError("laplace-check needs a matrix scheme (exact or euler)")
    t0 = time.perf_counter()
    try:
        cfg = process.SimConfig(m=m, delta=delta, x0=x0, t_end=opts["t"], n_steps=opts["steps"],
                                n_paths=opts["paths"], seed=opts["seed"], scheme=scheme)
        cf = laws.laplace_transform(laws.LawQuery(m=m, delta=delta, x=x0, t=opts["t"], u=u))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if scheme == "exact":
        xs = process.exact_marginals(int(delta), x0, opts["t"], opts["seed"], opts["paths"])
    else:
        xs = process.simulate(cfg, threads=opts["threads"]).final
    vals = np.exp(-np.real(np.einsum("ij,pji->p", u.entries, xs)))
    rep = McReport.from_samples(vals, cf, wall_time=time.perf_counter() - t0,
                                label=f"laplace {scheme} m={m} delta={delta:g}")
    d = _report_dict(rep, opts["no_timestamp"])
    if opts["format"] == "json":
        _emit(opts, json.dumps(d, indent=2, sort_keys=True) + "\n", "laplace-check")
    else:
        table = Table(REPORT_FIELDS)
        table.add(*(d[k] for k in REPORT_FIELDS))
        _emit(opts, table.csv(), "laplace-check")
    if not rep.passed:
        print(f"verification failed: {rep.label}: z = {rep.z_score:.3g}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_density(opts):
    m = opts["m"]
    delta, nu = _delta_nu(opts, m)
    if opts["y"] is None:
        raise UsageError("density needs --y")
    x = parse_matrix(opts["x"], m, opts["x_rotation"])
    y = parse_matrix(opts["y"], m, opts["y_rotation"])
    try:
        dv = laws.transition_density(laws.LawQuery(m=m, delta=delta, x=x, y=y, t=opts["t"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    table = Table(["m", "delta", "t", "x_eigs", "y_eigs", "value", "log_value", "error_estimate", "flag"])
    err = dv.diagnostics.get("error_estimate", dv.diagnostics.get("truncation", 0.0))
    table.add(m, delta, opts["t"], " ".join(f"{v:.17g}" for v in x.eigenvalues),
              " ".join(f"{v:.17g}" for v in y.eigenvalues), dv.value, dv.log_value, float(err), dv.flag or "")
    _emit_table(opts, table, "density")
    return EXIT_OK


def cmd_eigen_density(opts):
    delta, nu = _delta_nu(opts, 2)
    x = parse_matrix(opts["x"], 2).eigenvalues
    y1, y2 = parse_grid(opts["y1_grid"]), parse_grid(opts["y2_grid"])
    if opts["route"] not in ("karlin-mcgregor", "unitary"):
        raise UsageError("--route must be karlin-mcgregor or unitary")
    table = Table(["delta", "t", "x1", "x2", "y1", "y2", "value", "error_estimate"])
    for a in y1:
        for b in y2:
            if b >= a:
                continue
            try:
                dv = laws.eigen_semigroup(laws.LawQuery(m=2, delta=delta, x=x, y=np.array([a, b]), t=opts["t"]),
                                          route=opts["route"])
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            table.add(delta, opts["t"], x[0], x[1], a, b, dv.value,
                      float(dv.diagnostics.get("error_estimate", 0.0)))
    _emit_table(opts, table, "eigen-density")
    return EXIT_OK


def cmd_hw(opts):
    l1, l2 = opts["l1"], opts["l2"]
    if l1 is None or l2 is None:
        raise UsageError("hw needs --l1 and --l2")
    if l2 <= 0 or l1 < l2:
        raise UsageError("hw needs l1 >= l2 > 0")
    table = Table(["quantity", "l1", "l2", "v", "value", "error_estimate", "flag"])
    for v in parse_grid(opts["grid"]):
        val, diag = laws.hw_density_m2(l1, l2, v, with_error=True)
        table.add("density", l1, l2, v, val, float(diag["quad_error"] + diag["roundoff"]), diag["flag"] or "")
    mass, err = laws.hw_integral(l1, l2)
    table.add("normalization", l1, l2, None, mass, err, "")
    nu = opts["nu"]
    if nu is not None:
        lt, e = laws.hw_integral(l1, l2, lambda v: math.exp(-0.5 * nu * nu * v))
        table.add(f"laplace_nu={nu:g}", l1, l2, None, lt, e, "")
        table.add(f"laplace_closed_form_nu={nu:g}", l1, l2, None,
                  laws.hw_laplace([l1 * l1 / 4, l2 * l2 / 4], nu, 2, "bessel"), 0.0, "")
    _emit_table(opts, table, "hw")
    return EXIT_OK


def cmd_t0(opts):
    m, nu = opts["m"], opts["nu"]
    if nu is None:
        raise UsageError("t0 needs --nu")
    x = parse_matrix(opts["x"] if opts["x"] != "zero" else "I", m, opts["x_rotation"])
    cols = ["t", "t0_tail"]
    if m == 2:
        cols += ["u", "s0_density", "s0_cdf"]
    table = Table(cols)
    lam = x.eigenvalues
    for t in parse_grid(opts["t_grid"]):
        try:
            tail = laws.t0_tail(laws.LawQuery(m=m, nu=nu, x=x, t=t))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        row = [t, tail]
        if m == 2:
            u = 1.0 / (2 * t)
            row += [u, laws.s0_density_m2(lam[0], lam[1], nu, u), laws.s0_cdf_m2(lam[0], lam[1], nu, u)[0]]
        table.add(*row)
    _emit_table(opts, table, "t0")
    return EXIT_OK


def cmd_verify_all(opts):
    if opts["budget"] not in verify.BUDGETS:
        raise UsageError("--budget must be desk or full")

    def progress(res):
        print(res.summary(), file=sys.stderr, flush=True)

    results = verify.run_all(seed=opts["seed"], budget=opts["budget"], threads=opts["threads"],
                             progress=progress)
    failed = [r for r in results if not r.passed]
    if opts["format"] == "json":
        payload = {
            "seed": opts["seed"], "budget": opts["budget"], "passed": not failed,
            "criteria": [{
                "criterion": r.criterion, "name": r.name, "passed": r.passed,
                "wall_time": None if opts["no_timestamp"] else r.wall_time,
                "metrics": [{"name": m.name, "kind": m.kind, "value": m.value, "reference": m.reference,
                             "error": m.error, "tolerance": m.tolerance, "passed": m.passed} for m in r.metrics],
                "reports": [_report_dict(rep, opts["no_timestamp"]) for rep in r.reports],
            } for r in results],
        }
        _emit(opts, json.dumps(payload, indent=2, sort_keys=True) + "\n", "verify-all")
    else:
        table = Table(["criterion", "campaign", "check", "kind", "value", "reference", "error", "tolerance",
                       "verdict"])
        for r in results:
            for m in r.metrics:
                table.add(r.criterion, r.name, m.name, m.kind, m.value, m.reference, m.error, m.tolerance,
                          "pass" if m.passed else "fail")
        _emit(opts, table.csv(), "verify-all")
    if failed:
        for r in failed:
            for m in r.metrics:
                if not m.passed:
                    print(f"FAILED criterion {r.criterion} {m.name}: {m.kind} {m.error:.6g} "
                          f"(tolerance {m.tolerance:.3g})", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


HANDLERS = {
    "simulate": cmd_simulate,
    "laplace-check": cmd_laplace_check,
    "density": cmd_density,
    "eigen-density": cmd_eigen_density,
    "hw": cmd_hw,
    "t0": cmd_t0,
    "verify-all": cmd_verify_all,
}


def resolve(argv) -> tuple[str, dict]:
    """Parse ``argv`` into ``(command, options)`` without running anything."""
    args = build_parser().parse_args(argv)
    return args.command, _resolve(args)


def run(argv=None) -> int:
    try:
        command, opts = resolve(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    except UsageError as exc:
        print(f"laguerre: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return HANDLERS[command](opts)
    except UsageError as exc:
        print(f"laguerre {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
