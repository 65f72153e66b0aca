"""Command-line front end.

Each subcommand resolves its configuration (config file, then flags), runs one
experiment and writes a table of rows as CSV or JSON. Every row carries the
seed, a hash of the resolved configuration and the library version. Wall time
goes to stderr so that stdout/--out bytes depend on the configuration alone.

Exit codes: 0 success, 2 invalid input, 3 exact-computation budget exceeded,
4 a --check comparison failed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import re
import sys
import time
from fractions import Fraction
from typing import Any, Callable, Sequence

import mpmath
import numpy as np

from . import __version__
from . import exact, limits, mcstats
from .exact import BudgetExceeded, ExtendedValue
from .model import INFINITY, DomainError, ModelParams
from .samplers import (
    sample_fixed_order_batch,
    sample_random_order_batch,
    sample_uniform_batch,
)

log = logging.getLogger("prefkout")

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_CHECK = 0, 2, 3, 4

# keys that change how results are written or computed in wall time, never what they are
_PRESENTATION_KEYS = {"format", "out", "threads", "config", "command", "verbose"}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# alpha-spec grammar

_NUM = r"[0-9]+(?:\.[0-9]*)?(?:[eE][-+]?[0-9]+)?"
_SQRT = re.compile(rf"^(?:({_NUM}|beta)\s*\*\s*)?sqrt\(n\)$")
_POW = re.compile(rf"^n\s*\^\s*({_NUM}|sigma)$")


def parse_number(text: str) -> Fraction:
    """Exact value of a decimal or fraction literal."""
    try:
        value = Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"not a number: {text!r}") from e
    return value


def _as_alpha(x: Fraction):
    return x.numerator if x.denominator == 1 else x


def resolve_alpha(spec: str, n: int, beta: float | None = None, sigma: float | None = None):
    """Resolve an alpha-spec for a given n.

    Grammar: ``inf`` | literal (``3``, ``3/2``, ``2.5``) | ``[c*]sqrt(n)`` |
    ``beta*sqrt(n)`` | ``n^s`` | ``n^sigma``. Literals stay exact; the
    sqrt and power families resolve to floats unless the value is an integer.
    """
    s = spec.strip().lower().replace(" ", "")
    if s in ("inf", "infinity", "oo"):
        return INFINITY
    m = _SQRT.match(s)
    if m:
        c = m.group(1)
        if c == "beta":
            if beta is None:
                raise ConfigError("alpha 'beta*sqrt(n)' needs --beta")
            c_val = float(beta)
        else:
            c_val = 1.0 if c is None else float(c)
        r = math.isqrt(n)
        if r * r == n and float(c_val).is_integer():
            return int(c_val) * r
        return c_val * math.sqrt(n)
    m = _POW.match(s)
    if m:
        e = m.group(1)
        if e == "sigma":
            if sigma is None:
                raise ConfigError("alpha 'n^sigma' needs --sigma")
            e_val = float(sigma)
        else:
            e_val = float(e)
        if float(e_val).is_integer() and e_val >= 0:
            return n ** int(e_val)
        return float(n) ** e_val
    value = parse_number(s)
    if value <= 0:
        raise ConfigError(f"alpha must be positive, got {spec!r}")
    return _as_alpha(value)


def alpha_family(spec: str) -> str:
    s = spec.strip().lower().replace(" ", "")
    if s in ("inf", "infinity", "oo"):
        return "uniform"
    if _SQRT.match(s):
        return "sqrt"
    if _POW.match(s):
        return "power"
    return "literal"


def sqrt_coefficient(spec: str, beta: float | None) -> float | None:
    m = _SQRT.match(spec.strip().lower().replace(" ", ""))
    if not m:
        return None
    c = m.group(1)
    if c == "beta":
        return beta
    return 1.0 if c is None else float(c)


def power_exponent(spec: str, sigma: float | None) -> float | None:
    m = _POW.match(spec.strip().lower().replace(" ", ""))
    if not m:
        return None
    return sigma if m.group(1) == "sigma" else float(m.group(1))


# ---------------------------------------------------------------------------
# value formatting


def fmt_alpha(a) -> str:
    if a is INFINITY:
        return "inf"
    if isinstance(a, Fraction):
        return f"{a.numerator}/{a.denominator}"
    if isinstance(a, float):
        return repr(a)
    return str(a)


def _cell(v: Any) -> Any:
    """Canonical JSON-compatible value for one table cell."""
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, ExtendedValue):
        return float(v.value)
    if isinstance(v, mpmath.mpf):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    if v is INFINITY:
        return "inf"
    return str(v)


def _csv_text(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(rows: list[dict], fmt: str) -> str:
    rows = [{k: _cell(v) for k, v in r.items()} for r in rows]
    if fmt == "json":
        return json.dumps(rows, indent=1, allow_nan=True) + "\n"
    columns: list[str] = []
    for r in rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_csv_text(r.get(c)) for c in columns])
    return buf.getvalue()


def parse_csv_value(text: str) -> Any:
    """Inverse of the CSV cell encoding, for comparing CSV and JSON output."""
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


# ---------------------------------------------------------------------------
# configuration


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key=value`` lines; ``#`` starts a comment; keys use the long flag names."""
    out: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def config_hash(cfg: dict) -> str:
    body = {k: v for k, v in sorted(cfg.items()) if k not in _PRESENTATION_KEYS}
    blob = json.dumps(body, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _int_list(text) -> list[int]:
    if isinstance(text, int):
        return [text]
    vals = []
    for part in str(text).split(","):
        v = parse_number(part)
        if v.denominator != 1:
            raise ConfigError(f"expected an integer, got {part!r}")
        vals.append(int(v))
    return vals


def _str_list(text) -> list[str]:
    return [s.strip() for s in str(text).split(",") if s.strip()]


def _positive_int(name: str, v) -> int:
    try:
        x = int(v)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"--{name} must be an integer") from e
    if x < 1:
        raise ConfigError(f"--{name} must be positive")
    return x


def _positive_float(name: str, v) -> float:
    try:
        x = float(v)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"--{name} must be a number") from e
    if not x > 0 or math.isinf(x):
        raise ConfigError(f"--{name} must be positive and finite")
    return x


# ---------------------------------------------------------------------------
# subcommands; each returns (rows, checks) where checks is a list of booleans


def _row_base(cfg: dict) -> dict:
    return {"seed": cfg.get("seed"), "config_hash": cfg["_hash"], "version": __version__}


def cmd_sample(cfg: dict) -> tuple[str, list[bool]]:
    n, k = _positive_int("n", cfg["n"]), _positive_int("k", cfg["k"])
    alpha = resolve_alpha(cfg["alpha"], n, cfg.get("beta"), cfg.get("sigma"))
    p = ModelParams(n, k, alpha)
    count = _positive_int("samples", cfg["samples"])
    seed = int(cfg["seed"])
    route = cfg.get("route", "fixed_order")
    threads = int(cfg["threads"])
    if route == "uniform" or p.uniform:
        p = p.with_alpha(INFINITY)
        alpha = INFINITY
        t = sample_uniform_batch(p, count, seed, threads)
    elif route == "random_order":
        t = sample_random_order_batch(p, count, seed, threads)
    elif route == "fixed_order":
        t = sample_fixed_order_batch(p, count, seed, threads=threads)
    else:
        raise ConfigError(f"unknown route {route!r}")
    labels = t.reshape(count, n, k) + 1
    head = f"# prefkout {__version__} sample n={n} k={k} alpha={fmt_alpha(alpha)} seed={seed} samples={count} route={route} config_hash={cfg['_hash']}"
    if cfg["format"] == "json":
        body = {
            "header": {"n": n, "k": k, "alpha": fmt_alpha(alpha), "seed": seed, "samples": count, "route": route,
                       "config_hash": cfg["_hash"], "version": __version__},
            "digraphs": labels.tolist(),
        }
        return json.dumps(body, separators=(",", ":")) + "\n", []
    v = np.repeat(np.arange(1, n + 1), k)
    i = np.tile(np.arange(1, k + 1), n)
    buf = io.StringIO()
    buf.write(head + "\n")
    for r in range(count):
        buf.write(f"# digraph {r + 1}\n")
        block = np.stack([v, i, labels[r].ravel()], axis=1)
        np.savetxt(buf, block, fmt="%d", delimiter=" ")
    return buf.getvalue(), []


def cmd_exact_tv(cfg: dict) -> tuple[list[dict], list[bool]]:
    rows = []
    budget = int(cfg["budget"])
    for n in _int_list(cfg["n"]):
        for spec in _str_list(cfg["alpha"]):
            k = _positive_int("k", cfg["k"])
            alpha = resolve_alpha(spec, n, cfg.get("beta"), cfg.get("sigma"))
            p = ModelParams(n, k, alpha)
            full = exact.exact_tv_full(p, budget)
            tx = exact.exact_tv_X(p, budget)
            rational = isinstance(full, Fraction)
            row = {"n": n, "k": k, "alpha": fmt_alpha(alpha), "mode": "rational" if rational else "extended",
                   "exact_tv_full": full, "exact_tv_X": tx}
            row["exact_tv_full_float"] = float(full)
            row["error_bound"] = float(full.error_bound) if isinstance(full, ExtendedValue) else 0.0
            rows.append({**row, **_row_base(cfg)})
    return rows, []


def cmd_limit(cfg: dict) -> tuple[list[dict], list[bool]]:
    k = _positive_int("k", cfg["k"])
    beta = _positive_float("beta", cfg.get("beta", 1.0))
    q, err = limits.limit_tv_quadrature(k, beta)
    cf = limits.limit_tv_closed_form(k, beta)
    tol = float(cfg.get("tolerance") or 1e-8)
    ok = abs(q - cf) <= tol
    row = {"k": k, "beta": beta, "limit_tv": q, "quadrature_error": err, "closed_form": cf,
           "tolerance": tol, "pass": ok}
    return [{**row, **_row_base(cfg)}], [ok]


def cmd_moments(cfg: dict) -> tuple[list[dict], list[bool]]:
    n, k = _positive_int("n", cfg["n"]), _positive_int("k", cfg["k"])
    alpha = resolve_alpha(cfg["alpha"], n, cfg.get("beta"), cfg.get("sigma"))
    p = ModelParams(n, k, alpha)
    rows, checks = [], []
    for ell in _int_list(cfg.get("ell", "1,2,3,4")):
        rows.append({"n": n, "k": k, "alpha": fmt_alpha(alpha), "statistic": f"E[(D)_{ell}]",
                     "exact": exact.exact_moment_factorial(p, ell), **_row_base(cfg)})
        rows.append({"n": n, "k": k, "alpha": fmt_alpha(alpha), "statistic": f"E[D^{ell}]",
                     "exact": exact.exact_moment(p, ell), **_row_base(cfg)})
    m = int(cfg.get("samples") or 0)
    if m:
        tol = float(cfg.get("tolerance") or 4.0)
        ex = mcstats.exact_degree_moments(p)
        mc = mcstats.mc_degree_moments(p, m, int(cfg["seed"]), threads=int(cfg["threads"]))
        for name, est in mc.items():
            z = abs(est.estimate - ex[name]) / est.std_error if est.std_error > 0 else (
                0.0 if abs(est.estimate - ex[name]) < 1e-9 * max(1.0, abs(ex[name])) else math.inf)
            ok = z <= tol
            checks.append(ok)
            rows.append({"n": n, "k": k, "alpha": fmt_alpha(alpha), "statistic": f"mc {name}",
                         "exact": ex[name], "estimate": est.estimate, "std_error": est.std_error,
                         "n_samples": m, "z": z, "tolerance": tol, "pass": ok, **_row_base(cfg)})
    return rows, checks


def cmd_lclt(cfg: dict) -> tuple[list[dict], list[bool]]:
    n, k = _positive_int("n", cfg["n"]), _positive_int("k", cfg["k"])
    alpha = resolve_alpha(cfg.get("alpha") or "sqrt(n)", n, cfg.get("beta"), cfg.get("sigma"))
    p = ModelParams(n, k, alpha)
    m = _positive_int("samples", cfg["samples"])
    window = _positive_float("window", cfg.get("window", 8.0))
    mode = cfg.get("mode", "scalar")
    seed, threads = int(cfg["seed"]), int(cfg["threads"])
    base = {"n": n, "k": k, "alpha": fmt_alpha(alpha), "mode": mode, "window": window, "n_samples": m}
    if mode == "scalar":
        tol = float(cfg.get("tolerance") or 0.03)
        r = mcstats.lclt_scalar_check(p, m, window, seed, threads=threads)
        ok = r.sup_error <= tol
        row = {**base, "sup_error": r.sup_error, "argmax": r.argmax, "lattice_points": r.points,
               "total_mass": r.total_mass, "tolerance": tol, "pass": ok}
    elif mode == "2d":
        tol = float(cfg.get("tolerance") or 0.02)
        r = mcstats.lclt_2d_check(p, m, window, seed, threads=threads)
        ok = r.sup_error <= tol and r.parity_violations == 0
        row = {**base, "sup_error": r.sup_error, "lattice_points": r.points,
               "parity_violations": r.parity_violations, "marginal_sup_error": r.marginal_sup_error,
               "tolerance": tol, "pass": ok}
    else:
        raise ConfigError(f"unknown lclt mode {mode!r}")
    return [{**row, **_row_base(cfg)}], [ok]


def cmd_threshold(cfg: dict) -> tuple[list[dict], list[bool]]:
    k = _positive_int("k", cfg["k"])
    spec = cfg["alpha"]
    beta, sigma = cfg.get("beta"), cfg.get("sigma")
    m = _positive_int("samples", cfg["samples"])
    seed, threads = int(cfg["seed"]), int(cfg["threads"])
    family = alpha_family(spec)
    c = sqrt_coefficient(spec, beta)
    e = power_exponent(spec, sigma)
    tol = cfg.get("tolerance")
    rows, checks = [], []
    for idx, n in enumerate(_int_list(cfg["n"])):
        alpha = resolve_alpha(spec, n, beta, sigma)
        p = ModelParams(n, k, alpha)
        sub = mcstats.derive_seed(seed, idx)
        row: dict[str, Any] = {"n": n, "k": k, "alpha_spec": spec, "alpha": fmt_alpha(alpha), "n_samples": m}
        plug = mcstats.estimate_tv_X_plugin(p, m, sub, threads=threads)
        row.update(tv_plugin=plug.estimate, tv_plugin_se=plug.std_error, tv_plugin_bias_bound=plug.bias_bound)
        if not p.uniform:
            vf = mcstats.estimate_tv_via_f(p, m, sub, threads=threads)
            row.update(tv_via_f=vf.estimate, tv_via_f_se=vf.std_error)
        if family == "sqrt":
            ref = limits.limit_tv(k, c)
            row["limit_tv"] = ref
            if tol is not None:
                ok = abs(row["tv_via_f"] - ref) <= float(tol)
                row["pass"] = ok
                checks.append(ok)
        if family == "power" and e is not None and e < 0.5:
            d = mcstats.distinguishing_event_check(n, k, e, m, sub, threads=threads)
            row.update(event_p_alpha=d.p_alpha, event_p_unif=d.p_unif, event_gap=d.p_alpha - d.p_unif)
        rows.append({**row, **_row_base(cfg)})
    return rows, checks


def cmd_distinguish(cfg: dict) -> tuple[list[dict], list[bool]]:
    n, k = _positive_int("n", cfg["n"]), _positive_int("k", cfg["k"])
    sigma = float(cfg.get("sigma") if cfg.get("sigma") is not None else 0.25)
    m = _positive_int("samples", cfg["samples"])
    ev = mcstats.distinguishing_event(n, k, sigma, allow_supercritical=bool(cfg.get("allow_supercritical")))
    r = mcstats.distinguishing_event_check(n, k, sigma, m, int(cfg["seed"]), threads=int(cfg["threads"]),
                                           allow_supercritical=bool(cfg.get("allow_supercritical")))
    tol = float(cfg.get("tolerance") or 0.05)
    ok = r.p_alpha >= 1 - tol and r.p_unif <= tol
    row = {"n": n, "k": k, "sigma": sigma, "alpha": ev.alpha, "omega": ev.omega, "center": ev.center,
           "half_width": ev.half_width, "mean_gap": ev.gap, "p_alpha": r.p_alpha, "p_unif": r.p_unif,
           "n_samples": m, "tolerance": tol, "pass": ok}
    return [{**row, **_row_base(cfg)}], [ok]


def cmd_concentration(cfg: dict) -> tuple[list[dict], list[bool]]:
    n, k = _positive_int("n", cfg["n"]), _positive_int("k", cfg["k"])
    alpha = resolve_alpha(cfg.get("alpha") or "sqrt(n)", n, cfg.get("beta"), cfg.get("sigma"))
    p = ModelParams(n, k, alpha)
    omega = cfg.get("omega")
    omega = math.log(n) if omega in (None, "log(n)", "ln(n)") else _positive_float("omega", omega)
    m = _positive_int("samples", cfg["samples"])
    rows = []
    for s in _int_list(cfg.get("power", "2")):
        est = mcstats.concentration_check(p, s, omega, m, int(cfg["seed"]), threads=int(cfg["threads"]))
        rows.append({"n": n, "k": k, "alpha": fmt_alpha(alpha), "s": s, "omega": omega,
                     "fraction": est.estimate, "std_error": est.std_error, "n_samples": m, **_row_base(cfg)})
    return rows, []


# ---------------------------------------------------------------------------
# parser


_DEFAULTS: dict[str, Any] = {
    "k": 1,
    "alpha": "1",
    "samples": 1,
    "seed": 0,
    "threads": 1,
    "format": "csv",
    "budget": exact.DEFAULT_BUDGET,
}

_COMMANDS: dict[str, tuple[Callable, str, dict]] = {
    "sample": (cmd_sample, "draw digraphs", {"format": "text"}),
    "exact-tv": (cmd_exact_tv, "exact total variation distances", {}),
    "threshold": (cmd_threshold, "TV estimates along a grid of n", {"alpha": "beta*sqrt(n)", "beta": 1.0, "samples": 10_000}),
    "lclt": (cmd_lclt, "local limit sup-error", {"alpha": "sqrt(n)", "samples": 1_000_000, "n": 10_000}),
    "moments": (cmd_moments, "exact and simulated degree moments", {"samples": 0}),
    "limit": (cmd_limit, "limit TV at alpha = beta sqrt(n)", {"beta": 1.0}),
    "distinguish": (cmd_distinguish, "separating-event probabilities", {"samples": 10_000, "sigma": 0.25}),
    "concentration": (cmd_concentration, "concentration of sums of powers of in-degrees", {"samples": 10_000}),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and run")
    g.add_argument("--n", help="number of vertices (comma list for exact-tv and threshold)")
    g.add_argument("--k", type=int)
    g.add_argument("--alpha", help="inf | 3 | 3/2 | 2.5 | sqrt(n) | c*sqrt(n) | beta*sqrt(n) | n^s | n^sigma")
    g.add_argument("--beta", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--samples", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("--format", choices=["csv", "json", "text"])
    g.add_argument("--out", help="output path (default stdout)")
    g.add_argument("--budget", type=int, help="max kn for exact enumeration")
    g.add_argument("--check", action="store_true", default=None, help="exit 4 if a comparison fails")
    g.add_argument("--tolerance", type=float)
    g.add_argument("--config", help="key=value file; flags override")
    x = common.add_argument_group("subcommand knobs")
    x.add_argument("--route", choices=["fixed_order", "random_order", "uniform"])
    x.add_argument("--window", type=float)
    x.add_argument("--mode", choices=["scalar", "2d"])
    x.add_argument("--ell", help="comma list of moment orders")
    x.add_argument("--omega", type=float)
    x.add_argument("--power", help="comma list of powers s for concentration")
    x.add_argument("--allow-supercritical", action="store_true", default=None)
    x.add_argument("-v", "--verbose", action="store_true", default=None)

    parser = argparse.ArgumentParser(prog="prefkout", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"prefkout {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_, _) in _COMMANDS.items():
        subs.add_parser(name, parents=[common], help=help_)
    return parser


_INT_KEYS = {"k", "samples", "seed", "threads", "budget"}
_FLOAT_KEYS = {"beta", "sigma", "tolerance", "window", "omega"}
_BOOL_KEYS = {"check", "allow_supercritical", "verbose"}


def _coerce(key: str, value: str) -> Any:
    if key in _BOOL_KEYS:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean")
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError as e:
        raise ConfigError(f"{key}: bad value {value!r}") from e
    return value


def resolve_config(ns: argparse.Namespace) -> dict:
    cfg: dict[str, Any] = dict(_DEFAULTS)
    cfg.update(_COMMANDS[ns.command][2])
    if ns.config:
        for key, value in read_config_file(ns.config).items():
            cfg[key] = _coerce(key, value)
    for key, value in vars(ns).items():
        if value is not None and key not in ("config",):
            cfg[key] = value
    if ns.command != "sample" and cfg["format"] == "text":
        raise ConfigError("--format text applies to 'sample' only")
    if ns.command == "sample" and cfg["format"] == "csv":
        cfg["format"] = "text"
    if "n" not in cfg:
        if ns.command not in ("limit",):
            raise ConfigError("--n is required")
    if int(cfg["threads"]) < 1:
        raise ConfigError("--threads must be positive")
    if int(cfg["budget"]) < 1:
        raise ConfigError("--budget must be positive")
    if ns.command in ("threshold", "lclt", "moments", "distinguish", "concentration", "sample") and int(cfg["seed"]) < 0:
        raise ConfigError("--seed must be non-negative")
    cfg["_hash"] = config_hash(cfg)
    return cfg


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        cfg = resolve_config(ns)
        fn = _COMMANDS[ns.command][0]
        result, checks = fn(cfg)
        text = result if isinstance(result, str) else render(result, cfg["format"])
    except BudgetExceeded as e:
        print(f"prefkout: budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, DomainError, mcstats.InsufficientSamples) as e:
        print(f"prefkout: {e}", file=sys.stderr)
        return EXIT_INVALID
    try:
        if cfg.get("out"):
            with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as e:
        print(f"prefkout: cannot write output: {e}", file=sys.stderr)
        return EXIT_INVALID
    print(f"prefkout: {ns.command} finished in {(time.perf_counter() - t0) * 1000:.0f} ms", file=sys.stderr)
    if cfg.get("check") and not all(checks):
        print("prefkout: check failed", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
