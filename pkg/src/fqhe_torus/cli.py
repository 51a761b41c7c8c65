"""Command-line driver.

Every subcommand writes one structured-text report (see ``report``) to
``--output`` or standard output.  Options may also come from a JSON
config file (``--config``) whose keys are option names; flags given on
the command line win.

Exit codes: 0 success with every verdict PASS, 1 numerical failure or a
FAIL verdict, 2 invalid input, 64 usage error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import time
from typing import Callable

import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError
from .geometry import LineBundleSpec, from_lattice_coords, tau_factor
from .integration import WORKERS_ENV, GridSpec
from .laughlin import (
    OneLayerModel,
    hr_gram,
    one_particle_gram,
    one_particle_gram_closed,
    slater_norm_closed,
    slater_norm_squared,
)
from .report import Report, parse_complex
from .theta import TorusParams, theta1d, truncation_radius

EXIT_OK, EXIT_NUMERICAL, EXIT_INVALID, EXIT_USAGE = 0, 1, 2, 64

# options that steer the run but are not echoed as inputs
_PLUMBING = {"config", "output", "workers", "command"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _complex(text) -> complex:
    if isinstance(text, (int, float, complex)) and not isinstance(text, bool):
        return complex(text)
    try:
        return parse_complex(str(text))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def _positive_int(text) -> int:
    try:
        value = int(text)
    except (TypeError, ValueError):
        raise ValidationError(f"expected a positive integer, got {text!r}") from None
    if value < 1 or isinstance(text, bool) or (isinstance(text, float) and not text.is_integer()):
        raise ValidationError(f"expected a positive integer, got {text!r}")
    return value


def _float(text) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ValidationError(f"expected a real number, got {text!r}") from None
    if not math.isfinite(value):
        raise ValidationError(f"expected a finite number, got {text!r}")
    return value


def _text(value) -> str:
    if isinstance(value, (list, tuple)):
        if value and isinstance(value[0], (list, tuple)):
            return "; ".join(" ".join(str(x) for x in row) for row in value)
        return " ".join(str(x) for x in value)
    return str(value)


# ---- option tables -----------------------------------------------------
# name -> (converter, default, help); default None means optional, REQUIRED means mandatory

REQUIRED = object()

_TORUS = {"tau": (_complex, 1j, "modular parameter x+yi with y > 0")}
_XI = {
    "xi-a": (_float, 0.0, "solenoid coordinate a in xi = a tau + b"),
    "xi-b": (_float, 0.0, "solenoid coordinate b in xi = a tau + b"),
}
_SAMPLING = {
    "backend": (str, "grid", "grid or qmc"),
    "grid": (_positive_int, 16, "grid points per axis"),
    "samples": (_positive_int, 1 << 16, "QMC sample budget"),
    "seed": (int, None, "seed, mandatory for the qmc backend"),
    "replicates": (_positive_int, 16, "QMC randomisation replicates"),
}
_WEN = {
    "K": (_text, REQUIRED, "K matrix, rows separated by ';' e.g. \"2 1; 1 2\""),
    "n": (_text, REQUIRED, "particle counts per layer e.g. \"1 1\""),
}

OPTIONS: dict[str, dict] = {
    "theta": {
        "a": (_float, 0.0, "characteristic a"),
        "b": (_float, 0.0, "characteristic b"),
        "z": (_complex, 0j, "argument x+yi"),
        **_TORUS,
        "tol": (_float, 1e-13, "absolute truncation tolerance"),
    },
    "gram": {
        "k": (_positive_int, REQUIRED, "degree of the line bundle"),
        **_TORUS, **_XI,
        "grid": (_positive_int, 64, "quadrature points per axis"),
        "tolerance": (_float, 1e-9, "largest accepted entrywise error"),
    },
    "norm": {
        "model": (str, "slater", "slater or laughlin"),
        "n": (_positive_int, 2, "number of particles"),
        "m": (_positive_int, 2, "Laughlin exponent (laughlin model)"),
        **_TORUS, **_XI, **_SAMPLING,
        "tolerance": (_float, 1e-6, "relative tolerance for the grid backend"),
    },
    "wen-validate": dict(_WEN),
    "kvw": {
        **_WEN, **_TORUS, **_XI,
        "z": (_text, None, "particle positions x+yi, layer 1 first (random when omitted)"),
        "seed": (int, 0, "seed for the random configuration"),
        "tolerance": (_float, 1e-10, "largest accepted relative automorphy defect"),
    },
    "center-gram": {
        "K": _WEN["K"],
        **_TORUS, **_XI,
        "grid": (_positive_int, 32, "quadrature points per axis (2g dimensions)"),
        "tolerance": (_float, 1e-8, "relative tolerance"),
    },
    "curvature": {
        "model": (str, "center_mass", "one_particle, laughlin, wen or center_mass"),
        "k": (_positive_int, 2, "degree (one_particle)"),
        "m": (_positive_int, 2, "Laughlin exponent (laughlin)"),
        "n": (_text, "2", "particle count (laughlin) or counts per layer (wen)"),
        "K": (_text, "2 1; 1 2", "K matrix (wen, center_mass)"),
        **_TORUS,
        "grid": (_positive_int, 64, "points per axis of the (a, b) grid"),
        "backend": (str, "closed-form", "closed-form, quadrature or qmc"),
        "method": (str, None, "finite-difference or profile (profile for qmc)"),
        "accuracy": (_positive_int, 10, "finite-difference order"),
        "quad-grid": (_positive_int, 12, "quadrature points per axis for each Gram matrix"),
        "samples": (_positive_int, 1 << 14, "QMC budget per Gram matrix"),
        "seed": (int, None, "seed, mandatory for the qmc backend"),
        "tolerance": (_float, None, "relative tolerance on the trace coefficient"),
    },
    "verify": {
        "criteria": (_text, "1 2 3 4 5 6 7 8", "acceptance criteria to run"),
    },
}

DESCRIPTIONS = {
    "theta": "evaluate a theta function with characteristics and check its automorphy",
    "gram": "one-particle Gram matrix by quadrature against the closed form",
    "norm": "many-body norms and Gram matrices (Slater, Laughlin)",
    "wen-validate": "validate a Wen datum (K, n) and list the group Pi",
    "kvw": "evaluate multi-layer functions at a configuration",
    "center-gram": "center-of-mass Gram matrix by quadrature against the closed form",
    "curvature": "Bott-Chern curvature, trace form and degree of a Gram field",
    "verify": "run the acceptance suite",
}


def _dest(name: str) -> str:
    return name.replace("-", "_")


def build_parser() -> _Parser:
    parser = _Parser(prog="fqhe-torus", description="Torus FQHE wave functions, Gram matrices and curvature.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    parser.subcommands = {}
    for cmd, table in OPTIONS.items():
        sub = subs.add_parser(cmd, help=DESCRIPTIONS[cmd], description=DESCRIPTIONS[cmd])
        parser.subcommands[cmd] = sub
        sub.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of option values")
        sub.add_argument("--output", default=argparse.SUPPRESS, help="report path (default: stdout)")
        sub.add_argument("--workers", default=argparse.SUPPRESS,
                         help=f"quadrature worker threads (overrides ${WORKERS_ENV})")
        for name, (_, default, text) in table.items():
            shown = "required" if default is REQUIRED else f"default: {default}"
            sub.add_argument(f"--{name}", dest=_dest(name), default=argparse.SUPPRESS,
                             help=f"{text} ({shown})")
    return parser


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path!r} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("the config file must hold a JSON object")
    return {_dest(k): v for k, v in data.items()}


def resolve_options(command: str, flags: dict) -> dict:
    """Merge built-in defaults, the config file and flags (flags win), then convert."""
    table = OPTIONS[command]
    config = _load_config(flags["config"]) if "config" in flags else {}
    known = {_dest(n) for n in table} | {"output", "workers"}
    unknown = sorted(set(config) - known - {"command"})
    if unknown:
        raise ValidationError(f"unknown config keys for {command}: {', '.join(unknown)}")
    if config.get("command", command) != command:
        raise ValidationError(f"config is for {config['command']!r}, not {command!r}")
    merged = {k: v for k, v in config.items() if k != "command"}
    merged.update(flags)
    out = {}
    for name, (convert, default, _) in table.items():
        key = _dest(name)
        if key in merged:
            out[key] = None if merged[key] is None else convert(merged[key])
        elif default is REQUIRED:
            raise UsageError(f"{command}: --{name} is required (flag or config key)")
        else:
            out[key] = default
    for key in ("output", "workers"):
        if key in merged:
            out[key] = merged[key]
    return out


def _echo_inputs(report: Report, opts: dict) -> None:
    for key, value in opts.items():
        if key not in _PLUMBING and value is not None:
            report.add("inputs", key, value)


def _need_seed(opts: dict) -> None:
    if opts.get("backend") == "qmc" and opts.get("seed") is None:
        raise ValidationError("a seed is mandatory for the qmc backend (--seed)")


def _add_integration(report: Report, res, prefix: str = "") -> None:
    report.add("results", f"{prefix}backend", res.backend)
    report.add("results", f"{prefix}evaluations", res.evaluations)
    report.add("results", f"{prefix}reliable", res.reliable)


# ---- subcommands -------------------------------------------------------


def cmd_theta(opts: dict, report: Report) -> None:
    tau = TorusParams(opts["tau"]).tau
    z, a, b, tol = opts["z"], opts["a"], opts["b"], opts["tol"]
    value = theta1d(z, tau, a, b, tol)
    radius = truncation_radius(a, abs(z.imag), tau.imag, tol)
    shift1 = theta1d(z + 1, tau, a, b, tol)
    shift_tau = theta1d(z + tau, tau, a, b, tol)
    factor = np.exp(-2j * math.pi * (z + b) - 1j * math.pi * tau)
    r1 = abs(shift1 - np.exp(2j * math.pi * a) * value)
    r2 = abs(shift_tau - factor * value)
    report.add("results", "value", value)
    report.add("results", "truncation_radius", radius)
    report.add("results", "residual_shift_1", r1)
    report.add("results", "residual_shift_tau", r2)
    report.verdict("quasi_periodicity_1", r1 <= 10 * tol * max(1.0, abs(value)))
    report.verdict("quasi_periodicity_tau", r2 <= 10 * tol * (1 + abs(factor)) * max(1.0, abs(value)))


def cmd_gram(opts: dict, report: Report) -> None:
    spec = LineBundleSpec(opts["k"], opts["xi_a"], opts["xi_b"], opts["tau"])
    gram, res = one_particle_gram(spec, GridSpec(opts["grid"], 2), return_result=True)
    closed = one_particle_gram_closed(spec)
    k = spec.k
    off = float(np.abs(gram - np.diag(np.diag(gram))).max()) if k > 1 else 0.0
    err = float(np.abs(gram - closed * np.eye(k)).max())
    report.add("results", "gram", gram)
    report.add("results", "offdiag_max", off)
    report.add("results", "closed_form_diag", closed)
    report.add("results", "max_entry_error", err)
    report.add("results", "error_estimate", float(np.max(res.error_estimate)))
    _add_integration(report, res)
    report.verdict("closed_form", err <= opts["tolerance"])


def cmd_norm(opts: dict, report: Report) -> None:
    _need_seed(opts)
    backend = opts["backend"]
    if backend not in ("grid", "qmc"):
        raise ValidationError(f"backend must be grid or qmc, got {backend!r}")
    kw = dict(backend=backend, points_per_axis=opts["grid"], samples=opts["samples"],
              seed=opts["seed"] or 0, replicates=opts["replicates"])
    n = opts["n"]
    tau = TorusParams(opts["tau"]).tau
    if opts["model"] == "slater":
        spec = LineBundleSpec(n, opts["xi_a"], opts["xi_b"], tau)
        res = slater_norm_squared(n, spec, **kw)
        sq = res.value.real
        closed = slater_norm_closed(n, tau.imag, opts["xi_a"])
        norm = math.sqrt(sq) if sq > 0 else float("nan")
        report.add("results", "norm_squared", sq)
        report.add("results", "norm", norm)
        report.add("results", "error_estimate_squared", res.error_estimate)
        report.add("results", "closed_form_norm", closed)
        report.add("results", "relative_error", abs(norm / closed - 1))
        _add_integration(report, res)
        if backend == "grid":
            report.verdict("closed_form", abs(norm / closed - 1) <= opts["tolerance"])
        else:
            report.verdict("closed_form_within_3se", abs(sq - closed ** 2) <= 3 * res.error_estimate)
    elif opts["model"] == "laughlin":
        model = OneLayerModel(opts["m"], n, tau, opts["xi_a"], opts["xi_b"])
        res = hr_gram(model, **kw)
        gram, err = res.value, np.asarray(res.error_estimate)
        m = model.m
        diag = np.real(np.diag(gram))
        off_mask = ~np.eye(m, dtype=bool)
        report.add("results", "gram", gram)
        report.add("results", "error_estimate", err)
        report.add("results", "bundle", "sharp" if model.spec.sharp else "plain")
        _add_integration(report, res)
        if m > 1:
            off = np.abs(gram)[off_mask]
            report.add("results", "offdiag_max", float(off.max()))
            if backend == "qmc":
                report.verdict("orthogonal_within_4se", bool(np.all(off <= 4 * err[off_mask])))
                spread = float(diag.max() - diag.min())
                report.verdict("diagonal_consistent", spread <= 3 * math.sqrt(2) * float(np.diag(err).max()))
            else:
                report.verdict("orthogonal", float(off.max()) <= opts["tolerance"] * float(diag.max()))
                report.verdict("diagonal_consistent",
                               float(diag.max() - diag.min()) <= opts["tolerance"] * float(diag.max()))
        report.add("results", "gamma_times_profile", float(diag.mean()))
    else:
        raise ValidationError(f"model must be slater or laughlin, got {opts['model']!r}")


def cmd_wen_validate(opts: dict, report: Report) -> None:
    from .wen import enumerate_pi, validate_wen

    datum = validate_wen(opts["K"], opts["n"])
    report.add("results", "g", datum.g)
    report.add("results", "K", np.array(datum.K, dtype=float))
    report.add("results", "n_vec", list(datum.n_vec))
    report.add("results", "d", datum.d)
    report.add("results", "delta", datum.delta)
    report.add("results", "u_vec", list(datum.u_vec))
    report.add("results", "epsilon_K", datum.epsilon_K)
    report.add("results", "cyclic", datum.cyclic)
    report.add("results", "n", datum.n)
    report.add("results", "n_delta_over_d", datum.n_delta_over_d)
    report.add("results", "bundle", "sharp" if datum.sharp else "plain")
    for i, c in enumerate(enumerate_pi(datum)):
        report.add("pi", f"c{i}", list(c.c_vec))
    report.verdict("valid", True)


def _configuration(opts: dict, n: int, tau: complex) -> np.ndarray:
    if opts["z"] is not None:
        z = np.array([_complex(s) for s in opts["z"].replace(",", " ").split()])
        if z.size != n:
            raise ValidationError(f"--z needs {n} positions, got {z.size}")
        return z
    rng = np.random.default_rng(opts["seed"])
    return from_lattice_coords(*rng.uniform(0, 1, (2, n)), tau)


def cmd_kvw(opts: dict, report: Report) -> None:
    from .wen import enumerate_pi, kvw_wavefunction, particle_spec, validate_wen

    datum = validate_wen(opts["K"], opts["n"])
    tau = TorusParams(opts["tau"]).tau
    a, b = opts["xi_a"], opts["xi_b"]
    spec = particle_spec(datum, tau, a, b)
    zeta = [spec.xi] * datum.g
    z = _configuration(opts, datum.n, tau)
    report.add("results", "configuration", list(z))
    report.add("results", "bundle", "sharp" if datum.sharp else "plain")
    worst = 0.0
    for i, c in enumerate(enumerate_pi(datum)):
        value = complex(kvw_wavefunction(datum, tau, zeta, c, z))
        report.add("results", f"c{i}", list(c.c_vec))
        report.add("results", f"value_c{i}", value)
        for p in range(datum.n):
            for shift, factor in ((1.0, spec.signs[0]), (tau, complex(tau_factor(spec, z[p])))):
                moved = z.copy()
                moved[p] += shift
                lhs = complex(kvw_wavefunction(datum, tau, zeta, c, moved))
                scale = max(abs(lhs), abs(factor * value), 1e-300)
                worst = max(worst, abs(lhs - factor * value) / scale)
    report.add("results", "automorphy_defect", worst)
    report.verdict("automorphy", worst <= opts["tolerance"])


def cmd_center_gram(opts: dict, report: Report) -> None:
    from .wen import center_mass_gram, kappa_closed, kappa_printed, parse_int_matrix

    K = parse_int_matrix(opts["K"])
    g = len(K)
    tau = TorusParams(opts["tau"]).tau
    a_vec, b_vec = [opts["xi_a"]] * g, [opts["xi_b"]] * g
    gram, res = center_mass_gram(K, tau, a_vec, b_vec, GridSpec(opts["grid"], 2 * g), return_result=True)
    value = float(np.mean(np.real(np.diag(gram))))
    closed = kappa_closed(K, a_vec, tau.imag)
    printed = kappa_printed(K, a_vec, tau.imag)
    scalar = float(np.abs(gram - value * np.eye(len(gram))).max() / value)
    report.add("results", "gram", gram)
    report.add("results", "diagonal_mean", value)
    report.add("results", "scalar_residual", scalar)
    report.add("results", "kappa_closed", closed)
    report.add("results", "kappa_printed", printed)
    report.add("results", "relative_error_closed", abs(value / closed - 1))
    report.add("results", "relative_error_printed", abs(value / printed - 1))
    report.add("results", "error_estimate", float(np.max(res.error_estimate)))
    _add_integration(report, res)
    report.verdict("scalar", scalar <= opts["tolerance"])
    report.verdict("closed_form", abs(value / closed - 1) <= opts["tolerance"])


_CURVATURE_TOL = {"closed-form": 1e-6, "quadrature": 1e-4, "qmc": 5e-2}


def cmd_curvature(opts: dict, report: Report) -> None:
    from .curvature import (
        CenterMassModel,
        WenSlice,
        center_mass_field,
        gram_field,
        one_particle_field,
        trace_form_and_degree,
    )
    from .wen import parse_int_matrix, validate_wen

    backend, model_name = opts["backend"], opts["model"]
    if backend not in _CURVATURE_TOL:
        raise ValidationError(f"backend must be closed-form, quadrature or qmc, got {backend!r}")
    _need_seed(opts)
    tau = TorusParams(opts["tau"]).tau
    t = tau.imag
    M = opts["grid"]
    sampling = dict(points_per_axis=opts["quad_grid"]) if backend != "qmc" else \
        dict(samples=opts["samples"], seed=opts["seed"])
    if model_name == "one_particle":
        field = one_particle_field(opts["k"], tau, M, backend, quad_points=opts["quad_grid"])
        rate_sum = 1.0  # k entries of slope 1/k
    elif model_name == "center_mass":
        K = parse_int_matrix(opts["K"])
        if backend == "qmc":
            raise ValidationError("the center_mass model has closed-form and quadrature backends only")
        field = center_mass_field(CenterMassModel(K, tau), M, backend, quad_points=opts["quad_grid"])
        Kf = np.array(K, dtype=float)
        e = np.ones(len(K))
        rate_sum = round(abs(np.linalg.det(Kf))) * float(e @ np.linalg.solve(Kf, e))
    elif model_name in ("laughlin", "wen"):
        if model_name == "laughlin":
            model = OneLayerModel(opts["m"], _positive_int(opts["n"]), tau)
            rate_sum = 1.0
        else:
            datum = validate_wen(opts["K"], opts["n"])
            model = WenSlice(datum, tau)
            rate_sum = datum.n_delta_over_d
        if backend == "closed-form":
            field = gram_field(model, GridSpec(M, 2), "closed-form", points_per_axis=opts["quad_grid"])
        else:
            field = gram_field(model, GridSpec(M, 2), backend, **sampling)
    else:
        raise ValidationError(f"unknown curvature model {model_name!r}")
    method = opts["method"] or ("profile" if backend == "qmc" else "finite-difference")
    rep = trace_form_and_degree(field, method, accuracy=opts["accuracy"])
    expected = -math.pi / t * rate_sum
    rel = float(np.abs(rep.trace / expected - 1).max())
    tol = opts["tolerance"] if opts["tolerance"] is not None else _CURVATURE_TOL[backend]
    report.add("results", "method", method)
    report.add("results", "provenance", rep.provenance)
    report.add("results", "rank", rep.rank)
    report.add("results", "trace_mean", rep.trace_mean)
    report.add("results", "trace_expected", expected)
    report.add("results", "trace_max_relative_error", rel)
    report.add("results", "degree", rep.degree)
    report.add("results", "degree_expected", -rate_sum)
    report.add("results", "degree_error_estimate", rep.degree_error)
    report.add("results", "slope", rep.slope)
    report.add("results", "flatness_residual", rep.flatness_residual)
    if rep.fit_residual is not None:
        report.add("results", "fit_residual", rep.fit_residual)
    report.add("results", "coefficient_at_origin", rep.coefficients[0, 0])
    report.verdict("trace_coefficient", rel <= tol)
    report.verdict("degree", abs(rep.degree + rate_sum) <= max(tol * rate_sum, 1e-6))
    report.verdict("projectively_flat", rep.flatness_residual <= (1e-8 if backend == "closed-form" else tol))


def cmd_verify(opts: dict, report: Report, echo: Callable[[str], None]) -> None:
    from .acceptance import CRITERIA, run_all

    try:
        selected = [int(x) for x in opts["criteria"].replace(",", " ").split()]
    except ValueError:
        raise ValidationError(f"criteria must be integers, got {opts['criteria']!r}") from None
    bad = [i for i in selected if i not in CRITERIA]
    if bad or not selected:
        raise ValidationError(f"criteria must be chosen from 1..{len(CRITERIA)}, got {selected}")
    results = run_all(selected, echo=echo)
    for res in results:
        report.add(f"criterion_{res.number}", "title", res.title)
        for key, value in res.details.items():
            report.add(f"criterion_{res.number}", key, value)
        report.add("timestamp", f"criterion_{res.number}_seconds", res.seconds)
    for res in results:
        report.verdict(f"criterion_{res.number}", res.passed)


COMMANDS = {
    "theta": cmd_theta,
    "gram": cmd_gram,
    "norm": cmd_norm,
    "wen-validate": cmd_wen_validate,
    "kvw": cmd_kvw,
    "center-gram": cmd_center_gram,
    "curvature": cmd_curvature,
}


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    """Run one subcommand and return the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise UsageError(parser.format_usage() + "fqhe-torus: error: a subcommand is required")
        flags = {k: v for k, v in vars(ns).items() if k != "command"}
        try:
            opts = resolve_options(ns.command, flags)
        except UsageError as exc:
            raise UsageError(parser.subcommands[ns.command].format_usage() + str(exc)) from None
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except ValidationError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except SystemExit as exc:  # --help and --version
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    report = Report(ns.command)
    started = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0)
    report.add("timestamp", "started", started.isoformat().replace("+00:00", "Z"))
    clock = time.perf_counter()
    saved_workers = os.environ.get(WORKERS_ENV)
    try:
        if "workers" in opts:
            os.environ[WORKERS_ENV] = str(_positive_int(opts["workers"]))
        _echo_inputs(report, opts)
        if ns.command == "verify":
            cmd_verify(opts, report, lambda line: stderr.write(line + "\n"))
        else:
            COMMANDS[ns.command](opts, report)
    except ValidationError as exc:
        stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_INVALID
    except NumericalError as exc:
        stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERICAL
    except (ValueError, TypeError) as exc:
        stderr.write(f"error: invalid input: {exc}\n")
        return EXIT_INVALID
    finally:
        if saved_workers is None:
            os.environ.pop(WORKERS_ENV, None)
        else:
            os.environ[WORKERS_ENV] = saved_workers
    report.add("timestamp", "wall_time_s", round(time.perf_counter() - clock, 6))
    report.add("verdicts", "overall", "PASS" if report.passed else "FAIL")
    text = report.to_text()
    if "output" in opts:
        try:
            with open(opts["output"], "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            stderr.write(f"error: cannot write report: {exc.strerror}\n")
            return EXIT_INVALID
    else:
        stdout.write(text)
    return EXIT_OK if report.passed else EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
