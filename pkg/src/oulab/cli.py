"""Command line entry point: ``oulab model-info | run | plot``.

Exit codes: 0 ok, 1 check failure, 2 usage or configuration error,
3 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np
import tomli

from . import __version__, harness, matkit
from .domains import domain_from_spec
from .exceptions import CapacityError, ConfigError, OULabError, StabilityError
from .model import build_model

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3

_TOP_KEYS = {"seed", "out", "model", "domain", "run", "caps"}
_RUN_KEYS = {"suite", "checks", "seed", "params"}
_CAP_KEYS = {"max_paths", "max_grid", "check_seconds"}


def load_config(path):
    """Parse and validate a TOML experiment config."""
    try:
        with open(path, "rb") as fh:
            cfg = tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    extra = set(cfg) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
    run = cfg.get("run", {})
    if set(run) - _RUN_KEYS:
        raise ConfigError(f"unknown [run] keys: {', '.join(sorted(set(run) - _RUN_KEYS))}")
    caps = cfg.get("caps", {})
    if set(caps) - _CAP_KEYS:
        raise ConfigError(f"unknown [caps] keys: {', '.join(sorted(set(caps) - _CAP_KEYS))}")
    params = run.get("params", {})
    bad = set(params) - set(harness.DEFAULT_PARAMS)
    if bad:
        raise ConfigError(f"unknown run parameters: {', '.join(sorted(bad))}")
    if "model" in cfg and "A" not in cfg["model"]:
        raise ConfigError("[model] needs a matrix A")
    return cfg


def _seed(value):
    if value is None:
        raise ConfigError("a seed is mandatory (--seed or seed in the config)")
    try:
        s = int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {value!r}") from exc
    if not 0 <= s < 2**64 or (isinstance(value, float) and value != s):
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {value!r}")
    return s


def resolve_suite(cfg, suite_name=None, checks=None, seed=None):
    """Combine a config, a built-in suite name and CLI overrides into a :class:`harness.Suite`."""
    cfg = cfg or {}
    run = cfg.get("run", {})
    seed = _seed(seed if seed is not None else run.get("seed", cfg.get("seed")))
    name = suite_name or run.get("suite")
    base = harness.SUITES.get(name) if name else None
    if name and base is None:
        raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(harness.SUITES)}")
    model = cfg.get("model", {})
    A = model.get("A", base["A"] if base else None)
    if A is None:
        raise ConfigError("no model: give [model] A in the config or --suite")
    dom = cfg.get("domain", base["domain"] if base else None)
    if dom is None:
        raise ConfigError("no domain: give a [domain] block or --suite")
    ids = list(checks or run.get("checks") or (base["checks"] if base else harness.CHECKS))
    return harness.Suite(name or "custom", A, dom, ids, seed, dict(run.get("params", {})),
                         dict(cfg.get("caps", {})), float(model.get("tol", 1e-10)))


def _complex_list(z):
    return [[float(v.real), float(v.imag)] for v in np.atleast_1d(z)]


def model_report(A, tol=1e-10):
    m = build_model(A, tol)
    sp = matkit.spectrum(m.A)
    return {
        "A": m.A.tolist(), "d": m.d, "Q_inf": m.Q.tolist(), "B": m.B.tolist(),
        "w": m.w, "M": m.M, "spectrum": _complex_list(sp.eigenvalues),
        "spectral_abscissa": float(matkit.spectral_abscissa(m.A)),
        "norm_B": matkit.op_norm(m.B), "notes": list(m.notes), "version": __version__,
    }


def cmd_model_info(args):
    cfg = load_config(args.config) if args.config else {}
    if "model" in cfg:
        A, tol = cfg["model"]["A"], float(cfg["model"].get("tol", 1e-10))
    elif args.suite:
        if args.suite not in harness.SUITES:
            raise ConfigError(f"unknown suite {args.suite!r}")
        A, tol = harness.SUITES[args.suite]["A"], 1e-10
    else:
        raise ConfigError("model-info needs --config with a [model] block or --suite")
    report = model_report(A, tol)
    if "domain" in cfg:
        domain_from_spec(cfg["domain"], report["d"])
        report["domain"] = cfg["domain"]
    report["config_hash"] = harness.config_hash({"A": report["A"], "tol": tol, "domain": cfg.get("domain")})
    out = args.out or cfg.get("out") or "."
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "model.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")
    print(f"Q_inf = {report['Q_inf']}\nB = {report['B']}\nw = {report['w']:.6g}  M = {report['M']:.6g}")
    print("spectrum = " + ", ".join(f"{a:+.6g}{b:+.6g}i" for a, b in report["spectrum"]))
    return EXIT_OK


def cmd_run(args):
    cfg = load_config(args.config) if args.config else {}
    s = resolve_suite(cfg, args.suite, args.check, args.seed)
    out = args.out or cfg.get("out") or "results"
    results = harness.run_suite(s, jobs=args.jobs)
    written = harness.write_results(results, out, s.spec())
    for r in results:
        bound = "" if r.bound is None else f" bound={r.bound:.6g}"
        print(f"{r.verdict:>12}  {r.check_id:<22} measured={r.measured:.6g}{bound}  ({r.seconds:.1f} s)")
    if args.svg:
        from . import plotting

        for kind in plotting.KINDS:
            if os.path.exists(os.path.join(out, f"{kind}.csv")):
                written.append(plotting.plot_kind(os.path.join(out, "results.csv"), kind, out))
    for p in written:
        print(f"wrote {p}")
    if any(r.resource_error for r in results):
        return EXIT_RESOURCE
    return EXIT_FAIL if any(r.verdict == harness.FAIL for r in results) else EXIT_OK


def cmd_plot(args):
    from . import plotting

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        path = plotting.plot_kind(args.results, args.kind, args.out)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"wrote {path}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="oulab", description="Numerical lab for OU semigroups on domains.")
    p.add_argument("--version", action="version", version=f"oulab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    mi = sub.add_parser("model-info", help="report Q_inf, B, w, M and the spectrum; writes model.json")
    mi.add_argument("--config", metavar="PATH")
    mi.add_argument("--suite", choices=sorted(harness.SUITES))
    mi.add_argument("--out", metavar="DIR")
    mi.set_defaults(func=cmd_model_info)

    run = sub.add_parser("run", help="run a suite or individual checks")
    run.add_argument("--config", metavar="PATH")
    run.add_argument("--suite", choices=sorted(harness.SUITES))
    run.add_argument("--check", action="append", metavar="ID", help="check id (repeatable)")
    run.add_argument("--seed", metavar="U64")
    run.add_argument("--jobs", type=int, default=1, metavar="N")
    run.add_argument("--svg", action="store_true", help="also write SVG plots")
    run.add_argument("--out", metavar="DIR")
    run.set_defaults(func=cmd_run)

    pl = sub.add_parser("plot", help="draw a table from a previous run as SVG")
    pl.add_argument("results", metavar="RESULTS_CSV")
    pl.add_argument("--kind", required=True, choices=list(("decay", "scan", "spectrum", "sweep")))
    pl.add_argument("--out", metavar="DIR")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StabilityError as exc:
        print(f"error: unstable drift matrix: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"error: resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, OULabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
