"""Command-line front end.

Subcommands: ``check``, ``simulate``, ``dichotomy``, ``periodic``,
``integrate`` and ``example`` (writes a built-in example as a config file).
Exit codes: 0 success, 2 a jump factor is singular, 3 no dichotomy where one is
required, 64 bad configuration or arguments, 1 if an internal
cross-check fails.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from contextlib import contextmanager

import numpy as np

from .bv import RegulatedVectorFunction
from .config import ConfigError, canonical_json, load, to_dict
from .core import GLDESystem, check_H, propagate
from .errors import ConditionHError, ConsistencyError, DimensionError, ResonanceError
from .floquet import EPS_UC, dichotomy_bound_audit, dichotomy_check, monodromy
from .ks import gauge_oracle_integrate, ks_integrate
from .periodic import periodic_solution
from .testkit import builtin_examples

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_H = 2
EXIT_RESONANCE = 3
EXIT_CONFIG = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _write_json(obj, path):
    with _output(path) as fh:
        fh.write(canonical_json(obj))


def _write_csv(traj, path):
    with _output(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "side"] + [f"x_{i + 1}" for i in range(traj.dimension)])
        for t, side, x in traj.rows():
            w.writerow([format(t, ".17g"), side] + [format(float(v), ".17g") for v in x])


def _complex_pairs(values):
    return [[float(np.real(v)), float(np.imag(v))] for v in values]


def _system(path):
    A, f = load(path)
    return GLDESystem(A, f)


def _vector(text, n):
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"cannot parse vector {text!r}") from None
    if len(vals) == 1 and n > 1:
        vals = vals * n
    if len(vals) != n:
        raise ConfigError(f"expected {n} components, got {len(vals)}")
    return np.array(vals)


def cmd_check(args):
    A, _ = load(args.config)
    rep = check_H(A)
    _write_json(
        {
            "passed": rep.passed,
            "threshold": rep.threshold,
            "jumps": [{"time": t, "det_I_minus_pre": dm, "det_I_plus_post": dp} for t, dm, dp in rep.entries],
        },
        args.out,
    )
    return EXIT_OK if rep.passed else EXIT_H


def cmd_simulate(args):
    S = _system(args.config)
    x0 = _vector(args.x0, S.dimension)
    if not (math.isfinite(args.t0) and math.isfinite(args.t1)):
        raise ConfigError("t0 and t1 must be finite")
    traj = propagate(S, args.t0, x0, args.t1, samples=args.samples)
    _write_csv(traj, args.out)
    return EXIT_OK


def cmd_dichotomy(args):
    S = _system(args.config)
    md = monodromy(S)
    rep = dichotomy_check(md, eps_uc=args.eps_uc)
    out = {
        "multipliers": _complex_pairs(md.multipliers),
        "classification": rep.classification,
        "P": None if rep.P is None else rep.P.tolist(),
        "K": rep.K,
        "alpha": rep.alpha,
        "audit_worst_ratio": dichotomy_bound_audit(S, rep) if rep.is_dichotomy else None,
        "marginal_multipliers": _complex_pairs(rep.marginal),
        "eps_uc": rep.eps_uc,
    }
    _write_json(out, args.out)
    return EXIT_OK


def cmd_periodic(args):
    S = _system(args.config)
    res = periodic_solution(S, eps_uc=args.eps_uc, N=args.truncation, samples=args.samples)
    _write_json(
        {
            "x0": res.x0.tolist(),
            "periodicity_residual": res.periodicity_residual,
            "x0_alt": res.x0_alt.tolist(),
            "representation_gap": res.representation_gap,
            "truncation_periods": res.truncation_periods,
            "truncation_bound": res.truncation_bound,
            "x0_direct_ks": res.x0_direct.tolist(),
            "path_gap": res.path_gap,
            "multipliers": _complex_pairs(res.report.multipliers),
        },
        args.out,
    )
    if args.trajectory:
        _write_csv(res.trajectory, args.trajectory)
    return EXIT_OK


def cmd_integrate(args):
    A, f = load(args.config)
    a, b = args.a, args.b
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ConfigError("integration bounds must be finite")
    if args.oracle_cells < 1:
        raise ConfigError("--oracle-cells must be positive")
    if f is None:
        f = RegulatedVectorFunction.zero(A.dimension, A.period)
    value = ks_integrate(A, f, a, b)
    oracle = gauge_oracle_integrate(A, f, a, b, args.oracle_cells)
    _write_json(
        {
            "a": a,
            "b": b,
            "value": value.tolist(),
            "oracle_value": oracle.tolist(),
            "oracle_cells": args.oracle_cells,
            "gap": float(np.linalg.norm(value - oracle)),
        },
        args.out,
    )
    return EXIT_OK


def cmd_example(args):
    names = {ex.identifier: ex for ex in builtin_examples()}
    if args.list:
        for k, ex in names.items():
            print(f"{k}\t{ex.note}")
        return EXIT_OK
    if args.name not in names:
        raise ConfigError(f"unknown example {args.name!r}; choose from {', '.join(names)}")
    S = names[args.name].system
    _write_json(to_dict(S.A, S.f), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="glde", description="Periodic generalized linear differential equations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="check invertibility of the jump factors")
    c.add_argument("config")
    c.add_argument("--out")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("simulate", help="integrate from an initial value, write CSV")
    s.add_argument("config")
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--t1", type=float, default=None, help="defaults to one period after t0")
    s.add_argument("--x0", default="0", help="comma separated; a single value is broadcast")
    s.add_argument("--samples", type=int, default=101)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("dichotomy", help="Floquet multipliers and dichotomy verdict")
    d.add_argument("config")
    d.add_argument("--eps-uc", type=float, default=EPS_UC)
    d.add_argument("--out")
    d.set_defaults(func=cmd_dichotomy)

    q = sub.add_parser("periodic", help="the unique periodic solution")
    q.add_argument("config")
    q.add_argument("--eps-uc", type=float, default=EPS_UC)
    q.add_argument("--truncation", type=int, default=None, help="periods per side for the dichotomy sum")
    q.add_argument("--samples", type=int, default=101)
    q.add_argument("--out")
    q.add_argument("--trajectory", help="CSV path for the solution over one period")
    q.set_defaults(func=cmd_periodic)

    g = sub.add_parser("integrate", help="KS integral of f against A, with the gauge oracle")
    g.add_argument("config")
    g.add_argument("--a", type=float, default=0.0)
    g.add_argument("--b", type=float, default=None, help="defaults to one period")
    g.add_argument("--oracle-cells", type=int, default=2**16)
    g.add_argument("--out")
    g.set_defaults(func=cmd_integrate)

    e = sub.add_parser("example", help="write a built-in example as a config file")
    e.add_argument("name", nargs="?", default="E1")
    e.add_argument("--list", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_example)
    return p


def _fill_defaults(args):
    if getattr(args, "t1", "") is None:
        A, _ = load(args.config)
        args.t1 = args.t0 + A.period
    if getattr(args, "b", "") is None:
        A, _ = load(args.config)
        args.b = args.a + A.period


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _fill_defaults(args)
        return args.func(args)
    except (ConfigError, DimensionError) as exc:
        print(f"glde: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConditionHError as exc:
        print(f"glde: {exc}", file=sys.stderr)
        return EXIT_H
    except ResonanceError as exc:
        print(f"glde: {exc}", file=sys.stderr)
        return EXIT_RESONANCE
    except ConsistencyError as exc:
        print(f"glde: internal cross-check failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as exc:
        print(f"glde: invalid argument: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
