"""Command-line interface: ``kdvlimit <command> --config plan.toml``.

Exit codes: 0 success, 1 usage or invalid input, 2 numerical failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import InvalidArgumentError, NumericalFailure
from .harness import (
    SweepPlan,
    _model,
    expansion_coefficients,
    load_plan,
    run_continuity_check,
    run_sweep,
    validate_plan,
)
from .hopf import critical_time, solve_hopf
from .initial_data import make_datum
from .io import export
from .solver import evolve
from .spectral import make_grid

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
FORMATS = ("csv", "json", "bin")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kdvlimit", description="Small-dispersion limit of gKdV equations.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", type=Path, help="TOML plan file (defaults: gaussian KdV plan)")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--format", choices=FORMATS, default=None)
        p.add_argument("--seedless", action="store_true",
                       help="accepted for compatibility; every run is deterministic")
        return p

    p = common(sub.add_parser("solve", help="one gKdV run to t_eval"))
    p.add_argument("--eps", type=float, help="dispersion parameter (default: largest in plan)")
    common(sub.add_parser("hopf", help="critical time and the characteristics solution"))
    common(sub.add_parser("transport", help="expansion coefficients v^k at t_eval"))
    p = common(sub.add_parser("expand", help="eps sweep with remainders and fitted orders"))
    p.add_argument("--runtimes", action="store_true", help="include wall-clock times in the report")
    common(sub.add_parser("continuity", help="continuity check along the two-term path"))
    p = common(sub.add_parser("invariants", help="conservation audit of one run"))
    p.add_argument("--eps", type=float)
    return parser


def _plan(args) -> SweepPlan:
    return load_plan(args.config) if args.config else SweepPlan(resolution_override=True)


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def _write_field(obj, args, stem: str, default_fmt: str, t=None):
    out = _out_dir(args)
    if out is None:
        return None
    fmt = args.format or default_fmt
    path = export(obj, out / f"{stem}.{fmt}", fmt, t)
    print(f"wrote {path}")
    return path


def _write_report(report, args, stem: str):
    text = report.to_json()
    out = _out_dir(args)
    if args.format not in (None, "json"):
        raise InvalidArgumentError(f"{args.command} reports are JSON only")
    if out is None:
        print(text)
    else:
        path = out / f"{stem}.json"
        path.write_text(text + "\n")
        print(f"wrote {path}")


def _run_single(plan: SweepPlan, eps: float | None, save_every: int | None = None):
    t = validate_plan(plan)
    eps = plan.eps_values[0] if eps is None else eps
    grid = make_grid(*plan.grid)
    cfg = replace(plan.solver, t_end=t)
    if save_every is not None and cfg.save_every is None:
        cfg = replace(cfg, save_every=save_every)
    phi = make_datum(**plan.phi_spec).sample(grid)
    return evolve(phi, _model(plan), plan.dispersion(eps), cfg), eps


def cmd_solve(args) -> int:
    traj, eps = _run_single(_plan(args), args.eps)
    print(f"eps = {eps:g}  t = {traj.times[-1]:.10g}  steps = {traj.meta['steps']}")
    _write_field(traj, args, "solution", "csv")
    return EXIT_OK


def cmd_hopf(args) -> int:
    plan = _plan(args)
    grid = make_grid(*plan.grid)
    datum = make_datum(**plan.phi_spec)
    model = _model(plan)
    ct = critical_time(datum, model, grid)
    print(f"t_c = {ct.t_c:.10f}")
    print(f"breaking foot point = {ct.arg_xi:.10f}")
    t = 0.5 * ct.t_c if plan.t_eval is None else plan.t_eval
    if ct.finite or plan.t_eval is not None:
        sol = solve_hopf(datum, model, t, grid)
        _write_field(sol.v0, args, "v0", "csv", t)
    return EXIT_OK


def cmd_transport(args) -> int:
    plan = _plan(args)
    t = validate_plan(plan)
    coeffs = expansion_coefficients(plan, t)
    for k, f in enumerate(coeffs.fields):
        print(f"v{k}: max |v| = {f.max_abs():.6e}")
        _write_field(f, args, f"v{k}", "csv", t)
    return EXIT_OK


def cmd_expand(args) -> int:
    report = run_sweep(_plan(args), include_runtimes=args.runtimes)
    _write_report(report, args, "report")
    return EXIT_OK


def cmd_continuity(args) -> int:
    report = run_continuity_check(_plan(args))
    _write_report(report, args, "continuity")
    return EXIT_OK


def cmd_invariants(args) -> int:
    traj, eps = _run_single(_plan(args), args.eps, save_every=10)
    mass, momentum, energy = traj.diagnostics[0]
    result = {"eps": eps, "initial": {"mass": mass, "momentum": momentum, "energy": energy},
              "drifts": traj.drifts()}
    text = json.dumps(result, indent=2)
    out = _out_dir(args)
    if out is None:
        print(text)
    else:
        (out / "invariants.json").write_text(text + "\n")
        print(f"wrote {out / 'invariants.json'}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "hopf": cmd_hopf,
    "transport": cmd_transport,
    "expand": cmd_expand,
    "continuity": cmd_continuity,
    "invariants": cmd_invariants,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        eps = getattr(exc, "eps", None)
        where = f" (eps = {eps:g})" if eps is not None else ""
        print(f"numerical failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
