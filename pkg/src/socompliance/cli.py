"""Command-line entry point: ``socompliance {ue,so,max-ue,check}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .assignment import SO, UE, solve_equilibrium
from .compliance import decompose_flow
from .network import NetworkError
from .pipeline import (PipelineError, PipelineOptions, equilibrium_section, header, pipeline_report,
                       run_check, run_pipeline)
from .reduced_cost import DEFAULT_TOLERANCE, EMPIRICAL, EXACT
from .tntp import TntpParseError, load_model, parse_trips

log = logging.getLogger("socompliance")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2
EXIT_INSUFFICIENT = 3

ENV_PREFIX = "SOCOMPLIANCE_"
# option dest -> (flag, converter)
_ENV_OPTIONS = {
    "net": str, "trips": str, "aec": float, "rc_mode": str, "rc_tol": float, "export_lp": str,
    "out": str, "json": str, "threads": int, "seed": int, "compliant_demand": str, "max_iterations": int,
}

EPILOG = f"""\
environment:
  Every option can also be set through an environment variable named
  {ENV_PREFIX}<OPTION>, upper case with dashes as underscores, e.g.
  {ENV_PREFIX}NET, {ENV_PREFIX}AEC, {ENV_PREFIX}RC_MODE, {ENV_PREFIX}THREADS.
  Command-line flags take precedence over the environment.

exit status:
  0 success / sufficient, 1 usage, input or stage error,
  2 equilibrium did not converge, 3 compliant demand insufficient.
"""


class UsageError(Exception):
    pass


def _env_default(dest, fallback):
    raw = os.environ.get(ENV_PREFIX + dest.upper())
    if raw is None or raw == "":
        return fallback
    try:
        return _ENV_OPTIONS[dest](raw)
    except ValueError:
        raise UsageError(f"environment variable {ENV_PREFIX + dest.upper()}={raw!r} is not valid") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("input and run options")
    g.add_argument("--net", default=_env_default("net", None), help="network file (*_net.tntp)")
    g.add_argument("--trips", default=_env_default("trips", None), help="trips file (*_trips.tntp)")
    g.add_argument("--aec", type=float, default=_env_default("aec", 1e-8),
                   help="average excess cost target in minutes (default 1e-8)")
    g.add_argument("--max-iterations", type=int, default=_env_default("max_iterations", 2000),
                   help="equilibrium iteration cap (default 2000)")
    g.add_argument("--rc-mode", choices=(EXACT, EMPIRICAL), default=_env_default("rc_mode", EXACT),
                   help="zero-reduced-cost link rule (default exact)")
    g.add_argument("--rc-tol", type=float, default=_env_default("rc_tol", DEFAULT_TOLERANCE),
                   help=f"exact-mode reduced-cost tolerance in minutes (default {DEFAULT_TOLERANCE:g})")
    g.add_argument("--export-lp", metavar="DIR", default=_env_default("export_lp", None),
                   help="write every LP solved to DIR in MPS format")
    g.add_argument("--out", default=_env_default("out", None), help="report file (default: standard output)")
    g.add_argument("--json", metavar="PATH", default=_env_default("json", None),
                   help="also write the report as JSON")
    g.add_argument("--threads", type=int, default=_env_default("threads", 1),
                   help="worker threads for per-origin work (default 1)")
    g.add_argument("--seed", type=int, default=_env_default("seed", None),
                   help="randomise the equilibrium start (default: deterministic plain start)")
    g.add_argument("--no-paths", action="store_true", help="omit path prescriptions from the report")
    g.add_argument("-v", "--verbose", action="count", default=0, help="progress messages on stderr")

    parser = argparse.ArgumentParser(
        prog="socompliance", description="System-optimal routing with a minimal compliant share.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("ue", "solve the user equilibrium"), ("so", "solve the system optimum"),
                       ("max-ue", "largest self-interested share compatible with SO")):
        sub.add_parser(name, parents=[common], help=text, description=text, epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    check = sub.add_parser("check", parents=[common], help="is a given compliant demand sufficient for SO?",
                           epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    check.add_argument("--compliant-demand", default=_env_default("compliant_demand", None),
                       help="compliant demand per OD pair, in the trips-file format")
    return parser


def _config(args) -> dict:
    keys = ["net", "trips", "aec", "max_iterations", "rc_mode", "rc_tol", "threads", "seed", "export_lp"]
    if args.command == "check":
        keys.append("compliant_demand")
    return {k: getattr(args, k) for k in keys}


def _options(args) -> PipelineOptions:
    try:
        return PipelineOptions(aec_target=args.aec, max_iterations=args.max_iterations, rc_mode=args.rc_mode,
                               rc_tolerance=args.rc_tol, seed=args.seed, threads=args.threads,
                               export_lp_dir=args.export_lp, solve_ue=True)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load(args):
    for flag in ("net", "trips"):
        path = getattr(args, flag)
        if not path:
            raise UsageError(f"--{flag} is required")
        if not Path(path).is_file():
            raise UsageError(f"--{flag}: no such file {path!r}")
    return load_model(args.net, args.trips)


def _write(args, rep, summary):
    text = rep.to_text()
    if args.out:
        Path(args.out).write_text(text)
        print(summary)
    else:
        sys.stdout.write(text)
    if args.json:
        Path(args.json).write_text(rep.to_json())


def cmd_equilibrium(args) -> int:
    model = _load(args)
    mode = UE if args.command == "ue" else SO
    sol = solve_equilibrium(model, mode, args.aec, args.max_iterations, seed=args.seed)
    rep = header(args.command, _config(args))
    equilibrium_section(rep, sol, mode.lower())
    rows = [[e + 1, model.node_ids[int(model.tails[e])], model.node_ids[int(model.heads[e])],
             sol.link_flow[e], sol.link_latency[e], sol.link_marginal_cost[e]] for e in range(model.n_links)]
    rep.table("links", ["link", "tail", "head", "flow", "latency", "marginal_cost"], rows)
    status = "converged" if sol.converged else "NOT converged"
    _write(args, rep, f"{mode} TTT {sol.total_travel_time:.6f} AEC {sol.aec:.3e} ({status})")
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_max_ue(args) -> int:
    model = _load(args)
    res = run_pipeline(model, _options(args))
    rep = pipeline_report(model, res, _config(args), paths=not args.no_paths)
    c = res.compliance
    _write(args, rep, f"compliant {c.percent_compliant:.4f}% (UE LP bound {100 * c.ue_lp_compliant_fraction:.4f}%)"
                      f" r_ue {c.r_ue_total:.6f} of {c.total_demand:.6f}")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def _read_compliant(model, path):
    if not path:
        raise UsageError("--compliant-demand is required for check")
    if not Path(path).is_file():
        raise UsageError(f"--compliant-demand: no such file {path!r}")
    trips = parse_trips(Path(path).read_text())
    index = {v: i for i, v in enumerate(model.node_ids)}
    out = {}
    for (s, t), d in trips.demand.items():
        if s not in index or t not in index or (index[s], index[t]) not in model.demand:
            raise UsageError(f"compliant demand for pair ({s}, {t}) which has no demand")
        R = model.demand[(index[s], index[t])]
        if d > R * (1 + 1e-12):
            raise UsageError(f"compliant demand {d} for pair ({s}, {t}) exceeds its demand {R}")
        out[(index[s], index[t])] = d
    return out


def cmd_check(args) -> int:
    model = _load(args)
    compliant = _read_compliant(model, args.compliant_demand)
    so, rc, verdict = run_check(model, compliant, _options(args))
    rep = header("check", _config(args))
    equilibrium_section(rep, so, "so")
    rep.section("sufficiency", {"sufficient": verdict.sufficient, "lp_status": verdict.lp_status,
                                "compliant_demand": sum(compliant.values()),
                                "ue_demand": model.total_demand - sum(compliant.values())})
    if verdict.sufficient and not args.no_paths:
        ue_dem = {k: R - compliant.get(k, 0.0) for k, R in model.demand.items()}
        co_dem = {k: compliant.get(k, 0.0) for k in model.demand}
        for label, flows, dem in (("ue_paths", verdict.ue_per_origin, ue_dem),
                                  ("compliant_paths", verdict.compliant_per_origin, co_dem)):
            paths = decompose_flow(model, flows, dem)
            rep.table(label, ["origin", "dest", "volume", "links"],
                      [[model.node_ids[s], model.node_ids[t], v, " ".join(str(e + 1) for e in p)]
                       for s, t, p, v in paths])
    word = "sufficient" if verdict.sufficient else "insufficient"
    _write(args, rep, word)
    if not args.out:
        print(word, file=sys.stderr)
    return EXIT_OK if verdict.sufficient else EXIT_INSUFFICIENT


COMMANDS = {"ue": cmd_equilibrium, "so": cmd_equilibrium, "max-ue": cmd_max_ue, "check": cmd_check}


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except UsageError as exc:
        print(f"socompliance: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except PipelineError as exc:
        print(f"socompliance: stage {exc.stage} failed: {exc.cause}", file=sys.stderr)
    except (UsageError, TntpParseError, NetworkError, OSError, ValueError) as exc:
        print(f"socompliance: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
