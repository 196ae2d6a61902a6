"""Command-line front end: ``entlp solve | scan | profile | verify``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import acceptance, bounds
from .model import (
    AssignmentInstance,
    InstanceError,
    SimplexFamily,
    instance_to_dict,
    load_instance,
    profile,
    validate,
)
from .scan import EtaGrid, ScanConfig, family_label, result_to_json, rows_to_csv, run_scan
from .solver import SolverError, solve

DEFAULT_SEED = 0
EXIT_USAGE = 2

log = logging.getLogger("entlp")


def _kv(text: str) -> dict:
    out = {}
    for part in filter(None, text.split(",")):
        if "=" not in part:
            raise argparse.ArgumentTypeError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_instance(args):
    """Resolve the instance from a file or one of the built-in family flags."""
    sources = [s for s in (args.instance, args.simplex, args.assignment_worst_case,
                           args.assignment_random) if s is not None]
    if len(sources) != 1:
        raise InstanceError("give exactly one of --instance, --simplex, "
                            "--assignment-worst-case, --assignment-random")
    if args.instance is not None:
        return load_instance(args.instance)
    try:
        if args.simplex is not None:
            kv = args.simplex
            return SimplexFamily(int(kv["d"]), float(kv.get("alpha", 1)), float(kv.get("beta", 1)))
        if args.assignment_worst_case is not None:
            return bounds.worst_case_assignment_cost(int(args.assignment_worst_case["n"]))
        kv = args.assignment_random
        n, K = int(kv["n"]), int(kv.get("K", 9))
        rng = np.random.default_rng(args.seed)
        return AssignmentInstance(rng.integers(0, K + 1, size=(n, n)).astype(float))
    except KeyError as exc:
        raise InstanceError(f"family argument lacks {exc}") from exc


def _add_instance_args(p):
    g = p.add_argument_group("instance")
    g.add_argument("--instance", metavar="PATH", help="instance JSON file")
    g.add_argument("--simplex", type=_kv, metavar="d=D,alpha=A,beta=B")
    g.add_argument("--assignment-worst-case", type=_kv, metavar="n=N")
    g.add_argument("--assignment-random", type=_kv, metavar="n=N,K=K",
                   help="integer costs uniform in {0..K}")
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)


def _add_solver_args(p):
    p.add_argument("--route", choices=["auto", "gibbs", "sinkhorn", "dual"], default="auto")
    p.add_argument("--tol", type=float, default=1e-8)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return obj


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    inst = build_instance(args)
    validate(inst)
    prof = profile(inst)
    sol = solve(inst, args.eta, route=args.route, tol=args.tol, optimal_value=prof.optimal_value)
    family = bounds.detect_family(inst)
    rep = bounds.check_report(prof, sol, family=family, tau=args.tau)
    doc = {
        "instance": instance_to_dict(inst),
        "profile": prof.to_dict(),
        "solution": sol.to_dict(),
        "bounds": rep.to_dict(),
        "eta_for_epsilon": None if args.epsilon is None else rep.eta_for_epsilon(args.epsilon),
    }
    if isinstance(family, tuple):
        n = family[1]
        doc["assignment_lower"] = {
            "guaranteed_gap": bounds.assignment_gap_lower_bound(n, args.eta),
            "eps": args.epsilon,
            "threshold": None if args.epsilon is None or not 0 < args.epsilon < 0.5
            else bounds.assignment_eta_lower_threshold(n, args.epsilon),
        }
    _emit(json.dumps(_clean(doc), indent=2, default=_json_default) + "\n", args.out)
    return 0


def cmd_profile(args) -> int:
    inst = build_instance(args)
    validate(inst)
    prof = profile(inst)
    doc = {"instance": instance_to_dict(inst), "profile": prof.to_dict(),
           "vertices": [v.tolist() for v in prof.vertices],
           "optimal": list(prof.optimal)}
    _emit(json.dumps(_clean(doc), indent=2, default=_json_default) + "\n", args.out)
    return 0


def cmd_scan(args) -> int:
    inst = build_instance(args)
    validate(inst)
    cfg = ScanConfig(
        instance=inst,
        grid=EtaGrid.parse(args.eta_grid),
        route=args.route,
        tol=args.tol,
        out=args.out,
        fmt=args.format,
        workers=args.workers,
    )
    result = run_scan(cfg)
    text = rows_to_csv(result.rows) if cfg.fmt == "csv" else result_to_json(result, inst) + "\n"
    _emit(text, cfg.out)
    if cfg.out and cfg.fmt == "csv":
        Path(cfg.out).with_suffix(".profile.json").write_text(
            json.dumps(_clean(result.profile.to_dict()), indent=2) + "\n")
    if args.plot:
        fig = args.plot if args.plot != "auto" else (
            str(Path(cfg.out).with_suffix(".png")) if cfg.out else "scan.png")
        from .plotting import plot_scan

        plot_scan(result, fig, title=family_label(inst))
        log.info("wrote figure %s", fig)
    for r in result.failed:
        print(f"row eta={r.eta:.6g} failed: {r.error}", file=sys.stderr)
    return 1 if result.failed else 0


def cmd_verify(args) -> int:
    names = args.only or list(acceptance.CRITERIA)
    results = acceptance.run_all(names)
    sys.stdout.write(acceptance.summary(results))
    if args.timings:
        for c in results:
            print(f"{c.name}: {c.seconds:.3f} s", file=sys.stderr)
    failed = [c.name for c in results if not c.passed]
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entlp",
        description="Entropy-penalized linear programs and their convergence bounds.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve at one eta and report all bounds as JSON")
    _add_instance_args(p)
    _add_solver_args(p)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--epsilon", type=float, help="target accuracy for eta_for_epsilon")
    p.add_argument("--tau", type=float, help="also evaluate the tau-relaxed bound")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("scan", help="solve over an eta grid, emit CSV or JSON")
    _add_instance_args(p)
    _add_solver_args(p)
    p.add_argument("--eta-grid", required=True, metavar="START:STOP:COUNT:log|lin")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--plot", nargs="?", const="auto", metavar="PNG",
                   help="also render the scan as a figure (default: next to --out)")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("profile", help="vertices, gap and radii of an instance")
    _add_instance_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--only", nargs="+", choices=list(acceptance.CRITERIA))
    p.add_argument("--timings", action="store_true", help="print runtimes to stderr")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InstanceError, ValueError) as exc:
        print(f"entlp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"entlp: solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
