"""Command-line front end.

Every subcommand prints a JSON report on stdout.  Exit codes: 0 success,
1 domain error (one-line diagnostic on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .compile import classify_sign, pose_influence_query, pose_marginal_query
from .data import (
    dump_network,
    load_counts,
    load_dataset,
    load_network,
    network_to_dict,
    write_report,
)
from .learn import IdmConfig, count_statistics, fit_idm, fit_ml
from .model import (
    Network,
    NetworkError,
    Query,
    build_emajsat_gadget,
    parse_formula,
    validate_network,
)
from .oracle import GridSpec, emajsat_brute, grid_bounds, grid_ml
from .solver import SolverOptions, solve


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------

def _assignment(net: Network, text: str) -> tuple[str, int]:
    name, sep, value = text.partition("=")
    name, value = name.strip(), value.strip()
    if not sep or not name or not value:
        raise UsageError(f"expected VAR=value, got {text!r}")
    var = net.var(name)
    if value not in var.values:
        raise NetworkError(f"{name!r} has no value {value!r} (values: {', '.join(var.values)})")
    return name, var.values.index(value)


def _evidence(net: Network, items: list[str] | None) -> dict[str, int]:
    ev = {}
    for item in items or []:
        for part in item.split(","):
            if part.strip():
                name, v = _assignment(net, part)
                ev[name] = v
    return ev


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise NetworkError(f"cannot read {path}: {e.strerror}") from None


def _net(args) -> Network:
    if not args.net:
        raise UsageError("--net is required")
    return load_network(_read(args.net))


def _query(net: Network, args) -> Query:
    if not args.query:
        raise UsageError("--query is required")
    target, value = _assignment(net, args.query)
    return Query.make(target, value, _evidence(net, args.evidence))


def _counts(net: Network, args):
    if args.data and args.counts:
        raise UsageError("give either --data or --counts, not both")
    if args.data:
        return count_statistics(load_dataset(_read(args.data), net), net)
    if args.counts:
        return load_counts(_read(args.counts), net)
    raise UsageError("--data or --counts is required")


def _solver_options(args) -> SolverOptions:
    progress = None
    if args.progress:
        progress = lambda line: print(line, file=sys.stderr, flush=True)
    return SolverOptions(gap=args.gap, max_nodes=args.max_nodes, seed=args.seed,
                         threads=args.threads, progress=progress,
                         progress_every=args.progress if args.progress else 0,
                         time_limit=args.time_limit)


def _query_text(net: Network, q: Query) -> dict:
    text = {"target": f"{q.target}={net.var(q.target).values[q.value]}"}
    text["evidence"] = [f"{n}={net.var(n).values[v]}" for n, v in q.evidence]
    return text


def _emit(args, report: dict, started: float) -> None:
    text = write_report(report, None if args.no_timing else time.perf_counter() - started)
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_validate(args, started):
    net = _net(args)
    report = validate_network(net)
    _emit(args, {"command": "validate", "valid": report.ok,
                 "violations": list(report.violations),
                 "variables": len(net.variables)}, started)
    return 0 if report.ok else 1


def _infer(args, started, with_sign: bool):
    net = _net(args)
    q = _query(net, args)
    if args.marginal:
        prog = pose_marginal_query(net, q)
        kind = "marginal"
    else:
        if not q.evidence:
            raise UsageError("an influence query needs --evidence (or use --marginal)")
        prog = pose_influence_query(net, q)
        kind = "influence"
    options = _solver_options(args)
    lo = solve(prog.with_sense("min"), options)
    hi = solve(prog.with_sense("max"), options)
    if lo.status == "infeasible" or hi.status == "infeasible":
        raise NetworkError("the network's constraints admit no parameterization")
    report = {"command": "sign" if with_sign else "infer", "kind": kind,
              **_query_text(net, q),
              "interval": [lo.bound, hi.bound]}
    if with_sign:
        report["sign"] = classify_sign(lo.bound, hi.bound).value
    report.update({
        "incumbents": [lo.incumbent, hi.incumbent],
        "gap": max(lo.gap, hi.gap),
        "status": [lo.status, hi.status],
        "nodes": lo.nodes + hi.nodes,
    })
    _emit(args, report, started)
    return 0


def cmd_infer(args, started):
    return _infer(args, started, with_sign=False)


def cmd_sign(args, started):
    return _infer(args, started, with_sign=True)


def _write_net(args, net: Network) -> str | None:
    if not args.out:
        return None
    Path(args.out).write_text(dump_network(net))
    return args.out


def cmd_learn_ml(args, started):
    net = _net(args)
    counts = _counts(net, args)
    fit = fit_ml(net, counts)
    estimates = {}
    for spec in net.nodes:
        values = net.var(spec.name).values
        est = fit.estimates[spec.name]
        estimates[spec.name] = {f"{values[j]}|{k}": float(est[j, k])
                                for k in range(est.shape[1]) for j in range(est.shape[0])}
    report = {"command": "learn-ml", "records": counts.n, "loglik": fit.loglik,
              "max_violation": fit.violation, "estimates": estimates,
              "free_rows": {n: list(ks) for n, ks in fit.free_rows.items()},
              "warnings": fit.warnings, "network": _write_net(args, fit.network)}
    _emit(args, report, started)
    return 0


def cmd_learn_idm(args, started):
    net = _net(args)
    counts = _counts(net, args)
    credal = fit_idm(net, counts, IdmConfig(args.s_p))
    points = {}
    for (name, k), row in sorted(credal.point_estimates.items(),
                                 key=lambda kv: (net.index(kv[0][0]), kv[0][1])):
        values = net.var(name).values
        for j, p in enumerate(row):
            points[f"{name}:{values[j]}|{k}" if net.node(name).parents else
                   f"{name}:{values[j]}"] = p
    report = {"command": "learn-idm", "records": counts.n, "s_p": args.s_p,
              "point_estimates": points,
              "expressions": credal.describe(),
              "t_constraints": [str(c) for c in credal.t_constraints()],
              "network": _write_net(args, credal.network)}
    _emit(args, report, started)
    return 0


def cmd_oracle(args, started):
    if args.formula:
        phi = parse_formula(args.formula)
        if args.k is None:
            raise UsageError("--k is required with --formula")
        answer = emajsat_brute(phi, args.k)
        _emit(args, {"command": "oracle", "kind": "emajsat", "formula": str(phi), "k": args.k,
                     "emajsat": answer}, started)
        return 0
    net = _net(args)
    grid = GridSpec(step=args.grid)
    if args.data or args.counts:
        res = grid_ml(net, _counts(net, args), GridSpec(step=args.grid or 0.005))
        estimates = {n: est.tolist() for n, est in res.estimates.items()}
        _emit(args, {"command": "oracle", "kind": "ml", "loglik": res.loglik,
                     "step": res.step, "estimates": estimates}, started)
        return 0
    q = _query(net, args)
    kind = "marginal" if args.marginal else "influence"
    if kind == "influence" and not q.evidence:
        raise UsageError("an influence query needs --evidence (or use --marginal)")
    res = grid_bounds(net, q, grid, kind=kind)
    report = {"command": "oracle", "kind": kind, **_query_text(net, q),
              "interval": [res.lo, res.hi], "step": res.step,
              "points": res.n_points, "feasible": res.n_feasible}
    if kind == "influence":
        report["sign"] = classify_sign(res.lo, res.hi).value
    _emit(args, report, started)
    return 0


def cmd_gadget(args, started):
    if not args.formula or args.k is None:
        raise UsageError("--formula and --k are required")
    phi = parse_formula(args.formula)
    net, q = build_emajsat_gadget(phi, args.k)
    report = {"command": "gadget", "formula": str(phi), "k": args.k,
              "nodes_in_network": len(net.variables), **_query_text(net, q)}
    if args.out:
        Path(args.out).write_text(dump_network(net))
        report["network"] = args.out
    if args.solve:
        options = _solver_options(args)
        options.decide = -1e-6
        res = solve(pose_influence_query(net, q), options)
        yes = res.incumbent is not None and res.incumbent < -1e-6
        # verdict line first, then the JSON report
        print(f"EMAJSAT: {'yes' if yes else 'no'}", flush=True)
        report.update({"emajsat": "yes" if yes else "no", "min": res.incumbent,
                       "min_bound": res.bound, "status": res.status, "nodes": res.nodes})
    else:
        report["network_document"] = network_to_dict(net)
    _emit(args, report, started)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqpn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solver=False, query=False, data=False):
        p.add_argument("--net", help="network document (JSON)")
        p.add_argument("--no-timing", action="store_true",
                       help="omit wall_time so reports are byte-identical across runs")
        p.add_argument("--seed", type=int, default=0)
        if query:
            p.add_argument("--query", help="target assignment VAR=value")
            p.add_argument("--evidence", action="append",
                           help="observed VAR=value[,VAR=value...]; may repeat")
            p.add_argument("--marginal", action="store_true",
                           help="bound P(q|e) (or P(q)) instead of P(q|e) - P(q)")
        if solver:
            p.add_argument("--gap", type=float, default=1e-4)
            p.add_argument("--max-nodes", type=int, default=100_000)
            p.add_argument("--time-limit", type=float, default=None,
                           help="seconds per bound; results then depend on machine speed")
            p.add_argument("--threads", type=int, default=1)
            p.add_argument("--progress", type=int, nargs="?", const=100, default=0,
                           metavar="EVERY",
                           help="print solver progress to stderr every EVERY nodes")
        if data:
            p.add_argument("--data", help="CSV dataset")
            p.add_argument("--counts", help="counts document (JSON)")
        p.add_argument("--out", help="output file")
        return p

    common(sub.add_parser("validate", help="check a network document"))
    common(sub.add_parser("infer", help="bound an influence or a probability"),
           solver=True, query=True)
    common(sub.add_parser("sign", help="bound an influence and classify its sign"),
           solver=True, query=True)
    common(sub.add_parser("learn-ml", help="constrained maximum likelihood"), data=True)
    p = common(sub.add_parser("learn-idm", help="constrained imprecise Dirichlet model"),
               data=True)
    p.add_argument("--s-p", type=float, default=2.0, help="prior dispersion (default 2)")
    p = common(sub.add_parser("oracle", help="brute-force counterpart of infer/learn/gadget"),
               query=True, data=True)
    p.add_argument("--grid", type=float, default=None, help="grid step (default: automatic)")
    p.add_argument("--formula", help="EMAJSAT formula, e.g. '(X1|X2)&X3'")
    p.add_argument("--k", type=int)
    p = common(sub.add_parser("gadget", help="build (and solve) an EMAJSAT gadget network"),
               solver=True)
    p.add_argument("--formula", help="formula over X1, X2, ...")
    p.add_argument("--k", type=int, help="number of leading variables to maximize over")
    p.add_argument("--solve", action="store_true")
    return parser


COMMANDS = {
    "validate": cmd_validate, "infer": cmd_infer, "sign": cmd_sign,
    "learn-ml": cmd_learn_ml, "learn-idm": cmd_learn_idm,
    "oracle": cmd_oracle, "gadget": cmd_gadget,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        return COMMANDS[args.command](args, started)
    except UsageError as e:
        parser.error(str(e))
    except (NetworkError, ValueError) as e:
        print(f"sqpn {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
