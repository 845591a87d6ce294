"""dflmesh command line: topology analysis, simulation, overlay, bound evaluation.

Subcommands
    topology analyze   spectral summary of one topology as JSON
    topology generate  emit a topology as an edge list or JSON
    simulate           run one configured experiment (metrics CSV + reports)
    compare            same experiment across several topologies
    failures           same experiment across several failure fractions
    overlay            drive the virtual-ring protocol, optionally from a churn script
    bounds             evaluate the convergence/stability bounds from a JSON file

Exit codes: 0 success, 2 configuration/input error, 3 numeric or protocol failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .bounds import (
    BoundParams,
    c_lambda,
    convergence_bound,
    convergence_constants,
    stability_bound,
    stepsize_sum_worst_ratio,
)
from .errors import (
    BoundGuardError,
    ConfigError,
    DflmeshError,
    DisconnectedGraphError,
    MixingPropertyError,
    NonFiniteParameterError,
    NotConvergedError,
)
from .experiments import (
    MIXING_KINDS,
    TOPOLOGY_KINDS,
    build_mixing,
    build_topology,
    compare_topologies,
    failure_sweep,
    json_safe,
    run_from_config,
)
from .overlay import OverlayNetwork
from .spectral import eigen_extremes

_NUMERIC_ERRORS = (
    DisconnectedGraphError,
    NotConvergedError,
    MixingPropertyError,
    NonFiniteParameterError,
    BoundGuardError,
)


# -- shared helpers ---------------------------------------------------------------


def _print_json(obj) -> None:
    print(json.dumps(json_safe(obj), indent=2, sort_keys=True))


def _theta_arg(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"theta must be a number or 'auto', got {text!r}"
        ) from None


def _topology_spec(args) -> dict:
    t = {"kind": args.kind, "n": args.n, "seed": args.seed}
    if args.kind == "expander":
        if args.d is None:
            raise ConfigError("expander topology needs --d")
        t["d"] = args.d
    elif args.d is not None:
        raise ConfigError(f"--d is not valid for kind {args.kind!r}")
    if args.kind == "erdos_renyi":
        if args.p is None:
            raise ConfigError("erdos_renyi topology needs --p")
        t["p"] = args.p
    elif args.p is not None:
        raise ConfigError(f"--p is not valid for kind {args.kind!r}")
    return t


def _mixing_spec(args) -> dict:
    m = {"kind": args.mixing}
    if args.mixing == "laplacian":
        m["theta"] = args.theta
    elif args.theta != "auto":
        raise ConfigError(f"--theta is not valid for mixing kind {args.mixing!r}")
    return m


def _resolve_config(path_text: str):
    """A real path wins; otherwise fall back to the bundled recipe directory."""
    p = Path(path_text)
    if p.exists():
        return str(p)
    recipe = resources.files("dflmesh").joinpath("recipes").joinpath(path_text)
    if recipe.is_file():
        try:
            return json.loads(recipe.read_text())
        except json.JSONDecodeError as err:
            raise ConfigError(f"bundled recipe {path_text} is not valid JSON: {err}")
    raise ConfigError(f"config file not found: {path_text}")


def _add_topology_flags(sub) -> None:
    sub.add_argument("--kind", required=True, choices=TOPOLOGY_KINDS)
    sub.add_argument("--n", required=True, type=int, help="number of nodes")
    sub.add_argument("--d", type=int, default=None, help="degree (expander only)")
    sub.add_argument("--p", type=float, default=None, help="edge probability (erdos_renyi only)")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--mixing", choices=MIXING_KINDS, default="laplacian")
    sub.add_argument(
        "--theta", type=_theta_arg, default="auto",
        help="Laplacian-family parameter in [0,1), or 'auto' for the optimal value",
    )


# -- subcommand implementations ------------------------------------------------------


def _cmd_topology_analyze(args) -> int:
    t = _topology_spec(args)
    g = build_topology(t)
    mix = build_mixing(g, _mixing_spec(args))
    lo, hi = eigen_extremes(g)
    _print_json(
        {
            "lambda2": lo,
            "lambdaN": hi,
            "kappa": hi / lo,
            "lambda_mix": mix.rate,
        }
    )
    return 0


def _cmd_topology_generate(args) -> int:
    g = build_topology(_topology_spec(args))
    if args.format == "json":
        text = json.dumps(g.to_json_dict(), indent=2) + "\n"
    else:
        text = g.to_edge_list()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate(args) -> int:
    res = run_from_config(
        _resolve_config(args.config), out_dir=args.out, plot=not args.no_plot
    )
    summary = {"paths": res["paths"]}
    if res["result"].metrics:
        last = res["result"].metrics[-1]
        summary["final"] = {
            "round": last.round,
            "train_loss": last.train_loss,
            "test_loss": last.test_loss,
            "test_acc": last.test_acc,
            "consensus_dist": last.consensus_dist,
            "cum_comm_cost": last.cum_comm_cost,
        }
    _print_json(summary)
    return 0


def _cmd_compare(args) -> int:
    res = compare_topologies(
        _resolve_config(args.config),
        labels=args.topologies,
        out_dir=args.out,
        plot=not args.no_plot,
    )
    _print_json({"rows": res["rows"], "paths": res["paths"]})
    return 0


def _cmd_failures(args) -> int:
    res = failure_sweep(
        _resolve_config(args.config),
        args.fractions,
        out_dir=args.out,
        plot=not args.no_plot,
    )
    _print_json({"rows": res["rows"], "paths": res["paths"]})
    return 0


def _apply_churn_script(net: OverlayNetwork, path: str) -> None:
    """Line format: 'join <id> [coords...]' | 'fail <id> [<id>...]' | 'check' | 'lookup [samples]'."""
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read churn script: {err}") from err
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        op = parts[0]
        try:
            if op == "join":
                if len(parts) < 2:
                    raise ValueError("join needs a node id")
                coords = [float(c) for c in parts[2:]] or None
                net.join(int(parts[1]), coords=coords)
            elif op == "fail":
                ids = [int(p) for p in parts[1:]]
                if not ids:
                    raise ValueError("fail needs at least one node id")
                if len(ids) == 1:
                    net.fail_node(ids[0])
                else:
                    net.fail_simultaneous(ids)
            elif op == "check":
                net.check()
            elif op == "lookup":
                samples = int(parts[1]) if len(parts) > 1 else 200
                stats = net.lookup_cost(samples=samples, seed=net.seed)
                net.event_log.append(
                    {
                        "event": "lookup",
                        "samples": samples,
                        "mean_hops": stats.mean,
                        "max_hops": stats.max,
                    }
                )
            else:
                raise ValueError(f"unknown op {op!r}")
        except ValueError as err:
            raise ConfigError(f"churn script line {lineno}: {err}") from err


def _cmd_overlay(args) -> int:
    if args.nodes < 1:
        raise ConfigError(f"--nodes must be >= 1, got {args.nodes}")
    net = OverlayNetwork(rings=args.rings, seed=args.seed)
    for node_id in range(args.nodes):
        net.join(node_id)
    if args.churn_script:
        _apply_churn_script(net, args.churn_script)
    final_check = net.check()
    summary: dict = {"final_check": final_check}
    if net.n_nodes >= 2 and args.lookup_samples > 0:
        stats = net.lookup_cost(samples=args.lookup_samples, seed=args.seed)
        summary["lookup"] = {"mean_hops": stats.mean, "max_hops": stats.max}
    paths = {}
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "overlay_log.json"
    with open(log_path, "w") as fh:
        json.dump(json_safe(net.event_log), fh, indent=2)
        fh.write("\n")
    paths["log"] = str(log_path)
    if net.nodes:
        topo_path = out / "overlay_topology.txt"
        topo_path.write_text(net.equivalent_graph().to_edge_list())
        paths["topology"] = str(topo_path)
    summary["paths"] = paths
    _print_json(summary)
    return 0


def _cmd_bounds(args) -> int:
    try:
        with open(args.config) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"params file not found: {args.config}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"params file is not valid JSON: {err}") from None
    if not isinstance(payload, dict):
        raise ConfigError("params file must hold a JSON object")
    check_guards = payload.pop("check_guards", True)
    if not isinstance(check_guards, bool):
        raise ConfigError("check_guards: expected true or false")
    try:
        params = BoundParams(**payload)
    except TypeError as err:
        raise ConfigError(f"bad BoundParams field: {err}") from None
    except ValueError as err:
        raise ConfigError(str(err)) from None
    report: dict = {"c_lambda": c_lambda(params.mixing_rate)}
    if params.stepsize is not None:
        gamma, alpha, xi = convergence_constants(params, check_guards=check_guards)
        report["gamma"] = gamma
        report["alpha"] = alpha
        report["xi"] = xi
        report["convergence_bound"] = convergence_bound(
            params, check_guards=check_guards
        )
    if params.stepsize_scale is not None:
        report["stability_bound"] = stability_bound(params)
        report["stepsize_sum_worst_ratio"] = stepsize_sum_worst_ratio(
            params.stepsize_scale, params.mixing_rate, t_max=max(params.rounds, 2)
        )
    if params.stepsize is None and params.stepsize_scale is None:
        raise ConfigError("set stepsize (constant) and/or stepsize_scale (c/t) to evaluate a bound")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w") as fh:
            json.dump(json_safe(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
    _print_json(report)
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dflmesh",
        description="Decentralized federated learning laboratory",
    )
    subs = parser.add_subparsers(dest="command")

    topo = subs.add_parser("topology", help="analyze or generate communication graphs")
    topo_subs = topo.add_subparsers(dest="topology_command")
    analyze = topo_subs.add_parser("analyze", help="print a spectral summary as JSON")
    _add_topology_flags(analyze)
    analyze.set_defaults(func=_cmd_topology_analyze)
    generate = topo_subs.add_parser("generate", help="emit a topology")
    _add_topology_flags(generate)
    generate.add_argument("--format", choices=("edges", "json"), default="edges")
    generate.add_argument("--out", default=None, help="output file (default: stdout)")
    generate.set_defaults(func=_cmd_topology_generate)

    simulate = subs.add_parser("simulate", help="run one configured experiment")
    simulate.add_argument("--config", required=True, help="experiment JSON (or bundled recipe name)")
    simulate.add_argument("--out", default=None, help="output directory")
    simulate.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    simulate.set_defaults(func=_cmd_simulate)

    compare = subs.add_parser("compare", help="rerun one experiment across topologies")
    compare.add_argument("--config", required=True)
    compare.add_argument(
        "--topologies", nargs="+", default=None,
        help="labels like: ring complete expander:4 erdos_renyi:0.1 "
             "(default: the config's 'compare' list)",
    )
    compare.add_argument("--out", default=None)
    compare.add_argument("--no-plot", action="store_true")
    compare.set_defaults(func=_cmd_compare)

    failures = subs.add_parser("failures", help="rerun one experiment across failure fractions")
    failures.add_argument("--config", required=True)
    failures.add_argument("--fractions", nargs="+", type=float, required=True)
    failures.add_argument("--out", default=None)
    failures.add_argument("--no-plot", action="store_true")
    failures.set_defaults(func=_cmd_failures)

    overlay = subs.add_parser("overlay", help="drive the virtual-ring overlay protocol")
    overlay.add_argument("--nodes", required=True, type=int, help="initial members (ids 0..N-1)")
    overlay.add_argument("--rings", required=True, type=int)
    overlay.add_argument("--seed", type=int, default=0)
    overlay.add_argument("--churn-script", default=None,
                         help="file of lines: join <id> | fail <id> [<id>...] | check | lookup [n]")
    overlay.add_argument("--lookup-samples", type=int, default=200)
    overlay.add_argument("--out", default=None)
    overlay.set_defaults(func=_cmd_overlay)

    bounds = subs.add_parser("bounds", help="evaluate theory bounds from a JSON file")
    bounds.add_argument("--config", required=True, help="BoundParams JSON file")
    bounds.add_argument("--out", default=None, help="also write the report here")
    bounds.set_defaults(func=_cmd_bounds)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func = getattr(args, "func", None)
    if func is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        return func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except DflmeshError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except RuntimeError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
