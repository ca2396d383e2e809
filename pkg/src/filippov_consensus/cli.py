"""Command-line driver: ``run``, ``list-examples`` and ``validate``."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .analysis import BindingMismatch, conformance_report, convergence_set, lyapunov_trace, monitor as set_monitor, predict
from .graph import GraphError, classify, left_null_vector
from .integrator import IntegrationError, simulate
from .dynamics import DynamicsError, MEASUREMENT
from .scenario import Scenario, ScenarioError, catalog, load

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INTEGRATION = 3


def run_scenario(sc: Scenario, out_dir: Path) -> dict:
    p = sc.protocol
    mon = mon_id = None
    target = sc.monitor
    if target == "auto":
        target = predict(p).predicted_set
    if target and target != "none":
        s = convergence_set(p, target)
        mon, mon_id = set_monitor(s), s.id
    traj = simulate(p, sc.x0, sc.config, monitor=mon, monitor_id=mon_id)
    report = conformance_report(p, traj, extra_sets=sc.sets)
    traces = {}
    for kind in sc.lyapunov:
        if kind == "WeightedV1":
            if p.family != MEASUREMENT or not classify(p.graph).strongly_connected:
                traces[kind] = None
                continue
            tr = lyapunov_trace(traj, kind, weights=left_null_vector(p.graph), functions=p.node_functions)
        else:
            tr = lyapunov_trace(traj, kind)
        traces[kind] = {"max_increase": tr.max_increase, "positive_variation": tr.positive_variation}
    report["lyapunov_traces"] = traces
    report["scenario"] = sc.name
    report["warnings"] = list(p.warnings)
    report["x_final"] = [float(v) for v in traj.final()]
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trajectory.csv").write_text(traj.to_csv())
    (out_dir / "events.json").write_text(traj.events_json() + "\n")
    (out_dir / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True, default=str) + "\n")
    return report


def _run_one(job) -> tuple[int, str]:
    path, overrides, seed, out = job
    try:
        sc = load(path, overrides, seed)
    except (ScenarioError, GraphError, DynamicsError, BindingMismatch) as exc:
        return EXIT_VALIDATION, f"{path}: invalid scenario: {exc}"
    out_dir = Path(out) if out else Path(sc.output_dir or Path("out") / sc.name)
    try:
        report = run_scenario(sc, out_dir)
    except BindingMismatch as exc:
        return EXIT_VALIDATION, f"{path}: {exc}"
    except IntegrationError as exc:
        window = getattr(exc, "window", None)
        detail = f" (stratum {window})" if window else ""
        return EXIT_INTEGRATION, f"{path}: integration failed: {exc}{detail}"
    lines = [f"{sc.name}: {report['termination']}; wrote {out_dir}"]
    lines += [f"{sc.name}: warning: {w}" for w in report["warnings"]]
    return EXIT_OK, "\n".join(lines)


def cmd_run(args) -> int:
    many = len(args.files) > 1
    jobs = []
    for f in args.files:
        out = None
        if args.out:
            out = str(Path(args.out) / Path(f).stem) if many else args.out
        jobs.append((f, list(args.set or []), args.seed, out))
    if args.jobs > 1 and many:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    code = EXIT_OK
    for status, msg in results:
        print(msg, file=sys.stderr if status else sys.stdout)
        code = max(code, status)
    return code


def cmd_list(args) -> int:
    for item in catalog():
        print(f"{item['name']:<24} {item['description']}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        sc = load(args.file)
    except (ScenarioError, GraphError, DynamicsError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    pred = predict(sc.protocol)
    print(f"{sc.name}: ok ({sc.protocol.family}, n={sc.protocol.n}, predicted set {pred.predicted_set})")
    for w in sc.protocol.warnings:
        print(f"warning: {w}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="filippov-consensus", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate one or more scenarios")
    r.add_argument("files", nargs="+", help="scenario JSON file or bundled example name")
    r.add_argument("--seed", type=int, default=None, help="seed for a generated x0")
    r.add_argument("--out", default=None, help="output directory")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a scenario field (dotted path)")
    r.add_argument("--jobs", type=int, default=1, help="parallel workers for several scenarios")
    r.set_defaults(func=cmd_run)
    ls = sub.add_parser("list-examples", help="list bundled scenarios")
    ls.set_defaults(func=cmd_list)
    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
