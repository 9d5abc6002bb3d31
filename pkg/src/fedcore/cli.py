"""Command-line driver: load a graph, run the federation, print results."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence

from .bfs import TimingError
from .count import IncompleteCount
from .engine import RunOptions, Session, UsageError
from .graph import GraphError, load_graph, oracle_core_decomposition
from .simnet import SimConfig, SimTimeout

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT, EXIT_TIMEOUT = 0, 1, 2, 3


class InputError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--graph", required=True, help="edge list file, one 'u v' per line")
    common.add_argument("--labels", help="label file, one 'u LABEL' per line")
    common.add_argument("--config", help="simulator JSON config")
    common.add_argument("--seed", type=int, help="overrides the config and FEDCORE_SEED")
    common.add_argument("--root", default=None, help="tree root vertex id (default: first vertex)")
    common.add_argument("--ledger", help="write the observation ledger as JSON lines")
    common.add_argument("--test-mode", action="store_true", help="include per-vertex core numbers")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--augment", action="store_true", help="join components with virtual edges")
    common.add_argument("--limit-ms", type=float, default=1e9, help="simulated time limit")

    p = argparse.ArgumentParser(prog="fedcore", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("decompose", parents=[common], help="run the decomposition to detected termination")
    c = sub.add_parser("count", parents=[common], help="count vertices with a given label and core")
    c.add_argument("--label", required=True)
    c.add_argument("--core", type=int, required=True)
    d = sub.add_parser("distribution", parents=[common], help="histogram over every (label, core)")
    d.add_argument("--kmax", type=int, help="largest core value to query (default: max degree)")
    v = sub.add_parser("verify", parents=[common], help="compare the protocol against the oracle")
    v.add_argument("--corrupt-vertex", help=argparse.SUPPRESS)
    sub.add_parser("stats", parents=[common], help="message and timing statistics")
    return p


def _read(path: Optional[str]) -> Optional[str]:
    if path is None:
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(str(exc)) from exc


def _session(args) -> Session:
    graph = load_graph(_read(args.graph), _read(args.labels), augment=args.augment,
                       hub=args.root if args.augment else None)
    try:
        sim = SimConfig.load(args.config, graph) if args.config else SimConfig.from_dict({})
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"bad config: {exc}") from exc
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    try:
        root = graph.vertex(args.root) if args.root is not None else 0
    except KeyError:
        raise InputError(f"unknown root vertex {args.root!r}") from None
    options = RunOptions(root=root, limit_ms=args.limit_ms)
    return Session(graph, sim, options, test_mode=args.test_mode)


def _emit(args, payload: Any, rows: Optional[List[Dict[str, Any]]] = None, columns: Sequence[str] = ()) -> None:
    if args.format == "csv" and rows is not None:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        sys.stdout.write(buf.getvalue())
    else:
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _finish(args, session: Session) -> None:
    if args.ledger:
        session.fed.ledger.dump_jsonl(args.ledger)


def cmd_decompose(args) -> int:
    s = _session(args)
    report = s.decompose()
    out = report.to_json(s.graph)
    rows = None
    if args.format == "csv" and report.cores is not None:
        rows = [{"vertex": v, "core": c} for v, c in out["cores"].items()]
    _emit(args, out, rows, ("vertex", "core"))
    _finish(args, s)
    return EXIT_OK


def cmd_count(args) -> int:
    s = _session(args)
    s.decompose()
    n = s.count(args.label, args.core)
    row = {"label": args.label, "core": args.core, "count": n}
    _emit(args, row, [row], ("label", "core", "count"))
    _finish(args, s)
    return EXIT_OK


def cmd_distribution(args) -> int:
    s = _session(args)
    s.decompose()
    kmax = args.kmax if args.kmax is not None else max(s.graph.degree(u) for u in range(s.graph.n))
    hist = s.distribution(kmax)
    rows = [{"label": lb, "core": k, "count": c} for (lb, k), c in sorted(hist.items())]
    _emit(args, {"distribution": rows, "total": sum(hist.values())}, rows, ("label", "core", "count"))
    _finish(args, s)
    return EXIT_OK


def cmd_verify(args) -> int:
    s = _session(args)
    s.decompose()
    got = dict(s.fed.result.estimates)
    if args.corrupt_vertex is not None:
        u = s.graph.vertex(args.corrupt_vertex)
        got[u] += 1
    want = oracle_core_decomposition(s.graph)
    diff = [u for u in range(s.graph.n) if got[u] != want[u]]
    out: Dict[str, Any] = {"match": not diff, "n": s.graph.n}
    if diff:
        u = diff[0]
        out["first_mismatch"] = {"vertex": s.graph.names[u], "protocol": got[u], "oracle": want[u]}
    _emit(args, out)
    _finish(args, s)
    return EXIT_MISMATCH if diff else EXIT_OK


def cmd_stats(args) -> int:
    s = _session(args)
    report = s.decompose()
    out = {
        "n": s.graph.n,
        "m": s.graph.m,
        "metrics": report.metrics,
        "rounds": report.rounds,
        "timing": report.timing.as_dict(),
        "tree_messages": report.tree_messages,
        "terminated_at": round(report.terminated_at, 6),
    }
    rows = [{"protocol": k, "messages": v} for k, v in report.metrics["per_protocol"].items()]
    _emit(args, out, rows, ("protocol", "messages"))
    _finish(args, s)
    return EXIT_OK


COMMANDS = {
    "decompose": cmd_decompose,
    "count": cmd_count,
    "distribution": cmd_distribution,
    "verify": cmd_verify,
    "stats": cmd_stats,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, GraphError, TimingError, ValueError) as exc:
        print(f"fedcore: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UsageError as exc:
        print(f"fedcore: usage error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SimTimeout, IncompleteCount) as exc:
        print(f"fedcore: timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT


if __name__ == "__main__":
    sys.exit(main())
