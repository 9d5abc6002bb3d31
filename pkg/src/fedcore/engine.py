"""Wires the per-vertex agents together and drives the phases of a run."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

from . import bfs, core_protocol, count
from .bfs import Activity, TimingParams, TreeAgent
from .core_protocol import DecompositionAgent, RoundTracker, Status
from .count import CountAgent, IncompleteCount
from .crypto import SealedProvider
from .graph import CoreMap, Graph, oracle_core_decomposition
from .ledger import Ledger, Policy, PrivacyReport
from .simnet import Network, Port, SimConfig, SimTimeout

_TREE_MSGS = (bfs.TreeBuild, bfs.TreeAck, bfs.Start, bfs.Heartbeat)
_COUNT_MSGS = (count.CountRequest, count.CountReply)


class UsageError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunOptions:
    root: int = 0
    heartbeats: bool = True
    enforce_budget: bool = True
    record_trace: bool = False
    limit_ms: float = 1e9
    tree_version: int = 1


class Node:
    """Everything running at one vertex, behind one message handler."""

    def __init__(self, fed: "Federation", u: int):
        self.u = u
        self.port = Port(fed.net, u)
        self.label = fed.graph.labels[u]
        self.status_log: List[Tuple[float, Status]] = []
        self.tree = TreeAgent(self.port, fed.ledger, on_start=self._start_decomposition,
                              heartbeats=fed.options.heartbeats)
        self.decomp = DecompositionAgent(self.port, fed.provider, fed.ledger, run_seed=fed.sim.seed,
                                         tracker=fed.tracker, on_status=self._status,
                                         enforce_budget=fed.options.enforce_budget)
        self.count = CountAgent(self.port, fed.provider,
                                tree=lambda: (self.tree.tree.parent, self.tree.tree.children),
                                local=lambda: (self.label, self.decomp.est))
        # the network only delivers along edges, so the sender is a neighbour
        self._routes = {
            core_protocol.Probe: self.decomp.on_probe,
            core_protocol.Verdict: self.decomp.on_verdict,
            core_protocol.Notify: self.decomp.on_notify,
        }
        for kind in _TREE_MSGS:
            self._routes[kind] = self.tree.handle
        for kind in _COUNT_MSGS:
            self._routes[kind] = self.count.handle

    def _start_decomposition(self) -> None:
        self.decomp.start()

    def _status(self, status: Status) -> None:
        self.status_log.append((self.port.now, status))
        self.tree.status_changed(status)

    def on_message(self, src: int, msg: Any) -> None:
        route = self._routes.get(type(msg))
        if route is None:
            raise core_protocol.ProtocolError(f"unknown message {msg!r}")
        route(src, msg)

    def on_timer(self, tag: Any) -> None:
        if isinstance(tag, tuple) and tag[0] == "count-timeout":
            self.count.on_timer(tag)
        else:
            self.tree.on_timer(tag)


@dataclass
class DecompositionResult:
    estimates: CoreMap
    terminated_at: float
    all_inactive_at: Optional[float]
    quiescent: bool
    rounds: int
    metrics: Dict[str, Any]

    @property
    def decomposition_messages(self) -> int:
        pp = self.metrics["per_protocol"]
        return pp.get(core_protocol.PROTOCOL_DECOMPOSE, 0) + pp.get(core_protocol.PROTOCOL_COMPARE, 0)


class Federation:
    """A simulated federation: one network, one crypto provider, one ledger."""

    def __init__(self, graph: Graph, sim: SimConfig = SimConfig(), options: RunOptions = RunOptions()):
        if not graph.is_connected():
            raise ValueError("the federation needs a connected graph")
        self.graph = graph
        self.sim = sim
        self.options = options
        self.net = Network(graph, sim, record_trace=options.record_trace)
        self.ledger = Ledger()
        self.provider = SealedProvider(self.ledger, clock=lambda: self.net.now)
        self.tracker = RoundTracker([graph.degree(u) for u in range(graph.n)])
        self.nodes = [Node(self, u) for u in range(graph.n)]
        for node in self.nodes:
            self.net.attach(node.u, node)
        self.timing: Optional[TimingParams] = None
        self.result: Optional[DecompositionResult] = None
        self.tree_messages = 0
        self._query_ver = 0
        self.query_roots: set = set()

    @property
    def root(self) -> Node:
        return self.nodes[self.options.root]

    # phases

    def build_tree(self) -> float:
        """Build the tree with every hop at its worst-case latency and return T_bar."""
        before = self.net.metrics.total_messages
        with self.net.fixed_latency():
            self.root.tree.build(self.options.tree_version)
            self.net.run_until_quiescent()
        self.tree_messages = self.net.metrics.total_messages - before
        t_bar = self.root.tree.t_bar
        if t_bar is None:
            raise SimTimeout("tree construction did not complete")
        self.timing = bfs.derive_timing(t_bar)
        return t_bar

    def decompose(self) -> DecompositionResult:
        if self.result is not None:
            raise UsageError("decomposition already ran in this federation")
        if self.timing is None:
            self.build_tree()
        if self.options.heartbeats:
            bfs.check_latency_bound(self.timing, self.net.latency.global_max)
        start = self.net.now
        self.root.tree.broadcast_start(self.timing)
        run = self.net.run_until_quiescent(start + self.options.limit_ms)
        estimates = {n.u: n.decomp.est for n in self.nodes}
        finals = [n.tree.activity_log[-1][0] for n in self.nodes
                  if n.tree.activity_log and n.tree.activity_log[-1][1] == Activity.INACTIVE]
        all_inactive = max(finals) if len(finals) == self.graph.n else None
        if self.options.heartbeats:
            terminated = min(finals) if finals else run.now
        else:
            terminated = run.now
        self.result = DecompositionResult(estimates, terminated, all_inactive, run.quiescent,
                                          self.tracker.rounds, run.metrics)
        if run.timed_out:
            raise SimTimeout(f"decomposition still running at {run.now} ms")
        return self.result

    def _require_result(self) -> None:
        if self.result is None:
            raise UsageError("run the decomposition before counting")

    def count(self, label: str, k: int) -> int:
        self._require_result()
        self._query_ver += 1
        ver = self._query_ver
        root = self.root
        keys = self.provider.keygen(core_protocol.key_seed(self.sim.seed, root.u, -ver), owner=root.u)
        self.query_roots.add(root.u)
        root.count.start(keys, label, k, ver, self.timing.timeout)
        self.net.run_until_quiescent()
        if ver in root.count.failed:
            raise IncompleteCount(root.count.failed[ver])
        result = root.count.queries[ver].result
        if result is None:
            raise IncompleteCount(f"query {ver} never completed")
        return result

    def distribution(self, labels: Iterable[str], kmax: int) -> Dict[Tuple[str, int], int]:
        return {(lb, k): self.count(lb, k) for lb in sorted(set(labels)) for k in range(kmax + 1)}

    # audits

    def live_intervals(self) -> Dict[int, List[Tuple[float, float]]]:
        return {n.u: bfs.live_intervals(n.status_log) for n in self.nodes}

    def inactive_intervals(self) -> Dict[int, List[Tuple[float, float]]]:
        return {n.u: bfs.inactive_intervals(n.tree.activity_log) for n in self.nodes}

    def last_dead(self) -> float:
        return max(n.status_log[-1][0] for n in self.nodes if n.status_log)

    def termination_check(self) -> Dict[str, Any]:
        t = self.timing
        violations = bfs.safety_violations(self.live_intervals(), self.inactive_intervals(), t.timeout)
        deadline = self.last_dead() + t.timeout + t.t_bar
        all_inactive = self.result.all_inactive_at if self.result else None
        return {
            "safe": not violations,
            "violations": violations,
            "live": all_inactive is not None and all_inactive <= deadline + 1e-9,
            "all_inactive_at": all_inactive,
            "deadline": deadline,
        }

    def privacy(self, budget: int = 1) -> PrivacyReport:
        return self.ledger.assert_privacy(self.graph, Policy(compare_budget=budget,
                                                             query_roots=frozenset(self.query_roots)))

    def tree_edges(self) -> List[Tuple[int, int]]:
        return sorted((min(n.u, n.tree.tree.parent), max(n.u, n.tree.tree.parent))
                      for n in self.nodes if n.tree.tree.parent is not None)


@dataclass
class RunReport:
    terminated_at: float
    metrics: Dict[str, Any]
    timing: TimingParams
    oracle_match: bool
    rounds: int
    cores: Optional[CoreMap] = None
    tree_messages: int = 0

    def to_json(self, graph: Graph) -> Dict[str, Any]:
        out = {
            "terminated_at": round(self.terminated_at, 6),
            "metrics": self.metrics,
            "timing": self.timing.as_dict(),
            "oracle_match": self.oracle_match,
            "rounds": self.rounds,
            "tree_messages": self.tree_messages,
        }
        if self.cores is not None:
            out["cores"] = {graph.names[u]: c for u, c in sorted(self.cores.items())}
        return out


class Session:
    """Decompose once, then answer counting queries against the same federation."""

    def __init__(self, graph: Graph, sim: SimConfig = SimConfig(), options: RunOptions = RunOptions(),
                 test_mode: bool = False):
        self.graph = graph
        self.test_mode = test_mode
        self.fed = Federation(graph, sim, options)
        self.report: Optional[RunReport] = None

    def decompose(self) -> RunReport:
        res = self.fed.decompose()
        match = res.estimates == oracle_core_decomposition(self.graph)
        self.report = RunReport(res.terminated_at, res.metrics, self.fed.timing, match, res.rounds,
                                dict(res.estimates) if self.test_mode else None, self.fed.tree_messages)
        return self.report

    def count(self, label: str, k: int) -> int:
        if self.report is None:
            raise UsageError("run decompose before count")
        return self.fed.count(label, k)

    def distribution(self, kmax: int, labels: Optional[Iterable[str]] = None) -> Dict[Tuple[str, int], int]:
        if self.report is None:
            raise UsageError("run decompose before distribution")
        real = {self.graph.labels[u] for u in range(self.graph.n)}
        return self.fed.distribution(labels if labels is not None else real, kmax)
