"""Deterministic discrete-event simulation of an asynchronous point-to-point network.

Vertices never see each other's state: every interaction goes through
:meth:`Network.send`, which only accepts existing edges, or a local timer.
"""
from __future__ import annotations

import contextlib
import functools
import hashlib
import heapq
import json
import os
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from .graph import Graph

UNIFORM = "uniform"
FIXED = "fixed"

# Envelopes are delivered before timers that fire at the same instant.
_DELIVERY, _TIMER = 0, 1


class IsolationViolation(RuntimeError):
    """A vertex tried to talk to something that is not its neighbour."""


class SimTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    default_latency_ms: float = 20.0
    edge_latency: Tuple[Tuple[int, int, float], ...] = ()
    seed: int = 0
    latency_mode: str = UNIFORM

    def __post_init__(self):
        if self.latency_mode not in (UNIFORM, FIXED):
            raise ValueError(f"unknown latency_mode {self.latency_mode!r}")
        if self.default_latency_ms <= 0:
            raise ValueError("latencies must be positive")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], graph: Optional[Graph] = None) -> "SimConfig":
        """Build from the JSON config shape; edge endpoints may be vertex names
        when ``graph`` is given."""
        edges = []
        for u, v, ms in data.get("edge_latency", []):
            if graph is not None:
                u, v = graph.vertex(str(u)), graph.vertex(str(v))
            edges.append((int(u), int(v), float(ms)))
        seed = int(data.get("seed", 0))
        if os.environ.get("FEDCORE_SEED"):
            seed = int(os.environ["FEDCORE_SEED"])
        return cls(
            default_latency_ms=float(data.get("default_latency_ms", 20.0)),
            edge_latency=tuple(edges),
            seed=seed,
            latency_mode=data.get("latency_mode", UNIFORM),
        )

    @classmethod
    def load(cls, path: str, graph: Optional[Graph] = None) -> "SimConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), graph)

    def with_mode(self, mode: str) -> "SimConfig":
        return SimConfig(self.default_latency_ms, self.edge_latency, self.seed, mode)


class LatencyModel:
    """Per-edge latency bound and a seeded sampler over (0, L_max].

    Draws are consumed in send order, so a run is reproducible from
    (graph, config, seed) because the event order itself is deterministic.
    """

    def __init__(self, graph: Graph, config: SimConfig):
        self.mode = config.latency_mode
        self._uniform = self.mode == UNIFORM
        self.default = config.default_latency_ms
        self._rng = random.Random(config.seed)
        self._bound: Dict[Tuple[int, int], float] = {}
        for u, v, ms in config.edge_latency:
            if v not in graph.adj(u):
                raise ValueError(f"edge_latency names a non-edge ({u}, {v})")
            if ms <= 0:
                raise ValueError("latencies must be positive")
            self._bound[(u, v)] = self._bound[(v, u)] = float(ms)

    def l_max(self, u: int, v: int) -> float:
        return self._bound.get((u, v), self.default) if self._bound else self.default

    @property
    def global_max(self) -> float:
        return max([self.default, *self._bound.values()])

    def sample(self, u: int, v: int, mode: Optional[str] = None) -> float:
        bound = self._bound.get((u, v), self.default) if self._bound else self.default
        if mode is None and self._uniform:
            return bound * (1.0 - self._rng.random())  # (0, bound]
        if (mode or self.mode) == FIXED:
            return bound
        return bound * (1.0 - self._rng.random())


@dataclass(slots=True)
class Envelope:
    src: int
    dst: int
    payload: Any
    send_time: float
    deliver_time: float
    depth: int
    seq: int
    protocol: str


@dataclass
class Metrics:
    total_messages: int = 0
    critical_path_depth: int = 0
    per_protocol: Counter = field(default_factory=Counter)

    def snapshot(self) -> Dict[str, Any]:
        return {
            "W": self.total_messages,
            "D": self.critical_path_depth,
            "per_protocol": dict(sorted(self.per_protocol.items())),
        }


@dataclass
class RunResult:
    metrics: Dict[str, Any]
    now: float
    quiescent: bool

    @property
    def timed_out(self) -> bool:
        return not self.quiescent


class Network:
    """Event loop plus the only channel between vertices.

    Handlers are registered per vertex with :meth:`attach`; a handler object
    must provide ``on_message(src, payload)`` and ``on_timer(tag)``.
    Per-directed-edge channels are FIFO.
    """

    def __init__(self, graph: Graph, config: SimConfig = SimConfig(), record_trace: bool = False):
        self.graph = graph
        self.config = config
        self.latency = LatencyModel(graph, config)
        self.now = 0.0
        self.metrics = Metrics()
        self.trace: Optional[List[tuple]] = [] if record_trace else None
        self._queue: List[tuple] = []
        self._seq = 0
        self._handlers: Dict[int, Any] = {}
        self._channel_tail: Dict[Tuple[int, int], float] = {}
        self._armed: set = set()
        self._depth = 0
        self._mode_override: Optional[str] = None
        self.observers: List[Callable[[Envelope], None]] = []

    def attach(self, vertex: int, handler: Any) -> None:
        self._handlers[vertex] = handler

    def send(self, src: int, dst: int, payload: Any, protocol: str = "misc") -> Envelope:
        if dst == src or dst not in self.graph.adjacency[src]:
            raise IsolationViolation(f"vertex {src} cannot address {dst}: not a neighbour")
        self._seq = seq = self._seq + 1
        lat = self.latency.sample(src, dst, self._mode_override)
        deliver = self.now + lat
        key = (src, dst)
        tail = self._channel_tail.get(key, 0.0)
        if deliver < tail:
            deliver = tail
        self._channel_tail[key] = deliver
        env = Envelope(src, dst, payload, self.now, deliver, self._depth + 1, seq, protocol)
        heapq.heappush(self._queue, (deliver, dst, _DELIVERY, seq, env))
        return env

    def set_timer(self, owner: int, delay: float, tag: Any) -> int:
        if delay <= 0:
            raise ValueError("timer delay must be positive")
        self._seq = seq = self._seq + 1
        heapq.heappush(self._queue, (self.now + delay, owner, _TIMER, seq, (tag, self._depth)))
        self._armed.add(seq)
        return seq

    def cancel_timer(self, timer_id: int) -> None:
        self._armed.discard(timer_id)

    @contextlib.contextmanager
    def fixed_latency(self):
        """Sends made inside the block use each edge's L_max exactly."""
        self._mode_override = FIXED
        try:
            yield self
        finally:
            self._mode_override = None

    @property
    def pending(self) -> int:
        return len(self._queue)

    def step(self) -> bool:
        """Process one event; False when the queue is empty."""
        if not self._queue:
            return False
        self._dispatch(heapq.heappop(self._queue))
        return True

    def _dispatch(self, event: tuple) -> None:
        time, dst, kind, seq, item = event
        self.now = time
        if kind == _TIMER:
            if seq not in self._armed:
                return
            self._armed.discard(seq)
            tag, self._depth = item
            if self.trace is not None:
                self.trace.append((time, dst, "timer", repr(tag)))
            self._handlers[dst].on_timer(tag)
            return
        m = self.metrics
        m.total_messages += 1
        m.per_protocol[item.protocol] += 1
        depth = item.depth
        if depth > m.critical_path_depth:
            m.critical_path_depth = depth
        self._depth = depth
        if self.trace is not None:
            self.trace.append((time, dst, item.src, type(item.payload).__name__))
        for obs in self.observers:
            obs(item)
        self._handlers[dst].on_message(item.src, item.payload)

    def run_until_quiescent(self, limit: float = float("inf"), until: Optional[Callable[[], bool]] = None) -> RunResult:
        """Run until the queue drains, ``until()`` holds, or simulated time
        would pass ``limit``."""
        queue, pop, dispatch = self._queue, heapq.heappop, self._dispatch
        while queue:
            if queue[0][0] > limit:
                return RunResult(self.metrics.snapshot(), self.now, False)
            dispatch(pop(queue))
            if until is not None and until():
                break
        return RunResult(self.metrics.snapshot(), self.now, not queue)

    def trace_digest(self) -> str:
        if self.trace is None:
            raise RuntimeError("trace recording disabled")
        return hashlib.sha256(repr(self.trace).encode()).hexdigest()


class Port:
    """What a single vertex may touch: its id, its neighbours, send and timers."""

    __slots__ = ("vertex", "adj", "_net", "send")

    def __init__(self, net: Network, vertex: int):
        self._net = net
        self.vertex = vertex
        self.adj = net.graph.adjacency[vertex]
        # send(dst, payload, protocol)
        self.send = functools.partial(net.send, vertex)

    @property
    def now(self) -> float:
        return self._net.now

    def set_timer(self, delay: float, tag: Any) -> int:
        return self._net.set_timer(self.vertex, delay, tag)

    def cancel_timer(self, timer_id: int) -> None:
        self._net.cancel_timer(timer_id)
