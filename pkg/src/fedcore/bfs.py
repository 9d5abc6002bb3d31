"""Feedback BFS tree, timing derivation and heartbeat-based termination detection."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Set, Tuple

from .core_protocol import ProtocolError, Status
from .ledger import Kind, Ledger, Observation
from .simnet import IsolationViolation, Port

PROTOCOL_BFS = "bfs"
PROTOCOL_START = "start"
PROTOCOL_HEARTBEAT = "heartbeat"


class TimingError(ValueError):
    pass


class Activity(Enum):
    ACTIVE = "Active"
    INACTIVE = "Inactive"


@dataclass(frozen=True, slots=True)
class TreeBuild:
    ver: int


@dataclass(frozen=True, slots=True)
class TreeAck:
    ver: int  # negative of the build version


@dataclass(frozen=True, slots=True)
class Start:
    timeout: float
    interval: float


@dataclass(frozen=True, slots=True)
class Heartbeat:
    gen: int


@dataclass(frozen=True)
class TimingParams:
    t_bar: float
    timeout: float
    interval: float

    def as_dict(self) -> Dict[str, float]:
        return {"T_bar": self.t_bar, "T": self.timeout, "I": self.interval}


def derive_timing(t_bar: float) -> TimingParams:
    if t_bar <= 0:
        raise TimingError("feedback duration must be positive")
    timeout = 1.5 * t_bar
    return TimingParams(t_bar, timeout, timeout / 3)


def check_latency_bound(timing: TimingParams, l_max: float) -> None:
    """Heartbeats must reach everyone while the timeout still covers the
    slowest single hop; that needs T >= T_bar + L_max."""
    if timing.timeout < timing.t_bar + l_max:
        raise TimingError(f"T={timing.timeout} is shorter than T_bar + L_max = {timing.t_bar + l_max}")


@dataclass
class TreeState:
    parent: Optional[int] = None
    children: Set[int] = field(default_factory=set)
    ver: Optional[int] = None
    joined: bool = False
    awaiting: Set[int] = field(default_factory=set)


class TreeAgent:
    """Tree construction plus the per-vertex heartbeat state machine."""

    def __init__(self, port: Port, ledger: Ledger, on_start: Optional[Callable[[], None]] = None,
                 heartbeats: bool = True):
        self.port = port
        self.u = port.vertex
        self.ledger = ledger
        self.on_start = on_start
        self.heartbeats = heartbeats
        self.tree = TreeState()
        self.is_root = False
        self.used_versions: Set[int] = set()
        self.t_bar: Optional[float] = None
        self._t0 = 0.0
        self.timing: Optional[TimingParams] = None
        self.started = False

        self.activity = Activity.ACTIVE
        self.live = False
        self.gen = 0
        self._timeout_timer: Optional[int] = None
        self._tick_timer: Optional[int] = None
        self.activity_log: List[Tuple[float, Activity]] = []
        self.forwarded = 0

    # tree construction

    @property
    def tree_neighbors(self) -> Set[int]:
        out = set(self.tree.children)
        if self.tree.parent is not None:
            out.add(self.tree.parent)
        return out

    def build(self, ver: int) -> None:
        if ver in self.used_versions:
            raise ProtocolError(f"tree version {ver} already used")
        self.used_versions.add(ver)
        self.is_root = True
        self.tree = TreeState(ver=ver, joined=True, awaiting=set(self.port.adj))
        self._t0 = self.port.now
        for v in sorted(self.port.adj):
            self.port.send(v, TreeBuild(ver), PROTOCOL_BFS)
        self._maybe_done()

    def on_build(self, w: int, msg: TreeBuild) -> None:
        t = self.tree
        if t.joined and t.ver == msg.ver:
            t.awaiting.discard(w)  # crossing message on a non-tree edge
            self._maybe_done()
            return
        if msg.ver in self.used_versions:
            raise ProtocolError(f"tree version {msg.ver} already used")
        self.used_versions.add(msg.ver)
        self.tree = t = TreeState(parent=w, ver=msg.ver, joined=True, awaiting=set(self.port.adj) - {w})
        self.ledger.record(Observation(self.u, Kind.TREE_RELATION, w, "parent", self.port.now))
        for v in sorted(t.awaiting):
            self.port.send(v, TreeBuild(msg.ver), PROTOCOL_BFS)
        self._maybe_done()

    def on_ack(self, w: int, msg: TreeAck) -> None:
        t = self.tree
        if t.ver is None or msg.ver != -t.ver or w not in t.awaiting:
            raise ProtocolError(f"unexpected ack {msg.ver} from {w}")
        t.awaiting.discard(w)
        t.children.add(w)
        self.ledger.record(Observation(self.u, Kind.TREE_RELATION, w, "child", self.port.now))
        self._maybe_done()

    def _maybe_done(self) -> None:
        t = self.tree
        if t.awaiting:
            return
        if self.is_root:
            if self.t_bar is None:
                self.t_bar = self.port.now - self._t0
                self.ledger.record(Observation(self.u, Kind.TIMING, None, self.t_bar, self.port.now))
        else:
            self.port.send(t.parent, TreeAck(-t.ver), PROTOCOL_BFS)

    # start broadcast

    def broadcast_start(self, timing: TimingParams) -> None:
        if not self.is_root or self.t_bar is None:
            raise ProtocolError("only a root with a finished tree can start")
        self._on_start(Start(timing.timeout, timing.interval))

    def _on_start(self, msg: Start) -> None:
        if self.started:
            raise ProtocolError(f"{self.u} started twice")
        self.started = True
        self.timing = TimingParams(msg.timeout / 1.5, msg.timeout, msg.interval)
        for c in sorted(self.tree.children):
            self.port.send(c, msg, PROTOCOL_START)
        if self.heartbeats:
            self._set_activity(Activity.ACTIVE)
            self._arm_timeout()
        if self.on_start is not None:
            self.on_start()

    def on_start_msg(self, w: int, msg: Start) -> None:
        if w != self.tree.parent:
            raise ProtocolError(f"start from {w}, which is not the parent of {self.u}")
        self._on_start(msg)

    # heartbeats

    def _set_activity(self, a: Activity) -> None:
        if not self.activity_log or self.activity_log[-1][1] != a:
            self.activity_log.append((self.port.now, a))
        self.activity = a

    def _arm_timeout(self) -> None:
        if self._timeout_timer is not None:
            self.port.cancel_timer(self._timeout_timer)
        self._timeout_timer = self.port.set_timer(self.timing.timeout, "timeout")

    def _emit(self) -> None:
        self.gen += 1
        for v in sorted(self.tree_neighbors):
            self.port.send(v, Heartbeat(self.gen), PROTOCOL_HEARTBEAT)
        self._set_activity(Activity.ACTIVE)
        self._arm_timeout()

    def status_changed(self, status: Status) -> None:
        """Hook for the decomposition agent's Live/Dead transitions."""
        if not self.heartbeats or not self.started:
            return
        if status == Status.LIVE:
            self.live = True
            self._emit()
            self._tick_timer = self.port.set_timer(self.timing.interval, "tick")
        else:
            self.live = False
            if self._tick_timer is not None:
                self.port.cancel_timer(self._tick_timer)
                self._tick_timer = None
            self._emit()  # last word, so neighbours time out after it

    def on_heartbeat(self, w: int, msg: Heartbeat) -> None:
        if w not in self.tree_neighbors:
            raise IsolationViolation(f"heartbeat from {w}, not a tree neighbour of {self.u}")
        self._set_activity(Activity.ACTIVE)
        self._arm_timeout()
        # a tree has no cycles, so every heartbeat reaches each vertex once
        for v in sorted(self.tree_neighbors - {w}):
            self.port.send(v, msg, PROTOCOL_HEARTBEAT)
            self.forwarded += 1

    def on_timer(self, tag: str) -> None:
        if tag == "tick":
            self._tick_timer = None
            if self.live:
                self._emit()
                self._tick_timer = self.port.set_timer(self.timing.interval, "tick")
        elif tag == "timeout":
            self._timeout_timer = None
            if self.live:
                self._arm_timeout()  # Live dominates
            else:
                self._set_activity(Activity.INACTIVE)
                self.ledger.record(Observation(self.u, Kind.TIMING, None, "inactive", self.port.now))

    def handle(self, src: int, msg) -> None:
        if src not in self.port.adj:
            raise IsolationViolation(f"{self.u} received from non-neighbour {src}")
        if isinstance(msg, TreeBuild):
            self.on_build(src, msg)
        elif isinstance(msg, TreeAck):
            self.on_ack(src, msg)
        elif isinstance(msg, Start):
            self.on_start_msg(src, msg)
        elif isinstance(msg, Heartbeat):
            self.on_heartbeat(src, msg)
        else:
            raise ProtocolError(f"unexpected message {msg!r}")


def tree_is_valid(parents: Dict[int, Optional[int]], children: Dict[int, Set[int]], root: int) -> bool:
    n = len(parents)
    if parents[root] is not None or sum(p is None for p in parents.values()) != 1:
        return False
    for u, p in parents.items():
        if p is not None and u not in children[p]:
            return False
    if sum(len(c) for c in children.values()) != n - 1:
        return False
    seen, stack = {root}, [root]
    while stack:
        for c in children[stack.pop()]:
            if c in seen:
                return False
            seen.add(c)
            stack.append(c)
    return len(seen) == n


def live_intervals(log: List[Tuple[float, Status]], end: float = float("inf")) -> List[Tuple[float, float]]:
    out, start = [], None
    for t, s in log:
        if s == Status.LIVE and start is None:
            start = t
        elif s == Status.DEAD and start is not None:
            out.append((start, t))
            start = None
    if start is not None:
        out.append((start, end))
    return out


def inactive_intervals(log: List[Tuple[float, Activity]]) -> List[Tuple[float, float]]:
    out, start = [], None
    for t, a in log:
        if a == Activity.INACTIVE and start is None:
            start = t
        elif a == Activity.ACTIVE and start is not None:
            out.append((start, t))
            start = None
    if start is not None:
        out.append((start, float("inf")))
    return out


def safety_violations(live: Dict[int, List[Tuple[float, float]]],
                      inactive: Dict[int, List[Tuple[float, float]]], timeout: float, eps: float = 1e-6):
    """Pairs where a vertex was Inactive while some vertex had been Live
    within the preceding ``timeout``. Live intervals are half-open, so a
    timeout firing exactly ``timeout`` after a Dead transition is fine."""
    bad = []
    for u, ivs in inactive.items():
        for t1, t2 in ivs:
            for v, lvs in live.items():
                for a, b in lvs:
                    if a < t2 and b > t1 - timeout + eps:
                        bad.append((u, (t1, t2), v, (a, b)))
    return bad
