"""Per-vertex k-core decomposition with encrypted three-message comparisons.

A vertex never sees a neighbour's estimate. It sends ``Probe`` carrying its own
estimate encrypted under a fresh key, the neighbour answers with an encrypted
"yours > mine" bit, and only the prober can open it. ``Notify`` tells a
neighbour that an earlier "you are at least my value" answer may be stale.
"""
from __future__ import annotations

import hashlib
import struct
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Tuple

from .crypto import CipherBool, CipherValue, KeyPair, PublicKey, SealedProvider
from .ledger import Kind, Ledger, Observation
from .simnet import IsolationViolation, Port

PROTOCOL_DECOMPOSE = "decompose"
PROTOCOL_COMPARE = "compare"


class ProtocolError(RuntimeError):
    pass


class Status(Enum):
    LIVE = "Live"
    DEAD = "Dead"


@dataclass(frozen=True, slots=True)
class Notify:
    src: int


@dataclass(frozen=True, slots=True)
class Probe:
    src: int
    pub: PublicKey
    cipher: CipherValue
    # prober's count of its own estimate changes; lets the target apply the budget
    epoch: int


@dataclass(frozen=True, slots=True)
class Verdict:
    src: int
    cipher: CipherBool


def get_core(counts: Callable[[int], int], k: int) -> int:
    """Largest k' <= k with counts(k') >= k', where counts(j) is the number of
    neighbours whose value is at least j."""
    while k > 0 and counts(k) < k:
        k -= 1
    return k


def get_core_multiset(values: Iterable[int], k: int) -> int:
    vals = list(values)
    return get_core(lambda j: sum(1 for x in vals if x >= j), k)


def key_seed(run_seed: int, vertex: int, epoch: int) -> int:
    digest = hashlib.blake2b(struct.pack(">qqq", run_seed, vertex, epoch), digest_size=8).digest()
    return int.from_bytes(digest, "big", signed=True)


class RoundTracker:
    """Simulator-side bookkeeping of causal update rounds.

    A decrement below ``k`` is assigned the earliest synchronous round in
    which the negative answers it relied on could have existed. Vertex logic
    only reports to it and never reads from it.
    """

    def __init__(self, degrees: List[int]):
        self.degrees = degrees
        self.history: Dict[int, List[Tuple[int, int]]] = {}

    def _dropped_below(self, v: int, k: int) -> int:
        if self.degrees[v] < k:
            return 0
        for tag, value in self.history.get(v, ()):
            if value < k:
                return tag
        raise ProtocolError(f"vertex {v} answered below {k} without having dropped")

    def decrement(self, u: int, k: int, below: List[int]) -> int:
        need = self.degrees[u] - k + 1
        tags = sorted(self._dropped_below(v, k) for v in below)
        tag = 1 + tags[need - 1]
        hist = self.history.setdefault(u, [])
        if hist:
            tag = max(tag, hist[-1][0])
        hist.append((tag, k - 1))
        return tag

    @property
    def rounds(self) -> int:
        return max((h[-1][0] for h in self.history.values() if h), default=0)

    def updates(self, u: int) -> int:
        return len({tag for tag, _ in self.history.get(u, ())})

    def changes_by_round(self) -> Dict[int, Dict[int, int]]:
        out: Dict[int, Dict[int, int]] = {}
        for u, hist in self.history.items():
            for tag, value in hist:
                out.setdefault(tag, {})[u] = value
        return out


class DecompositionAgent:
    """State machine for one vertex. Requires FIFO channels."""

    def __init__(
        self,
        port: Port,
        provider: SealedProvider,
        ledger: Ledger,
        run_seed: int = 0,
        tracker: Optional[RoundTracker] = None,
        on_status: Optional[Callable[[Status], None]] = None,
        enforce_budget: bool = True,
    ):
        self.port = port
        self.u = port.vertex
        self.provider = provider
        self.ledger = ledger
        self.run_seed = run_seed
        self.tracker = tracker
        self.on_status = on_status
        self.enforce_budget = enforce_budget

        self.degree = len(port.adj)
        self.est = self.degree
        self.epoch = 0
        self.keys: Optional[KeyPair] = None
        self.status = Status.DEAD
        self.started = False
        # v -> (ge, probe value) for the last answered probe
        self.rec: Dict[int, Optional[Tuple[bool, int]]] = {v: None for v in port.adj}
        self._unknown = self.degree  # records still None
        self._ge = 0  # records saying "at least my value"
        # v -> (keys, probe value, ledger epoch) of the probe in flight
        self.pending: Dict[int, Tuple[KeyPair, int, Tuple[int, int]]] = {}
        # w -> (w's epoch, my epoch) when I last answered w
        self.last_answer: Dict[int, Tuple[int, int]] = {}
        self.notifies: Counter = Counter()
        self.refused = 0
        self.history: List[int] = [self.est]
        self._buffer: List[Tuple[int, object]] = []

    # lifecycle

    def start(self) -> None:
        if self.started:
            return
        self.started = True
        if self.degree == 0:
            self._set_status(Status.DEAD)
        else:
            self._new_keys()
            self._set_status(Status.LIVE)
            for v in sorted(self.port.adj):
                self._probe(v)
        buffered, self._buffer = self._buffer, []
        for src, msg in buffered:
            self.handle(src, msg)

    def _set_status(self, status: Status) -> None:
        changed = status != self.status
        self.status = status
        if changed and self.on_status is not None:
            self.on_status(status)

    def _new_keys(self) -> None:
        self.keys = self.provider.keygen(key_seed(self.run_seed, self.u, self.epoch), owner=self.u)

    # messages

    def handle(self, src: int, msg) -> None:
        if src not in self.port.adj:
            raise IsolationViolation(f"{self.u} received from non-neighbour {src}")
        if msg.src != src:
            raise ProtocolError(f"message claims source {msg.src} but came from {src}")
        if isinstance(msg, Probe):
            self.on_probe(src, msg)
        elif isinstance(msg, Verdict):
            self.on_verdict(src, msg)
        elif isinstance(msg, Notify):
            self.on_notify(src, msg)
        else:
            raise ProtocolError(f"unexpected message {msg!r}")

    def _probe(self, v: int) -> None:
        ledger_epoch = (self.epoch, self.notifies[v])
        self.pending[v] = (self.keys, self.est, ledger_epoch)
        cipher = self.provider.encrypt(self.keys.pub, self.est)
        self.port.send(v, Probe(self.u, self.keys.pub, cipher, self.epoch), PROTOCOL_COMPARE)

    def on_notify(self, v: int, msg: Optional[Notify] = None) -> None:
        if not self.started:
            self._buffer.append((v, msg or Notify(v)))
            return
        self.notifies[v] += 1
        if v in self.pending:
            return  # the answer in flight was computed after v's change
        r = self.rec[v]
        if r is not None and not r[0]:
            return  # v was already below me and only moves down
        self._set_status(Status.LIVE)
        self._probe(v)

    def _may_answer(self, w: int, probe: Probe) -> bool:
        last = self.last_answer.get(w)
        return last is None or probe.epoch > last[0] or self.epoch > last[1]

    def on_probe(self, w: int, probe: Probe) -> None:
        if not self.started:
            self._buffer.append((w, probe))
            return
        if self.enforce_budget and not self._may_answer(w, probe):
            self.refused += 1
            return
        self.last_answer[w] = (probe.epoch, self.epoch)
        mine = self.provider.encrypt(probe.pub, self.est)
        self.port.send(w, Verdict(self.u, self.provider.cmp_gt(probe.cipher, mine)), PROTOCOL_COMPARE)

    def on_verdict(self, v: int, msg: Verdict) -> None:
        # a verdict always answers our own probe, so we have started
        try:
            keys, value, ledger_epoch = self.pending.pop(v)
        except KeyError:
            raise ProtocolError(f"{self.u} got a verdict from {v} with no probe pending") from None
        gt = self.provider.decrypt(keys.pri, msg.cipher, observer=self.u, kind=Kind.COMPARISON_BOOL,
                                   subject=v, epoch=ledger_epoch)
        if value == 2 and gt:
            # the one exact value a comparison can pin down: 2 > v forces v = 1
            self.ledger.record(Observation(self.u, Kind.INFERRED_VALUE, v,
                                           {"probe": 2, "gt": True, "inferred": 1}, self.port.now, ledger_epoch))
        old = self.rec[v]
        if old is None:
            self._unknown -= 1
        elif old[0]:
            self._ge -= 1
        if not gt:
            self._ge += 1
        self.rec[v] = (not gt, value)
        self._try_settle()

    def _try_settle(self) -> None:
        if self.pending or self._unknown:
            return
        if self._ge >= self.est:
            self._set_status(Status.DEAD)
            return
        below = [v for v, (ge, _) in self.rec.items() if not ge]
        if self.tracker is not None:
            self.tracker.decrement(self.u, self.est, below)
        self.est -= 1
        self.epoch += 1
        self.history.append(self.est)
        self._new_keys()
        self._set_status(Status.LIVE)
        for v in sorted(self.port.adj):
            if self.rec[v][0]:
                self.port.send(v, Notify(self.u), PROTOCOL_DECOMPOSE)
            else:
                self._probe(v)
