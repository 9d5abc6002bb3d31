"""Encrypted count of vertices matching a (label, core) pair, aggregated up the tree."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Set

from .core_protocol import ProtocolError
from .crypto import CipherValue, KeyPair, PublicKey, SealedProvider
from .ledger import Kind
from .simnet import Port

PROTOCOL_COUNT = "count"


class IncompleteCount(RuntimeError):
    pass


@dataclass(frozen=True, slots=True)
class CountRequest:
    pub: PublicKey
    target: CipherValue
    ver: int


@dataclass(frozen=True, slots=True)
class CountReply:
    cipher: CipherValue
    ver: int  # negative of the request version


@dataclass
class QueryState:
    pub: PublicKey
    parent: Optional[int]
    own: CipherValue
    waiting: Set[int]
    replies: Dict[int, CipherValue] = field(default_factory=dict)
    keys: Optional[KeyPair] = None  # root only
    result: Optional[int] = None
    timer: Optional[int] = None


class CountAgent:
    """One vertex's side of every counting query.

    ``tree`` returns (parent, children); ``local`` returns the vertex's own
    (label, core). The match bit exists only as a choice between two
    ciphertexts and is never stored.
    """

    def __init__(self, port: Port, provider: SealedProvider, tree: Callable, local: Callable):
        self.port = port
        self.u = port.vertex
        self.provider = provider
        self.tree = tree
        self.local = local
        self.queries: Dict[int, QueryState] = {}
        self.failed: Dict[int, str] = {}
        # white-box hook for flow-conservation tests; never read by the protocol
        self.sent_up: Dict[int, CipherValue] = {}

    def _contribution(self, pub: PublicKey, target: CipherValue) -> CipherValue:
        mine = self.provider.encrypt(pub, self.local())
        return self.provider.encrypt(pub, 1 if self.provider.eq_cipher(mine, target) else 0)

    def start(self, keys: KeyPair, label: str, k: int, ver: int, timeout: Optional[float]) -> None:
        if ver in self.queries:
            raise ProtocolError(f"query version {ver} already in use")
        parent, children = self.tree()
        if parent is not None:
            raise ProtocolError("a count query starts at the tree root")
        target = self.provider.encrypt(keys.pub, (label, k))
        q = QueryState(keys.pub, None, self._contribution(keys.pub, target), set(children), keys=keys)
        self.queries[ver] = q
        for c in sorted(children):
            self.port.send(c, CountRequest(keys.pub, target, ver), PROTOCOL_COUNT)
        if timeout is not None and q.waiting:
            q.timer = self.port.set_timer(timeout, ("count-timeout", ver))
        self._maybe_reply(ver)

    def on_request(self, w: int, msg: CountRequest) -> None:
        parent, children = self.tree()
        if w != parent:
            raise ProtocolError(f"count request from {w}, which is not the parent of {self.u}")
        if msg.ver in self.queries:
            raise ProtocolError(f"query version {msg.ver} already in use")
        self.queries[msg.ver] = QueryState(msg.pub, parent, self._contribution(msg.pub, msg.target), set(children))
        for c in sorted(children):
            self.port.send(c, msg, PROTOCOL_COUNT)
        self._maybe_reply(msg.ver)

    def on_reply(self, w: int, msg: CountReply) -> None:
        q = self.queries.get(-msg.ver)
        if q is None:
            raise ProtocolError(f"reply for unknown query {-msg.ver}")
        if w not in q.waiting:
            if w in q.replies:
                raise ProtocolError(f"duplicate count reply from {w}")
            raise ProtocolError(f"count reply from non-child {w}")
        q.waiting.discard(w)
        q.replies[w] = msg.cipher
        self._maybe_reply(-msg.ver)

    def _maybe_reply(self, ver: int) -> None:
        q = self.queries[ver]
        if q.waiting:
            return
        total = q.own
        for c in sorted(q.replies):
            total = self.provider.add(total, q.replies[c])
        if q.parent is None:
            if q.timer is not None:
                self.port.cancel_timer(q.timer)
            q.result = self.provider.decrypt(q.keys.pri, total, observer=self.u, kind=Kind.COUNT_RESULT)
        else:
            self.sent_up[ver] = total
            self.port.send(q.parent, CountReply(total, -ver), PROTOCOL_COUNT)

    def on_timer(self, tag) -> None:
        _, ver = tag
        q = self.queries[ver]
        if q.result is None:
            self.failed[ver] = f"missing replies from {sorted(q.waiting)}"

    def handle(self, src: int, msg) -> None:
        if isinstance(msg, CountRequest):
            self.on_request(src, msg)
        elif isinstance(msg, CountReply):
            self.on_reply(src, msg)
        else:
            raise ProtocolError(f"unexpected message {msg!r}")
