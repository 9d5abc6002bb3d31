"""Immutable undirected graph, edge-list loading and the sequential peeling oracle."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

DEFAULT_LABEL = "_"

CoreMap = Dict[int, int]


class GraphError(ValueError):
    pass


class ParseError(GraphError):
    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line!r}")
        self.lineno = lineno


class ConnectivityError(GraphError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph over dense vertex ids ``0..n-1``.

    ``names`` maps each dense id back to the id used in the input file.
    ``virtual_edges`` holds edges added only to make the graph connected.
    """

    adjacency: Tuple[FrozenSet[int], ...]
    labels: Tuple[str, ...]
    names: Tuple[str, ...] = ()
    virtual_edges: FrozenSet[Tuple[int, int]] = frozenset()
    _index: Dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        n = len(self.adjacency)
        if len(self.labels) != n:
            raise GraphError("labels must cover every vertex")
        if not self.names:
            object.__setattr__(self, "names", tuple(str(i) for i in range(n)))
        for u, nbrs in enumerate(self.adjacency):
            if u in nbrs:
                raise GraphError(f"self-loop at vertex {self.names[u]}")
            for v in nbrs:
                if not 0 <= v < n or u not in self.adjacency[v]:
                    raise GraphError(f"asymmetric adjacency between {u} and {v}")
        self._index.update({name: i for i, name in enumerate(self.names)})

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[Tuple[int, int]],
        labels: Optional[Sequence[str]] = None,
        names: Optional[Sequence[str]] = None,
    ) -> "Graph":
        adj: List[set] = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            adj[u].add(v)
            adj[v].add(u)
        return cls(
            adjacency=tuple(frozenset(a) for a in adj),
            labels=tuple(labels) if labels is not None else (DEFAULT_LABEL,) * n,
            names=tuple(names) if names is not None else (),
        )

    @property
    def n(self) -> int:
        return len(self.adjacency)

    @property
    def m(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def adj(self, u: int) -> FrozenSet[int]:
        return self.adjacency[u]

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def edges(self) -> List[Tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in sorted(self.adjacency[u]) if u < v]

    def vertex(self, name: str) -> int:
        """Dense id of the vertex called ``name`` in the input."""
        return self._index[str(name)]

    def is_connected(self) -> bool:
        return len(components(self.adjacency)) <= 1

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Graph with vertex ``u`` renamed to ``perm[u]``."""
        n = self.n
        adj: List[FrozenSet[int]] = [frozenset()] * n
        labels = [DEFAULT_LABEL] * n
        for u in range(n):
            adj[perm[u]] = frozenset(perm[v] for v in self.adjacency[u])
            labels[perm[u]] = self.labels[u]
        return Graph(adjacency=tuple(adj), labels=tuple(labels))


def components(adjacency: Sequence[Iterable[int]]) -> List[List[int]]:
    seen = [False] * len(adjacency)
    out = []
    for s in range(len(adjacency)):
        if seen[s]:
            continue
        seen[s] = True
        comp, queue = [s], deque([s])
        while queue:
            u = queue.popleft()
            for v in adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    queue.append(v)
        out.append(comp)
    return out


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, raw, line.split()


def _sort_key(name: str):
    try:
        return (0, int(name), "")
    except ValueError:
        return (1, 0, name)


def load_graph(
    edge_list_text: str,
    label_text: Optional[str] = None,
    augment: bool = False,
    hub: Optional[str] = None,
) -> Graph:
    """Parse an edge list (and optional label list) into a :class:`Graph`.

    Vertex names may be any token; they are mapped to dense ids in numeric
    order when every name is an integer, lexicographic order otherwise.
    Disconnected input raises :class:`ConnectivityError` unless ``augment``
    is set, in which case one virtual edge joins ``hub`` (default: the first
    vertex) to each other component.
    """
    pairs = []
    names = set()
    for lineno, raw, toks in _tokens(edge_list_text):
        if len(toks) != 2:
            raise ParseError(lineno, raw, "expected two vertex ids")
        u, v = toks
        if u == v:
            raise ParseError(lineno, raw, "self-loop")
        pairs.append((u, v))
        names.update(toks)

    label_of: Dict[str, str] = {}
    if label_text:
        for lineno, raw, toks in _tokens(label_text):
            if len(toks) != 2:
                raise ParseError(lineno, raw, "expected 'id label'")
            label_of[toks[0]] = toks[1]
        names.update(label_of)

    if not names:
        raise GraphError("empty graph")
    ordered = sorted(names, key=_sort_key)
    index = {name: i for i, name in enumerate(ordered)}
    n = len(ordered)
    adj: List[set] = [set() for _ in range(n)]
    for u, v in pairs:
        adj[index[u]].add(index[v])
        adj[index[v]].add(index[u])

    virtual = set()
    comps = components(adj)
    if len(comps) > 1:
        if not augment:
            raise ConnectivityError(f"graph has {len(comps)} connected components")
        h = index[hub] if hub is not None else 0
        for comp in comps:
            if h in comp:
                continue
            w = min(comp)
            adj[h].add(w)
            adj[w].add(h)
            virtual.add((min(h, w), max(h, w)))

    return Graph(
        adjacency=tuple(frozenset(a) for a in adj),
        labels=tuple(label_of.get(name, DEFAULT_LABEL) for name in ordered),
        names=tuple(ordered),
        virtual_edges=frozenset(virtual),
    )


def oracle_core_decomposition(g: Graph) -> CoreMap:
    """Core numbers by bucket-sorted minimum-degree peeling, O(n + m)."""
    n = g.n
    if n == 0:
        return {}
    deg = [g.degree(u) for u in range(n)]
    md = max(deg)
    bin_start = [0] * (md + 1)
    for d in deg:
        bin_start[d] += 1
    start = 0
    for d in range(md + 1):
        start, bin_start[d] = start + bin_start[d], start
    pos = [0] * n
    vert = [0] * n
    for u in range(n):
        pos[u] = bin_start[deg[u]]
        vert[pos[u]] = u
        bin_start[deg[u]] += 1
    for d in range(md, 0, -1):
        bin_start[d] = bin_start[d - 1]
    bin_start[0] = 0

    for i in range(n):
        u = vert[i]
        for v in g.adjacency[u]:
            if deg[v] > deg[u]:
                dv, pv = deg[v], pos[v]
                pw = bin_start[dv]
                w = vert[pw]
                if v != w:
                    pos[v], pos[w] = pw, pv
                    vert[pv], vert[pw] = w, v
                bin_start[dv] += 1
                deg[v] -= 1
    return {u: deg[u] for u in range(n)}


def locality_holds(k: int, neighbor_cores: Iterable[int]) -> bool:
    """Both locality inequalities for a vertex claiming core ``k``."""
    cores = list(neighbor_cores)
    at_least_k = sum(1 for c in cores if c >= k)
    above = sum(1 for c in cores if c >= k + 1)
    return k <= at_least_k and k + 1 > above


def verify_core_map(g: Graph, c: Mapping[int, int]) -> bool:
    if set(c) != set(range(g.n)):
        return False
    return all(locality_holds(c[u], (c[v] for v in g.adjacency[u])) for u in range(g.n))
