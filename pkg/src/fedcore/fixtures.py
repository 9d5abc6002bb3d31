"""Reference graphs and a seeded generator of random connected graphs.

The 12-vertex example graph has vertices a..l. Its adjacency was reconstructed
so that synchronous rounds of the decomposition give:

    round 1: b->2, d->3, g->3, j->1
    round 2: g->2, i->1, l->2
    round 3: h->1

Vertex d has degree 6 and its neighbours' final cores are {2,2,2,3,3,3}.
"""
from __future__ import annotations

import random
from typing import Dict, List, Optional, Tuple

from .graph import Graph
from .simnet import FIXED, SimConfig

EXAMPLE_NAMES = tuple("abcdefghijkl")

EXAMPLE_TREE_EDGES = (
    ("a", "b"), ("a", "d"), ("d", "c"), ("d", "e"), ("d", "f"), ("d", "g"),
    ("g", "h"), ("h", "i"), ("i", "j"), ("j", "k"), ("b", "l"),
)
EXAMPLE_EXTRA_EDGES = (("c", "e"), ("c", "f"), ("e", "f"), ("b", "g"), ("g", "l"), ("d", "l"))

EXAMPLE_LABELS = dict(zip(EXAMPLE_NAMES, "ABCABCABBABC"))

EXAMPLE_CORES = dict(a=2, b=2, c=3, d=3, e=3, f=3, g=2, h=1, i=1, j=1, k=1, l=2)

# hop latencies in ms; every other edge takes 20
EXAMPLE_LATENCY = {("a", "b"): 10.0, ("b", "g"): 40.0}


def example_graph() -> Graph:
    idx = {name: i for i, name in enumerate(EXAMPLE_NAMES)}
    edges = [(idx[u], idx[v]) for u, v in EXAMPLE_TREE_EDGES + EXAMPLE_EXTRA_EDGES]
    return Graph.from_edges(len(EXAMPLE_NAMES), edges,
                            labels=[EXAMPLE_LABELS[x] for x in EXAMPLE_NAMES], names=EXAMPLE_NAMES)


def example_config(seed: int = 0, mode: str = FIXED) -> SimConfig:
    g = example_graph()
    edges = tuple((g.vertex(u), g.vertex(v), ms) for (u, v), ms in EXAMPLE_LATENCY.items())
    return SimConfig(default_latency_ms=20.0, edge_latency=edges, seed=seed, latency_mode=mode)


def example_edge_list() -> str:
    return "".join(f"{u} {v}\n" for u, v in EXAMPLE_TREE_EDGES + EXAMPLE_EXTRA_EDGES)


def example_label_list() -> str:
    return "".join(f"{u} {lb}\n" for u, lb in EXAMPLE_LABELS.items())


def example_config_dict() -> Dict:
    return {
        "default_latency_ms": 20,
        "edge_latency": [[u, v, ms] for (u, v), ms in EXAMPLE_LATENCY.items()],
        "seed": 0,
        "latency_mode": FIXED,
    }


def random_connected_graph(n: int, avg_degree: float, seed: int,
                           labels: Optional[List[str]] = None) -> Graph:
    """Random spanning tree plus uniformly random extra edges up to the target
    average degree."""
    rng = random.Random(seed)
    edges = set()
    order = list(range(n))
    rng.shuffle(order)
    for i in range(1, n):
        u, v = order[i], order[rng.randrange(i)]
        edges.add((min(u, v), max(u, v)))
    target = min(int(round(avg_degree * n / 2)), n * (n - 1) // 2)
    while len(edges) < target:
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            edges.add((min(u, v), max(u, v)))
    lbs = [rng.choice(labels) for _ in range(n)] if labels else None
    return Graph.from_edges(n, sorted(edges), labels=lbs)


def random_suite(count: int, seed: int, n_range: Tuple[int, int] = (10, 1000),
                 deg_range: Tuple[float, float] = (2.0, 20.0), labels: Optional[List[str]] = None):
    """Yield (graph_seed, n, avg_degree, graph) for a reproducible batch."""
    rng = random.Random(seed)
    for _ in range(count):
        n = rng.randint(*n_range)
        d = min(rng.uniform(*deg_range), n - 1)
        gs = rng.randrange(2**31)
        yield gs, n, d, random_connected_graph(n, d, gs, labels)
