from collections import Counter

from hypothesis import given, settings, strategies as st

from fedcore.engine import Federation, RunOptions
from fedcore.graph import Graph, oracle_core_decomposition, verify_core_map
from fedcore.simnet import SimConfig

from oracles import brute_force_cores


@st.composite
def connected_graphs(draw, max_n=14):
    n = draw(st.integers(2, max_n))
    parents = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    edges = {(p, i) for i, p in enumerate(parents, 1)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n))
    edges |= {(min(u, v), max(u, v)) for u, v in extra if u != v}
    labels = draw(st.lists(st.sampled_from("AB"), min_size=n, max_size=n))
    return Graph.from_edges(n, sorted(edges), labels=labels)


seeds = st.integers(0, 2**31 - 1)
slow = settings(max_examples=40, deadline=None)


@slow
@given(connected_graphs(), seeds)
def test_protocol_matches_oracle_and_bounds(g, seed):
    fed = Federation(g, SimConfig(seed=seed), RunOptions(root=seed % g.n))
    res = fed.decompose()
    oc = oracle_core_decomposition(g)
    assert res.estimates == oc
    assert oc == dict(enumerate(brute_force_cores([g.adj(u) for u in range(g.n)])))
    assert verify_core_map(g, res.estimates)
    bound = 3 * sum(g.degree(u) * (g.degree(u) - oc[u] + 1) for u in range(g.n))
    assert res.decomposition_messages <= bound
    for node in fed.nodes:
        h = node.decomp.history
        assert all(a - b == 1 for a, b in zip(h, h[1:]))


@slow
@given(connected_graphs(), seeds)
def test_termination_and_privacy_hold(g, seed):
    fed = Federation(g, SimConfig(seed=seed))
    fed.decompose()
    check = fed.termination_check()
    assert check["safe"] and check["live"]
    assert fed.privacy().ok


@slow
@given(connected_graphs(), seeds)
def test_distribution_sums_to_n(g, seed):
    fed = Federation(g, SimConfig(seed=seed), RunOptions(heartbeats=False))
    fed.decompose()
    kmax = max(g.degree(u) for u in range(g.n))
    hist = fed.distribution("AB", kmax)
    oc = oracle_core_decomposition(g)
    truth = Counter((g.labels[u], oc[u]) for u in range(g.n))
    assert sum(hist.values()) == g.n
    assert {k: v for k, v in hist.items() if v} == dict(truth)
    assert fed.privacy().ok


@settings(max_examples=20, deadline=None)
@given(connected_graphs(), seeds)
def test_same_seed_same_trace(g, seed):
    digests = []
    for _ in range(2):
        fed = Federation(g, SimConfig(seed=seed), RunOptions(record_trace=True))
        fed.decompose()
        digests.append((fed.net.trace_digest(), fed.result.metrics))
    assert digests[0] == digests[1]


@settings(max_examples=30, deadline=None)
@given(connected_graphs(max_n=10), st.randoms(use_true_random=False))
def test_relabelling_preserves_cores(g, rnd):
    perm = list(range(g.n))
    rnd.shuffle(perm)
    h = g.relabel(perm)
    a = oracle_core_decomposition(g)
    b = oracle_core_decomposition(h)
    assert all(a[u] == b[perm[u]] for u in range(g.n))
