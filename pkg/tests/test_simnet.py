import json

import pytest

from fedcore.graph import Graph, load_graph
from fedcore.simnet import FIXED, IsolationViolation, Network, SimConfig


class Recorder:
    def __init__(self, net, u, echo=0):
        self.net, self.u, self.echo = net, u, echo
        self.got, self.timers = [], []

    def on_message(self, src, payload):
        self.got.append((self.net.now, src, payload))
        if self.echo > 0:
            self.echo -= 1
            self.net.send(self.u, src, payload, "misc")

    def on_timer(self, tag):
        self.timers.append((self.net.now, tag))


def make(graph, **cfg):
    net = Network(graph, SimConfig(**cfg), record_trace=True)
    handlers = [Recorder(net, u) for u in range(graph.n)]
    for u, h in enumerate(handlers):
        net.attach(u, h)
    return net, handlers


PATH = Graph.from_edges(3, [(0, 1), (1, 2)])


def test_delivery_within_bound():
    net, hs = make(PATH, default_latency_ms=20, seed=5)
    for _ in range(200):
        net.send(0, 1, "x")
    net.run_until_quiescent()
    times = [t for t, _, _ in hs[1].got]
    assert len(times) == 200 and all(0 < t <= 20 for t in times)


def test_fixed_latency_is_exact():
    net, hs = make(PATH, default_latency_ms=20, latency_mode=FIXED)
    net.send(0, 1, "x")
    net.run_until_quiescent()
    assert hs[1].got[0][0] == 20


def test_channels_are_fifo():
    net, hs = make(PATH, default_latency_ms=20, seed=9)
    for i in range(100):
        net.send(0, 1, i)
    net.run_until_quiescent()
    assert [p for _, _, p in hs[1].got] == list(range(100))


@pytest.mark.parametrize("dst", [0, 2])
def test_isolation(dst):
    net, _ = make(PATH)
    with pytest.raises(IsolationViolation):
        net.send(0, dst, "x")


def test_timer_fires_and_cancel():
    net, hs = make(PATH)
    net.set_timer(0, 360, "a")
    t = net.set_timer(0, 100, "b")
    net.cancel_timer(t)
    net.cancel_timer(t)  # second cancel is a no-op
    net.cancel_timer(12345)
    net.run_until_quiescent()
    assert hs[0].timers == [(360, "a")]


def test_simultaneous_timers_order_by_owner_then_sequence():
    net, hs = make(PATH)
    order = []
    for h in hs:
        h.on_timer = lambda tag, u=h.u: order.append((u, tag))
    net.set_timer(2, 50, "x")
    net.set_timer(0, 50, "y")
    net.set_timer(0, 50, "z")
    net.run_until_quiescent()
    assert order == [(0, "y"), (0, "z"), (2, "x")]


def test_timer_delay_must_be_positive():
    net, _ = make(PATH)
    with pytest.raises(ValueError):
        net.set_timer(0, 0, "x")


def test_empty_run_and_single_envelope():
    net, _ = make(PATH)
    assert net.run_until_quiescent().metrics["W"] == 0
    net.send(0, 1, "x")
    m = net.run_until_quiescent().metrics
    assert (m["W"], m["D"]) == (1, 1)


def test_depth_follows_causal_chain():
    net, hs = make(PATH, latency_mode=FIXED)
    hs[0].echo, hs[1].echo = 1, 2
    net.send(0, 1, "x")
    res = net.run_until_quiescent()
    assert res.metrics["W"] == 4
    assert res.metrics["D"] == 4


def test_limit_flags_timeout():
    net, hs = make(PATH, latency_mode=FIXED, default_latency_ms=10)
    hs[0].echo = hs[1].echo = 1000
    net.send(0, 1, "x")
    res = net.run_until_quiescent(limit=55)
    assert res.timed_out and res.metrics["W"] == 5


def test_replay_is_deterministic():
    def run():
        net, hs = make(PATH, seed=3)
        hs[1].echo = 50
        hs[0].echo = 50
        net.send(0, 1, "x")
        net.set_timer(2, 10, "t")
        net.run_until_quiescent()
        return net.trace_digest(), net.metrics.snapshot()
    assert run() == run()


def test_per_edge_latency_and_symmetry():
    g = PATH
    net, _ = make(g, edge_latency=((0, 1, 7.0),))
    assert net.latency.l_max(0, 1) == net.latency.l_max(1, 0) == 7.0
    assert net.latency.l_max(1, 2) == 20.0
    assert net.latency.global_max == 20.0


def test_config_rejects_non_edges():
    with pytest.raises(ValueError):
        Network(PATH, SimConfig(edge_latency=((0, 2, 5.0),)))
    with pytest.raises(ValueError):
        SimConfig(latency_mode="gaussian")


def test_config_json_and_env_override(tmp_path, monkeypatch):
    g = load_graph("a b\nb c\n")
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"default_latency_ms": 15, "edge_latency": [["a", "b", 4]],
                                "seed": 8, "latency_mode": "fixed"}))
    cfg = SimConfig.load(str(path), g)
    assert cfg.seed == 8 and cfg.edge_latency == ((0, 1, 4.0),) and cfg.latency_mode == FIXED
    monkeypatch.setenv("FEDCORE_SEED", "99")
    assert SimConfig.load(str(path), g).seed == 99
