from __future__ import annotations

import itertools
import math
import random

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lutdecoder.layout import build_layout, syndrome_of
from lutdecoder.matching import (
    SCALE,
    build_graph,
    commit_oldest_layer,
    committed_edges,
    min_weight_match,
    odd_degree_nodes,
)


def _graph(d, t, m, **kw):
    return build_graph(build_layout(d), t, m, **kw)


def brute_force_weight(graph, events):
    """Enumerate every way to pair events with each other or with the boundary."""
    events = list(events)
    if not events:
        return 0.0
    first, rest = events[0], events[1:]
    best = graph.distance(first, graph.boundary) + brute_force_weight(graph, rest)
    for k, other in enumerate(rest):
        remaining = rest[:k] + rest[k + 1 :]
        best = min(best, graph.distance(first, other) + brute_force_weight(graph, remaining))
    return best


def blossom_weight(graph, events):
    """Minimum-weight perfect matching with one private boundary twin per event."""
    g = nx.Graph()
    for a, b in itertools.combinations(events, 2):
        g.add_edge(("e", a), ("e", b), weight=graph.distance(a, b))
        g.add_edge(("b", a), ("b", b), weight=0.0)
    for a in events:
        g.add_edge(("e", a), ("b", a), weight=graph.distance(a, graph.boundary))
    if len(events) == 1:
        return graph.distance(events[0], graph.boundary)
    matching = nx.min_weight_matching(g)
    return sum(g[u][v]["weight"] for u, v in matching)


def test_graph_shape_d3():
    g = _graph(3, "Z", 2)
    assert g.boundary == 8 and g.num_nodes == 9
    kinds = [e.kind for e in g.edges]
    # 9 qubits per layer: 4 bulk pairs + 5 boundary edges; 4 time edges between the layers
    assert kinds.count("time") == 4
    assert kinds.count("space") + kinds.count("boundary") == 18
    assert g.distance(0, 3) == 1.0
    assert g.distance(0, 4) == 1.0  # time edge
    assert g.distance(1, 2) == 2.0


def test_weighted_mode():
    g = _graph(3, "Z", 2, edge_probs={"space": 0.01, "time": 0.02}, weighting="weighted")
    w_time = -math.log(0.02 / 0.98)
    assert g.distance(0, 4) == pytest.approx(w_time, abs=1e-5)
    with pytest.raises(ValueError):
        _graph(3, "Z", 2, weighting="weighted")
    with pytest.raises(ValueError):
        _graph(3, "Z", 2, edge_probs={"space": 0.0, "time": 0.01})
    with pytest.raises(ValueError):
        _graph(3, "Z", 0)


@pytest.mark.parametrize("d, t, m", [(3, "Z", 1), (3, "X", 2), (4, "Z", 2), (4, "X", 2), (5, "Z", 2)])
def test_matches_pairing_enumeration(d, t, m):
    g = _graph(d, t, m)
    rng = random.Random(d * 10 + m)
    for _ in range(40):
        k = rng.randint(0, min(6, g.boundary))
        events = sorted(rng.sample(range(g.boundary), k))
        res = min_weight_match(g, events)
        assert res.total_weight == pytest.approx(brute_force_weight(g, events))


@pytest.mark.parametrize("d, t, m", [(4, "X", 3), (5, "X", 2)])
def test_matches_blossom(d, t, m):
    g = _graph(d, t, m)
    rng = random.Random(7)
    for _ in range(25):
        events = sorted(rng.sample(range(g.boundary), rng.randint(1, 8)))
        assert min_weight_match(g, events).total_weight == pytest.approx(blossom_weight(g, events))


def _min_t_join(g, events, max_size):
    target = set(events)
    for size in range(max_size + 1):
        for subset in itertools.combinations(range(len(g.edges)), size):
            if odd_degree_nodes(g, subset) == target:
                return size
    return None


def test_exhaustive_t_join_d3_m1():
    g = _graph(3, "Z", 1)
    for k in range(g.boundary + 1):
        for events in itertools.combinations(range(g.boundary), k):
            assert min_weight_match(g, events).total_weight == _min_t_join(g, events, 4)


def test_t_join_d3_m2_small_event_sets():
    g = _graph(3, "X", 2)
    for k in (1, 2):
        for events in itertools.combinations(range(g.boundary), k):
            assert min_weight_match(g, events).total_weight == _min_t_join(g, events, 3)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([(3, 1), (3, 2), (3, 3), (4, 1), (4, 2), (4, 3), (5, 1), (5, 2), (5, 3)]),
       st.sampled_from(["X", "Z"]), st.data())
def test_realized_edges_explain_events(dm, t, data):
    d, m = dm
    g = _graph(d, t, m)
    events = data.draw(st.sets(st.integers(0, g.boundary - 1), max_size=6))
    res = min_weight_match(g, events)
    assert odd_degree_nodes(g, res.realized_edges) == set(events)
    # pairing covers every event exactly once
    covered = [x for pair in res.pairing for x in pair if x != g.boundary]
    assert sorted(covered) == sorted(events)


def test_empty_and_invalid_events():
    g = _graph(3, "Z", 2)
    res = min_weight_match(g, [])
    assert res.total_weight == 0 and res.realized_edges == ()
    with pytest.raises(ValueError):
        min_weight_match(g, [g.boundary])
    with pytest.raises(ValueError):
        min_weight_match(g, range(25))


def test_d4_centre_event_degeneracy():
    """A lone event on the central face has several weight-2 explanations; one is picked reproducibly."""
    lay = build_layout(4)
    centre = lay.z_faces.index((2, 2))
    g = build_graph(lay, "Z", 1)
    res = min_weight_match(g, [centre])
    assert res.total_weight == 2.0
    target = np.zeros(len(lay.z_stabilizers), dtype=np.uint8)
    target[centre] = 1
    candidates = []
    for pair in itertools.combinations(range(16), 2):
        e = np.zeros(16, dtype=np.uint8)
        e[list(pair)] = 1
        if np.array_equal(syndrome_of(lay, "Z", e), target):
            candidates.append(tuple(e.tolist()))
    assert len(candidates) >= 3
    assert not any(
        np.array_equal(syndrome_of(lay, "Z", np.eye(16, dtype=np.uint8)[q]), target) for q in range(16)
    )
    correction, _ = commit_oldest_layer(g, res)
    assert tuple(correction.tolist()) in candidates
    again, _ = commit_oldest_layer(g, min_weight_match(build_graph(build_layout(4), "Z", 1), [centre]))
    assert np.array_equal(correction, again)


def test_probability_tie_break_prefers_time_edge():
    """Events at stabilizer 0 in both layers: a time edge (p) beats two boundary edges."""
    g = _graph(3, "Z", 2)
    res = min_weight_match(g, [0, 4])
    correction, delta = commit_oldest_layer(g, res)
    assert res.total_weight == 1.0
    assert not correction.any()
    assert delta.tolist() == [1, 0, 0, 0]


def test_commit_examples_d3_m2():
    g = _graph(3, "Z", 2)
    # two oldest-layer events joined by qubit 3
    corr, delta = commit_oldest_layer(g, min_weight_match(g, [0, 2]))
    assert np.flatnonzero(corr).tolist() == [3] and not delta.any()
    # newest-layer event alone: nothing is committed
    corr, delta = commit_oldest_layer(g, min_weight_match(g, [5]))
    assert not corr.any() and not delta.any()
    # boundary edge in the oldest layer: parallel edges, higher qubit index is lex-smaller
    corr, delta = commit_oldest_layer(g, min_weight_match(g, [0]))
    assert np.flatnonzero(corr).tolist() == [1]


def test_committed_edges_touch_oldest_layer():
    g = _graph(4, "X", 3)
    rng = random.Random(3)
    s = g.num_stabilizers
    for _ in range(30):
        events = rng.sample(range(g.boundary), 5)
        res = min_weight_match(g, events)
        for idx in committed_edges(g, res):
            e = g.edges[idx]
            assert e.u < s or e.v < s


def test_fixed_point_costs_are_integers():
    g = _graph(3, "Z", 2)
    pc = g.path(0, 7)
    assert isinstance(pc.weight, int) and pc.weight % SCALE == 0
    assert g.distance_table.shape == (9, 9)
    assert g.distance_table[0, 7] == g.distance(0, 7)
