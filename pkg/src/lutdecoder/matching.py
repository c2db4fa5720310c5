"""Space-time decoding graphs and exact minimum-weight matching with boundary.

Node ``k * s + i`` is stabilizer ``i`` in layer ``k`` (``s`` stabilizers per
layer, layer 0 oldest), so a window address bit ``b`` is node ``b``. The
virtual boundary node is ``m * s``.

Costs are compared as exact fixed-point integers so that sums never depend on
evaluation order. Ties are broken, in order, by total weight, by
``-log`` probability of the realized edges, and by the realized correction
written as a bit string (layer 0 qubit 0 first, then qubit 1, ..., then layer
1): the lexicographically smallest string wins. That string is kept as an
integer whose most significant bit is (layer 0, qubit 0), so "smaller integer"
is "lexicographically smaller".
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Literal, Mapping

import numpy as np

from .layout import CodeLayout, check_stab_type
from .noise import effective_edge_probabilities

SCALE = 1 << 20
DEFAULT_REFERENCE_P = 1e-2
MAX_EVENTS = 24

EdgeKind = Literal["space", "time", "boundary"]


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    kind: EdgeKind
    qubit: int | None
    weight: float
    probability: float


@dataclass(frozen=True)
class PathCost:
    weight: int  # fixed-point, SCALE per unit
    neg_log_prob: int  # fixed-point
    key: int  # realized correction, MSB = (layer 0, qubit 0)
    edges: tuple[int, ...]


class DecodingGraph:
    """Matching graph for one stabilizer type over ``layers`` detection layers."""

    def __init__(
        self,
        layout: CodeLayout,
        stab_type: str,
        layers: int,
        edge_probs: Mapping[str, float] | None = None,
        weighting: Literal["unit", "weighted"] = "unit",
    ):
        if layers < 1:
            raise ValueError(f"window must have at least one layer, got {layers}")
        if weighting not in ("unit", "weighted"):
            raise ValueError(f"unknown weighting {weighting!r}")
        if edge_probs is None:
            if weighting == "weighted":
                raise ValueError("weighted mode needs edge probabilities")
            edge_probs = effective_edge_probabilities(DEFAULT_REFERENCE_P)
        if not edge_probs:
            raise ValueError("edge probabilities must not be empty")
        for kind in ("space", "time"):
            q = edge_probs.get(kind)
            if q is None or not 0.0 < q <= 1.0:
                raise ValueError(f"edge probability for {kind!r} must lie in (0, 1], got {q}")
            if weighting == "weighted" and q >= 0.5:
                raise ValueError(f"weighted mode needs {kind!r} probability below 0.5, got {q}")

        self.layout = layout
        self.stab_type = check_stab_type(stab_type)
        self.layers = layers
        self.weighting = weighting
        self.edge_probs = dict(edge_probs)
        self.num_stabilizers = layout.num_stabilizers(self.stab_type)
        self.num_qubits = layout.data_qubits
        self.boundary = layers * self.num_stabilizers
        self.num_nodes = self.boundary + 1
        self._key_bits = layers * self.num_qubits
        self.edges: list[Edge] = self._build_edges()
        self._adjacency: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for idx, e in enumerate(self.edges):
            self._adjacency[e.u].append(idx)
            self._adjacency[e.v].append(idx)
        self._paths = self._all_pairs_paths()

    # -- construction -----------------------------------------------------

    def _edge_weight(self, q: float) -> float:
        if self.weighting == "unit":
            return 1.0
        return -math.log(q / (1.0 - q))

    def _build_edges(self) -> list[Edge]:
        s = self.num_stabilizers
        q_space = self.edge_probs["space"]
        q_time = self.edge_probs["time"]
        w_space = self._edge_weight(q_space)
        w_time = self._edge_weight(q_time)
        touching = self.layout.qubit_stabilizers(self.stab_type)
        edges: list[Edge] = []
        for k in range(self.layers):
            for q, stabs in enumerate(touching):
                if len(stabs) == 2:
                    edges.append(Edge(k * s + stabs[0], k * s + stabs[1], "space", q, w_space, q_space))
                elif len(stabs) == 1:
                    edges.append(Edge(k * s + stabs[0], self.boundary, "boundary", q, w_space, q_space))
        for k in range(self.layers - 1):
            for i in range(s):
                edges.append(Edge(k * s + i, (k + 1) * s + i, "time", None, w_time, q_time))
        return edges

    def node_layer(self, node: int) -> int | None:
        return None if node == self.boundary else node // self.num_stabilizers

    def _edge_key(self, idx: int) -> int:
        e = self.edges[idx]
        if e.qubit is None:
            return 0
        layer = e.u // self.num_stabilizers
        return 1 << (self._key_bits - 1 - (layer * self.num_qubits + e.qubit))

    def _edge_costs(self, idx: int) -> tuple[int, int]:
        e = self.edges[idx]
        return round(e.weight * SCALE), round(-math.log(e.probability) * SCALE)

    def _all_pairs_paths(self) -> dict[tuple[int, int], PathCost]:
        costs = [self._edge_costs(i) for i in range(len(self.edges))]
        keys = [self._edge_key(i) for i in range(len(self.edges))]
        paths: dict[tuple[int, int], PathCost] = {}
        for src in range(self.num_nodes):
            # label-setting search ordered by (weight, -log prob, node sequence, correction)
            heap = [(0, 0, (src,), 0, ())]
            done: set[int] = set()
            while heap:
                w, l, seq, key, path = heapq.heappop(heap)
                node = seq[-1]
                if node in done:
                    continue
                done.add(node)
                paths[(src, node)] = PathCost(w, l, key, path)
                for idx in self._adjacency[node]:
                    e = self.edges[idx]
                    nxt = e.v if e.u == node else e.u
                    if nxt in done:
                        continue
                    ew, el = costs[idx]
                    heapq.heappush(heap, (w + ew, l + el, seq + (nxt,), key ^ keys[idx], path + (idx,)))
        return paths

    # -- queries ----------------------------------------------------------

    def path(self, a: int, b: int) -> PathCost:
        """Representative shortest path between two nodes (``a == b`` gives the empty path)."""
        return self._paths[(a, b)]

    def distance(self, a: int, b: int) -> float:
        return self._paths[(a, b)].weight / SCALE

    @property
    def distance_table(self) -> np.ndarray:
        n = self.num_nodes
        table = np.zeros((n, n))
        for (a, b), pc in self._paths.items():
            table[a, b] = pc.weight / SCALE
        return table

    def events_from_address(self, address: int) -> list[int]:
        nodes = []
        bit = 0
        while address:
            if address & 1:
                nodes.append(bit)
            address >>= 1
            bit += 1
        if nodes and nodes[-1] >= self.boundary:
            raise ValueError("address wider than the window")
        return nodes

    def correction_from_key(self, key: int, layer: int = 0) -> np.ndarray:
        """Per-qubit correction bits of one layer, decoded from a correction key."""
        top = self._key_bits - 1 - layer * self.num_qubits
        return np.array([(key >> (top - q)) & 1 for q in range(self.num_qubits)], dtype=np.uint8)


def build_graph(
    layout: CodeLayout,
    stab_type: str,
    m: int,
    edge_probs: Mapping[str, float] | None = None,
    weighting: Literal["unit", "weighted"] = "unit",
) -> DecodingGraph:
    return DecodingGraph(layout, stab_type, m, edge_probs, weighting)


@dataclass(frozen=True)
class MatchingResult:
    pairing: tuple[tuple[int, int], ...]  # (event, partner); partner may be the boundary node
    realized_edges: tuple[int, ...]  # edge indices, with repetition
    total_weight: float
    neg_log_prob: float = 0.0
    key: int = field(default=0, repr=False)


def min_weight_match(graph: DecodingGraph, events: Iterable[int]) -> MatchingResult:
    """Exact minimum-weight matching of ``events`` (each to another event or the boundary).

    Subset dynamic programming over the events: the lowest unmatched event is
    paired with the boundary first, then with every other event in ascending
    order; a candidate replaces the incumbent only when strictly better under
    (weight, -log probability, correction key).
    """
    ev = sorted(set(events))
    if len(ev) > MAX_EVENTS:
        raise ValueError(f"at most {MAX_EVENTS} events supported, got {len(ev)}")
    if ev and (ev[0] < 0 or ev[-1] >= graph.boundary):
        raise ValueError("events must be non-boundary nodes of the graph")
    bnd = graph.boundary
    to_bnd = [graph.path(e, bnd) for e in ev]

    @lru_cache(maxsize=None)
    def solve(mask: int) -> tuple[int, int, int, int]:
        if not mask:
            return (0, 0, 0, -2)
        i = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << i)
        sw, sl, sk, _ = solve(rest)
        pc = to_bnd[i]
        best = (pc.weight + sw, pc.neg_log_prob + sl, pc.key ^ sk, -1)
        r = rest
        while r:
            j = (r & -r).bit_length() - 1
            r ^= 1 << j
            sw, sl, sk, _ = solve(rest ^ (1 << j))
            pc = graph.path(ev[i], ev[j])
            cand = (pc.weight + sw, pc.neg_log_prob + sl, pc.key ^ sk, j)
            if cand[:3] < best[:3]:
                best = cand
        return best

    full = (1 << len(ev)) - 1
    total_w, total_l, key, _ = solve(full)
    pairing: list[tuple[int, int]] = []
    edges: list[int] = []
    mask = full
    while mask:
        i = (mask & -mask).bit_length() - 1
        j = solve(mask)[3]
        if j == -1:
            pairing.append((ev[i], bnd))
            edges.extend(graph.path(ev[i], bnd).edges)
            mask ^= 1 << i
        else:
            pairing.append((ev[i], ev[j]))
            edges.extend(graph.path(ev[i], ev[j]).edges)
            mask ^= (1 << i) | (1 << j)
    return MatchingResult(
        pairing=tuple(pairing),
        realized_edges=tuple(edges),
        total_weight=total_w / SCALE,
        neg_log_prob=total_l / SCALE,
        key=key,
    )


def committed_edges(graph: DecodingGraph, match: MatchingResult) -> list[int]:
    """Realized edges with at least one endpoint in the oldest layer."""
    s = graph.num_stabilizers
    out = []
    for idx in match.realized_edges:
        e = graph.edges[idx]
        if e.u < s or (e.v < s):
            out.append(idx)
    return out


def commit_oldest_layer(graph: DecodingGraph, match: MatchingResult) -> tuple[np.ndarray, np.ndarray]:
    """Correction for the oldest layer and the event toggles it pushes into layer 1."""
    s = graph.num_stabilizers
    correction = np.zeros(graph.num_qubits, dtype=np.uint8)
    state_delta = np.zeros(s, dtype=np.uint8)
    for idx in committed_edges(graph, match):
        e = graph.edges[idx]
        if e.qubit is not None:
            correction[e.qubit] ^= 1
        for node in (e.u, e.v):
            if s <= node < 2 * s and node != graph.boundary:
                state_delta[node - s] ^= 1
    return correction, state_delta


def odd_degree_nodes(graph: DecodingGraph, edge_indices: Iterable[int]) -> set[int]:
    """Non-boundary nodes touched an odd number of times by ``edge_indices``."""
    odd: set[int] = set()
    for idx in edge_indices:
        e = graph.edges[idx]
        for node in (e.u, e.v):
            if node != graph.boundary:
                odd ^= {node}
    return odd
