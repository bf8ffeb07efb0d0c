"""Finite labeled digraphs, node sets as int bitmasks, and JSON I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property


class GraphError(ValueError):
    pass


# A NodeSet is a plain int used as a bitmask over node indices 0..n-1.


def nodes_of(mask: int):
    """Iterate the node indices present in a bitmask."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def mask_of(nodes) -> int:
    out = 0
    for n in nodes:
        out |= 1 << n
    return out


@dataclass(frozen=True)
class LabeledGraph:
    props: tuple[str, ...]
    node_ids: tuple[str, ...]
    labels: tuple[frozenset[str], ...]
    adj: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @cached_property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    @cached_property
    def adj_masks(self) -> tuple[int, ...]:
        return tuple(mask_of(out) for out in self.adj)

    @cached_property
    def _prop_masks(self) -> dict[str, int]:
        out = {p: 0 for p in self.props}
        for i, lab in enumerate(self.labels):
            for p in lab:
                out[p] |= 1 << i
        return out

    def prop_mask(self, p: str) -> int:
        try:
            return self._prop_masks[p]
        except KeyError:
            raise GraphError(f"proposition {p!r} not in universe {list(self.props)}")

    def out_neighbors(self, n: int) -> list[int]:
        if not 0 <= n < self.n:
            raise GraphError(f"node index {n} out of range")
        return list(self.adj[n])


def make_graph(props, node_ids, labels, edges) -> LabeledGraph:
    """Validate and build a graph from raw pieces (edges as index pairs)."""
    props = tuple(sorted(set(props)))
    node_ids = tuple(node_ids)
    if len(set(node_ids)) != len(node_ids):
        raise GraphError("duplicate node id")
    n = len(node_ids)
    labels = tuple(frozenset(l) for l in labels)
    if len(labels) != n:
        raise GraphError("labels/nodes length mismatch")
    for lab in labels:
        for p in lab:
            if p not in props:
                raise GraphError(f"label {p!r} outside proposition universe")
    out: list[list[int]] = [[] for _ in range(n)]
    seen = set()
    for a, b in edges:
        if not (0 <= a < n and 0 <= b < n):
            raise GraphError(f"edge ({a},{b}) endpoint out of range")
        if (a, b) in seen:
            raise GraphError(f"duplicate edge ({a},{b})")
        seen.add((a, b))
        out[a].append(b)
    return LabeledGraph(props, node_ids, labels, tuple(tuple(o) for o in out))


def graph_from_json(data) -> LabeledGraph:
    if not isinstance(data, dict):
        raise GraphError("graph JSON must be an object")
    try:
        props = data["props"]
        nodes = data["nodes"]
        edges = data["edges"]
    except (KeyError, TypeError) as e:
        raise GraphError(f"missing graph field: {e}")
    node_ids = []
    labels = []
    for nd in nodes:
        node_ids.append(str(nd["id"]))
        labels.append(nd.get("props", []))
    id_to_idx = {}
    for i, nid in enumerate(node_ids):
        if nid in id_to_idx:
            raise GraphError(f"duplicate node id {nid!r}")
        id_to_idx[nid] = i
    idx_edges = []
    for e in edges:
        a, b = str(e[0]), str(e[1])
        if a not in id_to_idx or b not in id_to_idx:
            raise GraphError(f"edge ({a!r},{b!r}) references unknown node")
        idx_edges.append((id_to_idx[a], id_to_idx[b]))
    return make_graph(props, node_ids, labels, idx_edges)


def graph_to_json(G: LabeledGraph) -> dict:
    return {
        "props": list(G.props),
        "nodes": [
            {"id": nid, "props": sorted(G.labels[i])}
            for i, nid in enumerate(G.node_ids)
        ],
        "edges": [
            [G.node_ids[a], G.node_ids[b]]
            for a in range(G.n)
            for b in G.adj[a]
        ],
    }


def load_graph(path) -> LabeledGraph:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise GraphError(f"cannot read graph file: {e}")
    except json.JSONDecodeError as e:
        raise GraphError(f"malformed graph JSON: {e}")
    return graph_from_json(data)


def save_graph(G: LabeledGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(graph_to_json(G), fh, indent=2)
        fh.write("\n")


def disjoint_union(G: LabeledGraph, H: LabeledGraph) -> LabeledGraph:
    if G.props != H.props:
        raise GraphError("disjoint union requires the same proposition universe")
    off = G.n
    taken = set(G.node_ids)
    new_ids = list(G.node_ids)
    for nid in H.node_ids:
        cand = nid
        while cand in taken:
            cand = cand + "'"
        taken.add(cand)
        new_ids.append(cand)
    labels = G.labels + H.labels
    adj = G.adj + tuple(tuple(b + off for b in out) for out in H.adj)
    return LabeledGraph(G.props, tuple(new_ids), labels, adj)
