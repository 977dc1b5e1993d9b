"""Typed heterogeneous multigraph storage.

Nodes carry opaque string identifiers and are mapped to dense integer
indices per node type. Edges are stored in forward and reverse adjacency
lists per edge type, in insertion order. Graphs are mutable only while
loading; :func:`load_graph` returns a frozen graph that is safe for
concurrent read-only traversal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .errors import GraphLoadError, SchemaError, UnknownEdgeTypeError, UnknownNodeError
from .schema import NetworkSchema

FORWARD = "forward"
REVERSE = "reverse"

_DIRECTIONS = (FORWARD, REVERSE)


@dataclass(frozen=True)
class NodeRef:
    """A node identified by its type and opaque string id."""

    type: str
    id: str


@dataclass(frozen=True)
class Edge:
    """One stored edge; ``weight`` is None exactly when the type is unweighted."""

    edge_type: str
    src: NodeRef
    dst: NodeRef
    weight: Optional[float] = None


@dataclass(frozen=True)
class CsrAdjacency:
    """Flat adjacency view for one (edge type, direction).

    ``offsets`` has length ``num_nodes + 1``; the neighbors of node ``i``
    are ``targets[offsets[i]:offsets[i+1]]`` in insertion order. For
    weighted types, ``cum_probs`` holds the per-node cumulative softmax
    of edge weights (last entry of every segment is exactly 1.0) and
    ``seg_keys[e] = source_node_of(e) + cum_probs[e]``, which is globally
    ascending and supports one-shot inverse-CDF sampling via searchsorted.
    """

    offsets: np.ndarray
    targets: np.ndarray
    weights: Optional[np.ndarray]
    cum_probs: Optional[np.ndarray]
    seg_keys: Optional[np.ndarray]

    @property
    def degrees(self) -> np.ndarray:
        return self.offsets[1:] - self.offsets[:-1]


class HeteroGraph:
    """Adjacency store indexed by (node, edge type) with reverse indices."""

    def __init__(self, schema: NetworkSchema):
        self.schema = schema
        self._ids = {nt: [] for nt in schema.node_types}
        self._index = {nt: {} for nt in schema.node_types}
        # adjacency[et][direction][node_idx] = list[(neighbor_idx, weight)]
        self._adj = {
            name: {FORWARD: [], REVERSE: []} for name in schema.edge_types
        }
        self._edge_counts = {name: 0 for name in schema.edge_types}
        self._frozen = False
        self._csr_cache = {}

    # -- node bookkeeping -------------------------------------------------

    def _intern_node(self, node_type: str, node_id: str) -> int:
        idx = self._index[node_type].get(node_id)
        if idx is None:
            idx = len(self._ids[node_type])
            self._ids[node_type].append(node_id)
            self._index[node_type][node_id] = idx
        return idx

    def node_index(self, node_type: str, node_id: str) -> int:
        if node_type not in self._index:
            raise UnknownNodeError(f"unknown node type {node_type!r}")
        idx = self._index[node_type].get(node_id)
        if idx is None:
            raise UnknownNodeError(f"unknown node {node_type}:{node_id}")
        return idx

    def node_id(self, node_type: str, idx: int) -> str:
        return self._ids[node_type][idx]

    def node_ids(self, node_type: str) -> Sequence[str]:
        if node_type not in self._ids:
            raise UnknownNodeError(f"unknown node type {node_type!r}")
        return self._ids[node_type]

    def num_nodes(self, node_type: str) -> int:
        return len(self.node_ids(node_type))

    def total_nodes(self) -> int:
        return sum(len(ids) for ids in self._ids.values())

    def has_node(self, node: NodeRef) -> bool:
        return node.type in self._index and node.id in self._index[node.type]

    # -- edge bookkeeping -------------------------------------------------

    def _edge_type(self, name: str):
        if name not in self._adj:
            raise UnknownEdgeTypeError(f"unknown edge type {name!r}")
        return self.schema.edge_types[name]

    def _add_edge(self, et_name: str, src_idx: int, dst_idx: int, weight):
        if self._frozen:
            raise GraphLoadError("graph is frozen; no mutation after load")
        fwd = self._adj[et_name][FORWARD]
        rev = self._adj[et_name][REVERSE]
        while len(fwd) <= src_idx:
            fwd.append([])
        while len(rev) <= dst_idx:
            rev.append([])
        fwd[src_idx].append((dst_idx, weight))
        rev[dst_idx].append((src_idx, weight))
        self._edge_counts[et_name] += 1

    def _freeze(self):
        self._frozen = True

    def edge_count(self, et_name: str) -> int:
        self._edge_type(et_name)
        return self._edge_counts[et_name]

    def total_edges(self) -> int:
        return sum(self._edge_counts.values())

    def _neighbors(self, et_name: str, direction: str, node_idx: int):
        """Raw (neighbor_idx, weight) pairs; empty list beyond adjacency end."""
        rows = self._adj[et_name][direction]
        if node_idx >= len(rows):
            return []
        return rows[node_idx]

    def get_edges(self, node: NodeRef, et_name: str, direction: str = FORWARD):
        """All edges of type ``et_name`` incident to ``node`` in ``direction``.

        Forward queries require the node to be the edge source; reverse
        queries require it to be the destination. Insertion order.
        """
        et = self._edge_type(et_name)
        if direction not in _DIRECTIONS:
            raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
        if not self.has_node(node):
            raise UnknownNodeError(f"unknown node {node.type}:{node.id}")
        own_type = et.src if direction == FORWARD else et.dst
        other_type = et.dst if direction == FORWARD else et.src
        if node.type != own_type:
            return []
        idx = self._index[node.type][node.id]
        edges = []
        for nbr_idx, weight in self._neighbors(et_name, direction, idx):
            other = NodeRef(other_type, self._ids[other_type][nbr_idx])
            if direction == FORWARD:
                edges.append(Edge(et_name, node, other, weight))
            else:
                edges.append(Edge(et_name, other, node, weight))
        return edges

    def degree(self, node: NodeRef, et_name: str, direction: str = FORWARD) -> int:
        et = self._edge_type(et_name)
        if direction not in _DIRECTIONS:
            raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
        if not self.has_node(node):
            raise UnknownNodeError(f"unknown node {node.type}:{node.id}")
        own_type = et.src if direction == FORWARD else et.dst
        if node.type != own_type:
            return 0
        return len(self._neighbors(et_name, direction, self._index[node.type][node.id]))

    def iter_edges(self, et_name: str):
        """Yield (src_idx, dst_idx, weight) for every edge of the type."""
        self._edge_type(et_name)
        for src_idx, row in enumerate(self._adj[et_name][FORWARD]):
            for dst_idx, weight in row:
                yield src_idx, dst_idx, weight

    # -- flat views for bulk traversal -------------------------------------

    def csr(self, et_name: str, direction: str = FORWARD) -> CsrAdjacency:
        """Cached flat adjacency for vectorized walking. Requires a frozen graph."""
        if not self._frozen:
            raise GraphLoadError("csr views are only available on frozen graphs")
        key = (et_name, direction)
        cached = self._csr_cache.get(key)
        if cached is not None:
            return cached
        et = self._edge_type(et_name)
        own_type = et.src if direction == FORWARD else et.dst
        n = self.num_nodes(own_type)
        rows = self._adj[et_name][direction]
        offsets = np.zeros(n + 1, dtype=np.int64)
        for i in range(min(len(rows), n)):
            offsets[i + 1] = len(rows[i])
        np.cumsum(offsets, out=offsets)
        nnz = int(offsets[-1])
        targets = np.empty(nnz, dtype=np.int64)
        weights = np.empty(nnz, dtype=np.float64) if et.weighted else None
        pos = 0
        for i in range(min(len(rows), n)):
            for nbr_idx, w in rows[i]:
                targets[pos] = nbr_idx
                if weights is not None:
                    weights[pos] = w
                pos += 1
        cum_probs = seg_keys = None
        if et.weighted:
            cum_probs, seg_keys = _segment_softmax_cum(offsets, weights)
        view = CsrAdjacency(offsets, targets, weights, cum_probs, seg_keys)
        self._csr_cache[key] = view
        return view


def _segment_softmax_cum(offsets: np.ndarray, weights: np.ndarray):
    """Per-node cumulative softmax over edge weights, in CSR layout.

    Uses max-weight subtraction per segment for numerical stability and
    pins every segment's final cumulative value to exactly 1.0 so that
    inverse-CDF keys never cross into the next node's segment.
    """
    n = len(offsets) - 1
    nnz = len(weights)
    cum = np.empty(nnz, dtype=np.float64)
    seg_keys = np.empty(nnz, dtype=np.float64)
    for i in range(n):
        lo, hi = offsets[i], offsets[i + 1]
        if lo == hi:
            continue
        w = weights[lo:hi]
        e = np.exp(w - w.max())
        c = np.cumsum(e)
        c /= c[-1]
        c[-1] = 1.0
        cum[lo:hi] = c
        seg_keys[lo:hi] = i + c
    return cum, seg_keys


def load_graph(
    schema: NetworkSchema,
    edge_records: Iterable[Tuple],
    on_duplicate: str = "reject",
) -> HeteroGraph:
    """Build a frozen graph from ``(edge_type, src_id, dst_id[, weight])`` records.

    Nodes are created implicitly from edge endpoints. Duplicate
    (type, src, dst) records are rejected by default; with
    ``on_duplicate="keep-last"`` the final record's weight wins and the
    edge keeps its first position in insertion order.
    """
    if on_duplicate not in ("reject", "keep-last"):
        raise ValueError(f"on_duplicate must be 'reject' or 'keep-last', got {on_duplicate!r}")
    graph = HeteroGraph(schema)
    seen = {}
    ordered = []
    for recno, record in enumerate(edge_records, start=1):
        where = f"record {recno}"
        if len(record) == 3:
            et_name, src_id, dst_id = record
            weight = None
        elif len(record) == 4:
            et_name, src_id, dst_id, weight = record
        else:
            raise GraphLoadError(f"{where}: expected 3 or 4 fields, got {len(record)}")
        if not schema.has_edge_type(et_name):
            raise UnknownEdgeTypeError(f"{where}: unknown edge type {et_name!r}")
        et = schema.edge_types[et_name]
        if not src_id or not dst_id:
            raise GraphLoadError(f"{where}: empty node identifier")
        if et.weighted:
            if weight is None:
                raise GraphLoadError(f"{where}: missing weight for weighted type {et_name!r}")
            weight = float(weight)
            lo, hi = et.weight_range
            if not lo <= weight <= hi:
                raise GraphLoadError(
                    f"{where}: weight {weight:g} outside range [{lo:g}, {hi:g}] "
                    f"for type {et_name!r}"
                )
        elif weight is not None:
            raise GraphLoadError(f"{where}: weight given for unweighted type {et_name!r}")
        key = (et_name, src_id, dst_id)
        if key in seen:
            if on_duplicate == "reject":
                raise GraphLoadError(f"{where}: duplicate edge {et_name} {src_id}->{dst_id}")
            ordered[seen[key]] = (et_name, src_id, dst_id, weight)
        else:
            seen[key] = len(ordered)
            ordered.append((et_name, src_id, dst_id, weight))
    for et_name, src_id, dst_id, weight in ordered:
        et = schema.edge_types[et_name]
        src_idx = graph._intern_node(et.src, src_id)
        dst_idx = graph._intern_node(et.dst, dst_id)
        graph._add_edge(et_name, src_idx, dst_idx, weight)
    graph._freeze()
    return graph


def k_core_filter(graph: HeteroGraph, et_name: str, k: int) -> HeteroGraph:
    """Iteratively drop endpoint nodes with degree < k under one edge type.

    Removal cascades: a dropped node loses its edges of every type.
    Node types not touching ``et_name`` keep their full node sets, with
    their edges restricted to surviving endpoints. The result is a new
    frozen graph; the fixpoint is independent of removal order.
    """
    et = graph._edge_type(et_name)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")

    # degree under et per (type, idx); handles src type == dst type
    deg = {}
    for t in (et.src, et.dst):
        for idx in range(graph.num_nodes(t)):
            deg[(t, idx)] = 0
    for src_idx, dst_idx, _ in graph.iter_edges(et_name):
        deg[(et.src, src_idx)] += 1
        deg[(et.dst, dst_idx)] += 1

    alive = {key: True for key in deg}
    queue = [key for key, d in deg.items() if d < k]
    while queue:
        key = queue.pop()
        if not alive[key]:
            continue
        alive[key] = False
        t, idx = key
        if t == et.src:
            for nbr_idx, _ in graph._neighbors(et_name, FORWARD, idx):
                nbr = (et.dst, nbr_idx)
                if alive[nbr]:
                    deg[nbr] -= 1
                    if deg[nbr] < k:
                        queue.append(nbr)
        if t == et.dst:
            for nbr_idx, _ in graph._neighbors(et_name, REVERSE, idx):
                nbr = (et.src, nbr_idx)
                if alive[nbr]:
                    deg[nbr] -= 1
                    if deg[nbr] < k:
                        queue.append(nbr)

    def node_survives(t: str, idx: int) -> bool:
        return alive.get((t, idx), True)

    result = HeteroGraph(graph.schema)
    # survivors keep their ids; core-type nodes only if alive, others always
    for t in graph.schema.node_types:
        for idx in range(graph.num_nodes(t)):
            if node_survives(t, idx):
                result._intern_node(t, graph.node_id(t, idx))
    for name, other in graph.schema.edge_types.items():
        for src_idx, dst_idx, weight in graph.iter_edges(name):
            if node_survives(other.src, src_idx) and node_survives(other.dst, dst_idx):
                new_src = result._index[other.src][graph.node_id(other.src, src_idx)]
                new_dst = result._index[other.dst][graph.node_id(other.dst, dst_idx)]
                result._add_edge(name, new_src, new_dst, weight)
    result._freeze()
    return result


# -- edge-list files -------------------------------------------------------


def read_edge_list(path):
    """Read one edge-list file: ``src<TAB>dst[<TAB>weight]`` per line.

    Returns a list of ``(lineno, src_id, dst_id, weight_or_None)``.
    ``#`` starts a comment; blank lines are skipped.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            stripped = line.split("#", 1)[0].rstrip()
            if not stripped.strip():
                continue
            parts = stripped.split("\t")
            if len(parts) == 2:
                src, dst = parts
                weight = None
            elif len(parts) == 3:
                src, dst = parts[0], parts[1]
                try:
                    weight = float(parts[2])
                except ValueError:
                    raise GraphLoadError(
                        f"{path}:{lineno}: non-numeric weight {parts[2]!r}"
                    ) from None
            else:
                raise GraphLoadError(
                    f"{path}:{lineno}: expected 2 or 3 tab-separated fields, got {len(parts)}"
                )
            if not src or not dst:
                raise GraphLoadError(f"{path}:{lineno}: empty node identifier")
            rows.append((lineno, src, dst, weight))
    return rows


def load_graph_files(
    schema: NetworkSchema,
    edge_list_paths,
    on_duplicate: str = "reject",
) -> HeteroGraph:
    """Load a graph from one edge-list file per edge type.

    ``edge_list_paths`` maps edge type name to file path. Load errors are
    reported with file and line number.
    """
    records = []
    origins = []
    for et_name, path in edge_list_paths.items():
        if not schema.has_edge_type(et_name):
            raise UnknownEdgeTypeError(f"unknown edge type {et_name!r} in edge list map")
        for lineno, src, dst, weight in read_edge_list(path):
            records.append((et_name, src, dst, weight) if weight is not None else (et_name, src, dst))
            origins.append(f"{path}:{lineno}")
    try:
        return load_graph(schema, records, on_duplicate=on_duplicate)
    except GraphLoadError as exc:
        msg = str(exc)
        if msg.startswith("record "):
            recno = int(msg.split(":", 1)[0].split()[1])
            detail = msg.split(": ", 1)[1]
            raise GraphLoadError(f"{origins[recno - 1]}: {detail}") from None
        raise


def format_edge_list(graph: HeteroGraph, et_name: str) -> str:
    """Render the canonical edge-list text for one edge type.

    Insertion order; weights use shortest round-trip float formatting so
    load -> save is a fixpoint.
    """
    et = graph._edge_type(et_name)
    lines = []
    for src_idx, dst_idx, weight in graph.iter_edges(et_name):
        src = graph.node_id(et.src, src_idx)
        dst = graph.node_id(et.dst, dst_idx)
        if weight is None:
            lines.append(f"{src}\t{dst}")
        else:
            lines.append(f"{src}\t{dst}\t{weight!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def save_edge_list(graph: HeteroGraph, et_name: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_edge_list(graph, et_name))
