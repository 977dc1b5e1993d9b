"""Weighted random-walk sampling of meta-path relations.

Walks follow a meta-path step by step. Steps over a weighted edge type
pick the next edge with probability proportional to exp(weight), so a
rating of 5 dominates a rating of 1; unweighted steps pick uniformly.
A walk that reaches a node with no edges of the required type is a dead
end: it is abandoned (no partial walk) and retried a bounded number of
times.

`sample_relation` is the bulk entry point: it advances all walks of all
start nodes in lockstep over flat adjacency arrays. Randomness is drawn
from one substream per (start node, retry round), derived from the
experiment seed and the start's graph index, so results do not depend on
batch composition: sampling starts separately and merging rows is
identical to one big run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import MetaPathError, UnknownNodeError
from .graph import FORWARD, Edge, HeteroGraph, NodeRef
from .metapath import MetaPath, derive_label, step_endpoints, validate_metapath
from .relation import METHOD_SAMPLED, Provenance, RelationMatrix

# entropy tags keeping walk substreams disjoint from other named streams
_STREAM_WALKS = 101


@dataclass(frozen=True)
class SampleBudget:
    """Walks attempted per start node, and retries allowed per dead-ended walk."""

    walks_per_start: int = 100
    max_retries: int = 5

    def __post_init__(self):
        if self.walks_per_start < 1:
            raise ValueError(f"walks_per_start must be >= 1, got {self.walks_per_start}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")


@dataclass(frozen=True)
class Walk:
    """One completed walk: the visited nodes, first node is the start."""

    nodes: Tuple[NodeRef, ...]
    metapath_label: str


def _pick_uniform(n: int, u: float) -> int:
    # u in [0, 1); guard the pathological round-up at u ~ 1
    return min(int(u * n), n - 1)


def _pick_softmax(weights, u: float) -> int:
    w = np.asarray(weights, dtype=np.float64)
    e = np.exp(w - w.max())
    c = np.cumsum(e)
    return min(int(np.searchsorted(c, u * c[-1], side="right")), len(w) - 1)


def usample(edges: Sequence[Edge], rng: np.random.Generator) -> Edge:
    """Pick one edge uniformly at random."""
    if not edges:
        raise ValueError("cannot sample from an empty edge sequence")
    return edges[_pick_uniform(len(edges), rng.random())]


def wsample(edges: Sequence[Edge], rng: np.random.Generator) -> Edge:
    """Pick edge i with probability exp(w_i) / sum_j exp(w_j).

    The max weight is subtracted before exponentiation; in exact
    arithmetic the distribution is unchanged.
    """
    if not edges:
        raise ValueError("cannot sample from an empty edge sequence")
    weights = []
    for edge in edges:
        if edge.weight is None:
            raise ValueError(f"edge {edge.edge_type} {edge.src.id}->{edge.dst.id} has no weight")
        weights.append(edge.weight)
    return edges[_pick_softmax(weights, rng.random())]


def sample_walk(
    graph: HeteroGraph,
    mp: MetaPath,
    start: NodeRef,
    rng: np.random.Generator,
) -> Optional[Walk]:
    """One random walk guided by the meta-path; None on a dead end.

    Weighted steps (per the schema's weighted flag, at any position in
    the path) use exp-weight sampling; all other steps are uniform.
    """
    node_types = validate_metapath(mp, graph.schema, max_steps=None)
    if start.type != node_types[0]:
        raise MetaPathError(
            f"start node type {start.type!r} does not match meta-path source "
            f"type {node_types[0]!r}"
        )
    if not graph.has_node(start):
        raise UnknownNodeError(f"unknown node {start.type}:{start.id}")

    cur_idx = graph.node_index(start.type, start.id)
    nodes = [start]
    for (et_name, direction), to_type in zip(mp.steps, node_types[1:]):
        et = graph.schema.edge_type(et_name)
        own_direction = direction  # forward adjacency is indexed by src, reverse by dst
        nbrs = graph._neighbors(et_name, own_direction, cur_idx)
        if not nbrs:
            return None
        if et.weighted:
            pick = _pick_softmax([w for _, w in nbrs], rng.random())
        else:
            pick = _pick_uniform(len(nbrs), rng.random())
        cur_idx = nbrs[pick][0]
        nodes.append(NodeRef(to_type, graph.node_id(to_type, cur_idx)))
    return Walk(tuple(nodes), derive_label(mp, graph.schema))


def _start_stream(seed: int, start_index: int, round_no: int) -> np.random.Generator:
    """The walk substream of one start node for one retry round."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=(seed, _STREAM_WALKS, start_index, round_no))
    )


def sample_relation(
    graph: HeteroGraph,
    mp: MetaPath,
    starts: Sequence[NodeRef],
    budget: SampleBudget,
    seed: int,
    label: Optional[str] = None,
) -> RelationMatrix:
    """Estimate a meta-path relation by sampled walks from each start.

    Each start node attempts ``budget.walks_per_start`` walks; every
    completed walk increments the (start, terminal) entry by one. A walk
    slot that dead-ends is retried up to ``budget.max_retries`` times with
    fresh draws, then counted as failed. Failed slots leave no entry; a
    start whose walks all fail simply has an empty row.
    """
    node_types = validate_metapath(mp, graph.schema, max_steps=None)
    src_type, dst_type = node_types[0], node_types[-1]
    start_indices = set()
    for node in starts:
        if node.type != src_type:
            raise MetaPathError(
                f"start node type {node.type!r} does not match meta-path source "
                f"type {src_type!r}"
            )
        start_indices.add(graph.node_index(node.type, node.id))
    start_idx = np.array(sorted(start_indices), dtype=np.int64)
    n_starts = len(start_idx)
    n_steps = len(mp.steps)
    S = budget.walks_per_start

    csr_steps = [graph.csr(et_name, direction) for et_name, direction in mp.steps]
    weighted_steps = [graph.schema.edge_type(et).weighted for et, _ in mp.steps]

    # slot s of start i occupies flat position i * S + s
    terminals = np.full(n_starts * S, -1, dtype=np.int64)
    pending = np.arange(n_starts * S, dtype=np.int64)

    for round_no in range(budget.max_retries + 1):
        if len(pending) == 0:
            break
        # pending stays sorted, so each start's slots form a contiguous run
        pstart = pending // S
        pslot = pending % S
        pending_starts = np.unique(pstart)
        left = np.searchsorted(pstart, pending_starts, side="left")
        right = np.searchsorted(pstart, pending_starts, side="right")
        # canonical (S, n_steps) block per participating start; addressing is
        # by slot and step, so retries are batch-composition independent
        u = np.empty((len(pending), n_steps), dtype=np.float64)
        for j, i in enumerate(pending_starts):
            block = _start_stream(seed, int(start_idx[i]), round_no).random((S, n_steps))
            rows = slice(left[j], right[j])
            u[rows] = block[pslot[rows]]

        cur = start_idx[pending // S].copy()
        alive = np.ones(len(pending), dtype=bool)
        for step in range(n_steps):
            csr = csr_steps[step]
            cur_alive = cur[alive]
            deg = csr.offsets[cur_alive + 1] - csr.offsets[cur_alive]
            ok = deg > 0
            if not ok.all():
                alive_pos = np.flatnonzero(alive)
                alive[alive_pos[~ok]] = False
                cur_alive = cur_alive[ok]
                deg = deg[ok]
            if len(cur_alive) == 0:
                break
            uu = u[alive, step]
            if weighted_steps[step]:
                keys = cur_alive + uu
                edge_pos = np.searchsorted(csr.seg_keys, keys, side="right")
            else:
                pick = np.minimum((uu * deg).astype(np.int64), deg - 1)
                edge_pos = csr.offsets[cur_alive] + pick
            cur[alive] = csr.targets[edge_pos]

        terminals[pending[alive]] = cur[alive]
        pending = pending[~alive]

    failures = len(pending)
    done = terminals >= 0
    if done.any():
        rows = start_idx[np.flatnonzero(done) // S]
        composite = rows * np.int64(graph.num_nodes(dst_type)) + terminals[done]
        uniq, counts = np.unique(composite, return_counts=True)
        src_entries = uniq // graph.num_nodes(dst_type)
        dst_entries = uniq % graph.num_nodes(dst_type)
        values = counts.astype(np.float64)
    else:
        src_entries = dst_entries = np.empty(0, dtype=np.int64)
        values = np.empty(0, dtype=np.float64)

    prov = Provenance(
        label=label or derive_label(mp, graph.schema),
        method=METHOD_SAMPLED,
        walks_per_start=S,
        seed=seed,
        failures=failures,
    )
    return RelationMatrix(
        src_type,
        dst_type,
        list(graph.node_ids(src_type)),
        list(graph.node_ids(dst_type)),
        src_entries,
        dst_entries,
        values,
        prov,
    )
