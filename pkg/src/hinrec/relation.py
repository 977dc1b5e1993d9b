"""Sparse (source entity, destination entity) -> count relations.

A RelationMatrix is the materialized form of a meta-path (or of a direct
edge type): non-negative values indexed by dense per-type entity indices,
with the id lists needed to resolve indices back to external identifiers.
Provenance records how the relation was generated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from .errors import RelationFormatError
from .graph import HeteroGraph

METHOD_DIRECT = "direct"
METHOD_FULL = "full"
METHOD_SAMPLED = "sampled"


@dataclass(frozen=True)
class Provenance:
    """How a relation was generated; stamped into the on-disk header."""

    label: str
    method: str
    walks_per_start: Optional[int] = None
    seed: Optional[int] = None
    failures: int = 0


class RelationMatrix:
    """Immutable sparse relation with external-id resolution.

    Entries are kept as parallel arrays sorted by (src index, dst index);
    all stored values are strictly positive.
    """

    def __init__(
        self,
        src_type: str,
        dst_type: str,
        src_ids: Sequence[str],
        dst_ids: Sequence[str],
        src_idx: np.ndarray,
        dst_idx: np.ndarray,
        values: np.ndarray,
        provenance: Provenance,
        num_src: Optional[int] = None,
        num_dst: Optional[int] = None,
    ):
        self.src_type = src_type
        self.dst_type = dst_type
        self.src_ids = list(src_ids)
        self.dst_ids = list(dst_ids)
        self.num_src = num_src if num_src is not None else len(self.src_ids)
        self.num_dst = num_dst if num_dst is not None else len(self.dst_ids)
        self.provenance = provenance

        src_idx = np.asarray(src_idx, dtype=np.int64)
        dst_idx = np.asarray(dst_idx, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if not (len(src_idx) == len(dst_idx) == len(values)):
            raise ValueError("entry arrays must have equal length")
        if len(values) and values.min() <= 0:
            raise ValueError("relation values must be strictly positive")
        if len(src_idx):
            if src_idx.min() < 0 or src_idx.max() >= len(self.src_ids):
                raise ValueError("src index out of range")
            if dst_idx.min() < 0 or dst_idx.max() >= len(self.dst_ids):
                raise ValueError("dst index out of range")
        order = np.lexsort((dst_idx, src_idx))
        self.src_idx = src_idx[order]
        self.dst_idx = dst_idx[order]
        self.values = values[order]
        if len(self.src_idx) > 1:
            same = (np.diff(self.src_idx) == 0) & (np.diff(self.dst_idx) == 0)
            if same.any():
                raise ValueError("duplicate (src, dst) entry in relation")

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(
        cls,
        src_type: str,
        dst_type: str,
        src_ids: Sequence[str],
        dst_ids: Sequence[str],
        entries: Dict[Tuple[int, int], float],
        provenance: Provenance,
        **kwargs,
    ) -> "RelationMatrix":
        if entries:
            src = np.fromiter((s for s, _ in entries), dtype=np.int64, count=len(entries))
            dst = np.fromiter((d for _, d in entries), dtype=np.int64, count=len(entries))
            val = np.fromiter(entries.values(), dtype=np.float64, count=len(entries))
        else:
            src = dst = np.empty(0, dtype=np.int64)
            val = np.empty(0, dtype=np.float64)
        return cls(src_type, dst_type, src_ids, dst_ids, src, dst, val, provenance, **kwargs)

    # -- access --------------------------------------------------------------

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def label(self) -> str:
        return self.provenance.label

    def items(self) -> Iterator[Tuple[int, int, float]]:
        for s, d, v in zip(self.src_idx, self.dst_idx, self.values):
            yield int(s), int(d), float(v)

    def to_dict(self) -> Dict[Tuple[int, int], float]:
        return {(int(s), int(d)): float(v) for s, d, v in self.items()}

    def to_id_dict(self) -> Dict[Tuple[str, str], float]:
        return {
            (self.src_ids[s], self.dst_ids[d]): v for s, d, v in self.items()
        }

    def row(self, src_index: int) -> Tuple[np.ndarray, np.ndarray]:
        """(dst indices, values) of one row, in ascending dst order."""
        lo = np.searchsorted(self.src_idx, src_index, side="left")
        hi = np.searchsorted(self.src_idx, src_index, side="right")
        return self.dst_idx[lo:hi], self.values[lo:hi]

    def nonempty_rows(self) -> np.ndarray:
        return np.unique(self.src_idx)

    def with_values(self, values: np.ndarray, provenance=None) -> "RelationMatrix":
        return RelationMatrix(
            self.src_type,
            self.dst_type,
            self.src_ids,
            self.dst_ids,
            self.src_idx,
            self.dst_idx,
            values,
            provenance or self.provenance,
            num_src=self.num_src,
            num_dst=self.num_dst,
        )

    def normalized_by_budget(self) -> "RelationMatrix":
        """Optional transform: counts / walks-per-start. Off by default downstream."""
        if self.provenance.method != METHOD_SAMPLED or not self.provenance.walks_per_start:
            raise ValueError("budget normalization applies to sampled relations only")
        return self.with_values(self.values / self.provenance.walks_per_start)

    def __repr__(self):
        return (
            f"RelationMatrix({self.label!r}, {self.src_type}->{self.dst_type}, "
            f"nnz={self.nnz}, method={self.provenance.method})"
        )


def direct_relation(graph: HeteroGraph, et_name: str, label: Optional[str] = None) -> RelationMatrix:
    """The raw edge relation of one edge type.

    Weighted types carry the edge weight as the entry value (ratings for
    the target relation); unweighted types carry 1.
    """
    et = graph.schema.edge_type(et_name)
    src, dst, val = [], [], []
    for src_idx, dst_idx, weight in graph.iter_edges(et_name):
        src.append(src_idx)
        dst.append(dst_idx)
        val.append(1.0 if weight is None else float(weight))
    prov = Provenance(label=label or et_name, method=METHOD_DIRECT)
    return RelationMatrix(
        et.src,
        et.dst,
        list(graph.node_ids(et.src)),
        list(graph.node_ids(et.dst)),
        np.array(src, dtype=np.int64),
        np.array(dst, dtype=np.int64),
        np.array(val, dtype=np.float64),
        prov,
    )


# -- on-disk format ---------------------------------------------------------

_HEADER_MAGIC = "# hinrec-relation 1"


def format_relation(rel: RelationMatrix) -> str:
    """Canonical text form: header lines, then TSV triples sorted by ids.

    Sorting by external ids makes the output a pure function of the
    relation's content, so save -> load -> save is byte-stable.
    """
    p = rel.provenance
    lines = [
        _HEADER_MAGIC,
        f"# label {p.label}",
        f"# src_type {rel.src_type}",
        f"# dst_type {rel.dst_type}",
        f"# method {p.method}",
        f"# walks_per_start {p.walks_per_start if p.walks_per_start is not None else '-'}",
        f"# seed {p.seed if p.seed is not None else '-'}",
        f"# failures {p.failures}",
        f"# src_count {rel.num_src}",
        f"# dst_count {rel.num_dst}",
    ]
    rows = sorted(
        (rel.src_ids[s], rel.dst_ids[d], v) for s, d, v in rel.items()
    )
    for src_id, dst_id, v in rows:
        lines.append(f"{src_id}\t{dst_id}\t{v!r}")
    return "\n".join(lines) + "\n"


def save_relation(rel: RelationMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_relation(rel))


def parse_relation(text: str, path: str = "<string>") -> RelationMatrix:
    lines = text.splitlines()
    if not lines or lines[0] != _HEADER_MAGIC:
        raise RelationFormatError(f"{path}: not a relation file (missing magic header)")
    header = {}
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("# "):
            body_start = i
            break
        body_start = i + 1
        if line == _HEADER_MAGIC:
            continue
        parts = line[2:].split(" ", 1)
        if len(parts) == 2:
            header[parts[0]] = parts[1]
    required = ("label", "src_type", "dst_type", "method", "src_count", "dst_count")
    for key in required:
        if key not in header:
            raise RelationFormatError(f"{path}: missing header field {key!r}")

    def _opt_int(key):
        v = header.get(key, "-")
        return None if v == "-" else int(v)

    entries = []
    for lineno, line in enumerate(lines[body_start:], start=body_start + 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise RelationFormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
        try:
            entries.append((parts[0], parts[1], float(parts[2])))
        except ValueError:
            raise RelationFormatError(f"{path}:{lineno}: non-numeric value {parts[2]!r}") from None

    src_ids = sorted({e[0] for e in entries})
    dst_ids = sorted({e[1] for e in entries})
    src_index = {x: i for i, x in enumerate(src_ids)}
    dst_index = {x: i for i, x in enumerate(dst_ids)}
    src = np.array([src_index[e[0]] for e in entries], dtype=np.int64)
    dst = np.array([dst_index[e[1]] for e in entries], dtype=np.int64)
    val = np.array([e[2] for e in entries], dtype=np.float64)
    prov = Provenance(
        label=header["label"],
        method=header["method"],
        walks_per_start=_opt_int("walks_per_start"),
        seed=_opt_int("seed"),
        failures=int(header.get("failures", "0")),
    )
    return RelationMatrix(
        header["src_type"],
        header["dst_type"],
        src_ids,
        dst_ids,
        src,
        dst,
        val,
        prov,
        num_src=int(header["src_count"]),
        num_dst=int(header["dst_count"]),
    )


def load_relation(path) -> RelationMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_relation(fh.read(), path=str(path))
