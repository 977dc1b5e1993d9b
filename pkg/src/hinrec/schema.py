"""Network schemas: typed node sets and directed, optionally weighted edge kinds.

A schema declares which node types exist and which edge types connect them.
Edge types are directed (``src -> dst``) and may carry a bounded real weight,
e.g. a user rating in [1, 5].
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

from .errors import SchemaError

_NAME_RE = re.compile(r"^[A-Za-z0-9_\-]+$")


@dataclass(frozen=True)
class EdgeTypeDef:
    """One kind of directed edge between two node types."""

    name: str
    src: str
    dst: str
    weighted: bool = False
    weight_range: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if not self.name or not _NAME_RE.match(self.name):
            raise SchemaError(f"invalid edge type name {self.name!r}")
        if self.weighted != (self.weight_range is not None):
            raise SchemaError(
                f"edge type {self.name!r}: weight_range must be given exactly "
                f"when the type is weighted"
            )
        if self.weight_range is not None:
            lo, hi = self.weight_range
            if not lo <= hi:
                raise SchemaError(
                    f"edge type {self.name!r}: empty weight range [{lo}, {hi}]"
                )


class NetworkSchema:
    """Declares the node types and edge types of a heterogeneous network."""

    def __init__(self, node_types: Iterable[str], edge_types: Iterable[EdgeTypeDef]):
        self.node_types = list(dict.fromkeys(node_types))
        if not self.node_types:
            raise SchemaError("schema declares no node types")
        for nt in self.node_types:
            if not nt or not _NAME_RE.match(nt):
                raise SchemaError(f"invalid node type name {nt!r}")
        self.edge_types = {}
        for et in edge_types:
            if et.name in self.edge_types:
                raise SchemaError(f"duplicate edge type name {et.name!r}")
            if et.src not in self.node_types:
                raise SchemaError(
                    f"edge type {et.name!r}: unknown source node type {et.src!r}"
                )
            if et.dst not in self.node_types:
                raise SchemaError(
                    f"edge type {et.name!r}: unknown destination node type {et.dst!r}"
                )
            self.edge_types[et.name] = et

    def edge_type(self, name: str) -> EdgeTypeDef:
        try:
            return self.edge_types[name]
        except KeyError:
            raise SchemaError(f"unknown edge type {name!r}") from None

    def has_edge_type(self, name: str) -> bool:
        return name in self.edge_types

    def __eq__(self, other):
        return (
            isinstance(other, NetworkSchema)
            and self.node_types == other.node_types
            and self.edge_types == other.edge_types
        )

    def __repr__(self):
        return (
            f"NetworkSchema(node_types={self.node_types!r}, "
            f"edge_types={sorted(self.edge_types)!r})"
        )


_WEIGHTED_RE = re.compile(r"^weighted\(\s*([^,\s]+)\s*,\s*([^,\s)]+)\s*\)$")


def parse_schema(text: str) -> NetworkSchema:
    """Parse the schema file format.

    Two sections: ``[nodes]`` with one node type per line, and ``[edges]``
    with one edge type per line as ``name src dst`` plus an optional
    ``weighted(min,max)`` marker.  ``#`` starts a comment.
    """
    node_types = []
    edge_types = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[nodes]":
            section = "nodes"
            continue
        if line == "[edges]":
            section = "edges"
            continue
        if line.startswith("["):
            raise SchemaError(f"line {lineno}: unknown section {line!r}")
        if section == "nodes":
            node_types.append(line)
        elif section == "edges":
            parts = line.split()
            if len(parts) not in (3, 4):
                raise SchemaError(
                    f"line {lineno}: expected 'name src dst [weighted(min,max)]', "
                    f"got {line!r}"
                )
            name, src, dst = parts[:3]
            weighted = False
            weight_range = None
            if len(parts) == 4:
                m = _WEIGHTED_RE.match(parts[3])
                if not m:
                    raise SchemaError(
                        f"line {lineno}: malformed weight marker {parts[3]!r}"
                    )
                try:
                    weight_range = (float(m.group(1)), float(m.group(2)))
                except ValueError:
                    raise SchemaError(
                        f"line {lineno}: non-numeric weight bound in {parts[3]!r}"
                    ) from None
                weighted = True
            edge_types.append(
                EdgeTypeDef(name, src, dst, weighted=weighted, weight_range=weight_range)
            )
        else:
            raise SchemaError(f"line {lineno}: content before any section: {line!r}")
    return NetworkSchema(node_types, edge_types)


def format_schema(schema: NetworkSchema) -> str:
    """Render a schema in the file format accepted by :func:`parse_schema`."""
    lines = ["[nodes]"]
    lines.extend(schema.node_types)
    lines.append("[edges]")
    for et in schema.edge_types.values():
        if et.weighted:
            lo, hi = et.weight_range
            lines.append(f"{et.name} {et.src} {et.dst} weighted({lo:g},{hi:g})")
        else:
            lines.append(f"{et.name} {et.src} {et.dst}")
    return "\n".join(lines) + "\n"


def load_schema(path) -> NetworkSchema:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_schema(fh.read())


def save_schema(schema: NetworkSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_schema(schema))
