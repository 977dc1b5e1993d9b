"""Meta-paths: typed sequences of edge-type steps through a schema.

Literal syntax for configs and the CLI: a comma-separated step list where
``>`` prefixes a forward step, ``<`` a reverse step, and a bare edge type
name means forward, e.g. ``um,>mg,<mg`` for user-movie-genre-movie.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

from .errors import MetaPathError, UnknownEdgeTypeError
from .graph import FORWARD, REVERSE
from .schema import NetworkSchema

DEFAULT_MAX_STEPS = 3


@dataclass(frozen=True)
class MetaPath:
    """Ordered (edge type, direction) steps, with an optional display label."""

    steps: Tuple[Tuple[str, str], ...]
    label: Optional[str] = None

    def __post_init__(self):
        if not self.steps:
            raise MetaPathError("meta-path must have at least one step")
        for et_name, direction in self.steps:
            if direction not in (FORWARD, REVERSE):
                raise MetaPathError(
                    f"step {et_name!r}: direction must be 'forward' or 'reverse', "
                    f"got {direction!r}"
                )

    def __len__(self):
        return len(self.steps)


def parse_metapath(literal: str, label: Optional[str] = None) -> MetaPath:
    """Parse the ``um,>mg,<mg`` step-list literal."""
    steps = []
    for part in literal.split(","):
        token = part.strip()
        if not token:
            raise MetaPathError(f"empty step in meta-path literal {literal!r}")
        if token.startswith(">"):
            steps.append((token[1:].strip(), FORWARD))
        elif token.startswith("<"):
            steps.append((token[1:].strip(), REVERSE))
        else:
            steps.append((token, FORWARD))
    return MetaPath(tuple(steps), label=label)


def format_metapath(mp: MetaPath) -> str:
    """Inverse of :func:`parse_metapath`."""
    parts = []
    for et_name, direction in mp.steps:
        parts.append((">" if direction == FORWARD else "<") + et_name)
    return ",".join(parts)


def step_endpoints(schema: NetworkSchema, et_name: str, direction: str):
    """(from_type, to_type) of one step, honoring direction."""
    et = schema.edge_type(et_name)
    if direction == FORWARD:
        return et.src, et.dst
    return et.dst, et.src


def validate_metapath(
    mp: MetaPath, schema: NetworkSchema, max_steps: int = DEFAULT_MAX_STEPS
):
    """Type-check a meta-path against a schema.

    Returns the node type sequence (length ``len(mp) + 1``). Raises
    :class:`UnknownEdgeTypeError` for undeclared edge types and
    :class:`MetaPathError` on a type mismatch (reporting both types) or
    when the path exceeds ``max_steps``.
    """
    if max_steps is not None and len(mp.steps) > max_steps:
        raise MetaPathError(
            f"meta-path has {len(mp.steps)} steps, exceeding the maximum of {max_steps}"
        )
    node_types = []
    for i, (et_name, direction) in enumerate(mp.steps, start=1):
        if not schema.has_edge_type(et_name):
            raise UnknownEdgeTypeError(f"step {i}: unknown edge type {et_name!r}")
        frm, to = step_endpoints(schema, et_name, direction)
        if not node_types:
            node_types.append(frm)
        elif node_types[-1] != frm:
            raise MetaPathError(
                f"type mismatch at step {i}: previous step ends at "
                f"{node_types[-1]!r} but {et_name!r} ({direction}) starts at {frm!r}"
            )
        node_types.append(to)
    return node_types


def derive_label(mp: MetaPath, schema: NetworkSchema) -> str:
    """Label from the first letters of the node type sequence, e.g. ``umgm``."""
    if mp.label:
        return mp.label
    return "".join(t[0] for t in validate_metapath(mp, schema, max_steps=None))


def metapath_endpoints(mp: MetaPath, schema: NetworkSchema):
    """(source node type, destination node type) of the whole path."""
    node_types = validate_metapath(mp, schema, max_steps=None)
    return node_types[0], node_types[-1]
