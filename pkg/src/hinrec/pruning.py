"""Relation informativeness scoring and pruning.

A relation whose rows concentrate on few destinations is specific and
likely predictive; one whose rows spread near-uniformly over a small
destination universe (a handful of very common genres, say) carries
little signal. The score is

    1 - mean over non-empty rows of H(row) / log(N_d)

where H is the Shannon entropy of the row's count distribution and N_d
the size of the destination universe. It lies in [0, 1]: 1 when every
row has a single destination, 0 when every row is uniform over the whole
universe. The log base cancels in the ratio.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .relation import RelationMatrix

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NigScore:
    label: str
    value: float
    flagged: bool = False


@dataclass(frozen=True)
class PrunePolicy:
    """Either keep relations scoring at least ``tau``, or keep the top ``m``."""

    kind: str = "threshold"  # "threshold" | "top_m"
    tau: float = 0.1
    m: int = 1

    def __post_init__(self):
        if self.kind not in ("threshold", "top_m"):
            raise ValueError(f"unknown pruning policy {self.kind!r}")
        if self.kind == "threshold" and not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.kind == "top_m" and self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")


@dataclass(frozen=True)
class PruneDecision:
    label: str
    score: float
    kept: bool


def normalized_information_gain(rel: RelationMatrix) -> NigScore:
    """Score one relation; see the module docstring for the definition.

    A destination universe smaller than 2 admits no distinction, so the
    score is defined as 0 and flagged.
    """
    if rel.nnz == 0:
        raise ValueError(f"relation {rel.label!r} is empty")
    if rel.num_dst < 2:
        _log.warning(
            "relation %s has destination universe of size %d; score forced to 0",
            rel.label,
            rel.num_dst,
        )
        return NigScore(rel.label, 0.0, flagged=True)

    log_nd = np.log(rel.num_dst)
    # rows are contiguous runs in the (src-sorted) entry arrays
    boundaries = np.flatnonzero(np.diff(rel.src_idx)) + 1
    ratios = []
    for vals in np.split(rel.values, boundaries):
        total = vals.sum()
        p = vals / total
        entropy = float(-(p * np.log(p)).sum())
        ratios.append(entropy / log_nd)
    value = 1.0 - float(np.mean(ratios))
    return NigScore(rel.label, float(np.clip(value, 0.0, 1.0)))


def prune_relations(
    relations: Sequence[RelationMatrix],
    policy: PrunePolicy,
    target_label: Optional[str] = None,
) -> Tuple[List[RelationMatrix], List[PruneDecision]]:
    """Drop uninformative relations; the target relation is never dropped.

    Returns the retained relations (input order preserved) and one
    decision per relation, sorted by label. Top-m ties at the boundary go
    to the lexicographically smaller label.
    """
    if not relations:
        raise ValueError("no relations to prune")
    scores = {}
    for rel in relations:
        if rel.label in scores:
            raise ValueError(f"duplicate relation label {rel.label!r}")
        scores[rel.label] = normalized_information_gain(rel).value

    if policy.kind == "threshold":
        kept_labels = {label for label, s in scores.items() if s >= policy.tau}
    else:
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        kept_labels = {label for label, _ in ranked[: policy.m]}
    if target_label is not None and target_label in scores:
        kept_labels.add(target_label)

    kept = [rel for rel in relations if rel.label in kept_labels]
    decisions = [
        PruneDecision(label, scores[label], label in kept_labels)
        for label in sorted(scores)
    ]
    return kept, decisions


def format_prune_report(decisions: Sequence[PruneDecision]) -> str:
    """TSV report: ``label  score  kept|pruned``."""
    lines = ["label\tscore\tdecision"]
    for d in decisions:
        lines.append(f"{d.label}\t{d.score:.6f}\t{'kept' if d.kept else 'pruned'}")
    return "\n".join(lines) + "\n"
