"""Random-walk and diffusion baselines over the bipartite rating graph.

All three operate on the binary user-item adjacency built from training
positives (rating values are ignored):

- ``p3_alpha_scores``: 3-step transition probabilities user -> item ->
  user -> item, each transition probability raised elementwise to alpha.
- ``rp3_beta_scores``: the same scores divided by item degree^beta to
  push back against popular items.
- ``hl_scores``: the HeatS/ProbS hybrid item-item diffusion,
  W_ij = sum_u a_ui * a_uj / k_u / (k_i^(1-lam) * k_j^lam), applied to
  each user's profile. lam=1 is pure ProbS (mass conserving, unit column
  sums), lam=0 pure HeatS (unit row sums).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .relation import RelationMatrix


@dataclass
class BipartiteRatings:
    """Binary training adjacency with degree vectors.

    Only users and items that appear in at least one training positive
    are retained, so every degree is >= 1.
    """

    user_ids: List[str]
    item_ids: List[str]
    adjacency: sp.csr_matrix  # users x items, 0/1
    user_degrees: np.ndarray
    item_degrees: np.ndarray

    @classmethod
    def from_relation(cls, rel: RelationMatrix) -> "BipartiteRatings":
        if rel.nnz == 0:
            raise ValueError("cannot build a bipartite graph from an empty relation")
        users = np.unique(rel.src_idx)
        items = np.unique(rel.dst_idx)
        user_ids = [rel.src_ids[i] for i in users]
        item_ids = [rel.dst_ids[i] for i in items]
        urow = np.searchsorted(users, rel.src_idx)
        icol = np.searchsorted(items, rel.dst_idx)
        data = np.ones(rel.nnz, dtype=np.float64)
        a = sp.csr_matrix((data, (urow, icol)), shape=(len(users), len(items)))
        a.data[:] = 1.0  # collapse any multiplicity
        return cls(
            user_ids,
            item_ids,
            a,
            np.asarray(a.sum(axis=1)).ravel(),
            np.asarray(a.sum(axis=0)).ravel(),
        )

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)


@dataclass
class ScoreTable:
    """Dense (user x item) score matrix with the producing algorithm's tag."""

    scores: np.ndarray
    user_ids: List[str]
    item_ids: List[str]
    algorithm: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self._user_index = {u: i for i, u in enumerate(self.user_ids)}
        if not np.isfinite(self.scores).all():
            raise ValueError("score table contains non-finite values")

    def scores_for_user(self, user_id: str) -> np.ndarray:
        return self.scores[self._user_index[user_id]]

    def has_user(self, user_id: str) -> bool:
        return user_id in self._user_index

    def top_k(self, user_id: str, k: int, exclude: Sequence[str] = ()) -> List[Tuple[str, float]]:
        row = self.scores_for_user(user_id)
        banned = {item for item in exclude}
        order = np.argsort(-row, kind="stable")
        out = []
        for idx in order:
            item = self.item_ids[int(idx)]
            if item in banned:
                continue
            out.append((item, float(row[idx])))
            if len(out) == k:
                break
        return out


def _powered_transitions(b: BipartiteRatings, alpha: float):
    """(user->item, item->user) transition matrices, each entry to the alpha."""
    p_ui = b.adjacency.multiply(1.0 / b.user_degrees[:, None]).tocsr()
    p_iu = b.adjacency.T.multiply(1.0 / b.item_degrees[:, None]).tocsr()
    if alpha != 1.0:
        p_ui.data **= alpha
        p_iu.data **= alpha
    return p_ui, p_iu


def p3_alpha_scores(b: BipartiteRatings, alpha: float) -> ScoreTable:
    """3-step alpha-powered transition scores; no re-normalization after powering."""
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    p_ui, p_iu = _powered_transitions(b, alpha)
    scores = (p_ui @ (p_iu @ p_ui)).toarray()
    return ScoreTable(scores, b.user_ids, b.item_ids, "p3", {"alpha": alpha})


def rp3_beta_scores(b: BipartiteRatings, alpha: float, beta: float) -> ScoreTable:
    """P3 scores re-ranked by dividing item columns by degree^beta."""
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    base = p3_alpha_scores(b, alpha)
    scores = base.scores / np.power(b.item_degrees, beta)[None, :]
    return ScoreTable(scores, b.user_ids, b.item_ids, "rp3", {"alpha": alpha, "beta": beta})


def hl_scores(b: BipartiteRatings, mix: float) -> ScoreTable:
    """HeatS/ProbS hybrid diffusion; ``mix`` blends from HeatS (0) to ProbS (1)."""
    if not 0.0 <= mix <= 1.0:
        raise ValueError(f"mix must lie in [0, 1], got {mix}")
    inv_ku = sp.diags(1.0 / b.user_degrees)
    m = (b.adjacency.T @ inv_ku @ b.adjacency).tocsr()
    row_scale = sp.diags(np.power(b.item_degrees, -(1.0 - mix)))
    col_scale = sp.diags(np.power(b.item_degrees, -mix))
    w = row_scale @ m @ col_scale
    scores = (b.adjacency @ w.T).toarray()
    return ScoreTable(scores, b.user_ids, b.item_ids, "hl", {"mix": mix})


_SCORERS = {
    "p3": lambda b, params: p3_alpha_scores(b, params["alpha"]),
    "rp3": lambda b, params: rp3_beta_scores(b, params["alpha"], params["beta"]),
    "hl": lambda b, params: hl_scores(b, params["mix"]),
}


def score_baseline(b: BipartiteRatings, algorithm: str, params: Mapping[str, float]) -> ScoreTable:
    try:
        scorer = _SCORERS[algorithm]
    except KeyError:
        raise ValueError(f"unknown baseline algorithm {algorithm!r}") from None
    return scorer(b, params)


@dataclass(frozen=True)
class GridPoint:
    params: Tuple[Tuple[str, float], ...]
    recall_at_10: float


def grid_tune(
    train: RelationMatrix,
    algorithm: str,
    validation: RelationMatrix,
    grid: Mapping[str, Sequence[float]],
    k: int = 10,
) -> Tuple[Dict[str, float], List[GridPoint]]:
    """Pick the grid point maximizing recall@k on the validation split.

    The graph is built from training positives only; recommendations
    exclude them. Ties go to the smallest parameter tuple. Returns the
    winning parameters and the full grid report.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("parameter grid is empty")
    if validation.nnz == 0:
        raise ValueError("validation set is empty")
    b = BipartiteRatings.from_relation(train)
    train_pos: Dict[str, set] = {}
    for s, d, _ in train.items():
        train_pos.setdefault(train.src_ids[s], set()).add(train.dst_ids[d])
    val_pos: Dict[str, set] = {}
    for s, d, _ in validation.items():
        val_pos.setdefault(validation.src_ids[s], set()).add(validation.dst_ids[d])

    names = sorted(grid)
    report = []
    best_params: Optional[Dict[str, float]] = None
    best_recall = -1.0
    for values in product(*(sorted(grid[name]) for name in names)):
        params = dict(zip(names, values))
        table = score_baseline(b, algorithm, params)
        recalls = []
        for user, positives in val_pos.items():
            if not table.has_user(user):
                continue
            recs = table.top_k(user, k, exclude=train_pos.get(user, ()))
            hits = sum(1 for item, _ in recs if item in positives)
            recalls.append(hits / len(positives))
        recall = float(np.mean(recalls)) if recalls else 0.0
        report.append(GridPoint(tuple((n, params[n]) for n in names), recall))
        if recall > best_recall:
            best_recall = recall
            best_params = params
    return best_params, report


def format_grid_report(report: Sequence[GridPoint]) -> str:
    names = [n for n, _ in report[0].params] if report else []
    lines = ["\t".join(names + ["recall_at_10"])]
    for point in report:
        values = [repr(v) for _, v in point.params]
        lines.append("\t".join(values + [f"{point.recall_at_10:.6f}"]))
    return "\n".join(lines) + "\n"
