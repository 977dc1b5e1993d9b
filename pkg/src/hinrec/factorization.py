"""Multi-relational matrix factorization trained with BPR.

One target relation (user-item) is predicted; auxiliary meta-path
relations act as side information. Every entity type owns a single
latent factor matrix shared across all relations it appears in, so
auxiliary updates move the same item factors the target relation scores
with. Training samples (source, positive, negative) triples and ascends
the pairwise ranking objective

    alpha_r * ln sigma(<f_a, f_pos> - <f_a, f_neg>) - (reg/2) * ||.||^2

Relation values are binarized for sampling: an entry present is a
positive, magnitudes carry no extra weight.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ModelError
from .relation import RelationMatrix

_log = logging.getLogger(__name__)

_STREAM_INIT = 201
_STREAM_TRAIN = 202

_MAX_NEGATIVE_REJECTS = 100


@dataclass(frozen=True)
class Hyperparams:
    dim: int = 32
    lr: float = 0.05
    reg: float = 0.01
    epochs: int = 30
    neg_samples: int = 1
    relation_weights: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.reg < 0:
            raise ValueError(f"reg must be >= 0, got {self.reg}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.neg_samples < 1:
            raise ValueError(f"neg_samples must be >= 1, got {self.neg_samples}")
        for label, alpha in self.relation_weights.items():
            if alpha < 0:
                raise ValueError(f"relation weight for {label!r} must be >= 0, got {alpha}")

    def weight_for(self, label: str) -> float:
        return float(self.relation_weights.get(label, 1.0))


@dataclass(frozen=True)
class TrainingTriple:
    """One BPR update: source entity, observed positive, sampled negative."""

    relation_label: str
    src_type: str
    dst_type: str
    src: int
    pos: int
    neg: int


class FactorModel:
    """Per-entity-type factor matrices with external-id index maps."""

    def __init__(
        self,
        factors: Dict[str, np.ndarray],
        ids: Dict[str, List[str]],
        hyperparams: Hyperparams,
        target_src_type: Optional[str] = None,
        target_dst_type: Optional[str] = None,
    ):
        dims = {m.shape[1] for m in factors.values()}
        if len(dims) > 1:
            raise ModelError(f"factor matrices disagree on dimension: {sorted(dims)}")
        self.factors = factors
        self.ids = ids
        self.index = {t: {x: i for i, x in enumerate(ids[t])} for t in ids}
        self.hyperparams = hyperparams
        self.target_src_type = target_src_type
        self.target_dst_type = target_dst_type
        self.loss_trace: List[float] = []

    @property
    def dim(self) -> int:
        return self.hyperparams.dim

    def entity_index(self, entity_type: str, entity_id: str) -> int:
        try:
            return self.index[entity_type][entity_id]
        except KeyError:
            raise ModelError(f"unknown entity {entity_type}:{entity_id}") from None

    def scores_for(self, entity_type: str, idx: int, other_type: str) -> np.ndarray:
        return self.factors[other_type] @ self.factors[entity_type][idx]


def _entity_universes(relations: Sequence[RelationMatrix]) -> Dict[str, List[str]]:
    """Observed entities per type, in sorted-id order.

    Sorted order makes the factor index space (and therefore the seeded
    initialization) independent of whether relations came from the fused
    pipeline or from files.
    """
    seen: Dict[str, set] = {}
    for rel in relations:
        src_seen = seen.setdefault(rel.src_type, set())
        for s in np.unique(rel.src_idx):
            src_seen.add(rel.src_ids[s])
        dst_seen = seen.setdefault(rel.dst_type, set())
        for d in np.unique(rel.dst_idx):
            dst_seen.add(rel.dst_ids[d])
    return {t: sorted(members) for t, members in seen.items()}


def init_model(
    relations: Sequence[RelationMatrix],
    hp: Hyperparams,
    target: Optional[RelationMatrix] = None,
) -> FactorModel:
    """Allocate factors for every entity observed in the given relations.

    Rows are drawn from a zero-mean normal with scale 0.1/sqrt(dim),
    deterministically under the seed; entity types shared by several
    relations get exactly one matrix.
    """
    if not relations:
        raise ModelError("no relations to build a model from")
    ids = _entity_universes(relations)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(hp.seed, _STREAM_INIT)))
    scale = 0.1 / math.sqrt(hp.dim)
    factors = {}
    for t in sorted(ids):
        factors[t] = rng.normal(0.0, scale, size=(len(ids[t]), hp.dim))
    model = FactorModel(
        factors,
        ids,
        hp,
        target_src_type=target.src_type if target is not None else None,
        target_dst_type=target.dst_type if target is not None else None,
    )
    return model


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-min(z, 500.0)))
    e = math.exp(max(z, -500.0))
    return e / (1.0 + e)


def bpr_step(
    model: FactorModel,
    triple: TrainingTriple,
    alpha: float,
    lr: float,
    reg: float,
) -> float:
    """One stochastic ascent step on the triple's ranking objective.

    Updates all three factor rows in place using the source row's
    pre-update value throughout. Returns -ln sigma(x), the ranking loss
    of the triple before the update.
    """
    fs = model.factors[triple.src_type]
    fd = model.factors[triple.dst_type]
    f_a = fs[triple.src].copy()
    f_pos = fd[triple.pos]
    f_neg = fd[triple.neg]
    x = float(f_a @ f_pos - f_a @ f_neg)
    g = alpha * _sigmoid(-x)
    fs[triple.src] += lr * (g * (f_pos - f_neg) - reg * f_a)
    fd[triple.pos] += lr * (g * f_a - reg * f_pos)
    fd[triple.neg] += lr * (-g * f_a - reg * f_neg)
    return -math.log(max(_sigmoid(x), 1e-300))


class _RelationSampler:
    """Positive/negative triple sampling state for one relation."""

    def __init__(self, rel: RelationMatrix, model: FactorModel):
        self.label = rel.label
        self.src_type = rel.src_type
        self.dst_type = rel.dst_type
        src_index = model.index[rel.src_type]
        dst_index = model.index[rel.dst_type]
        self.src = np.array([src_index[rel.src_ids[s]] for s in rel.src_idx], dtype=np.int64)
        self.dst = np.array([dst_index[rel.dst_ids[d]] for d in rel.dst_idx], dtype=np.int64)
        self.n_pos = len(self.src)
        self.n_dst_universe = len(model.ids[rel.dst_type])
        self.positives: Dict[int, set] = {}
        for s, d in zip(self.src, self.dst):
            self.positives.setdefault(int(s), set()).add(int(d))
        if all(len(v) >= self.n_dst_universe for v in self.positives.values()):
            raise ModelError(
                f"relation {self.label!r} is complete; no negatives can be sampled"
            )

    def draw(self, rng: np.random.Generator) -> Tuple[int, int, int]:
        """A (src, pos, neg) triple; negatives are rejection-sampled."""
        while True:
            k = int(rng.integers(self.n_pos))
            a, pos = int(self.src[k]), int(self.dst[k])
            known = self.positives[a]
            if len(known) >= self.n_dst_universe:
                continue  # no negative exists for this source; resample
            for _ in range(_MAX_NEGATIVE_REJECTS):
                neg = int(rng.integers(self.n_dst_universe))
                if neg not in known:
                    return a, pos, neg
            # stubborn source: resample a fresh positive entry


def train_dmf(
    target: RelationMatrix,
    aux: Sequence[RelationMatrix] = (),
    hp: Hyperparams = Hyperparams(),
) -> FactorModel:
    """Train shared factors over the target and auxiliary relations.

    Runs ``epochs * total positive entries`` BPR steps. Each step draws a
    relation with probability proportional to alpha_r * |positives|, a
    uniform positive from it, and ``neg_samples`` rejected negatives.
    Single-threaded and fully deterministic under the seed. The returned
    model carries a per-epoch mean ranking loss trace.
    """
    relations = [target] + list(aux)
    labels = [r.label for r in relations]
    if len(set(labels)) != len(labels):
        raise ModelError(f"duplicate relation labels: {labels}")
    if hp.weight_for(target.label) <= 0:
        raise ModelError("the target relation weight must be positive")
    for rel in relations:
        if rel.nnz == 0:
            raise ModelError(f"relation {rel.label!r} has no positives")

    model = init_model(relations, hp, target=target)
    samplers = [_RelationSampler(rel, model) for rel in relations]
    alphas = np.array([hp.weight_for(rel.label) for rel in relations])
    sizes = np.array([s.n_pos for s in samplers], dtype=np.float64)
    mass = alphas * sizes
    active = mass > 0
    if not active.any():
        raise ModelError("every relation has zero sampling mass")
    cum_mass = np.cumsum(mass)
    total_mass = cum_mass[-1]

    total_pos = int(sizes.sum())
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(hp.seed, _STREAM_TRAIN)))
    for epoch in range(hp.epochs):
        epoch_loss = 0.0
        steps = 0
        for _ in range(total_pos):
            r = int(np.searchsorted(cum_mass, rng.random() * total_mass, side="right"))
            r = min(r, len(samplers) - 1)
            sampler = samplers[r]
            alpha = float(alphas[r])
            for _ in range(hp.neg_samples):
                a, pos, neg = sampler.draw(rng)
                triple = TrainingTriple(
                    sampler.label, sampler.src_type, sampler.dst_type, a, pos, neg
                )
                epoch_loss += bpr_step(model, triple, alpha, hp.lr, hp.reg)
                steps += 1
        mean_loss = epoch_loss / max(steps, 1)
        if not math.isfinite(mean_loss):
            raise ModelError(f"training diverged at epoch {epoch} (non-finite loss)")
        model.loss_trace.append(mean_loss)
        _log.debug("epoch %d mean ranking loss %.6f", epoch, mean_loss)
    return model


def recommend_topk(
    model: FactorModel,
    user_id: str,
    k: int,
    exclude: Sequence[str] = (),
) -> List[Tuple[str, float]]:
    """Top-k items for a user by factor dot product.

    Excluded items (typically the user's training positives) are removed
    before ranking; ties break toward the smaller item index. Returns
    min(k, remaining candidates) pairs.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if model.target_src_type is None or model.target_dst_type is None:
        raise ModelError("model has no target relation recorded")
    u = model.entity_index(model.target_src_type, user_id)
    scores = model.scores_for(model.target_src_type, u, model.target_dst_type)
    item_ids = model.ids[model.target_dst_type]
    item_index = model.index[model.target_dst_type]
    banned = set()
    for item in exclude:
        idx = item_index.get(item)
        if idx is not None:
            banned.add(idx)
    order = np.argsort(-scores, kind="stable")
    out = []
    for idx in order:
        if int(idx) in banned:
            continue
        out.append((item_ids[int(idx)], float(scores[idx])))
        if len(out) == k:
            break
    return out


# -- model files -------------------------------------------------------------

_MODEL_MAGIC = "# hinrec-model 1"


def format_model(model: FactorModel) -> str:
    hp = model.hyperparams
    lines = [
        _MODEL_MAGIC,
        f"# dim {hp.dim}",
        f"# lr {hp.lr!r}",
        f"# reg {hp.reg!r}",
        f"# epochs {hp.epochs}",
        f"# neg_samples {hp.neg_samples}",
        f"# seed {hp.seed}",
        f"# target {model.target_src_type or '-'} {model.target_dst_type or '-'}",
    ]
    if hp.relation_weights:
        parts = " ".join(
            f"{label}={hp.relation_weights[label]!r}" for label in sorted(hp.relation_weights)
        )
        lines.append(f"# relation_weights {parts}")
    for t in sorted(model.factors):
        lines.append(f"# entity_type {t} {len(model.ids[t])}")
        mat = model.factors[t]
        for i, entity_id in enumerate(model.ids[t]):
            row = "\t".join(repr(float(v)) for v in mat[i])
            lines.append(f"{entity_id}\t{row}")
    return "\n".join(lines) + "\n"


def save_model(model: FactorModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_model(model))


def load_model(path) -> FactorModel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MODEL_MAGIC:
        raise ModelError(f"{path}: not a model file")
    header = {}
    relation_weights = {}
    factors: Dict[str, list] = {}
    ids: Dict[str, List[str]] = {}
    current: Optional[str] = None
    for line in lines[1:]:
        if line.startswith("# entity_type "):
            _, _, t, _count = line.split(" ")
            current = t
            factors[t] = []
            ids[t] = []
        elif line.startswith("# relation_weights "):
            for part in line[len("# relation_weights ") :].split(" "):
                label, _, value = part.partition("=")
                relation_weights[label] = float(value)
        elif line.startswith("# "):
            key, _, value = line[2:].partition(" ")
            header[key] = value
        elif line.strip():
            if current is None:
                raise ModelError(f"{path}: factor row before any entity_type header")
            parts = line.split("\t")
            ids[current].append(parts[0])
            factors[current].append([float(v) for v in parts[1:]])
    hp = Hyperparams(
        dim=int(header["dim"]),
        lr=float(header["lr"]),
        reg=float(header["reg"]),
        epochs=int(header["epochs"]),
        neg_samples=int(header["neg_samples"]),
        relation_weights=relation_weights,
        seed=int(header["seed"]),
    )
    target_src, target_dst = header.get("target", "- -").split(" ")
    return FactorModel(
        {t: np.array(rows, dtype=np.float64) for t, rows in factors.items()},
        ids,
        hp,
        target_src_type=None if target_src == "-" else target_src,
        target_dst_type=None if target_dst == "-" else target_dst,
    )
