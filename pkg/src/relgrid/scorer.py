"""Scoring-based tag classifier over all (token, relation, token) cells.

For every ordered token pair (i, j) a shared two-layer network produces the
scores of all relations and all four tag classes at once:

    hidden(i, j) = relu(drop(pair_proj @ [e_i; e_j] + pair_bias))
    scores(i, k, tag, j) = rel_tag_emb[:, 4k + tag] . hidden(i, j)

Concatenation order is (e_i, e_j), so scores are not symmetric in (i, j);
asymmetric relations need that. Dropout is applied before the rectifier,
inverted-scaled, and only when training is requested, so inference is a
plain forward pass. Everything is float64 and seeded for reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tagging import NUM_TAGS, Tag, TagMatrix


@dataclass
class ScorerParams:
    """Trainable classifier parameters.

    pair_proj:   hidden_dim x 2*emb_dim projection of [e_i; e_j]
    pair_bias:   hidden_dim
    rel_tag_emb: hidden_dim x 4*num_relations; columns 4k..4k+3 hold
                 relation k's four tag representations
    """

    pair_proj: np.ndarray
    pair_bias: np.ndarray
    rel_tag_emb: np.ndarray
    dropout_rate: float = 0.1

    def __post_init__(self):
        hidden_dim = self.pair_proj.shape[0]
        if self.pair_proj.ndim != 2 or self.pair_proj.shape[1] % 2 != 0:
            raise ValueError(f"bad pair_proj shape {self.pair_proj.shape}")
        if self.pair_bias.shape != (hidden_dim,):
            raise ValueError(f"bad pair_bias shape {self.pair_bias.shape}")
        if self.rel_tag_emb.ndim != 2 or self.rel_tag_emb.shape[0] != hidden_dim:
            raise ValueError(f"bad rel_tag_emb shape {self.rel_tag_emb.shape}")
        if self.rel_tag_emb.shape[1] % NUM_TAGS != 0:
            raise ValueError("rel_tag_emb columns must be a multiple of 4")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate {self.dropout_rate} outside [0, 1)")
        for name in ("pair_proj", "pair_bias", "rel_tag_emb"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite values in {name}")

    @property
    def emb_dim(self) -> int:
        return self.pair_proj.shape[1] // 2

    @property
    def hidden_dim(self) -> int:
        return self.pair_proj.shape[0]

    @property
    def num_relations(self) -> int:
        return self.rel_tag_emb.shape[1] // NUM_TAGS


def init_scorer_params(
    emb_dim: int,
    num_relations: int,
    seed: int,
    hidden_dim: int | None = None,
    dropout_rate: float = 0.1,
) -> ScorerParams:
    """Glorot-uniform weights, zero bias; hidden_dim defaults to 3 * emb_dim."""
    if hidden_dim is None:
        hidden_dim = 3 * emb_dim
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out, shape):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)

    return ScorerParams(
        pair_proj=glorot(2 * emb_dim, hidden_dim, (hidden_dim, 2 * emb_dim)),
        pair_bias=np.zeros(hidden_dim),
        rel_tag_emb=glorot(
            hidden_dim, NUM_TAGS * num_relations, (hidden_dim, NUM_TAGS * num_relations)
        ),
        dropout_rate=dropout_rate,
    )


@dataclass
class ScoreGrid:
    """Scores for all cells plus the activations the backward pass needs.

    scores:    L x K x 4 x L
    hidden:    L x L x hidden_dim, post-rectifier pair activations
    drop_mask: L x L x hidden_dim inverted-dropout scaling, or None when
               dropout was inactive
    """

    scores: np.ndarray
    hidden: np.ndarray
    drop_mask: np.ndarray | None

    @property
    def length(self) -> int:
        return self.scores.shape[0]

    @property
    def num_relations(self) -> int:
        return self.scores.shape[1]


def _pair_concat(emb: np.ndarray) -> np.ndarray:
    """L x L x 2d array with [e_i; e_j] at (i, j)."""
    length = emb.shape[0]
    heads = np.broadcast_to(emb[:, None, :], (length, length, emb.shape[1]))
    tails = np.broadcast_to(emb[None, :, :], (length, length, emb.shape[1]))
    return np.concatenate([heads, tails], axis=2)


def score_all(
    emb: np.ndarray,
    params: ScorerParams,
    training: bool = False,
    rng_seed: int = 0,
) -> ScoreGrid:
    """Score every (i, relation, tag, j) cell in one batched pass."""
    if emb.ndim != 2 or emb.shape[1] != params.emb_dim:
        raise ValueError(
            f"embedding shape {emb.shape} incompatible with emb_dim {params.emb_dim}"
        )
    length = emb.shape[0]
    num_rel = params.num_relations

    pairs = _pair_concat(emb)
    pre = pairs.reshape(length * length, -1) @ params.pair_proj.T + params.pair_bias

    drop_mask = None
    if training and params.dropout_rate > 0.0:
        rng = np.random.default_rng(rng_seed)
        keep = rng.random(pre.shape) >= params.dropout_rate
        drop_mask = keep / (1.0 - params.dropout_rate)
        pre = pre * drop_mask
        drop_mask = drop_mask.reshape(length, length, -1)

    hidden = np.maximum(pre, 0.0)
    flat_scores = hidden @ params.rel_tag_emb  # (L*L, 4K)
    scores = (
        flat_scores.reshape(length, length, num_rel, NUM_TAGS)
        .transpose(0, 2, 3, 1)
        .copy()
    )
    return ScoreGrid(
        scores=scores,
        hidden=hidden.reshape(length, length, -1),
        drop_mask=drop_mask,
    )


def _scores_cell_major(grid: ScoreGrid) -> np.ndarray:
    """Scores rearranged to L x K x L x 4 (tag axis last)."""
    return np.moveaxis(grid.scores, 2, 3)


def tag_distribution(grid: ScoreGrid) -> np.ndarray:
    """L x K x L x 4 softmax over the tag axis, max-subtracted for stability."""
    s = _scores_cell_major(grid)
    shifted = s - s.max(axis=3, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=3, keepdims=True)


def dense_gold(gold: TagMatrix) -> np.ndarray:
    """L x K x L integer tag array from a sparse matrix; absent cells are NONE."""
    arr = np.zeros((gold.length, gold.num_relations, gold.length), dtype=np.int64)
    for (i, k, j), tag in gold.cells.items():
        arr[i, k, j] = int(tag)
    return arr


def _check_gold_mask(grid: ScoreGrid, gold_arr: np.ndarray, mask: np.ndarray | None):
    cell_shape = (grid.length, grid.num_relations, grid.length)
    if gold_arr.shape != cell_shape:
        raise ValueError(f"gold shape {gold_arr.shape} != grid cells {cell_shape}")
    if mask is not None and mask.shape != cell_shape:
        raise ValueError(f"mask shape {mask.shape} != grid cells {cell_shape}")


def loss(
    grid: ScoreGrid, gold: TagMatrix | np.ndarray, mask: np.ndarray | None = None
) -> float:
    """Mean negative log-probability of the gold tag over masked-in cells."""
    gold_arr = gold if isinstance(gold, np.ndarray) else dense_gold(gold)
    _check_gold_mask(grid, gold_arr, mask)

    s = _scores_cell_major(grid)
    m = s.max(axis=3, keepdims=True)
    log_norm = m.squeeze(3) + np.log(np.exp(s - m).sum(axis=3))
    gold_score = np.take_along_axis(s, gold_arr[..., None], axis=3).squeeze(3)
    nll = log_norm - gold_score

    if mask is None:
        count = nll.size
        total = nll.sum()
    else:
        count = int(mask.sum())
        if count == 0:
            raise ValueError("no masked-in cells")
        total = nll[mask].sum()
    return float(total / count)


@dataclass
class ScorerGrads:
    """Gradients of the mean loss for every trainable array."""

    pair_proj: np.ndarray
    pair_bias: np.ndarray
    rel_tag_emb: np.ndarray
    emb: np.ndarray


def backward(
    grid: ScoreGrid,
    gold: TagMatrix | np.ndarray,
    mask: np.ndarray | None,
    emb: np.ndarray,
    params: ScorerParams,
) -> ScorerGrads:
    """Exact gradients of loss() with respect to parameters and embeddings.

    Requires the grid produced by score_all on the same emb/params (the
    cached hidden activations and dropout realization are reused).
    """
    length = grid.length
    num_rel = grid.num_relations
    if grid.hidden.shape != (length, length, params.hidden_dim):
        raise ValueError("stale cache: hidden shape mismatch")
    if emb.shape != (length, params.emb_dim):
        raise ValueError("stale cache: embedding shape mismatch")
    if num_rel != params.num_relations:
        raise ValueError("stale cache: relation count mismatch")
    gold_arr = gold if isinstance(gold, np.ndarray) else dense_gold(gold)
    _check_gold_mask(grid, gold_arr, mask)

    probs = tag_distribution(grid)  # (L, K, L, 4)
    d_logits = probs.copy()
    np.put_along_axis(
        d_logits,
        gold_arr[..., None],
        np.take_along_axis(d_logits, gold_arr[..., None], axis=3) - 1.0,
        axis=3,
    )
    if mask is None:
        count = length * num_rel * length
    else:
        count = int(mask.sum())
        if count == 0:
            raise ValueError("no masked-in cells")
        d_logits *= mask[..., None]
    d_logits /= count

    # (i, k, j, tag) -> (i, j, 4k + tag), matching rel_tag_emb's column layout
    d_flat = d_logits.transpose(0, 2, 1, 3).reshape(length * length, num_rel * NUM_TAGS)
    hidden_flat = grid.hidden.reshape(length * length, -1)

    d_rel = hidden_flat.T @ d_flat
    d_hidden = d_flat @ params.rel_tag_emb.T
    d_hidden *= hidden_flat > 0.0  # rectifier active set
    if grid.drop_mask is not None:
        d_hidden *= grid.drop_mask.reshape(length * length, -1)

    pairs_flat = _pair_concat(emb).reshape(length * length, -1)
    d_proj = d_hidden.T @ pairs_flat
    d_bias = d_hidden.sum(axis=0)

    d_pairs = (d_hidden @ params.pair_proj).reshape(length, length, 2 * params.emb_dim)
    d_emb = d_pairs[:, :, : params.emb_dim].sum(axis=1)
    d_emb += d_pairs[:, :, params.emb_dim :].sum(axis=0)

    return ScorerGrads(
        pair_proj=d_proj, pair_bias=d_bias, rel_tag_emb=d_rel, emb=d_emb
    )


def predict_tags(grid: ScoreGrid, mask: np.ndarray | None = None) -> TagMatrix:
    """Argmax tag per masked-in cell; exact ties resolve to NONE.

    NONE picks up all ties because a tie carries no evidence for a boundary
    and a spurious boundary tag fabricates triples.
    """
    s = _scores_cell_major(grid)
    best = s.argmax(axis=3)
    top = np.take_along_axis(s, best[..., None], axis=3)
    tied = (s == top).sum(axis=3) > 1
    best[tied] = int(Tag.NONE)
    if mask is not None:
        best[~mask] = int(Tag.NONE)

    matrix = TagMatrix(length=grid.length, num_relations=grid.num_relations)
    for i, k, j in zip(*np.nonzero(best)):
        matrix.cells[(int(i), int(k), int(j))] = Tag(best[i, k, j])
    return matrix
