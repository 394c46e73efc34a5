"""Relevance scoring and the margin ranking loss.

A candidate's score mixes an explicit term, the squared ball distance
to the document point, with an implicit one, a hyperbolic linear map of
the phrase point read back in the tangent space. Both the distance and
margin terms carry the 1/sqrt(d_h) scale that keeps score magnitudes
comparable across embedding widths. Training minimizes a hinge over
positive/negative score pairs; inference just sorts the scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import hyperops
from .autodiff import Tensor, constant, relu
from .candidates import Candidate


@dataclass(frozen=True)
class ScoringConfig:
    """Knobs of the score itself, shared by training and inference."""

    hyper_dim: int = 768
    curvature: float = 1.0
    mix_weight: float = 0.5    # weight of the distance term vs the linear term
    margin: float = 1.0


def context_feature(phrases: Tensor, weight: Tensor, bias: Tensor | None,
                    c: float) -> Tensor:
    """The implicit relevance term: hyperbolic linear map to a 1-D ball.

    Matrix-multiplies the phrase point into a one-dimensional ball,
    offsets by a lifted bias, and reads the coordinate back through the
    origin log map. Shapes (K, d_h) -> (K, 1).
    """
    z = hyperops.mobius_matvec(weight.T, phrases, c)
    if bias is not None:
        z = hyperops.mobius_add(z, hyperops.expmap0(bias, c), c)
    return hyperops.logmap0(z, c)


def relevance_graph(phrases: Tensor, doc_point: Tensor, weight: Tensor,
                    bias: Tensor | None, cfg: ScoringConfig) -> Tensor:
    """Scores for a (K, d_h) phrase stack against one document point, shape (K,)."""
    c = cfg.curvature
    d = hyperops.distance(phrases, doc_point, c)          # (K, 1)
    fc = context_feature(phrases, weight, bias, c)        # (K, 1)
    s = -(cfg.mix_weight * (d * d)) / math.sqrt(cfg.hyper_dim) \
        + (1.0 - cfg.mix_weight) * fc
    return s.reshape(-1)


def relevance(phrase: np.ndarray, doc_point: np.ndarray, weight: np.ndarray,
              bias: np.ndarray | None, cfg: ScoringConfig) -> float:
    """Eager single-phrase score; same arithmetic as the graph path."""
    phrases = constant(np.asarray(phrase, dtype=np.float64).reshape(1, -1))
    s = relevance_graph(phrases, constant(doc_point), constant(weight),
                        None if bias is None else constant(bias), cfg)
    return float(s.data[0])


def f_c_scalar(phrase: np.ndarray, weight: np.ndarray, bias: np.ndarray | None,
               c: float) -> float:
    """Eager implicit-term value for one phrase."""
    phrases = constant(np.asarray(phrase, dtype=np.float64).reshape(1, -1))
    out = context_feature(phrases, constant(weight),
                          None if bias is None else constant(bias), c)
    return float(out.data[0, 0])


def triplet_loss_graph(pos: Tensor, neg: Tensor, cfg: ScoringConfig) -> Tensor:
    """Mean hinge over all positive/negative pairs; scalar Tensor.

    The margin is scaled by 1/sqrt(d_h) exactly like the distance term,
    so the loss is invariant to the embedding-width rescaling of scores.
    """
    if pos.size == 0 or neg.size == 0:
        raise ValueError("triplet loss needs at least one positive and one negative")
    m = cfg.margin / math.sqrt(cfg.hyper_dim)
    diff = m - pos.reshape(-1, 1) + neg.reshape(1, -1)
    return relu(diff).mean()


def triplet_loss(pos, neg, cfg: ScoringConfig) -> float:
    """Eager loss on plain score arrays."""
    pos = np.atleast_1d(np.asarray(pos, dtype=np.float64))
    neg = np.atleast_1d(np.asarray(neg, dtype=np.float64))
    return triplet_loss_graph(constant(pos), constant(neg), cfg).item()


@dataclass
class ScoredCandidate:
    candidate: Candidate
    score: float


@dataclass
class ScoredDocument:
    doc_id: str
    ranked: list[ScoredCandidate]

    def top(self, k: int) -> list[ScoredCandidate]:
        return self.ranked[:k]


def rank_candidates(doc_id: str, cands: list[Candidate], scores) -> ScoredDocument:
    """Sort by score descending, ties by earlier start then shorter length.

    Deduplicates by stemmed form keeping the best-scored instance;
    extraction already dedups, so this is a no-op there, but the
    contract holds for any caller.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if len(cands) != len(scores):
        raise ValueError(f"{len(cands)} candidates vs {len(scores)} scores")
    if len(scores) and not np.all(np.isfinite(scores)):
        raise ValueError("non-finite candidate score")
    order = sorted(range(len(cands)),
                   key=lambda i: (-scores[i], cands[i].start, cands[i].length))
    ranked = []
    seen: set[tuple[str, ...]] = set()
    for i in order:
        if cands[i].stems in seen:
            continue
        seen.add(cands[i].stems)
        ranked.append(ScoredCandidate(cands[i], float(scores[i])))
    return ScoredDocument(doc_id, ranked)


def pairwise_ranking_accuracy(pos_scores, neg_scores) -> float:
    """Fraction of (positive, negative) pairs ordered correctly (strictly)."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        return 1.0
    return float(np.mean(pos[:, None] > neg[None, :]))
