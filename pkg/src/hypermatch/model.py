"""Model assembly: parameters, per-document graphs, and scoring.

Ties the encoder stack to the relevance head. A document enters as a
(M, L, d_r) layer stack plus its candidate spans; one graph scores all
candidates in width-grouped batches, and the same graph feeds either
the ranking path (inference) or the hinge loss (training).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import candidates as cand_mod
from . import encoders, matching
from .autodiff import Tensor, constant, gather
from .candidates import Candidate, SpanGroups
from .matching import ScoringConfig


@dataclass(frozen=True)
class ModelConfig:
    """Shapes and scoring constants; defaults are the full-scale ones."""

    layers: int = 12
    embed_dim: int = 768          # d_r, per-layer token width
    hyper_dim: int = 768          # d_h, ball dimension
    max_phrase_len: int = 5
    max_seq_len: int = 512
    curvature: float = 1.0
    mix_weight: float = 0.5
    margin: float = 1.0
    conv_bias: bool = False
    score_bias: bool = True
    use_mixing: bool = True

    def scoring(self) -> ScoringConfig:
        return ScoringConfig(hyper_dim=self.hyper_dim, curvature=self.curvature,
                             mix_weight=self.mix_weight, margin=self.margin)

    def validate(self) -> "ModelConfig":
        if self.layers < 1 or self.embed_dim < 1 or self.hyper_dim < 1:
            raise ValueError("layers and dimensions must be positive")
        if self.max_phrase_len < 1:
            raise ValueError("max phrase length must be >= 1")
        if not 0.0 <= self.mix_weight <= 1.0:
            raise ValueError("mix weight must lie in [0, 1]")
        if self.curvature < 0.0:
            raise ValueError("curvature must be nonnegative")
        return self


class Parameters:
    """Named trainable tensors in a stable order, with gradient slots."""

    def __init__(self, tensors: dict[str, Tensor]):
        self.tensors = dict(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def named(self):
        return self.tensors.items()

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, t in self.named():
            src = arrays.get(name)
            if src is None:
                raise KeyError(f"missing parameter '{name}'")
            if src.shape != t.data.shape:
                raise ValueError(
                    f"parameter '{name}' has shape {src.shape}, expected {t.data.shape}"
                )
            t.data = np.asarray(src, dtype=np.float64).copy()


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {
        "mix_attn": (cfg.embed_dim,),
        "mix_proj": (cfg.embed_dim, cfg.embed_dim),
    }
    for n in range(1, cfg.max_phrase_len + 1):
        shapes[f"conv{n}_weight"] = (cfg.hyper_dim, n * cfg.embed_dim)
        if cfg.conv_bias:
            shapes[f"conv{n}_bias"] = (cfg.hyper_dim,)
    shapes["doc_proj"] = (cfg.embed_dim, cfg.hyper_dim)
    shapes["score_weight"] = (cfg.hyper_dim, 1)
    if cfg.score_bias:
        shapes["score_bias"] = (1,)
    return shapes


INIT_STD = 0.02


def init_parameters(cfg: ModelConfig, seed: int) -> Parameters:
    """Gaussian init, mean 0 std 0.02, drawn in fixed name order."""
    rng = np.random.default_rng(seed)
    tensors = {
        name: Tensor(rng.normal(0.0, INIT_STD, shape), requires_grad=True)
        for name, shape in parameter_shapes(cfg).items()
    }
    return Parameters(tensors)


@dataclass
class PreparedDocument:
    """Everything the graph needs about one document, computed once."""

    doc_id: str
    tokens: list[str]
    layers: np.ndarray                      # (M, L, d_r) float64
    candidates: list[Candidate]
    groups: SpanGroups
    positives: np.ndarray                   # width-grouped score positions
    negatives: np.ndarray
    ordinal: int = 0                        # position in the dataset, seeds sampling

    @property
    def trainable(self) -> bool:
        return len(self.positives) > 0 and len(self.negatives) > 0


def prepare_document(doc_id: str, tokens, gold, layers: np.ndarray,
                     cfg: ModelConfig, ordinal: int = 0) -> PreparedDocument:
    tokens = list(tokens)
    layers = np.asarray(layers, dtype=np.float64)
    if len(tokens) < 1:
        raise ValueError(f"document '{doc_id}' has no tokens")
    if layers.shape != (len(tokens), cfg.layers, cfg.embed_dim):
        raise ValueError(
            f"document '{doc_id}': layer stack {layers.shape} does not match "
            f"({len(tokens)}, {cfg.layers}, {cfg.embed_dim})"
        )
    cands = cand_mod.extract_candidates(tokens, cfg.max_phrase_len)
    cand_mod.label_candidates(cands, gold)
    groups = cand_mod.group_by_width(cands)
    labels = np.asarray([cands[i].label == cand_mod.POSITIVE for i in groups.order])
    positions = np.arange(len(groups.order))
    return PreparedDocument(
        doc_id=doc_id,
        tokens=tokens,
        layers=layers,
        candidates=cands,
        groups=groups,
        positives=positions[labels],
        negatives=positions[~labels],
        ordinal=ordinal,
    )


def _conv_bank(params: Parameters, cfg: ModelConfig, widths) -> dict[int, tuple[Tensor, Tensor | None]]:
    bank = {}
    for n in widths:
        bias = params[f"conv{n}_bias"] if cfg.conv_bias else None
        bank[n] = (params[f"conv{n}_weight"], bias)
    return bank


def score_graph(doc: PreparedDocument, params: Parameters,
                cfg: ModelConfig) -> Tensor:
    """Scores for every candidate, width-grouped order, shape (K,)."""
    layers = constant(doc.layers)
    mixed, _ = encoders.adaptive_mix(layers, params["mix_attn"],
                                     params["mix_proj"], cfg.use_mixing)
    doc_point = encoders.encode_document(mixed, params["doc_proj"], cfg.curvature)
    bank = _conv_bank(params, cfg, doc.groups.starts.keys())
    points = encoders.encode_phrases(mixed, bank, cfg.curvature)
    phrases = encoders.gather_phrase_points(points, doc.groups.starts)
    bias = params["score_bias"] if cfg.score_bias else None
    return matching.relevance_graph(phrases, doc_point, params["score_weight"],
                                    bias, cfg.scoring())


def score_document(doc: PreparedDocument, params: Parameters,
                   cfg: ModelConfig) -> np.ndarray:
    """Candidate scores in original enumeration order (no gradients kept)."""
    detached = Parameters({name: t.detach() for name, t in params.named()})
    grouped = score_graph(doc, detached, cfg).data
    scores = np.empty_like(grouped)
    scores[doc.groups.order] = grouped
    return scores


def rank_document(doc: PreparedDocument, params: Parameters,
                  cfg: ModelConfig) -> matching.ScoredDocument:
    scores = score_document(doc, params, cfg)
    return matching.rank_candidates(doc.doc_id, doc.candidates, scores)


def loss_graph(doc: PreparedDocument, params: Parameters, cfg: ModelConfig,
               negative_positions: np.ndarray | None = None) -> Tensor:
    """Scalar hinge loss for one document.

    `negative_positions` lets the trainer pass a subsample; defaults to
    every negative.
    """
    if not doc.trainable:
        raise ValueError(
            f"document '{doc.doc_id}' lacks a positive or negative candidate"
        )
    scores = score_graph(doc, params, cfg)
    neg = doc.negatives if negative_positions is None else negative_positions
    pos_scores = gather(scores, doc.positives)
    neg_scores = gather(scores, neg)
    return matching.triplet_loss_graph(pos_scores, neg_scores, cfg.scoring())


def config_fingerprint_fields(cfg: ModelConfig) -> dict:
    """The fields a checkpoint must agree on before scores are comparable."""
    return {
        "layers": cfg.layers,
        "embed_dim": cfg.embed_dim,
        "hyper_dim": cfg.hyper_dim,
        "max_phrase_len": cfg.max_phrase_len,
        "curvature": cfg.curvature,
        "mix_weight": cfg.mix_weight,
        "margin": cfg.margin,
        "conv_bias": cfg.conv_bias,
        "score_bias": cfg.score_bias,
        "use_mixing": cfg.use_mixing,
    }
