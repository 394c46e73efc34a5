"""Finite-difference validation of the full loss gradient.

Builds a small but complete model instance (mixing, both conv widths,
document pooling, scoring head, hinge loss), runs one backward pass,
and compares every parameter coordinate against central differences.
This is the strongest whole-chain check the engine has; the property
suite and the acceptance tests both call it.
"""

from __future__ import annotations

import numpy as np

from . import model as model_mod
from .candidates import NEGATIVE, POSITIVE, Candidate, group_by_width
from .model import ModelConfig, Parameters, PreparedDocument

TOY_CONFIG = ModelConfig(layers=3, embed_dim=8, hyper_dim=8, max_phrase_len=2,
                         curvature=1.0, score_bias=True)

# Six spans over a 12-token document: two positives, four negatives,
# both widths exercised.
TOY_SPANS = ((0, 1), (2, 2), (4, 1), (6, 2), (9, 1), (10, 2))
TOY_POSITIVES = 2


def toy_document(seed: int, cfg: ModelConfig = TOY_CONFIG,
                 n_tokens: int = 12) -> PreparedDocument:
    """A hand-sized document with fixed spans and random layer stacks."""
    rng = np.random.default_rng(seed)
    layers = rng.normal(0.0, 0.35, (n_tokens, cfg.layers, cfg.embed_dim))
    tokens = [f"tok{i}" for i in range(n_tokens)]
    cands = []
    for idx, (start, length) in enumerate(TOY_SPANS):
        surface = tuple(tokens[start:start + length])
        label = POSITIVE if idx < TOY_POSITIVES else NEGATIVE
        cands.append(Candidate(start, length, surface, surface, label))
    groups = group_by_width(cands)
    labels = np.asarray([cands[i].label == POSITIVE for i in groups.order])
    positions = np.arange(len(groups.order))
    return PreparedDocument(
        doc_id=f"toy-{seed}",
        tokens=tokens,
        layers=layers,
        candidates=cands,
        groups=groups,
        positives=positions[labels],
        negatives=positions[~labels],
    )


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def finite_difference_check(seed: int, cfg: ModelConfig = TOY_CONFIG,
                            step: float = 1e-5) -> float:
    """Max relative error between backward and central differences.

    Perturbs every coordinate of every parameter tensor.
    """
    doc = toy_document(seed, cfg)
    params = model_mod.init_parameters(cfg, seed)
    loss = model_mod.loss_graph(doc, params, cfg)
    params.zero_grad()
    loss.backward()

    def loss_at(arrays: dict[str, np.ndarray]) -> float:
        frozen = Parameters({
            name: model_mod.Tensor(arrays[name]) for name, _ in params.named()
        })
        return model_mod.loss_graph(doc, frozen, cfg).item()

    base = params.arrays()
    worst = 0.0
    for name, tensor in params.named():
        grad = tensor.grad
        if grad is None:
            grad = np.zeros_like(tensor.data)
        flat_grad = grad.reshape(-1)
        for i in range(tensor.data.size):
            for sign, store in ((+1, "hi"), (-1, "lo")):
                arrays = {k: v.copy() for k, v in base.items()}
                arrays[name].reshape(-1)[i] += sign * step
                if store == "hi":
                    hi = loss_at(arrays)
                else:
                    lo = loss_at(arrays)
            numeric = (hi - lo) / (2.0 * step)
            worst = max(worst, relative_error(flat_grad[i], numeric))
    return worst
