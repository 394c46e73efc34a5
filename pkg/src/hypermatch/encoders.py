"""Token mixing, phrase encoding, and document encoding.

The encoder stack turns a (M, L, d_r) stack of per-layer token vectors
into ball points: an attention-weighted mix over the L layers per
token, per-width convolution banks lifted through the origin exp map
for phrases, and a Lorentz-weighted midpoint of lifted tokens for the
document. Everything here builds graph Tensors so one code path serves
both training and inference.
"""

from __future__ import annotations

from .autodiff import Tensor, concat, conv1d, gather, matmul, softmax
from .hyperops import einstein_midpoint, expmap0


def adaptive_mix(layers: Tensor, attn: Tensor, proj: Tensor,
                 use_mixing: bool = True) -> tuple[Tensor, Tensor | None]:
    """Mix the L layer vectors of each token into one d_r vector.

    Per token: logits over layers from the attention vector, softmax,
    weighted layer sum, then the post-mix projection. With mixing
    disabled only the last layer is used, untouched; the mixing
    parameters then receive exactly zero gradient.

    Returns (mixed (M, d_r), weights (M, L) or None).
    """
    if layers.ndim != 3:
        raise ValueError(f"expected (M, L, d_r) layer stack, got shape {layers.shape}")
    m, n_layers, d_r = layers.shape
    if use_mixing and (attn.shape != (d_r,) or proj.shape != (d_r, d_r)):
        raise ValueError(
            f"mixing parameters {attn.shape}/{proj.shape} do not fit d_r={d_r}"
        )
    if not use_mixing:
        return layers[:, n_layers - 1, :], None
    logits = matmul(layers, attn)                     # (M, L)
    alpha = softmax(logits, axis=-1)
    weighted = (alpha.reshape(m, n_layers, 1) * layers).sum(axis=1)
    mixed = matmul(weighted, proj.T)
    return mixed, alpha


def encode_phrases(mixed: Tensor, bank: dict[int, tuple[Tensor, Tensor | None]],
                   c: float) -> dict[int, Tensor]:
    """Ball points for every span, one (M - n + 1, d_h) tensor per width n.

    Row i of the width-n tensor is the span starting at token i: the
    width-n filter bank over the window, lifted by the origin exp map.
    Widths longer than the document are skipped.
    """
    m = mixed.shape[0]
    out: dict[int, Tensor] = {}
    for n in sorted(bank):
        if n > m:
            continue
        weight, bias = bank[n]
        pre = conv1d(mixed, weight, bias, n)
        out[n] = expmap0(pre, c)
    return out


def gather_phrase_points(points_by_width: dict[int, Tensor],
                         starts_by_width: dict[int, "object"]) -> Tensor:
    """Stack the requested spans, width-grouped, into one (K, d_h) tensor."""
    parts = []
    for n in sorted(starts_by_width):
        starts = starts_by_width[n]
        if len(starts) == 0:
            continue
        parts.append(gather(points_by_width[n], starts))
    if not parts:
        raise ValueError("no candidate spans to encode")
    if len(parts) == 1:
        return parts[0]
    return concat(parts, axis=0)


def lift_tokens(mixed: Tensor, doc_proj: Tensor, c: float) -> Tensor:
    """Project tokens to the tangent space at the origin and lift: (M, d_h)."""
    return expmap0(matmul(mixed, doc_proj), c)


def encode_document(mixed: Tensor, doc_proj: Tensor, c: float) -> Tensor:
    """One ball point (d_h,) for the document: midpoint of lifted tokens."""
    if mixed.shape[0] < 1:
        raise ValueError("cannot encode an empty document")
    return einstein_midpoint(lift_tokens(mixed, doc_proj, c), c)
