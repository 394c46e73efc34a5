"""Hyperbolic keyphrase extraction.

Phrases and documents are embedded in the Poincare ball, where distance
to a hyperbolic document centroid — mixed with a learned context score —
ranks candidate phrases. The package is organized in layers:

    geometry      Poincare-ball kernels on plain arrays
    autodiff      reverse-mode engine the model is built on
    hyperops      differentiable twins of the geometry kernels
    stem          suffix stripper used for candidate/gold matching
    candidates    n-gram enumeration, labeling, width grouping
    encoders      layer mixing, phrase convolutions, document pooling
    matching      relevance scores, triplet hinge loss, ranking
    model         parameter registry and the end-to-end graphs
    data          corpus + embedding files, synthetic data
    training      AdamW loop, checkpointing, resume
    evaluation    precision/recall/F1 at K
    cli           `hypermatch` command-line front end
"""

from .data import Document, load_corpus, load_embeddings, write_embeddings
from .evaluation import EvalReport, evaluate
from .geometry import PoincareBall
from .model import ModelConfig, init_parameters, prepare_document, rank_document
from .training import TrainConfig, load_parameters, train

__version__ = "0.1.0"

__all__ = [
    "Document",
    "EvalReport",
    "ModelConfig",
    "PoincareBall",
    "TrainConfig",
    "__version__",
    "evaluate",
    "init_parameters",
    "load_corpus",
    "load_embeddings",
    "load_parameters",
    "prepare_document",
    "rank_document",
    "train",
    "write_embeddings",
]
