"""Optimization loop: batching, AdamW with warm-up, checkpoint/resume.

Every run is a pure function of (seed, config, data). Shuffling and
negative subsampling draw from generators seeded by (seed, epoch) and
(seed, document ordinal, epoch), never from a shared stream, so a
resumed run replays the identical trajectory bit for bit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint as ckpt
from . import model as model_mod
from .autodiff import NumericError
from .matching import pairwise_ranking_accuracy
from .model import ModelConfig, Parameters, PreparedDocument

log = logging.getLogger("hypermatch")


class TrainingError(RuntimeError):
    """A step failed in a way that invalidates the run."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-5
    batch_size: int = 72
    warmup: float = 0.10
    weight_decay: float = 0.01
    epochs: int = 10
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 1.0          # global norm; 0 disables
    negative_cap: int = 64          # per-document negatives per epoch
    eval_every: int = 1             # epochs between held-out evaluations
    patience: int = 3               # evaluations without F1@3 improvement
    checkpoint_every: int = 0       # epochs; 0 = final only

    def validate(self) -> "TrainConfig":
        if self.learning_rate < 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("learning rate, batch size, and epochs must be positive")
        if not 0.0 <= self.warmup < 1.0:
            raise ValueError("warm-up proportion must lie in [0, 1)")
        if self.negative_cap < 1:
            raise ValueError("negative cap must be >= 1")
        return self


def lr_multiplier(step: int, total_steps: int, warmup: float) -> float:
    """Linear warm-up then linear decay to zero; step is 1-based."""
    if total_steps <= 0:
        return 0.0
    boundary = warmup * total_steps
    if boundary >= 1.0 and step <= boundary:
        return step / boundary
    return max(0.0, (total_steps - step) / (total_steps - boundary))


class AdamW:
    """Decoupled weight decay Adam over named parameter tensors."""

    def __init__(self, cfg: TrainConfig, params: Parameters):
        self.cfg = cfg
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.named()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.named()}

    def apply(self, params: Parameters, lr_scale: float) -> None:
        cfg = self.cfg
        self.step_count += 1
        t = self.step_count
        lr = cfg.learning_rate * lr_scale
        bias1 = 1.0 - cfg.beta1 ** t
        bias2 = 1.0 - cfg.beta2 ** t
        for name, param in params.named():
            g = param.grad
            if g is None:
                g = np.zeros_like(param.data)
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            update = (m / bias1) / (np.sqrt(v / bias2) + cfg.adam_eps)
            param.data = param.data - lr * (update + cfg.weight_decay * param.data)

    def state_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name, arr in self.m.items():
            out[f"adam.m.{name}"] = arr
        for name, arr in self.v.items():
            out[f"adam.v.{name}"] = arr
        return out

    def load_state(self, tensors: dict[str, np.ndarray], step: int) -> None:
        for name in self.m:
            self.m[name] = tensors[f"adam.m.{name}"].copy()
            self.v[name] = tensors[f"adam.v.{name}"].copy()
        self.step_count = step


def global_grad_norm(params: Parameters) -> float:
    total = 0.0
    for _, t in params.named():
        if t.grad is not None:
            total += float(np.sum(t.grad * t.grad))
    return math.sqrt(total)


def clip_gradients(params: Parameters, max_norm: float) -> float:
    """Scale all gradients so the global norm is at most max_norm."""
    norm = global_grad_norm(params)
    if max_norm > 0.0 and norm > max_norm:
        scale = max_norm / norm
        for _, t in params.named():
            if t.grad is not None:
                t.grad = t.grad * scale
    return norm


def select_negatives(doc: PreparedDocument, epoch: int, cfg: TrainConfig) -> np.ndarray:
    """The document's negatives, capped by seeded subsampling per epoch."""
    negs = doc.negatives
    if len(negs) <= cfg.negative_cap:
        return negs
    rng = np.random.default_rng([cfg.seed, doc.ordinal, epoch])
    picked = rng.choice(len(negs), size=cfg.negative_cap, replace=False)
    return negs[np.sort(picked)]


def train_step(params: Parameters, opt: AdamW, batch: list[PreparedDocument],
               model_cfg: ModelConfig, cfg: TrainConfig, lr_scale: float,
               epoch: int) -> float:
    """One optimizer update on a batch; returns the batch mean loss."""
    params.zero_grad()
    inv = 1.0 / len(batch)
    total = 0.0
    for doc in batch:
        negatives = select_negatives(doc, epoch, cfg)
        try:
            loss = model_mod.loss_graph(doc, params, model_cfg, negatives)
            loss.backward(seed=np.full((), inv))
        except NumericError as e:
            raise TrainingError(f"document '{doc.doc_id}': {e}") from e
        total += loss.item() * inv
    clip_gradients(params, cfg.grad_clip)
    opt.apply(params, lr_scale)
    return total


@dataclass
class TrainResult:
    params: Parameters
    optimizer: AdamW
    history: list[dict] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def step(self) -> int:
        return self.optimizer.step_count


def _epoch_of(step: int, steps_per_epoch: int) -> int:
    return step // steps_per_epoch


def train(docs: list[PreparedDocument], model_cfg: ModelConfig, cfg: TrainConfig,
          eval_fn=None, on_epoch=None, checkpoint_path=None,
          resume_from=None) -> TrainResult:
    """Run the full loop over prepared documents.

    `docs` must all be trainable (>= 1 positive and negative); filter
    with `trainable_documents` first. `eval_fn(params) -> float` is the
    held-out F1@3 used for early stopping; `on_epoch(epoch, record,
    params) -> bool` can request a stop (record holds the epoch's mean
    loss).
    Checkpoints land on epoch boundaries, so resuming replays the rest
    of the run bit-identically.
    """
    cfg.validate()
    model_cfg.validate()
    if not docs:
        raise ValueError("training set is empty")
    bad = [d.doc_id for d in docs if not d.trainable]
    if bad:
        raise ValueError(f"untrainable documents passed to train(): {bad[:5]}")

    params = model_mod.init_parameters(model_cfg, cfg.seed)
    opt = AdamW(cfg, params)
    steps_per_epoch = math.ceil(len(docs) / cfg.batch_size)
    total_steps = steps_per_epoch * cfg.epochs
    start_epoch = 0
    if resume_from is not None:
        step, cfg_hash, tensors = ckpt.load_checkpoint(resume_from)
        expect = ckpt.config_hash(model_mod.config_fingerprint_fields(model_cfg))
        if cfg_hash != expect:
            raise TrainingError(
                f"checkpoint '{resume_from}' was written under a different "
                f"model configuration")
        params.load_arrays(tensors)
        opt.load_state(tensors, step)
        if step % steps_per_epoch:
            raise TrainingError(
                f"checkpoint step {step} is not an epoch boundary for "
                f"{steps_per_epoch} steps/epoch")
        start_epoch = _epoch_of(step, steps_per_epoch)

    result = TrainResult(params, opt)
    best_metric = -math.inf
    stale = 0
    for epoch in range(start_epoch, cfg.epochs):
        perm = np.random.default_rng([cfg.seed, epoch]).permutation(len(docs))
        epoch_loss = 0.0
        for b in range(steps_per_epoch):
            batch = [docs[i] for i in perm[b * cfg.batch_size:(b + 1) * cfg.batch_size]]
            lr_scale = lr_multiplier(opt.step_count + 1, total_steps, cfg.warmup)
            loss = train_step(params, opt, batch, model_cfg, cfg, lr_scale, epoch)
            epoch_loss += loss * len(batch)
        record = {"epoch": epoch, "step": opt.step_count,
                  "loss": epoch_loss / len(docs)}
        if (eval_fn is not None and cfg.eval_every > 0
                and (epoch + 1) % cfg.eval_every == 0):
            metric = float(eval_fn(params))
            record["eval_f1"] = metric
            if metric > best_metric:
                best_metric = metric
                stale = 0
            else:
                stale += 1
        result.history.append(record)
        log.info("epoch %d: loss %.6f%s", epoch, record["loss"],
                 f", eval {record['eval_f1']:.4f}" if "eval_f1" in record else "")
        if checkpoint_path and cfg.checkpoint_every and \
                (epoch + 1) % cfg.checkpoint_every == 0:
            save_training_checkpoint(checkpoint_path, params, opt, model_cfg)
        if eval_fn is not None and stale >= cfg.patience:
            result.stopped_early = True
            break
        if on_epoch is not None and on_epoch(epoch, record, params):
            result.stopped_early = True
            break
    if checkpoint_path:
        save_training_checkpoint(checkpoint_path, params, opt, model_cfg)
    return result


def save_training_checkpoint(path, params: Parameters, opt: AdamW,
                             model_cfg: ModelConfig) -> None:
    tensors = {name: t.data for name, t in params.named()}
    tensors.update(opt.state_tensors())
    cfg_hash = ckpt.config_hash(model_mod.config_fingerprint_fields(model_cfg))
    ckpt.save_checkpoint(path, opt.step_count, cfg_hash, tensors)


def load_parameters(path, model_cfg: ModelConfig) -> tuple[Parameters, int]:
    """Parameters (without optimizer state) from a checkpoint, hash-checked."""
    step, cfg_hash, tensors = ckpt.load_checkpoint(path)
    expect = ckpt.config_hash(model_mod.config_fingerprint_fields(model_cfg))
    if cfg_hash != expect:
        raise TrainingError(
            f"checkpoint '{path}' does not match the active model configuration")
    params = model_mod.init_parameters(model_cfg, seed=0)
    params.load_arrays(tensors)
    return params, step


def trainable_documents(docs: list[PreparedDocument]) -> tuple[list[PreparedDocument], int]:
    """Split off documents usable for the loss; returns (kept, skipped count)."""
    kept = [d for d in docs if d.trainable]
    skipped = len(docs) - len(kept)
    if skipped:
        log.info("skipping %d document(s) without both positives and negatives",
                 skipped)
    return kept, skipped


def training_accuracy(docs: list[PreparedDocument], params: Parameters,
                      model_cfg: ModelConfig) -> float:
    """Mean pairwise ranking accuracy over documents (1.0 = every pair ordered)."""
    accs = []
    for doc in docs:
        grouped = model_mod.score_graph(
            doc, Parameters({n: t.detach() for n, t in params.named()}),
            model_cfg).data
        accs.append(pairwise_ranking_accuracy(grouped[doc.positives],
                                              grouped[doc.negatives]))
    return float(np.mean(accs)) if accs else 1.0
