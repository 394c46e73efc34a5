"""Release acceptance gate.

One test per criterion. Each prints a single machine-readable line to
the real stdout (bypassing capture) so the verdicts are visible in any
test log, then asserts. Budgets are wall-clock on a single core.
"""

import math
import time

import numpy as np

import conftest
from hypermatch import data, evaluation, geometry, gradcheck, matching, model, training
from hypermatch.matching import ScoringConfig
from hypermatch.model import ModelConfig
from hypermatch.training import TrainConfig


def _report(name: str, ok: bool, detail: str) -> None:
    verdict = "PASS" if ok else "FAIL"
    line = f"[acceptance] {name}: {verdict} ({detail})"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)


# ---------------------------------------------------------------- geometry

def test_geometry_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)

    # Identity and inverse, several curvatures.
    exact_err = 0.0
    for c in (0.5, 1.0, 2.0):
        pts = geometry.project_to_ball(rng.normal(0.0, 0.4, (64, 5)), c)
        zero = np.zeros(5)
        exact_err = max(
            exact_err,
            np.abs(geometry.mobius_add(zero, pts, c) - pts).max(),
            np.abs(geometry.mobius_add(pts, np.broadcast_to(zero, pts.shape), c) - pts).max(),
            np.abs(geometry.mobius_add(-pts, pts, c)).max(),
        )
    # Collinear closed form: 0.3 (+) 0.4 along one axis at c=1.
    x = np.array([0.3, 0.0])
    y = np.array([0.4, 0.0])
    exact_err = max(exact_err, abs(geometry.mobius_add(x, y, 1.0)[0] - 0.625))

    # Near-flat curvature degenerates to Euclidean arithmetic.
    flat_rng = np.random.default_rng(123)
    c_flat = 1e-10
    dirs = flat_rng.normal(size=(1000, 2, 8))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    radii = flat_rng.uniform(0.0, 0.5, size=(1000, 2, 1))
    xs, ys = (dirs * radii)[:, 0], (dirs * radii)[:, 1]
    dist_err = np.abs(
        geometry.poincare_distance(xs, ys, c_flat) - 2.0 * np.linalg.norm(xs - ys, axis=-1)
    ).max()
    add_err = np.linalg.norm(geometry.mobius_add(xs, ys, c_flat) - (xs + ys), axis=-1).max()

    # Exp/log inversion at the origin and at arbitrary base points.
    explog_err = 0.0
    for c in (0.5, 1.0):
        base = geometry.project_to_ball(rng.normal(0.0, 0.3, (64, 6)), c)
        target = geometry.project_to_ball(rng.normal(0.0, 0.3, (64, 6)), c)
        v = geometry.logmap(base, target, c)
        explog_err = max(
            explog_err,
            np.abs(geometry.expmap(base, v, c) - target).max(),
            np.abs(geometry.expmap0(geometry.logmap0(target, c), c) - target).max(),
        )

    # Klein chart roundtrip.
    pts = geometry.project_to_ball(rng.normal(0.0, 0.4, (128, 4)), 1.0)
    klein_err = np.abs(
        geometry.klein_to_poincare(geometry.poincare_to_klein(pts, 1.0), 1.0) - pts
    ).max()

    # Einstein midpoint of a symmetric pair sits at the origin.
    mid_err = 0.0
    for i in range(64):
        p = geometry.project_to_ball(rng.normal(0.0, 0.4, 4), 1.0)
        mid = geometry.einstein_midpoint(np.stack([p, -p]), 1.0)
        mid_err = max(mid_err, float(np.linalg.norm(mid)))

    elapsed = time.perf_counter() - t0
    ok = (
        exact_err <= 1e-12
        and dist_err <= 1e-4
        and add_err <= 1e-4
        and explog_err <= 1e-6
        and klein_err <= 1e-9
        and mid_err <= 1e-9
        and elapsed < 5.0
    )
    _report(
        "geometry-suite", ok,
        f"identities {exact_err:.2e}, flat-limit dist {dist_err:.2e} add {add_err:.2e}, "
        f"exp/log {explog_err:.2e}, klein {klein_err:.2e}, midpoint {mid_err:.2e}, "
        f"{elapsed:.2f}s",
    )
    assert exact_err <= 1e-12
    assert dist_err <= 1e-4
    assert add_err <= 1e-4
    assert explog_err <= 1e-6
    assert klein_err <= 1e-9
    assert mid_err <= 1e-9
    assert elapsed < 5.0


# ---------------------------------------------------------------- gradients

def test_gradient_check():
    t0 = time.perf_counter()
    worst = max(gradcheck.finite_difference_check(seed) for seed in range(5))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 60.0
    _report("gradient-check", ok,
            f"max rel err {worst:.3e} over 5 seeds, {elapsed:.1f}s")
    assert worst <= 1e-4
    assert elapsed < 60.0


# ---------------------------------------------------------------- training

OVERFIT_MODEL = ModelConfig(layers=2, embed_dim=16, hyper_dim=16, max_phrase_len=2)
LAYER_SEED = 11


def _prepare_corpus(docs, cfg):
    prepared = []
    for i, doc in enumerate(docs):
        layers = data.synth_layers(doc.tokens, cfg.layers, cfg.embed_dim, LAYER_SEED)
        prepared.append(
            model.prepare_document(doc.doc_id, doc.tokens, doc.gold, layers, cfg, ordinal=i)
        )
    return prepared


def _ranking_accuracy(docs, params, cfg):
    """Pair-weighted accuracy pooled over documents."""
    correct = 0.0
    total = 0
    for doc in docs:
        if not doc.trainable:
            continue
        scores = model.score_document(doc, params, cfg)
        grouped = scores[np.asarray(doc.groups.order)]
        acc = matching.pairwise_ranking_accuracy(grouped[doc.positives],
                                                 grouped[doc.negatives])
        pairs = len(doc.positives) * len(doc.negatives)
        correct += acc * pairs
        total += pairs
    return correct / total


def _top_k_predictions(docs, params, cfg, k):
    return {
        doc.doc_id: [list(sc.candidate.surface)
                     for sc in model.rank_document(doc, params, cfg).top(k)]
        for doc in docs
    }


def test_overfit_small_corpus():
    t0 = time.perf_counter()
    corpus = data.synth_corpus(50, seed=11)
    cfg = OVERFIT_MODEL
    prepared = _prepare_corpus(corpus, cfg)
    train_cfg = TrainConfig(learning_rate=0.05, batch_size=10, epochs=200,
                            seed=0, eval_every=0)

    def stop_when_ordered(epoch, record, params):
        return _ranking_accuracy(prepared, params, cfg) == 1.0

    result = training.train(prepared, cfg, train_cfg, on_epoch=stop_when_ordered)

    accuracy = _ranking_accuracy(prepared, result.params, cfg)
    gold = {doc.doc_id: doc.gold for doc in corpus}
    preds = _top_k_predictions(prepared, result.params, cfg, 1)
    f1 = evaluation.evaluate(preds, gold, ks=(1,)).row(1).f1
    elapsed = time.perf_counter() - t0

    ok = accuracy == 1.0 and f1 >= 0.95 and elapsed < 600.0
    _report("overfit-small-corpus", ok,
            f"ranking accuracy {accuracy:.4f}, train F1@1 {f1:.4f}, {elapsed:.1f}s")
    assert accuracy == 1.0
    assert f1 >= 0.95
    assert elapsed < 600.0


def test_curvature_ablation():
    corpus = data.synth_corpus(50, seed=11)
    full_cfg = OVERFIT_MODEL
    flat_cfg = ModelConfig(layers=2, embed_dim=16, hyper_dim=16,
                           max_phrase_len=2, curvature=0.0)
    prepared = _prepare_corpus(corpus, full_cfg)
    train_docs, held_out = prepared[:40], prepared[40:]
    gold = {doc.doc_id: doc.gold for doc in corpus[40:]}

    def arm(cfg):
        scores = []
        for seed in range(5):
            train_cfg = TrainConfig(learning_rate=0.05, batch_size=10,
                                    epochs=60, seed=seed, eval_every=0)
            result = training.train(train_docs, cfg, train_cfg)
            preds = _top_k_predictions(held_out, result.params, cfg, 3)
            scores.append(evaluation.evaluate(preds, gold, ks=(3,)).row(3).f1)
        return np.asarray(scores)

    full = arm(full_cfg)
    flat = arm(flat_cfg)
    # Seed noise on 10 held-out documents is large; the bar is parity,
    # not a win: curved must not lose by more than the flat arm's spread.
    noise = max(2.0 * flat.std(), 0.1)
    ok = full.mean() >= flat.mean() or flat.mean() - full.mean() <= noise
    _report("curvature-ablation", ok,
            f"held-out F1@3 curved {full.mean():.4f}, flat {flat.mean():.4f}, "
            f"noise band {noise:.4f}, 5 seeds/arm")
    assert ok, (full, flat, noise)


# ---------------------------------------------------------------- evaluation

def test_eval_oracle():
    predictions = {
        "docA": [["neural"], ["networks"], ["deep"]],
        "docB": [["hyperbolic"], ["geometry"]],
        "docC": [["wrong"]],
    }
    gold = {
        "docA": [["neural"], ["embeddings"]],
        "docB": [["hyperbolic"], ["geometry"]],
        "docC": [["right"]],
    }

    # Hand-worked per-document case: one hit out of three predictions,
    # two gold phrases.
    p, r, f1 = evaluation.document_metrics(predictions["docA"], gold["docA"], 3)
    single_err = max(abs(p - 1 / 3), abs(r - 0.5), abs(f1 - 0.4))

    report = evaluation.evaluate(predictions, gold, ks=(1, 3, 5, 10))
    expected = {
        1: (2 / 3, 1 / 3, 4 / 9),
        3: (4 / 9, 1 / 2, 7 / 15),
        5: (4 / 9, 1 / 2, 7 / 15),
        10: (4 / 9, 1 / 2, 7 / 15),
    }
    macro_err = 0.0
    for k, (ep, er, ef) in expected.items():
        row = report.row(k)
        macro_err = max(macro_err, abs(row.precision - ep),
                        abs(row.recall - er), abs(row.f1 - ef))

    ok = single_err <= 1e-12 and macro_err <= 1e-12
    _report("eval-oracle", ok,
            f"per-doc err {single_err:.1e}, macro err {macro_err:.1e} over K in 1/3/5/10")
    assert single_err <= 1e-12
    assert macro_err <= 1e-12


# ---------------------------------------------------------------- loss

def test_loss_arithmetic():
    def loss(pos, neg, dim):
        return matching.triplet_loss(pos, neg, ScoringConfig(hyper_dim=dim))

    zero = loss([0.9], [0.1], 4)          # margin 0.5, separation 0.8
    half = loss([0.1], [0.1], 4)          # margin 0.5, no separation
    big = loss([0.1], [0.3], 1)           # margin 1.0, inverted pair

    exact = (
        zero == 0.0
        and half == 0.5
        and big == (1.0 - 0.1) + 0.3
    )

    scaling = all(
        loss([0.1], [0.3], d) == (1.0 / math.sqrt(d) - 0.1) + 0.3
        for d in (1, 4, 768)
    )

    ok = exact and scaling
    _report("loss-arithmetic", ok,
            f"cases ({zero}, {half}, {big}), margin scales 1/sqrt(d) over d in 1/4/768")
    assert zero == 0.0
    assert half == 0.5
    assert big == (1.0 - 0.1) + 0.3
    assert scaling
