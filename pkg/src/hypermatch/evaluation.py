"""Precision/recall/F1 at K over stemmed phrase matches.

Predictions and gold keyphrases are both reduced to stemmed token
sequences before comparison; a hit is an exact stemmed-sequence match.
Metrics are macro averaged: per-document F1 first, then the mean over
documents. Documents whose gold set is empty after stemming dedup are
excluded from the averages and counted separately.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .stem import stem_phrase

DEFAULT_KS = (1, 3, 5, 10)


@dataclass(frozen=True)
class MetricRow:
    k: int
    precision: float
    recall: float
    f1: float
    num_docs: int
    num_excluded: int


@dataclass
class EvalReport:
    rows: list[MetricRow]

    def row(self, k: int) -> MetricRow:
        for r in self.rows:
            if r.k == k:
                return r
        raise KeyError(f"no row for k={k}")

    def to_json(self) -> str:
        return json.dumps({"metrics": [vars(r) for r in self.rows]}, indent=2)

    def format_table(self) -> str:
        lines = [f"{'k':>4} {'precision':>10} {'recall':>10} {'f1':>10} "
                 f"{'num_docs':>9} {'num_excluded':>13}"]
        for r in self.rows:
            lines.append(f"{r.k:>4} {r.precision:>10.4f} {r.recall:>10.4f} "
                         f"{r.f1:>10.4f} {r.num_docs:>9} {r.num_excluded:>13}")
        return "\n".join(lines)


def _dedup_stems(phrases) -> list[tuple[str, ...]]:
    seen: set[tuple[str, ...]] = set()
    out = []
    for phrase in phrases:
        stems = stem_phrase(phrase)
        if stems and stems not in seen:
            seen.add(stems)
            out.append(stems)
    return out


def document_metrics(predicted, gold, k: int) -> tuple[float, float, float]:
    """(P, R, F1) at K for one document; raises if gold is empty.

    P divides by min(K, prediction count) so short candidate lists are
    not penalized; R divides by the gold count. Both use the stemmed
    deduplicated forms.
    """
    pred_stems = _dedup_stems(predicted)
    gold_stems = _dedup_stems(gold)
    if not gold_stems:
        raise ValueError("empty gold set; exclude this document instead")
    top = pred_stems[:k]
    hits = sum(1 for p in top if p in set(gold_stems))
    denom = min(k, len(pred_stems))
    precision = hits / denom if denom else 0.0
    recall = hits / len(gold_stems)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def evaluate(predictions: dict[str, list], gold: dict[str, list],
             ks=DEFAULT_KS) -> EvalReport:
    """Macro-averaged metrics over a corpus.

    `predictions` maps doc id to a ranked list of phrases (token
    sequences); `gold` maps doc id to gold keyphrases. Every document
    in `gold` participates; a missing prediction entry counts as an
    empty ranking. Order of documents never matters.
    """
    rows = []
    for k in ks:
        total_p = total_r = total_f1 = 0.0
        included = excluded = 0
        for doc_id in sorted(gold):
            if not _dedup_stems(gold[doc_id]):
                excluded += 1
                continue
            p, r, f1 = document_metrics(predictions.get(doc_id, []), gold[doc_id], k)
            total_p += p
            total_r += r
            total_f1 += f1
            included += 1
        if included:
            rows.append(MetricRow(k, total_p / included, total_r / included,
                                  total_f1 / included, included, excluded))
        else:
            rows.append(MetricRow(k, 0.0, 0.0, 0.0, 0, excluded))
    return EvalReport(rows)
