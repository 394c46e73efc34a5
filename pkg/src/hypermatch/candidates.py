"""Candidate phrase enumeration and gold labeling.

Candidates are exhaustive n-grams up to a maximum width, deduplicated
by stemmed form (first occurrence wins, enumerating by start position
and then length). A candidate is positive exactly when its stemmed
token sequence equals the stemmed form of some gold keyphrase, the
same matching notion evaluation uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stem import stem_phrase

POSITIVE = "positive"
NEGATIVE = "negative"
UNLABELED = "unlabeled"


@dataclass
class Candidate:
    start: int
    length: int
    surface: tuple[str, ...]
    stems: tuple[str, ...]
    label: str = UNLABELED

    def __post_init__(self):
        if self.length != len(self.surface) or len(self.surface) != len(self.stems):
            raise ValueError("candidate span, surface, and stems disagree on length")


def extract_candidates(tokens, max_len: int) -> list[Candidate]:
    """All n-grams with n in [1, max_len], deduplicated by stemmed form."""
    if max_len < 1:
        raise ValueError(f"max candidate length must be >= 1, got {max_len}")
    seen: dict[tuple[str, ...], None] = {}
    out: list[Candidate] = []
    m = len(tokens)
    for start in range(m):
        for n in range(1, min(max_len, m - start) + 1):
            surface = tuple(tokens[start:start + n])
            stems = stem_phrase(surface)
            if stems in seen:
                continue
            seen[stems] = None
            out.append(Candidate(start, n, surface, stems))
    return out


def label_candidates(cands: list[Candidate], gold) -> list[Candidate]:
    """Mark positives by stemmed exact-sequence match against gold keyphrases."""
    gold_stems = {stem_phrase(g) for g in gold}
    for cand in cands:
        cand.label = POSITIVE if cand.stems in gold_stems else NEGATIVE
    return cands


@dataclass
class SpanGroups:
    """Candidates regrouped by width for the per-width filter banks.

    `order[i]` is the index into the original candidate list of the
    i-th row in width-grouped score order, so scores can be scattered
    back after a batched forward pass.
    """

    starts: dict[int, np.ndarray] = field(default_factory=dict)
    order: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def group_by_width(cands: list[Candidate]) -> SpanGroups:
    starts: dict[int, list[int]] = {}
    positions: dict[int, list[int]] = {}
    for i, cand in enumerate(cands):
        starts.setdefault(cand.length, []).append(cand.start)
        positions.setdefault(cand.length, []).append(i)
    groups = SpanGroups()
    order: list[int] = []
    for n in sorted(starts):
        groups.starts[n] = np.asarray(starts[n], dtype=np.int64)
        order.extend(positions[n])
    groups.order = np.asarray(order, dtype=np.int64)
    return groups
