"""Top-k and per-class accuracy for multiclass predictions from marginals."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class EvalReport:
    top1: float
    top5: float
    per_class_mean: float
    n: int
    class_accuracy: dict = field(default_factory=dict)
    class_counts: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_dict(self, labels=None) -> dict:
        name = (lambda i: labels[i]) if labels is not None else str
        return {
            "top1": self.top1,
            "top5": self.top5,
            "per_class_mean": self.per_class_mean,
            "n": self.n,
            "class_accuracy": {name(c): v for c, v in sorted(self.class_accuracy.items())},
            "class_counts": {name(c): v for c, v in sorted(self.class_counts.items())},
            "meta": self.meta,
        }


def topk_hit(scores, truth: int, candidates: Sequence[int], k: int, ties: str = "low") -> float:
    """Hit indicator (or probability) that ``truth`` ranks in the top ``k``.

    ``ties="low"`` ranks equal scores by label id. ``ties="expected"``
    returns the hit probability under uniformly random tie-breaking.
    """
    s = scores[truth]
    if ties == "low":
        rank = sum(1 for c in candidates if scores[c] > s or (scores[c] == s and c < truth))
        return float(rank < k)
    if ties != "expected":
        raise ValueError(f"unknown tie rule {ties!r}")
    greater = sum(1 for c in candidates if scores[c] > s)
    equal = sum(1 for c in candidates if scores[c] == s)
    if greater >= k:
        return 0.0
    if greater + equal <= k:
        return 1.0
    return (k - greater) / equal


def evaluate(
    score_rows, truths: Sequence[int], candidates: Sequence[int], top_k=(1, 5), ties: str = "low", meta=None
) -> EvalReport:
    """Score per-instance marginals against the true class ids."""
    candidates = sorted(candidates)
    hits = {k: [] for k in top_k}
    for scores, truth in zip(score_rows, truths):
        scores = np.asarray(scores)
        for k in top_k:
            hits[k].append(topk_hit(scores, truth, candidates, k, ties))
    n = len(truths)
    per_class = {}
    first = top_k[0]
    for h, truth in zip(hits[first], truths):
        per_class.setdefault(truth, []).append(h)
    class_acc = {c: float(np.mean(v)) for c, v in per_class.items()}
    counts = {c: len(v) for c, v in per_class.items()}
    mean = lambda v: float(np.mean(v)) if v else 0.0
    return EvalReport(
        top1=mean(hits.get(1, hits[first])),
        top5=mean(hits[5]) if 5 in hits else float("nan"),
        per_class_mean=mean(list(class_acc.values())),
        n=n,
        class_accuracy=class_acc,
        class_counts=counts,
        meta=dict(meta or {}),
    )
