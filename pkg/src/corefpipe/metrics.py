"""Coreference scoring: MUC, B-cubed, CEAF (entity-similarity variant).

Partitions are sequences of clusters; a cluster is any collection of hashable
mention identifiers (span tuples throughout this package). Each metric also
exposes its raw counts so corpus-level scores can micro-average: counts are
summed over documents before the final ratios are taken.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

PartitionLike = Sequence[Iterable[Hashable]]

#: (p_num, p_den, r_num, r_den)
Counts = tuple[float, float, float, float]


@dataclass(frozen=True)
class Score:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, counts: Counts) -> "Score":
        p_num, p_den, r_num, r_den = counts
        p = p_num / p_den if p_den else 0.0
        r = r_num / r_den if r_den else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(precision=p, recall=r, f1=f1)


def _freeze(partition: PartitionLike) -> list[frozenset]:
    return [frozenset(c) for c in partition if len(frozenset(c)) > 0]


def _mention_to_cluster(partition: list[frozenset]) -> dict[Hashable, int]:
    return {m: i for i, cluster in enumerate(partition) for m in cluster}


def _muc_one_way(key: list[frozenset], response: list[frozenset]) -> tuple[float, float]:
    """Link-based recall counts of ``key`` against ``response``.

    Each key cluster contributes |S| - |partition of S by the response|
    correct links out of |S| - 1; mentions missing from the response each
    form their own part.
    """
    resp_of = _mention_to_cluster(response)
    num = den = 0
    for cluster in key:
        parts = {resp_of[m] for m in cluster if m in resp_of}
        unlinked = sum(1 for m in cluster if m not in resp_of)
        num += len(cluster) - (len(parts) + unlinked)
        den += len(cluster) - 1
    return float(num), float(den)


def muc_counts(gold: PartitionLike, pred: PartitionLike) -> Counts:
    g, p = _freeze(gold), _freeze(pred)
    r_num, r_den = _muc_one_way(g, p)
    p_num, p_den = _muc_one_way(p, g)
    return (p_num, p_den, r_num, r_den)


def muc(gold: PartitionLike, pred: PartitionLike) -> Score:
    return Score.from_counts(muc_counts(gold, pred))


def _b3_one_way(key: list[frozenset], response: list[frozenset]) -> tuple[float, float]:
    num = 0.0
    den = 0.0
    for k in key:
        den += len(k)
        for r in response:
            inter = len(k & r)
            if inter:
                num += inter * inter / len(k)
    return num, den


def b_cubed_counts(gold: PartitionLike, pred: PartitionLike) -> Counts:
    g, p = _freeze(gold), _freeze(pred)
    r_num, r_den = _b3_one_way(g, p)
    p_num, p_den = _b3_one_way(p, g)
    return (p_num, p_den, r_num, r_den)


def b_cubed(gold: PartitionLike, pred: PartitionLike) -> Score:
    return Score.from_counts(b_cubed_counts(gold, pred))


def phi4(a: frozenset, b: frozenset) -> float:
    return 2 * len(a & b) / (len(a) + len(b))


def ceaf_phi4_counts(gold: PartitionLike, pred: PartitionLike) -> Counts:
    g, p = _freeze(gold), _freeze(pred)
    if not g or not p:
        return (0.0, float(len(p)), 0.0, float(len(g)))
    sim = np.zeros((len(g), len(p)))
    for i, gc in enumerate(g):
        for j, pc in enumerate(p):
            sim[i, j] = phi4(gc, pc)
    rows, cols = linear_sum_assignment(-sim)
    total = float(sim[rows, cols].sum())
    return (total, float(len(p)), total, float(len(g)))


def ceaf_phi4(gold: PartitionLike, pred: PartitionLike) -> Score:
    """Optimal one-to-one cluster alignment maximizing total phi4 similarity."""
    return Score.from_counts(ceaf_phi4_counts(gold, pred))


def avg_f1(*scores: Score | float) -> float:
    """Mean F1 of the three coreference metrics."""
    if len(scores) != 3:
        raise ValueError(f"expected exactly three scores, got {len(scores)}")
    values = [s.f1 if isinstance(s, Score) else float(s) for s in scores]
    return sum(values) / 3.0


def mention_prf(
    gold_mentions: Iterable[Hashable], pred_mentions: Iterable[Hashable]
) -> Score:
    """Exact-span mention detection precision/recall/F1."""
    g, p = set(gold_mentions), set(pred_mentions)
    tp = len(g & p)
    return Score.from_counts((float(tp), float(len(p)), float(tp), float(len(g))))


_COUNT_FNS = {
    "muc": muc_counts,
    "b_cubed": b_cubed_counts,
    "ceaf_phi4": ceaf_phi4_counts,
}


class CorpusEvaluator:
    """Micro-averaging accumulator over documents.

    Per-document counts are summed; precision/recall ratios are taken only at
    reporting time. Mention detection counts accumulate alongside.
    """

    def __init__(self):
        self._counts = {name: [0.0, 0.0, 0.0, 0.0] for name in _COUNT_FNS}
        self._mention = [0.0, 0.0, 0.0, 0.0]

    def update(self, gold: PartitionLike, pred: PartitionLike) -> None:
        for name, fn in _COUNT_FNS.items():
            for i, v in enumerate(fn(gold, pred)):
                self._counts[name][i] += v
        g = {m for c in gold for m in c}
        p = {m for c in pred for m in c}
        tp = len(g & p)
        for i, v in enumerate((tp, len(p), tp, len(g))):
            self._mention[i] += v

    def scores(self) -> dict[str, Score]:
        out = {
            name: Score.from_counts(tuple(c))  # type: ignore[arg-type]
            for name, c in self._counts.items()
        }
        out["mention"] = Score.from_counts(tuple(self._mention))  # type: ignore[arg-type]
        return out

    def avg_f1(self) -> float:
        s = self.scores()
        return avg_f1(s["muc"], s["b_cubed"], s["ceaf_phi4"])


def drop_singletons(partition: PartitionLike) -> list[list[Hashable]]:
    return [list(c) for c in partition if len(frozenset(c)) > 1]
