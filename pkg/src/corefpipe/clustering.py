"""Incremental mention clustering.

Mentions are processed in document order. Each one is scored against every
existing cluster (represented by the mean of its members' projected
representations); it joins the best-scoring cluster when that score clears
the threshold, otherwise it opens a new singleton. The probability of each
accepted join is recorded on the cluster, which is what the downstream
cluster filter ranks on.
"""

from __future__ import annotations

import torch
from torch import Tensor, nn

from .corpus import Cluster, Document, Mention


class IncrementalClusterer(nn.Module):
    def __init__(self, d_h: int):
        super().__init__()
        self.d_h = d_h
        self.mention_proj = nn.Linear(2 * d_h, d_h)
        self.scorer = nn.Sequential(
            nn.Linear(3 * d_h, d_h), nn.GELU(), nn.Linear(d_h, 1)
        )

    def mention_repr(self, mention: Mention, h: Tensor) -> Tensor:
        return self.mention_proj(torch.cat([h[mention.start], h[mention.end]]))

    def mention_reprs(self, mentions: list[Mention], h: Tensor) -> Tensor:
        starts = torch.tensor([m.start for m in mentions], dtype=torch.long)
        ends = torch.tensor([m.end for m in mentions], dtype=torch.long)
        return self.mention_proj(torch.cat([h[starts], h[ends]], dim=-1))

    def pair_logits(self, mention_rep: Tensor, cluster_reps: Tensor) -> Tensor:
        expanded = mention_rep.unsqueeze(0).expand(cluster_reps.shape[0], -1)
        feats = torch.cat([expanded, cluster_reps, expanded * cluster_reps], dim=-1)
        return self.scorer(feats).squeeze(-1)


def cluster_mentions(
    mentions: list[Mention],
    h: Tensor,
    clusterer: IncrementalClusterer,
    threshold: float = 0.5,
) -> list[Cluster]:
    """Partition mentions into clusters; every mention lands in exactly one.

    Ties between equally probable clusters go to the earliest-created one.
    A cluster of size k carries k-1 pair probabilities, all >= threshold.
    """
    if not mentions:
        return []
    spans = [m.span for m in mentions]
    if spans != sorted(spans):
        raise ValueError("mentions must be sorted by (start, end)")
    members: list[list[Mention]] = []
    probs: list[list[float]] = []
    rep_sums: list[Tensor] = []
    with torch.no_grad():
        reprs = clusterer.mention_reprs(mentions, h)
        for i, mention in enumerate(mentions):
            rep = reprs[i]
            if members:
                cluster_reps = torch.stack(
                    [s / len(ms) for s, ms in zip(rep_sums, members)]
                )
                pair_probs = torch.sigmoid(clusterer.pair_logits(rep, cluster_reps))
                best = max(range(len(members)), key=lambda j: float(pair_probs[j]))
                best_prob = float(pair_probs[best])
                if best_prob >= threshold:
                    members[best].append(mention)
                    probs[best].append(best_prob)
                    rep_sums[best] = rep_sums[best] + rep
                    continue
            members.append([mention])
            probs.append([])
            rep_sums.append(rep.clone())
    return [Cluster(mentions=ms, pair_probs=ps) for ms, ps in zip(members, probs)]


def clustering_loss(
    doc: Document,
    mentions: list[Mention],
    h: Tensor,
    clusterer: IncrementalClusterer,
) -> Tensor:
    """BCE over teacher-forced incremental decisions.

    The running cluster state follows the gold assignment: each mention joins
    the cluster of its gold entity (mentions outside any gold cluster act as
    their own entities). Every (mention, existing cluster) pair is one
    decision, labeled positive iff they share a gold entity; the loss is the
    mean over decisions, so a uniformly 0.5 scorer pays ln 2 per decision.
    """
    span_to_entity: dict[tuple[int, int], int] = {}
    for eid, cluster in enumerate(doc.gold_clusters):
        for m in cluster.mentions:
            span_to_entity[m.span] = eid
    next_spurious = len(doc.gold_clusters)

    bce = nn.functional.binary_cross_entropy_with_logits
    loss_sum = h.sum() * 0.0  # keeps the graph alive when there are no decisions
    n_decisions = 0
    cluster_entity: list[int] = []
    rep_sums: list[Tensor] = []
    counts: list[int] = []
    reprs = clusterer.mention_reprs(mentions, h) if mentions else None
    for i, mention in enumerate(mentions):
        entity = span_to_entity.get(mention.span)
        if entity is None:
            entity = next_spurious
            next_spurious += 1
        rep = reprs[i]
        if cluster_entity:
            cluster_reps = torch.stack(
                [s / c for s, c in zip(rep_sums, counts)]
            )
            logits = clusterer.pair_logits(rep, cluster_reps)
            labels = torch.tensor(
                [1.0 if ce == entity else 0.0 for ce in cluster_entity],
                dtype=logits.dtype,
            )
            loss_sum = loss_sum + bce(logits, labels, reduction="sum")
            n_decisions += len(cluster_entity)
        if entity in cluster_entity:
            j = cluster_entity.index(entity)
            rep_sums[j] = rep_sums[j] + rep
            counts[j] += 1
        else:
            cluster_entity.append(entity)
            rep_sums.append(rep.clone())
            counts.append(1)
    if n_decisions == 0:
        return loss_sum
    return loss_sum / n_decisions
