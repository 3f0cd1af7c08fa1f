"""Mention detection.

Start positions are scored per token; for each positive start, candidate end
positions are scored conditionally. Candidate ends are constrained to stay
within the start token's sentence and within a configurable maximum span
length, whichever is tighter. End scoring runs either as a plain MLP over the
concatenated start/end rows (baseline) or through a biaffine layer combining
a bilinear start-end interaction with a linear term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import Tensor, nn

from .corpus import Document, Mention, eos_distance
from .errors import ConfigError, ShapeError

MODE_BASELINE = "baseline"
MODE_BIAFFINE = "biaffine"


@dataclass
class SpanLimits:
    """Candidate-end constraints: sentence boundary plus a hard length cap."""

    l_max: int | float = 30
    threshold: float = 0.5

    def __post_init__(self):
        if self.l_max < 0:
            raise ConfigError(f"l_max must be >= 0, got {self.l_max}")
        if not (0.0 < self.threshold < 1.0):
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")


def candidate_end_range(t_s: int, doc: Document, limits: SpanLimits) -> range:
    """Inclusive candidate end positions for a span starting at ``t_s``."""
    span_cap = min(limits.l_max, eos_distance(doc, t_s))
    return range(t_s, t_s + int(span_cap) + 1)


class MentionDetector(nn.Module):
    def __init__(self, d_h: int, d_r: int = 128, mode: str = MODE_BIAFFINE):
        super().__init__()
        if mode not in (MODE_BASELINE, MODE_BIAFFINE):
            raise ConfigError(f"unknown detector mode {mode!r}")
        self.d_h = d_h
        self.d_r = d_r
        self.mode = mode
        self.start_mlp = nn.Sequential(
            nn.Linear(d_h, d_h), nn.GELU(), nn.Linear(d_h, 1)
        )
        if mode == MODE_BIAFFINE:
            self.fc1 = nn.Linear(d_h, d_h)
            self.fc2 = nn.Linear(d_h, d_h)
            self.bilinear = nn.Parameter(torch.empty(d_h, d_r, d_h))
            self.linear = nn.Parameter(torch.empty(d_r, 2 * d_h))
            self.bias = nn.Parameter(torch.zeros(d_r))
            nn.init.normal_(self.bilinear, std=1.0 / d_h)
            nn.init.xavier_uniform_(self.linear)
            self.end_mlp = nn.Sequential(
                nn.Linear(d_r, d_r), nn.GELU(), nn.Linear(d_r, 1)
            )
        else:
            self.end_mlp = nn.Sequential(
                nn.Linear(2 * d_h, d_r), nn.GELU(), nn.Linear(d_r, 1)
            )

    def start_logits(self, h: Tensor) -> Tensor:
        return self.start_mlp(h).squeeze(-1)

    def start_probs(self, h: Tensor) -> Tensor:
        """Per-token probability of opening a mention; shape (len,)."""
        return torch.sigmoid(self.start_logits(h))

    def biaffine_scores(self, h_start_dup: Tensor, h_end: Tensor) -> Tensor:
        """Score aligned start/end row pairs; returns a (k, d_r) matrix.

        Row j combines the bilinear interaction of the projected pair with a
        linear term over their concatenation plus a bias.
        """
        if h_start_dup.shape != h_end.shape:
            raise ShapeError(
                f"start/end rows must align: {tuple(h_start_dup.shape)} vs {tuple(h_end.shape)}"
            )
        if h_start_dup.shape[-1] != self.d_h:
            raise ShapeError(f"expected width {self.d_h}, got {h_start_dup.shape[-1]}")
        x_s = self.fc1(h_start_dup)
        x_e = self.fc2(h_end)
        bilinear = torch.einsum("kp,prq,kq->kr", x_s, self.bilinear, x_e)
        linear = torch.cat([x_s, x_e], dim=-1) @ self.linear.T
        return bilinear + linear + self.bias

    def end_logits(self, t_s: int, candidate_ends: Tensor, h: Tensor) -> Tensor:
        h_start_dup = h[t_s].unsqueeze(0).expand(len(candidate_ends), -1)
        h_end = h[candidate_ends]
        if self.mode == MODE_BIAFFINE:
            scores = self.biaffine_scores(h_start_dup, h_end)
            return self.end_mlp(scores).squeeze(-1)
        return self.end_mlp(torch.cat([h_start_dup, h_end], dim=-1)).squeeze(-1)

    def end_probs(self, t_s: int, candidate_ends: Tensor, h: Tensor) -> Tensor:
        """Probability of each candidate end closing the span opened at ``t_s``."""
        return torch.sigmoid(self.end_logits(t_s, candidate_ends, h))


def detect_mentions(
    doc: Document, h: Tensor, detector: MentionDetector, limits: SpanLimits
) -> list[Mention]:
    """All spans whose start and end probabilities clear the threshold.

    A probability exactly at the threshold counts as positive. Output is
    sorted by (start, end); duplicates cannot occur by construction.
    """
    mentions: list[Mention] = []
    with torch.no_grad():
        p_start = detector.start_probs(h)
        for t_s in range(len(doc)):
            ps = float(p_start[t_s])
            if ps < limits.threshold:
                continue
            ends = torch.tensor(list(candidate_end_range(t_s, doc, limits)), dtype=torch.long)
            p_end = detector.end_probs(t_s, ends, h)
            for e, pe in zip(ends.tolist(), p_end.tolist()):
                if pe >= limits.threshold:
                    mentions.append(
                        Mention(t_s, e, doc.span_text(t_s, e), p_start=ps, p_end=pe)
                    )
    return mentions


def detection_loss(
    doc: Document, h: Tensor, detector: MentionDetector, limits: SpanLimits
) -> Tensor:
    """Binary cross-entropy over start labels and candidate-end labels.

    End positions are supervised for every gold start (teacher forcing) and
    for every predicted-positive non-gold start, whose candidates are all
    negatives. The result is the mean over all labeled positions, so a
    uniformly 0.5 predictor scores ln 2.
    """
    gold_spans = {m.span for c in doc.gold_clusters for m in c.mentions}
    gold_starts = {s for s, _ in gold_spans}
    bce = nn.functional.binary_cross_entropy_with_logits

    start_logits = detector.start_logits(h)
    start_labels = torch.zeros_like(start_logits)
    for s in gold_starts:
        start_labels[s] = 1.0
    loss_sum = bce(start_logits, start_labels, reduction="sum")
    n_labels = len(doc)

    with torch.no_grad():
        predicted_starts = {
            i
            for i, p in enumerate(torch.sigmoid(start_logits).tolist())
            if p >= limits.threshold
        }
    for t_s in sorted(gold_starts | predicted_starts):
        ends = torch.tensor(list(candidate_end_range(t_s, doc, limits)), dtype=torch.long)
        logits = detector.end_logits(t_s, ends, h)
        labels = torch.tensor(
            [1.0 if (t_s, int(e)) in gold_spans else 0.0 for e in ends],
            dtype=logits.dtype,
        )
        loss_sum = loss_sum + bce(logits, labels, reduction="sum")
        n_labels += len(ends)
    return loss_sum / n_labels


def bilinear_reference(x_s: Tensor, u: Tensor, x_e: Tensor) -> Tensor:
    """Triple-loop bilinear form; the oracle the einsum path is checked against."""
    d_h, d_r, _ = u.shape
    out = torch.zeros(d_r, dtype=u.dtype)
    for r in range(d_r):
        acc = 0.0
        for p in range(d_h):
            for q in range(d_h):
                acc += float(x_s[p]) * float(u[p, r, q]) * float(x_e[q])
        out[r] = acc
    return out


def max_span_length(mentions: list[Mention]) -> int:
    return max((m.end - m.start for m in mentions), default=0)


def spans_cross_sentence(doc: Document, mentions: list[Mention]) -> list[Mention]:
    """Mentions containing a sentence end strictly before their end token."""
    crossing = []
    for m in mentions:
        if any(m.start <= s < m.end for s in doc.sentence_ends):
            crossing.append(m)
    return crossing


def infinite_limits(threshold: float = 0.5) -> SpanLimits:
    """Sentence-boundary-only constraint (no hard length cap)."""
    return SpanLimits(l_max=math.inf, threshold=threshold)
