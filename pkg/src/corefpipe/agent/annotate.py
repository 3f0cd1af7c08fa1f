"""Text annotation for the LLM prompts.

Mention checks see the mention's host sentence plus a few preceding ones,
with the span wrapped in square brackets. Cluster checks see the contiguous
sentence window spanning the cluster's first to last mention, with every
member wrapped in numbered markers so repeated surface forms stay
distinguishable.
"""

from __future__ import annotations

import re

from ..corpus import Cluster, Document, Mention

_MARKER_RE = re.compile(r"\[\(#\d+\)|\]\(#\d+\)")


def annotate_mention_context(
    doc: Document, mention: Mention, n_prev_sentences: int = 2
) -> str:
    """Host sentence (plus preceding context) with the span in brackets.

    Exactly one bracket pair is emitted. If the span crosses a sentence end,
    the window extends so the closing bracket stays inside it.
    """
    first_sent = doc.sentence_index(mention.start)
    last_sent = doc.sentence_index(mention.end)
    lo = doc.sentence_range(max(0, first_sent - n_prev_sentences))[0]
    hi = doc.sentence_range(last_sent)[1]
    before = doc.tokens[lo : mention.start]
    span = doc.span_text(mention.start, mention.end)
    after = doc.tokens[mention.end + 1 : hi + 1]
    return " ".join(before + [f"[{span}]"] + after)


def annotate_cluster_context(doc: Document, cluster: Cluster) -> tuple[str, str]:
    """Number the cluster's mentions and mark them in their sentence window.

    Returns ``(numbered_list, marked_text)``. Mentions are numbered in
    document order; occurrence X is wrapped as ``[(#X)...](#X)``. Nested
    spans produce well-nested marker pairs (outer opens first, inner closes
    first). The window runs from the first mention's sentence through the
    last mention's sentence.
    """
    if len(cluster) < 2:
        raise ValueError("cluster annotation needs at least two mentions")
    mentions = cluster.mentions
    numbered = ", ".join(
        f"#{i + 1}:{m.text or doc.span_text(m.start, m.end)}"
        for i, m in enumerate(mentions)
    )
    lo = doc.sentence_range(doc.sentence_index(mentions[0].start))[0]
    hi = doc.sentence_range(doc.sentence_index(max(m.end for m in mentions)))[1]

    opens: dict[int, list[tuple[int, int]]] = {}
    closes: dict[int, list[tuple[int, int]]] = {}
    for number, m in enumerate(mentions, start=1):
        opens.setdefault(m.start, []).append((number, m.end))
        closes.setdefault(m.end, []).append((number, m.start))

    pieces: list[str] = []
    for idx in range(lo, hi + 1):
        token = doc.tokens[idx]
        # outer spans open first (larger end), inner spans close first (larger start)
        prefix = "".join(
            f"[(#{n})" for n, end in sorted(opens.get(idx, []), key=lambda t: (-t[1], t[0]))
        )
        suffix = "".join(
            f"](#{n})" for n, start in sorted(closes.get(idx, []), key=lambda t: (-t[1], t[0]))
        )
        pieces.append(f"{prefix}{token}{suffix}")
    return numbered, " ".join(pieces)


def strip_cluster_markers(marked_text: str) -> str:
    """Remove all numbered markers, recovering the plain context window."""
    return _MARKER_RE.sub("", marked_text)
