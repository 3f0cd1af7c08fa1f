"""Applying the LLM's verdicts: drop invalid mentions, split bad clusters.

Every decision is fail-open: transport failures and persistently malformed
replies keep the item unchanged. A malformed reply earns exactly one retry
with the identical prompt. Requests within a stage may run in parallel, but
results are applied in document order, so output never depends on completion
order.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from ..corpus import Cluster, Document, Mention
from ..errors import LlmTransportError, ReplyParseError
from .annotate import annotate_cluster_context, annotate_mention_context, strip_cluster_markers
from .client import AgentRequest
from .prompts import CLUSTER_CHECK, CLUSTER_SPLIT, MENTION_CHECK, render_prompt
from .replies import PENDING, NO, Regrouping, Verdict, parse_regrouping, parse_verdict

logger = logging.getLogger(__name__)


@dataclass
class AgentExchange:
    """Audit record of one LLM round trip."""

    kind: str
    prompt: str
    raw_reply: str
    parsed: Verdict | Regrouping | None
    target_ref: tuple
    attempt: int = 1
    error: str | None = None

    def to_json(self) -> str:
        if isinstance(self.parsed, Verdict):
            parsed = {"type": "verdict", "value": self.parsed.value, "reason": self.parsed.reason}
        elif isinstance(self.parsed, Regrouping):
            parsed = {
                "type": "regrouping",
                "groups": self.parsed.groups,
                "failure_reason": self.parsed.failure_reason,
            }
        else:
            parsed = None
        return json.dumps(
            {
                "kind": self.kind,
                "target": self.target_ref,
                "attempt": self.attempt,
                "error": self.error,
                "prompt": self.prompt,
                "raw_reply": self.raw_reply,
                "parsed": parsed,
            }
        )


def write_audit_log(exchanges: Sequence[AgentExchange], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for ex in exchanges:
            fh.write(ex.to_json() + "\n")


def _map_ordered(client, items: list, worker: Callable) -> list:
    """Run ``worker`` over items, optionally in parallel, preserving order."""
    workers = getattr(client, "max_parallel", 1)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, items))
    return [worker(item) for item in items]


def _ask_verdict(client, request: AgentRequest) -> AgentExchange:
    """One check round trip; retry a malformed reply once, then fail open."""
    attempt = 0
    while True:
        attempt += 1
        try:
            reply = client.complete(request)
        except LlmTransportError as exc:
            logger.warning("%s check failed (transport): %s", request.kind, exc)
            return AgentExchange(
                kind=request.kind,
                prompt=request.prompt,
                raw_reply="",
                parsed=Verdict(PENDING, reason="transport failure"),
                target_ref=request.target,
                attempt=attempt,
                error=str(exc),
            )
        try:
            verdict = parse_verdict(reply)
        except ReplyParseError as exc:
            if attempt == 1:
                continue
            logger.warning("%s reply unparseable twice; treating as Pending", request.kind)
            return AgentExchange(
                kind=request.kind,
                prompt=request.prompt,
                raw_reply=reply,
                parsed=Verdict(PENDING, reason="unparseable reply"),
                target_ref=request.target,
                attempt=attempt,
                error=str(exc),
            )
        return AgentExchange(
            kind=request.kind,
            prompt=request.prompt,
            raw_reply=reply,
            parsed=verdict,
            target_ref=request.target,
            attempt=attempt,
        )


def check_mentions(
    to_check: list[Mention],
    doc: Document,
    client,
    n_prev_sentences: int = 2,
) -> tuple[list[Mention], list[AgentExchange]]:
    """Validate mentions one by one; only a ``No`` verdict removes one."""

    def ask(mention: Mention) -> AgentExchange:
        context = annotate_mention_context(doc, mention, n_prev_sentences)
        prompt = render_prompt(MENTION_CHECK, {"context": context})
        request = AgentRequest(
            kind=MENTION_CHECK, prompt=prompt, doc_id=doc.doc_id, target=mention.span
        )
        return _ask_verdict(client, request)

    exchanges = _map_ordered(client, to_check, ask)
    survivors = [
        m
        for m, ex in zip(to_check, exchanges)
        if not (isinstance(ex.parsed, Verdict) and ex.parsed.value == NO)
    ]
    return survivors, exchanges


def _cluster_payload(doc: Document, cluster: Cluster) -> dict[str, str]:
    numbered, marked = annotate_cluster_context(doc, cluster)
    return {
        "original": strip_cluster_markers(marked),
        "numbered": numbered,
        "marked": marked,
    }


def _ask_split(client, doc: Document, cluster: Cluster) -> tuple[list[Cluster], AgentExchange]:
    payload = _cluster_payload(doc, cluster)
    prompt = render_prompt(CLUSTER_SPLIT, payload)
    request = AgentRequest(
        kind=CLUSTER_SPLIT,
        prompt=prompt,
        doc_id=doc.doc_id,
        target=tuple(cluster.spans()),
    )
    attempt = 0
    while True:
        attempt += 1
        try:
            reply = client.complete(request)
        except LlmTransportError as exc:
            logger.warning("cluster split failed (transport): %s", exc)
            return [cluster], AgentExchange(
                kind=CLUSTER_SPLIT,
                prompt=prompt,
                raw_reply="",
                parsed=None,
                target_ref=request.target,
                attempt=attempt,
                error=str(exc),
            )
        try:
            regrouping = parse_regrouping(reply, k=len(cluster))
        except ReplyParseError as exc:
            if attempt == 1:
                continue
            logger.warning("split reply invalid twice (%s); cluster kept unchanged", exc)
            return [cluster], AgentExchange(
                kind=CLUSTER_SPLIT,
                prompt=prompt,
                raw_reply=reply,
                parsed=None,
                target_ref=request.target,
                attempt=attempt,
                error=str(exc),
            )
        break
    exchange = AgentExchange(
        kind=CLUSTER_SPLIT,
        prompt=prompt,
        raw_reply=reply,
        parsed=regrouping,
        target_ref=request.target,
        attempt=attempt,
    )
    if not regrouping.ok:
        return [cluster], exchange
    parts = [
        Cluster(mentions=[cluster.mentions[n - 1] for n in group], pair_probs=[])
        for group in regrouping.groups
    ]
    return parts, exchange


def check_and_split_clusters_aligned(
    to_check: list[Cluster],
    doc: Document,
    client,
) -> tuple[list[list[Cluster]], list[AgentExchange]]:
    """Per-input replacement lists: [c] when kept, the split parts otherwise."""

    def ask_check(cluster: Cluster) -> AgentExchange:
        payload = _cluster_payload(doc, cluster)
        prompt = render_prompt(CLUSTER_CHECK, payload)
        request = AgentRequest(
            kind=CLUSTER_CHECK,
            prompt=prompt,
            doc_id=doc.doc_id,
            target=tuple(cluster.spans()),
        )
        return _ask_verdict(client, request)

    check_exchanges = _map_ordered(client, to_check, ask_check)
    needs_split = [
        (i, c)
        for i, (c, ex) in enumerate(zip(to_check, check_exchanges))
        if isinstance(ex.parsed, Verdict) and ex.parsed.value == NO
    ]
    split_results = _map_ordered(
        client, needs_split, lambda pair: _ask_split(client, doc, pair[1])
    )

    replacements: list[list[Cluster]] = [[c] for c in to_check]
    exchanges: list[AgentExchange] = list(check_exchanges)
    for (i, _), (parts, ex) in zip(needs_split, split_results):
        replacements[i] = parts
        exchanges.append(ex)
    return replacements, exchanges


def check_and_split_clusters(
    to_check: list[Cluster],
    doc: Document,
    client,
) -> tuple[list[Cluster], list[AgentExchange]]:
    """Verify clusters; split the ones judged inconsistent.

    A ``Yes`` or ``Pending`` verdict keeps the cluster. A ``No`` triggers a
    regroup request; a valid regrouping replaces the cluster with one cluster
    per group (pair probabilities are dropped), anything else keeps it.
    """
    replacements, exchanges = check_and_split_clusters_aligned(to_check, doc, client)
    return [c for parts in replacements for c in parts], exchanges
