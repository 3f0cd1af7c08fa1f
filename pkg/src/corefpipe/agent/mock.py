"""Deterministic offline LLM backends.

The gold-backed mode answers from a document's gold annotation: mention
checks pass iff the span is a gold mention, cluster checks pass iff every
member belongs to the same gold entity, and splits regroup by gold entity.
Replies follow the real output formats so the production parsers are always
exercised.
"""

from __future__ import annotations

import json
from collections import deque
from pathlib import Path
from typing import Iterable, Sequence

from ..corpus import Document
from ..errors import ScriptExhaustedError
from .client import AgentRequest
from .prompts import CLUSTER_CHECK, CLUSTER_SPLIT, MENTION_CHECK

MODE_YES = "yes"
MODE_NO = "no"
MODE_GOLD = "gold"
MODE_SCRIPTED = "scripted"


class MockLlm:
    """Pure, thread-safe stand-in for the chat endpoint."""

    max_parallel = 1

    def __init__(
        self,
        mode: str,
        gold_docs: Iterable[Document] = (),
        script: Sequence[str] = (),
    ):
        self.mode = mode
        self._script = deque(script)
        self._entity_maps: dict[str, dict[tuple[int, int], int]] = {}
        for doc in gold_docs:
            spans = {}
            for eid, cluster in enumerate(doc.gold_clusters):
                for m in cluster.mentions:
                    spans[m.span] = eid
            self._entity_maps[doc.doc_id] = spans

    @classmethod
    def all_yes(cls) -> "MockLlm":
        return cls(MODE_YES)

    @classmethod
    def all_no(cls) -> "MockLlm":
        return cls(MODE_NO)

    @classmethod
    def gold_backed(cls, docs: Iterable[Document]) -> "MockLlm":
        return cls(MODE_GOLD, gold_docs=docs)

    @classmethod
    def scripted(cls, replies: Sequence[str]) -> "MockLlm":
        return cls(MODE_SCRIPTED, script=replies)

    @classmethod
    def from_audit_log(cls, path: str | Path) -> "MockLlm":
        """Replay the raw replies recorded by a previous run, in order."""
        replies = []
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    replies.append(json.loads(line)["raw_reply"])
        return cls(MODE_SCRIPTED, script=replies)

    def complete(self, request: AgentRequest) -> str:
        if self.mode == MODE_SCRIPTED:
            if not self._script:
                raise ScriptExhaustedError("scripted mock has no replies left")
            return self._script.popleft()
        if self.mode == MODE_YES:
            if request.kind == CLUSTER_SPLIT:
                return self._identity_grouping(request)
            return "Consistent with context. Yes"
        if self.mode == MODE_NO:
            if request.kind == MENTION_CHECK:
                return "Does not read as a valid mention. No"
            if request.kind == CLUSTER_CHECK:
                return "Mentions do not all corefer. No"
            return self._singleton_grouping(request)
        return self._gold_reply(request)

    @staticmethod
    def _identity_grouping(request: AgentRequest) -> str:
        numbers = ",".join(f"#{i + 1}" for i in range(len(request.target)))
        return f"All mentions corefer; keeping one group. [{numbers}]"

    @staticmethod
    def _singleton_grouping(request: AgentRequest) -> str:
        groups = ", ".join(f"[#{i + 1}]" for i in range(len(request.target)))
        return f"No two mentions corefer. {groups}"

    def _gold_reply(self, request: AgentRequest) -> str:
        spans = self._entity_maps.get(request.doc_id)
        if spans is None:
            raise KeyError(f"gold-backed mock has no annotation for doc {request.doc_id!r}")
        if request.kind == MENTION_CHECK:
            if tuple(request.target) in spans:
                return "Span matches an annotated mention. Yes"
            return "Span is not an annotated mention. No"
        entities = [spans.get(tuple(s)) for s in request.target]
        if request.kind == CLUSTER_CHECK:
            if len({e if e is not None else ("spurious", i) for i, e in enumerate(entities)}) == 1:
                return "All mentions share one annotated entity. Yes"
            return "Mentions belong to different annotated entities. No"
        # split: group 1-based numbers by gold entity; unannotated spans stay alone
        groups: dict[object, list[int]] = {}
        for i, e in enumerate(entities):
            key = e if e is not None else ("spurious", i)
            groups.setdefault(key, []).append(i + 1)
        ordered = sorted(groups.values(), key=lambda g: g[0])
        rendered = ", ".join("[" + ",".join(f"#{n}" for n in g) + "]" for g in ordered)
        return f"Regrouped by annotated entity. {rendered}"
