"""Documents, CoNLL-2012 ingestion, segmentation, and prediction persistence.

A document is a flat token sequence with sentence-end markers. Mention spans
are inclusive word-token index pairs; clusters group mentions that refer to
the same entity. Everything downstream (encoding, detection, clustering,
scoring) operates on these types.
"""

from __future__ import annotations

import json
import logging
import math
import re
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ConllParseError, PredictionFormatError

logger = logging.getLogger(__name__)

INDEPENDENT = "independent"
OVERLAPPING = "overlapping"


@dataclass(frozen=True)
class Mention:
    """A contiguous token span, inclusive on both ends.

    ``p_start`` / ``p_end`` carry the detector's probabilities when the
    mention was predicted; they are ``None`` on gold mentions.
    """

    start: int
    end: int
    text: str = ""
    p_start: float | None = None
    p_end: float | None = None

    def __post_init__(self):
        if not (0 <= self.start <= self.end):
            raise ValueError(f"bad mention span ({self.start}, {self.end})")

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass
class Cluster:
    """An ordered group of coreferent mentions.

    ``pair_probs`` holds the clustering probability recorded each time a
    mention was appended to this cluster; singletons and clusters produced
    by splitting carry an empty list.
    """

    mentions: list[Mention]
    pair_probs: list[float] = field(default_factory=list)

    def __post_init__(self):
        spans = [m.span for m in self.mentions]
        if spans != sorted(spans):
            raise ValueError("cluster mentions must be sorted by (start, end)")
        if len(set(spans)) != len(spans):
            raise ValueError("duplicate spans within a cluster")

    def spans(self) -> list[tuple[int, int]]:
        return [m.span for m in self.mentions]

    def __len__(self) -> int:
        return len(self.mentions)


@dataclass
class Document:
    doc_id: str
    tokens: list[str]
    sentence_ends: list[int]
    gold_clusters: list[Cluster] = field(default_factory=list)
    genre: str | None = None

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"{self.doc_id}: document has no tokens")
        m = len(self.tokens)
        if any(b <= a for a, b in zip(self.sentence_ends, self.sentence_ends[1:])):
            raise ValueError(f"{self.doc_id}: sentence_ends must be strictly increasing")
        if not self.sentence_ends or self.sentence_ends[-1] != m - 1:
            raise ValueError(f"{self.doc_id}: last token must be a sentence end")
        if any(e < 0 or e >= m for e in self.sentence_ends):
            raise ValueError(f"{self.doc_id}: sentence_ends out of range")

    def __len__(self) -> int:
        return len(self.tokens)

    def span_text(self, start: int, end: int) -> str:
        return " ".join(self.tokens[start : end + 1])

    def sentence_index(self, token_idx: int) -> int:
        """Index of the sentence containing ``token_idx``."""
        return bisect_left(self.sentence_ends, token_idx)

    def sentence_range(self, sent_idx: int) -> tuple[int, int]:
        """Inclusive token range of sentence ``sent_idx``."""
        start = 0 if sent_idx == 0 else self.sentence_ends[sent_idx - 1] + 1
        return start, self.sentence_ends[sent_idx]

    def cross_sentence_mentions(self) -> list[Mention]:
        """Gold mentions whose span crosses a sentence boundary."""
        return [
            m
            for c in self.gold_clusters
            for m in c.mentions
            if self.sentence_index(m.start) != self.sentence_index(m.end)
        ]


@dataclass(frozen=True)
class Segment:
    doc_id: str
    seg_index: int
    token_range: tuple[int, int]  # [start, end) into Document.tokens
    has_cls: bool = True
    has_sep: bool = True

    def __len__(self) -> int:
        return self.token_range[1] - self.token_range[0]


def eos_distance(doc: Document, t_s: int) -> int:
    """Token distance from ``t_s`` to the nearest sentence end at or after it."""
    if not (0 <= t_s < len(doc)):
        raise IndexError(f"token index {t_s} outside document of length {len(doc)}")
    i = bisect_left(doc.sentence_ends, t_s)
    return doc.sentence_ends[i] - t_s


def segment_document(doc: Document, strategy: str, window: int) -> list[Segment]:
    """Split a document into encoder segments of at most ``window`` positions.

    ``window`` counts the CLS and SEP slots, so each segment carries at most
    ``window - 2`` document tokens. The independent strategy tiles the
    document with disjoint ranges; the overlapping strategy slides by
    ``(window - 2) // 2`` tokens so consecutive segments share roughly half
    their payload.
    """
    if window < 3:
        raise ConfigError(f"segment window must be >= 3 (CLS + SEP + payload), got {window}")
    if strategy not in (INDEPENDENT, OVERLAPPING):
        raise ConfigError(f"unknown segmentation strategy {strategy!r}")
    payload = window - 2
    m = len(doc)
    ranges: list[tuple[int, int]] = []
    if strategy == INDEPENDENT:
        for start in range(0, m, payload):
            ranges.append((start, min(start + payload, m)))
    else:
        stride = max(1, payload // 2)
        start = 0
        while True:
            end = min(start + payload, m)
            ranges.append((start, end))
            if end >= m:
                break
            start += stride
    return [
        Segment(doc_id=doc.doc_id, seg_index=i, token_range=r) for i, r in enumerate(ranges)
    ]


# --- CoNLL-2012 ingestion ---------------------------------------------------

_BEGIN_RE = re.compile(r"#begin document \(([^)]*)\)(?:;\s*part\s+(\d+))?")
_OPEN_RE = re.compile(r"^\((\d+)$")
_CLOSE_RE = re.compile(r"^(\d+)\)$")
_SINGLE_RE = re.compile(r"^\((\d+)\)$")


def _token_column(cols: list[str]) -> str:
    # Full CoNLL-2012 rows carry (doc, part, word-number, word, ...); two-column
    # fixtures carry (word, coref).
    if len(cols) >= 4 and cols[2].isdigit():
        return cols[3]
    return cols[0]


def parse_conll(path: str | Path) -> list[Document]:
    """Read every ``#begin document`` block of a CoNLL coreference file.

    The last whitespace-separated column of each token row is the coreference
    column; gold clusters are rebuilt from its bracket markers. Blank lines
    inside a document mark sentence breaks, and the final token of a document
    always counts as a sentence end.
    """
    path = Path(path)
    docs: list[Document] = []
    in_doc = False
    doc_name = ""
    part = ""
    tokens: list[str] = []
    sentence_ends: list[int] = []
    open_spans: dict[int, list[int]] = {}
    spans_by_entity: dict[int, list[tuple[int, int]]] = {}
    sentence_open = False

    def close_sentence():
        nonlocal sentence_open
        if sentence_open and tokens:
            if not sentence_ends or sentence_ends[-1] != len(tokens) - 1:
                sentence_ends.append(len(tokens) - 1)
        sentence_open = False

    def finish_document(line_no: int):
        nonlocal in_doc
        close_sentence()
        for entity, starts in open_spans.items():
            if starts:
                raise ConllParseError(
                    f"entity {entity} opened at token {starts[-1]} but never closed", line_no
                )
        if not tokens:
            raise ConllParseError(f"document {doc_name!r} has no tokens", line_no)
        doc_id = doc_name if not part else f"{doc_name}#part{int(part):03d}"
        genre = doc_name.split("/")[0] if "/" in doc_name else None
        clusters = []
        for entity in sorted(spans_by_entity):
            spans = sorted(set(spans_by_entity[entity]))
            clusters.append(
                Cluster(
                    mentions=[
                        Mention(s, e, " ".join(tokens[s : e + 1])) for s, e in spans
                    ]
                )
            )
        doc = Document(
            doc_id=doc_id,
            tokens=list(tokens),
            sentence_ends=list(sentence_ends),
            gold_clusters=clusters,
            genre=genre,
        )
        crossing = doc.cross_sentence_mentions()
        if crossing:
            logger.warning(
                "%s: %d gold mention(s) cross a sentence boundary (kept)",
                doc_id,
                len(crossing),
            )
        docs.append(doc)
        in_doc = False

    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            stripped = line.strip()
            if stripped.startswith("#begin document"):
                if in_doc:
                    raise ConllParseError("nested #begin document", line_no)
                m = _BEGIN_RE.match(stripped)
                if not m:
                    raise ConllParseError("malformed #begin document header", line_no)
                doc_name, part = m.group(1), m.group(2) or ""
                tokens, sentence_ends = [], []
                open_spans, spans_by_entity = {}, {}
                sentence_open = False
                in_doc = True
                continue
            if stripped.startswith("#end document"):
                if not in_doc:
                    raise ConllParseError("#end document without #begin", line_no)
                finish_document(line_no)
                continue
            if not in_doc:
                if stripped:
                    raise ConllParseError("token row outside any document", line_no)
                continue
            if not stripped:
                close_sentence()
                continue
            cols = stripped.split()
            if len(cols) < 2:
                raise ConllParseError("token row needs at least word and coref columns", line_no)
            token = _token_column(cols)
            coref = cols[-1]
            idx = len(tokens)
            tokens.append(token)
            sentence_open = True
            if coref in ("-", "_"):
                continue
            markers = coref.split("|")
            # closes resolve against opens from earlier tokens, so they must
            # be applied before this token's own opens
            ordered = [m for m in markers if _CLOSE_RE.match(m)] + [
                m for m in markers if not _CLOSE_RE.match(m)
            ]
            for marker in ordered:
                if _SINGLE_RE.match(marker):
                    entity = int(marker[1:-1])
                    spans_by_entity.setdefault(entity, []).append((idx, idx))
                elif _OPEN_RE.match(marker):
                    entity = int(marker[1:])
                    open_spans.setdefault(entity, []).append(idx)
                elif _CLOSE_RE.match(marker):
                    entity = int(marker[:-1])
                    starts = open_spans.get(entity)
                    if not starts:
                        raise ConllParseError(
                            f"close marker for entity {entity} without a matching open", line_no
                        )
                    start = starts.pop()
                    spans_by_entity.setdefault(entity, []).append((start, idx))
                else:
                    raise ConllParseError(f"unrecognized coref marker {marker!r}", line_no)
    if in_doc:
        raise ConllParseError("file ended inside a document (missing #end document)", line_no)
    return docs


def render_conll(doc: Document, entity_ids: list[int] | None = None) -> str:
    """Render a document (with its gold clusters) back to CoNLL rows.

    Inverse of :func:`parse_conll` up to entity renumbering; used to build
    synthetic corpora and round-trip tests.
    """
    if entity_ids is None:
        entity_ids = list(range(len(doc.gold_clusters)))
    opens: dict[int, list[int]] = {}
    closes: dict[int, list[int]] = {}
    singles: dict[int, list[int]] = {}
    for eid, cluster in zip(entity_ids, doc.gold_clusters):
        for m in cluster.mentions:
            if m.start == m.end:
                singles.setdefault(m.start, []).append(eid)
            else:
                opens.setdefault(m.start, []).append(eid)
                closes.setdefault(m.end, []).append(eid)
    lines = [f"#begin document ({doc.doc_id})"]
    for idx, token in enumerate(doc.tokens):
        markers = [f"({eid}" for eid in opens.get(idx, [])]
        markers += [f"({eid})" for eid in singles.get(idx, [])]
        markers += [f"{eid})" for eid in closes.get(idx, [])]
        coref = "|".join(markers) if markers else "-"
        lines.append(f"{token}\t{coref}")
        if idx in doc.sentence_ends:
            lines.append("")
    lines.append("#end document")
    return "\n".join(lines) + "\n"


def write_conll(docs: list[Document], path: str | Path) -> None:
    Path(path).write_text("".join(render_conll(d) for d in docs), encoding="utf-8")


# --- prediction persistence --------------------------------------------------

_PREDICTION_KEYS = {"doc_id", "clusters", "pair_probs"}


def write_predictions(docs: list[tuple[str, list[Cluster]]], path: str | Path) -> None:
    """Write one JSON object per document: doc_id, cluster spans, pair probs."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc_id, clusters in docs:
            record = {
                "doc_id": doc_id,
                "clusters": [[[m.start, m.end] for m in c.mentions] for c in clusters],
                "pair_probs": [list(c.pair_probs) for c in clusters],
            }
            fh.write(json.dumps(record) + "\n")


def read_predictions(path: str | Path) -> list[tuple[str, list[Cluster]]]:
    """Inverse of :func:`write_predictions`; validates spans and key names."""
    out: list[tuple[str, list[Cluster]]] = []
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            unknown = set(record) - _PREDICTION_KEYS
            if unknown:
                logger.warning("prediction line %d: ignoring unknown keys %s", line_no, sorted(unknown))
            missing = {"doc_id", "clusters"} - set(record)
            if missing:
                raise PredictionFormatError(f"line {line_no}: missing keys {sorted(missing)}")
            raw_clusters = record["clusters"]
            raw_probs = record.get("pair_probs") or [[] for _ in raw_clusters]
            if len(raw_probs) != len(raw_clusters):
                raise PredictionFormatError(
                    f"line {line_no}: pair_probs count does not match clusters"
                )
            clusters = []
            for spans, probs in zip(raw_clusters, raw_probs):
                mentions = []
                for span in spans:
                    if len(span) != 2 or not all(isinstance(v, int) for v in span):
                        raise PredictionFormatError(f"line {line_no}: bad span {span!r}")
                    s, e = span
                    if s < 0 or e < s:
                        raise PredictionFormatError(f"line {line_no}: invalid span [{s}, {e}]")
                    mentions.append(Mention(s, e))
                clusters.append(Cluster(mentions=mentions, pair_probs=list(probs)))
            out.append((record["doc_id"], clusters))
    return out


def expected_segment_count(m: int, window: int, strategy: str) -> int:
    """Closed-form segment count; cross-checks segment_document in tests."""
    payload = window - 2
    if strategy == INDEPENDENT:
        return math.ceil(m / payload)
    stride = max(1, payload // 2)
    if m <= payload:
        return 1
    return 1 + math.ceil((m - payload) / stride)
