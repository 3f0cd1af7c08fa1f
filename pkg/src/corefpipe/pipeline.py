"""Inference wiring: detect, filter, check, cluster, verify, split, persist.

The agent stages can be bypassed entirely (pure neural path) or backed by a
deterministic mock, so the whole pipeline runs offline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import torch

from .agent.checker import (
    AgentExchange,
    check_and_split_clusters_aligned,
    check_mentions,
    write_audit_log,
)
from .agent.client import HttpLlmClient
from .agent.mock import MockLlm
from .clustering import cluster_mentions
from .config import PipelineConfig
from .corpus import (
    Cluster,
    Document,
    Mention,
    parse_conll,
    read_predictions,
    write_predictions,
)
from .detection import detect_mentions
from .errors import ConfigError
from .filters import select_clusters_for_check, select_mentions_for_check
from .metrics import CorpusEvaluator, Score, drop_singletons
from .model import CorefModel


def build_llm_client(config: PipelineConfig, docs: list[Document] | None = None):
    """Instantiate the backend named by ``config.llm.backend``."""
    backend = config.llm.backend
    if backend == "api":
        return HttpLlmClient(config.llm.client)
    if backend == "mock:yes":
        return MockLlm.all_yes()
    if backend == "mock:no":
        return MockLlm.all_no()
    if backend == "mock:gold":
        if not docs:
            raise ConfigError("mock:gold needs gold-annotated input documents")
        return MockLlm.gold_backed(docs)
    if backend.startswith("mock:scripted:"):
        return MockLlm.from_audit_log(backend.split(":", 2)[2])
    raise ConfigError(f"unknown llm backend {backend!r}")


@dataclass
class DocumentResult:
    doc_id: str
    detected: list[Mention]
    checked: list[Mention]  # mentions that entered clustering
    clusters: list[Cluster]
    exchanges: list[AgentExchange] = field(default_factory=list)


@dataclass
class PredictResult:
    documents: list[DocumentResult]
    warnings: int = 0

    def predictions(self) -> list[tuple[str, list[Cluster]]]:
        return [(d.doc_id, d.clusters) for d in self.documents]

    def exchanges(self) -> list[AgentExchange]:
        return [ex for d in self.documents for ex in d.exchanges]


def predict_document(
    model: CorefModel,
    doc: Document,
    config: PipelineConfig,
    client=None,
    use_agent: bool = True,
) -> DocumentResult:
    """Run the full per-document pipeline.

    Without the agent the result is exactly the clusterer's output. With it,
    low-confidence mentions are checked before clustering and low-confidence
    clusters are verified (and possibly split) after.
    """
    limits = config.detector.limits()
    exchanges: list[AgentExchange] = []
    with torch.no_grad():
        h = model.encoder.encode_document(doc)
        detected = detect_mentions(doc, h, model.detector, limits)

        mentions = detected
        if use_agent:
            to_check, bypassed = select_mentions_for_check(detected, config.filters)
            survivors, ex = check_mentions(
                to_check, doc, client, n_prev_sentences=config.llm.n_prev_sentences
            )
            exchanges.extend(ex)
            mentions = sorted(bypassed + survivors, key=lambda m: m.span)

        clusters = cluster_mentions(mentions, h, model.clusterer, limits.threshold)
        if use_agent:
            to_check_c, _ = select_clusters_for_check(clusters, config.filters)
            check_ids = {id(c) for c in to_check_c}
            replacements, ex = check_and_split_clusters_aligned(to_check_c, doc, client)
            exchanges.extend(ex)
            by_input = {id(c): parts for c, parts in zip(to_check_c, replacements)}
            final: list[Cluster] = []
            for c in clusters:
                if id(c) in check_ids:
                    final.extend(by_input[id(c)])
                else:
                    final.append(c)
            clusters = final
    return DocumentResult(
        doc_id=doc.doc_id,
        detected=detected,
        checked=mentions,
        clusters=clusters,
        exchanges=exchanges,
    )


def run_predict(
    config: PipelineConfig,
    docs: list[Document],
    model: CorefModel,
    output_path: str | Path | None = None,
    audit_path: str | Path | None = None,
    use_agent: bool = True,
) -> PredictResult:
    torch.manual_seed(config.seed)
    model.eval()
    client = build_llm_client(config, docs) if use_agent else None
    results = [predict_document(model, doc, config, client, use_agent) for doc in docs]
    result = PredictResult(
        documents=results,
        warnings=sum(1 for r in results for ex in r.exchanges if ex.error),
    )
    if output_path is not None:
        write_predictions(result.predictions(), output_path)
    if audit_path is not None:
        write_audit_log(result.exchanges(), audit_path)
    return result


def evaluate_pairs(
    gold_docs: list[Document],
    predictions: list[tuple[str, list[Cluster]]],
    drop_singleton_predictions: bool = False,
) -> dict:
    """Micro-averaged corpus scores for predictions against gold documents."""
    gold_by_id = {d.doc_id: d for d in gold_docs}
    evaluator = CorpusEvaluator()
    for doc_id, clusters in predictions:
        if doc_id not in gold_by_id:
            raise ConfigError(f"prediction for unknown document {doc_id!r}")
        gold = [c.spans() for c in gold_by_id[doc_id].gold_clusters]
        pred = [c.spans() for c in clusters]
        if drop_singleton_predictions:
            pred = drop_singletons(pred)
        evaluator.update(gold, pred)
    scores = evaluator.scores()
    return {
        "muc": scores["muc"],
        "b_cubed": scores["b_cubed"],
        "ceaf_phi4": scores["ceaf_phi4"],
        "mention": scores["mention"],
        "avg_f1": evaluator.avg_f1(),
    }


def evaluate_files(
    gold_path: str | Path, pred_path: str | Path, drop_singleton_predictions: bool = False
) -> dict:
    gold_docs = parse_conll(gold_path)
    predictions = read_predictions(pred_path)
    return evaluate_pairs(gold_docs, predictions, drop_singleton_predictions)


def format_score_table(report: dict) -> str:
    """Fixed-width metric table plus the average F1 line."""
    rows = [f"{'metric':<12}{'P':>8}{'R':>8}{'F1':>8}"]
    for name in ("muc", "b_cubed", "ceaf_phi4", "mention"):
        s: Score = report[name]
        rows.append(
            f"{name:<12}{100 * s.precision:>8.2f}{100 * s.recall:>8.2f}{100 * s.f1:>8.2f}"
        )
    rows.append(f"{'avg_f1':<12}{'':>8}{'':>8}{100 * report['avg_f1']:>8.2f}")
    return "\n".join(rows)


def report_to_json_dict(report: dict) -> dict:
    out = {}
    for name in ("muc", "b_cubed", "ceaf_phi4", "mention"):
        s: Score = report[name]
        out[name] = {"precision": s.precision, "recall": s.recall, "f1": s.f1}
    out["avg_f1"] = report["avg_f1"]
    return out
