"""The full neural model and its checkpoint format."""

from __future__ import annotations

from pathlib import Path

import torch
from torch import nn

from .clustering import IncrementalClusterer, cluster_mentions
from .config import PipelineConfig
from .corpus import Cluster, Document, Mention
from .detection import MentionDetector, detect_mentions
from .encoding import DocumentEncoder, Vocab, build_backend


class CorefModel(nn.Module):
    """Encoder, mention detector, and incremental clusterer in one bundle."""

    def __init__(
        self,
        encoder: DocumentEncoder,
        detector: MentionDetector,
        clusterer: IncrementalClusterer,
        vocab: Vocab,
    ):
        super().__init__()
        self.encoder = encoder
        self.detector = detector
        self.clusterer = clusterer
        self.vocab = vocab

    @classmethod
    def build(cls, config: PipelineConfig, vocab: Vocab) -> "CorefModel":
        backend = build_backend(vocab, config.encoder)
        encoder = DocumentEncoder(backend, config.encoder)
        detector = MentionDetector(
            d_h=config.encoder.d_h, d_r=config.detector.d_r, mode=config.detector.mode
        )
        clusterer = IncrementalClusterer(d_h=config.encoder.d_h)
        return cls(encoder, detector, clusterer, vocab)

    def predict_document(
        self, doc: Document, config: PipelineConfig
    ) -> tuple[list[Mention], list[Cluster]]:
        """Detect and cluster without any LLM involvement."""
        limits = config.detector.limits()
        with torch.no_grad():
            h = self.encoder.encode_document(doc)
            mentions = detect_mentions(doc, h, self.detector, limits)
            clusters = cluster_mentions(mentions, h, self.clusterer, limits.threshold)
        return mentions, clusters


def save_checkpoint(model: CorefModel, config: PipelineConfig, path: str | Path) -> None:
    torch.save(
        {
            "state_dict": model.state_dict(),
            "vocab_tokens": model.vocab.tokens(),
            "config": config.to_dict(),
        },
        str(path),
    )


def load_checkpoint(path: str | Path) -> tuple[CorefModel, PipelineConfig]:
    payload = torch.load(str(path), map_location="cpu", weights_only=True)
    config = PipelineConfig.from_dict(payload["config"])
    vocab = Vocab.from_token_list(payload["vocab_tokens"])
    model = CorefModel.build(config, vocab)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, config
