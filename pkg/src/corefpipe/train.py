"""Joint training of detection and clustering.

One document per step; gradients accumulate over a configurable number of
steps before clipping and the optimizer update. The learning-rate schedule is
linear warmup followed by linear decay. Validation runs every few epochs and
the best checkpoint (by the validation score average) is kept; training stops
early when patience runs out or the epoch budget is spent.
"""

from __future__ import annotations

import copy
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path

import torch

from .clustering import clustering_loss
from .config import PipelineConfig
from .corpus import Document
from .detection import detection_loss
from .encoding import Vocab
from .errors import ConfigError, TrainingDivergedError
from .metrics import CorpusEvaluator
from .model import CorefModel, save_checkpoint

logger = logging.getLogger(__name__)


@dataclass
class TrainResult:
    best_avg_f1: float
    best_epoch: int
    epochs_run: int
    stopped_early: bool
    checkpoint_path: str | None


def _build_optimizer(model: CorefModel, config: PipelineConfig) -> torch.optim.Optimizer:
    encoder_params = list(model.encoder.backend.parameters())
    encoder_ids = {id(p) for p in encoder_params}
    head_params = [p for p in model.parameters() if id(p) not in encoder_ids]
    groups = [
        {"params": encoder_params, "lr": config.train.lr_encoder},
        {"params": head_params, "lr": config.train.lr_heads},
    ]
    if config.train.optimizer == "adafactor":
        return torch.optim.Adafactor(groups)
    return torch.optim.AdamW(groups)


def _linear_schedule(optimizer, total_steps: int, warmup_frac: float):
    warmup = max(1, int(total_steps * warmup_frac))

    def factor(step: int) -> float:
        if step < warmup:
            return (step + 1) / warmup
        remaining = max(1, total_steps - warmup)
        return max(0.0, (total_steps - step) / remaining)

    return torch.optim.lr_scheduler.LambdaLR(optimizer, factor)


def _gold_mentions(doc: Document):
    mentions = [m for c in doc.gold_clusters for m in c.mentions]
    return sorted(mentions, key=lambda m: m.span)


def validation_avg_f1(model: CorefModel, docs: list[Document], config: PipelineConfig) -> float:
    model.eval()
    evaluator = CorpusEvaluator()
    for doc in docs:
        _, clusters = model.predict_document(doc, config)
        evaluator.update(
            [c.spans() for c in doc.gold_clusters], [c.spans() for c in clusters]
        )
    return evaluator.avg_f1()


def run_train(
    config: PipelineConfig,
    train_docs: list[Document],
    val_docs: list[Document] | None = None,
    checkpoint_path: str | Path | None = None,
) -> tuple[CorefModel, TrainResult]:
    if not train_docs:
        raise ConfigError("training needs at least one document")
    if any(not d.gold_clusters for d in train_docs):
        raise ConfigError("every training document needs gold clusters")
    val_docs = val_docs or train_docs

    torch.manual_seed(config.seed)
    vocab = Vocab.from_documents(train_docs + val_docs)
    model = CorefModel.build(config, vocab)
    optimizer = _build_optimizer(model, config)

    tc = config.train
    steps_per_epoch = max(1, math.ceil(len(train_docs) / tc.grad_accum_steps))
    scheduler = _linear_schedule(optimizer, steps_per_epoch * tc.max_epochs, tc.warmup_frac)
    rng = random.Random(config.seed)
    limits = config.detector.limits()

    best_f1 = -1.0
    best_epoch = 0
    best_state: dict | None = None
    patience_left = tc.early_stop_patience
    epochs_run = 0
    stopped_early = False

    for epoch in range(1, tc.max_epochs + 1):
        epochs_run = epoch
        model.train()
        order = list(range(len(train_docs)))
        rng.shuffle(order)
        optimizer.zero_grad()
        accumulated = 0
        for pos, doc_idx in enumerate(order):
            doc = train_docs[doc_idx]
            h = model.encoder.encode_document(doc)
            loss = tc.detection_weight * detection_loss(doc, h, model.detector, limits)
            loss = loss + tc.clustering_weight * clustering_loss(
                doc, _gold_mentions(doc), h, model.clusterer
            )
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, document {doc.doc_id!r}"
                )
            (loss / tc.grad_accum_steps).backward()
            accumulated += 1
            if accumulated == tc.grad_accum_steps or pos == len(order) - 1:
                torch.nn.utils.clip_grad_norm_(model.parameters(), tc.clip_norm)
                optimizer.step()
                scheduler.step()
                optimizer.zero_grad()
                accumulated = 0

        if epoch % tc.validate_every_epochs == 0:
            f1 = validation_avg_f1(model, val_docs, config)
            if f1 > best_f1:
                best_f1 = f1
                best_epoch = epoch
                best_state = copy.deepcopy(model.state_dict())
                patience_left = tc.early_stop_patience
            else:
                patience_left -= 1
                if patience_left <= 0:
                    stopped_early = True
                    logger.info("early stop at epoch %d (best %.4f @ %d)", epoch, best_f1, best_epoch)
                    break

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    saved = None
    if checkpoint_path is not None:
        save_checkpoint(model, config, checkpoint_path)
        saved = str(checkpoint_path)
    return model, TrainResult(
        best_avg_f1=best_f1,
        best_epoch=best_epoch,
        epochs_run=epochs_run,
        stopped_early=stopped_early,
        checkpoint_path=saved,
    )
