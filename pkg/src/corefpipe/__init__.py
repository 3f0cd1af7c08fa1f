"""corefpipe: a coreference-resolution pipeline.

Neural detect-then-cluster model (segmented long-text encoding with optional
cross-segment bridging, start/end mention detection with a biaffine end
scorer, incremental clustering) combined with an LLM checking stage that
validates low-confidence mentions and verifies or splits low-confidence
clusters. Ships with CoNLL ingestion, the standard coreference metrics, and
deterministic mock LLM backends so everything runs offline.
"""

from .config import PipelineConfig, load_config, save_config
from .corpus import Cluster, Document, Mention, Segment, parse_conll
from .metrics import Score, avg_f1, b_cubed, ceaf_phi4, mention_prf, muc
from .model import CorefModel, load_checkpoint, save_checkpoint
from .pipeline import run_predict
from .train import run_train

__version__ = "0.1.0"

__all__ = [
    "Cluster",
    "CorefModel",
    "Document",
    "Mention",
    "PipelineConfig",
    "Score",
    "Segment",
    "avg_f1",
    "b_cubed",
    "ceaf_phi4",
    "load_checkpoint",
    "load_config",
    "mention_prf",
    "muc",
    "parse_conll",
    "run_predict",
    "run_train",
    "save_checkpoint",
    "save_config",
    "__version__",
]
