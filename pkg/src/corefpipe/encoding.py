"""Per-token document representations.

Each segment is encoded independently by a backend transformer after adding
CLS/SEP slots. An optional bridging module carries the previous segment's SEP
representation into the next segment before its token rows are harvested, so
information flows left to right across segment boundaries. Token rows are
concatenated into one matrix of shape (document length, d_h).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import torch
from torch import Tensor, nn

from .corpus import Document, INDEPENDENT, OVERLAPPING, segment_document
from .errors import ConfigError, ShapeError

BRIDGE_NONE = "none"
BRIDGE_FC = "fc"
BRIDGE_MHA = "mha"

UNK, CLS, SEP = "<unk>", "<cls>", "<sep>"


@dataclass
class EncoderConfig:
    d_h: int = 64
    backend: str = "toy"
    bridging: str = BRIDGE_NONE
    mha_heads: int = 4
    window: int = 512  # per-segment budget including the CLS/SEP slots
    strategy: str = INDEPENDENT
    toy_layers: int = 2
    toy_heads: int = 4

    def __post_init__(self):
        if self.bridging not in (BRIDGE_NONE, BRIDGE_FC, BRIDGE_MHA):
            raise ConfigError(f"unknown bridging variant {self.bridging!r}")
        if self.strategy not in (INDEPENDENT, OVERLAPPING):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.bridging == BRIDGE_MHA and self.d_h % self.mha_heads != 0:
            raise ConfigError(
                f"d_h={self.d_h} not divisible by mha_heads={self.mha_heads}"
            )
        if self.bridging != BRIDGE_NONE and self.strategy == OVERLAPPING:
            raise ConfigError("bridging requires the independent strategy")


class Vocab:
    """Token-to-id mapping with reserved unknown/CLS/SEP entries."""

    def __init__(self, tokens: Sequence[str]):
        self._itos = [UNK, CLS, SEP] + sorted(set(tokens) - {UNK, CLS, SEP})
        self._stoi = {t: i for i, t in enumerate(self._itos)}

    @classmethod
    def from_documents(cls, docs: Sequence[Document]) -> "Vocab":
        return cls([t for d in docs for t in d.tokens])

    @classmethod
    def from_token_list(cls, itos: Sequence[str]) -> "Vocab":
        """Rebuild a vocabulary exactly as serialized (id order preserved)."""
        if list(itos[:3]) != [UNK, CLS, SEP]:
            raise ValueError("token list does not start with the reserved entries")
        vocab = cls.__new__(cls)
        vocab._itos = list(itos)
        vocab._stoi = {t: i for i, t in enumerate(vocab._itos)}
        return vocab

    def __len__(self) -> int:
        return len(self._itos)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        unk = self._stoi[UNK]
        return [self._stoi.get(t, unk) for t in tokens]

    @property
    def cls_id(self) -> int:
        return self._stoi[CLS]

    @property
    def sep_id(self) -> int:
        return self._stoi[SEP]

    def tokens(self) -> list[str]:
        return list(self._itos)


class ToyTransformerEncoder(nn.Module):
    """Small trainable transformer used for tests and toy-scale training."""

    def __init__(self, vocab: Vocab, cfg: EncoderConfig):
        super().__init__()
        self.vocab = vocab
        self.d_h = cfg.d_h
        self.window = cfg.window
        self.embed = nn.Embedding(len(vocab), cfg.d_h)
        self.pos_embed = nn.Embedding(cfg.window, cfg.d_h)
        layer = nn.TransformerEncoderLayer(
            d_model=cfg.d_h,
            nhead=cfg.toy_heads,
            dim_feedforward=2 * cfg.d_h,
            dropout=0.0,
            batch_first=True,
        )
        self.layers = nn.TransformerEncoder(layer, num_layers=cfg.toy_layers)

    def forward(self, tokens: Sequence[str]) -> Tensor:
        """Encode one segment; rows are [cls, t_1..t_m, sep]."""
        if len(tokens) > self.window - 2:
            raise ShapeError(
                f"segment of {len(tokens)} tokens exceeds window payload {self.window - 2}"
            )
        ids = [self.vocab.cls_id] + self.vocab.encode(tokens) + [self.vocab.sep_id]
        x = torch.tensor(ids, dtype=torch.long, device=self.embed.weight.device)
        h = self.embed(x) + self.pos_embed(torch.arange(len(ids), device=x.device))
        return self.layers(h.unsqueeze(0)).squeeze(0)


# Third-party encoders (e.g. a pretrained transformer wrapper) register a
# factory here; it must return an nn.Module mapping a token list to a
# (len + 2, d_h) matrix with CLS/SEP rows at the edges.
_BACKENDS: dict[str, Callable[[Vocab, EncoderConfig], nn.Module]] = {
    "toy": ToyTransformerEncoder,
}


def register_backend(name: str, factory: Callable[[Vocab, EncoderConfig], nn.Module]) -> None:
    _BACKENDS[name] = factory


def build_backend(vocab: Vocab, cfg: EncoderConfig) -> nn.Module:
    try:
        factory = _BACKENDS[cfg.backend]
    except KeyError:
        raise ConfigError(
            f"no encoder backend registered under {cfg.backend!r}; "
            f"available: {sorted(_BACKENDS)}"
        ) from None
    return factory(vocab, cfg)


class BridgeFC(nn.Module):
    """Fully connected bridge: rows get the previous SEP summary concatenated,
    projected back to d_h, then residual-added and layer-normalized."""

    def __init__(self, d_h: int):
        super().__init__()
        self.fc = nn.Linear(2 * d_h, d_h)
        self.norm = nn.LayerNorm(d_h)

    def forward(self, h_sep: Tensor, h_next: Tensor) -> Tensor:
        if h_sep.dim() != 1 or h_next.dim() != 2 or h_sep.shape[0] != h_next.shape[1]:
            raise ShapeError(
                f"bridge expects (d,) and (k, d); got {tuple(h_sep.shape)} and {tuple(h_next.shape)}"
            )
        expanded = h_sep.unsqueeze(0).expand(h_next.shape[0], -1)
        h_hat = self.fc(torch.cat([expanded, h_next], dim=-1))
        return self.norm(h_hat + h_next)


class BridgeMHA(nn.Module):
    """Attention bridge with the segment rows as queries and the previous SEP
    summary as the single key/value slot.

    Softmax over one key is the point mass, so query/key projections would
    never receive gradient; only the value and output projections are kept.
    """

    def __init__(self, d_h: int, n_heads: int):
        super().__init__()
        if d_h % n_heads != 0:
            raise ConfigError(f"d_h={d_h} not divisible by n_heads={n_heads}")
        self.n_heads = n_heads
        self.v_proj = nn.Linear(d_h, d_h)
        self.out_proj = nn.Linear(d_h, d_h)
        self.norm = nn.LayerNorm(d_h)

    def forward(self, h_sep: Tensor, h_next: Tensor) -> Tensor:
        if h_sep.dim() != 1 or h_next.dim() != 2 or h_sep.shape[0] != h_next.shape[1]:
            raise ShapeError(
                f"bridge expects (d,) and (k, d); got {tuple(h_sep.shape)} and {tuple(h_next.shape)}"
            )
        attended = self.out_proj(self.v_proj(h_sep))
        h_hat = attended.unsqueeze(0).expand_as(h_next)
        return self.norm(h_hat + h_next)


def build_bridge(cfg: EncoderConfig) -> nn.Module | None:
    if cfg.bridging == BRIDGE_NONE:
        return None
    if cfg.bridging == BRIDGE_FC:
        return BridgeFC(cfg.d_h)
    return BridgeMHA(cfg.d_h, cfg.mha_heads)


class DocumentEncoder(nn.Module):
    """Backend plus optional bridge, applied segment by segment."""

    def __init__(self, backend: nn.Module, cfg: EncoderConfig):
        super().__init__()
        self.backend = backend
        self.cfg = cfg
        self.bridge = build_bridge(cfg)

    def encode_segment(self, tokens: Sequence[str]) -> Tensor:
        return self.backend(tokens)

    def encode_document(self, doc: Document) -> Tensor:
        """Return the (len(doc), d_h) token representation matrix.

        Segments are processed left to right. With bridging enabled, each
        segment matrix is rewritten from the previous segment's post-bridge
        SEP row before its token rows are harvested. Under the overlapping
        strategy the first segment to cover a token supplies its row.
        """
        segments = segment_document(doc, self.cfg.strategy, self.cfg.window)
        rows: list[Tensor | None] = [None] * len(doc)
        prev_sep: Tensor | None = None
        for seg in segments:
            start, end = seg.token_range
            h = self.encode_segment(doc.tokens[start:end])
            if self.bridge is not None and prev_sep is not None:
                h = self.bridge(prev_sep, h)
            prev_sep = h[-1]
            token_rows = h[1 : 1 + (end - start)]
            for offset in range(end - start):
                if rows[start + offset] is None:
                    rows[start + offset] = token_rows[offset]
        out = torch.stack(rows)  # type: ignore[arg-type]
        if not torch.isfinite(out).all():
            raise ShapeError(f"{doc.doc_id}: non-finite values in document encoding")
        return out
