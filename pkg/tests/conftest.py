import random
from pathlib import Path

import pytest
import torch
from hypothesis import HealthCheck, settings

from corefpipe.corpus import Cluster, Document, Mention, parse_conll

settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")

DATA_DIR = Path(__file__).parent / "data"
TOY_CORPUS = DATA_DIR / "toy_corpus.conll"
NESTED_FIXTURE = DATA_DIR / "nested_fixture.conll"


def make_doc(n_sentences=3, sentence_len=6, doc_id="doc") -> Document:
    tokens = []
    ends = []
    for s in range(n_sentences):
        tokens.extend(f"w{s}_{i}" for i in range(sentence_len))
        ends.append(len(tokens) - 1)
    return Document(doc_id=doc_id, tokens=tokens, sentence_ends=ends)


def mention(doc: Document, start: int, end: int, p_start=None, p_end=None) -> Mention:
    return Mention(start, end, doc.span_text(start, end), p_start=p_start, p_end=p_end)


def random_document(rng: random.Random, max_sentences=4, max_len=8, doc_id="rand") -> Document:
    tokens = []
    ends = []
    for s in range(rng.randint(1, max_sentences)):
        for i in range(rng.randint(1, max_len)):
            tokens.append(f"t{rng.randint(0, 30)}")
        ends.append(len(tokens) - 1)
    return Document(doc_id=doc_id, tokens=tokens, sentence_ends=ends)


@pytest.fixture(scope="session")
def toy_docs():
    return parse_conll(TOY_CORPUS)


@pytest.fixture(autouse=True)
def _fixed_torch_seed():
    torch.manual_seed(0)


@pytest.fixture
def speech_doc():
    """Tokenized two-sentence passage used by the annotation tests."""
    tokens = (
        "But the Son of Man has no place where he can rest his head . "
        "Jesus said to another man , `` Follow me ! ''"
    ).split()
    first_end = tokens.index(".")
    return Document(
        doc_id="fixtures/speech",
        tokens=tokens,
        sentence_ends=[first_end, len(tokens) - 1],
    )


class PlantedState:
    """A document with gold annotation plus a corrupted predicted state.

    One invalid mention (a verb token) sneaks into the place cluster, and the
    person and object entities are merged into a single mixed cluster.
    """

    def __init__(self):
        tokens = "Anna found a lamp near the garden . she kept the lamp today .".split()
        self.doc = Document(
            doc_id="fixtures/planted",
            tokens=tokens,
            sentence_ends=[7, 13],
            gold_clusters=[
                Cluster([Mention(0, 0, "Anna"), Mention(8, 8, "she")]),
                Cluster([Mention(2, 3, "a lamp"), Mention(10, 11, "the lamp")]),
                Cluster([Mention(5, 6, "the garden")]),
            ],
        )
        self.invalid = Mention(1, 1, "found", p_start=0.61, p_end=0.55)
        gold = [m for c in self.doc.gold_clusters for m in c.mentions]
        self.detected = sorted(
            [Mention(m.start, m.end, m.text, p_start=0.95, p_end=0.9) for m in gold]
            + [self.invalid],
            key=lambda m: m.span,
        )
        person = [m for m in self.detected if m.span in {(0, 0), (8, 8)}]
        thing = [m for m in self.detected if m.span in {(2, 3), (10, 11)}]
        self.mixed = Cluster(
            mentions=sorted(person + thing, key=lambda m: m.span),
            pair_probs=[0.55, 0.52, 0.51],
        )
        self.bad_place = Cluster(
            mentions=[self.invalid, Mention(5, 6, "the garden", p_start=0.95, p_end=0.9)],
            pair_probs=[0.56],
        )
        self.planted_clusters = [self.mixed, self.bad_place]


@pytest.fixture
def planted():
    return PlantedState()
