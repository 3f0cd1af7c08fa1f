import math
import random

import pytest
import torch

from corefpipe.corpus import Cluster, Document, Mention
from corefpipe.detection import (
    MentionDetector,
    SpanLimits,
    bilinear_reference,
    candidate_end_range,
    detect_mentions,
    detection_loss,
    infinite_limits,
    spans_cross_sentence,
)
from corefpipe.errors import ConfigError, ShapeError

from conftest import make_doc, random_document
from gradcheck import check_grads_against_fd


def zeroed(module: torch.nn.Module) -> torch.nn.Module:
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


class TestStartProbs:
    def test_zero_weights_give_half(self):
        det = zeroed(MentionDetector(d_h=8, d_r=4))
        probs = det.start_probs(torch.randn(7, 8))
        assert torch.allclose(probs, torch.full((7,), 0.5))

    def test_length_matches_input(self):
        det = MentionDetector(d_h=8, d_r=4)
        assert det.start_probs(torch.randn(7, 8)).shape == (7,)

    def test_sigmoid_monotone_in_logit_weight(self):
        det = zeroed(MentionDetector(d_h=4, d_r=4))
        h = torch.ones(1, 4)
        with torch.no_grad():
            det.start_mlp[0].weight[0, 0] = 1.0  # positive hidden feature
            det.start_mlp[2].weight[0, 0] = 0.5
            low = det.start_probs(h).item()
            det.start_mlp[2].weight[0, 0] = 1.5
            high = det.start_probs(h).item()
        assert high > low > 0.5


class TestCandidateEndRange:
    def test_eos_distance_binds(self):
        doc = Document("d", [f"t{i}" for i in range(41)], [10, 40])
        r = candidate_end_range(5, doc, SpanLimits(l_max=30))
        assert (r.start, r.stop - 1) == (5, 10)

    def test_l_max_binds(self):
        doc = Document("d", [f"t{i}" for i in range(41)], [40])
        r = candidate_end_range(5, doc, SpanLimits(l_max=3))
        assert (r.start, r.stop - 1) == (5, 8)

    def test_start_on_sentence_end(self):
        doc = make_doc(n_sentences=2, sentence_len=5)
        r = candidate_end_range(4, doc, SpanLimits(l_max=30))
        assert list(r) == [4]

    def test_infinite_cap_reduces_to_sentence_rule(self):
        doc = Document("d", [f"t{i}" for i in range(60)], [59])
        r = candidate_end_range(0, doc, infinite_limits())
        assert (r.start, r.stop - 1) == (0, 59)


class TestBiaffineScores:
    def test_all_zero_parameters_give_zero_scores(self):
        det = MentionDetector(d_h=4, d_r=3)
        with torch.no_grad():
            det.bilinear.zero_()
            det.linear.zero_()
            det.bias.zero_()
        s = det.biaffine_scores(torch.randn(5, 4), torch.randn(5, 4))
        assert torch.equal(s, torch.zeros(5, 3))

    def test_pure_bias(self):
        det = MentionDetector(d_h=4, d_r=3)
        with torch.no_grad():
            det.bilinear.zero_()
            det.linear.zero_()
            det.bias.copy_(torch.tensor([1.0, -2.0, 0.5]))
        s = det.biaffine_scores(torch.randn(5, 4), torch.randn(5, 4))
        assert torch.allclose(s, torch.tensor([1.0, -2.0, 0.5]).expand(5, 3))

    def test_planted_identity_bilinear(self):
        # d_h=2, d_r=1, identity projections, U[:,0,:]=I: score = x_s . x_e = 11
        det = MentionDetector(d_h=2, d_r=1)
        with torch.no_grad():
            det.fc1.weight.copy_(torch.eye(2))
            det.fc1.bias.zero_()
            det.fc2.weight.copy_(torch.eye(2))
            det.fc2.bias.zero_()
            det.bilinear.copy_(torch.eye(2).unsqueeze(1))
            det.linear.zero_()
            det.bias.zero_()
        s = det.biaffine_scores(torch.tensor([[1.0, 2.0]]), torch.tensor([[3.0, 4.0]]))
        assert torch.allclose(s, torch.tensor([[11.0]]))

    def test_bilinear_term_equals_triple_loop(self):
        torch.manual_seed(6)
        for _ in range(5):
            d_h, d_r = 3, 2
            u = torch.randn(d_h, d_r, d_h, dtype=torch.float64)
            x_s = torch.randn(d_h, dtype=torch.float64)
            x_e = torch.randn(d_h, dtype=torch.float64)
            fast = torch.einsum("p,prq,q->r", x_s, u, x_e)
            slow = bilinear_reference(x_s, u, x_e)
            assert torch.allclose(fast, slow, atol=1e-10, rtol=0)

    def test_shape_mismatch(self):
        det = MentionDetector(d_h=4, d_r=3)
        with pytest.raises(ShapeError):
            det.biaffine_scores(torch.randn(5, 4), torch.randn(4, 4))

    def test_gradients_match_finite_differences(self):
        torch.manual_seed(7)
        det = MentionDetector(d_h=4, d_r=3).double()
        hs = torch.randn(5, 4, dtype=torch.float64)
        he = torch.randn(5, 4, dtype=torch.float64)
        readout = torch.randn(5, 3, dtype=torch.float64)
        params = {
            "U": det.bilinear,
            "W": det.linear,
            "b": det.bias,
            "fc1.weight": det.fc1.weight,
            "fc2.weight": det.fc2.weight,
        }
        check_grads_against_fd(
            lambda: (det.biaffine_scores(hs, he) * readout).sum(), params
        )


class TestEndProbs:
    def test_zero_end_head_gives_half(self):
        det = zeroed(MentionDetector(d_h=8, d_r=4))
        probs = det.end_probs(0, torch.tensor([0, 1, 2]), torch.randn(5, 8))
        assert torch.allclose(probs, torch.full((3,), 0.5))

    def test_one_probability_per_candidate(self):
        det = MentionDetector(d_h=8, d_r=4)
        probs = det.end_probs(1, torch.tensor([1, 2, 3, 4]), torch.randn(6, 8))
        assert probs.shape == (4,)

    def test_regression_goldens_per_mode(self):
        # frozen from the first verified run; guards each scoring path
        torch.manual_seed(90)
        h = torch.randn(6, 8)
        ends = torch.tensor([2, 3, 4, 5])
        torch.manual_seed(91)
        biaffine = MentionDetector(d_h=8, d_r=4, mode="biaffine")
        torch.manual_seed(91)
        baseline = MentionDetector(d_h=8, d_r=4, mode="baseline")
        with torch.no_grad():
            got_bi = biaffine.end_probs(2, ends, h)
            got_base = baseline.end_probs(2, ends, h)
        expect_bi = torch.tensor([0.53438878, 0.49877882, 0.46861073, 0.48063654])
        expect_base = torch.tensor([0.58873546, 0.61766756, 0.57882005, 0.58878338])
        assert torch.allclose(got_bi, expect_bi, atol=1e-6)
        assert torch.allclose(got_base, expect_base, atol=1e-6)
        assert not torch.allclose(got_bi, got_base)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ConfigError):
            MentionDetector(d_h=8, d_r=4, mode="quadratic")


class PlantedDetector:
    """Start fires only at `start`, end only at `end`; else far below 0.5."""

    def __init__(self, start, end, d_h=4):
        self.start, self.end = start, end

    def start_probs(self, h):
        probs = torch.full((h.shape[0],), 0.01)
        probs[self.start] = 0.99
        return probs

    def end_probs(self, t_s, ends, h):
        return torch.tensor([0.99 if int(e) == self.end else 0.01 for e in ends])


class TestDetectMentions:
    def test_no_starts_no_mentions(self):
        det = MentionDetector(d_h=8, d_r=4)
        with torch.no_grad():
            det.start_mlp[2].bias.fill_(-10.0)
        doc = make_doc()
        assert detect_mentions(doc, torch.randn(len(doc), 8), det, SpanLimits()) == []

    def test_planted_single_mention(self):
        # oracle: direct evaluation of the planted probabilities
        doc = make_doc(n_sentences=1, sentence_len=6)
        planted = PlantedDetector(start=3, end=4)
        out = detect_mentions(doc, torch.randn(6, 4), planted, SpanLimits())
        assert [(m.start, m.end) for m in out] == [(3, 4)]
        assert out[0].text == doc.span_text(3, 4)
        assert out[0].p_start == pytest.approx(0.99)
        assert out[0].p_end == pytest.approx(0.99)

    def test_threshold_tie_counts_as_positive(self):
        det = zeroed(MentionDetector(d_h=4, d_r=4))  # every probability is exactly 0.5
        doc = make_doc(n_sentences=1, sentence_len=3)
        out = detect_mentions(doc, torch.randn(3, 4), det, SpanLimits())
        assert [(m.start, m.end) for m in out] == [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]

    def test_start_at_sentence_end_is_single_token(self):
        doc = make_doc(n_sentences=2, sentence_len=4)
        det = zeroed(MentionDetector(d_h=4, d_r=4))
        out = detect_mentions(doc, torch.randn(len(doc), 4), det, SpanLimits())
        from_eos = [m for m in out if m.start == 3]
        assert [(m.start, m.end) for m in from_eos] == [(3, 3)]


class TestSpanRuleProperties:
    def test_never_cross_sentence_never_exceed_cap(self):
        rng = random.Random(0)
        det = MentionDetector(d_h=8, d_r=4)
        for _ in range(60):
            doc = random_document(rng)
            h = torch.randn(len(doc), 8)
            l_max = rng.choice([0, 1, 2, 5, 30])
            mentions = detect_mentions(doc, h, det, SpanLimits(l_max=l_max))
            assert spans_cross_sentence(doc, mentions) == []
            assert all(m.end - m.start <= l_max for m in mentions)

    def test_mentions_monotone_in_l_max(self):
        rng = random.Random(1)
        det = MentionDetector(d_h=8, d_r=4)
        for _ in range(20):
            doc = random_document(rng)
            h = torch.randn(len(doc), 8)
            spans = [
                {m.span for m in detect_mentions(doc, h, det, SpanLimits(l_max=l))}
                for l in (0, 1, 2, 4, 8)
            ]
            for smaller, larger in zip(spans, spans[1:]):
                assert smaller <= larger


class FakeConfidentDetector:
    """Emits +/-12 logits exactly matching the document's gold spans."""

    def __init__(self, doc):
        self.gold = {m.span for c in doc.gold_clusters for m in c.mentions}
        self.starts = {s for s, _ in self.gold}

    def start_logits(self, h):
        return torch.tensor(
            [12.0 if i in self.starts else -12.0 for i in range(h.shape[0])]
        )

    def end_logits(self, t_s, ends, h):
        return torch.tensor(
            [12.0 if (t_s, int(e)) in self.gold else -12.0 for e in ends]
        )


class TestDetectionLoss:
    def _gold_doc(self):
        doc = make_doc(n_sentences=2, sentence_len=5)
        doc.gold_clusters.append(
            Cluster([Mention(0, 1, doc.span_text(0, 1)), Mention(5, 5, doc.span_text(5, 5))])
        )
        return doc

    def test_uniform_half_costs_ln2_per_label(self):
        doc = self._gold_doc()
        det = zeroed(MentionDetector(d_h=4, d_r=4))
        loss = detection_loss(doc, torch.randn(len(doc), 4), det, SpanLimits())
        assert loss.detach().item() == pytest.approx(math.log(2), abs=1e-6)

    def test_confident_perfect_fit_approaches_zero(self):
        doc = self._gold_doc()
        fake = FakeConfidentDetector(doc)
        loss = detection_loss(doc, torch.randn(len(doc), 4), fake, SpanLimits())
        assert loss.detach().item() < 1e-4

    def test_loss_decreases_under_training(self, toy_docs):
        # trend oracle: 50 optimizer steps must at least halve the loss
        torch.manual_seed(8)
        docs = toy_docs[:5]
        from corefpipe.encoding import EncoderConfig, ToyTransformerEncoder, Vocab

        cfg = EncoderConfig(d_h=32, toy_layers=1, toy_heads=2)
        vocab = Vocab.from_documents(docs)
        encoder = ToyTransformerEncoder(vocab, cfg)
        det = MentionDetector(d_h=32, d_r=8)
        opt = torch.optim.Adam(
            list(encoder.parameters()) + list(det.parameters()), lr=2e-3
        )
        limits = SpanLimits()

        def epoch_loss():
            total = 0.0
            with torch.no_grad():
                for doc in docs:
                    h = encoder(doc.tokens)[1:-1]
                    total += float(detection_loss(doc, h, det, limits))
            return total / len(docs)

        initial = epoch_loss()
        for _ in range(10):  # 10 passes x 5 docs = 50 steps
            for doc in docs:
                opt.zero_grad()
                h = encoder(doc.tokens)[1:-1]
                loss = detection_loss(doc, h, det, limits)
                loss.backward()
                opt.step()
        assert epoch_loss() < 0.5 * initial
