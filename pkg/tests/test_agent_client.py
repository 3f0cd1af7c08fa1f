import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from corefpipe.agent.checker import check_mentions
from corefpipe.agent.client import AgentRequest, HttpLlmClient, LlmClientConfig
from corefpipe.agent.mock import MockLlm
from corefpipe.errors import ConfigError, LlmTransportError


class ChatHandler(BaseHTTPRequestHandler):
    """Serves canned chat completions; can fail the first N requests."""

    replies: list[str] = []
    failures_left = 0
    seen: list[dict] = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append(
            {"body": body, "auth": self.headers.get("Authorization", "")}
        )
        if type(self).failures_left > 0:
            type(self).failures_left -= 1
            self.send_response(500)
            self.end_headers()
            return
        reply = type(self).replies.pop(0) if type(self).replies else "Fallback. Yes"
        payload = json.dumps(
            {"choices": [{"message": {"role": "assistant", "content": reply}}]}
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def chat_server():
    ChatHandler.replies = []
    ChatHandler.failures_left = 0
    ChatHandler.seen = []
    server = HTTPServer(("127.0.0.1", 0), ChatHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()
    thread.join(timeout=5)


def client_config(base_url, **kw):
    defaults = dict(base_url=base_url, model_name="test-model", max_retries=2, timeout_s=5.0)
    defaults.update(kw)
    return LlmClientConfig(**defaults)


class TestHttpLlmClient:
    def test_round_trip_and_payload_shape(self, chat_server, monkeypatch):
        monkeypatch.setenv("LLM_API_KEY", "sk-test")
        ChatHandler.replies = ["Looks valid. Yes"]
        client = HttpLlmClient(client_config(chat_server))
        reply = client.complete(AgentRequest(kind="mention_check", prompt="check [this]"))
        assert reply == "Looks valid. Yes"
        request = ChatHandler.seen[0]
        assert request["body"]["model"] == "test-model"
        assert request["body"]["temperature"] == 0.0
        assert request["body"]["messages"] == [{"role": "user", "content": "check [this]"}]
        assert request["auth"] == "Bearer sk-test"

    def test_retries_after_server_error(self, chat_server):
        ChatHandler.failures_left = 1
        ChatHandler.replies = ["Recovered. Yes"]
        client = HttpLlmClient(client_config(chat_server))
        assert client.complete(AgentRequest(kind="mention_check", prompt="p")) == "Recovered. Yes"
        assert len(ChatHandler.seen) == 2

    def test_exhausted_retries_raise_transport_error(self, chat_server):
        ChatHandler.failures_left = 99
        client = HttpLlmClient(client_config(chat_server, max_retries=1))
        with pytest.raises(LlmTransportError):
            client.complete(AgentRequest(kind="mention_check", prompt="p"))

    def test_requires_endpoint_and_model(self):
        with pytest.raises(ConfigError):
            HttpLlmClient(LlmClientConfig(base_url="", model_name=""))


class ParallelMock(MockLlm):
    """Gold-backed mock that advertises parallel capacity."""

    max_parallel = 4


class TestBoundedParallelism:
    def test_parallel_checking_matches_sequential_order(self, planted):
        sequential = MockLlm.gold_backed([planted.doc])
        parallel = ParallelMock("gold", gold_docs=[planted.doc])
        s1, e1 = check_mentions(planted.detected, planted.doc, sequential)
        s2, e2 = check_mentions(planted.detected, planted.doc, parallel)
        assert [m.span for m in s1] == [m.span for m in s2]
        assert [ex.target_ref for ex in e1] == [ex.target_ref for ex in e2]
        assert [ex.raw_reply for ex in e1] == [ex.raw_reply for ex in e2]
