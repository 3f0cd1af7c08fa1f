"""Chat-completions client with retry, plus the request envelope.

Requests carry structured fields (kind, document, target span or spans) next
to the rendered prompt so offline backends can answer deterministically; the
HTTP client only ever sends the prompt.
"""

from __future__ import annotations

import json
import logging
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass

from ..errors import ConfigError, LlmTransportError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AgentRequest:
    kind: str
    prompt: str
    doc_id: str = ""
    # (start, end) for a mention check; a tuple of spans for cluster kinds
    target: tuple = ()


@dataclass
class LlmClientConfig:
    base_url: str = ""
    api_key_env: str = "LLM_API_KEY"
    model_name: str = ""
    temperature: float = 0.0
    max_retries: int = 2
    timeout_s: float = 60.0
    max_parallel: int = 4

    def __post_init__(self):
        if self.temperature != 0.0:
            raise ConfigError("LLM temperature is fixed at 0 for reproducible checking")
        if self.max_retries < 0:
            raise ConfigError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.max_parallel < 1:
            raise ConfigError(f"max_parallel must be >= 1, got {self.max_parallel}")


class HttpLlmClient:
    """Minimal chat-completions client over urllib with exponential backoff."""

    def __init__(self, config: LlmClientConfig):
        if not config.base_url or not config.model_name:
            raise ConfigError("api backend needs base_url and model_name")
        self.config = config
        self.max_parallel = config.max_parallel

    def complete(self, request: AgentRequest) -> str:
        body = json.dumps(
            {
                "model": self.config.model_name,
                "temperature": self.config.temperature,
                "messages": [{"role": "user", "content": request.prompt}],
            }
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                req = urllib.request.Request(url, data=body, headers=headers)
                with urllib.request.urlopen(req, timeout=self.config.timeout_s) as resp:
                    payload = json.loads(resp.read().decode("utf-8"))
                return payload["choices"][0]["message"]["content"]
            except (urllib.error.URLError, TimeoutError, OSError, KeyError, ValueError) as exc:
                last_error = exc
                if attempt < self.config.max_retries:
                    delay = 0.5 * (2**attempt)
                    logger.warning(
                        "LLM request failed (%s); retrying in %.1fs", exc, delay
                    )
                    time.sleep(delay)
        raise LlmTransportError(f"LLM endpoint unreachable after retries: {last_error}")
