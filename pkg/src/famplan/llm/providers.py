"""Chat-completion providers: a generic HTTPS client and a deterministic stub.

The provider contract is deliberately small: messages in, text out, optional
image parts. Everything template- or validation-shaped lives in the gateway.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import httpx

from ..errors import ProviderUnreachable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Attachment:
    media_type: str
    data: bytes

    @property
    def size(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    text: str
    attachments: tuple[Attachment, ...] = ()


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str
    model_name: str
    api_key: str = ""
    timeout: float = 30.0
    max_retries: int = 2
    temperature: float = 0.0
    rate_limit_per_minute: int = 60
    supports_vision: bool = True

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def __repr__(self) -> str:  # keep the key out of logs and tracebacks
        return (
            f"ProviderConfig(endpoint={self.endpoint!r}, model={self.model_name!r}, "
            f"api_key='***', timeout={self.timeout}, max_retries={self.max_retries})"
        )


ENV_ENDPOINT = "FAMPLAN_PROVIDER_ENDPOINT"
ENV_MODEL = "FAMPLAN_MODEL_NAME"
ENV_API_KEY = "FAMPLAN_API_KEY"
ENV_RATE_LIMIT = "FAMPLAN_RATE_LIMIT"


def config_from_env(env: dict[str, str]) -> ProviderConfig:
    try:
        endpoint = env[ENV_ENDPOINT]
        model = env[ENV_MODEL]
    except KeyError as exc:
        raise ProviderUnreachable(f"missing provider env var: {exc}") from exc
    return ProviderConfig(
        endpoint=endpoint,
        model_name=model,
        api_key=env.get(ENV_API_KEY, ""),
        rate_limit_per_minute=int(env.get(ENV_RATE_LIMIT, "60")),
    )


class ChatProvider(Protocol):
    name: str
    supports_vision: bool

    def complete(
        self,
        messages: Sequence[ChatMessage],
        *,
        temperature: float = 0.0,
        template_id: str | None = None,
    ) -> str: ...


class TokenBucket:
    """Requests-per-minute limiter; ``clock``/``sleeper`` injectable for tests."""

    def __init__(
        self,
        per_minute: int,
        clock: Callable[[], float] = time.monotonic,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.capacity = max(1, per_minute)
        self.tokens = float(self.capacity)
        self.rate = self.capacity / 60.0
        self.clock = clock
        self.sleeper = sleeper
        self.updated = clock()

    def acquire(self) -> None:
        while True:
            now = self.clock()
            self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
            self.updated = now
            if self.tokens >= 1.0:
                self.tokens -= 1.0
                return
            self.sleeper((1.0 - self.tokens) / self.rate)


def _message_to_wire(message: ChatMessage) -> dict:
    if not message.attachments:
        return {"role": message.role, "content": message.text}
    parts: list[dict] = [{"type": "text", "text": message.text}]
    for attachment in message.attachments:
        b64 = base64.b64encode(attachment.data).decode("ascii")
        parts.append(
            {
                "type": "image_url",
                "image_url": {"url": f"data:{attachment.media_type};base64,{b64}"},
            }
        )
    return {"role": message.role, "content": parts}


class HttpChatProvider:
    """Client for any OpenAI-style chat-completion endpoint.

    Retries up to ``max_retries`` times on 429/5xx/transport errors with
    exponential backoff; each retry is logged with its reason. The API key
    never appears in logs.
    """

    def __init__(
        self,
        config: ProviderConfig,
        *,
        transport: httpx.BaseTransport | None = None,
        sleeper: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.name = config.model_name
        self.config = config
        self.supports_vision = config.supports_vision
        self.bucket = TokenBucket(config.rate_limit_per_minute, clock, sleeper)
        self._sleeper = sleeper
        headers = {}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"
        self._client = httpx.Client(
            base_url=config.endpoint,
            headers=headers,
            timeout=config.timeout,
            transport=transport,
        )

    def complete(
        self,
        messages: Sequence[ChatMessage],
        *,
        temperature: float = 0.0,
        template_id: str | None = None,
    ) -> str:
        body = {
            "model": self.config.model_name,
            "messages": [_message_to_wire(m) for m in messages],
            "temperature": temperature,
        }
        attempts = self.config.max_retries + 1
        last_reason = "no attempt made"
        for attempt in range(attempts):
            self.bucket.acquire()
            try:
                response = self._client.post("/chat/completions", json=body)
            except httpx.HTTPError as exc:
                last_reason = f"transport error: {exc}"
            else:
                if response.status_code == 429 or response.status_code >= 500:
                    last_reason = f"HTTP {response.status_code}"
                elif response.status_code >= 400:
                    raise ProviderUnreachable(
                        f"provider rejected request: HTTP {response.status_code} "
                        f"{response.text[:200]}"
                    )
                else:
                    try:
                        return response.json()["choices"][0]["message"]["content"]
                    except (KeyError, IndexError, json.JSONDecodeError) as exc:
                        raise ProviderUnreachable(
                            f"malformed provider response: {exc}"
                        ) from exc
            if attempt < attempts - 1:
                delay = 2.0 ** attempt
                logger.warning(
                    "retrying provider call (%d/%d) after %s; sleeping %.1fs",
                    attempt + 1, self.config.max_retries, last_reason, delay,
                )
                self._sleeper(delay)
        raise ProviderUnreachable(f"provider unreachable after retries: {last_reason}")

    def close(self) -> None:
        self._client.close()


def stub_key(template_id: str | None, rendered_prompt: str) -> str:
    digest = hashlib.sha256(rendered_prompt.encode("utf-8")).hexdigest()[:16]
    return f"{template_id or 'raw'}:{digest}"


class StubChatProvider:
    """Canned-response provider keyed by (template_id, prompt hash).

    The store ships as a JSON fixture mapping keys from ``stub_key`` to reply
    text. Unknown keys go to ``fallback`` when configured, else raise. Every
    call is counted, which lets tests assert offline paths stay offline.
    """

    name = "stub"

    def __init__(
        self,
        responses: dict[str, str] | str | Path | None = None,
        *,
        fallback: Callable[[Sequence[ChatMessage], str | None], str] | None = None,
        supports_vision: bool = True,
    ):
        if isinstance(responses, (str, Path)):
            responses = json.loads(Path(responses).read_text(encoding="utf-8"))
        self.responses: dict[str, str] = dict(responses or {})
        self.fallback = fallback
        self.supports_vision = supports_vision
        self.call_count = 0
        self.calls: list[tuple[str | None, str]] = []

    def complete(
        self,
        messages: Sequence[ChatMessage],
        *,
        temperature: float = 0.0,
        template_id: str | None = None,
    ) -> str:
        self.call_count += 1
        prompt = messages[-1].text if messages else ""
        key = stub_key(template_id, prompt)
        self.calls.append((template_id, key))
        if key in self.responses:
            return self.responses[key]
        if self.fallback is not None:
            return self.fallback(messages, template_id)
        raise ProviderUnreachable(f"stub has no canned response for {key}")


class ScriptedProvider:
    """Replies from a fixed queue; raises queued exceptions. Test helper."""

    name = "scripted"

    def __init__(self, replies: Sequence[str | Exception], supports_vision: bool = True):
        self.replies = list(replies)
        self.supports_vision = supports_vision
        self.call_count = 0
        self.received: list[list[ChatMessage]] = []

    def complete(
        self,
        messages: Sequence[ChatMessage],
        *,
        temperature: float = 0.0,
        template_id: str | None = None,
    ) -> str:
        self.call_count += 1
        self.received.append(list(messages))
        if not self.replies:
            raise ProviderUnreachable("scripted provider exhausted")
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply
