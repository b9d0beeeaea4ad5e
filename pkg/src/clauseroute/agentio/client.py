"""Minimal chat-completion client for a black-box router agent."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import httpx

from .prompt import AgentRequest

log = logging.getLogger(__name__)

DEFAULT_KEY_ENV = "CLAUSEROUTE_API_KEY"
RETRYABLE_STATUS = frozenset({408, 409, 429, 500, 502, 503, 504})


class AgentError(RuntimeError):
    pass


class AgentConfigError(AgentError):
    pass


class AgentTransportError(AgentError):
    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempt{'s' if attempts != 1 else ''})")


class AgentStatusError(AgentError):
    def __init__(self, status: int, body: str, attempts: int = 1):
        self.status = status
        self.body = body[:500]
        self.attempts = attempts
        super().__init__(f"agent returned HTTP {status}: {self.body}")


@dataclass(frozen=True)
class AgentConfig:
    base_url: str
    model: str
    api_key_env: str = DEFAULT_KEY_ENV
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 1.0
    backoff_max: float = 30.0
    # decoding settings (temperature, top_p, ...) are passed through unchanged
    params: dict[str, Any] = field(default_factory=dict)

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise AgentConfigError(f"environment variable {self.api_key_env} is not set")
        return key


def _backoff(config: AgentConfig, attempt: int) -> float:
    return min(config.backoff_max, config.backoff_base * 2 ** (attempt - 1))


def query_agent(
    req: AgentRequest,
    config: AgentConfig,
    *,
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Send the rendered prompt and return the reply text verbatim.

    Transport failures and 408/409/429/5xx responses are retried up to
    ``config.max_retries`` times with exponential backoff.
    """
    headers = {"Authorization": f"Bearer {config.api_key()}"}
    payload = {
        "model": config.model,
        "messages": [{"role": "user", "content": req.rendered_prompt}],
        **config.params,
    }
    url = config.base_url.rstrip("/") + "/chat/completions"
    owns_client = client is None
    client = client or httpx.Client(timeout=config.timeout)
    attempts = 0
    try:
        while True:
            attempts += 1
            try:
                resp = client.post(url, json=payload, headers=headers, timeout=config.timeout)
            except httpx.TransportError as exc:
                if attempts > config.max_retries:
                    raise AgentTransportError(f"{type(exc).__name__}: {exc}", attempts) from exc
                log.warning("agent transport error on attempt %d: %s; retrying", attempts, exc)
                sleep(_backoff(config, attempts))
                continue
            if resp.status_code in RETRYABLE_STATUS and attempts <= config.max_retries:
                log.warning("agent returned HTTP %d on attempt %d; retrying", resp.status_code, attempts)
                sleep(_backoff(config, attempts))
                continue
            if resp.status_code >= 300:
                raise AgentStatusError(resp.status_code, resp.text, attempts)
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise AgentStatusError(resp.status_code, f"unexpected response body: {resp.text}", attempts) from exc
    finally:
        if owns_client:
            client.close()
