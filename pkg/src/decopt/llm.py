"""Pluggable reply providers: an HTTP chat endpoint and an offline mock.

The HTTP provider posts a minimal chat-completion body (messages,
model, temperature 0) and retries transport failures with exponential
backoff.  The auth token is read from an environment variable named in
the config and never appears in logs or exceptions.

The mock provider replays scripted replies from a scenario file
mapping target id to a list of reply texts; successive calls for one
target consume the list and the last entry repeats.  A "*" key serves
any target without its own entry.  Mock latency is reported as zero so
pipeline reports are byte-stable.
"""

from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field

from .errors import AuthError, BudgetExceeded, ProviderUnavailable

DEFAULT_TIMEOUT = 60.0
DEFAULT_RETRIES = 3
DEFAULT_CONTEXT_LIMIT = 128000


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = ""
    model: str = "mock"
    token_env: str = "DECOPT_API_TOKEN"
    timeout: float = DEFAULT_TIMEOUT
    retries: int = DEFAULT_RETRIES
    context_limit: int = DEFAULT_CONTEXT_LIMIT

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")


@dataclass(frozen=True)
class RawResponse:
    text: str
    model: str = ""
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency: float = 0.0

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")


class MockProvider:
    """Scenario-scripted provider; fully offline and deterministic."""

    def __init__(self, scenario: dict[str, list[str]] | None = None):
        self.scenario = dict(scenario or {})
        self._served: dict[str, int] = {}

    @classmethod
    def from_file(cls, path: str) -> "MockProvider":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        scenario = {k: (v if isinstance(v, list) else [v]) for k, v in raw.items()}
        return cls(scenario)

    def submit(self, prompt_text: str, target_id: str) -> RawResponse:
        replies = self.scenario.get(target_id)
        if replies is None:
            replies = self.scenario.get("*", [""])
        served = self._served.get(target_id, 0)
        self._served[target_id] = served + 1
        text = replies[min(served, len(replies) - 1)]
        return RawResponse(text=text, model="mock",
                           prompt_tokens=(len(prompt_text) + 3) // 4,
                           completion_tokens=(len(text) + 3) // 4,
                           latency=0.0)


class HttpProvider:
    """Minimal chat-completion client over urllib, no third-party deps."""

    def __init__(self, config: ProviderConfig, sleep=time.sleep):
        if not config.endpoint:
            raise ValueError("http provider needs an endpoint")
        self.config = config
        self._sleep = sleep

    def _token(self) -> str:
        token = os.environ.get(self.config.token_env, "")
        if not token:
            raise AuthError(
                f"auth token not set (environment variable {self.config.token_env})")
        return token

    def submit(self, prompt_text: str, target_id: str) -> RawResponse:
        if (len(prompt_text) + 3) // 4 > self.config.context_limit:
            raise BudgetExceeded(
                f"prompt exceeds provider context limit "
                f"({self.config.context_limit} tokens)")
        body = json.dumps({
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt_text}],
        }).encode()
        token = self._token()
        last_error = "unknown transport failure"
        for attempt in range(self.config.retries + 1):
            if attempt:
                self._sleep(min(2.0 ** attempt, 30.0))
            req = urllib.request.Request(
                self.config.endpoint, data=body, method="POST",
                headers={"Content-Type": "application/json",
                         "Authorization": f"Bearer {token}"})
            start = time.monotonic()
            try:
                with urllib.request.urlopen(req, timeout=self.config.timeout) as resp:
                    payload = json.loads(resp.read().decode())
            except urllib.error.HTTPError as err:
                if err.code in (401, 403):
                    raise AuthError(f"provider rejected credentials "
                                    f"(HTTP {err.code})") from None
                last_error = f"HTTP {err.code}"
                continue
            except (urllib.error.URLError, TimeoutError, OSError) as err:
                last_error = type(err).__name__
                continue
            return self._decode(payload, time.monotonic() - start)
        raise ProviderUnavailable(
            f"provider unreachable after {self.config.retries + 1} attempts: "
            f"{last_error}")

    def _decode(self, payload: dict, latency: float) -> RawResponse:
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            text = ""
        usage = payload.get("usage") or {}
        return RawResponse(
            text=text,
            model=payload.get("model", self.config.model),
            prompt_tokens=max(0, int(usage.get("prompt_tokens", 0) or 0)),
            completion_tokens=max(0, int(usage.get("completion_tokens", 0) or 0)),
            latency=latency,
        )


Provider = MockProvider | HttpProvider


def submit(bundle, provider: Provider) -> RawResponse:
    """Send a prompt bundle to a provider and capture the reply verbatim."""
    return provider.submit(bundle.text(), bundle.target.target_id)
