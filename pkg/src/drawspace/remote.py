"""HTTP policy client speaking a small chat protocol.

Request body: {"messages": [{"role": ..., "content": [part, ...]}]} where a
part is {"type": "text", "text": ...} or {"type": "image", "index": k,
"png_base64": ...}. Response body: {"text": "..."}.

One client instance is safe to share across concurrently running episodes:
requests go through a shared session and a semaphore bounds how many are in
flight at once. Transient failures (connection errors, timeouts, HTTP 5xx,
429) are retried with exponential backoff up to a fixed attempt budget;
anything else, or an exhausted budget, surfaces as PolicyError.
"""

from __future__ import annotations

import base64
import threading
import time
from dataclasses import dataclass

import requests

from .canvas import encode_png
from .episode import ImagePart, Message, PolicyError, TextPart


@dataclass(frozen=True)
class RemoteConfig:
    url: str
    timeout: float = 60.0
    max_attempts: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0
    max_inflight: int = 8


def encode_message(msg: Message) -> dict:
    content = []
    for part in msg.parts:
        if isinstance(part, TextPart):
            content.append({"type": "text", "text": part.text})
        elif isinstance(part, ImagePart):
            content.append({
                "type": "image",
                "index": part.index,
                "png_base64": base64.b64encode(encode_png(part.image)).decode("ascii"),
            })
        else:
            raise TypeError(f"unknown message part {type(part).__name__}")
    return {"role": msg.role, "content": content}


class RemotePolicy:
    """PolicyPort over HTTP. Stochastic unless the endpoint itself is seeded."""

    def __init__(self, config: RemoteConfig):
        self.config = config
        self._session = requests.Session()
        self._gate = threading.BoundedSemaphore(config.max_inflight)

    def next(self, conversation: list[Message]) -> str:
        payload = {"messages": [encode_message(m) for m in conversation]}
        cfg = self.config
        last_failure = "no attempt made"
        for attempt in range(cfg.max_attempts):
            if attempt:
                time.sleep(min(cfg.backoff_cap, cfg.backoff_base * 2 ** (attempt - 1)))
            with self._gate:
                try:
                    resp = self._session.post(cfg.url, json=payload, timeout=cfg.timeout)
                except requests.RequestException as exc:
                    last_failure = f"transport failure: {exc}"
                    continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last_failure = f"HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise PolicyError(f"endpoint rejected the request: HTTP {resp.status_code}")
            try:
                body = resp.json()
            except ValueError as exc:
                raise PolicyError(f"endpoint returned non-JSON body: {exc}") from None
            text = body.get("text") if isinstance(body, dict) else None
            if not isinstance(text, str):
                raise PolicyError(f"endpoint body missing string 'text': {body!r}")
            return text
        raise PolicyError(
            f"gave up after {cfg.max_attempts} attempts; last failure: {last_failure}"
        )
