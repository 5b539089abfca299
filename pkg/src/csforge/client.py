"""Chat-completion HTTP client with bounded retries.

Wire format: POST {model, messages:[{role, content}], temperature,
max_tokens, n}; the response carries a list of completions, each with a
message content. Authorization uses a bearer token read from the
CSFORGE_API_KEY environment variable.
"""

from __future__ import annotations

import os
import time
from typing import List, Optional

import requests

from .errors import EndpointUnavailable, MalformedCompletion

API_KEY_ENV = "CSFORGE_API_KEY"


class EndpointClient:
    def __init__(
        self,
        base_url: str,
        model: str = "default",
        timeout: float = 30.0,
        max_retries: int = 3,
        api_key: Optional[str] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.timeout = timeout
        self.max_retries = max_retries
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def generate(self, prompt: str, params: dict) -> List[str]:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.get("temperature", 0.7),
            "max_tokens": params.get("max_tokens", 16),
            "n": params.get("n_samples", 1),
        }
        last_exc: Optional[Exception] = None
        for attempt in range(self.max_retries):
            try:
                resp = requests.post(
                    f"{self.base_url}/chat/completions",
                    json=payload,
                    headers=self._headers(),
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                data = resp.json()
                completions = [c["message"]["content"] for c in data.get("choices", [])]
                if len(completions) != payload["n"]:
                    raise MalformedCompletion(
                        f"expected {payload['n']} completions, got {len(completions)}"
                    )
                return completions
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_exc = exc
                time.sleep(min(2**attempt * 0.5, 4.0))
        raise EndpointUnavailable(f"endpoint failed after {self.max_retries} attempts: {last_exc}")
