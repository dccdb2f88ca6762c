"""Language-model backends and token accounting.

Three backend flavors share one interface: scripted (canned completions
keyed on the question), replay (a recorded transcript played in order),
and http (a generic chat-completion endpoint). The scripted and replay
backends are bit-deterministic, which is what makes every agent behavior
testable without a live model.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Union

from .core import MofsmithError

DEFAULT_TOKEN_LIMIT = 4000
DEFAULT_TEMPERATURE = 0.1


class BackendUnavailable(MofsmithError):
    pass


class NoScriptedResponse(MofsmithError):
    def __init__(self, prompt_digest: str):
        super().__init__(f"no scripted response for prompt digest {prompt_digest}")
        self.prompt_digest = prompt_digest


class TokenBudgetExceeded(MofsmithError):
    def __init__(self, estimated: int, budget: int):
        super().__init__(f"estimated {estimated} tokens exceeds budget {budget}")
        self.estimated = estimated
        self.budget = budget


def estimate_tokens(text: str) -> int:
    """Approximate token count: ceil(utf-8 bytes / 4).

    Real tokenizers differ; this heuristic is documented as approximate and
    is monotone non-decreasing under concatenation.
    """
    if not text:
        return 0
    return math.ceil(len(text.encode("utf-8")) / 4)


Estimator = Callable[[str], int]


@dataclass
class TokenBudget:
    """Cumulative token allowance for one session.

    ``charge`` raises before the usage would cross the limit, so ``used``
    never exceeds ``limit`` at any observation point. ``per_call`` mode
    resets the meter at each completion boundary instead of accumulating
    across the session.
    """

    limit: int = DEFAULT_TOKEN_LIMIT
    used: int = 0
    per_call: bool = False
    estimator: Estimator = field(default=estimate_tokens)

    def charge(self, text: str) -> int:
        """Add the text's estimated tokens; raise if the limit would be crossed."""
        cost = self.estimator(text)
        if self.used + cost > self.limit:
            raise TokenBudgetExceeded(self.used + cost, self.limit)
        self.used += cost
        return cost

    def reset_call(self) -> None:
        if self.per_call:
            self.used = 0

    @property
    def remaining(self) -> int:
        return self.limit - self.used


@dataclass
class CompletionRequest:
    system_prompt: str
    user_prompt: str
    stop_sequences: list[str] = field(default_factory=list)
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = 1024

    def __post_init__(self):
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be within [0, 2]")
        if len(self.stop_sequences) > 4:
            raise ValueError("at most 4 stop sequences")


class Backend(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


def _truncate_at_stops(text: str, stops: list[str]) -> str:
    cut = len(text)
    for stop in stops:
        pos = text.find(stop)
        if pos != -1:
            cut = min(cut, pos)
    return text[:cut]


_QUESTION_LINE = re.compile(r"^Question:\s*(.*)$", re.MULTILINE)


def extract_question(user_prompt: str) -> str:
    """The last `Question:` line of a prompt; the whole prompt if none."""
    matches = _QUESTION_LINE.findall(user_prompt)
    return matches[-1].strip() if matches else user_prompt.strip()


def prompt_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class ScriptedBackend:
    """Canned completions keyed on the most recent question, with a cursor
    per key so multi-step sessions replay in order."""

    def __init__(self, script: dict[str, list[str]]):
        self._script = {k: list(v) for k, v in script.items()}
        self._cursors: dict[str, int] = {k: 0 for k in self._script}

    def complete(self, request: CompletionRequest) -> str:
        key = extract_question(request.user_prompt)
        responses = self._script.get(key)
        if responses is None:
            responses = self._script.get("*")
            key = "*" if responses is not None else key
        if responses is None:
            raise NoScriptedResponse(prompt_digest(request.user_prompt))
        cursor = self._cursors.get(key, 0)
        if cursor >= len(responses):
            raise NoScriptedResponse(prompt_digest(request.user_prompt))
        self._cursors[key] = cursor + 1
        return _truncate_at_stops(responses[cursor], request.stop_sequences)


class ReplayBackend:
    """Plays back a recorded transcript: JSON lines of {role, content},
    alternating prompt/completion. Each ``complete`` call returns the next
    assistant message."""

    def __init__(self, transcript: Union[str, Path, list[dict]]):
        if isinstance(transcript, (str, Path)):
            lines = Path(transcript).read_text(encoding="utf-8").splitlines()
            records = [json.loads(line) for line in lines if line.strip()]
        else:
            records = list(transcript)
        self._completions = [r["content"] for r in records if r.get("role") == "assistant"]
        self._cursor = 0

    def complete(self, request: CompletionRequest) -> str:
        if self._cursor >= len(self._completions):
            raise BackendUnavailable("replay transcript exhausted")
        text = self._completions[self._cursor]
        self._cursor += 1
        return _truncate_at_stops(text, request.stop_sequences)

    def rewind(self) -> None:
        self._cursor = 0


class HttpBackend:
    """Generic chat-completion HTTP client.

    Sends ``{model, messages, temperature, max_tokens, stop}`` as JSON and
    reads ``choices[0].message.content`` back. Endpoint, model, and key
    come from MOFSMITH_LLM_URL / MOFSMITH_LLM_MODEL / MOFSMITH_LLM_KEY
    unless given explicitly.
    """

    def __init__(self, url: str, model: str = "default", api_key: str = "",
                 timeout: float = 60.0):
        self.url = url
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    @classmethod
    def from_env(cls, environ) -> "HttpBackend":
        url = environ.get("MOFSMITH_LLM_URL")
        if not url:
            raise BackendUnavailable("MOFSMITH_LLM_URL is not set")
        return cls(url,
                   model=environ.get("MOFSMITH_LLM_MODEL", "default"),
                   api_key=environ.get("MOFSMITH_LLM_KEY", ""))

    def complete(self, request: CompletionRequest) -> str:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.stop_sequences:
            payload["stop"] = request.stop_sequences
        req = urllib.request.Request(
            self.url,
            data=json.dumps(payload).encode("utf-8"),
            headers={
                "Content-Type": "application/json",
                **({"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}),
            },
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise BackendUnavailable(f"chat completion request failed: {exc}") from exc
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed completion response: {body!r}") from exc
        return _truncate_at_stops(text, request.stop_sequences)
