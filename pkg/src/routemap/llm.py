"""Chat-completion backend for turn-point extraction and the prompt-only
baseline.

Requests go to an OpenAI-compatible ``/chat/completions`` endpoint.  The
extractor calls force a function call so the answer arrives as JSON
arguments.  Every exchange can be captured to a transcript file and
replayed later without network access.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping
from urllib.parse import urlparse

import httpx

from .actions import Action
from .instructions import BackendError

DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-4"


class LlmError(BackendError):
    def __init__(self, message: str, raw: Any = None):
        super().__init__(message)
        self.raw = raw


class LlmTransportError(LlmError):
    pass


class LlmTimeoutError(LlmError):
    pass


class LlmStatusError(LlmError):
    def __init__(self, status: int, raw: Any):
        super().__init__(f"endpoint answered HTTP {status}", raw)
        self.status = status


class LlmSchemaError(LlmError):
    pass


class LlmConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LlmConfig:
    base_url: str = DEFAULT_BASE_URL
    model: str = DEFAULT_MODEL
    api_key: str = field(default="", repr=False)
    timeout: float = 60.0
    temperature: float = 0.0
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        parsed = urlparse(self.base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise LlmConfigError(f"malformed base URL {self.base_url!r}")
        if not self.timeout > 0:
            raise LlmConfigError("timeout must be positive")
        if self.temperature < 0:
            raise LlmConfigError("temperature must be >= 0")
        if self.max_in_flight < 1:
            raise LlmConfigError("max_in_flight must be >= 1")

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None) -> LlmConfig:
        """Read ``ROUTEMAP_LLM_*`` variables, falling back to ``OPENAI_*``."""
        env = os.environ if env is None else env

        def get(name: str, fallback: str | None = None) -> str | None:
            return env.get(f"ROUTEMAP_LLM_{name}") or (env.get(fallback) if fallback else None)

        kwargs: dict[str, Any] = {}
        if (v := get("BASE_URL", "OPENAI_BASE_URL")) is not None:
            kwargs["base_url"] = v
        if (v := get("MODEL", "OPENAI_MODEL")) is not None:
            kwargs["model"] = v
        if (v := get("API_KEY", "OPENAI_API_KEY")) is not None:
            kwargs["api_key"] = v
        for name, conv in (("TIMEOUT", float), ("TEMPERATURE", float), ("MAX_IN_FLIGHT", int)):
            if (v := get(name)) is not None:
                try:
                    kwargs[name.lower()] = conv(v)
                except ValueError:
                    raise LlmConfigError(f"ROUTEMAP_LLM_{name}={v!r} is not a number") from None
        return cls(**kwargs)


@dataclass(frozen=True)
class PromptSet:
    turn_points_extractor: str = (
        "Extract waypoints in the description of the navigation path. "
        "Then, extract the points which turn {direction}."
    )
    turn_points_checker: str = (
        "For the following path, answer the action at specified point is turn right or left."
    )
    implicit_reverse: str = "Show the reverse path, reversing the start and goal of the following path."
    implicit_combined: str = (
        "Understand the spatial structure of path1-9 below and create the shortest path from "
        "the specified start to goal. However, be sure to indicate the action to be taken at "
        "each passing point."
    )

    @classmethod
    def from_file(cls, path: str | Path) -> PromptSet:
        """Override any subset of the default prompts from a JSON object."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise LlmConfigError(f"unknown prompt keys: {sorted(unknown)}")
        return replace(cls(), **data)


# -- transcripts -------------------------------------------------------------


def _request_record(request: httpx.Request) -> dict[str, Any]:
    body = request.content.decode("utf-8") if request.content else ""
    try:
        parsed: Any = json.loads(body) if body else None
    except ValueError:
        parsed = body
    return {"method": request.method, "path": request.url.path, "body": parsed}


class TranscriptRecorder(httpx.BaseTransport):
    """Transport wrapper that logs every request/response pair."""

    def __init__(self, inner: httpx.BaseTransport | None = None):
        self.inner = inner or httpx.HTTPTransport()
        self.entries: list[dict[str, Any]] = []
        self._lock = threading.Lock()

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        entry: dict[str, Any] = {"request": _request_record(request)}
        try:
            response = self.inner.handle_request(request)
        except httpx.TimeoutException:
            entry["error"] = "timeout"
            with self._lock:
                self.entries.append(entry)
            raise
        response.read()
        try:
            body: Any = response.json()
        except ValueError:
            body = response.text
        entry["response"] = {"status": response.status_code, "body": body}
        with self._lock:
            self.entries.append(entry)
        return httpx.Response(response.status_code, headers=response.headers, content=response.content)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.entries, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


class ReplayTransport(httpx.BaseTransport):
    """Serves responses from a transcript; never touches the network.

    A request is answered by the first unused entry with the same method,
    path and JSON body.  Once all matching entries are used the last one
    is served again.
    """

    def __init__(self, entries: Iterable[dict[str, Any]]):
        self.entries = list(entries)
        self._used: set[int] = set()
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> ReplayTransport:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list):
            raise LlmConfigError(f"transcript {path} is not a JSON array")
        return cls(data)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        wanted = _request_record(request)
        with self._lock:
            matches = [i for i, e in enumerate(self.entries) if e.get("request") == wanted]
            if not matches:
                raise httpx.ConnectError("no recorded response for this request", request=request)
            fresh = [i for i in matches if i not in self._used]
            index = fresh[0] if fresh else matches[-1]
            self._used.add(index)
        entry = self.entries[index]
        if entry.get("error") == "timeout":
            raise httpx.ReadTimeout("recorded timeout", request=request)
        response = entry["response"]
        body = response["body"]
        if isinstance(body, str):
            return httpx.Response(response["status"], text=body)
        return httpx.Response(response["status"], json=body)


# -- client --------------------------------------------------------------------

_TURN_POINTS_TOOL = {
    "type": "function",
    "function": {
        "name": "report_turn_points",
        "description": "Report the waypoints of the path in order and the waypoints where the turn happens.",
        "parameters": {
            "type": "object",
            "properties": {
                "waypoints": {"type": "array", "items": {"type": "string"}},
                "turn_points": {"type": "array", "items": {"type": "string"}},
            },
            "required": ["waypoints", "turn_points"],
        },
    },
}

_TURN_CHECK_TOOL = {
    "type": "function",
    "function": {
        "name": "report_turn_direction",
        "description": "Report whether the action at the point is a left or a right turn.",
        "parameters": {
            "type": "object",
            "properties": {"direction": {"type": "string", "enum": ["left", "right"]}},
            "required": ["direction"],
        },
    },
}


def _string_list(value: Any, name: str, raw: Any) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise LlmSchemaError(f"{name!r} must be a list of strings", raw)
    return value


class LlmClient:
    """Chat-completion client.  Implements the extractor backend interface
    (``extract_left``, ``extract_right``, ``check_turn``).

    Calls never retry; the extraction loop owns the retry budget.
    """

    def __init__(
        self,
        config: LlmConfig,
        prompts: PromptSet | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.config = config
        self.prompts = prompts or PromptSet()
        headers = {"Authorization": f"Bearer {config.api_key}"} if config.api_key else {}
        self._http = httpx.Client(
            base_url=config.base_url, timeout=config.timeout, transport=transport, headers=headers
        )
        self._slots = threading.BoundedSemaphore(config.max_in_flight)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> LlmClient:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def _complete(self, messages: list[dict[str, str]], tool: dict | None = None) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": messages,
        }
        if tool is not None:
            payload["tools"] = [tool]
            payload["tool_choice"] = {"type": "function", "function": {"name": tool["function"]["name"]}}
        with self._slots:
            try:
                response = self._http.post("/chat/completions", json=payload)
            except httpx.TimeoutException as exc:
                raise LlmTimeoutError(f"request timed out: {exc}", payload) from exc
            except httpx.TransportError as exc:
                raise LlmTransportError(f"transport failure: {exc}", payload) from exc
        if not response.is_success:
            raise LlmStatusError(response.status_code, response.text)
        try:
            return response.json()
        except ValueError:
            raise LlmSchemaError("response body is not JSON", response.text) from None

    def _tool_arguments(self, data: dict[str, Any], name: str) -> dict[str, Any]:
        try:
            message = data["choices"][0]["message"]
            calls = message.get("tool_calls") or []
            if calls:
                function = calls[0]["function"]
            else:
                function = message["function_call"]
            if function.get("name") != name:
                raise LlmSchemaError(f"expected a call to {name!r}, got {function.get('name')!r}", data)
            args = json.loads(function["arguments"])
        except (KeyError, IndexError, TypeError, ValueError):
            raise LlmSchemaError("response carries no parseable function call", data) from None
        if not isinstance(args, dict):
            raise LlmSchemaError("function arguments are not an object", data)
        return args

    def extract(self, direction: str, instruction: str) -> tuple[list[str], set[str]]:
        """Waypoints and the points turning ``direction`` ("left"/"right")."""
        if direction not in ("left", "right"):
            raise ValueError(f"direction must be 'left' or 'right', got {direction!r}")
        prompt = self.prompts.turn_points_extractor.format(direction=direction)
        data = self._complete(
            [{"role": "system", "content": prompt}, {"role": "user", "content": instruction}],
            _TURN_POINTS_TOOL,
        )
        args = self._tool_arguments(data, "report_turn_points")
        if "waypoints" not in args or "turn_points" not in args:
            raise LlmSchemaError("answer lacks 'waypoints' or 'turn_points'", data)
        waypoints = _string_list(args["waypoints"], "waypoints", data)
        turns = _string_list(args["turn_points"], "turn_points", data)
        return waypoints, set(turns)

    def extract_left(self, instruction: str) -> tuple[list[str], set[str]]:
        return self.extract("left", instruction)

    def extract_right(self, instruction: str) -> tuple[list[str], set[str]]:
        return self.extract("right", instruction)

    def check_turn(self, instruction: str, waypoint: str) -> Action:
        data = self._complete(
            [
                {"role": "system", "content": self.prompts.turn_points_checker},
                {"role": "user", "content": f"Path: {instruction}\nPoint: {waypoint}"},
            ],
            _TURN_CHECK_TOOL,
        )
        args = self._tool_arguments(data, "report_turn_direction")
        answer = args.get("direction")
        if not isinstance(answer, str) or answer.strip().lower() not in ("left", "right"):
            raise LlmSchemaError(f"turn direction must be 'left' or 'right', got {answer!r}", data)
        return Action.LEFT if answer.strip().lower() == "left" else Action.RIGHT

    def implicit_query(
        self,
        mode: str,
        instructions: list[str],
        start: str | None = None,
        goal: str | None = None,
    ) -> str:
        """Ask the model directly for a reverse or a recombined path."""
        if not instructions:
            raise ValueError("at least one instruction is required")
        if mode == "reverse":
            if len(instructions) != 1:
                raise ValueError("reverse mode takes exactly one instruction")
            content = f"{self.prompts.implicit_reverse}\n\n{instructions[0]}"
        elif mode == "combined":
            if start is None or goal is None:
                raise ValueError("combined mode needs a start and a goal")
            listed = "\n".join(f"path{i}: {text}" for i, text in enumerate(instructions, 1))
            content = f"{self.prompts.implicit_combined}\n\n{listed}\n\nStart: {start}\nGoal: {goal}"
        else:
            raise ValueError(f"mode must be 'reverse' or 'combined', got {mode!r}")
        data = self._complete([{"role": "user", "content": content}])
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise LlmSchemaError("response carries no message content", data) from None
        if not isinstance(text, str):
            raise LlmSchemaError("message content is not text", data)
        return text
