"""Abstract STT/LLM/TTS providers, deterministic mocks, and a generic live client.

Vendor SDKs are not dependencies: the live LLM client speaks the common
streamed-completion HTTP contract (OpenAI-style chat completions over
server-sent events) and is configured entirely through environment
variables.  Mocks are deterministic given their configuration, so the whole
pipeline can run and be tested without network or audio.
"""

from __future__ import annotations

import abc
import json
import os
import urllib.request
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

from .markup import Bookmark, LiteralPassthrough
from .parser import parse_document
from .timing import TimelineWalk, TimingParams

ENV_LLM_ENDPOINT = "EXPRESSML_LLM_ENDPOINT"
ENV_LLM_MODEL = "EXPRESSML_LLM_MODEL"
ENV_LLM_API_KEY = "EXPRESSML_LLM_API_KEY"


class LlmProvider(abc.ABC):
    """Streaming completion: prompt text in, ordered chunk stream out."""

    @abc.abstractmethod
    def stream(self, prompt: str) -> Iterator[str | bytes]: ...


class TtsProvider(abc.ABC):
    """Synthesis: SSML in, opaque audio plus fired bookmark events out."""

    @abc.abstractmethod
    def synthesize(self, ssml: str) -> "TtsResult": ...


class SttProvider(abc.ABC):
    """Transcription: audio bytes in, text out."""

    @abc.abstractmethod
    def transcribe(self, audio: bytes) -> str: ...


@dataclass(frozen=True)
class TtsResult:
    audio: bytes
    fired_bookmarks: tuple[tuple[str, float], ...]  # (mark, offset_ms)
    total_ms: float


@dataclass(frozen=True)
class ProviderSuite:
    llm: LlmProvider
    tts: TtsProvider | None = None
    stt: SttProvider | None = None


class MockLlm(LlmProvider):
    """Replays a canned response as fixed-size byte chunks.

    Chunking by bytes deliberately splits tags and multi-byte characters,
    which is exactly what a live token stream does.  ``served_chunks`` counts
    how many chunks have been pulled, which latency tests observe.
    """

    def __init__(self, response: str | bytes, chunk_bytes: int = 64):
        if chunk_bytes < 1:
            raise ValueError("chunk_bytes must be >= 1")
        self._data = response.encode("utf-8") if isinstance(response, str) else bytes(response)
        self._chunk_bytes = chunk_bytes
        self.served_chunks = 0

    def stream(self, prompt: str) -> Iterator[bytes]:
        for start in range(0, len(self._data), self._chunk_bytes):
            self.served_chunks += 1
            yield self._data[start : start + self._chunk_bytes]


class ScriptedLlm(LlmProvider):
    """Yields an explicit chunk sequence; chunks may be hostile bytes."""

    def __init__(self, chunks: Iterable[str | bytes], fail_after: int | None = None):
        self._chunks = list(chunks)
        self._fail_after = fail_after
        self.served_chunks = 0

    def stream(self, prompt: str) -> Iterator[str | bytes]:
        for index, chunk in enumerate(self._chunks):
            if self._fail_after is not None and index >= self._fail_after:
                raise ConnectionError("mock provider failure")
            self.served_chunks += 1
            yield chunk


class MockTts(TtsProvider):
    """Fires bookmark events at word-rate timing estimates, no audio synthesis.

    The SSML is parsed back and walked with the timing model; envelope
    wrapper tags (which parse as passthrough) are ignored.  The audio bytes
    are a deterministic placeholder encoding the estimated duration.
    """

    def __init__(self, base_rate_wpm: int = 150):
        self._params = TimingParams(base_rate_wpm)

    def synthesize(self, ssml: str) -> TtsResult:
        doc = parse_document(ssml)
        walk = TimelineWalk(self._params)
        fired: list[tuple[str, float]] = []
        for event in doc.events:
            if isinstance(event, LiteralPassthrough):
                continue  # speak/voice wrapper tags
            start = walk.advance(event)
            if isinstance(event, Bookmark):
                fired.append((event.mark, start))
        total = walk.clock_ms
        return TtsResult(
            audio=f"mock-audio:{total:.3f}ms".encode("ascii"),
            fired_bookmarks=tuple(fired),
            total_ms=total,
        )


class MockStt(SttProvider):
    """Returns a canned transcript regardless of the audio payload."""

    def __init__(self, transcript: str):
        self._transcript = transcript

    def transcribe(self, audio: bytes) -> str:
        return self._transcript


class MissingCredentialsError(RuntimeError):
    """Live provider requested but its environment variables are unset."""


def _default_transport(request: urllib.request.Request) -> Iterator[bytes]:
    with urllib.request.urlopen(request) as response:
        yield from response


class HttpStreamingLlm(LlmProvider):
    """Generic OpenAI-style streamed chat-completion client (SSE over HTTP).

    Configured by endpoint URL, model name and API key; a custom transport
    can be injected for tests.  Each SSE ``data:`` line is decoded and the
    message delta content yielded as one chunk.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str,
        transport: Callable[[urllib.request.Request], Iterator[bytes]] | None = None,
    ):
        self._endpoint = endpoint
        self._model = model
        self._api_key = api_key
        self._transport = transport or _default_transport

    @classmethod
    def from_env(cls, environ: dict | None = None) -> "HttpStreamingLlm":
        env = os.environ if environ is None else environ
        missing = [
            name
            for name in (ENV_LLM_ENDPOINT, ENV_LLM_MODEL, ENV_LLM_API_KEY)
            if not env.get(name)
        ]
        if missing:
            raise MissingCredentialsError(
                "live LLM provider needs environment variables: " + ", ".join(missing)
            )
        return cls(env[ENV_LLM_ENDPOINT], env[ENV_LLM_MODEL], env[ENV_LLM_API_KEY])

    def stream(self, prompt: str) -> Iterator[str]:
        payload = json.dumps(
            {
                "model": self._model,
                "messages": [{"role": "user", "content": prompt}],
                "stream": True,
            }
        ).encode("utf-8")
        request = urllib.request.Request(
            self._endpoint,
            data=payload,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self._api_key}",
            },
            method="POST",
        )
        buffer = b""
        for piece in self._transport(request):
            buffer += piece
            while b"\n" in buffer:
                line, buffer = buffer.split(b"\n", 1)
                chunk = self._decode_sse_line(line)
                if chunk:
                    yield chunk
        chunk = self._decode_sse_line(buffer)
        if chunk:
            yield chunk

    @staticmethod
    def _decode_sse_line(line: bytes) -> str | None:
        line = line.strip()
        if not line.startswith(b"data:"):
            return None
        body = line[len(b"data:") :].strip()
        if body == b"[DONE]":
            return None
        try:
            message = json.loads(body)
            return message["choices"][0]["delta"].get("content") or None
        except (json.JSONDecodeError, LookupError, TypeError):
            return None
