"""End-to-end session orchestration: question in, SSML segments + cues out.

A session builds the prompt, streams the LLM response through the
incremental parser, expands fillers and resolves gesture cues on the fly,
and flushes body-level SSML fragments at flush-policy boundaries - but only
when no prosody element is open, so every fragment is individually
well-formed for incremental TTS submission.  The master property: for any
response, any chunking and any flush policy, the concatenated fragments
equal the offline compilation of the whole response under the same seed,
including cue offsets and estimated times.

Sentence boundaries are a terminator (. ! ? 。 ！ ？) followed by a
whitespace character or end of response, in spoken text outside tags and
outside open prosody spans.  The byte-budget policy flushes at the first
whitespace or non-text event once the segment's spoken text reaches the
budget.  Both rules depend only on response content, never on how the
stream happened to be chunked.

Concurrency contract: a session is a pull-driven pipeline (provider read ->
parse -> expand -> flush); each stage has a single consumer and backpressure
propagates by construction.  Session state is never shared; any number of
sessions may run concurrently.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Iterator, Union

from .compiler import (
    CompiledUtterance,
    GestureCue,
    SsmlEnvelope,
    compile_utterance,
    emit_body,
    wrap_body,
)
from .libraries import (
    FillerLibrary,
    GestureLibrary,
    SelectionState,
    UnknownMarkError,
    default_filler_library,
    default_gesture_library,
    select_filler,
    select_gesture,
)
from .markup import (
    Bookmark,
    Break,
    Filler,
    LiteralPassthrough,
    MarkupEvent,
    ParseDiagnostic,
    ProsodyClose,
    ProsodyOpen,
    Severity,
    TextRun,
)
from .parser import MAX_TAG_BYTES, StreamParser
from .prompting import default_prompt
from .providers import ProviderSuite
from .timing import TimelineWalk, TimingParams

SENTENCE_TERMINATORS = frozenset(".!?。！？")


@dataclass(frozen=True)
class SentenceBoundary:
    """Flush a segment at each confirmed sentence end."""


@dataclass(frozen=True)
class ByteBudget:
    """Flush once a segment's spoken text reaches ``limit`` UTF-8 bytes."""

    limit: int

    def __post_init__(self) -> None:
        if self.limit < MAX_TAG_BYTES:
            raise ValueError(f"byte budget must be >= {MAX_TAG_BYTES}")


FlushPolicy = Union[SentenceBoundary, ByteBudget]


@dataclass(frozen=True)
class SessionConfig:
    seed: int = 0
    envelope: SsmlEnvelope = field(default_factory=SsmlEnvelope)
    flush_policy: FlushPolicy = field(default_factory=SentenceBoundary)
    history_limit: int = 10


@dataclass(frozen=True)
class Libraries:
    fillers: FillerLibrary
    gestures: GestureLibrary


def default_libraries() -> Libraries:
    return Libraries(default_filler_library(), default_gesture_library())


@dataclass(frozen=True)
class OutputSegment:
    """One flushed fragment: body-level SSML plus the cues inside it.

    Cue offsets and times are relative to the whole session's spoken text,
    not the fragment.  ``fired_bookmarks`` is populated when a TTS provider
    is in the loop; ``emitted_at_ms`` is a wall-clock stamp for transcripts.
    """

    segment_index: int
    ssml_fragment: str
    cues: tuple[GestureCue, ...]
    fired_bookmarks: tuple[tuple[str, float], ...] = ()
    emitted_at_ms: float = 0.0


@dataclass(frozen=True)
class SessionSummary:
    """Final session record: the offline-equivalent compilation of the response."""

    question: str
    raw_response: str
    utterance: CompiledUtterance
    segment_count: int
    error: str | None = None
    diagnostics: tuple[ParseDiagnostic, ...] = ()


SessionEvent = Union[OutputSegment, SessionSummary]


@dataclass(frozen=True)
class Turn:
    question: str
    response: str


@dataclass(frozen=True)
class ConversationHistory:
    turns: tuple[Turn, ...] = ()
    limit: int = 10


def append_turn(history: ConversationHistory, question: str, response: str) -> ConversationHistory:
    """Add one finished turn, evicting the oldest when at the limit."""
    turns = history.turns + (Turn(question, response),)
    if len(turns) > history.limit:
        turns = turns[-history.limit :]
    return replace(history, turns=turns)


def render_history(history: ConversationHistory) -> str:
    """Plain-text transcript block inserted after the prompt's background."""
    lines = []
    for turn in history.turns:
        lines.append(f"Student: {turn.question}")
        lines.append(f"Teacher: {turn.response}")
    return "\n".join(lines)


class _Assembler:
    """Turns the expanded event stream into whole-buffer segment flushes.

    Every flush emits the entire accumulated buffer, so no event or text run
    is ever split mid-buffer; flush *points* are functions of the response
    content alone, which is what makes streaming output chunking-invariant.
    """

    def __init__(self, libraries: Libraries, config: SessionConfig):
        self._fillers = libraries.fillers
        self._gestures = libraries.gestures
        self._policy = config.flush_policy
        self._selection = SelectionState(seed=config.seed)
        self._walk = TimelineWalk(TimingParams(config.envelope.base_rate_wpm))
        self._buffer: list[MarkupEvent] = []
        self._pending_text: list[str] = []
        self._cue_records: list[tuple[int, str, object, int]] = []
        self._ready: list[OutputSegment] = []
        self.diagnostics: list[ParseDiagnostic] = []
        self._depth = 0
        self._spoken_chars = 0
        self._segment_bytes = 0
        self._segment_index = 0
        self._candidate = False  # last spoken char was a terminator at depth 0
        self._budget_due = False
        self._flush_requested = False

    def process(self, event: MarkupEvent) -> list[OutputSegment]:
        """Consume one parsed event; returns any segments completed by it."""
        if isinstance(event, Filler):
            entry, self._selection = select_filler(self._fillers, event.kind, self._selection)
            self._handle(ProsodyOpen(rate_pct=entry.rate_pct, volume=entry.volume))
            self._handle(TextRun(" " + entry.surface))
            self._handle(ProsodyClose())
            self._handle(Break(entry.break_ms))
        else:
            self._handle(event)
        return self._drain()

    def finish(self) -> list[OutputSegment]:
        """Flush whatever remains after the last event."""
        self._flush()
        return self._drain()

    # -- internals -----------------------------------------------------------

    def _drain(self) -> list[OutputSegment]:
        ready, self._ready = self._ready, []
        return ready

    def _handle(self, event: MarkupEvent) -> None:
        if isinstance(event, TextRun):
            self._handle_text(event.text)
            return
        self._finalize_pending()
        if isinstance(event, ProsodyClose):
            self._buffer.append(event)
            self._depth -= 1
            if self._budget_due:
                self._flush_requested = True
            self._maybe_flush()
            return
        if self._budget_due:
            self._flush_requested = True
        self._maybe_flush()
        if isinstance(event, ProsodyOpen):
            self._buffer.append(event)
            self._depth += 1
            return
        if isinstance(event, Bookmark):
            self._buffer.append(event)
            try:
                entry, self._selection = select_gesture(
                    self._gestures, event.mark, self._selection
                )
            except UnknownMarkError:
                self.diagnostics.append(
                    ParseDiagnostic(
                        Severity.WARNING,
                        0,
                        "unknown-mark",
                        f"bookmark mark {event.mark!r} is not in the gesture library",
                    )
                )
                return
            self._cue_records.append(
                (len(self._buffer) - 1, event.mark, entry, self._spoken_chars)
            )
            return
        if isinstance(event, LiteralPassthrough):
            self._resolve_candidate(event.text[0])
            self._maybe_flush()
            self._buffer.append(event)
            self._spoken_chars += len(event.text)
            self._count_bytes(event.text)
            return
        if isinstance(event, Break):
            self._buffer.append(event)
            return
        raise TypeError(f"unexpected event: {event!r}")

    def _handle_text(self, text: str) -> None:
        for ch in text:
            self._resolve_candidate(ch)
            if self._budget_due and ch.isspace():
                self._flush_requested = True
            self._maybe_flush()
            self._pending_text.append(ch)
            self._spoken_chars += 1
            self._count_bytes(ch)
            if (
                isinstance(self._policy, SentenceBoundary)
                and self._depth == 0
                and ch in SENTENCE_TERMINATORS
            ):
                self._candidate = True

    def _resolve_candidate(self, spoken_char: str) -> None:
        if self._candidate:
            self._candidate = False
            if spoken_char.isspace():
                self._flush_requested = True

    def _count_bytes(self, text: str) -> None:
        if isinstance(self._policy, ByteBudget):
            self._segment_bytes += len(text.encode("utf-8"))
            if self._segment_bytes >= self._policy.limit:
                self._budget_due = True

    def _finalize_pending(self) -> None:
        if self._pending_text:
            self._buffer.append(TextRun("".join(self._pending_text)))
            self._pending_text.clear()

    def _maybe_flush(self) -> None:
        if self._flush_requested and self._depth == 0:
            self._flush()

    def _flush(self) -> None:
        self._finalize_pending()
        self._flush_requested = False
        self._budget_due = False
        self._segment_bytes = 0
        if not self._buffer:
            return
        stamps: dict[int, float] = {}
        for position, event in enumerate(self._buffer):
            stamps[position] = self._walk.advance(event)
        cues = tuple(
            GestureCue(mark, entry, offset, est_time_ms=stamps[position])
            for position, mark, entry, offset in self._cue_records
        )
        self._ready.append(
            OutputSegment(
                segment_index=self._segment_index,
                ssml_fragment=emit_body(self._buffer),
                cues=cues,
                emitted_at_ms=time.monotonic() * 1000.0,
            )
        )
        self._segment_index += 1
        self._buffer = []
        self._cue_records = []


def run_session(
    question: str,
    providers: ProviderSuite,
    libraries: Libraries | None = None,
    config: SessionConfig | None = None,
    history: ConversationHistory | None = None,
) -> Iterator[SessionEvent]:
    """Run one conversational turn; yields OutputSegments, then a SessionSummary.

    Segments are yielded as soon as they complete, before the rest of the
    stream is consumed.  A provider failure mid-stream ends the segment
    stream early and is reported in the summary; no malformed fragment is
    ever emitted.
    """
    if not question.strip():
        raise ValueError("question is empty")
    libraries = libraries or default_libraries()
    config = config or SessionConfig()

    bundle = default_prompt(
        question,
        libraries.fillers,
        libraries.gestures,
        history_text=render_history(history) if history and history.turns else "",
    )
    parser = StreamParser()
    assembler = _Assembler(libraries, config)
    raw = bytearray()
    error: str | None = None

    def _raw_segments() -> Iterator[OutputSegment]:
        nonlocal error
        chunks = providers.llm.stream(bundle.rendered)
        while True:
            try:
                chunk = next(chunks)
            except StopIteration:
                break
            except Exception as exc:  # LLM failure mid-stream
                error = f"{type(exc).__name__}: {exc}"
                return
            if isinstance(chunk, str):
                raw.extend(chunk.encode("utf-8", errors="replace"))
            else:
                raw.extend(chunk)
            for event in parser.feed(chunk):
                yield from assembler.process(event)
        tail, _ = parser.finish()
        for event in tail:
            yield from assembler.process(event)
        yield from assembler.finish()

    segment_count = 0
    for segment in _raw_segments():
        tts_error: str | None = None
        if providers.tts is not None:
            try:
                result = providers.tts.synthesize(
                    wrap_body(segment.ssml_fragment, config.envelope)
                )
                segment = replace(segment, fired_bookmarks=result.fired_bookmarks)
            except Exception as exc:  # TTS failure: this segment is still valid
                tts_error = f"{type(exc).__name__}: {exc}"
        segment_count += 1
        yield segment
        if tts_error is not None:
            error = tts_error
            break

    utterance, _ = compile_utterance(
        bytes(raw),
        libraries.fillers,
        libraries.gestures,
        config.envelope,
        SelectionState(seed=config.seed),
    )
    yield SessionSummary(
        question=question,
        raw_response=bytes(raw).decode("utf-8", errors="replace"),
        utterance=utterance,
        segment_count=segment_count,
        error=error,
        diagnostics=tuple(assembler.diagnostics),
    )


def collect_session(
    question: str,
    providers: ProviderSuite,
    libraries: Libraries | None = None,
    config: SessionConfig | None = None,
    history: ConversationHistory | None = None,
) -> tuple[list[OutputSegment], SessionSummary]:
    """Drain a session into (segments, summary)."""
    segments: list[OutputSegment] = []
    summary: SessionSummary | None = None
    for item in run_session(question, providers, libraries, config, history):
        if isinstance(item, OutputSegment):
            segments.append(item)
        else:
            summary = item
    assert summary is not None
    return segments, summary
