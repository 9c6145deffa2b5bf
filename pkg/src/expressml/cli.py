"""Developer-facing command line: every pipeline stage, one JSON record per line.

Subcommands: parse, compile, prompt, timeline, lint-libraries, session.
All output is machine-parseable (one JSON object per line) so golden-file
tests can diff runs without fragile text parsing.  Exit codes: 0 success,
1 diagnostics with errors or invalid configuration, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import Iterator

from .compiler import GestureCue, SsmlEnvelope, compile_utterance, expand_fillers
from .libraries import (
    LibraryError,
    SelectionState,
    default_filler_library,
    default_gesture_library,
    load_filler_library,
    load_gesture_library,
    read_config,
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
    TaggedDocument,
    TextRun,
    coalesce_text,
)
from .parser import StreamParser, parse_document
from .pipeline import (
    ByteBudget,
    Libraries,
    OutputSegment,
    SentenceBoundary,
    SessionConfig,
    SessionSummary,
    run_session,
)
from .prompting import default_prompt
from .providers import (
    HttpStreamingLlm,
    LlmProvider,
    MissingCredentialsError,
    MockLlm,
    MockTts,
    ProviderSuite,
)
from .timing import TimingParams, estimate_timeline


class _CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _emit(record: dict, stream=None) -> None:
    print(json.dumps(record, ensure_ascii=False), file=stream or sys.stdout, flush=True)


def _event_record(event: MarkupEvent) -> dict:
    if isinstance(event, TextRun):
        return {"type": "event", "kind": "text", "text": event.text}
    if isinstance(event, Break):
        return {"type": "event", "kind": "break", "time_ms": event.duration_ms}
    if isinstance(event, ProsodyOpen):
        return {
            "type": "event",
            "kind": "prosody-open",
            "rate_pct": event.rate_pct,
            "volume": event.volume.value,
            "pitch_pct": event.pitch_pct,
        }
    if isinstance(event, ProsodyClose):
        return {"type": "event", "kind": "prosody-close"}
    if isinstance(event, Filler):
        return {"type": "event", "kind": "filler", "filler_kind": event.kind.value}
    if isinstance(event, Bookmark):
        return {"type": "event", "kind": "bookmark", "mark": event.mark}
    if isinstance(event, LiteralPassthrough):
        return {"type": "event", "kind": "passthrough", "text": event.text}
    raise TypeError(f"unknown event {event!r}")


def _diagnostic_record(diag: ParseDiagnostic) -> dict:
    return {
        "type": "diagnostic",
        "severity": diag.severity.value,
        "byte_offset": diag.byte_offset,
        "code": diag.code,
        "message": diag.message,
    }


def _cue_record(cue: GestureCue) -> dict:
    return {
        "type": "cue",
        "mark": cue.mark,
        "gesture_id": cue.gesture.id,
        "clip": cue.gesture.clip,
        "char_offset": cue.char_offset,
        "est_time_ms": cue.est_time_ms,
    }


def _read_input(path: str) -> bytes:
    try:
        if path == "-":
            return sys.stdin.buffer.read()
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise _CliError(2, f"cannot read {path}: {exc}") from None


def _load_libraries(args: argparse.Namespace) -> Libraries:
    try:
        if getattr(args, "fillers", None):
            fillers = load_filler_library(read_config(args.fillers))
        else:
            fillers = default_filler_library()
        if getattr(args, "gestures", None):
            gestures = load_gesture_library(read_config(args.gestures))
        else:
            gestures = default_gesture_library()
    except OSError as exc:
        raise _CliError(2, f"cannot read library config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise _CliError(1, f"library config is not valid JSON: {exc}") from None
    except LibraryError as exc:
        for item in exc.errors:
            _emit({"type": "error", "message": item})
        raise _CliError(1, "library validation failed") from None
    return Libraries(fillers, gestures)


def _envelope(args: argparse.Namespace) -> SsmlEnvelope:
    return SsmlEnvelope(
        voice_name=args.voice, language_tag=args.lang, base_rate_wpm=args.wpm
    )


def _add_envelope_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--voice", default="en-US-JennyNeural", help="SSML voice name")
    sub.add_argument("--lang", default="en-US", help="BCP-47 language tag")
    sub.add_argument("--wpm", type=int, default=150, help="base speaking rate, words per minute")


def _add_library_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--fillers", metavar="PATH", help="filler library config (JSON)")
    sub.add_argument("--gestures", metavar="PATH", help="gesture library config (JSON)")


def cmd_parse(args: argparse.Namespace) -> int:
    data = _read_input(args.input)
    if args.chunk_bytes:
        parser = StreamParser()
        events: list[MarkupEvent] = []
        for start in range(0, len(data), args.chunk_bytes):
            events.extend(parser.feed(data[start : start + args.chunk_bytes]))
        tail, diagnostics = parser.finish()
        doc = TaggedDocument(coalesce_text(events + tail), tuple(diagnostics))
    else:
        doc = parse_document(data)
    for event in doc.events:
        _emit(_event_record(event))
    for diag in doc.diagnostics:
        _emit(_diagnostic_record(diag))
    has_errors = any(d.severity is Severity.ERROR for d in doc.diagnostics)
    return 1 if has_errors else 0


def cmd_compile(args: argparse.Namespace) -> int:
    data = _read_input(args.input)
    libraries = _load_libraries(args)
    utterance, _ = compile_utterance(
        data,
        libraries.fillers,
        libraries.gestures,
        _envelope(args),
        SelectionState(seed=args.seed),
    )
    _emit({"type": "ssml", "document": utterance.ssml})
    for cue in utterance.cues:
        _emit(_cue_record(cue))
    _emit({"type": "plain_text", "text": utterance.plain_text})
    for diag in utterance.diagnostics:
        _emit(_diagnostic_record(diag))
    has_errors = any(d.severity is Severity.ERROR for d in utterance.diagnostics)
    return 1 if has_errors else 0


def cmd_prompt(args: argparse.Namespace) -> int:
    libraries = _load_libraries(args)
    template = None
    if args.template:
        try:
            with open(args.template, "r", encoding="utf-8") as fh:
                template = fh.read()
        except OSError as exc:
            raise _CliError(2, f"cannot read template: {exc}") from None
    bundle = default_prompt(
        args.question, libraries.fillers, libraries.gestures, template=template
    )
    if args.raw:
        print(bundle.rendered)
    else:
        _emit({"type": "prompt", "text": bundle.rendered})
    return 0


def cmd_timeline(args: argparse.Namespace) -> int:
    data = _read_input(args.input)
    libraries = _load_libraries(args)
    doc = parse_document(data)
    doc, _ = expand_fillers(doc, libraries.fillers, SelectionState(seed=args.seed))
    stamps = estimate_timeline(doc, TimingParams(args.wpm))
    for index, ms in stamps:
        record = _event_record(doc.events[index])
        _emit({"type": "stamp", "index": index, "ms": ms, "event": record})
    return 0


def cmd_lint_libraries(args: argparse.Namespace) -> int:
    failed = False
    for path in args.configs:
        try:
            document = read_config(path)
        except OSError as exc:
            raise _CliError(2, f"cannot read {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            _emit({"type": "lint", "path": path, "ok": False, "errors": [f"invalid JSON: {exc}"]})
            failed = True
            continue
        errors: list[str] = []
        checked = False
        if "fillers" in document:
            checked = True
            try:
                load_filler_library(document)
            except LibraryError as exc:
                errors.extend(exc.errors)
        if "gestures" in document or "marks" in document:
            checked = True
            try:
                load_gesture_library(document)
            except LibraryError as exc:
                errors.extend(exc.errors)
        if not checked:
            errors.append("config has neither 'fillers' nor 'gestures'")
        _emit({"type": "lint", "path": path, "ok": not errors, "errors": errors})
        failed = failed or bool(errors)
    return 1 if failed else 0


class _ThrottledLlm(LlmProvider):
    def __init__(self, inner: LlmProvider, delay_ms: int):
        self._inner = inner
        self._delay = delay_ms / 1000.0

    def stream(self, prompt: str) -> Iterator[str | bytes]:
        for chunk in self._inner.stream(prompt):
            time.sleep(self._delay)
            yield chunk


def _segment_record(segment: OutputSegment) -> dict:
    return {
        "type": "segment",
        "index": segment.segment_index,
        "ssml_fragment": segment.ssml_fragment,
        "cues": [_cue_record(c) for c in segment.cues],
        "fired_bookmarks": [list(fb) for fb in segment.fired_bookmarks],
        "ts_ms": segment.emitted_at_ms,
    }


def _summary_record(summary: SessionSummary) -> dict:
    return {
        "type": "summary",
        "question": summary.question,
        "segment_count": summary.segment_count,
        "error": summary.error,
        "ssml": summary.utterance.ssml,
        "plain_text": summary.utterance.plain_text,
        "cues": [_cue_record(c) for c in summary.utterance.cues],
        "diagnostics": [_diagnostic_record(d) for d in summary.utterance.diagnostics],
    }


def cmd_session(args: argparse.Namespace) -> int:
    if not args.question.strip():
        raise _CliError(2, "question must be non-empty")
    libraries = _load_libraries(args)
    if args.live:
        try:
            llm: LlmProvider = HttpStreamingLlm.from_env()
        except MissingCredentialsError as exc:
            raise _CliError(
                2,
                f"{exc}. Set EXPRESSML_LLM_ENDPOINT, EXPRESSML_LLM_MODEL and "
                "EXPRESSML_LLM_API_KEY, or use --mock-response.",
            ) from None
    else:
        if not args.mock_response:
            raise _CliError(2, "one of --mock-response PATH or --live is required")
        canned = _read_input(args.mock_response)
        llm = MockLlm(canned, chunk_bytes=args.mock_chunk_bytes)
    if args.mock_throttle_ms:
        llm = _ThrottledLlm(llm, args.mock_throttle_ms)

    if args.flush == "sentence":
        policy = SentenceBoundary()
    else:
        policy = ByteBudget(int(args.flush.split(":", 1)[1]))
    config = SessionConfig(seed=args.seed, envelope=_envelope(args), flush_policy=policy)
    providers = ProviderSuite(llm=llm, tts=MockTts(args.wpm) if not args.no_tts else None)

    transcript = None
    if args.transcript:
        transcript = open(args.transcript, "w", encoding="utf-8")
    try:
        for item in run_session(args.question, providers, libraries, config):
            record = (
                _segment_record(item)
                if isinstance(item, OutputSegment)
                else _summary_record(item)
            )
            _emit(record)
            if transcript:
                transcript.write(json.dumps(record, ensure_ascii=False) + "\n")
            if isinstance(item, SessionSummary) and item.error:
                return 1
    finally:
        if transcript:
            transcript.close()
    return 0


def _flush_policy_value(value: str) -> str:
    if value == "sentence":
        return value
    if value.startswith("bytes:"):
        try:
            int(value.split(":", 1)[1])
            return value
        except ValueError:
            pass
    raise argparse.ArgumentTypeError("expected 'sentence' or 'bytes:N'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expressml",
        description="Compile speech/gesture tagged text into SSML and gesture cues.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse tagged text into events")
    p.add_argument("input", nargs="?", default="-", help="input file, or - for stdin")
    p.add_argument("--chunk-bytes", type=int, metavar="N", help="feed input in N-byte chunks")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("compile", help="compile tagged text to SSML plus cue table")
    p.add_argument("input", nargs="?", default="-")
    p.add_argument("--seed", type=int, default=0)
    _add_library_flags(p)
    _add_envelope_flags(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("prompt", help="render the default prompt")
    p.add_argument("--question", default="What is video encoding?")
    p.add_argument("--template", metavar="PATH", help="custom template file")
    p.add_argument("--raw", action="store_true", help="print plain text instead of JSON")
    _add_library_flags(p)
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("timeline", help="estimate event start times")
    p.add_argument("input", nargs="?", default="-")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--wpm", type=int, default=150)
    _add_library_flags(p)
    p.set_defaults(func=cmd_timeline)

    p = sub.add_parser("lint-libraries", help="validate library config files")
    p.add_argument("configs", nargs="+", metavar="PATH")
    p.set_defaults(func=cmd_lint_libraries)

    p = sub.add_parser("session", help="run a mock or live end-to-end session")
    p.add_argument("question")
    p.add_argument("--mock-response", metavar="PATH", help="canned tagged response to replay")
    p.add_argument("--live", action="store_true", help="use the live LLM provider (env-configured)")
    p.add_argument("--mock-chunk-bytes", type=int, default=64, metavar="N")
    p.add_argument("--mock-throttle-ms", type=int, default=0, metavar="MS")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--flush", type=_flush_policy_value, default="sentence",
                   help="'sentence' or 'bytes:N'")
    p.add_argument("--no-tts", action="store_true", help="skip the mock TTS stage")
    p.add_argument("--transcript", metavar="PATH", help="also write records to this file")
    _add_library_flags(p)
    _add_envelope_flags(p)
    p.set_defaults(func=cmd_session)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"expressml: {exc}", file=sys.stderr)
        return exc.code
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
