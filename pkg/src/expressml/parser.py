"""Incremental parser for the speech/gesture tag language.

The parser consumes LLM output delivered as a stream of chunks, where a chunk may
split a tag, an attribute, an entity, or a multi-byte UTF-8 character at any
byte boundary.  It never fails: malformed or unknown markup degrades to
LiteralPassthrough events with diagnostics, so a streaming session is never
stalled by model misbehavior.

The central contract is chunking invariance: for any byte stream and any
partition into chunks, the concatenated feed() outputs plus finish() output
equal the whole-string parse, after merging adjacent TextRun events (streamed
text is emitted eagerly for bounded latency, so a run may arrive in pieces;
``markup.coalesce_text`` produces the canonical form).

Grammar notes:
  - tags are ``<name attr="value" ...>`` with optional whitespace around
    ``=``; attribute values must be double-quoted
  - ``break``, ``filler``, ``bookmark`` are void elements, accepted with or
    without a trailing ``/``; ``prosody`` is a container closed by
    ``</prosody>``
  - a ``<`` whose next byte is not a letter or ``/`` is literal text
  - only ``&lt;`` ``&gt;`` ``&amp;`` are decoded in text runs
  - a tag candidate not closed within MAX_TAG_BYTES is abandoned and passed
    through, even if a ``>`` appears later (keeps buffering bounded and the
    parse independent of chunk boundaries)
"""

from __future__ import annotations

import re

from .markup import (
    PROSODY_MAX_DEPTH,
    AttributeValueError,
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
    VolumeLevel,
    coalesce_text,
    normalize_duration_ms,
    normalize_filler_kind,
    normalize_mark,
    normalize_percent,
    normalize_volume,
)

# Longest legal tag is well under 80 bytes; 256 gives margin without
# unbounded buffering.
MAX_TAG_BYTES = 256

KNOWN_TAG_NAMES = frozenset({"break", "prosody", "filler", "bookmark"})

_TAG_RE = re.compile(
    r"<(?P<close>/)?\s*(?P<name>[A-Za-z][A-Za-z0-9_-]*)"
    r'(?P<attrs>(?:\s+[A-Za-z_][A-Za-z0-9_-]*\s*=\s*"[^"]*")*)'
    r"\s*(?P<selfclose>/)?\s*>"
)
_ATTR_RE = re.compile(r'([A-Za-z_][A-Za-z0-9_-]*)\s*=\s*"([^"]*)"')

_ENTITIES: tuple[tuple[bytes, str], ...] = (
    (b"&lt;", "<"),
    (b"&gt;", ">"),
    (b"&amp;", "&"),
)
_ENTITY_MAX = max(len(e) for e, _ in _ENTITIES)


def _incomplete_utf8_suffix_len(buf) -> int:
    """Bytes at the end of buf forming a valid but incomplete UTF-8 char."""
    n = len(buf)
    for back in range(1, min(3, n) + 1):
        byte = buf[n - back]
        if 0x80 <= byte < 0xC0:
            continue  # continuation byte; keep looking for its lead
        if byte < 0x80 or byte >= 0xF8:
            return 0  # ascii or invalid lead: nothing to wait for
        need = 2 if byte < 0xE0 else 3 if byte < 0xF0 else 4
        return back if need > back else 0
    return 0


class StreamParser:
    """Single-owner incremental parser state.

    One parser per session; feed() chunks in order, then finish().  The
    pending buffer holds at most MAX_TAG_BYTES of suffix that may still
    become a tag (plus up to four bytes of a possible entity or split
    multi-byte character).
    """

    def __init__(self) -> None:
        self._buf = bytearray()
        self._base = 0  # global byte offset of _buf[0]
        self._open_prosody: list[int] = []  # offsets of unclosed opens
        self._diagnostics: list[ParseDiagnostic] = []
        self._finished = False

    @property
    def bytes_consumed(self) -> int:
        return self._base

    @property
    def pending_buffer(self) -> bytes:
        return bytes(self._buf)

    @property
    def open_prosody_depth(self) -> int:
        return len(self._open_prosody)

    @property
    def diagnostics(self) -> tuple[ParseDiagnostic, ...]:
        return tuple(self._diagnostics)

    def feed(self, chunk: str | bytes) -> list[MarkupEvent]:
        """Parse one chunk; returns every event that is unambiguously complete."""
        if self._finished:
            raise RuntimeError("feed() after finish()")
        if isinstance(chunk, str):
            data = chunk.encode("utf-8", errors="replace")
        else:
            data = bytes(chunk)
        self._buf += data
        return self._pump(at_eof=False)

    def finish(self) -> tuple[list[MarkupEvent], list[ParseDiagnostic]]:
        """Flush held bytes and auto-close open prosody; returns all diagnostics."""
        if self._finished:
            raise RuntimeError("finish() called twice")
        events = self._pump(at_eof=True)
        for offset in reversed(self._open_prosody):
            self._diag(
                Severity.WARNING,
                offset,
                "unclosed-prosody",
                "prosody element never closed; auto-closing at end of input",
            )
            events.append(ProsodyClose())
        self._open_prosody.clear()
        self._finished = True
        return events, list(self._diagnostics)

    # -- internals ---------------------------------------------------------

    def _diag(self, severity: Severity, offset: int, code: str, message: str) -> None:
        self._diagnostics.append(ParseDiagnostic(severity, offset, code, message))

    def _pump(self, at_eof: bool) -> list[MarkupEvent]:
        buf = self._buf
        n = len(buf)
        i = 0
        events: list[MarkupEvent] = []
        text_parts: list[str] = []

        def flush_text() -> None:
            if text_parts:
                events.append(TextRun("".join(text_parts)))
                text_parts.clear()

        while i < n:
            b = buf[i]
            if b == 0x3C:  # '<'
                if i + 1 >= n:
                    if at_eof:
                        # no next byte can ever arrive: cannot start a tag
                        text_parts.append("<")
                        i += 1
                        continue
                    break  # hold: next byte decides tag vs literal
                nxt = buf[i + 1]
                if not (0x41 <= nxt <= 0x5A or 0x61 <= nxt <= 0x7A or nxt == 0x2F):
                    text_parts.append("<")
                    i += 1
                    continue
                end = buf.find(b">", i + 1, i + MAX_TAG_BYTES)
                if end != -1:
                    flush_text()
                    events.extend(self._handle_tag(bytes(buf[i : end + 1]), self._base + i))
                    i = end + 1
                    continue
                avail = n - i
                if avail >= MAX_TAG_BYTES:
                    flush_text()
                    window = buf[i : i + MAX_TAG_BYTES]
                    keep = MAX_TAG_BYTES - _incomplete_utf8_suffix_len(window)
                    self._diag(
                        Severity.WARNING,
                        self._base + i,
                        "tag-overflow",
                        f"tag not closed within {MAX_TAG_BYTES} bytes; passed through",
                    )
                    events.append(
                        LiteralPassthrough(bytes(buf[i : i + keep]).decode("utf-8", "replace"))
                    )
                    i += keep
                    continue
                if at_eof:
                    flush_text()
                    self._diag(
                        Severity.WARNING,
                        self._base + i,
                        "unterminated-tag",
                        "input ended inside a tag; passed through",
                    )
                    events.append(LiteralPassthrough(bytes(buf[i:]).decode("utf-8", "replace")))
                    i = n
                    continue
                break  # hold the tag prefix
            if b == 0x26:  # '&'
                window = bytes(buf[i : i + _ENTITY_MAX])
                matched = False
                for entity, char in _ENTITIES:
                    if window.startswith(entity):
                        text_parts.append(char)
                        i += len(entity)
                        matched = True
                        break
                if matched:
                    continue
                rest = bytes(buf[i:n])
                if (
                    not at_eof
                    and len(rest) < _ENTITY_MAX
                    and any(e.startswith(rest) for e, _ in _ENTITIES)
                ):
                    break  # hold: could still complete an entity
                text_parts.append("&")
                i += 1
                continue
            # plain text: run to the next special byte
            lt = buf.find(b"<", i)
            amp = buf.find(b"&", i)
            k = min(x for x in (lt, amp, n) if x != -1)
            if k == n and not at_eof:
                emit_end = n - _incomplete_utf8_suffix_len(buf[i:n])
                if emit_end > i:
                    text_parts.append(bytes(buf[i:emit_end]).decode("utf-8", "replace"))
                i = emit_end
                break  # anything left is a held multi-byte prefix
            text_parts.append(bytes(buf[i:k]).decode("utf-8", "replace"))
            i = k

        flush_text()
        del self._buf[:i]
        self._base += i
        return events

    def _handle_tag(self, raw: bytes, offset: int) -> list[MarkupEvent]:
        """Turn one complete ``<...>`` span into events (or a passthrough)."""
        text = raw.decode("utf-8", errors="replace")
        m = _TAG_RE.fullmatch(text)
        if m is None:
            self._diag(Severity.ERROR, offset, "malformed-tag", f"malformed tag: {text!r}")
            return [LiteralPassthrough(text)]

        name = m.group("name")
        closing = m.group("close") is not None
        self_closing = m.group("selfclose") is not None
        attrs: list[tuple[str, str]] = _ATTR_RE.findall(m.group("attrs"))

        if closing:
            if name != "prosody":
                self._diag(
                    Severity.WARNING, offset, "unknown-tag", f"unknown closing tag: {text!r}"
                )
                return [LiteralPassthrough(text)]
            if attrs or self_closing:
                self._diag(
                    Severity.ERROR, offset, "malformed-tag", f"malformed closing tag: {text!r}"
                )
                return [LiteralPassthrough(text)]
            if not self._open_prosody:
                self._diag(
                    Severity.WARNING,
                    offset,
                    "stray-prosody-close",
                    "</prosody> without a matching open tag; passed through",
                )
                return [LiteralPassthrough(text)]
            self._open_prosody.pop()
            return [ProsodyClose()]

        if name not in KNOWN_TAG_NAMES:
            self._diag(Severity.WARNING, offset, "unknown-tag", f"unknown tag <{name}>")
            return [LiteralPassthrough(text)]

        values: dict[str, str] = {}
        for key, value in attrs:
            if key in values:
                self._diag(
                    Severity.WARNING,
                    offset,
                    "duplicate-attribute",
                    f"duplicate attribute {key!r} in <{name}>; last occurrence wins",
                )
            values[key] = value

        allowed = {
            "break": {"time"},
            "prosody": {"rate", "volume", "pitch"},
            "filler": {"type"},
            "bookmark": {"mark"},
        }[name]
        unknown = set(values) - allowed
        if unknown:
            self._diag(
                Severity.WARNING,
                offset,
                "unknown-attribute",
                f"unknown attribute(s) {sorted(unknown)} in <{name}>",
            )
            return [LiteralPassthrough(text)]

        try:
            if name == "break":
                return [self._make_break(values, text, offset)]
            if name == "filler":
                return [self._make_filler(values, text, offset)]
            if name == "bookmark":
                return [self._make_bookmark(values, text, offset)]
            return self._make_prosody(values, text, offset, self_closing)
        except _Recover:
            return [LiteralPassthrough(text)]

    def _require(self, values: dict[str, str], key: str, text: str, offset: int) -> str:
        if key not in values:
            self._diag(
                Severity.ERROR,
                offset,
                "missing-attribute",
                f"missing required attribute {key!r} in {text!r}",
            )
            raise _Recover
        return values[key]

    def _make_break(self, values: dict[str, str], text: str, offset: int) -> Break:
        raw = self._require(values, "time", text, offset)
        try:
            ms, clamped = normalize_duration_ms(raw)
        except AttributeValueError as exc:
            self._diag(Severity.ERROR, offset, "bad-attribute-value", str(exc))
            raise _Recover from None
        if clamped:
            self._diag(
                Severity.WARNING,
                offset,
                "clamped-value",
                f"break time {raw!r} clamped to {ms}ms",
            )
        return Break(ms)

    def _make_filler(self, values: dict[str, str], text: str, offset: int) -> Filler:
        raw = self._require(values, "type", text, offset)
        try:
            return Filler(normalize_filler_kind(raw))
        except AttributeValueError as exc:
            self._diag(Severity.ERROR, offset, "bad-attribute-value", str(exc))
            raise _Recover from None

    def _make_bookmark(self, values: dict[str, str], text: str, offset: int) -> Bookmark:
        raw = self._require(values, "mark", text, offset)
        try:
            return Bookmark(normalize_mark(raw))
        except AttributeValueError as exc:
            self._diag(Severity.ERROR, offset, "bad-attribute-value", str(exc))
            raise _Recover from None

    def _make_prosody(
        self, values: dict[str, str], text: str, offset: int, self_closing: bool
    ) -> list[MarkupEvent]:
        if len(self._open_prosody) >= PROSODY_MAX_DEPTH:
            self._diag(
                Severity.WARNING,
                offset,
                "prosody-depth-exceeded",
                f"prosody nesting deeper than {PROSODY_MAX_DEPTH}; passed through",
            )
            raise _Recover
        rate = pitch = 0
        volume = VolumeLevel.MEDIUM
        try:
            if "rate" in values:
                rate, clamped = normalize_percent(values["rate"])
                if clamped:
                    self._diag(
                        Severity.WARNING,
                        offset,
                        "clamped-value",
                        f"prosody rate {values['rate']!r} clamped to {rate}%",
                    )
            if "pitch" in values:
                pitch, clamped = normalize_percent(values["pitch"])
                if clamped:
                    self._diag(
                        Severity.WARNING,
                        offset,
                        "clamped-value",
                        f"prosody pitch {values['pitch']!r} clamped to {pitch}%",
                    )
            if "volume" in values:
                volume = normalize_volume(values["volume"])
        except AttributeValueError as exc:
            self._diag(Severity.ERROR, offset, "bad-attribute-value", str(exc))
            raise _Recover from None
        event = ProsodyOpen(rate_pct=rate, volume=volume, pitch_pct=pitch)
        if self_closing:
            return [event, ProsodyClose()]
        self._open_prosody.append(offset)
        return [event]


class _Recover(Exception):
    """Internal: degrade the current tag to a passthrough."""


def parse_document(source: str | bytes) -> TaggedDocument:
    """Parse a whole response; never fails.

    Equivalent to feeding the source as one chunk and finishing; the result
    is in canonical form (maximal text runs).
    """
    parser = StreamParser()
    events = parser.feed(source)
    tail, diagnostics = parser.finish()
    return TaggedDocument(coalesce_text(events + tail), tuple(diagnostics))
