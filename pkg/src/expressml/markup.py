"""Core types of the hybrid speech/gesture tag language.

The tag language is a tiny XML-like vocabulary an LLM is prompted to emit
inline with its answer text: pause tags (``<break time="500ms">``), prosody
spans (``<prosody rate="-10%" volume="medium" pitch="+3%">...</prosody>``),
filler-word tags (``<filler type="thinking">``) and gesture bookmarks
(``<bookmark mark="pointImportant">``).  This module defines the event model
shared by the parser and the SSML compiler, the attribute value domains, and
the normalization/clamping rules applied to attribute payloads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Union

# Clamp bounds applied to attribute values after parsing.  Clamping warns
# instead of erroring so that a streaming session is never blocked by an
# out-of-range value from the model.
BREAK_MS_MIN = 0
BREAK_MS_MAX = 5000
PERCENT_MIN = -50
PERCENT_MAX = 50

# Maximum prosody nesting depth accepted by the parser.  Filler expansion
# adds one more level, which downstream serialization tolerates.
PROSODY_MAX_DEPTH = 4

_MARK_RE = re.compile(r"[A-Za-z][A-Za-z0-9_-]*")
_DURATION_RE = re.compile(r"\s*(\d+)\s*ms\s*")
_PERCENT_RE = re.compile(r"\s*([+-]?\d+)\s*%\s*")


class VolumeLevel(str, Enum):
    """Closed five-level SSML volume scale."""

    X_SOFT = "x-soft"
    SOFT = "soft"
    MEDIUM = "medium"
    LOUD = "loud"
    X_LOUD = "x-loud"


class FillerKind(str, Enum):
    """Closed set of filler-word categories."""

    THINKING = "thinking"
    HESITATION = "hesitation"
    TRANSITION = "transition"


class Severity(str, Enum):
    WARNING = "warning"
    ERROR = "error"


@dataclass(frozen=True)
class TextRun:
    """A run of spoken text (entities already decoded)."""

    text: str


@dataclass(frozen=True)
class Break:
    """A pause, clamped to [0, 5000] milliseconds."""

    duration_ms: int


@dataclass(frozen=True)
class ProsodyOpen:
    """Start of a prosody span; rate/pitch are signed percent in [-50, 50]."""

    rate_pct: int = 0
    volume: VolumeLevel = VolumeLevel.MEDIUM
    pitch_pct: int = 0


@dataclass(frozen=True)
class ProsodyClose:
    """End of the innermost open prosody span."""


@dataclass(frozen=True)
class Filler:
    """A filler-word slot, expanded later against a filler library."""

    kind: FillerKind


@dataclass(frozen=True)
class Bookmark:
    """A zero-duration gesture cue anchor; mark is a validated identifier."""

    mark: str


@dataclass(frozen=True)
class LiteralPassthrough:
    """Raw source text preserved by error recovery.

    Only produced when malformed or unknown markup is degraded to literal
    text; every passthrough has an associated diagnostic.
    """

    text: str


MarkupEvent = Union[
    TextRun, Break, ProsodyOpen, ProsodyClose, Filler, Bookmark, LiteralPassthrough
]


@dataclass(frozen=True)
class ParseDiagnostic:
    """A recoverable problem found while parsing, tied to a byte offset."""

    severity: Severity
    byte_offset: int
    code: str
    message: str


@dataclass(frozen=True)
class TaggedDocument:
    """Ordered parse result of one response: events plus diagnostics.

    Invariants: prosody events are balanced, and concatenating the TextRun
    contents in order reproduces the spoken text exactly.
    """

    events: tuple[MarkupEvent, ...]
    diagnostics: tuple[ParseDiagnostic, ...] = ()

    @property
    def spoken_text(self) -> str:
        return spoken_text(self.events)


@dataclass(frozen=True)
class TagSchema:
    """Prompt-facing description of one tag: name, canonical form, domains."""

    name: str
    example: str
    attributes: str


# The complete tag vocabulary, in the canonical illustration forms shown to
# the LLM.  The parser accepts exactly these tag names (plus </prosody>).
TAG_SCHEMAS: tuple[TagSchema, ...] = (
    TagSchema(
        name="break",
        example='<break time="500ms">',
        attributes='time: pause length in milliseconds, "0ms" to "5000ms"',
    ),
    TagSchema(
        name="prosody",
        example='<prosody rate="-10%" volume="medium" pitch="+3%">key point</prosody>',
        attributes=(
            "rate, pitch: signed percent from -50% to +50%; "
            "volume: one of x-soft, soft, medium, loud, x-loud; "
            "must be closed with </prosody>"
        ),
    ),
    TagSchema(
        name="filler",
        example='<filler type="thinking">',
        attributes="type: one of thinking, hesitation, transition",
    ),
    TagSchema(
        name="bookmark",
        example='<bookmark mark="pointImportant">',
        attributes="mark: a gesture cue name from the gesture library",
    ),
)


class AttributeValueError(ValueError):
    """Raised when an attribute payload cannot be normalized."""


def clamp(value: int, lo: int, hi: int) -> tuple[int, bool]:
    """Clamp value into [lo, hi]; second element reports whether it changed."""
    if value < lo:
        return lo, True
    if value > hi:
        return hi, True
    return value, False


def normalize_duration_ms(raw: str) -> tuple[int, bool]:
    """Parse a duration payload like "500ms" into clamped milliseconds."""
    m = _DURATION_RE.fullmatch(raw)
    if m is None:
        raise AttributeValueError(f"not a millisecond duration: {raw!r}")
    return clamp(int(m.group(1)), BREAK_MS_MIN, BREAK_MS_MAX)


def normalize_percent(raw: str) -> tuple[int, bool]:
    """Parse a signed percent payload like "-10%" or "+3%" into a clamped int."""
    m = _PERCENT_RE.fullmatch(raw)
    if m is None:
        raise AttributeValueError(f"not a signed percent: {raw!r}")
    return clamp(int(m.group(1)), PERCENT_MIN, PERCENT_MAX)


def normalize_volume(raw: str) -> VolumeLevel:
    token = raw.strip().lower()
    try:
        return VolumeLevel(token)
    except ValueError:
        raise AttributeValueError(f"unknown volume level: {raw!r}") from None


def normalize_filler_kind(raw: str) -> FillerKind:
    token = raw.strip().lower()
    try:
        return FillerKind(token)
    except ValueError:
        raise AttributeValueError(f"unknown filler kind: {raw!r}") from None


def normalize_mark(raw: str) -> str:
    token = raw.strip()
    if not _MARK_RE.fullmatch(token):
        raise AttributeValueError(f"invalid bookmark mark: {raw!r}")
    return token


def normalize_attribute_value(raw: str, attribute: str) -> tuple[object, bool]:
    """Normalize one quoted attribute payload (quotes already stripped).

    ``attribute`` selects the value domain: "duration", "percent", "volume",
    "filler-kind" or "mark".  Returns (normalized value, was_clamped); raises
    AttributeValueError when the payload is unparseable.
    """
    if attribute == "duration":
        return normalize_duration_ms(raw)
    if attribute == "percent":
        return normalize_percent(raw)
    if attribute == "volume":
        return normalize_volume(raw), False
    if attribute == "filler-kind":
        return normalize_filler_kind(raw), False
    if attribute == "mark":
        return normalize_mark(raw), False
    raise ValueError(f"unknown attribute kind: {attribute!r}")


def format_duration(ms: int) -> str:
    return f"{ms}ms"


def format_percent(pct: int) -> str:
    return f"+{pct}%" if pct > 0 else f"{pct}%"


def spoken_text(events: Iterable[MarkupEvent]) -> str:
    """Concatenated spoken text of an event sequence.

    TextRun and LiteralPassthrough contribute their text; Filler events
    contribute nothing until expanded; all other events are silent.
    """
    parts: list[str] = []
    for ev in events:
        if isinstance(ev, (TextRun, LiteralPassthrough)):
            parts.append(ev.text)
    return "".join(parts)


def coalesce_text(events: Iterable[MarkupEvent]) -> tuple[MarkupEvent, ...]:
    """Merge adjacent TextRun events into maximal runs.

    Streamed parsing may split a text run at chunk boundaries; this produces
    the canonical form in which event sequences are compared.
    """
    out: list[MarkupEvent] = []
    for ev in events:
        if isinstance(ev, TextRun) and out and isinstance(out[-1], TextRun):
            out[-1] = TextRun(out[-1].text + ev.text)
        else:
            out.append(ev)
    return tuple(out)
