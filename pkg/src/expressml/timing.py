"""Engine-free playback timing estimates.

When no real TTS engine is in the loop, gesture cues still need fire times.
The model walks a filler-expanded event sequence left to right, advancing a
millisecond clock: each whitespace-delimited word costs
``(60000 / base_rate_wpm) / (1 + rate/100)`` where rate is the innermost
active prosody rate (SSML semantics), and each break adds its duration.
Bookmarks are stamped at the current clock and add nothing.  Pitch and
volume do not affect timing.

The walk accumulates per word, not per run, so that splitting a text run at
any whitespace boundary leaves every later stamp bit-identical; the streaming
pipeline relies on this when it flushes mid-response.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .markup import (
    Break,
    Filler,
    LiteralPassthrough,
    MarkupEvent,
    ProsodyClose,
    ProsodyOpen,
    TaggedDocument,
    TextRun,
)

WPM_MIN = 60
WPM_MAX = 400


@dataclass(frozen=True)
class TimingParams:
    """Word-rate model parameters; words are whitespace-delimited tokens."""

    base_rate_wpm: int = 150

    def __post_init__(self) -> None:
        if not WPM_MIN <= self.base_rate_wpm <= WPM_MAX:
            raise ValueError(
                f"base_rate_wpm {self.base_rate_wpm} outside [{WPM_MIN}, {WPM_MAX}]"
            )


class TimelineWalk:
    """Incremental clock over an event stream; shared by offline and streaming paths."""

    def __init__(self, params: TimingParams):
        self._params = params
        self._rate_stack: list[int] = []
        self.clock_ms = 0.0

    def advance(self, event: MarkupEvent) -> float:
        """Consume one event; returns the clock at the event's start."""
        start = self.clock_ms
        if isinstance(event, (TextRun, LiteralPassthrough)):
            rate = self._rate_stack[-1] if self._rate_stack else 0
            per_word = (60000.0 / self._params.base_rate_wpm) / (1.0 + rate / 100.0)
            for _ in event.text.split():
                self.clock_ms += per_word
        elif isinstance(event, Break):
            self.clock_ms += float(event.duration_ms)
        elif isinstance(event, ProsodyOpen):
            self._rate_stack.append(event.rate_pct)
        elif isinstance(event, ProsodyClose):
            if not self._rate_stack:
                raise ValueError("prosody close without open")
            self._rate_stack.pop()
        elif isinstance(event, Filler):
            raise ValueError("timeline requires a filler-expanded document")
        return start


def estimate_timeline(
    doc: TaggedDocument | Iterable[MarkupEvent], params: TimingParams | None = None
) -> list[tuple[int, float]]:
    """Stamp every event with its estimated start time in milliseconds.

    The document must be filler-expanded and prosody-balanced.
    """
    params = params or TimingParams()
    events = doc.events if isinstance(doc, TaggedDocument) else tuple(doc)
    walk = TimelineWalk(params)
    stamps = [(index, walk.advance(event)) for index, event in enumerate(events)]
    if walk._rate_stack:
        raise ValueError("unbalanced prosody in timeline input")
    return stamps
