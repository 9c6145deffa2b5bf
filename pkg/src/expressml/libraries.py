"""Filler word and gesture libraries: loading, validation, and selection.

Libraries are loaded from a JSON configuration document with top-level keys
``fillers`` (array of ``{kind, surface, rate_pct?, volume?, break_ms?}``),
``gestures`` (array of ``{id, category, clip}``) and ``marks`` (map from
bookmark mark to gesture category).  Bundled defaults ship both as package
data and, for editing, under ``config/`` in the repository.

Selection is seeded and reproducible across runs and platforms: draws come
from a SplitMix64 generator used in counter mode, with two independent
sub-streams (one for fillers, one for gestures) so that selections depend
only on each tag's position within its own modality, not on how the two
modalities interleave.  Gesture selection additionally avoids repeating the
previously chosen variant of a category whenever the category has at least
two variants, because back-to-back repeats read as robotic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping

from .markup import (
    BREAK_MS_MAX,
    BREAK_MS_MIN,
    PERCENT_MAX,
    PERCENT_MIN,
    FillerKind,
    VolumeLevel,
)

DEFAULT_CONFIG_RESOURCE = "default_expression.json"

# Render parameters used when a filler entry omits them.
DEFAULT_FILLER_RATE_PCT = -50
DEFAULT_FILLER_VOLUME = VolumeLevel.LOUD
DEFAULT_FILLER_BREAK_MS = 1000


class GestureCategory(str, Enum):
    THINKING = "thinking"
    EMPHASIZING = "emphasizing"
    SUMMARIZING = "summarizing"


@dataclass(frozen=True)
class FillerEntry:
    """One filler word plus the prosody/pause rendering it expands into."""

    kind: FillerKind
    surface: str
    rate_pct: int = DEFAULT_FILLER_RATE_PCT
    volume: VolumeLevel = DEFAULT_FILLER_VOLUME
    break_ms: int = DEFAULT_FILLER_BREAK_MS


@dataclass(frozen=True)
class GestureEntry:
    """One animation variant; clip is an opaque id for the animation system."""

    id: str
    category: GestureCategory
    clip: str


class LibraryError(ValueError):
    """Validation failed; carries the full itemized error list."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class FillerLibrary:
    entries: tuple[FillerEntry, ...]

    def entries_for(self, kind: FillerKind) -> tuple[FillerEntry, ...]:
        return tuple(e for e in self.entries if e.kind == kind)


@dataclass(frozen=True)
class GestureLibrary:
    entries: tuple[GestureEntry, ...]
    mark_to_category: Mapping[str, GestureCategory]

    def entries_for(self, category: GestureCategory) -> tuple[GestureEntry, ...]:
        return tuple(e for e in self.entries if e.category == category)

    def category_of(self, mark: str) -> GestureCategory | None:
        return self.mark_to_category.get(mark)


class UnknownMarkError(KeyError):
    """A bookmark mark has no mapping in the gesture library."""

    def __init__(self, mark: str):
        super().__init__(mark)
        self.mark = mark


def load_filler_library(source: Mapping) -> FillerLibrary:
    """Validate and build the filler library from a parsed config document.

    Raises LibraryError with every problem found; never returns a partially
    valid library.
    """
    errors: list[str] = []
    raw = source.get("fillers")
    if not isinstance(raw, list) or not raw:
        raise LibraryError(["config has no 'fillers' array"])
    entries: list[FillerEntry] = []
    for idx, item in enumerate(raw):
        where = f"fillers[{idx}]"
        if not isinstance(item, dict):
            errors.append(f"{where}: not an object")
            continue
        kind_raw = item.get("kind")
        try:
            kind = FillerKind(kind_raw)
        except ValueError:
            errors.append(f"{where}: unknown kind {kind_raw!r}")
            continue
        surface = item.get("surface")
        if not isinstance(surface, str) or not surface:
            errors.append(f"{where}: surface must be a non-empty string")
            continue
        rate = item.get("rate_pct", DEFAULT_FILLER_RATE_PCT)
        if not isinstance(rate, int) or not PERCENT_MIN <= rate <= PERCENT_MAX:
            errors.append(f"{where}: rate_pct {rate!r} outside [{PERCENT_MIN}, {PERCENT_MAX}]")
            continue
        volume_raw = item.get("volume", DEFAULT_FILLER_VOLUME.value)
        try:
            volume = VolumeLevel(volume_raw)
        except ValueError:
            errors.append(f"{where}: unknown volume {volume_raw!r}")
            continue
        break_ms = item.get("break_ms", DEFAULT_FILLER_BREAK_MS)
        if not isinstance(break_ms, int) or not BREAK_MS_MIN <= break_ms <= BREAK_MS_MAX:
            errors.append(
                f"{where}: break_ms {break_ms!r} outside [{BREAK_MS_MIN}, {BREAK_MS_MAX}]"
            )
            continue
        entries.append(FillerEntry(kind, surface, rate, volume, break_ms))
    covered = {e.kind for e in entries}
    for kind in FillerKind:
        if kind not in covered:
            errors.append(f"kind {kind.value} has no entries")
    if errors:
        raise LibraryError(errors)
    return FillerLibrary(tuple(entries))


def load_gesture_library(source: Mapping) -> GestureLibrary:
    """Validate and build the gesture library (entries plus mark vocabulary)."""
    errors: list[str] = []
    raw = source.get("gestures")
    if not isinstance(raw, list) or not raw:
        raise LibraryError(["config has no 'gestures' array"])
    entries: list[GestureEntry] = []
    seen_ids: set[str] = set()
    for idx, item in enumerate(raw):
        where = f"gestures[{idx}]"
        if not isinstance(item, dict):
            errors.append(f"{where}: not an object")
            continue
        gid = item.get("id")
        if not isinstance(gid, str) or not gid:
            errors.append(f"{where}: id must be a non-empty string")
            continue
        if gid in seen_ids:
            errors.append(f"{where}: duplicate id {gid!r}")
            continue
        category_raw = item.get("category")
        try:
            category = GestureCategory(category_raw)
        except ValueError:
            errors.append(f"{where}: unknown category {category_raw!r}")
            continue
        clip = item.get("clip")
        if not isinstance(clip, str) or not clip:
            errors.append(f"{where}: clip must be a non-empty string")
            continue
        seen_ids.add(gid)
        entries.append(GestureEntry(gid, category, clip))
    covered = {e.category for e in entries}
    for category in GestureCategory:
        if category not in covered:
            errors.append(f"category {category.value} has no entries")
    marks_raw = source.get("marks", {})
    marks: dict[str, GestureCategory] = {}
    if not isinstance(marks_raw, dict):
        errors.append("'marks' must be a map from mark to category")
    else:
        for mark, category_raw in marks_raw.items():
            try:
                marks[mark] = GestureCategory(category_raw)
            except ValueError:
                errors.append(f"marks[{mark!r}]: unknown category {category_raw!r}")
    if errors:
        raise LibraryError(errors)
    return GestureLibrary(tuple(entries), marks)


def read_config(path: str | Path) -> Mapping:
    """Read a JSON library configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def default_config() -> Mapping:
    """The bundled default configuration document."""
    data = resources.files("expressml").joinpath("data", DEFAULT_CONFIG_RESOURCE)
    return json.loads(data.read_text(encoding="utf-8"))


def default_filler_library() -> FillerLibrary:
    return load_filler_library(default_config())


def default_gesture_library() -> GestureLibrary:
    return load_gesture_library(default_config())


# -- seeded selection --------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_FILLER_SALT = 0x8F1C_2A43_9D77_10B5
_GESTURE_SALT = 0x6A09_E667_F3BC_C909


def _splitmix64(x: int) -> int:
    x &= _MASK64
    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _stream_value(seed: int, salt: int, index: int) -> int:
    """index-th output of the SplitMix64 stream salted for one purpose."""
    state = ((seed ^ salt) + (index + 1) * _GOLDEN) & _MASK64
    return _splitmix64(state)


@dataclass(frozen=True)
class SelectionState:
    """Reproducible selection cursor: seed plus per-modality draw counters.

    The same seed and the same per-modality call sequences yield the same
    selections, regardless of how filler and gesture draws interleave.
    """

    seed: int
    filler_draws: int = 0
    gesture_draws: int = 0
    last_gesture: Mapping[GestureCategory, str] = field(default_factory=dict)


def select_filler(
    lib: FillerLibrary, kind: FillerKind, state: SelectionState
) -> tuple[FillerEntry, SelectionState]:
    """Pick a filler of the requested kind, uniformly at random (seeded)."""
    pool = lib.entries_for(kind)
    value = _stream_value(state.seed, _FILLER_SALT, state.filler_draws)
    entry = pool[value % len(pool)]
    return entry, replace(state, filler_draws=state.filler_draws + 1)


def select_gesture(
    lib: GestureLibrary, mark: str, state: SelectionState
) -> tuple[GestureEntry, SelectionState]:
    """Resolve a mark to a gesture variant, avoiding an immediate repeat.

    Raises UnknownMarkError for marks absent from the library vocabulary.
    """
    category = lib.category_of(mark)
    if category is None:
        raise UnknownMarkError(mark)
    pool = lib.entries_for(category)
    last = state.last_gesture.get(category)
    if len(pool) >= 2 and last is not None:
        pool = tuple(e for e in pool if e.id != last) or pool
    value = _stream_value(state.seed, _GESTURE_SALT, state.gesture_draws)
    entry = pool[value % len(pool)]
    new_state = replace(
        state,
        gesture_draws=state.gesture_draws + 1,
        last_gesture={**state.last_gesture, category: entry.id},
    )
    return entry, new_state
