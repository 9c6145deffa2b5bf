"""Shared randomized-input generators for parser/pipeline tests."""

from __future__ import annotations

import random

WORDS = [
    "video", "encoding", "compresses", "frames", "the", "a", "key", "point",
    "bitrate", "quality", "codec", "stream", "loss", "脉冲", "编码", "naïve",
    "Δt", "data", "so", "now", "then",
]
PUNCT = [". ", "! ", "? ", ", ", " ", "。", "！ "]
VALID_TAGS = [
    '<break time="500ms"/>',
    '<break time="120ms">',
    '<break time= "80ms" />',
    '<filler type="thinking">',
    '<filler type="hesitation"/>',
    '<filler type="transition">',
    '<bookmark mark="pointImportant">',
    '<bookmark mark="thinkingPose"/>',
    '<bookmark mark="wrapUp">',
    '<bookmark mark="mystery-mark">',
]
PROSODY_OPENS = [
    '<prosody rate="-10%" volume="medium" pitch="+3%">',
    '<prosody rate="-50%" volume="loud">',
    '<prosody pitch="-5%">',
    "<prosody>",
]
HOSTILE = [
    "<blink>",
    '<break time="oops">',
    '<break when="500ms">',
    "<break>",
    "</prosody>",
    "<",
    "< ",
    "a < b",
    "&amp;",
    "&lt;tag&gt;",
    "&nope;",
    "&am",
    "5 > 3",
    '<bookmark mark="9bad">',
    '<prosody rate="-10%" rate="+5%">x</prosody>',
    '<break time="9000ms">',
]


def random_tagged_text(rng: random.Random, hostile: bool = False, max_items: int = 30) -> str:
    """Compose a tagged response; hostile mode mixes in malformed markup."""
    parts: list[str] = []
    depth = 0
    for _ in range(rng.randrange(1, max_items)):
        roll = rng.random()
        if roll < 0.55:
            parts.append(rng.choice(WORDS))
            parts.append(rng.choice(PUNCT))
        elif roll < 0.7:
            parts.append(rng.choice(VALID_TAGS))
        elif roll < 0.8 and depth < 2:
            parts.append(rng.choice(PROSODY_OPENS))
            depth += 1
        elif roll < 0.9 and depth > 0:
            parts.append("</prosody>")
            depth -= 1
        elif hostile:
            parts.append(rng.choice(HOSTILE))
        else:
            parts.append(rng.choice(WORDS))
    parts.extend("</prosody>" for _ in range(depth))
    return "".join(parts)


# (piece, spoken-text contribution) pairs whose behavior is position-independent
TRACKED_PIECES = [
    ("hello world ", "hello world "),
    ("naïve Δt 编码 ", "naïve Δt 编码 "),
    ("a&lt;b&gt;c&amp;d ", "a<b>c&d "),
    ("x&nope;y ", "x&nope;y "),
    ("5 > 3 ", "5 > 3 "),
    ("a < b ", "a < b "),
    ('<break time="500ms"/>', ""),
    ('<break time="9000ms">', ""),
    ('<filler type="thinking">', ""),
    ('<bookmark mark="wrapUp">', ""),
    ("<blink>", "<blink>"),
    ('<break time="oops">', '<break time="oops">'),
    ('<break when="5ms">', '<break when="5ms">'),
    ("<break>", "<break>"),
    ('<bookmark mark="9bad">', '<bookmark mark="9bad">'),
    ('<prosody rate="-10%">inner</prosody>', "inner"),
    ("</prosody>", "</prosody>"),  # stray close at depth 0 passes through
]


def random_tracked_text(rng: random.Random, max_items: int = 25) -> tuple[str, str]:
    """Compose input whose exact spoken text is known in advance."""
    source_parts: list[str] = []
    spoken_parts: list[str] = []
    for _ in range(rng.randrange(1, max_items)):
        piece, contribution = rng.choice(TRACKED_PIECES)
        source_parts.append(piece)
        spoken_parts.append(contribution)
    return "".join(source_parts), "".join(spoken_parts)


def random_partition(rng: random.Random, data: bytes) -> list[bytes]:
    """Split data into random-size byte chunks (any boundary, even mid-char)."""
    chunks: list[bytes] = []
    pos = 0
    while pos < len(data):
        size = rng.randrange(1, 12)
        chunks.append(data[pos : pos + size])
        pos += size
    return chunks


def random_bytes(rng: random.Random, max_len: int = 300) -> bytes:
    return bytes(rng.randrange(256) for _ in range(rng.randrange(max_len)))
