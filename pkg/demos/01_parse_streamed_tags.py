#!/usr/bin/env python3
"""Feed a tagged response to the incremental parser in tiny chunks.

Shows that events come out as soon as they are unambiguous, that a tag split
across chunks is held back until it completes, and that the result matches
the whole-string parse.
"""

from expressml import StreamParser, coalesce_text, parse_document

RESPONSE = (
    'Good question. <break time="500ms"/> <filler type="thinking"> '
    'Video encoding <bookmark mark="pointImportant"/> compresses frames '
    'by <prosody rate="-10%" volume="loud">removing redundancy</prosody>.'
)


def main() -> None:
    parser = StreamParser()
    collected = []
    print("feeding 9-byte chunks:")
    data = RESPONSE.encode("utf-8")
    for start in range(0, len(data), 9):
        chunk = data[start : start + 9]
        events = parser.feed(chunk)
        collected.extend(events)
        if events:
            print(f"  {chunk!r:>14} -> {events}")
        else:
            print(f"  {chunk!r:>14} -> (held: {parser.pending_buffer!r})")
    tail, diagnostics = parser.finish()
    collected.extend(tail)

    print("\nwhole-string parse gives the same canonical events:")
    whole = parse_document(RESPONSE)
    assert coalesce_text(collected) == whole.events
    for event in whole.events:
        print(f"  {event}")
    print(f"\ndiagnostics: {diagnostics or 'none'}")


if __name__ == "__main__":
    main()
