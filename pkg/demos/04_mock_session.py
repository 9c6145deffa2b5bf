#!/usr/bin/env python3
"""Run a full mock session: streamed chunks in, SSML segments + cues out.

The mock LLM replays a canned tagged answer in 16-byte chunks; the mock TTS
"fires" bookmark events at word-rate timing estimates.  The final summary is
the offline compilation of the whole response and matches the streamed
segments event for event.
"""

from expressml import (
    MockLlm,
    MockTts,
    OutputSegment,
    ProviderSuite,
    SessionConfig,
    default_libraries,
    run_session,
)

CANNED_ANSWER = (
    "Let me think about that. "
    '<filler type="thinking"> Encoding removes redundancy between frames. '
    '<bookmark mark="pointImportant"/> The key trade-off is bitrate against quality. '
    '<bookmark mark="wrapUp"/> So: smaller files, some loss. Any other questions?'
)


def main() -> None:
    providers = ProviderSuite(
        llm=MockLlm(CANNED_ANSWER, chunk_bytes=16),
        tts=MockTts(),
    )
    for item in run_session(
        "What is video encoding?",
        providers,
        default_libraries(),
        SessionConfig(seed=11),
    ):
        if isinstance(item, OutputSegment):
            print(f"segment {item.segment_index}:")
            print(f"  fragment: {item.ssml_fragment}")
            for cue in item.cues:
                print(f"  cue: {cue.mark} -> {cue.gesture.id} @ {cue.est_time_ms:.0f} ms")
            for mark, ms in item.fired_bookmarks:
                print(f"  tts fired: {mark} at {ms:.0f} ms into the fragment")
        else:
            print("\nsummary:")
            print(f"  segments: {item.segment_count}")
            print(f"  spoken text: {item.utterance.plain_text}")
            print(f"  error: {item.error}")


if __name__ == "__main__":
    main()
