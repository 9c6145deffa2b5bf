#!/usr/bin/env python3
"""Compile one tagged answer into SSML, gesture cues, and a timeline."""

from expressml import (
    SelectionState,
    compile_utterance,
    default_filler_library,
    default_gesture_library,
)

ANSWER = (
    "That is a subtle point. "
    '<break time="500ms"/> <filler type="thinking"> '
    'The encoder <bookmark mark="pointImportant"/> predicts each frame '
    "from its neighbours, so only the differences are stored. "
    '<bookmark mark="wrapUp"/> In short: prediction plus residual coding.'
)


def main() -> None:
    fillers = default_filler_library()
    gestures = default_gesture_library()
    utterance, _ = compile_utterance(
        ANSWER, fillers, gestures, state=SelectionState(seed=7)
    )

    print("SSML document:\n")
    print(utterance.ssml)
    print("\nspoken text:\n")
    print(utterance.plain_text)
    print("\ngesture cues (mark, variant, char offset, est ms):")
    for cue in utterance.cues:
        print(
            f"  {cue.mark:>15}  {cue.gesture.id:<20} "
            f"@char {cue.char_offset:<4} @ {cue.est_time_ms:8.1f} ms"
        )
    print("\nfirst timeline stamps:")
    for event, ms in utterance.timeline[:8]:
        print(f"  {ms:8.1f} ms  {event}")


if __name__ == "__main__":
    main()
