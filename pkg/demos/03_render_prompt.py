#!/usr/bin/env python3
"""Render the default three-part prompt that elicits tagged responses."""

from expressml import default_filler_library, default_gesture_library, default_prompt


def main() -> None:
    bundle = default_prompt(
        "What is video encoding?",
        default_filler_library(),
        default_gesture_library(),
    )
    print(bundle.rendered)


if __name__ == "__main__":
    main()
