"""Construction of the three-part prompt that elicits tagged responses.

A prompt is assembled from Background Information (role, output format,
response style, scenario), Expression Information for each modality
(usage knowledge, the tag set, a summary of the corresponding library, and
worked examples), and the User Question appended as the final section.
Rendering goes through a plain-text template with named placeholders so the
wording can be edited on disk without code changes; the section order is
fixed: background, speech, gesture, question.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from .libraries import FillerLibrary, GestureLibrary
from .markup import TAG_SCHEMAS, FillerKind, TagSchema

TEMPLATE_RESOURCE = "prompt_template.txt"

SPEECH_TAG_NAMES = ("break", "prosody", "filler")
GESTURE_TAG_NAMES = ("bookmark",)


@dataclass(frozen=True)
class BackgroundInfo:
    """Inherent attributes of the agent plus the scene it teaches in."""

    role_definition: str
    output_format: str
    response_style: str = ""
    scenario_description: str = ""

    def __post_init__(self) -> None:
        if not self.role_definition.strip():
            raise ValueError("role_definition must be non-empty")
        if not self.output_format.strip():
            raise ValueError("output_format must be non-empty")


@dataclass(frozen=True)
class ModalityBlock:
    """Knowledge + annotations for one modality, plus its grounding data."""

    knowledge: str
    annotations: tuple[str, ...]
    tag_set_description: str
    library_description: str

    def __post_init__(self) -> None:
        if not self.knowledge.strip():
            raise ValueError("knowledge must be non-empty")
        if not self.annotations:
            raise ValueError("at least one annotation example is required")


@dataclass(frozen=True)
class PromptBundle:
    background: BackgroundInfo
    speech: ModalityBlock
    gesture: ModalityBlock
    question: str
    rendered: str


def render_tag_set(schemas: Iterable[TagSchema]) -> str:
    """One line per tag: its canonical form plus attribute value domains."""
    return "\n".join(f"- {s.example}  ({s.attributes})" for s in schemas)


def render_library_summary(lib: FillerLibrary | GestureLibrary) -> str:
    """Deterministic, stable-ordered listing of a library's contents."""
    if isinstance(lib, FillerLibrary):
        lines = []
        for kind in FillerKind:
            surfaces = ", ".join(f'"{e.surface}"' for e in lib.entries_for(kind))
            lines.append(f"- {kind.value}: {surfaces}")
        return "\n".join(lines)
    lines = []
    marks_by_category: dict[str, list[str]] = {}
    for mark, category in lib.mark_to_category.items():
        marks_by_category.setdefault(category.value, []).append(mark)
    seen: list[str] = []
    for entry in lib.entries:
        if entry.category.value not in seen:
            seen.append(entry.category.value)
    for category in seen:
        variants = ", ".join(
            e.id for e in lib.entries if e.category.value == category
        )
        marks = ", ".join(sorted(marks_by_category.get(category, [])))
        lines.append(f"- {category} (marks: {marks}): {variants}")
    return "\n".join(lines)


def load_template(path: str | Path | None = None) -> str:
    """Read the prompt template (bundled default when no path is given)."""
    if path is not None:
        return Path(path).read_text(encoding="utf-8")
    return (
        resources.files("expressml")
        .joinpath("data", TEMPLATE_RESOURCE)
        .read_text(encoding="utf-8")
    )


def build_prompt(
    background: BackgroundInfo,
    speech: ModalityBlock,
    gesture: ModalityBlock,
    question: str,
    *,
    history_text: str = "",
    template: str | None = None,
) -> PromptBundle:
    """Render the full prompt; byte-stable for identical inputs.

    Section order is background, then expression information (speech before
    gesture), then the question as the final section.  ``history_text`` is
    inserted after the background section when a conversation is multi-turn;
    the pipeline owns its formatting.
    """
    if not question.strip():
        raise ValueError("question is empty; nothing to ask")
    template = template if template is not None else load_template()
    history_section = ""
    if history_text.strip():
        history_section = f"# Conversation So Far\n{history_text.rstrip()}\n\n"
    rendered = template.format(
        role_definition=background.role_definition,
        output_format=background.output_format,
        response_style=background.response_style,
        scenario_description=background.scenario_description,
        history_section=history_section,
        speech_knowledge=speech.knowledge,
        speech_tag_set=speech.tag_set_description,
        speech_library=speech.library_description,
        speech_annotations="\n".join(speech.annotations),
        gesture_knowledge=gesture.knowledge,
        gesture_tag_set=gesture.tag_set_description,
        gesture_library=gesture.library_description,
        gesture_annotations="\n".join(gesture.annotations),
        question=question,
    )
    return PromptBundle(background, speech, gesture, question, rendered)


def default_background() -> BackgroundInfo:
    return BackgroundInfo(
        role_definition=(
            "You are a patient, friendly teacher in a virtual classroom, "
            "answering a student's questions about a multimedia communication course."
        ),
        output_format=(
            "Answer in plain sentences enriched with the speech and gesture tags "
            "described below. Attribute values must be wrapped in double quotes. "
            "Use no markup other than these tags."
        ),
        response_style=(
            "Warm and conversational; explain like a teacher thinking aloud, "
            "not like someone reading a script. Keep answers focused."
        ),
        scenario_description=(
            "A virtual classroom. The student reads the topic panel, then asks "
            "you questions; you answer with speech and matching gestures."
        ),
    )


def default_speech_block(lib: FillerLibrary) -> ModalityBlock:
    schemas = [s for s in TAG_SCHEMAS if s.name in SPEECH_TAG_NAMES]
    return ModalityBlock(
        knowledge=(
            "Use speech tags to adapt delivery to the content. Insert a pause "
            'with <break time="500ms"> before and while explaining a difficult '
            "concept, and add a filler word there so you sound like you are "
            "thinking. To emphasize a key point, wrap it in a prosody tag with "
            "a slower rate, a louder volume, and a slightly raised pitch. Do "
            "not change prosody for routine sentences."
        ),
        annotations=(
            'Difficult concept: "This part is tricky. <break time="500ms"> '
            '<filler type="thinking"> Let us go through it step by step."',
            'Key point: "<prosody rate="-10%" volume="loud" pitch="+3%">This '
            'determines the final video quality.</prosody>"',
            'Transition: "<filler type="transition"> that covers encoding; now '
            'decoding."',
        ),
        tag_set_description=render_tag_set(schemas),
        library_description=render_library_summary(lib),
    )


def default_gesture_block(lib: GestureLibrary) -> ModalityBlock:
    schemas = [s for s in TAG_SCHEMAS if s.name in GESTURE_TAG_NAMES]
    return ModalityBlock(
        knowledge=(
            "Use gesture tags to act while you speak. Place a bookmark tag "
            "exactly where the gesture should fire: a thinking gesture when "
            "you pause to reason, an emphasizing gesture on key points, and a "
            "summarizing gesture when wrapping up. Pick the mark from the "
            "gesture library below; one gesture per idea, never two in a row."
        ),
        annotations=(
            'Emphasis: "Now pay attention, <bookmark mark="pointImportant"> '
            'this step decides the final quality."',
            'Thinking: "<bookmark mark="thinkingPose"> Hmm, how best to put '
            'this..."',
            'Summary: "<bookmark mark="wrapUp"> To sum up, we covered three '
            'steps today."',
        ),
        tag_set_description=render_tag_set(schemas),
        library_description=render_library_summary(lib),
    )


def default_prompt(
    question: str,
    fillers: FillerLibrary,
    gestures: GestureLibrary,
    *,
    history_text: str = "",
    template: str | None = None,
) -> PromptBundle:
    """Build the fully rendered default prompt for one question."""
    return build_prompt(
        default_background(),
        default_speech_block(fillers),
        default_gesture_block(gestures),
        question,
        history_text=history_text,
        template=template,
    )
