"""expressml: compile speech/gesture tagged text into SSML and gesture cues.

The package turns LLM responses written in a small inline tag language
(pauses, prosody spans, filler words, gesture bookmarks) into SSML documents
for a TTS engine plus a synchronized gesture cue timeline, with an
incremental parser for chunked streaming output, prompt construction that
elicits the tags in the first place, and a mock-driven end-to-end pipeline.
"""

from .compiler import (
    CompiledUtterance,
    GestureCue,
    SsmlEnvelope,
    compile_utterance,
    emit_body,
    emit_ssml,
    expand_fillers,
    resolve_gestures,
    wrap_body,
)
from .libraries import (
    FillerEntry,
    FillerLibrary,
    GestureCategory,
    GestureEntry,
    GestureLibrary,
    LibraryError,
    SelectionState,
    UnknownMarkError,
    default_config,
    default_filler_library,
    default_gesture_library,
    load_filler_library,
    load_gesture_library,
    read_config,
    select_filler,
    select_gesture,
)
from .markup import (
    Bookmark,
    Break,
    Filler,
    FillerKind,
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
    normalize_attribute_value,
    spoken_text,
)
from .parser import MAX_TAG_BYTES, StreamParser, parse_document
from .pipeline import (
    ByteBudget,
    ConversationHistory,
    Libraries,
    OutputSegment,
    SentenceBoundary,
    SessionConfig,
    SessionSummary,
    Turn,
    append_turn,
    collect_session,
    default_libraries,
    render_history,
    run_session,
)
from .prompting import (
    BackgroundInfo,
    ModalityBlock,
    PromptBundle,
    build_prompt,
    default_prompt,
    render_library_summary,
    render_tag_set,
)
from .providers import (
    HttpStreamingLlm,
    LlmProvider,
    MissingCredentialsError,
    MockLlm,
    MockStt,
    MockTts,
    ProviderSuite,
    ScriptedLlm,
    SttProvider,
    TtsProvider,
    TtsResult,
)
from .timing import TimingParams, estimate_timeline

__version__ = "0.1.0"
