import random
import xml.etree.ElementTree as ET

import pytest

from helpers import random_bytes, random_tagged_text

from expressml.compiler import SsmlEnvelope, compile_utterance, wrap_body
from expressml.libraries import SelectionState
from expressml.parser import MAX_TAG_BYTES, parse_document
from expressml.pipeline import (
    ByteBudget,
    ConversationHistory,
    OutputSegment,
    SentenceBoundary,
    SessionConfig,
    SessionSummary,
    append_turn,
    collect_session,
    default_libraries,
    render_history,
    run_session,
)
from expressml.prompting import default_prompt
from expressml.providers import (
    HttpStreamingLlm,
    MissingCredentialsError,
    MockLlm,
    MockStt,
    MockTts,
    ProviderSuite,
    ScriptedLlm,
)

LIBS = default_libraries()


def cue_tuples(cues):
    return [(c.mark, c.gesture.id, c.char_offset, c.est_time_ms) for c in cues]


def offline(raw: str | bytes, seed: int, envelope: SsmlEnvelope | None = None):
    utterance, _ = compile_utterance(
        raw, LIBS.fillers, LIBS.gestures, envelope or SsmlEnvelope(), SelectionState(seed=seed)
    )
    return utterance


def assert_stream_equals_offline(segments, raw, seed, envelope=None):
    envelope = envelope or SsmlEnvelope()
    reference = offline(raw, seed, envelope)
    concat = "".join(s.ssml_fragment for s in segments)
    rewrapped = wrap_body(concat, envelope)
    ET.fromstring(rewrapped)
    got = parse_document(rewrapped)
    want = parse_document(reference.ssml)
    assert got.events == want.events
    assert cue_tuples(c for s in segments for c in s.cues) == cue_tuples(reference.cues)


# -- basic session behavior ------------------------------------------------------


def test_fixed_answer_in_seven_byte_chunks_matches_offline():
    raw = (
        'Video encoding compresses frames. <bookmark mark="pointImportant"/> '
        'The key step <filler type="thinking"> is prediction. Done!'
    )
    providers = ProviderSuite(llm=MockLlm(raw, chunk_bytes=7))
    segments, summary = collect_session("q", providers, LIBS, SessionConfig(seed=3))
    assert_stream_equals_offline(segments, raw, 3)
    assert summary.error is None
    assert summary.segment_count == len(segments)


def test_plain_text_single_sentence_yields_one_segment_no_cues():
    providers = ProviderSuite(llm=MockLlm("Hello.", chunk_bytes=64))
    segments, summary = collect_session("q", providers, LIBS, SessionConfig(seed=0))
    assert len(segments) == 1
    assert segments[0].cues == ()
    assert segments[0].ssml_fragment == "Hello."
    assert summary.utterance.plain_text == "Hello."


def test_empty_response_yields_no_segments():
    providers = ProviderSuite(llm=MockLlm("", chunk_bytes=8))
    segments, summary = collect_session("q", providers, LIBS, SessionConfig(seed=0))
    assert segments == []
    assert summary.segment_count == 0


def test_bookmark_lands_in_the_segment_of_its_sentence():
    sentences = [
        "One is first. ",
        "Two follows. ",
        'Three has <bookmark mark="pointImportant"/> a cue. ',
        "Four next. ",
        "Five ends.",
    ]
    raw = "".join(sentences)
    providers = ProviderSuite(llm=MockLlm(raw, chunk_bytes=5))
    segments, _ = collect_session("q", providers, LIBS, SessionConfig(seed=1))
    assert len(segments) == 5
    for index, segment in enumerate(segments):
        if index == 2:
            assert "bookmark" in segment.ssml_fragment
            assert len(segment.cues) == 1
        else:
            assert segment.cues == ()


def test_question_must_be_non_empty():
    providers = ProviderSuite(llm=MockLlm("x", chunk_bytes=2))
    with pytest.raises(ValueError):
        list(run_session("  ", providers, LIBS, SessionConfig()))


def test_summary_equals_fresh_offline_compile():
    raw = 'A thought <filler type="hesitation"> pause. <bookmark mark="wrapUp"/> End.'
    providers = ProviderSuite(llm=MockLlm(raw, chunk_bytes=11))
    _, summary = collect_session("q", providers, LIBS, SessionConfig(seed=9))
    assert summary.utterance == offline(raw, 9)
    assert summary.raw_response == raw


# -- streaming/offline equivalence -------------------------------------------------


@pytest.mark.parametrize("chunk_bytes", [1, 3, 7, 64, 4096])
def test_equivalence_across_chunk_sizes(chunk_bytes):
    rng = random.Random(chunk_bytes)
    for _ in range(20):
        raw = random_tagged_text(rng, hostile=True)
        providers = ProviderSuite(llm=MockLlm(raw, chunk_bytes=chunk_bytes))
        segments, summary = collect_session("q", providers, LIBS, SessionConfig(seed=5))
        assert_stream_equals_offline(segments, raw, 5)
        assert summary.utterance == offline(raw, 5)


def test_equivalence_under_byte_budget_policy():
    rng = random.Random(77)
    config = SessionConfig(seed=2, flush_policy=ByteBudget(MAX_TAG_BYTES))
    for _ in range(30):
        raw = random_tagged_text(rng, hostile=True, max_items=60)
        providers = ProviderSuite(llm=MockLlm(raw, chunk_bytes=9))
        segments, _ = collect_session("q", providers, LIBS, config)
        assert_stream_equals_offline(segments, raw, 2)


def test_byte_budget_flush_points_are_chunking_invariant():
    rng = random.Random(78)
    raw = random_tagged_text(rng, max_items=80)
    config = SessionConfig(seed=4, flush_policy=ByteBudget(300))
    fragment_sets = []
    for chunk_bytes in (1, 17, 4096):
        providers = ProviderSuite(llm=MockLlm(raw, chunk_bytes=chunk_bytes))
        segments, _ = collect_session("q", providers, LIBS, config)
        fragment_sets.append([s.ssml_fragment for s in segments])
    assert fragment_sets[0] == fragment_sets[1] == fragment_sets[2]


def test_byte_budget_validates_minimum():
    with pytest.raises(ValueError):
        ByteBudget(MAX_TAG_BYTES - 1)
    ByteBudget(MAX_TAG_BYTES)


def test_every_fragment_is_individually_balanced():
    rng = random.Random(79)
    for trial in range(40):
        raw = random_tagged_text(rng, hostile=True)
        policy = SentenceBoundary() if trial % 2 else ByteBudget(256)
        providers = ProviderSuite(llm=MockLlm(raw, chunk_bytes=4))
        segments, _ = collect_session(
            "q", providers, LIBS, SessionConfig(seed=trial, flush_policy=policy)
        )
        for segment in segments:
            ET.fromstring(wrap_body(segment.ssml_fragment, SsmlEnvelope()))


def test_terminator_inside_prosody_does_not_flush():
    raw = '<prosody rate="-10%">Wait. Inside here.</prosody> After close. Tail.'
    providers = ProviderSuite(llm=MockLlm(raw, chunk_bytes=6))
    segments, _ = collect_session("q", providers, LIBS, SessionConfig(seed=0))
    # the prosody span and the text up to "close." flush together
    assert "prosody" in segments[0].ssml_fragment
    assert "After close." in segments[0].ssml_fragment
    assert_stream_equals_offline(segments, raw, 0)


# -- latency ----------------------------------------------------------------------


def test_first_segment_before_full_stream_consumed():
    sentences = "".join(f"Sentence number {i} here. " for i in range(50))
    llm = MockLlm(sentences, chunk_bytes=24)
    providers = ProviderSuite(llm=llm)
    stream = run_session("q", providers, LIBS, SessionConfig(seed=0))
    first = next(stream)
    assert isinstance(first, OutputSegment)
    total_chunks = (len(sentences.encode()) + 23) // 24
    assert llm.served_chunks < total_chunks / 2
    rest = list(stream)
    assert isinstance(rest[-1], SessionSummary)


def test_first_segment_arrival_independent_of_response_length():
    pulled = []
    for count in (2, 50):
        text = "".join(f"Sentence {i} is right here. " for i in range(count))
        llm = MockLlm(text, chunk_bytes=16)
        stream = run_session("q", ProviderSuite(llm=llm), LIBS, SessionConfig(seed=0))
        next(stream)
        pulled.append(llm.served_chunks)
    assert pulled[0] == pulled[1]


# -- provider failure and hostile streams -------------------------------------------


def test_provider_failure_midstream_yields_error_summary():
    chunks = ["First sentence. ", "Second sen", "tence. ", "Third."]
    llm = ScriptedLlm(chunks, fail_after=2)
    segments, summary = collect_session("q", ProviderSuite(llm=llm), LIBS, SessionConfig())
    assert len(segments) == 1  # only the first completed sentence
    assert summary.error is not None
    assert "ConnectionError" in summary.error
    assert summary.utterance.plain_text.startswith("First sentence.")


def test_tts_failure_midstream_yields_error_summary():
    class FailingTts(MockTts):
        def __init__(self):
            super().__init__()
            self.calls = 0

        def synthesize(self, ssml):
            self.calls += 1
            if self.calls >= 2:
                raise RuntimeError("synth backend gone")
            return super().synthesize(ssml)

    raw = "One done. Two done. Three done."
    providers = ProviderSuite(llm=MockLlm(raw, chunk_bytes=8), tts=FailingTts())
    segments, summary = collect_session("q", providers, LIBS, SessionConfig())
    assert len(segments) == 2  # the failing segment is still emitted, then stop
    assert summary.error is not None and "RuntimeError" in summary.error


def test_hostile_byte_chunks_never_crash():
    rng = random.Random(83)
    for _ in range(50):
        chunks = [random_bytes(rng, 40) for _ in range(rng.randrange(1, 8))]
        llm = ScriptedLlm(chunks)
        segments, summary = collect_session(
            "q", ProviderSuite(llm=llm), LIBS, SessionConfig(seed=1)
        )
        assert summary.error is None
        for segment in segments:
            ET.fromstring(wrap_body(segment.ssml_fragment, SsmlEnvelope()))
        raw = b"".join(chunks)
        assert_stream_equals_offline(segments, raw, 1)


def test_unknown_marks_surface_in_session_diagnostics():
    raw = 'Text <bookmark mark="mystery"/> more.'
    segments, summary = collect_session(
        "q", ProviderSuite(llm=MockLlm(raw, chunk_bytes=8)), LIBS, SessionConfig()
    )
    assert any(d.code == "unknown-mark" for d in summary.diagnostics)
    assert all(s.cues == () for s in segments)
    assert any(d.code == "unknown-mark" for d in summary.utterance.diagnostics)


# -- history ------------------------------------------------------------------------


def test_append_turn_grows_until_limit():
    history = ConversationHistory(limit=10)
    history = append_turn(history, "q1", "a1")
    assert len(history.turns) == 1


def test_append_turn_evicts_oldest_at_limit():
    history = ConversationHistory(limit=10)
    for i in range(10):
        history = append_turn(history, f"q{i}", f"a{i}")
    history = append_turn(history, "q10", "a10")
    assert len(history.turns) == 10
    assert history.turns[0].question == "q1"
    assert history.turns[-1].question == "q10"


def test_rendered_prompt_contains_last_question_verbatim():
    history = ConversationHistory(limit=4)
    history = append_turn(history, "What is a codec?", "A codec converts media.")
    bundle = default_prompt(
        "And what about bitrate?",
        LIBS.fillers,
        LIBS.gestures,
        history_text=render_history(history),
    )
    assert "What is a codec?" in bundle.rendered
    assert "A codec converts media." in bundle.rendered


def test_session_accepts_history():
    history = append_turn(ConversationHistory(), "first?", "answer.")
    providers = ProviderSuite(llm=MockLlm("Fine.", chunk_bytes=4))
    segments, summary = collect_session("second?", providers, LIBS, SessionConfig(), history)
    assert summary.error is None


# -- providers ----------------------------------------------------------------------


def test_mock_tts_fires_bookmarks_at_estimates():
    raw = 'one two three four five <bookmark mark="wrapUp"/> tail.'
    providers = ProviderSuite(llm=MockLlm(raw, chunk_bytes=16), tts=MockTts())
    segments, _ = collect_session("q", providers, LIBS, SessionConfig(seed=0))
    fired = [fb for s in segments for fb in s.fired_bookmarks]
    assert [mark for mark, _ in fired] == ["wrapUp"]
    assert fired[0][1] == pytest.approx(5 * 400.0)


def test_mock_tts_is_deterministic():
    tts = MockTts()
    ssml = wrap_body('hello <bookmark mark="m"/>', SsmlEnvelope())
    assert tts.synthesize(ssml) == tts.synthesize(ssml)


def test_mock_stt_returns_transcript():
    assert MockStt("hello there").transcribe(b"\x00\x01") == "hello there"


def test_http_llm_requires_env_configuration():
    with pytest.raises(MissingCredentialsError):
        HttpStreamingLlm.from_env(environ={})


def test_http_llm_decodes_sse_stream():
    sse = (
        b'data: {"choices":[{"delta":{"content":"Hel"}}]}\n'
        b'data: {"choices":[{"delta":{"content":"lo."}}]}\n'
        b"data: [DONE]\n"
    )

    def transport(request):
        assert request.get_method() == "POST"
        yield sse[:30]
        yield sse[30:]

    llm = HttpStreamingLlm("http://x/v1/chat", "m", "k", transport=transport)
    assert list(llm.stream("prompt")) == ["Hel", "lo."]


def test_http_llm_ignores_malformed_sse_lines():
    def transport(request):
        yield b"data: not json\n"
        yield b'data: {"choices":[{"delta":{"content":"ok"}}]}\n'
        yield b": comment\n"

    llm = HttpStreamingLlm("http://x", "m", "k", transport=transport)
    assert list(llm.stream("p")) == ["ok"]
