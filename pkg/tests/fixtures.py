"""Hand-built fixtures shared by the unit and acceptance tests."""

from __future__ import annotations

from classroom_speech.features import RecordingTurns, Turn
from classroom_speech.ingest import Role

T, C = Role.TEACHER, Role.CHILD

# (role, start_s, end_s, text): a one-minute teacher/child exchange
DIALOGUE = [
    (T, 0.0, 2.0, "What color is the ball?"),
    (C, 2.5, 3.5, "the ball is red"),
    (T, 4.0, 5.0, "Good job."),
    (T, 5.5, 7.0, "Do you want more?"),
    (C, 7.5, 8.0, "yes"),
    (C, 12.0, 13.0, "Can I have the truck?"),
    (T, 14.0, 15.0, "Yes you can have it"),
    (T, 20.0, 21.0, "Where is it?"),
    (T, 21.5, 22.0, "Is it here?"),
    (C, 22.0, 23.0, "It's here"),
    (C, 30.0, 31.0, "look!"),
    (T, 30.5, 32.0, "wow"),
]
DIALOGUE_DURATION_S = 60.0

# Enumerated by hand from DIALOGUE. Utterance 3 ("Good job.") reaches the
# child's "yes" at exactly 2.5 s and utterance 8 reaches "It's here", but
# both responses are credited to the later prior (4 and 9).
DIALOGUE_RESPONSES = [
    # (prior index, response index, latency_s, shared word types)
    (0, 1, 0.5, 3),
    (1, 2, 0.5, 0),
    (3, 4, 0.5, 0),
    (5, 6, 1.0, 2),
    (8, 9, 0.0, 1),
    (10, 11, 0.0, 0),
]

DIALOGUE_EXPECTED = {
    T: dict(
        total_utterances=7,
        questions=4,
        non_questions=3,
        mlu=23 / 7,
        words_per_minute=23.0,
        responses_received_to_questions=3,
        responses_received_to_non_questions=0,
        prop_questions_responded=0.75,
        prop_non_questions_responded=0.0,
        mean_response_latency_s=1 / 3,
        prop_question_responses_zero_alignment=1 / 3,
        question_proportion=4 / 7,
        questions_per_min=4.0,
        non_questions_per_min=3.0,
    ),
    C: dict(
        total_utterances=5,
        questions=1,
        non_questions=4,
        mlu=2.6,
        words_per_minute=13.0,
        responses_received_to_questions=1,
        responses_received_to_non_questions=2,
        prop_questions_responded=1.0,
        prop_non_questions_responded=0.5,
        mean_response_latency_s=0.5,
        prop_question_responses_zero_alignment=0.0,
        question_proportion=0.2,
        questions_per_min=1.0,
        non_questions_per_min=4.0,
    ),
}


def dialogue_turns() -> list[Turn]:
    return [Turn.from_seconds(s, e, role, text, id=f"u{i}") for i, (role, s, e, text) in enumerate(DIALOGUE)]


def dialogue_recording() -> RecordingTurns:
    return RecordingTurns("dialogue", DIALOGUE_DURATION_S, dialogue_turns())


def question_count_recording(questions: int, total: int, role: Role = C, spacing_s: float = 10.0) -> RecordingTurns:
    """``total`` well-separated utterances of ``role``, the first ``questions`` of them questions."""
    turns = [
        Turn.from_seconds(i * spacing_s, i * spacing_s + 1, role, "is it?" if i < questions else "it is", id=f"q{i}")
        for i in range(total)
    ]
    return RecordingTurns("counts", total * spacing_s, turns)
