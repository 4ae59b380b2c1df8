"""Teacher and child speech features: MLU, speech rate, questions, responses.

A feature row for role R describes R's own utterances plus the responses
those utterances *received* from the other role: the child row counts
teacher responses to child questions and the teacher's latency, and vice
versa. Per-recording tallies add up associatively into corpus totals.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable, Sequence

from .align import AlignedTimeline, MergedAnnotation
from .errors import InputError, MetricError
from .ingest import Role, Source, Utterance, to_deciseconds
from .text import STOPWORDS, classify_question, normalize_tokens

__all__ = [
    "classify_question",
    "Turn",
    "RecordingTurns",
    "ResponseEvent",
    "FeatureSummary",
    "FeatureTally",
    "mlu",
    "words_per_minute",
    "lexical_overlap",
    "detect_responses",
    "tally_recording",
    "feature_table",
    "turns_from_timeline",
]

ROLES = (Role.TEACHER, Role.CHILD)
RESPONSE_WINDOW_S = 2.5
STOPWORD_MODES = ("all", "content")
ZERO_ALIGNMENT_SCOPES = ("question_responses", "all_responses")


@dataclass(frozen=True)
class Turn:
    """A role-labelled utterance on a recording's clock."""

    start_ds: int
    end_ds: int
    role: Role
    tokens: tuple[str, ...] = ()
    is_question: bool = False
    id: str = ""

    @classmethod
    def from_utterance(cls, u: Utterance, role: Role | None = None) -> "Turn":
        return cls(u.start_ds, u.end_ds, role or u.role, u.tokens, u.is_question, u.id)

    @classmethod
    def from_seconds(cls, start_s: float, end_s: float, role: Role, text: str = "", id: str = "") -> "Turn":
        return cls(to_deciseconds(start_s), to_deciseconds(end_s), role, tuple(normalize_tokens(text)), classify_question(text), id)


@dataclass
class RecordingTurns:
    """Input to :func:`feature_table` for one recording.

    ``paired_lengths`` optionally overrides the MLU denominator per role with
    one length per aligned slot, omissions counted as 0.
    """

    recording_id: str
    duration_s: float
    turns: list[Turn]
    paired_lengths: dict[Role, list[int]] | None = None


def mlu(items: Iterable[Sequence[str] | int | None], penalize_omissions: bool = False) -> float:
    """Mean utterance length in words.

    ``items`` are token sequences or precomputed lengths. ``None`` marks an
    utterance this side missed; it counts as length 0 when
    ``penalize_omissions`` is set and is an error otherwise.
    """
    lengths = []
    for item in items:
        if item is None:
            if not penalize_omissions:
                raise ValueError("omitted utterance (None) given without penalize_omissions")
            lengths.append(0)
        else:
            lengths.append(item if isinstance(item, int) else len(item))
    if not lengths:
        raise MetricError("MLU of an empty utterance set")
    return sum(lengths) / len(lengths)


def words_per_minute(utterances: Iterable[Sequence[str]] | int, duration_s: float) -> float:
    """Tokens per minute of total clip time (silence included)."""
    if duration_s <= 0:
        raise MetricError("duration must be positive")
    n = utterances if isinstance(utterances, int) else sum(len(u) for u in utterances)
    return n / (duration_s / 60)


def lexical_overlap(response_tokens: Iterable[str], prior_tokens: Iterable[str], stopword_mode: str = "all") -> int:
    """Number of word types shared by the two utterances."""
    shared = set(response_tokens) & set(prior_tokens)
    if stopword_mode == "content":
        shared -= STOPWORDS
    elif stopword_mode != "all":
        raise ValueError(f"stopword_mode must be one of {STOPWORD_MODES}")
    return len(shared)


@dataclass(frozen=True)
class ResponseEvent:
    prior: Turn
    response: Turn
    latency_ds: int
    overlap_words: int

    @property
    def latency_s(self) -> float:
        return self.latency_ds / 10

    @property
    def prior_is_question(self) -> bool:
        return self.prior.is_question

    @property
    def zero_alignment(self) -> bool:
        return self.overlap_words == 0


def _sorted_turns(turns: Iterable[Turn]) -> list[Turn]:
    return sorted((t for t in turns if t.role in ROLES), key=lambda t: (t.start_ds, t.end_ds))


def detect_responses(
    turns: Iterable[Turn], window_s: float = RESPONSE_WINDOW_S, stopword_mode: str = "all"
) -> list[ResponseEvent]:
    """Find cross-role responses.

    The candidate response to utterance u is the first later utterance of
    the other role; it counts if it starts at most ``window_s`` after u ends
    (overlapping speech has latency 0). A response is credited only to the
    latest utterance that qualifies for it.
    """
    window = to_deciseconds(window_s)
    ordered = _sorted_turns(turns)
    next_of: dict[Role, int | None] = {r: None for r in ROLES}
    candidate: list[int | None] = [None] * len(ordered)
    for i in range(len(ordered) - 1, -1, -1):
        other = Role.CHILD if ordered[i].role is Role.TEACHER else Role.TEACHER
        candidate[i] = next_of[other]
        next_of[ordered[i].role] = i

    credited: dict[int, int] = {}
    for i, j in enumerate(candidate):
        if j is None:
            continue
        latency = max(0, ordered[j].start_ds - ordered[i].end_ds)
        if latency <= window:
            credited[j] = i  # i increases, so the latest prior wins

    events = []
    for j, i in sorted(credited.items(), key=lambda kv: kv[1]):
        u, v = ordered[i], ordered[j]
        events.append(
            ResponseEvent(u, v, max(0, v.start_ds - u.end_ds), lexical_overlap(v.tokens, u.tokens, stopword_mode))
        )
    return events


@dataclass
class FeatureTally:
    """Additive per-role counts from which a :class:`FeatureSummary` is derived."""

    role: Role
    duration_s: float = 0.0
    utterances: int = 0
    questions: int = 0
    tokens: int = 0
    mlu_words: int = 0
    mlu_slots: int = 0
    responded_questions: int = 0
    responded_non_questions: int = 0
    latency_ds_sum: int = 0
    responses: int = 0
    alignment_pool: int = 0
    zero_alignment: int = 0

    def __add__(self, other: "FeatureTally") -> "FeatureTally":
        if other.role is not self.role:
            raise ValueError("cannot add tallies of different roles")
        out = FeatureTally(self.role)
        for f in fields(self):
            if f.name != "role":
                setattr(out, f.name, getattr(self, f.name) + getattr(other, f.name))
        return out

    def summary(self) -> "FeatureSummary":
        return FeatureSummary.from_tally(self)


def _ratio(num: float, den: float) -> float | None:
    return num / den if den else None


@dataclass(frozen=True)
class FeatureSummary:
    role: Role
    total_utterances: int
    questions: int
    non_questions: int
    mlu: float | None
    words_per_minute: float | None
    responses_received_to_questions: int
    responses_received_to_non_questions: int
    prop_questions_responded: float | None
    prop_non_questions_responded: float | None
    mean_response_latency_s: float | None
    prop_question_responses_zero_alignment: float | None
    question_proportion: float | None = None
    questions_per_min: float | None = None
    non_questions_per_min: float | None = None

    @classmethod
    def from_tally(cls, t: FeatureTally) -> "FeatureSummary":
        non_q = t.utterances - t.questions
        minutes = t.duration_s / 60
        if t.utterances == 0:
            return cls(t.role, 0, 0, 0, None, None, 0, 0, None, None, None, None)
        return cls(
            role=t.role,
            total_utterances=t.utterances,
            questions=t.questions,
            non_questions=non_q,
            mlu=_ratio(t.mlu_words, t.mlu_slots),
            words_per_minute=_ratio(t.tokens, minutes),
            responses_received_to_questions=t.responded_questions,
            responses_received_to_non_questions=t.responded_non_questions,
            prop_questions_responded=_ratio(t.responded_questions, t.questions),
            prop_non_questions_responded=_ratio(t.responded_non_questions, non_q),
            mean_response_latency_s=_ratio(t.latency_ds_sum, 10 * t.responses),
            prop_question_responses_zero_alignment=_ratio(t.zero_alignment, t.alignment_pool),
            question_proportion=t.questions / t.utterances,
            questions_per_min=_ratio(t.questions, minutes),
            non_questions_per_min=_ratio(non_q, minutes),
        )

    def as_row(self) -> dict:
        return {f.name: (getattr(self, f.name).value if f.name == "role" else getattr(self, f.name)) for f in fields(self)}


def tally_recording(
    rec: RecordingTurns,
    window_s: float = RESPONSE_WINDOW_S,
    stopword_mode: str = "all",
    zero_alignment_scope: str = "question_responses",
) -> dict[Role, FeatureTally]:
    if zero_alignment_scope not in ZERO_ALIGNMENT_SCOPES:
        raise ValueError(f"zero_alignment_scope must be one of {ZERO_ALIGNMENT_SCOPES}")
    tallies = {r: FeatureTally(r, duration_s=rec.duration_s) for r in ROLES}
    for t in rec.turns:
        if t.role not in tallies:
            continue
        tally = tallies[t.role]
        tally.utterances += 1
        tally.questions += t.is_question
        tally.tokens += len(t.tokens)
    for role, tally in tallies.items():
        if rec.paired_lengths is not None:
            lengths = rec.paired_lengths.get(role, [])
            tally.mlu_words, tally.mlu_slots = sum(lengths), len(lengths)
        else:
            tally.mlu_words, tally.mlu_slots = tally.tokens, tally.utterances

    for ev in detect_responses(rec.turns, window_s, stopword_mode):
        tally = tallies[ev.prior.role]
        if ev.prior_is_question:
            tally.responded_questions += 1
        else:
            tally.responded_non_questions += 1
        tally.latency_ds_sum += ev.latency_ds
        tally.responses += 1
        if ev.prior_is_question or zero_alignment_scope == "all_responses":
            tally.alignment_pool += 1
            tally.zero_alignment += ev.zero_alignment
    return tallies


def feature_table(
    recordings: Iterable[RecordingTurns],
    window_s: float = RESPONSE_WINDOW_S,
    stopword_mode: str = "all",
    zero_alignment_scope: str = "question_responses",
) -> dict[Role, FeatureSummary]:
    """Pool recordings and summarize each role (teacher first)."""
    totals = {r: FeatureTally(r) for r in ROLES}
    for rec in recordings:
        for role, tally in tally_recording(rec, window_s, stopword_mode, zero_alignment_scope).items():
            totals[role] = totals[role] + tally
    return {r: totals[r].summary() for r in ROLES}


METHODS = ("transcriber", "expert")


def turns_from_timeline(
    tl: AlignedTimeline,
    method: str,
    classifier: str = "expert",
    penalize_omissions: bool = True,
) -> RecordingTurns:
    """Role-labelled turns for one transcription ``method`` of a timeline.

    ``expert`` uses the expert's own segments and roles. ``transcriber`` uses
    anchor segments labelled by the ``classifier`` stream's merged role;
    anchors the classifier does not cover are left out. With
    ``penalize_omissions`` (and both streams present) MLU is taken over
    aligned slots with a role, a side that missed the slot counting 0 words.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if classifier not in ("expert", "diarizer"):
        raise ValueError("classifier must be 'expert' or 'diarizer'")
    if method == "expert" or classifier == "expert":
        if not tl.has(Source.EXPERT):
            raise InputError(f"{tl.recording_id}: timeline has no expert stream")
    if method == "transcriber" and classifier == "diarizer" and not tl.has(Source.DIARIZER):
        raise InputError(f"{tl.recording_id}: timeline has no diarizer stream")

    turns: list[Turn] = []
    paired: dict[Role, list[int]] = {r: [] for r in ROLES}
    for unit in tl.units:
        if method == "expert":
            if unit.expert is not None:
                turns.extend(Turn.from_utterance(m) for m in unit.expert.members)
                if unit.expert.role in paired:
                    paired[unit.expert.role].append(len(unit.expert.tokens))
            continue
        label = unit.expert if classifier == "expert" else unit.diarizer
        if label is None or label.role not in paired:
            continue
        if unit.anchor is not None:
            turns.append(Turn.from_utterance(unit.anchor, label.role))
        paired[label.role].append(len(unit.anchor.tokens) if unit.anchor else 0)

    both = tl.has(Source.EXPERT) and tl.anchor_source is Source.TRANSCRIBER
    return RecordingTurns(
        tl.recording_id, tl.duration_s, turns, paired if (penalize_omissions and both) else None
    )


def paired_slots(timelines: Sequence[AlignedTimeline], role: Role) -> list[tuple[Utterance | None, MergedAnnotation]]:
    """(anchor, expert annotation) for every unit the expert labels ``role``."""
    return [
        (unit.anchor, unit.expert)
        for tl in sorted(timelines, key=lambda t: t.recording_id)
        for unit in tl.units
        if unit.expert is not None and unit.expert.role is role
    ]
