"""Alignment, reliability and speech-feature metrics for classroom audio annotations.

The package works downstream of the speech models: it reads transcriber,
diarizer and expert annotation files, aligns them on the transcriber's
segments, and reports speaker-classification agreement, word error rate
and teacher/child speech features.
"""

__version__ = "0.1.0"

from .align import AlignedTimeline, AlignedUnit, align_pair, align_three_way, assign_overlaps
from .errors import AlignmentError, DegenerateWarning, InputError, MetricError, ParseError
from .ingest import (
    AnnotationStream,
    RawSpeakerClass,
    Role,
    Source,
    Utterance,
    parse_diarizer_csv,
    parse_expert_export,
    parse_transcriber_json,
)
from .text import classify_question, normalize_tokens
