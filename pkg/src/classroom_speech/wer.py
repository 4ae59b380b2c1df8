"""Word-level Levenshtein distance and word error rate."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Hashable, Iterable, NamedTuple, Sequence

from .align import AlignedTimeline
from .errors import DegenerateWarning, InputError, MetricError
from .ingest import RawSpeakerClass, Role, Source

WER_COLUMNS = ("unit_id", "ld", "ref_len", "hyp_len", "wer")


def word_levenshtein(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Minimum word insertions, deletions and substitutions turning ``a`` into ``b``."""
    # a shared prefix or suffix never costs anything
    lo, hi_a, hi_b = 0, len(a), len(b)
    while lo < hi_a and lo < hi_b and a[lo] == b[lo]:
        lo += 1
    while hi_a > lo and hi_b > lo and a[hi_a - 1] == b[hi_b - 1]:
        hi_a, hi_b = hi_a - 1, hi_b - 1
    a, b = a[lo:hi_a], b[lo:hi_b]
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        push = cur.append
        diag, left = prev[0], i
        for up, y in zip(prev[1:], b):
            v = diag + (x != y)
            if up + 1 < v:
                v = up + 1
            if left + 1 < v:
                v = left + 1
            push(v)
            diag, left = up, v
        prev = cur
    return prev[-1]


@dataclass(frozen=True)
class UtteranceWER:
    unit_id: str
    ld: int
    ref_len: int
    hyp_len: int

    @property
    def denominator(self) -> int:
        # hyp-only utterances count every hypothesis word as an error
        return self.ref_len if self.ref_len else self.hyp_len

    @property
    def wer(self) -> float:
        return self.ld / self.denominator

    def to_row(self) -> dict:
        return {"unit_id": self.unit_id, "ld": self.ld, "ref_len": self.ref_len, "hyp_len": self.hyp_len, "wer": self.wer}


def utterance_wer(hyp: Sequence[str], ref: Sequence[str], unit_id: str = "") -> UtteranceWER | None:
    """WER of one hypothesis against its reference; None (with a warning) if both are empty."""
    if not hyp and not ref:
        warnings.warn(f"unit {unit_id or '?'}: both transcriptions empty; skipped", DegenerateWarning, stacklevel=2)
        return None
    return UtteranceWER(unit_id, word_levenshtein(ref, hyp), len(ref), len(hyp))


class CorpusWER(NamedTuple):
    micro: float
    macro: float
    n: int


def corpus_wer(rows: Iterable[UtteranceWER], label: str = "selection") -> CorpusWER:
    """Micro (summed errors over summed denominators) and macro (mean per-utterance) WER."""
    rows = list(rows)
    if not rows:
        raise MetricError(f"no utterances selected by {label}")
    micro = sum(r.ld for r in rows) / sum(r.denominator for r in rows)
    macro = sum(r.wer for r in rows) / len(rows)
    return CorpusWER(micro, macro, len(rows))


class WerFilter(NamedTuple):
    """Which units count: recorder wearer plus an accepted speaker set."""

    name: str
    recorder_role: Role
    speaker_roles: frozenset[Role] = frozenset()
    speaker_classes: frozenset[RawSpeakerClass] = frozenset()

    def accepts(self, role: Role, speaker: RawSpeakerClass) -> bool:
        return role in self.speaker_roles or speaker in self.speaker_classes


TEACHER_WER = WerFilter("teacher", Role.TEACHER, speaker_roles=frozenset({Role.TEACHER}))
CHILD_WER = WerFilter("child", Role.CHILD, speaker_classes=frozenset({RawSpeakerClass.KCHI}))
_WEARER_DEFAULT = {Role.TEACHER: (Role.TEACHER, RawSpeakerClass.FEM), Role.CHILD: (Role.CHILD, RawSpeakerClass.KCHI)}


def unit_id(timeline: AlignedTimeline, index: int) -> str:
    return f"{timeline.recording_id}:{index:05d}"


def wer_rows(
    timelines: Sequence[AlignedTimeline], flt: WerFilter, include_hyp_only: bool = True
) -> list[UtteranceWER]:
    """Per-unit WER (transcriber vs expert) for the units ``flt`` selects.

    The speaker of a unit is the expert's merged annotation. A transcribed
    unit with no expert counterpart is kept only with ``include_hyp_only``
    and is attributed to the diarizer's speaker if present, else to the
    recorder wearer.
    """
    out = []
    for tl in sorted(timelines, key=lambda t: t.recording_id):
        if not tl.has(Source.EXPERT):
            raise InputError(f"{tl.recording_id}: WER needs a timeline aligned with the expert stream")
        if tl.wearer_role is not flt.recorder_role:
            continue
        for i, unit in enumerate(tl.units):
            hyp = unit.anchor.tokens if unit.anchor else ()
            if unit.expert is not None:
                role, speaker, ref = unit.expert.role, unit.expert.speaker, unit.expert.tokens
            elif unit.anchor is not None and include_hyp_only:
                if unit.diarizer is not None:
                    role, speaker = unit.diarizer.role, unit.diarizer.speaker
                else:
                    role, speaker = _WEARER_DEFAULT[tl.wearer_role]
                ref = ()
            else:
                continue
            if not flt.accepts(role, speaker):
                continue
            row = utterance_wer(hyp, ref, unit_id(tl, i))
            if row is not None:
                out.append(row)
    return out
