"""Synchronize expert and diarizer streams onto the transcriber's segments.

The transcriber stream is the anchor. Every secondary segment is assigned
to the anchor it overlaps most; segments that overlap no anchor become
their own "blank-anchor" unit with an empty transcription. When several
secondary segments land on one anchor they are merged and the unit takes
the role that covers the longest stretch of the anchor.

All arithmetic is on integer deciseconds (see :mod:`.ingest`), so overlap
comparisons and ties are exact.
"""

from __future__ import annotations

import bisect
import json
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import AlignmentError, ParseError
from .ingest import AnnotationStream, RawSpeakerClass, Role, Source, Utterance


def overlap_ds(a_start: int, a_end: int, b_start: int, b_end: int) -> int:
    return max(0, min(a_end, b_end) - max(a_start, b_start))


@dataclass(frozen=True)
class MergedAnnotation:
    """One or more secondary segments folded onto a single unit."""

    members: tuple[Utterance, ...]
    role: Role
    speaker: RawSpeakerClass
    total_overlap_ds: int = 0

    @property
    def text(self) -> str:
        return " ".join(u.raw_text for u in self.members if u.raw_text)

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(t for u in self.members for t in u.tokens)

    @property
    def is_question(self) -> bool:
        return any(u.is_question for u in self.members)

    @property
    def start_ds(self) -> int:
        return min(u.start_ds for u in self.members)

    @property
    def end_ds(self) -> int:
        return max(u.end_ds for u in self.members)

    @property
    def total_overlap_s(self) -> float:
        return self.total_overlap_ds / 10

    def to_dict(self) -> dict:
        return {
            "role": self.role.value,
            "speaker": self.speaker.value,
            "text": self.text,
            "total_overlap_s": self.total_overlap_s,
            "members": [u.to_dict() for u in self.members],
        }

    @classmethod
    def from_dict(cls, d: Mapping, source: Source) -> "MergedAnnotation":
        return cls(
            members=tuple(Utterance.from_dict(m, source) for m in d["members"]),
            role=Role.parse(d["role"]),
            speaker=RawSpeakerClass.parse(d["speaker"]),
            total_overlap_ds=round(float(d.get("total_overlap_s", 0.0)) * 10),
        )


def _longest(weights: Mapping, order: Sequence) -> object:
    """Key with the largest weight; ties go to the key seen first in ``order``."""
    best = max(weights.values())
    tied = {k for k, w in weights.items() if w == best}
    return next(k for k in order if k in tied)


def merge_segments(members: Sequence[Utterance], anchor: Utterance | None) -> MergedAnnotation:
    """Fold segments assigned to ``anchor`` into one annotation.

    Role is the one with the largest summed overlap with the anchor; ties go
    to the role of the earliest-starting member. The raw speaker tag is
    chosen the same way among members of the winning role. Without an
    anchor each member weighs its own duration and the total overlap is 0.
    """
    if not members:
        raise ValueError("nothing to merge")
    members = tuple(sorted(members, key=lambda u: (u.start_ds, u.end_ds)))
    if anchor is None:
        weights = [u.end_ds - u.start_ds for u in members]
        total = 0
    else:
        weights = [overlap_ds(u.start_ds, u.end_ds, anchor.start_ds, anchor.end_ds) for u in members]
        total = sum(weights)

    by_role: dict[Role, int] = defaultdict(int)
    for u, w in zip(members, weights):
        by_role[u.role] += w
    role = _longest(by_role, [u.role for u in members])

    by_speaker: dict[RawSpeakerClass, int] = defaultdict(int)
    for u, w in zip(members, weights):
        if u.role is role:
            by_speaker[u.speaker] += w
    speaker = _longest(by_speaker, [u.speaker for u in members if u.role is role])
    return MergedAnnotation(members, role, speaker, total)


@dataclass
class AlignedUnit:
    """One row of the aligned timeline.

    ``start_ds``/``end_ds`` are the anchor's interval, or the span of the
    secondary segment(s) for a blank-anchor unit.
    """

    start_ds: int
    end_ds: int
    anchor: Utterance | None = None
    expert: MergedAnnotation | None = None
    diarizer: MergedAnnotation | None = None

    def __post_init__(self) -> None:
        if self.anchor is None and self.expert is None and self.diarizer is None:
            raise ValueError("an aligned unit needs at least one annotation")

    @property
    def start_s(self) -> float:
        return self.start_ds / 10

    @property
    def end_s(self) -> float:
        return self.end_ds / 10

    @property
    def is_blank_anchor(self) -> bool:
        return self.anchor is None

    @property
    def transcription(self) -> str:
        return self.anchor.raw_text if self.anchor else ""

    def members(self) -> Iterator[Utterance]:
        if self.anchor is not None:
            yield self.anchor
        for merged in (self.expert, self.diarizer):
            if merged is not None:
                yield from merged.members

    def to_dict(self) -> dict:
        return {
            "start_s": self.start_s,
            "end_s": self.end_s,
            "anchor": self.anchor.to_dict() if self.anchor else None,
            "expert": self.expert.to_dict() if self.expert else None,
            "diarizer": self.diarizer.to_dict() if self.diarizer else None,
        }


@dataclass
class AlignedTimeline:
    recording_id: str
    units: list[AlignedUnit]
    provenance: tuple[Source, ...] = ()
    anchor_source: Source = Source.TRANSCRIBER
    duration_s: float = 0.0
    wearer_role: Role = Role.OTHER
    stats: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        self.units = sorted(self.units, key=lambda u: (u.start_ds, u.end_ds))

    def has(self, source: Source) -> bool:
        return source in self.provenance

    def header(self) -> dict:
        return {
            "type": "timeline",
            "recording_id": self.recording_id,
            "anchor_source": self.anchor_source.value,
            "provenance": [s.value for s in self.provenance],
            "duration_s": self.duration_s,
            "wearer_role": self.wearer_role.value,
        }

    def summary(self) -> dict:
        return {
            "recording_id": self.recording_id,
            "units": len(self.units),
            "blank_anchor_units": sum(u.is_blank_anchor for u in self.units),
            "merges": sum(
                1
                for u in self.units
                for m in (u.expert, u.diarizer)
                if m is not None and len(m.members) > 1
            ),
        }


def _check_same_recording(*streams: AnnotationStream) -> None:
    ids = {s.recording_id for s in streams}
    if len(ids) > 1:
        raise AlignmentError("recording_id mismatch: " + " vs ".join(repr(s.recording_id) for s in streams))


def _assign(anchors: Sequence[Utterance], secondaries: Sequence[Utterance]) -> list[int | None]:
    """Index of the max-overlap anchor for each secondary (earlier anchor on ties)."""
    starts = [a.start_ds for a in anchors]
    # running max of anchor ends lets us skip anchors that end before s starts
    max_end = list(accumulate((a.end_ds for a in anchors), max))
    out: list[int | None] = []
    for s in secondaries:
        lo = bisect.bisect_right(max_end, s.start_ds)
        hi = bisect.bisect_left(starts, s.end_ds)
        best, best_ov = None, 0
        for i in range(lo, hi):
            a = anchors[i]
            ov = overlap_ds(s.start_ds, s.end_ds, a.start_ds, a.end_ds)
            if ov > best_ov:
                best, best_ov = i, ov
        out.append(best)
    return out


def assign_overlaps(anchor_stream: AnnotationStream, secondary_stream: AnnotationStream) -> dict[str, str | None]:
    """Map each secondary utterance id to its anchor's id (``None`` if unmatched)."""
    _check_same_recording(anchor_stream, secondary_stream)
    anchors = anchor_stream.utterances
    idx = _assign(anchors, secondary_stream.utterances)
    return {s.id: (anchors[i].id if i is not None else None) for s, i in zip(secondary_stream.utterances, idx)}


def _slot(source: Source) -> str:
    if source is Source.EXPERT:
        return "expert"
    if source is Source.DIARIZER:
        return "diarizer"
    raise AlignmentError(f"cannot align a {source.value} stream as secondary; expected Expert or Diarizer")


def align_pair(anchor_stream: AnnotationStream, secondary_stream: AnnotationStream) -> AlignedTimeline:
    """Align one secondary stream onto the anchor stream.

    Yields one unit per anchor (with or without a merged secondary) plus one
    blank-anchor unit per secondary segment that overlaps no anchor.
    """
    _check_same_recording(anchor_stream, secondary_stream)
    slot = _slot(secondary_stream.source)
    anchors = anchor_stream.utterances
    assigned: list[list[Utterance]] = [[] for _ in anchors]
    units = []
    for s, i in zip(secondary_stream.utterances, _assign(anchors, secondary_stream.utterances)):
        if i is None:
            units.append(AlignedUnit(s.start_ds, s.end_ds, **{slot: merge_segments([s], None)}))
        else:
            assigned[i].append(s)
    for a, members in zip(anchors, assigned):
        merged = merge_segments(members, a) if members else None
        units.append(AlignedUnit(a.start_ds, a.end_ds, anchor=a, **{slot: merged}))
    return AlignedTimeline(
        recording_id=anchor_stream.recording_id,
        units=units,
        provenance=(anchor_stream.source, secondary_stream.source),
        anchor_source=anchor_stream.source,
        duration_s=max(anchor_stream.duration_s, secondary_stream.duration_s),
        wearer_role=_wearer(anchor_stream, secondary_stream),
    )


def _wearer(*streams: AnnotationStream) -> Role:
    return next((s.wearer_role for s in streams if s.wearer_role is not Role.OTHER), Role.OTHER)


def _join_blanks(expert_blanks: list[AlignedUnit], diar_blanks: list[AlignedUnit]) -> list[AlignedUnit]:
    """Pair blank-anchor expert units with blank-anchor diarizer units one-to-one.

    Each expert blank picks the diarizer blank it overlaps most (earlier on
    ties). If two expert blanks pick the same diarizer blank, the larger
    overlap keeps it (earlier expert on ties); the other stays unpaired.
    """
    e_utts = [u.expert.members[0] for u in expert_blanks]
    d_utts = [u.diarizer.members[0] for u in diar_blanks]
    choice = _assign(d_utts, e_utts)
    winner: dict[int, int] = {}
    for ei, di in enumerate(choice):
        if di is None:
            continue
        ov = overlap_ds(e_utts[ei].start_ds, e_utts[ei].end_ds, d_utts[di].start_ds, d_utts[di].end_ds)
        prev = winner.get(di)
        if prev is None or ov > overlap_ds(
            e_utts[prev].start_ds, e_utts[prev].end_ds, d_utts[di].start_ds, d_utts[di].end_ds
        ):
            winner[di] = ei
    paired_e = {ei: di for di, ei in winner.items()}
    out = []
    for ei, eu in enumerate(expert_blanks):
        di = paired_e.get(ei)
        if di is None:
            out.append(eu)
        else:
            du = diar_blanks[di]
            out.append(
                AlignedUnit(
                    min(eu.start_ds, du.start_ds), max(eu.end_ds, du.end_ds),
                    expert=eu.expert, diarizer=du.diarizer,
                )
            )
    out.extend(du for di, du in enumerate(diar_blanks) if di not in winner)
    return out


def align_three_way(
    expert: AnnotationStream, transcriber: AnnotationStream, diarizer: AnnotationStream
) -> AlignedTimeline:
    """Align expert and diarizer onto the transcriber and join the results."""
    _check_same_recording(expert, transcriber, diarizer)
    with_expert = align_pair(transcriber, expert)
    with_diar = align_pair(transcriber, diarizer)

    # both runs hold the very same anchor objects
    diar_by_anchor = {id(u.anchor): u.diarizer for u in with_diar.units if u.anchor is not None}
    units = [
        AlignedUnit(u.start_ds, u.end_ds, anchor=u.anchor, expert=u.expert, diarizer=diar_by_anchor[id(u.anchor)])
        for u in with_expert.units
        if u.anchor is not None
    ]
    units += _join_blanks(
        [u for u in with_expert.units if u.anchor is None],
        [u for u in with_diar.units if u.anchor is None],
    )
    return AlignedTimeline(
        recording_id=transcriber.recording_id,
        units=units,
        provenance=(transcriber.source, expert.source, diarizer.source),
        anchor_source=transcriber.source,
        duration_s=max(s.duration_s for s in (expert, transcriber, diarizer)),
        wearer_role=_wearer(transcriber, expert, diarizer),
    )


# -- JSON lines --------------------------------------------------------------


def dumps_timeline(tl: AlignedTimeline) -> str:
    """Header line, then one unit per line."""
    lines = [json.dumps(tl.header(), ensure_ascii=False)]
    lines += [json.dumps({"type": "unit", **u.to_dict()}, ensure_ascii=False) for u in tl.units]
    return "\n".join(lines) + "\n"


def loads_timeline(data: str | bytes) -> AlignedTimeline:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = [ln for ln in data.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("timeline: empty file")
    try:
        header = json.loads(lines[0])
        if header.get("type") != "timeline":
            raise ParseError("timeline: first line must be the timeline header")
        anchor_source = Source(header["anchor_source"])
        units = []
        for ln in lines[1:]:
            d = json.loads(ln)
            units.append(
                AlignedUnit(
                    start_ds=round(d["start_s"] * 10),
                    end_ds=round(d["end_s"] * 10),
                    anchor=Utterance.from_dict(d["anchor"], anchor_source) if d["anchor"] else None,
                    expert=MergedAnnotation.from_dict(d["expert"], Source.EXPERT) if d["expert"] else None,
                    diarizer=MergedAnnotation.from_dict(d["diarizer"], Source.DIARIZER) if d["diarizer"] else None,
                )
            )
        return AlignedTimeline(
            recording_id=header["recording_id"],
            units=units,
            provenance=tuple(Source(s) for s in header["provenance"]),
            anchor_source=anchor_source,
            duration_s=float(header["duration_s"]),
            wearer_role=Role.parse(header["wearer_role"]),
        )
    except json.JSONDecodeError as exc:
        raise ParseError(f"timeline: malformed JSON line: {exc.msg}") from None
    except (KeyError, ValueError) as exc:
        raise ParseError(f"timeline: {exc}") from None


def represented_ids(units: Iterable[AlignedUnit]) -> list[str]:
    """Ids of every input utterance carried by ``units`` (with repeats, if any)."""
    return [u.id for unit in units for u in unit.members()]
