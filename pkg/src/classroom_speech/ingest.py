"""Parsers for transcriber, diarizer and expert annotation files.

All three formats are read into the same :class:`AnnotationStream` model.
Timestamps are quantized to tenths of a second when an :class:`Utterance`
is built and stored as integer deciseconds, so overlaps are computed in
exact integer arithmetic and serialization round-trips bit-exactly.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

from .errors import ParseError
from .text import classify_question, normalize_tokens

log = logging.getLogger(__name__)


class RawSpeakerClass(str, Enum):
    KCHI = "KCHI"
    CHI = "CHI"
    FEM = "FEM"
    MAL = "MAL"
    UNKNOWN = "UNKNOWN"

    @classmethod
    def parse(cls, tag: str) -> "RawSpeakerClass":
        """Map a label onto the closed tag set; anything else is UNKNOWN."""
        try:
            return cls(tag.strip().upper())
        except ValueError:
            return cls.UNKNOWN


class Role(str, Enum):
    TEACHER = "Teacher"
    CHILD = "Child"
    OTHER = "Other"

    @classmethod
    def parse(cls, value: str) -> "Role":
        for role in cls:
            if role.value.lower() == value.strip().lower():
                return role
        raise ValueError(f"unknown role {value!r}; expected one of Teacher, Child, Other")


class Source(str, Enum):
    TRANSCRIBER = "Transcriber"
    DIARIZER = "Diarizer"
    EXPERT = "Expert"


DEFAULT_ROLE_MAPPING: dict[RawSpeakerClass, Role] = {
    RawSpeakerClass.KCHI: Role.CHILD,
    RawSpeakerClass.CHI: Role.CHILD,
    RawSpeakerClass.FEM: Role.TEACHER,
    RawSpeakerClass.MAL: Role.TEACHER,
    RawSpeakerClass.UNKNOWN: Role.OTHER,
}

_ID_PREFIX = {Source.TRANSCRIBER: "T", Source.DIARIZER: "D", Source.EXPERT: "E"}


def resolve_role_mapping(
    overrides: Mapping[RawSpeakerClass, Role] | None = None,
) -> dict[RawSpeakerClass, Role]:
    mapping = dict(DEFAULT_ROLE_MAPPING)
    if overrides:
        mapping.update(overrides)
    return mapping


def parse_role_mapping(text: str) -> dict[RawSpeakerClass, Role]:
    """Parse ``"MAL=Other,CHI=Child"`` into a mapping override."""
    out: dict[RawSpeakerClass, Role] = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        tag, sep, role = item.partition("=")
        if not sep:
            raise ValueError(f"role mapping entry {item!r} is not TAG=Role")
        cls = RawSpeakerClass.parse(tag)
        if cls is RawSpeakerClass.UNKNOWN and tag.strip().upper() != "UNKNOWN":
            raise ValueError(f"role mapping names unknown speaker tag {tag.strip()!r}")
        out[cls] = Role.parse(role)
    return out


def format_role_mapping(mapping: Mapping[RawSpeakerClass, Role]) -> str:
    return ",".join(f"{cls.value}={role.value}" for cls, role in mapping.items())


def to_deciseconds(value: float | int | str) -> int:
    """Round a time in seconds to the nearest tenth (halves up), in deciseconds.

    Goes through the decimal string form so that 0.25 rounds to 0.3 rather
    than depending on its binary representation.
    """
    try:
        d = Decimal(str(value))
    except InvalidOperation:
        raise ValueError(f"not a number: {value!r}") from None
    if not d.is_finite():
        raise ValueError(f"not a finite time: {value!r}")
    return int((d * 10).quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class Utterance:
    """One timestamped speech segment from a single source."""

    id: str
    source: Source
    start_ds: int
    end_ds: int
    speaker: RawSpeakerClass = RawSpeakerClass.UNKNOWN
    role: Role = Role.OTHER
    raw_text: str = ""
    tokens: tuple[str, ...] = field(init=False, repr=False)
    is_question: bool = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.start_ds < 0:
            raise ValueError(f"utterance {self.id}: negative start {self.start_s}")
        if self.end_ds <= self.start_ds:
            raise ValueError(
                f"utterance {self.id}: end {self.end_s} is not after start {self.start_s}"
            )
        object.__setattr__(self, "tokens", tuple(normalize_tokens(self.raw_text)))
        object.__setattr__(self, "is_question", classify_question(self.raw_text))

    @classmethod
    def from_seconds(
        cls,
        id: str,
        source: Source,
        start_s: float,
        end_s: float,
        speaker: RawSpeakerClass = RawSpeakerClass.UNKNOWN,
        role: Role | None = None,
        raw_text: str = "",
        role_mapping: Mapping[RawSpeakerClass, Role] | None = None,
    ) -> "Utterance":
        if role is None:
            role = resolve_role_mapping(role_mapping)[speaker]
        return cls(id, source, to_deciseconds(start_s), to_deciseconds(end_s), speaker, role, raw_text)

    @property
    def start_s(self) -> float:
        return self.start_ds / 10

    @property
    def end_s(self) -> float:
        return self.end_ds / 10

    @property
    def duration_s(self) -> float:
        return (self.end_ds - self.start_ds) / 10

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "speaker": self.speaker.value,
            "role": self.role.value,
            "text": self.raw_text,
            "tokens": list(self.tokens),
            "is_question": self.is_question,
        }

    @classmethod
    def from_dict(cls, d: Mapping, source: Source) -> "Utterance":
        return cls(
            id=str(d["id"]),
            source=source,
            start_ds=to_deciseconds(d["start_s"]),
            end_ds=to_deciseconds(d["end_s"]),
            speaker=RawSpeakerClass.parse(d.get("speaker", "UNKNOWN")),
            role=Role.parse(d.get("role", "Other")),
            raw_text=d.get("text", ""),
        )


def _sort_key(u: Utterance) -> tuple[int, int]:
    return (u.start_ds, u.end_ds)


@dataclass
class AnnotationStream:
    """All utterances one source produced for one recording.

    ``duration_s`` is the clip length including silence. It is raised to the
    last utterance end if it was missing or too short.
    """

    recording_id: str
    source: Source
    utterances: list[Utterance] = field(default_factory=list)
    wearer_role: Role = Role.OTHER
    duration_s: float = 0.0
    warnings: list[str] = field(default_factory=list, compare=False)

    def __post_init__(self) -> None:
        # sorted() is stable, so ties keep parse order
        self.utterances = sorted(self.utterances, key=_sort_key)
        last_end = max((u.end_s for u in self.utterances), default=0.0)
        if self.duration_s < last_end:
            if self.duration_s > 0:
                self.warnings.append(
                    f"duration_s {self.duration_s} shorter than last utterance end {last_end}; extended"
                )
            self.duration_s = last_end

    def __len__(self) -> int:
        return len(self.utterances)

    def replace_utterances(self, utterances: Iterable[Utterance]) -> "AnnotationStream":
        return AnnotationStream(
            self.recording_id, self.source, list(utterances), self.wearer_role, self.duration_s
        )

    def to_dict(self) -> dict:
        return {
            "recording_id": self.recording_id,
            "source": self.source.value,
            "wearer_role": self.wearer_role.value,
            "duration_s": self.duration_s,
            "utterances": [u.to_dict() for u in self.utterances],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AnnotationStream":
        try:
            source = Source(d["source"])
            return cls(
                recording_id=str(d["recording_id"]),
                source=source,
                utterances=[Utterance.from_dict(u, source) for u in d["utterances"]],
                wearer_role=Role.parse(d.get("wearer_role", "Other")),
                duration_s=float(d.get("duration_s", 0.0)),
            )
        except KeyError as exc:
            raise ParseError(f"canonical stream: missing required field {exc.args[0]!r}") from None
        except ValueError as exc:
            raise ParseError(f"canonical stream: {exc}") from None


def dumps_stream(stream: AnnotationStream) -> str:
    """Serialize to the canonical interchange JSON."""
    return json.dumps(stream.to_dict(), ensure_ascii=False, indent=1) + "\n"


def loads_stream(data: bytes | str) -> AnnotationStream:
    return AnnotationStream.from_dict(_load_json(data))


def _decode(data: bytes | str) -> str:
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not UTF-8 (byte offset {exc.start})") from None


def _load_json(data: bytes | str):
    text = _decode(data)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        err = ParseError(f"malformed JSON at byte offset {offset}: {exc.msg}")
        err.offset = offset
        raise err from None


def _role_arg(value: Role | str | None, default: Role = Role.OTHER) -> Role:
    if value is None:
        return default
    return value if isinstance(value, Role) else Role.parse(value)


def parse_transcriber_json(
    data: bytes | str,
    *,
    recording_id: str | None = None,
    wearer_role: Role | str | None = None,
    duration_s: float | None = None,
    role_mapping: Mapping[RawSpeakerClass, Role] | None = None,
) -> AnnotationStream:
    """Parse Whisper-style ``{"segments": [{"start", "end", "text"}]}`` output.

    ``recording_id``, ``wearer_role`` and ``duration_s`` are used only when
    the document does not carry them itself. Transcriber output has no
    speaker identity, so every utterance is UNKNOWN.
    """
    doc = _load_json(data)
    if not isinstance(doc, dict):
        raise ParseError("transcriber JSON: top level must be an object")
    if "segments" not in doc:
        raise ParseError("transcriber JSON: missing required field 'segments'")
    segments = doc["segments"]
    if not isinstance(segments, list):
        raise ParseError("transcriber JSON: 'segments' must be an array")

    mapping = resolve_role_mapping(role_mapping)
    utterances, bad = [], []
    for i, seg in enumerate(segments):
        if not isinstance(seg, dict):
            raise ParseError(f"transcriber JSON: segment {i} is not an object")
        for key in ("start", "end", "text"):
            if key not in seg:
                raise ParseError(f"transcriber JSON: segment {i} missing required field {key!r}")
        try:
            start, end = to_deciseconds(seg["start"]), to_deciseconds(seg["end"])
        except ValueError as exc:
            raise ParseError(f"transcriber JSON: segment {i}: {exc}") from None
        if start < 0 or end <= start:
            bad.append(i)
            continue
        utterances.append(
            Utterance(
                f"T{i:05d}", Source.TRANSCRIBER, start, end,
                RawSpeakerClass.UNKNOWN, mapping[RawSpeakerClass.UNKNOWN], str(seg["text"]).strip(),
            )
        )
    if bad:
        err = ParseError(
            "transcriber JSON: rejected segment(s) with end <= start (or negative start) at index "
            + ", ".join(map(str, bad))
        )
        err.indices = bad
        raise err

    return AnnotationStream(
        recording_id=str(doc.get("recording_id") or recording_id or "recording"),
        source=Source.TRANSCRIBER,
        utterances=utterances,
        wearer_role=_role_arg(doc.get("wearer_role") or wearer_role),
        duration_s=float(doc.get("duration_s") or duration_s or 0.0),
    )


def _map_speaker(
    tag: str, where: str, mapping: Mapping[RawSpeakerClass, Role], warnings: list[str]
) -> tuple[RawSpeakerClass, Role]:
    cls = RawSpeakerClass.parse(tag)
    if cls is RawSpeakerClass.UNKNOWN and tag.strip().upper() != "UNKNOWN":
        msg = f"{where}: unknown speaker tag {tag.strip()!r} mapped to UNKNOWN"
        warnings.append(msg)
        log.warning(msg)
    return cls, mapping[cls]


def parse_diarizer_csv(
    data: bytes | str,
    *,
    recording_id: str = "recording",
    wearer_role: Role | str | None = None,
    duration_s: float | None = None,
    role_mapping: Mapping[RawSpeakerClass, Role] | None = None,
) -> AnnotationStream:
    """Parse ALICE-style ``onset,offset,speaker`` CSV (times in seconds)."""
    reader = csv.reader(io.StringIO(_decode(data)))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header[:3]] != ["onset", "offset", "speaker"]:
        raise ParseError("diarizer CSV: header must be 'onset,offset,speaker'")

    mapping = resolve_role_mapping(role_mapping)
    warnings: list[str] = []
    utterances = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 3:
            raise ParseError(f"diarizer CSV: row at line {line} has {len(row)} column(s), expected 3")
        try:
            start, end = to_deciseconds(row[0].strip()), to_deciseconds(row[1].strip())
        except ValueError:
            raise ParseError(f"diarizer CSV: non-numeric timestamp in row at line {line}") from None
        if start < 0 or end <= start:
            raise ParseError(f"diarizer CSV: row at line {line} has end <= start")
        cls, role = _map_speaker(row[2], f"diarizer CSV line {line}", mapping, warnings)
        utterances.append(Utterance(f"D{len(utterances):05d}", Source.DIARIZER, start, end, cls, role, ""))

    stream = AnnotationStream(
        recording_id, Source.DIARIZER, utterances, _role_arg(wearer_role), float(duration_s or 0.0)
    )
    stream.warnings[:0] = warnings
    return stream


class ExpertColumns(NamedTuple):
    """Zero-based column positions in the expert tab-delimited export."""

    tier: int = 0
    start: int = 1
    end: int = 2
    text: int = 3


_CLOCK = re.compile(r"^(?:(\d+):)?(\d+):(\d+(?:\.\d+)?)$")


def parse_time(value: str) -> float:
    """Seconds from ``12.5``, ``00:00:12.500`` or ``00:12.500``."""
    value = value.strip()
    m = _CLOCK.match(value)
    if m:
        hours, minutes, seconds = m.groups()
        return int(hours or 0) * 3600 + int(minutes) * 60 + float(seconds)
    return float(value)


def _parse_time_ds(value: str) -> int:
    # clock form goes through float; plain seconds keep their decimal string
    v = value.strip()
    return to_deciseconds(parse_time(v) if ":" in v else v)


def parse_expert_export(
    data: bytes | str,
    *,
    recording_id: str = "recording",
    wearer_role: Role | str | None = None,
    duration_s: float | None = None,
    role_mapping: Mapping[RawSpeakerClass, Role] | None = None,
    columns: ExpertColumns = ExpertColumns(),
) -> AnnotationStream:
    """Parse a tab-delimited ELAN export: tier, start, end, text per line.

    The tier name is the speaker class tag. A leading header line (start
    column reading ``start...`` or ``begin...``) is skipped. Tabs beyond the
    text column are kept as part of the text when text is the last column.
    """
    mapping = resolve_role_mapping(role_mapping)
    warnings: list[str] = []
    utterances = []
    needed = max(columns) + 1
    text_is_last = columns.text == max(columns)
    first = True
    for lineno, line in enumerate(_decode(data).splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if first:
            first = False
            if len(fields) > columns.start and fields[columns.start].strip().lower().startswith(("start", "begin")):
                continue
        if len(fields) < needed:
            raise ParseError(
                f"expert export: line {lineno} has {len(fields)} column(s), expected {needed}: {line!r}"
            )
        try:
            start, end = _parse_time_ds(fields[columns.start]), _parse_time_ds(fields[columns.end])
        except ValueError:
            raise ParseError(f"expert export: non-numeric timestamp on line {lineno}") from None
        if start < 0 or end <= start:
            raise ParseError(f"expert export: line {lineno} has end <= start")
        text = "\t".join(fields[columns.text:]) if text_is_last else fields[columns.text]
        cls, role = _map_speaker(fields[columns.tier], f"expert export line {lineno}", mapping, warnings)
        utterances.append(
            Utterance(f"E{len(utterances):05d}", Source.EXPERT, start, end, cls, role, text.strip())
        )

    stream = AnnotationStream(
        recording_id, Source.EXPERT, utterances, _role_arg(wearer_role), float(duration_s or 0.0)
    )
    stream.warnings[:0] = warnings
    return stream


FORMATS = ("canonical", "transcriber", "diarizer", "expert")


def sniff_format(path: Path, data: bytes) -> str:
    """Guess the input format from the extension and, for JSON, the keys."""
    suffix = path.suffix.lower()
    if suffix == ".json":
        doc = _load_json(data)
        return "canonical" if isinstance(doc, dict) and "utterances" in doc else "transcriber"
    if suffix == ".csv":
        return "diarizer"
    return "expert"


def read_stream(
    path: str | Path,
    fmt: str | None = None,
    *,
    recording_id: str | None = None,
    wearer_role: Role | str | None = None,
    duration_s: float | None = None,
    role_mapping: Mapping[RawSpeakerClass, Role] | None = None,
) -> AnnotationStream:
    """Read any supported annotation file into a stream.

    ``recording_id`` defaults to the file name up to its first dot, so
    ``clip01.expert.txt`` and ``clip01.diarizer.csv`` share ``clip01``.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    rec = recording_id or path.name.split(".")[0]
    try:
        fmt = fmt or sniff_format(path, data)
        if fmt == "canonical":
            return loads_stream(data)
        if fmt == "transcriber":
            return parse_transcriber_json(
                data, recording_id=rec, wearer_role=wearer_role, duration_s=duration_s, role_mapping=role_mapping
            )
        kwargs = dict(recording_id=rec, wearer_role=wearer_role, duration_s=duration_s, role_mapping=role_mapping)
        if fmt == "diarizer":
            return parse_diarizer_csv(data, **kwargs)
        if fmt == "expert":
            return parse_expert_export(data, **kwargs)
    except ParseError as exc:
        exc.args = (f"{path}: {exc}",)
        raise
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
