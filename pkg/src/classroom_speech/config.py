"""Run configuration stored as a flat ``key = value`` text file."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import InputError
from .features import STOPWORD_MODES, ZERO_ALIGNMENT_SCOPES
from .ingest import RawSpeakerClass, Role, format_role_mapping, parse_role_mapping


@dataclass
class RunConfig:
    epoch_len_s: float = 120.0
    response_window_s: float = 2.5
    stopword_mode: str = "all"
    role_mapping: dict[RawSpeakerClass, Role] = field(default_factory=dict)
    missing_as_error: bool = False
    include_hyp_only: bool = True
    zero_alignment_scope: str = "question_responses"
    penalize_omissions: bool = True
    classifier: str = "expert"
    time_resolution_s: float = 0.1

    def __post_init__(self) -> None:
        if self.epoch_len_s <= 0:
            raise InputError("epoch_len_s must be positive")
        if self.response_window_s < 0:
            raise InputError("response_window_s must be non-negative")
        if self.stopword_mode not in STOPWORD_MODES:
            raise InputError(f"stopword_mode must be one of {STOPWORD_MODES}")
        if self.zero_alignment_scope not in ZERO_ALIGNMENT_SCOPES:
            raise InputError(f"zero_alignment_scope must be one of {ZERO_ALIGNMENT_SCOPES}")
        if self.classifier not in ("expert", "diarizer"):
            raise InputError("classifier must be 'expert' or 'diarizer'")
        if self.time_resolution_s != 0.1:
            raise InputError("only 0.1 s time resolution is supported")

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif f.name == "role_mapping":
                text = format_role_mapping(value)
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        values: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise InputError(f"config line {lineno}: expected 'key = value'")
            values[key.strip()] = value.strip()
        return cls().updated(values)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            return cls.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc.strerror}") from None

    def updated(self, values: dict[str, object]) -> "RunConfig":
        """Copy with string or typed overrides applied."""
        kwargs = {f.name: getattr(self, f.name) for f in fields(self)}
        types = {f.name: type(getattr(self, f.name)) for f in fields(self)}
        for key, value in values.items():
            if key not in kwargs:
                raise InputError(f"unknown config key {key!r}")
            if value is None:
                continue
            try:
                kwargs[key] = _coerce(key, types[key], value)
            except ValueError as exc:
                raise InputError(f"config key {key}: {exc}") from None
        return RunConfig(**kwargs)


def _coerce(key: str, typ: type, value: object) -> object:
    if not isinstance(value, str):
        return value
    if key == "role_mapping":
        return parse_role_mapping(value)
    if typ is bool:
        low = value.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if typ is float:
        return float(value)
    return value
