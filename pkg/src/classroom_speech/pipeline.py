"""Directory-level workflow: dedup, align, then every report.

A corpus directory holds, per recording id::

    <id>.transcriber.json   transcriber segments (required)
    <id>.expert.txt|.tsv    expert tab-delimited export (optional)
    <id>.diarizer.csv       diarizer output (optional)

plus an optional ``recordings.csv`` with ``recording_id,wearer_role,duration_s``.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import reports
from .align import AlignedTimeline, align_pair, align_three_way, dumps_timeline
from .audio import dedup_repeats
from .config import RunConfig
from .errors import DegenerateWarning, InputError
from .ingest import Role, Source, read_stream

_KINDS = {
    ".transcriber.json": "transcriber",
    ".expert.txt": "expert",
    ".expert.tsv": "expert",
    ".diarizer.csv": "diarizer",
}


@dataclass
class RecordingFiles:
    recording_id: str
    files: dict[str, Path] = field(default_factory=dict)
    wearer_role: Role | None = None
    duration_s: float | None = None


def _read_manifest(path: Path) -> dict[str, tuple[Role | None, float | None]]:
    out = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            try:
                role = Role.parse(row["wearer_role"]) if row.get("wearer_role") else None
                duration = float(row["duration_s"]) if row.get("duration_s") else None
                out[row["recording_id"]] = (role, duration)
            except (KeyError, ValueError) as exc:
                raise InputError(f"{path}: bad row {row}: {exc}") from None
    return out


def discover(in_dir: str | Path) -> list[RecordingFiles]:
    in_dir = Path(in_dir)
    if not in_dir.is_dir():
        raise InputError(f"{in_dir}: not a directory")
    found: dict[str, RecordingFiles] = {}
    for path in sorted(in_dir.iterdir()):
        for suffix, kind in _KINDS.items():
            if path.name.endswith(suffix):
                rec_id = path.name[: -len(suffix)]
                found.setdefault(rec_id, RecordingFiles(rec_id)).files[kind] = path
    manifest = in_dir / "recordings.csv"
    if manifest.exists():
        for rec_id, (role, duration) in _read_manifest(manifest).items():
            if rec_id in found:
                found[rec_id].wearer_role, found[rec_id].duration_s = role, duration
    recs = [found[k] for k in sorted(found)]
    missing = [r.recording_id for r in recs if "transcriber" not in r.files]
    if missing:
        raise InputError("no transcriber file for recording(s): " + ", ".join(missing))
    if not recs:
        raise InputError(f"{in_dir}: no recordings found")
    return recs


def process_recording(rec: RecordingFiles, cfg: RunConfig) -> tuple[AlignedTimeline, dict, list[str]]:
    """Dedup and align one recording. Runs in a worker process."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateWarning)
        kw = dict(
            recording_id=rec.recording_id,
            wearer_role=rec.wearer_role,
            duration_s=rec.duration_s,
            role_mapping=cfg.role_mapping,
        )
        streams = {kind: read_stream(path, kind, **kw) for kind, path in rec.files.items()}
        for s in streams.values():
            s.recording_id = rec.recording_id
        transcriber, removed = dedup_repeats(streams["transcriber"])
        if "expert" in streams and "diarizer" in streams:
            tl = align_three_way(streams["expert"], transcriber, streams["diarizer"])
        elif "expert" in streams or "diarizer" in streams:
            tl = align_pair(transcriber, streams.get("expert") or streams["diarizer"])
        else:
            raise InputError(f"{rec.recording_id}: needs an expert or diarizer file besides the transcriber")
        info = tl.summary()
        info["dedup_removed"] = removed
        info["parse_warnings"] = [w for s in streams.values() for w in s.warnings]
    return tl, info, [str(w.message) for w in caught if issubclass(w.category, DegenerateWarning)]


def _process(args: tuple[RecordingFiles, RunConfig]):
    return process_recording(*args)


def run_pipeline(in_dir: str | Path, out_dir: str | Path, cfg: RunConfig, jobs: int = 1) -> dict:
    """Process a corpus directory and write timelines and reports to ``out_dir``."""
    recs = discover(in_dir)
    out_dir = Path(out_dir)
    (out_dir / "timelines").mkdir(parents=True, exist_ok=True)

    tasks = [(r, cfg) for r in recs]
    if jobs > 1 and len(recs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_process, tasks))
    else:
        results = [_process(t) for t in tasks]

    timelines, per_recording = [], {}
    for tl, info, caught in results:
        for msg in caught:
            warnings.warn(msg, DegenerateWarning)
        timelines.append(tl)
        per_recording[tl.recording_id] = info
        (out_dir / "timelines" / f"{tl.recording_id}.timeline.jsonl").write_text(dumps_timeline(tl), encoding="utf-8")

    produced = []
    if all(t.has(Source.EXPERT) and t.has(Source.DIARIZER) for t in timelines):
        rows, details = reports.reliability_tables(timelines, cfg)
        reports.write_table(out_dir, "reliability", rows, reports.TABLE_COLUMNS)
        reports.write_json(out_dir / "reliability_details.json", details)
        produced.append("reliability")
    if all(t.has(Source.EXPERT) for t in timelines):
        tables, summary = reports.wer_tables(timelines, cfg)
        for name, rows in tables.items():
            reports.write_table(out_dir, f"wer_{name}", rows, reports.WER_COLUMNS)
        reports.write_json(out_dir / "wer_summary.json", summary)
        produced.append("wer")
    rows = reports.feature_tables(timelines, cfg)
    reports.write_table(out_dir, "features", rows, reports.FEATURE_COLUMNS)
    produced.append("features")
    if len(timelines) >= 3 and all(t.has(Source.EXPERT) for t in timelines):
        rows, extra = reports.icc_tables(timelines, cfg)
        reports.write_table(out_dir, "icc", rows, reports.ICC_COLUMNS)
        reports.write_json(out_dir / "correlations.json", extra)
        produced.append("icc")

    summary = {"recordings": per_recording, "reports": produced, "config": cfg.dumps().splitlines()}
    reports.write_json(out_dir / "pipeline_summary.json", summary)
    return summary
