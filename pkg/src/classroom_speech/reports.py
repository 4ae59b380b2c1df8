"""Build reliability, WER, feature and ICC reports from aligned timelines and write them out."""

from __future__ import annotations

import csv
import io
import json
import warnings
from pathlib import Path
from typing import Sequence

from .align import AlignedTimeline
from .config import RunConfig
from .errors import DegenerateWarning, MetricError
from .features import METHODS, feature_table, paired_slots, turns_from_timeline
from .ingest import Role, Source
from .reliability import TABLE_COLUMNS, reliability_report
from .stats import ICC_COLUMNS, binary_kappa, icc_table, pearson_r
from .wer import CHILD_WER, TEACHER_WER, WER_COLUMNS, corpus_wer, wer_rows

FEATURE_COLUMNS = (
    "method",
    "role",
    "mlu",
    "words_per_minute",
    "total_utterances",
    "questions",
    "non_questions",
    "responses_to_questions",
    "responses_to_non_questions",
    "prop_questions_responded",
    "prop_non_questions_responded",
    "mean_latency_s",
    "prop_question_responses_zero_alignment",
)

# -- formatting ----------------------------------------------------------------


def _csv_cell(v: object) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(round(v, 6))
    return str(v)


def _md_cell(v: object) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return f"{v:.2f}"
    return str(v)


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=",", quotechar='"', lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_csv_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def to_markdown(rows: Sequence[dict], columns: Sequence[str]) -> str:
    lines = ["| " + " | ".join(columns) + " |", "|" + "|".join("---" for _ in columns) + "|"]
    lines += ["| " + " | ".join(_md_cell(row.get(c)) for c in columns) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def write_table(out_dir: Path, name: str, rows: Sequence[dict], columns: Sequence[str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{name}.csv").write_text(to_csv(rows, columns), encoding="utf-8")
    (out_dir / f"{name}.md").write_text(to_markdown(rows, columns), encoding="utf-8")


def write_json(path: Path, obj: object) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


# -- builders ------------------------------------------------------------------


def reliability_tables(timelines: Sequence[AlignedTimeline], cfg: RunConfig) -> tuple[list[dict], dict]:
    return reliability_report(timelines, cfg.missing_as_error)


def wer_tables(timelines: Sequence[AlignedTimeline], cfg: RunConfig, which: Sequence[str] = ("teacher", "child")) -> tuple[dict[str, list[dict]], dict]:
    """Per-utterance rows and a micro/macro summary per filter.

    With a single filter an empty selection is an error; when both are
    requested an empty one is reported as null with a warning.
    """
    filters = {"teacher": TEACHER_WER, "child": CHILD_WER}
    tables, summary = {}, {"include_hyp_only": cfg.include_hyp_only}
    for name in which:
        rows = wer_rows(timelines, filters[name], cfg.include_hyp_only)
        tables[name] = [r.to_row() for r in rows]
        try:
            c = corpus_wer(rows, f"the {name} filter")
        except MetricError as exc:
            if len(which) == 1:
                raise
            warnings.warn(str(exc), DegenerateWarning)
            summary[name] = None
            continue
        summary[name] = {"micro": c.micro, "macro": c.macro, "n": c.n}
    return tables, summary


def _methods_for(timelines: Sequence[AlignedTimeline]) -> list[str]:
    methods = []
    if all(t.anchor_source is Source.TRANSCRIBER for t in timelines):
        methods.append("transcriber")
    if all(t.has(Source.EXPERT) for t in timelines):
        methods.append("expert")
    return methods


def _recording_turns(tl: AlignedTimeline, method: str, cfg: RunConfig):
    return turns_from_timeline(tl, method, cfg.classifier, cfg.penalize_omissions)


def feature_tables(timelines: Sequence[AlignedTimeline], cfg: RunConfig) -> list[dict]:
    """Rows of (method, role): child rows first, then teacher rows."""
    if not timelines:
        raise MetricError("no timelines")
    ordered = sorted(timelines, key=lambda t: t.recording_id)
    summaries = {
        method: feature_table(
            [_recording_turns(tl, method, cfg) for tl in ordered],
            cfg.response_window_s,
            cfg.stopword_mode,
            cfg.zero_alignment_scope,
        )
        for method in _methods_for(ordered)
    }
    rows = []
    for role in (Role.CHILD, Role.TEACHER):
        for method, table in summaries.items():
            s = table[role]
            rows.append(
                {
                    "method": method,
                    "role": role.value,
                    "mlu": s.mlu,
                    "words_per_minute": s.words_per_minute,
                    "total_utterances": s.total_utterances,
                    "questions": s.questions,
                    "non_questions": s.non_questions,
                    "responses_to_questions": s.responses_received_to_questions,
                    "responses_to_non_questions": s.responses_received_to_non_questions,
                    "prop_questions_responded": s.prop_questions_responded,
                    "prop_non_questions_responded": s.prop_non_questions_responded,
                    "mean_latency_s": s.mean_response_latency_s,
                    "prop_question_responses_zero_alignment": s.prop_question_responses_zero_alignment,
                }
            )
    return rows


def per_file_features(timelines: Sequence[AlignedTimeline], cfg: RunConfig) -> dict[str, dict[str, dict]]:
    out: dict[str, dict[str, dict]] = {}
    for tl in sorted(timelines, key=lambda t: t.recording_id):
        out[tl.recording_id] = {}
        for method in METHODS:
            table = feature_table(
                [_recording_turns(tl, method, cfg)], cfg.response_window_s, cfg.stopword_mode, cfg.zero_alignment_scope
            )
            out[tl.recording_id][method] = {r.value: s.as_row() for r, s in table.items()}
    return out


def correlation_report(timelines: Sequence[AlignedTimeline]) -> dict:
    """Utterance-level MLU Pearson r and question-flag kappa, per role.

    MLU pairs cover every unit the expert labels with the role, a missed
    transcription counting 0 words. Question agreement uses only units
    where both the transcriber and the expert produced an utterance.
    """
    ordered = sorted(timelines, key=lambda t: t.recording_id)
    report = {}
    for role in (Role.CHILD, Role.TEACHER):
        slots = paired_slots(ordered, role)
        hyp = [len(a.tokens) if a else 0 for a, _ in slots]
        ref = [len(e.tokens) for _, e in slots]
        both = [(a.is_question, e.is_question) for a, e in slots if a is not None]
        entry: dict = {"mlu_pairs": len(slots), "question_pairs": len(both)}
        entry["mlu_pearson_r"] = pearson_r(hyp, ref) if len(slots) >= 3 else None
        if both:
            entry["question_agreement"] = sum(x == y for x, y in both) / len(both)
            entry["question_kappa"] = binary_kappa(both)
        else:
            entry["question_agreement"] = entry["question_kappa"] = None
        report[role.value] = entry
    return report


def icc_tables(timelines: Sequence[AlignedTimeline], cfg: RunConfig) -> tuple[list[dict], dict]:
    for tl in timelines:
        if not (tl.has(Source.EXPERT) and tl.anchor_source is Source.TRANSCRIBER):
            raise MetricError(f"{tl.recording_id}: ICC needs transcriber-anchored timelines with an expert stream")
    rows, used = icc_table(per_file_features(timelines, cfg))
    return rows, {"files_per_cell": used, "correlations": correlation_report(timelines)}


__all__ = [
    "TABLE_COLUMNS",
    "WER_COLUMNS",
    "FEATURE_COLUMNS",
    "ICC_COLUMNS",
    "to_csv",
    "to_markdown",
    "write_table",
    "write_json",
    "reliability_tables",
    "wer_tables",
    "feature_tables",
    "per_file_features",
    "correlation_report",
    "icc_tables",
]
