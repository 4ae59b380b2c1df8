"""Teacher/child speaker-classification agreement between diarizer and expert.

Confusion matrices are indexed ``counts[predicted][expert]`` with Teacher
first and Child second; "predicted" is the diarizer's merged role on an
aligned unit and "expert" the expert's.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

from .align import AlignedTimeline
from .errors import DegenerateWarning, InputError, MetricError
from .ingest import Role, Source

ROLES = (Role.TEACHER, Role.CHILD)
_IDX = {Role.TEACHER: 0, Role.CHILD: 1}

TABLE_COLUMNS = ("file", "duration_min", "accuracy", "weighted_f1", "tpv", "cpv", "kappa")


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 counts, rows = predicted role, columns = expert role."""

    counts: tuple[tuple[int, int], tuple[int, int]] = ((0, 0), (0, 0))
    excluded: int = 0

    def __post_init__(self) -> None:
        counts = tuple(tuple(int(c) for c in row) for row in self.counts)
        if len(counts) != 2 or any(len(r) != 2 for r in counts):
            raise ValueError("confusion matrix must be 2x2")
        if any(c < 0 for r in counts for c in r):
            raise ValueError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    def __getitem__(self, key: tuple[Role, Role]) -> int:
        predicted, expert = key
        return self.counts[_IDX[predicted]][_IDX[expert]]

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            tuple(tuple(a + b for a, b in zip(ra, rb)) for ra, rb in zip(self.counts, other.counts)),
            self.excluded + other.excluded,
        )

    @property
    def total(self) -> int:
        return sum(map(sum, self.counts))

    def predicted_total(self, role: Role) -> int:
        return sum(self.counts[_IDX[role]])

    def expert_total(self, role: Role) -> int:
        return sum(row[_IDX[role]] for row in self.counts)


def build_confusion(timeline: AlignedTimeline, missing_as_error: bool = False) -> ConfusionMatrix:
    """Count units where both diarizer and expert assign Teacher or Child.

    Other units are excluded and counted in ``excluded``. With
    ``missing_as_error`` a unit whose expert role is known but whose
    diarizer role is missing or Other counts as a misclassification.
    """
    if not (timeline.has(Source.EXPERT) and timeline.has(Source.DIARIZER)):
        raise InputError(
            f"{timeline.recording_id}: reliability needs a timeline with both expert and diarizer streams"
        )
    counts = [[0, 0], [0, 0]]
    excluded = 0
    for unit in timeline.units:
        expert = unit.expert.role if unit.expert else None
        predicted = unit.diarizer.role if unit.diarizer else None
        if expert in _IDX and predicted in _IDX:
            counts[_IDX[predicted]][_IDX[expert]] += 1
        elif expert in _IDX and missing_as_error:
            counts[1 - _IDX[expert]][_IDX[expert]] += 1
        else:
            excluded += 1
    return ConfusionMatrix(tuple(map(tuple, counts)), excluded)


def _require_total(cm: ConfusionMatrix) -> int:
    if cm.total <= 0:
        raise MetricError("confusion matrix is empty")
    return cm.total


def accuracy(cm: ConfusionMatrix) -> float:
    total = _require_total(cm)
    return (cm.counts[0][0] + cm.counts[1][1]) / total


def cohens_kappa(cm: ConfusionMatrix) -> float:
    """Chance-corrected agreement from the row and column marginals.

    When a rater used a single class the statistic is degenerate: a
    :class:`DegenerateWarning` is issued, and expected agreement of 1 with
    perfect observed agreement is reported as 1.0.
    """
    total = _require_total(cm)
    p_o = (cm.counts[0][0] + cm.counts[1][1]) / total
    p_e = sum(cm.predicted_total(r) * cm.expert_total(r) for r in ROLES) / total**2
    if any(cm.predicted_total(r) in (0, total) or cm.expert_total(r) in (0, total) for r in ROLES):
        warnings.warn("kappa: one rater used a single class", DegenerateWarning, stacklevel=2)
    if p_e == 1:
        if p_o == 1:
            return 1.0
        raise MetricError("kappa undefined: expected agreement is 1")
    return (p_o - p_e) / (1 - p_e)


def predictive_value(cm: ConfusionMatrix, role: Role) -> float | None:
    """Share of diarizer-``role`` predictions the expert agrees with; None if none predicted."""
    predicted = cm.predicted_total(role)
    if predicted == 0:
        return None
    return cm[role, role] / predicted


def class_f1(cm: ConfusionMatrix, role: Role) -> float:
    tp = cm[role, role]
    fp = cm.predicted_total(role) - tp
    fn = cm.expert_total(role) - tp
    denom = 2 * tp + fp + fn
    if denom == 0:
        warnings.warn(f"F1 for {role.value}: no predictions or expert labels; reported as 0", DegenerateWarning, stacklevel=2)
        return 0.0
    return 2 * tp / denom


def weighted_f1(cm: ConfusionMatrix) -> float:
    """Per-class F1 averaged with weights equal to expert class counts."""
    total = _require_total(cm)
    return sum(class_f1(cm, r) * cm.expert_total(r) for r in ROLES if cm.expert_total(r)) / total


def reliability_row(file: str, duration_s: float, cm: ConfusionMatrix) -> dict:
    row = {"file": file, "duration_min": duration_s / 60}
    if cm.total == 0:
        row.update(accuracy=None, weighted_f1=None, tpv=None, cpv=None, kappa=None)
        return row
    row.update(
        accuracy=accuracy(cm),
        weighted_f1=weighted_f1(cm),
        tpv=predictive_value(cm, Role.TEACHER),
        cpv=predictive_value(cm, Role.CHILD),
        kappa=cohens_kappa(cm),
    )
    return row


def reliability_report(
    timelines: Sequence[AlignedTimeline], missing_as_error: bool = False
) -> tuple[list[dict], dict]:
    """Per-file rows (sorted by file) plus an Overall row on the pooled matrix.

    Returns ``(rows, details)``; ``details`` carries each file's matrix and
    exclusion count, which the summary rows have no column for.
    """
    if not timelines:
        raise InputError("reliability report needs at least one timeline")
    rows, details = [], {}
    pooled = ConfusionMatrix()
    duration = 0.0
    for tl in sorted(timelines, key=lambda t: t.recording_id):
        cm = build_confusion(tl, missing_as_error)
        rows.append(reliability_row(tl.recording_id, tl.duration_s, cm))
        details[tl.recording_id] = {"counts": [list(r) for r in cm.counts], "n": cm.total, "excluded": cm.excluded}
        pooled = pooled + cm
        duration += tl.duration_s
    if pooled.total == 0:
        raise MetricError("no unit carries both an expert and a diarizer Teacher/Child role")
    rows.append(reliability_row("Overall", duration, pooled))
    details["Overall"] = {"counts": [list(r) for r in pooled.counts], "n": pooled.total, "excluded": pooled.excluded}
    return rows, details
