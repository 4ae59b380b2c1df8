"""Cross-method statistics: Pearson r, binary kappa and absolute-agreement ICC."""

from __future__ import annotations

import math
import warnings
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateWarning, MetricError


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Product-moment correlation; None when either side has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and the same length")
    if len(x) < 3:
        raise MetricError("pearson_r needs at least 3 pairs")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        return None
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def binary_kappa(pairs: Iterable[tuple[bool, bool]]) -> float:
    """Cohen's kappa for two boolean ratings of the same items.

    Issues a :class:`DegenerateWarning` when either rater gave only one
    answer; if chance agreement is then 1, the result is 1.0.
    """
    pairs = [(bool(a), bool(b)) for a, b in pairs]
    n = len(pairs)
    if n == 0:
        raise MetricError("binary_kappa needs at least one pair")
    agree = sum(a == b for a, b in pairs)
    a_true = sum(a for a, _ in pairs)
    b_true = sum(b for _, b in pairs)
    p_o = agree / n
    p_e = (a_true * b_true + (n - a_true) * (n - b_true)) / n**2
    if a_true in (0, n) or b_true in (0, n):
        warnings.warn("binary kappa: one rater gave a single answer", DegenerateWarning, stacklevel=2)
    if p_e == 1:
        return 1.0
    return (p_o - p_e) / (1 - p_e)


def icc_absolute(matrix: Sequence[Sequence[float | None]]) -> float:
    """ICC(A,1): two-way random effects, absolute agreement, single measure.

    Rows are the objects measured (audio files), columns the methods. An
    all-equal matrix has no variance at all and is reported as 1.0 with a
    :class:`DegenerateWarning`.
    """
    rows = [list(r) for r in matrix]
    missing = [(i, j) for i, r in enumerate(rows) for j, v in enumerate(r) if v is None or (isinstance(v, float) and math.isnan(v))]
    if missing:
        raise MetricError("ICC matrix has missing cells at (row, column): " + ", ".join(map(str, missing)))
    m = np.asarray(rows, dtype=float)
    if m.ndim != 2 or m.shape[1] < 2:
        raise MetricError("ICC matrix must be files x methods with at least 2 methods")
    n, k = m.shape
    if n < 3:
        raise MetricError(f"ICC needs at least 3 files, got {n}")

    if np.ptp(m) == 0:
        warnings.warn("ICC: all values identical; reported as 1.0", DegenerateWarning, stacklevel=2)
        return 1.0
    row_means = m.mean(axis=1)
    col_means = m.mean(axis=0)
    # grand mean via column means keeps identical columns exactly residual-free
    grand = col_means.mean()
    resid = m - row_means[:, None] - col_means[None, :] + grand
    msr = k * float(((row_means - grand) ** 2).sum()) / (n - 1)
    msc = n * float(((col_means - grand) ** 2).sum()) / (k - 1)
    mse = float((resid**2).sum()) / ((n - 1) * (k - 1))
    return (msr - mse) / (msr + (k - 1) * mse + (k / n) * (msc - mse))


# (feature label, FeatureSummary attribute) in report column order
ICC_CELLS = (
    ("mlu", "mlu"),
    ("questions_per_min", "questions_per_min"),
    ("non_questions_per_min", "non_questions_per_min"),
    ("prop_responses_to_questions", "prop_questions_responded"),
    ("prop_responses_to_non_questions", "prop_non_questions_responded"),
)
ICC_COLUMNS = ("role",) + tuple(label for label, _ in ICC_CELLS)


def icc_table(
    per_file: Mapping[str, Mapping[str, Mapping]],
    methods: tuple[str, str] = ("transcriber", "expert"),
    roles: Sequence[str] = ("Child", "Teacher"),
) -> tuple[list[dict], dict]:
    """ICC per (role, feature) with audio files as the unit of analysis.

    ``per_file[file][method][role]`` is a feature row (a FeatureSummary
    ``as_row()`` dict). A file is left out of a cell when either method
    has no value for it (say, no child questions to respond to); a cell
    with fewer than 3 complete files is None. Returns the rows and, per
    cell, the number of files used.
    """
    if len(per_file) < 3:
        raise MetricError(f"ICC table needs at least 3 files, got {len(per_file)}")
    rows, used = [], {}
    for role in roles:
        row: dict = {"role": role}
        for label, attr in ICC_CELLS:
            matrix = []
            for name in sorted(per_file):
                vals = [per_file[name][m][role].get(attr) for m in methods]
                if all(v is not None for v in vals):
                    matrix.append(vals)
            used[f"{role}.{label}"] = len(matrix)
            row[label] = icc_absolute(matrix) if len(matrix) >= 3 else None
        rows.append(row)
    return rows, used
