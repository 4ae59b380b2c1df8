"""Exception and warning types shared across the toolkit."""

from __future__ import annotations


class InputError(Exception):
    """Bad or unreadable input. The CLI maps this to exit status 2."""


class ParseError(InputError):
    """An annotation file could not be parsed."""


class AlignmentError(InputError):
    """Streams cannot be aligned (e.g. they belong to different recordings)."""


class MetricError(ValueError):
    """A metric is undefined for the given input (empty matrix, empty selection...)."""


class DegenerateWarning(UserWarning):
    """A statistic was computed under a degenerate-input convention.

    The value is still returned; the CLI exits with status 1 when any of
    these were raised while building a report.
    """
