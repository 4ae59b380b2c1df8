from __future__ import annotations

import pytest

from classroom_speech.ingest import AnnotationStream, RawSpeakerClass, Role, Source, Utterance

ROLE_OF = {"KCHI": Role.CHILD, "CHI": Role.CHILD, "FEM": Role.TEACHER, "MAL": Role.TEACHER, "UNKNOWN": Role.OTHER}


def make_stream(source: Source, segments, recording_id: str = "rec", wearer_role: Role = Role.OTHER, duration_s: float = 0.0):
    """Build a stream from ``(start, end, tag, text)`` tuples."""
    prefix = source.value[0]
    utts = [
        Utterance.from_seconds(f"{prefix}{i}", source, s, e, RawSpeakerClass.parse(tag), raw_text=text)
        for i, (s, e, tag, text) in enumerate(segments)
    ]
    return AnnotationStream(recording_id, source, utts, wearer_role, duration_s)


@pytest.fixture
def stream_factory():
    return make_stream


# -- acceptance summary ------------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "NOT RUN"}[report.outcome]
        if report.skipped and isinstance(report.longrepr, tuple):
            status += f" ({report.longrepr[2].removeprefix('Skipped: ')})"
        _CRITERIA[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2} {title}: {status}")
