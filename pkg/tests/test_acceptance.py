"""Exit criteria for the toolkit, one test per criterion.

The terminal summary prints one PASS / FAIL / NOT RUN line per criterion.
"""

import itertools
import json
import os
import subprocess
import sys
import time
import warnings
from collections import Counter
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from classroom_speech.align import align_pair, merge_segments, represented_ids
from classroom_speech.audio import WavClip, dedup_repeats, read_wav, resample_to_16k, split_wav_file, write_wav
from classroom_speech.errors import DegenerateWarning
from classroom_speech.features import feature_table
from classroom_speech.ingest import AnnotationStream, RawSpeakerClass, Role, Source, Utterance
from classroom_speech.reliability import ConfusionMatrix, accuracy, class_f1, cohens_kappa, predictive_value
from classroom_speech.stats import icc_absolute
from classroom_speech.text import normalize_tokens
from classroom_speech.wer import corpus_wer, utterance_wer, word_levenshtein

from conftest import make_stream
from fixtures import DIALOGUE_EXPECTED, dialogue_recording, question_count_recording
from synthetic import make_corpus

RNG = np.random.default_rng(2024)
TAGS = list(RawSpeakerClass)


# -- 1 --------------------------------------------------------------------------------


def prefix_table_distances(lists):
    """Edit distance between every pair of ``lists`` by the three-way edit recursion.

    Every list's prefix is itself in ``lists``, so the recursion
    d(a, b) = min(d(a-, b) + 1, d(a, b-) + 1, d(a-, b-) + [a[-1] != b[-1]])
    is evaluated once per pair, shortest lists first.
    """
    index = {t: i for i, t in enumerate(lists)}
    n = len(lists)
    length = np.array([len(t) for t in lists])
    parent = np.array([index[t[:-1]] if t else 0 for t in lists])
    last = np.array([ord(t[-1]) if t else -1 for t in lists])
    d = np.zeros((n, n), dtype=np.int64)
    by_len = [np.flatnonzero(length == k) for k in range(length.max() + 1)]
    for la, rows in enumerate(by_len):
        for lb, cols in enumerate(by_len):
            if la == 0 or lb == 0:
                d[np.ix_(rows, cols)] = la + lb
                continue
            pr, pc = parent[rows], parent[cols]
            sub = d[np.ix_(pr, pc)] + (last[rows][:, None] != last[cols][None, :])
            d[np.ix_(rows, cols)] = np.minimum(sub, np.minimum(d[np.ix_(pr, cols)], d[np.ix_(rows, pc)]) + 1)
    return d


def recursive_distance(a, b):
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return len(a) - i + len(b) - j
        return min(go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (a[i] != b[j]))

    return go(0, 0)


@pytest.mark.acceptance(1, "Levenshtein DP equals recursion oracle")
def test_levenshtein_oracle():
    t0 = time.perf_counter()
    lists = [t for n in range(7) for t in itertools.product("xyz", repeat=n)]
    oracle = prefix_table_distances(lists)
    mismatches = sum(
        word_levenshtein(a, b) != oracle[i, j] for i, a in enumerate(lists) for j, b in enumerate(lists)
    )
    elapsed = time.perf_counter() - t0
    print(f"{len(lists) ** 2} exhaustive pairs in {elapsed:.1f} s, {mismatches} mismatches")
    assert mismatches == 0
    assert elapsed < 10.0

    rng = np.random.default_rng(1)
    for _ in range(1000):
        a = tuple(rng.choice(list("abcd"), rng.integers(0, 13)))
        b = tuple(rng.choice(list("abcd"), rng.integers(0, 13)))
        assert word_levenshtein(a, b) == recursive_distance(a, b)


# -- 2 --------------------------------------------------------------------------------


@pytest.mark.acceptance(2, "worked WER examples")
def test_worked_wer_examples():
    teacher = utterance_wer(
        normalize_tokens("What do you think is going to happen now?"), normalize_tokens("What do you think gonna happen?")
    )
    child = utterance_wer(normalize_tokens("it's going to explode yeah"), normalize_tokens("it's going to explode"))
    assert (teacher.ld, teacher.ref_len, round(teacher.wer, 2)) == (4, 6, 0.67)
    assert teacher.wer == 4 / 6
    assert (child.ld, child.ref_len, child.wer) == (1, 4, 0.25)
    pooled = corpus_wer([teacher, child])
    assert pooled.micro == 0.5 and round(pooled.macro, 3) == 0.458


# -- 3 --------------------------------------------------------------------------------


@pytest.mark.acceptance(3, "confusion-matrix metric fixture")
def test_metric_fixture():
    cm = ConfusionMatrix(((40, 10), (14, 36)))
    assert accuracy(cm) == 0.76
    assert abs(cohens_kappa(cm) - 0.52) <= 1e-12
    assert predictive_value(cm, Role.TEACHER) == 0.80
    assert predictive_value(cm, Role.CHILD) == 0.72
    assert abs(class_f1(cm, Role.TEACHER) - 0.7692) <= 1e-4


# -- 4 --------------------------------------------------------------------------------


@pytest.mark.acceptance(4, "kappa is 1 on diagonals and 0 at independence")
def test_kappa_properties():
    for _ in range(1000):
        x, y = RNG.integers(1, 10_000, 2)
        assert cohens_kappa(ConfusionMatrix(((x, 0), (0, y)))) == 1.0
    for _ in range(1000):
        r0, r1, c0, c1 = (int(v) for v in RNG.integers(1, 100, 4))
        cm = ConfusionMatrix(((r0 * c0, r0 * c1), (r1 * c0, r1 * c1)))
        assert abs(cohens_kappa(cm)) <= 1e-12


# -- 5 --------------------------------------------------------------------------------


def anova_mean_squares_icc(m):
    n, k = m.shape
    grand = m.mean()
    ss_rows = k * ((m.mean(axis=1) - grand) ** 2).sum()
    ss_cols = n * ((m.mean(axis=0) - grand) ** 2).sum()
    ss_err = ((m - grand) ** 2).sum() - ss_rows - ss_cols
    msr, msc, mse = ss_rows / (n - 1), ss_cols / (k - 1), ss_err / ((n - 1) * (k - 1))
    return (msr - mse) / (msr + (k - 1) * mse + (k / n) * (msc - mse))


@pytest.mark.acceptance(5, "ICC(A,1) matches ANOVA mean squares")
def test_icc_oracle():
    for _ in range(20):
        m = RNG.normal(3, 1, size=(5, 1)) + RNG.normal(0, 0.5, size=(5, 2))
        assert abs(icc_absolute(m) - anova_mean_squares_icc(m)) <= 1e-9
    with pytest.warns(DegenerateWarning):
        assert icc_absolute(np.full((4, 2), 7.5)) == 1.0
    col = RNG.normal(size=6)
    assert icc_absolute(np.column_stack([col, col])) == 1.0


# -- 6 --------------------------------------------------------------------------------


def random_stream(source, n, rng):
    starts = rng.integers(0, 600, n)
    lengths = rng.integers(1, 40, n)
    segs = [(s / 10, (s + d) / 10, TAGS[rng.integers(len(TAGS))], "hi") for s, d in zip(starts, lengths)]
    return make_stream(source, segs)


@pytest.mark.acceptance(6, "alignment conservation, self-alignment, merge rule")
def test_alignment_conservation():
    rng = np.random.default_rng(6)
    for _ in range(500):
        anchors = random_stream(Source.TRANSCRIBER, int(rng.integers(0, 30)), rng)
        sec = random_stream(Source.DIARIZER, int(rng.integers(0, 30)), rng)
        tl = align_pair(anchors, sec)
        expected = [u.id for u in anchors.utterances] + [u.id for u in sec.utterances]
        assert Counter(represented_ids(tl.units)) == Counter(expected)

    t, segs = 0, []
    for _ in range(50):
        start = t + int(rng.integers(0, 20))
        end = start + int(rng.integers(1, 30))
        segs.append((start / 10, end / 10, TAGS[rng.integers(len(TAGS))], "hello there"))
        t = end
    expert = make_stream(Source.EXPERT, segs)
    tl = align_pair(make_stream(Source.TRANSCRIBER, segs), expert)
    assert len(tl.units) == len(segs)
    assert all(u.expert.members == (e,) and u.expert.role is e.role for u, e in zip(tl.units, expert.utterances))

    anchor = Utterance.from_seconds("T0", Source.TRANSCRIBER, 0, 4)
    fixture = make_stream(Source.EXPERT, [(0, 1, "KCHI", ""), (1, 4, "FEM", "")])
    assert merge_segments(fixture.utterances, anchor).role is Role.TEACHER


# -- 7 --------------------------------------------------------------------------------


def transcriber(texts):
    utts = [Utterance.from_seconds(f"T{i}", Source.TRANSCRIBER, i, i + 0.5, raw_text=t) for i, t in enumerate(texts)]
    return AnnotationStream("r", Source.TRANSCRIBER, utts)


@pytest.mark.acceptance(7, "repetition dedup")
def test_dedup():
    for k in range(1, 9):
        out, removed = dedup_repeats(transcriber(["before"] + ["Where is it?"] * k + ["after"]))
        assert len(out) == 2 + min(k, 2) and removed == max(0, k - 2)
    rng = np.random.default_rng(7)
    for _ in range(300):
        texts = [str(rng.choice(["a", "b", "c d"])) for _ in range(int(rng.integers(0, 40)))]
        once, _ = dedup_repeats(transcriber(texts))
        twice, removed = dedup_repeats(once)
        assert removed == 0 and twice.utterances == once.utterances


# -- 8 --------------------------------------------------------------------------------


@pytest.mark.acceptance(8, "scripted dialogue features and 69/584")
def test_feature_fixture():
    table = feature_table([dialogue_recording()])
    for role, expected in DIALOGUE_EXPECTED.items():
        for name, value in expected.items():
            assert getattr(table[role], name) == pytest.approx(value, abs=1e-12), (role, name)
    child = feature_table([question_count_recording(69, 584)])[Role.CHILD]
    assert round(child.question_proportion, 3) == 0.118


# -- 9 --------------------------------------------------------------------------------


@pytest.mark.acceptance(9, "audio split/concat and resampler spectrum")
def test_audio(tmp_path):
    for i, (rate, channels, seconds) in enumerate([(16000, 1, 250.0), (8000, 2, 121.3), (44100, 1, 30.0)]):
        clip = WavClip(rate, channels, RNG.integers(-32768, 32768, int(rate * seconds) * channels, dtype=np.int16))
        write_wav(tmp_path / f"g{i}.wav", clip)
        manifest = split_wav_file(tmp_path / f"g{i}.wav", tmp_path / f"out{i}", 120)
        parts = [read_wav(tmp_path / f"out{i}" / e["file"]).samples for e in manifest["epochs"]]
        assert np.concatenate(parts).tobytes() == clip.samples.tobytes()

    t = np.arange(44100 * 2) / 44100
    out = resample_to_16k(WavClip(44100, 1, np.round(12000 * np.sin(2 * np.pi * 1000 * t)).astype(np.int16)))
    spectrum = np.abs(np.fft.rfft(out.samples.astype(float)))
    freqs = np.fft.rfftfreq(out.n_frames, 1 / 16000)
    assert abs(freqs[np.argmax(spectrum)] - 1000.0) <= freqs[1]


# -- 10 ---------------------------------------------------------------------------------


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "classroom_speech", *args], capture_output=True, text=True)


@pytest.mark.acceptance(10, "deterministic 10k-utterance pipeline under 60 s")
def test_pipeline_determinism_and_scale(tmp_path):
    recs = make_corpus(tmp_path / "corpus", n_utterances=10_000, n_recordings=8, seed=10)
    assert sum(len(r["expert"]) for r in recs) == 10_000
    outputs = []
    for run in ("a", "b"):
        t0 = time.perf_counter()
        proc = run_cli("pipeline", str(tmp_path / "corpus"), str(tmp_path / run))
        elapsed = time.perf_counter() - t0
        print(f"run {run}: exit {proc.returncode} in {elapsed:.1f} s")
        assert proc.returncode in (0, 1), proc.stderr
        assert elapsed < 60.0
        out = tmp_path / run
        outputs.append({p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    assert outputs[0] == outputs[1]
    assert {"reliability.csv", "wer_teacher.csv", "wer_child.csv", "features.csv", "icc.csv"} <= set(outputs[0])


# -- 11 ---------------------------------------------------------------------------------

DATA_ENV = "CLASSROOM_SPEECH_DATA"


@pytest.mark.acceptance(11, "released corpus reproduces published overall figures")
def test_released_corpus(tmp_path):
    data = os.environ.get(DATA_ENV)
    if not data:
        pytest.skip(f"released recordings not available; set {DATA_ENV} to a corpus directory")
    proc = run_cli("pipeline", data, str(tmp_path))
    assert proc.returncode in (0, 1), proc.stderr
    rows = (tmp_path / "reliability.csv").read_text().splitlines()
    header = rows[0].split(",")
    overall = dict(zip(header, rows[-1].split(",")))
    assert abs(float(overall["accuracy"]) - 0.76) <= 0.02
    assert abs(float(overall["weighted_f1"]) - 0.76) <= 0.02
    assert abs(float(overall["kappa"]) - 0.50) <= 0.02
    summary = json.loads((tmp_path / "wer_summary.json").read_text())
    for name, target in (("teacher", 0.147), ("child", 0.150)):
        assert summary[name] is not None
        assert min(abs(summary[name][mode] - target) for mode in ("micro", "macro")) <= 0.02
