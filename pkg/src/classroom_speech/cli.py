"""Command-line entry point.

Exit status: 0 success, 1 report written but degenerate-statistic warnings
were raised, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path
from typing import Sequence

from . import __version__, reports
from .align import align_pair, align_three_way, dumps_timeline, loads_timeline
from .audio import dedup_repeats, resample_wav_file, split_wav_file
from .config import RunConfig
from .errors import DegenerateWarning, InputError, MetricError
from .ingest import FORMATS, dumps_stream, read_stream
from .pipeline import run_pipeline

EXIT_OK, EXIT_DEGENERATE, EXIT_INPUT = 0, 1, 2


def _config_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration (flags override --config)")
    g.add_argument("--config", type=Path, help="flat key = value config file")
    bool_keys = {"missing_as_error", "include_hyp_only", "penalize_omissions"}
    for key in RunConfig.keys():
        flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
        if key in bool_keys:
            g.add_argument(*flags, dest=key, action=argparse.BooleanOptionalAction, default=None)
        else:
            g.add_argument(*flags, dest=key, default=None, metavar=key.upper())
    return p


def _stream_meta(p: argparse.ArgumentParser) -> None:
    p.add_argument("--recording-id", help="used when the input does not name its recording")
    p.add_argument("--wearer-role", choices=["Teacher", "Child", "Other"], help="who wore the recorder")
    p.add_argument("--duration-s", type=float, help="clip length in seconds, silence included")


def build_parser() -> argparse.ArgumentParser:
    common = _config_parser()
    parser = argparse.ArgumentParser(prog="classroom-speech", description="Align classroom speech annotations and compute reliability, WER, feature and ICC reports.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse an annotation file into canonical stream JSON")
    p.add_argument("input", type=Path)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--emit-canonical", type=Path, help="output path (default: stdout)")
    _stream_meta(p)

    p = sub.add_parser("chunk", parents=[common], help="split a WAV into fixed-length epochs")
    p.add_argument("wav", type=Path)
    p.add_argument("out_dir", type=Path)

    p = sub.add_parser("resample", parents=[common], help="convert a WAV to 16 kHz mono")
    p.add_argument("wav", type=Path)
    p.add_argument("out", type=Path)

    p = sub.add_parser("dedup", parents=[common], help="drop repeated transcriber segments beyond the second")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--out", type=Path, help="canonical stream JSON (default: stdout)")
    _stream_meta(p)

    p = sub.add_parser("align", parents=[common], help="align expert and/or diarizer onto the transcriber")
    p.add_argument("--transcriber", type=Path, required=True)
    p.add_argument("--expert", type=Path)
    p.add_argument("--diarizer", type=Path)
    p.add_argument("--mode", choices=["auto", "pair", "three-way"], default="auto")
    p.add_argument("--dedup", action="store_true", help="dedup the transcriber stream first")
    p.add_argument("-o", "--out", type=Path, help="timeline JSON lines (default: stdout)")
    p.add_argument("--emit-canonical", type=Path, metavar="DIR", help="also write the parsed streams here")
    _stream_meta(p)

    for name, help_ in [
        ("reliability", "speaker-classification reliability (diarizer vs expert)"),
        ("wer", "word error rate (transcriber vs expert)"),
        ("features", "teacher/child speech features per method"),
        ("icc", "per-file intraclass correlations and correlation report"),
    ]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("timelines", nargs="+", type=Path, help="timeline files or directories of *.timeline.jsonl")
        p.add_argument("--out-dir", type=Path, help="write CSV/markdown here (default: markdown to stdout)")
        if name == "wer":
            p.add_argument("--filter", choices=["teacher", "child", "both"], default="both")

    p = sub.add_parser("pipeline", parents=[common], help="dedup, align and report a corpus directory")
    p.add_argument("in_dir", type=Path)
    p.add_argument("out_dir", type=Path)
    p.add_argument("--jobs", type=int, default=1)
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    return cfg.updated({k: getattr(args, k) for k in RunConfig.keys()})


def _meta(args: argparse.Namespace, cfg: RunConfig) -> dict:
    return dict(
        recording_id=args.recording_id,
        wearer_role=args.wearer_role,
        duration_s=args.duration_s,
        role_mapping=cfg.role_mapping,
    )


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


def cmd_ingest(args, cfg):
    stream = read_stream(args.input, args.format, **_meta(args, cfg))
    for w in stream.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _emit(dumps_stream(stream), args.emit_canonical)


def cmd_chunk(args, cfg):
    manifest = split_wav_file(args.wav, args.out_dir, cfg.epoch_len_s)
    print(f"{len(manifest['epochs'])} epoch(s) written to {args.out_dir}", file=sys.stderr)


def cmd_resample(args, cfg):
    n = resample_wav_file(args.wav, args.out)
    print(f"{n} frames at 16000 Hz written to {args.out}", file=sys.stderr)


def cmd_dedup(args, cfg):
    stream = read_stream(args.input, **_meta(args, cfg))
    deduped, removed = dedup_repeats(stream)
    print(f"removed {removed} repeated segment(s)", file=sys.stderr)
    _emit(dumps_stream(deduped), args.out)


def cmd_align(args, cfg):
    meta = _meta(args, cfg)
    transcriber = read_stream(args.transcriber, **meta)
    # secondaries default to the transcriber's recording id and metadata
    meta.update(
        recording_id=args.recording_id or transcriber.recording_id,
        wearer_role=args.wearer_role or transcriber.wearer_role,
        duration_s=args.duration_s or transcriber.duration_s,
    )
    expert = read_stream(args.expert, **meta) if args.expert else None
    diarizer = read_stream(args.diarizer, **meta) if args.diarizer else None
    if args.dedup:
        transcriber, removed = dedup_repeats(transcriber)
        print(f"removed {removed} repeated segment(s)", file=sys.stderr)

    mode = args.mode
    if mode == "auto":
        mode = "three-way" if expert and diarizer else "pair"
    if mode == "three-way":
        if not (expert and diarizer):
            raise InputError("three-way alignment needs --expert and --diarizer")
        tl = align_three_way(expert, transcriber, diarizer)
    else:
        if bool(expert) == bool(diarizer):
            raise InputError("pair alignment needs exactly one of --expert / --diarizer")
        tl = align_pair(transcriber, expert or diarizer)

    if args.emit_canonical:
        args.emit_canonical.mkdir(parents=True, exist_ok=True)
        for s in filter(None, (transcriber, expert, diarizer)):
            (args.emit_canonical / f"{s.recording_id}.{s.source.value.lower()}.json").write_text(
                dumps_stream(s), encoding="utf-8"
            )
    _emit(dumps_timeline(tl), args.out)
    print(json.dumps(tl.summary()), file=sys.stderr)


def read_timelines(paths: Sequence[Path]):
    files = []
    for p in paths:
        if p.is_dir():
            files += sorted(p.glob("*.timeline.jsonl"))
        elif p.exists():
            files.append(p)
        else:
            raise InputError(f"{p}: no such file or directory")
    if not files:
        raise InputError("no timeline files given")
    return [loads_timeline(f.read_bytes()) for f in files]


def cmd_report(timelines, which: str, cfg: RunConfig, out_dir: Path | None = None, wer_filter: str = "both") -> None:
    """Build one report kind and write it (or print markdown when ``out_dir`` is None)."""
    tables: list[tuple[str, list[dict], Sequence[str]]] = []
    extras: dict[str, object] = {}
    if which == "reliability":
        rows, details = reports.reliability_tables(timelines, cfg)
        tables.append(("reliability", rows, reports.TABLE_COLUMNS))
        extras["reliability_details.json"] = details
    elif which == "wer":
        names = ("teacher", "child") if wer_filter == "both" else (wer_filter,)
        per_unit, summary = reports.wer_tables(timelines, cfg, names)
        tables += [(f"wer_{n}", rows, reports.WER_COLUMNS) for n, rows in per_unit.items()]
        extras["wer_summary.json"] = summary
    elif which == "features":
        tables.append(("features", reports.feature_tables(timelines, cfg), reports.FEATURE_COLUMNS))
    elif which == "icc":
        rows, extra = reports.icc_tables(timelines, cfg)
        tables.append(("icc", rows, reports.ICC_COLUMNS))
        extras["correlations.json"] = extra
    else:
        raise ValueError(f"unknown report {which!r}")

    if out_dir is not None:
        for name, rows, cols in tables:
            reports.write_table(out_dir, name, rows, cols)
        for name, obj in extras.items():
            reports.write_json(out_dir / name, obj)
        return
    for name, rows, cols in tables:
        sys.stdout.write(f"## {name}\n\n" + reports.to_markdown(rows, cols) + "\n")
    for name, obj in extras.items():
        if name == "wer_summary.json":
            sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def cmd_pipeline(args, cfg):
    summary = run_pipeline(args.in_dir, args.out_dir, cfg, jobs=max(1, args.jobs))
    print(f"{len(summary['recordings'])} recording(s); reports: {', '.join(summary['reports'])}", file=sys.stderr)


COMMANDS = {
    "ingest": cmd_ingest,
    "chunk": cmd_chunk,
    "resample": cmd_resample,
    "dedup": cmd_dedup,
    "align": cmd_align,
    "pipeline": cmd_pipeline,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateWarning)
        try:
            cfg = load_config(args)
            if args.command in COMMANDS:
                COMMANDS[args.command](args, cfg)
            else:
                cmd_report(
                    read_timelines(args.timelines), args.command, cfg, args.out_dir, getattr(args, "filter", "both")
                )
        except (InputError, MetricError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    degenerate = [w for w in caught if issubclass(w.category, DegenerateWarning)]
    for w in degenerate:
        print(f"warning: {w.message}", file=sys.stderr)
    return EXIT_DEGENERATE if degenerate else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
