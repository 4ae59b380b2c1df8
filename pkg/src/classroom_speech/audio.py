"""Audio preparation ahead of the external transcriber and diarizer.

Recordings are cut into fixed-length epochs for the transcriber and
downsampled to 16 kHz mono for the diarizer. File-level helpers stream
through the WAV in blocks so multi-hour recordings are never fully loaded.
"""

from __future__ import annotations

import json
import wave
from dataclasses import dataclass
from itertools import groupby
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import InputError
from .ingest import AnnotationStream, Source

TARGET_RATE_HZ = 16000
DEFAULT_EPOCH_S = 120.0
_BLOCK_FRAMES = 1 << 16


@dataclass
class WavClip:
    """16-bit PCM audio; ``samples`` holds interleaved frames."""

    sample_rate_hz: int
    channels: int
    samples: np.ndarray
    origin_offset_s: float = 0.0
    bit_depth: int = 16

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")
        if self.channels not in (1, 2):
            raise ValueError("only mono or stereo clips are supported")
        if self.bit_depth != 16:
            raise ValueError("only 16-bit PCM is supported")
        self.samples = np.ascontiguousarray(self.samples, dtype=np.int16).reshape(-1)
        if self.samples.size % self.channels:
            raise ValueError("sample count is not a whole number of frames")

    @property
    def n_frames(self) -> int:
        return self.samples.size // self.channels

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate_hz

    def frames(self) -> np.ndarray:
        """Samples as an (n_frames, channels) view."""
        return self.samples.reshape(-1, self.channels)


def epoch_frames(sample_rate_hz: int, epoch_len_s: float) -> int:
    if epoch_len_s <= 0:
        raise ValueError("epoch length must be positive")
    n = int(round(epoch_len_s * sample_rate_hz))
    if n <= 0:
        raise ValueError("epoch shorter than one frame")
    return n


def split_epochs(clip: WavClip, epoch_len_s: float = DEFAULT_EPOCH_S) -> list[WavClip]:
    """Cut ``clip`` into consecutive epochs; the last one may be shorter."""
    step = epoch_frames(clip.sample_rate_hz, epoch_len_s)
    frames = clip.frames()
    return [
        WavClip(
            clip.sample_rate_hz,
            clip.channels,
            frames[start : start + step].reshape(-1).copy(),
            origin_offset_s=clip.origin_offset_s + start / clip.sample_rate_hz,
        )
        for start in range(0, clip.n_frames, step)
    ]


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, np.floor(x + 0.5), -np.floor(-x + 0.5))


def downmix(frames: np.ndarray) -> np.ndarray:
    """Channel mean of an (n, channels) block, rounded half away from zero."""
    if frames.shape[1] == 1:
        return frames[:, 0].astype(np.int64)
    return _round_half_away(frames.astype(np.int64).sum(axis=1) / frames.shape[1]).astype(np.int64)


def resampled_length(n_frames: int, in_rate: int, out_rate: int = TARGET_RATE_HZ) -> int:
    # round(n * out / in) with halves up, in integers
    return (2 * n_frames * out_rate + in_rate) // (2 * in_rate)


class LinearResampler:
    """Block-wise linear-interpolation resampler for a mono signal of known length.

    Output sample ``j`` sits at input position ``j * in_rate / out_rate``;
    positions past the last input sample hold the last value. Feeding the
    signal in any block sizes gives the same output as one call.
    """

    def __init__(self, in_rate: int, n_in: int, out_rate: int = TARGET_RATE_HZ):
        self.in_rate, self.out_rate, self.n_in = in_rate, out_rate, n_in
        self.n_out = resampled_length(n_in, in_rate, out_rate)
        self._next = 0
        self._buf = np.empty(0, dtype=np.int64)
        self._buf_start = 0
        self._received = 0

    def feed(self, mono: np.ndarray) -> np.ndarray:
        self._buf = np.concatenate([self._buf, np.asarray(mono, dtype=np.int64)])
        self._received += len(mono)
        if self._received > self.n_in:
            raise ValueError("resampler fed more frames than announced")
        if self._received == self.n_in:
            hi = self.n_out
        else:
            # j is ready once its right neighbour base+1 has arrived
            hi = min(self.n_out, -(-(self._received - 1) * self.out_rate // self.in_rate))
        if hi <= self._next:
            return np.empty(0, dtype=np.int16)

        j = np.arange(self._next, hi, dtype=np.int64)
        base = j * self.in_rate // self.out_rate
        frac = (j * self.in_rate % self.out_rate) / self.out_rate
        nxt = np.minimum(base + 1, self.n_in - 1)
        s0 = self._buf[base - self._buf_start]
        s1 = self._buf[nxt - self._buf_start]
        out = _round_half_away(s0 + (s1 - s0) * frac)

        self._next = hi
        keep_from = min(hi * self.in_rate // self.out_rate, self._received)
        self._buf = self._buf[keep_from - self._buf_start :]
        self._buf_start = keep_from
        return np.clip(out, -32768, 32767).astype(np.int16)


def resample_to_16k(clip: WavClip) -> WavClip:
    """Downmix to mono and resample to 16 kHz by linear interpolation."""
    if clip.sample_rate_hz < TARGET_RATE_HZ:
        raise ValueError(f"input rate {clip.sample_rate_hz} Hz is below 16000 Hz; upsampling unsupported")
    rs = LinearResampler(clip.sample_rate_hz, clip.n_frames)
    out = rs.feed(downmix(clip.frames())) if clip.n_frames else np.empty(0, dtype=np.int16)
    return WavClip(TARGET_RATE_HZ, 1, out, origin_offset_s=clip.origin_offset_s)


# -- files -----------------------------------------------------------------


def _open_wav(path: Path) -> wave.Wave_read:
    try:
        wf = wave.open(str(path), "rb")
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except (wave.Error, EOFError, OSError) as exc:
        raise InputError(f"{path}: invalid WAV file ({exc})") from None
    if wf.getsampwidth() != 2 or wf.getnchannels() not in (1, 2):
        wf.close()
        raise InputError(f"{path}: only 16-bit PCM mono/stereo WAV is supported")
    return wf


def _read_block(wf: wave.Wave_read, n: int, channels: int) -> np.ndarray:
    raw = wf.readframes(n)
    return np.frombuffer(raw, dtype="<i2").astype(np.int16).reshape(-1, channels)


def iter_wav_blocks(path: str | Path, block_frames: int = _BLOCK_FRAMES) -> Iterator[np.ndarray]:
    """Yield (frames, channels) int16 blocks of a WAV file."""
    with _open_wav(Path(path)) as wf:
        ch = wf.getnchannels()
        while True:
            block = _read_block(wf, block_frames, ch)
            if not len(block):
                return
            yield block


def read_wav(path: str | Path) -> WavClip:
    with _open_wav(Path(path)) as wf:
        rate, ch, n = wf.getframerate(), wf.getnchannels(), wf.getnframes()
        data = _read_block(wf, n, ch)
    return WavClip(rate, ch, data.reshape(-1))


def write_wav(path: str | Path, clip: WavClip) -> None:
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(clip.channels)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate_hz)
        wf.writeframes(clip.samples.astype("<i2").tobytes())


def epoch_filename(stem: str, index: int) -> str:
    return f"{stem}_e{index:04d}.wav"


def split_wav_file(src: str | Path, out_dir: str | Path, epoch_len_s: float = DEFAULT_EPOCH_S) -> dict:
    """Write ``<stem>_eNNNN.wav`` epochs of ``src`` and return the manifest.

    One epoch is held in memory at a time. The final epoch is kept even when
    shorter than ``epoch_len_s`` and is marked ``"partial": true``.
    """
    src, out_dir = Path(src), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    epochs = []
    with _open_wav(src) as wf:
        rate, ch = wf.getframerate(), wf.getnchannels()
        step = epoch_frames(rate, epoch_len_s)
        offset = 0
        while True:
            block = _read_block(wf, step, ch)
            if not len(block):
                break
            name = epoch_filename(src.stem, len(epochs))
            write_wav(out_dir / name, WavClip(rate, ch, block.reshape(-1), offset / rate))
            epochs.append(
                {
                    "file": name,
                    "index": len(epochs),
                    "offset_s": offset / rate,
                    "frames": len(block),
                    "partial": len(block) < step,
                }
            )
            offset += len(block)
    manifest = {
        "source": src.name,
        "sample_rate_hz": rate,
        "channels": ch,
        "epoch_len_s": epoch_len_s,
        "total_frames": offset,
        "epochs": epochs,
    }
    (out_dir / f"{src.stem}_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def resample_wav_file(src: str | Path, dst: str | Path) -> int:
    """Stream ``src`` through :class:`LinearResampler` into a 16 kHz mono ``dst``.

    Returns the number of output frames.
    """
    src = Path(src)
    with _open_wav(src) as wf:
        rate, n_in = wf.getframerate(), wf.getnframes()
    if rate < TARGET_RATE_HZ:
        raise InputError(f"{src}: rate {rate} Hz is below 16000 Hz; upsampling unsupported")
    rs = LinearResampler(rate, n_in)
    written = 0
    with wave.open(str(dst), "wb") as out:
        out.setnchannels(1)
        out.setsampwidth(2)
        out.setframerate(TARGET_RATE_HZ)
        for block in iter_wav_blocks(src):
            chunk = rs.feed(downmix(block))
            out.writeframes(chunk.astype("<i2").tobytes())
            written += len(chunk)
    return written


# -- transcript dedup --------------------------------------------------------


def dedup_repeats(stream: AnnotationStream, keep: int = 2) -> tuple[AnnotationStream, int]:
    """Drop the third and later copies in runs of identical consecutive utterances.

    Identity is on normalized tokens, so ``"Where is it?"`` and
    ``"where is it"`` belong to the same run. Returns the new stream and the
    number of utterances removed.
    """
    if stream.source is not Source.TRANSCRIBER:
        raise ValueError("dedup_repeats applies to transcriber streams only")
    kept = []
    for _, run in groupby(stream.utterances, key=lambda u: u.tokens):
        kept.extend(list(run)[:keep])
    return stream.replace_utterances(kept), len(stream.utterances) - len(kept)
